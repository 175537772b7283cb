//! Interface synthesis from a fixed CB-graph.
//!
//! The verification conditions become Horn clauses once `I` and `Q` are
//! left uninterpreted: one relation `I!v` and one `Q!v` per node. Any
//! model of the clauses is a pair of interface maps under which every VC
//! the graph needs is valid. Properties `Y` stay interpreted.
//!
//! Clauses are built from the shared merge and transfer encodings and then
//! flattened: relations take the presence flag and the five route fields
//! instead of the route datatype, which Horn engines handle poorly.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::model::{EdgeId, Interfaces, Network, NodeId, NodePredicate, SmtPredicate};
use crate::smt::encode::EncodeError;
use crate::smt::flatten::Flattener;
use crate::smt::sexp::{parse_all, Sexp};
use crate::smt::solver::{run_script, RunOutcome};
use crate::smt::{Encoder, Profile, SolverConfig, SolverError};
use crate::vc::{SU, SV};
use crate::verify::{
    is_connected, verify_with_graph, CbGraph, Verdict, VerifyError, VerifyOptions,
};

#[derive(Debug, Error)]
pub enum ChcError {
    #[error("CB-graph does not reach {}", .0.join(", "))]
    DisconnectedCbGraph(Vec<String>),
    #[error("property map has {got} entries for {expected} nodes")]
    PropertyArity { expected: usize, got: usize },
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("cannot read solver model: {0}")]
    Model(String),
    #[error("solution fails validation at {}", .failed.join(", "))]
    RoundTripFailure {
        failed: Vec<String>,
        verdict: Box<Verdict>,
    },
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

/// Which condition a clause comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RuleKind {
    Init(NodeId),
    Prop(NodeId),
    Inv(EdgeId),
    RootInit(NodeId),
    RootEdge(EdgeId),
    CbEdge(EdgeId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub kind: RuleKind,
    /// A closed Horn clause over scalar sorts.
    pub clause: Sexp,
}

/// A Horn clause system ready to hand to a solver.
#[derive(Debug, Clone)]
pub struct ChcSystem {
    pub profile: Profile,
    pub field_sorts: [String; 6],
    pub relations: Vec<String>,
    pub rules: Vec<Rule>,
}

/// Relation name for the invariant of node `v`.
pub fn inv_rel(v: NodeId) -> String {
    format!("I!{}", v.index())
}

/// Relation name for the stable interface of node `v`.
pub fn stable_rel(v: NodeId) -> String {
    format!("Q!{}", v.index())
}

/// Quantifies the flattened components of each route variable and binds
/// the variable itself to the rebuilt route term.
fn forall(enc: &Encoder<'_>, vars: &[&str], body: Sexp) -> Sexp {
    let sorts = enc.field_sorts();
    let mut binders = Vec::new();
    let mut lets = Vec::new();
    for v in vars {
        let comps: Vec<Sexp> = (0..6).map(|i| Sexp::atom(format!("{v}!{i}"))).collect();
        for (c, sort) in comps.iter().zip(&sorts) {
            binders.push(Sexp::list([c.clone(), Sexp::atom(sort.as_str())]));
        }
        let comps: [Sexp; 6] = comps.try_into().expect("six components");
        lets.push(Sexp::list([Sexp::atom(*v), enc.from_fields(&comps)]));
    }
    Sexp::app(
        "forall",
        [
            Sexp::list(binders),
            Sexp::app("let", [Sexp::list(lets), body]),
        ],
    )
}

fn horn(body: Vec<Sexp>, head: Sexp) -> Sexp {
    Sexp::app("=>", [Sexp::app("and", body), head])
}

impl ChcSystem {
    pub fn count(&self, pred: impl Fn(&RuleKind) -> bool) -> usize {
        self.rules.iter().filter(|r| pred(&r.kind)).count()
    }

    /// The SMT-LIB script, deterministic for a given input.
    pub fn script(&self) -> String {
        let mut s = String::from("(set-logic HORN)\n");
        // Inlining makes z3 report eliminated relations as quantified
        // formulas; other solvers answer `unsupported` and carry on.
        s.push_str("(set-option :fp.xform.inline_linear false)\n(set-option :fp.xform.inline_eager false)\n");
        let sorts = self.field_sorts.join(" ");
        for r in &self.relations {
            s.push_str(&format!("(declare-fun {r} ({sorts}) Bool)\n"));
        }
        for r in &self.rules {
            s.push_str(&format!("(assert {})\n", r.clause));
        }
        s.push_str("(check-sat)\n(get-model)\n(exit)\n");
        s
    }
}

/// Builds the clause system for `g`, which must reach every node.
pub fn emit_chc(
    net: &Network,
    properties: &[NodePredicate],
    g: &CbGraph,
    profile: Profile,
) -> Result<ChcSystem, ChcError> {
    if properties.len() != net.node_count() {
        return Err(ChcError::PropertyArity {
            expected: net.node_count(),
            got: properties.len(),
        });
    }
    let (connected, unreached) = is_connected(g, net);
    if !connected {
        return Err(ChcError::DisconnectedCbGraph(
            unreached.iter().map(|&v| net.name(v).to_string()).collect(),
        ));
    }
    let enc = Encoder::new(net, profile)?;
    let call = |rel: String, x: Sexp| Sexp::app(&rel, enc.fields(&x));
    let (su, sv) = (Sexp::atom(SU), Sexp::atom(SV));
    let wf = || vec![enc.well_formed(&su), enc.well_formed(&sv)];
    let step = |e: EdgeId| enc.merge(sv.clone(), enc.transfer(e, su.clone()));
    let edge_rule = |e: EdgeId, src: String, dst: String, head: String| {
        let mut body = wf();
        body.push(call(src, su.clone()));
        body.push(call(dst, sv.clone()));
        forall(&enc, &[SU, SV], horn(body, call(head, step(e))))
    };

    let mut rules = Vec::new();
    for v in net.nodes() {
        rules.push(Rule {
            kind: RuleKind::Init(v),
            clause: call(inv_rel(v), enc.route(net.init(v))),
        });
        let body = vec![
            enc.well_formed(&sv),
            call(stable_rel(v), sv.clone()),
            Sexp::app("not", [enc.node_predicate(&properties[v.index()], &sv)]),
        ];
        rules.push(Rule {
            kind: RuleKind::Prop(v),
            clause: forall(&enc, &[SV], horn(body, Sexp::atom("false"))),
        });
    }
    for (e, u, v) in net.edges() {
        rules.push(Rule {
            kind: RuleKind::Inv(e),
            clause: edge_rule(e, inv_rel(u), inv_rel(v), inv_rel(v)),
        });
    }
    for &v in &g.roots {
        rules.push(Rule {
            kind: RuleKind::RootInit(v),
            clause: call(stable_rel(v), enc.route(net.init(v))),
        });
        for &e in net.incoming(v) {
            let (u, _) = net.endpoints(e);
            rules.push(Rule {
                kind: RuleKind::RootEdge(e),
                clause: edge_rule(e, inv_rel(u), stable_rel(v), stable_rel(v)),
            });
        }
    }
    for &(u, v) in &g.edges {
        let e = net.edge(u, v).expect("CB-edges are network edges");
        rules.push(Rule {
            kind: RuleKind::CbEdge(e),
            clause: edge_rule(e, stable_rel(u), inv_rel(v), stable_rel(v)),
        });
    }
    let mut flat = Flattener::new(enc.no_route_fields());
    for r in &mut rules {
        r.clause = flat.scalar(&r.clause, &BTreeMap::new());
    }
    let relations = net
        .nodes()
        .flat_map(|v| [inv_rel(v), stable_rel(v)])
        .collect();
    Ok(ChcSystem {
        profile,
        field_sorts: enc.field_sorts(),
        relations,
        rules,
    })
}

/// Solved interpretations, one pair per node, as raw SMT terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChcSolution {
    pub invariants: Vec<SmtPredicate>,
    pub stable: Vec<SmtPredicate>,
    /// The solver's model text.
    pub raw: String,
}

impl ChcSolution {
    pub fn interfaces(&self, properties: &[NodePredicate]) -> Interfaces {
        Interfaces {
            i: self
                .invariants
                .iter()
                .cloned()
                .map(NodePredicate::Smt)
                .collect(),
            q: self
                .stable
                .iter()
                .cloned()
                .map(NodePredicate::Smt)
                .collect(),
            y: properties.to_vec(),
        }
    }

    /// Both interpretations per node, written over the field names `has`,
    /// `prefix`, `lp`, `len`, `visited` and `comms`. Best effort: the terms
    /// are the solver's, not a canonical form.
    pub fn render(&self, net: &Network) -> String {
        let mut s = String::new();
        for v in net.nodes() {
            s.push_str(&format!(
                "{}:\n  I = {}\n  Q = {}\n",
                net.name(v),
                readable(&self.invariants[v.index()]),
                readable(&self.stable[v.index()])
            ));
        }
        s
    }
}

const FIELD_NAMES: [&str; 6] = ["has", "prefix", "lp", "len", "visited", "comms"];

fn readable(p: &SmtPredicate) -> String {
    let Some([Sexp::Atom(h), binds, body]) = p.body.as_list() else {
        return p.body.to_string();
    };
    if h != "let" {
        return p.body.to_string();
    }
    let mut out = body.clone();
    for (b, name) in binds.as_list().unwrap_or_default().iter().zip(FIELD_NAMES) {
        if let Some([Sexp::Atom(x), _]) = b.as_list() {
            out = out.substitute(x, &Sexp::atom(name));
        }
    }
    out.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChcOutcome {
    Solved(ChcSolution),
    /// No interfaces make the graph valid for these properties.
    Infeasible,
    Unknown(String),
}

impl fmt::Display for ChcOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChcOutcome::Solved(_) => f.write_str("solved"),
            ChcOutcome::Infeasible => f.write_str("infeasible"),
            ChcOutcome::Unknown(r) => write!(f, "unknown ({r})"),
        }
    }
}

/// Parameter name of back-translated interpretations.
const ROUTE_PARAM: &str = "route!";

/// Reads `(define-fun NAME ((x0 S0) ... (x5 S5)) Bool BODY)` entries from a
/// model and rewrites each body over a single route parameter.
fn parse_definitions(
    enc: &Encoder<'_>,
    model: &Sexp,
) -> Result<BTreeMap<String, SmtPredicate>, ChcError> {
    let items = model
        .as_list()
        .ok_or_else(|| ChcError::Model(format!("not a list: {model}")))?;
    let route = Sexp::atom(ROUTE_PARAM);
    let mut fields = enc.fields(&route);
    if enc.profile() == Profile::Simple {
        // The solver saw only the low prefix bit. Extracting it keeps the
        // predicate well-sorted under either profile.
        let low_bit = Sexp::list([
            Sexp::list(["_", "extract", "0", "0"].map(Sexp::atom)),
            Sexp::app("prefix", [route.clone()]),
        ]);
        fields[1] = Sexp::app("ite", [fields[0].clone(), low_bit, Sexp::atom("#b0")]);
    }
    let mut defs = BTreeMap::new();
    for item in items {
        let Some([Sexp::Atom(kw), Sexp::Atom(name), params, _sort, body]) = item.as_list() else {
            continue;
        };
        if kw != "define-fun" {
            continue;
        }
        let params = params.as_list().unwrap_or_default();
        if params.len() != fields.len() {
            return Err(ChcError::Model(format!(
                "{name} takes {} arguments",
                params.len()
            )));
        }
        let mut binds = Vec::new();
        for (p, f) in params.iter().zip(&fields) {
            match p.as_list() {
                Some([x @ Sexp::Atom(_), _]) => binds.push(Sexp::list([x.clone(), f.clone()])),
                _ => return Err(ChcError::Model(format!("bad parameter list for {name}"))),
            }
        }
        let body = Sexp::app("let", [Sexp::list(binds), body.clone()]);
        defs.insert(
            name.clone(),
            SmtPredicate {
                param: ROUTE_PARAM.to_string(),
                body,
            },
        );
    }
    Ok(defs)
}

/// Runs a Horn solver on `sys`.
pub fn solve_chc(
    net: &Network,
    sys: &ChcSystem,
    cfg: &SolverConfig,
) -> Result<ChcOutcome, ChcError> {
    let label = "chc";
    let out = match run_script(cfg, label, &sys.script())? {
        RunOutcome::TimedOut => {
            return Ok(ChcOutcome::Unknown(format!(
                "timeout after {:?}",
                cfg.timeout
            )))
        }
        RunOutcome::Output(out) => out,
    };
    let responses = parse_all(&out).map_err(|e| ChcError::Model(e.to_string()))?;
    let responses: Vec<Sexp> = responses
        .into_iter()
        .skip_while(|r| r.as_atom() == Some("unsupported"))
        .collect();
    match responses.first().and_then(Sexp::as_atom) {
        Some("unsat") => Ok(ChcOutcome::Infeasible),
        Some("unknown") | Some("timeout") => {
            Ok(ChcOutcome::Unknown("solver returned unknown".into()))
        }
        Some("sat") => {
            let model = responses
                .get(1)
                .ok_or_else(|| ChcError::Model("no model after sat".into()))?;
            let model = match model.as_list() {
                Some([Sexp::Atom(m), rest @ ..]) if m == "model" => {
                    Sexp::list(rest.iter().cloned())
                }
                _ => model.clone(),
            };
            let enc = Encoder::new(net, sys.profile)?;
            let mut defs = parse_definitions(&enc, &model)?;
            let mut take = |rel: String| {
                defs.remove(&rel)
                    .ok_or_else(|| ChcError::Model(format!("no interpretation for {rel}")))
            };
            let mut invariants = Vec::new();
            let mut stable = Vec::new();
            for v in net.nodes() {
                invariants.push(take(inv_rel(v))?);
                stable.push(take(stable_rel(v))?);
            }
            Ok(ChcOutcome::Solved(ChcSolution {
                invariants,
                stable,
                raw: out,
            }))
        }
        _ => Err(ChcError::Solver(SolverError::Crash {
            label: label.to_string(),
            message: format!("unexpected output `{}`", out.trim()),
        })),
    }
}

/// Re-checks a solution with the verifier, forcing `g`: essential VCs,
/// CBroot of each declared root and CBedge of each declared edge.
pub fn validate_solution(
    net: &Network,
    ifs: &Interfaces,
    g: &CbGraph,
    opts: &VerifyOptions,
) -> Result<Verdict, ChcError> {
    let verdict = verify_with_graph(net, ifs, g, opts)?;
    if verdict.is_correct() {
        Ok(verdict)
    } else {
        let mut failed: Vec<String> = verdict.failures.iter().map(|f| f.label.clone()).collect();
        failed.extend(
            verdict
                .unconnected
                .iter()
                .map(|&v| format!("unconnected {}", net.name(v))),
        );
        Err(ChcError::RoundTripFailure {
            failed,
            verdict: Box::new(verdict),
        })
    }
}

/// Emits, solves and validates in one go.
pub fn synthesize(
    net: &Network,
    properties: &[NodePredicate],
    g: &CbGraph,
    opts: &VerifyOptions,
) -> Result<(ChcOutcome, Option<Verdict>), ChcError> {
    let sys = emit_chc(net, properties, g, opts.profile)?;
    let outcome = solve_chc(net, &sys, &opts.solver)?;
    let verdict = match &outcome {
        ChcOutcome::Solved(sol) => Some(validate_solution(
            net,
            &sol.interfaces(properties),
            g,
            opts,
        )?),
        _ => None,
    };
    Ok((outcome, verdict))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::gen_running_example;
    use crate::model::{NetworkBuilder, Predicate, Route, RouteAttrs};

    #[test]
    fn rule_counts_on_running_example() {
        let ex = gen_running_example();
        let net = &ex.network;
        let id = |s: &str| net.node(s).unwrap();
        let g = CbGraph::new(
            [id("A")],
            [(id("A"), id("B")), (id("A"), id("C")), (id("B"), id("E"))],
        );
        let sys = emit_chc(net, &ex.package1.y, &g, Profile::Full).unwrap();
        assert_eq!(sys.count(|k| matches!(k, RuleKind::Init(_))), 4);
        assert_eq!(sys.count(|k| matches!(k, RuleKind::Prop(_))), 4);
        assert_eq!(sys.count(|k| matches!(k, RuleKind::Inv(_))), 8);
        assert_eq!(
            sys.count(|k| matches!(k, RuleKind::RootInit(_) | RuleKind::RootEdge(_))),
            3
        );
        assert_eq!(sys.count(|k| matches!(k, RuleKind::CbEdge(_))), 3);
        assert_eq!(sys.rules.len(), 22);
        assert_eq!(
            sys.script(),
            emit_chc(net, &ex.package1.y, &g, Profile::Full)
                .unwrap()
                .script()
        );
    }

    #[test]
    fn empty_graph_is_disconnected() {
        let ex = gen_running_example();
        let err = emit_chc(
            &ex.network,
            &ex.package1.y,
            &CbGraph::default(),
            Profile::Full,
        )
        .unwrap_err();
        assert!(matches!(err, ChcError::DisconnectedCbGraph(ref v) if v.len() == 4));
    }

    #[test]
    fn single_root_node() {
        let mut b = NetworkBuilder::new(["solo"]);
        b.set_init("solo", Route::Valid(RouteAttrs::originate(1)));
        let net = b.build().unwrap();
        let g = CbGraph::new([NodeId(0)], []);
        let sys = emit_chc(
            &net,
            &[NodePredicate::Expr(Predicate::True)],
            &g,
            Profile::Full,
        )
        .unwrap();
        let kinds: Vec<RuleKind> = sys.rules.iter().map(|r| r.kind).collect();
        assert_eq!(
            kinds,
            vec![
                RuleKind::Init(NodeId(0)),
                RuleKind::Prop(NodeId(0)),
                RuleKind::RootInit(NodeId(0))
            ]
        );
    }

    #[test]
    fn model_definitions_are_parsed() {
        let ex = gen_running_example();
        let enc = Encoder::new(&ex.network, Profile::Simple).unwrap();
        let params = "((x!0 Bool) (x!1 (_ BitVec 1)) (x!2 Int) (x!3 Int) (x!4 (_ BitVec 4)) (x!5 (_ BitVec 1)))";
        let m = crate::smt::sexp::parse_one(&format!(
            "((define-fun I!0 {params} Bool true) (define-fun Q!0 {params} Bool x!0))"
        ))
        .unwrap();
        let defs = parse_definitions(&enc, &m).unwrap();
        assert_eq!(defs["Q!0"].param, ROUTE_PARAM);
        let q = NodePredicate::Smt(defs["Q!0"].clone());
        let term = enc.node_predicate(&q, &enc.route(&Route::NoRoute));
        assert!(term
            .to_string()
            .starts_with("(let ((route! NoRoute)) (let ((x!0 ((_ is Some) route!))"));
        let bad = crate::smt::sexp::parse_one("((define-fun I!0 ((x Bool)) Bool x))").unwrap();
        assert!(parse_definitions(&enc, &bad).is_err());
    }
}
