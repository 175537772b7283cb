//! Case tables for interpreting failed verification conditions.
//!
//! Each table lists what the user may believe about the counterexample
//! routes and the matching cause and suggested action. Beliefs are inputs
//! to the debugging process; the tables only render the options with the
//! concrete routes filled in.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::model::{route_to_json, EdgeId, Interfaces, Network, Route};
use crate::vc::{Locus, Vc, VcKind, SU, SV};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriageCase {
    pub belief: String,
    pub action: String,
}

/// Which conjunct of a CBroot condition failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootConjunct {
    Init,
    Edge(EdgeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriageReport {
    pub kind: VcKind,
    pub locus: String,
    /// `s_u`, `s_v` and the post-merge route `s_v'` where they apply.
    pub routes: Vec<(String, Route)>,
    pub conjunct: Option<RootConjunct>,
    pub cases: Vec<TriageCase>,
    pub note: Option<String>,
}

fn case(belief: impl Into<String>, action: impl Into<String>) -> TriageCase {
    TriageCase {
        belief: belief.into(),
        action: action.into(),
    }
}

/// Finds the failing CBroot conjunct by concrete evaluation. `None` when a
/// predicate involved is a raw SMT term.
fn root_conjunct(
    net: &Network,
    ifs: &Interfaces,
    v: crate::model::NodeId,
    su: &Route,
    sv: &Route,
) -> Option<RootConjunct> {
    let q = &ifs.q[v.index()];
    if !q.eval(net.init(v))? {
        return Some(RootConjunct::Init);
    }
    for &e in net.incoming(v) {
        let (u, _) = net.endpoints(e);
        let pre = ifs.i[u.index()].eval(su)? && q.eval(sv)?;
        let post = q.eval(&net.merge(sv, &net.apply_transfer(e, su)))?;
        if pre && !post {
            return Some(RootConjunct::Edge(e));
        }
    }
    None
}

/// Builds the case table for a failed VC. `model` is empty when the solver
/// gave no counterexample (an unknown result).
pub fn diagnose(
    net: &Network,
    ifs: &Interfaces,
    vc: &Vc,
    model: &BTreeMap<String, Route>,
    note: Option<String>,
) -> TriageReport {
    let su = model.get(SU).cloned();
    let sv = model.get(SV).cloned();
    let mut routes = Vec::new();
    let mut conjunct = None;
    let post = |e: EdgeId| -> Option<Route> {
        Some(net.merge(sv.as_ref()?, &net.apply_transfer(e, su.as_ref()?)))
    };
    let cases = match (vc.kind, vc.locus) {
        (VcKind::Init, Locus::Node(v)) => {
            let n = net.name(v);
            routes.push((SV.to_string(), net.init(v).clone()));
            vec![
                case(
                    format!("s_v = init({n}) is implausible"),
                    format!("init({n}) is wrong: bug in configuration"),
                ),
                case(
                    format!("s_v = init({n}) is plausible"),
                    format!("I({n}) is too strong: weaken it"),
                ),
            ]
        }
        (VcKind::Prop, Locus::Node(v)) => {
            let n = net.name(v);
            routes.extend(sv.clone().map(|r| (SV.to_string(), r)));
            vec![
                case(
                    "s_v is implausible",
                    format!("Q({n}) is too weak: strengthen it"),
                ),
                case(
                    "s_v is plausible",
                    format!("property Y({n}) fails on a plausible route"),
                ),
            ]
        }
        (VcKind::Inv, Locus::Edge(e)) => {
            let (u, v) = net.endpoints(e);
            let (un, vn) = (net.name(u), net.name(v));
            push_edge_routes(&mut routes, &su, &sv, post(e));
            vec![
                case(
                    "s_u or s_v is implausible",
                    format!("I({un}) or I({vn}) is too weak: strengthen it"),
                ),
                case(
                    "s_u, s_v and s_v' are plausible",
                    format!("I({vn}) is too strong: weaken I({vn})"),
                ),
                case(
                    "s_v' is implausible",
                    format!("f({un},{vn}) is wrong: repair the transfer"),
                ),
            ]
        }
        (VcKind::CbEdge, Locus::Edge(e)) => {
            let (u, v) = net.endpoints(e);
            let (un, vn) = (net.name(u), net.name(v));
            push_edge_routes(&mut routes, &su, &sv, post(e));
            vec![
                case(
                    format!("({un},{vn}) should not be a CB-edge"),
                    "skip this counterexample",
                ),
                case(
                    "s_u or s_v is implausible",
                    format!("Q({un}) or I({vn}) is too weak: strengthen it"),
                ),
                case(
                    "s_u, s_v and s_v' are plausible",
                    format!("Q({vn}) is too strong: weaken it"),
                ),
                case(
                    "s_v' is implausible",
                    format!("f({un},{vn}) is wrong: repair the transfer"),
                ),
            ]
        }
        (VcKind::CbRoot, Locus::Node(v)) => {
            let vn = net.name(v);
            let found = match (&su, &sv) {
                (Some(su), Some(sv)) => root_conjunct(net, ifs, v, su, sv),
                _ if ifs.q[v.index()].eval(net.init(v)) == Some(false) => Some(RootConjunct::Init),
                _ => None,
            };
            conjunct = found;
            let skip = case(
                format!("{vn} should not be a CB-root"),
                "skip this counterexample",
            );
            let init_rows = || {
                vec![
                    case(
                        format!("s_v = init({vn}) is implausible"),
                        format!("init({vn}) is wrong: bug in configuration"),
                    ),
                    case(
                        format!("s_v = init({vn}) is plausible"),
                        format!("Q({vn}) is too strong: weaken it"),
                    ),
                ]
            };
            let edge_rows = |un: &str| {
                vec![
                    case(
                        "s_u or s_v is implausible",
                        format!("I({un}) or Q({vn}) is too weak: strengthen it"),
                    ),
                    case(
                        "s_u, s_v and s_v' are plausible",
                        format!("Q({vn}) is too strong: weaken it"),
                    ),
                    case(
                        "s_v' is implausible",
                        format!("f({un},{vn}) is wrong: repair the transfer"),
                    ),
                ]
            };
            let mut rows = vec![skip];
            match found {
                Some(RootConjunct::Init) => {
                    routes.push((SV.to_string(), net.init(v).clone()));
                    rows.extend(init_rows());
                }
                Some(RootConjunct::Edge(e)) => {
                    let un = net.name(net.endpoints(e).0);
                    push_edge_routes(&mut routes, &su, &sv, post(e));
                    rows.extend(edge_rows(un));
                }
                None => {
                    rows.extend(init_rows());
                    rows.extend(edge_rows("u"));
                    push_edge_routes(&mut routes, &su, &sv, None);
                }
            }
            rows
        }
        _ => Vec::new(),
    };
    TriageReport {
        kind: vc.kind,
        locus: vc.locus.render(net),
        routes,
        conjunct,
        cases,
        note,
    }
}

fn push_edge_routes(
    routes: &mut Vec<(String, Route)>,
    su: &Option<Route>,
    sv: &Option<Route>,
    post: Option<Route>,
) {
    routes.extend(su.clone().map(|r| (SU.to_string(), r)));
    routes.extend(sv.clone().map(|r| (SV.to_string(), r)));
    routes.extend(post.map(|r| ("s_v'".to_string(), r)));
}

impl TriageReport {
    pub fn to_json(&self, net: &Network) -> Value {
        let routes: serde_json::Map<String, Value> = self
            .routes
            .iter()
            .map(|(k, r)| (k.clone(), route_to_json(net, r)))
            .collect();
        json!({
            "vc": self.kind.name(),
            "locus": self.locus,
            "routes": routes,
            "conjunct": self.conjunct.map(|c| match c {
                RootConjunct::Init => "init".to_string(),
                RootConjunct::Edge(e) => net.edge_label(e),
            }),
            "cases": self.cases.iter().map(|c| json!({"belief": c.belief, "action": c.action})).collect::<Vec<_>>(),
            "note": self.note,
        })
    }

    /// Plain-text rendering for terminals.
    pub fn render(&self, net: &Network) -> String {
        let mut s = format!("{}({}) violated\n", self.kind, self.locus);
        if let Some(note) = &self.note {
            s.push_str(&format!("  note: {note}\n"));
        }
        for (name, r) in &self.routes {
            s.push_str(&format!("  {name} = {}\n", route_to_json(net, r)));
        }
        for (i, c) in self.cases.iter().enumerate() {
            s.push_str(&format!("  case {}: {} -> {}\n", i + 1, c.belief, c.action));
        }
        s
    }
}
