//! The verification algorithm.
//!
//! Phase 1 discharges the essential conditions (Init, Prop, Inv) in one
//! parallel wave; any invalid or unknown result fails verification. A
//! second wave checks every CBroot and CBedge condition to build the
//! maximal CB-graph. Phase 2 checks that the graph connects every node.

mod graph;
mod triage;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

pub use graph::{is_connected, CbGraph};
pub use triage::{diagnose, RootConjunct, TriageCase, TriageReport};

use crate::model::{
    route_to_json, validate_interfaces, Interfaces, Network, NodeId, Route, ValidationError,
};
use crate::smt::encode::EncodeError;
use crate::smt::{check_validity, Encoder, Profile, SolverConfig, SolverError, SolverVerdict};
use crate::vc::{replay, Locus, Vc, VcGen, VcKind};

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub solver: SolverConfig,
    /// Number of concurrent solver processes.
    pub jobs: usize,
    pub profile: Profile,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            solver: SolverConfig::default(),
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            profile: Profile::Full,
        }
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("invalid input: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Config(Vec<ValidationError>),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Correct,
    Fail,
}

/// Why a VC did not pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Invalid { model: BTreeMap<String, Route> },
    Unknown { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub kind: VcKind,
    pub locus: Locus,
    pub label: String,
    pub outcome: Outcome,
    /// Concrete re-evaluation of the VC body under the model: `Some(false)`
    /// confirms the counterexample, `None` if it cannot be evaluated.
    pub replay: Option<bool>,
    pub triage: TriageReport,
}

impl Failure {
    pub fn model(&self) -> Option<&BTreeMap<String, Route>> {
        match &self.outcome {
            Outcome::Invalid { model } => Some(model),
            Outcome::Unknown { .. } => None,
        }
    }

    pub fn to_json(&self, net: &Network) -> Value {
        let outcome = match &self.outcome {
            Outcome::Invalid { model } => {
                let m: serde_json::Map<String, Value> = model
                    .iter()
                    .map(|(k, r)| (k.clone(), route_to_json(net, r)))
                    .collect();
                json!({"result": "invalid", "model": m})
            }
            Outcome::Unknown { reason } => json!({"result": "unknown", "reason": reason}),
        };
        json!({
            "vc": self.kind.name(),
            "locus": self.locus.render(net),
            "outcome": outcome,
            "replay": self.replay,
            "triage": self.triage.to_json(net),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub status: Status,
    /// Essential failures, or the saved CB counterexamples of unconnected
    /// nodes.
    pub failures: Vec<Failure>,
    pub unconnected: BTreeSet<NodeId>,
    pub cb_graph: CbGraph,
    /// Number of solver queries issued.
    pub queries: usize,
}

impl Verdict {
    pub fn is_correct(&self) -> bool {
        self.status == Status::Correct
    }

    pub fn to_json(&self, net: &Network) -> Value {
        json!({
            "status": match self.status { Status::Correct => "Correct", Status::Fail => "Fail" },
            "cbGraph": self.cb_graph.to_json(net),
            "unconnected": self.unconnected.iter().map(|&v| net.name(v)).collect::<Vec<_>>(),
            "failures": self.failures.iter().map(|f| f.to_json(net)).collect::<Vec<_>>(),
            "queries": self.queries,
        })
    }

    /// Human-readable summary.
    pub fn render(&self, net: &Network) -> String {
        let mut s = String::new();
        s.push_str(match self.status {
            Status::Correct => "Correct\n",
            Status::Fail => "Fail\n",
        });
        let roots: Vec<&str> = self.cb_graph.roots.iter().map(|&r| net.name(r)).collect();
        s.push_str(&format!("CB-roots: {}\n", roots.join(", ")));
        let edges: Vec<String> = self
            .cb_graph
            .edges
            .iter()
            .map(|&(u, v)| format!("{}->{}", net.name(u), net.name(v)))
            .collect();
        s.push_str(&format!(
            "CB-edges ({}): {}\n",
            edges.len(),
            edges.join(", ")
        ));
        if !self.unconnected.is_empty() {
            let un: Vec<&str> = self.unconnected.iter().map(|&v| net.name(v)).collect();
            s.push_str(&format!("unconnected: {}\n", un.join(", ")));
        }
        for f in &self.failures {
            s.push_str(&f.triage.render(net));
        }
        s
    }
}

struct Checked {
    vc: Vc,
    verdict: SolverVerdict,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, VerifyError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| VerifyError::Pool(e.to_string()))
}

fn discharge(
    pool: &rayon::ThreadPool,
    opts: &VerifyOptions,
    enc: &Encoder<'_>,
    vcs: Vec<Vc>,
) -> Result<Vec<Checked>, VerifyError> {
    let net = enc.network();
    pool.install(|| {
        vcs.into_par_iter()
            .map(|vc| {
                let verdict = check_validity(&opts.solver, enc, &vc.label(net), &vc.formula)?;
                Ok(Checked { vc, verdict })
            })
            .collect()
    })
}

fn failure(net: &Network, ifs: &Interfaces, c: &Checked) -> Option<Failure> {
    let (outcome, model, note) = match &c.verdict {
        SolverVerdict::Valid => return None,
        SolverVerdict::Invalid { model } => (
            Outcome::Invalid {
                model: model.clone(),
            },
            model.clone(),
            None,
        ),
        SolverVerdict::Unknown { reason } => (
            Outcome::Unknown {
                reason: reason.clone(),
            },
            BTreeMap::new(),
            Some(reason.clone()),
        ),
    };
    let replayed = match &outcome {
        Outcome::Invalid { model } => replay(net, ifs, &c.vc, model),
        Outcome::Unknown { .. } => None,
    };
    Some(Failure {
        kind: c.vc.kind,
        locus: c.vc.locus,
        label: c.vc.label(net),
        outcome,
        replay: replayed,
        triage: diagnose(net, ifs, &c.vc, &model, note),
    })
}

fn check_inputs(net: &Network, ifs: &Interfaces) -> Result<(), VerifyError> {
    let errors = validate_interfaces(net, ifs);
    if errors.is_empty() {
        Ok(())
    } else {
        Err(VerifyError::Config(errors))
    }
}

/// Maximal CB-graph: every root and edge whose condition is valid. Also
/// returns the failures of the remaining loci and the query count.
pub fn synthesize_cbgraph(
    net: &Network,
    ifs: &Interfaces,
    opts: &VerifyOptions,
) -> Result<(CbGraph, Vec<Failure>, usize), VerifyError> {
    check_inputs(net, ifs)?;
    let enc = Encoder::new(net, opts.profile)?;
    let pool = pool(opts.jobs)?;
    cb_wave(&pool, opts, &enc, ifs)
}

fn cb_wave(
    pool: &rayon::ThreadPool,
    opts: &VerifyOptions,
    enc: &Encoder<'_>,
    ifs: &Interfaces,
) -> Result<(CbGraph, Vec<Failure>, usize), VerifyError> {
    let net = enc.network();
    let vcs = VcGen::new(*enc, ifs).cb();
    let n = vcs.len();
    let checked = discharge(pool, opts, enc, vcs)?;
    let mut g = CbGraph::default();
    let mut failures = Vec::new();
    for c in &checked {
        match (&c.verdict, c.vc.locus) {
            (SolverVerdict::Valid, Locus::Node(v)) => {
                g.roots.insert(v);
            }
            (SolverVerdict::Valid, Locus::Edge(e)) => {
                g.edges.insert(net.endpoints(e));
            }
            _ => failures.extend(failure(net, ifs, c)),
        }
    }
    Ok((g, failures, n))
}

/// Runs the full algorithm.
pub fn verify(
    net: &Network,
    ifs: &Interfaces,
    opts: &VerifyOptions,
) -> Result<Verdict, VerifyError> {
    check_inputs(net, ifs)?;
    let enc = Encoder::new(net, opts.profile)?;
    let pool = pool(opts.jobs)?;

    let essential = VcGen::new(enc, ifs).essential();
    let mut queries = essential.len();
    let checked = discharge(&pool, opts, &enc, essential)?;
    let failures: Vec<Failure> = checked
        .iter()
        .filter_map(|c| failure(net, ifs, c))
        .collect();
    if !failures.is_empty() {
        return Ok(Verdict {
            status: Status::Fail,
            failures,
            unconnected: BTreeSet::new(),
            cb_graph: CbGraph::default(),
            queries,
        });
    }

    let (g, cb_failures, n) = cb_wave(&pool, opts, &enc, ifs)?;
    queries += n;
    let (connected, unconnected) = is_connected(&g, net);
    let failures = if connected {
        Vec::new()
    } else {
        cb_failures
            .into_iter()
            .filter(|f| concerns(net, f.locus, &unconnected))
            .collect()
    };
    Ok(Verdict {
        status: if connected {
            Status::Correct
        } else {
            Status::Fail
        },
        failures,
        unconnected,
        cb_graph: g,
        queries,
    })
}

/// The CBroot of an unconnected node or a CBedge into one.
fn concerns(net: &Network, locus: Locus, unconnected: &BTreeSet<NodeId>) -> bool {
    match locus {
        Locus::Node(v) => unconnected.contains(&v),
        Locus::Edge(e) => unconnected.contains(&net.endpoints(e).1),
    }
}

/// Checks the essential conditions plus CBroot for each declared root and
/// CBedge for each declared edge of `g`, and that `g` is connected. Used to
/// validate synthesized interfaces against the graph they were solved for.
pub fn verify_with_graph(
    net: &Network,
    ifs: &Interfaces,
    g: &CbGraph,
    opts: &VerifyOptions,
) -> Result<Verdict, VerifyError> {
    check_inputs(net, ifs)?;
    let enc = Encoder::new(net, opts.profile)?;
    let pool = pool(opts.jobs)?;
    let gen = VcGen::new(enc, ifs);
    let mut vcs = gen.essential();
    vcs.extend(g.roots.iter().map(|&v| gen.cbroot(v)));
    vcs.extend(
        g.edges
            .iter()
            .filter_map(|&(u, v)| net.edge(u, v))
            .map(|e| gen.cbedge(e)),
    );
    let queries = vcs.len();
    let checked = discharge(&pool, opts, &enc, vcs)?;
    let failures: Vec<Failure> = checked
        .iter()
        .filter_map(|c| failure(net, ifs, c))
        .collect();
    let (connected, unconnected) = is_connected(g, net);
    Ok(Verdict {
        status: if failures.is_empty() && connected {
            Status::Correct
        } else {
            Status::Fail
        },
        failures,
        unconnected,
        cb_graph: g.clone(),
        queries,
    })
}
