//! Asynchronous network semantics.
//!
//! A schedule says which nodes are active at each step and, for each edge,
//! which send time a receiver reads at each receive time. Delay, loss and
//! duplication are all expressible through that read-time map, so no
//! message queues are kept.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::model::{route_to_json, EdgeId, Network, NodeId, NodePredicate, Route};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("schedule violation on edge {edge} at time {time}: reads send time {read}")]
    ScheduleViolation {
        edge: String,
        time: usize,
        read: usize,
    },
    #[error("schedule shape does not match the network: {0}")]
    ShapeMismatch(String),
    #[error("infeasible fairness profile: {0}")]
    InfeasibleProfile(String),
    #[error("predicate of node {0} cannot be evaluated concretely")]
    OpaquePredicate(String),
    #[error("window of {tail} steps does not fit horizon {horizon}")]
    BadWindow { tail: usize, horizon: usize },
}

/// Activation sets and read times over `0..=horizon`. Index 0 of each row is
/// unused: the state at time 0 is always the initial route.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub horizon: usize,
    /// `active[t]` is the set of nodes that recompute at time `t`.
    pub active: Vec<BTreeSet<NodeId>>,
    /// `read[e][t]` is the send time whose sender state edge `e` delivers at
    /// time `t`.
    pub read: Vec<Vec<usize>>,
}

impl Schedule {
    /// Every node active at every step, every edge reading the previous step.
    pub fn synchronous(net: &Network, horizon: usize) -> Self {
        let all: BTreeSet<NodeId> = net.nodes().collect();
        let mut active = vec![all; horizon + 1];
        active[0].clear();
        let row: Vec<usize> = (0..=horizon).map(|t| t.saturating_sub(1)).collect();
        Schedule {
            horizon,
            active,
            read: vec![row; net.edge_count()],
        }
    }

    /// Checks causality: every read time precedes its receive time.
    pub fn validate(&self, net: &Network) -> Result<(), SimError> {
        if self.active.len() != self.horizon + 1 {
            return Err(SimError::ShapeMismatch(format!(
                "{} activation sets for horizon {}",
                self.active.len(),
                self.horizon
            )));
        }
        if self.read.len() != net.edge_count() {
            return Err(SimError::ShapeMismatch(format!(
                "{} read rows for {} edges",
                self.read.len(),
                net.edge_count()
            )));
        }
        for (e, _, _) in net.edges() {
            let row = &self.read[e.index()];
            if row.len() != self.horizon + 1 {
                return Err(SimError::ShapeMismatch(format!(
                    "read row of {} has wrong length",
                    net.edge_label(e)
                )));
            }
            for t in 1..=self.horizon {
                if row[t] >= t {
                    return Err(SimError::ScheduleViolation {
                        edge: net.edge_label(e),
                        time: t,
                        read: row[t],
                    });
                }
            }
        }
        Ok(())
    }
}

/// Selected route of every node at every time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    /// `states[v][t]`.
    pub states: Vec<Vec<Route>>,
}

impl Trace {
    pub fn horizon(&self) -> usize {
        self.states.first().map_or(0, |row| row.len() - 1)
    }

    pub fn state(&self, v: NodeId, t: usize) -> &Route {
        &self.states[v.index()][t]
    }

    /// `{node: [route at t = 0, 1, ...]}`.
    pub fn to_json(&self, net: &Network) -> Value {
        let map: Map<String, Value> = net
            .nodes()
            .map(|v| {
                let row = self.states[v.index()]
                    .iter()
                    .map(|r| route_to_json(net, r))
                    .collect();
                (net.name(v).to_string(), Value::Array(row))
            })
            .collect();
        Value::Object(map)
    }
}

/// One recomputation at `v`: initial route merged with every neighbor's
/// transferred state, each read at the time `at(edge)` gives.
fn recompute(
    net: &Network,
    states: &[Vec<Route>],
    v: NodeId,
    at: impl Fn(EdgeId) -> usize,
) -> Route {
    net.incoming(v).iter().fold(net.init(v).clone(), |acc, &e| {
        let (u, _) = net.endpoints(e);
        net.merge(&acc, &net.apply_transfer(e, &states[u.index()][at(e)]))
    })
}

/// Executes the schedule.
pub fn run(net: &Network, sched: &Schedule) -> Result<Trace, SimError> {
    sched.validate(net)?;
    let mut states: Vec<Vec<Route>> = net
        .nodes()
        .map(|v| {
            let mut row = Vec::with_capacity(sched.horizon + 1);
            row.push(net.init(v).clone());
            row
        })
        .collect();
    for t in 1..=sched.horizon {
        for v in net.nodes() {
            let next = if sched.active[t].contains(&v) {
                recompute(net, &states, v, |e| sched.read[e.index()][t])
            } else {
                states[v.index()][t - 1].clone()
            };
            states[v.index()].push(next);
        }
    }
    Ok(Trace { states })
}

/// Recomputes every `(v, t)` from its neighbors and reports the first cell
/// where the trace disagrees with the recurrence.
pub fn local_check(net: &Network, sched: &Schedule, trace: &Trace) -> Option<(NodeId, usize)> {
    for v in net.nodes() {
        if trace.state(v, 0) != net.init(v) {
            return Some((v, 0));
        }
        for t in 1..=sched.horizon {
            let expected = if sched.active[t].contains(&v) {
                recompute(net, &trace.states, v, |e| sched.read[e.index()][t])
            } else {
                trace.state(v, t - 1).clone()
            };
            if &expected != trace.state(v, t) {
                return Some((v, t));
            }
        }
    }
    None
}

/// Generator parameters. Every node is activated at least once in every
/// `activation_period` consecutive steps; every live edge reads a send time
/// no older than `max_lag` steps. A failed edge keeps delivering the
/// message it read at its cutoff time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FairnessProfile {
    pub activation_period: usize,
    pub max_lag: usize,
    pub failed: BTreeMap<EdgeId, usize>,
}

impl Default for FairnessProfile {
    fn default() -> Self {
        FairnessProfile {
            activation_period: 3,
            max_lag: 3,
            failed: BTreeMap::new(),
        }
    }
}

impl FairnessProfile {
    pub fn new(activation_period: usize, max_lag: usize) -> Self {
        FairnessProfile {
            activation_period,
            max_lag,
            failed: BTreeMap::new(),
        }
    }

    pub fn with_failure(mut self, e: EdgeId, cutoff: usize) -> Self {
        self.failed.insert(e, cutoff);
        self
    }

    /// A horizon after which every node has converged when nothing fails:
    /// each CB-edge hop settles within one lag plus one activation period.
    pub fn settling_horizon(&self, net: &Network, tail: usize) -> usize {
        net.node_count() * (self.activation_period + self.max_lag) + tail
    }
}

/// Draws a schedule that satisfies the bounded fairness conditions of
/// `profile`. Deterministic in `seed`.
pub fn random_fair_schedule(
    net: &Network,
    seed: u64,
    horizon: usize,
    profile: &FairnessProfile,
) -> Result<Schedule, SimError> {
    if profile.activation_period == 0 || profile.max_lag == 0 {
        return Err(SimError::InfeasibleProfile(
            "periods must be positive".into(),
        ));
    }
    if profile.activation_period > horizon.max(1) || profile.max_lag > horizon.max(1) {
        return Err(SimError::InfeasibleProfile(format!(
            "bounds ({}, {}) exceed horizon {horizon}",
            profile.activation_period, profile.max_lag
        )));
    }
    if let Some(e) = profile
        .failed
        .keys()
        .find(|e| e.index() >= net.edge_count())
    {
        return Err(SimError::InfeasibleProfile(format!(
            "unknown failed edge #{}",
            e.index()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut active = vec![BTreeSet::new(); horizon + 1];
    let mut last_active = vec![0usize; net.node_count()];
    let mut read = vec![vec![0usize; horizon + 1]; net.edge_count()];
    for t in 1..=horizon {
        for v in net.nodes() {
            let forced = t - last_active[v.index()] >= profile.activation_period;
            if forced || rng.gen_bool(0.5) {
                active[t].insert(v);
                last_active[v.index()] = t;
            }
        }
        for (e, _, _) in net.edges() {
            let prev = read[e.index()][t - 1];
            let frozen = profile.failed.get(&e).is_some_and(|&cutoff| t > cutoff);
            read[e.index()][t] = if frozen {
                prev
            } else {
                let lo = prev.max(t.saturating_sub(profile.max_lag));
                rng.gen_range(lo..t)
            };
        }
    }
    Ok(Schedule {
        horizon,
        active,
        read,
    })
}

fn eval(p: &NodePredicate, net: &Network, v: NodeId, r: &Route) -> Result<bool, SimError> {
    p.eval(r)
        .ok_or_else(|| SimError::OpaquePredicate(net.name(v).to_string()))
}

/// For each node, whether its state satisfies `preds[v]` at every time in
/// the last `tail` steps.
pub fn check_abstract_convergence(
    net: &Network,
    trace: &Trace,
    preds: &[NodePredicate],
    tail: usize,
) -> Result<BTreeMap<NodeId, bool>, SimError> {
    let horizon = trace.horizon();
    if tail == 0 || tail > horizon {
        return Err(SimError::BadWindow { tail, horizon });
    }
    let mut out = BTreeMap::new();
    for v in net.nodes() {
        let mut ok = true;
        for t in horizon + 1 - tail..=horizon {
            ok &= eval(&preds[v.index()], net, v, trace.state(v, t))?;
        }
        out.insert(v, ok);
    }
    Ok(out)
}

/// Cells `(v, t)` whose state falls outside `preds[v]`.
pub fn invariant_violations(
    net: &Network,
    trace: &Trace,
    preds: &[NodePredicate],
) -> Result<Vec<(NodeId, usize)>, SimError> {
    let mut bad = Vec::new();
    for v in net.nodes() {
        for (t, r) in trace.states[v.index()].iter().enumerate() {
            if !eval(&preds[v.index()], net, v, r)? {
                bad.push((v, t));
            }
        }
    }
    Ok(bad)
}

/// Whether the trace has settled: states are constant over the last `tail`
/// steps and one more synchronous round, with failed edges still reading
/// their frozen send time, changes nothing.
pub fn is_quiescent(
    net: &Network,
    sched: &Schedule,
    trace: &Trace,
    tail: usize,
    profile: &FairnessProfile,
) -> bool {
    let h = trace.horizon();
    if tail == 0 || tail > h {
        return false;
    }
    let constant = net.nodes().all(|v| {
        let row = &trace.states[v.index()];
        row[h + 1 - tail..].iter().all(|r| r == &row[h])
    });
    constant
        && net.nodes().all(|v| {
            let next = recompute(net, &trace.states, v, |e| {
                if profile.failed.contains_key(&e) {
                    sched.read[e.index()][h]
                } else {
                    h
                }
            });
            &next == trace.state(v, h)
        })
}

/// Bounded per-edge delivery classes over a finite horizon with bound `lag`:
///
/// - delivering: every send time `T <= horizon - lag` is read at some time in
///   `(T, T + lag]`;
/// - flushed: from time `lag` on, every read is at most `lag` steps old;
/// - in order: read times never decrease.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeClass {
    pub delivering: bool,
    pub flushed: bool,
    pub in_order: bool,
}

pub fn classify_edge(row: &[usize], lag: usize) -> EdgeClass {
    let horizon = row.len().saturating_sub(1);
    let delivering = lag > 0
        && (0..=horizon.saturating_sub(lag))
            .filter(|&t0| t0 + lag <= horizon)
            .all(|t0| (t0 + 1..=t0 + lag).any(|t| row[t] >= t0));
    let flushed = (lag.max(1)..=horizon).all(|t| row[t] + lag >= t);
    let in_order = row.windows(2).skip(1).all(|w| w[0] <= w[1]);
    EdgeClass {
        delivering,
        flushed,
        in_order,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FairnessReport {
    pub edges: Vec<EdgeClass>,
    /// Edges whose classification contradicts "flushed implies delivering"
    /// or "delivering and in order implies flushed".
    pub violations: Vec<usize>,
}

/// Classifies every edge of `sched` and checks the implication lattice.
pub fn fairness_lemma_check(sched: &Schedule, lag: usize) -> FairnessReport {
    let edges: Vec<EdgeClass> = sched
        .read
        .iter()
        .map(|row| classify_edge(row, lag))
        .collect();
    let violations = edges
        .iter()
        .enumerate()
        .filter(|(_, c)| (c.flushed && !c.delivering) || (c.delivering && c.in_order && !c.flushed))
        .map(|(i, _)| i)
        .collect();
    FairnessReport { edges, violations }
}
