//! How many CB-edge failures each node survives.
//!
//! A node stays reachable from some root after removing any `k` CB-edges
//! iff there are `k + 1` edge-disjoint paths to it, which by max-flow
//! min-cut is a unit-capacity flow from a super-source feeding all roots.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::model::{Network, NodeId};
use crate::verify::CbGraph;

/// Number of CB-edge removals a node tolerates. `Finite(-1)` means the
/// node is not reachable at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tolerance {
    Finite(i64),
    Unbounded,
}

impl Tolerance {
    pub fn at_least(self, k: u64) -> bool {
        match self {
            Tolerance::Unbounded => true,
            Tolerance::Finite(t) => t >= k as i64,
        }
    }

    pub fn to_json(self) -> Value {
        match self {
            Tolerance::Unbounded => json!("unbounded"),
            Tolerance::Finite(t) => json!(t),
        }
    }
}

impl fmt::Display for Tolerance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tolerance::Unbounded => f.write_str("unbounded"),
            Tolerance::Finite(t) => write!(f, "{t}"),
        }
    }
}

struct Arc {
    to: usize,
    cap: u32,
}

/// Dinic's algorithm over a residual graph stored as paired arcs.
struct FlowNet {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

impl FlowNet {
    fn new(n: usize) -> Self {
        FlowNet {
            arcs: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: u32) {
        self.adj[from].push(self.arcs.len());
        self.arcs.push(Arc { to, cap });
        self.adj[to].push(self.arcs.len());
        self.arcs.push(Arc { to: from, cap: 0 });
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<u32>> {
        let mut level = vec![u32::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u] {
                let arc = &self.arcs[a];
                if arc.cap > 0 && level[arc.to] == u32::MAX {
                    level[arc.to] = level[u] + 1;
                    queue.push_back(arc.to);
                }
            }
        }
        (level[t] != u32::MAX).then_some(level)
    }

    fn augment(
        &mut self,
        u: usize,
        t: usize,
        pushed: u32,
        level: &[u32],
        next: &mut [usize],
    ) -> u32 {
        if u == t {
            return pushed;
        }
        while next[u] < self.adj[u].len() {
            let a = self.adj[u][next[u]];
            let (to, cap) = (self.arcs[a].to, self.arcs[a].cap);
            if cap > 0 && level[to] == level[u] + 1 {
                let got = self.augment(to, t, pushed.min(cap), level, next);
                if got > 0 {
                    self.arcs[a].cap -= got;
                    self.arcs[a ^ 1].cap += got;
                    return got;
                }
            }
            next[u] += 1;
        }
        0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> u64 {
        let mut flow = 0u64;
        while let Some(level) = self.levels(s, t) {
            let mut next = vec![0; self.adj.len()];
            loop {
                let got = self.augment(s, t, u32::MAX, &level, &mut next);
                if got == 0 {
                    break;
                }
                flow += u64::from(got);
            }
        }
        flow
    }
}

/// Tolerance of `v` in a graph over `node_count` nodes.
pub fn max_tolerance(g: &CbGraph, node_count: usize, v: NodeId) -> Tolerance {
    if g.roots.contains(&v) {
        return Tolerance::Unbounded;
    }
    let source = node_count;
    let mut f = FlowNet::new(node_count + 1);
    let unlimited = u32::try_from(g.edges.len() + 1).unwrap_or(u32::MAX);
    for r in &g.roots {
        f.add(source, r.index(), unlimited);
    }
    for &(a, b) in &g.edges {
        f.add(a.index(), b.index(), 1);
    }
    Tolerance::Finite(f.max_flow(source, v.index()) as i64 - 1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToleranceReport {
    pub per_node: BTreeMap<NodeId, Tolerance>,
    /// Minimum over all nodes.
    pub network: Tolerance,
    /// Whether the network tolerates the queried number of failures.
    pub for_k: Option<bool>,
}

impl ToleranceReport {
    pub fn to_json(&self, net: &Network) -> Value {
        let per: serde_json::Map<String, Value> = self
            .per_node
            .iter()
            .map(|(&v, t)| (net.name(v).to_string(), t.to_json()))
            .collect();
        json!({"perNode": per, "network": self.network.to_json(), "forK": self.for_k})
    }

    pub fn render(&self, net: &Network) -> String {
        let mut s = format!("network tolerance: {}\n", self.network);
        for (&v, t) in &self.per_node {
            s.push_str(&format!("  {}: {t}\n", net.name(v)));
        }
        if let Some(ok) = self.for_k {
            s.push_str(&format!("tolerates queried k: {ok}\n"));
        }
        s
    }
}

pub fn tolerance_report(g: &CbGraph, net: &Network, k: Option<u64>) -> ToleranceReport {
    let n = net.node_count();
    let per_node: BTreeMap<NodeId, Tolerance> = net
        .nodes()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|v| (v, max_tolerance(g, n, v)))
        .collect();
    let network = per_node
        .values()
        .copied()
        .min()
        .unwrap_or(Tolerance::Unbounded);
    ToleranceReport {
        per_node,
        network,
        for_k: k.map(|k| network.at_least(k)),
    }
}
