//! Benchmark inputs: the four-node running example and fat-tree networks
//! with reachability, path-length, valley-free and hijack suites.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{
    Action, Clause, CmpOp, Community, Interfaces, Network, NetworkBuilder, NodeId, Predicate,
    Route, RouteAttrs, Transfer,
};
use crate::verify::CbGraph;

/// Prefix originated by every generated destination.
pub const DEST_PREFIX: u32 = 0x0a00_0000;
/// Local preference the hijacker puts on its route.
pub const HIJACK_LP: u64 = 1000;
/// Tag added on down links in the valley-free suite.
pub const DOWN_TAG: Community = Community::new(1, 0);
pub const HIJACKER: &str = "hijacker";

fn and(ps: impl IntoIterator<Item = Predicate>) -> Predicate {
    Predicate::And(ps.into_iter().collect())
}

fn or(ps: impl IntoIterator<Item = Predicate>) -> Predicate {
    Predicate::Or(ps.into_iter().collect())
}

fn has() -> Predicate {
    Predicate::has_route()
}

fn set_lp(lp: u64) -> Transfer {
    Transfer::new(vec![Clause::permit(vec![Action::SetLp(lp)])])
}

/// The running example: a square A-B-E-C with A originating a route. The
/// B->E link raises local preference to 300; every other link sets 100.
#[derive(Debug, Clone)]
pub struct RunningExample {
    pub network: Network,
    /// Reachability of E with the top invariant.
    pub package1: Interfaces,
    /// E prefers the route through B; needs precise interfaces.
    pub package2: Interfaces,
}

impl RunningExample {
    /// The sparse graph that package 2 is meant to justify: root A with
    /// edges A->B, A->C and B->E.
    pub fn tree_graph(&self) -> CbGraph {
        let id = |s: &str| self.network.node(s).expect("running example node");
        CbGraph::new(
            [id("A")],
            [(id("A"), id("B")), (id("A"), id("C")), (id("B"), id("E"))],
        )
    }
}

/// Breadth-first spanning tree of the network from `root`, as a CB-graph.
pub fn bfs_cbgraph(net: &Network, root: NodeId) -> CbGraph {
    let mut seen = BTreeSet::from([root]);
    let mut edges = Vec::new();
    let mut queue = VecDeque::from([root]);
    let mut out: Vec<Vec<NodeId>> = vec![Vec::new(); net.node_count()];
    for (_, u, v) in net.edges() {
        out[u.index()].push(v);
    }
    while let Some(u) = queue.pop_front() {
        for &v in &out[u.index()] {
            if seen.insert(v) {
                edges.push((u, v));
                queue.push_back(v);
            }
        }
    }
    CbGraph::new([root], edges)
}

pub fn gen_running_example() -> RunningExample {
    let mut b = NetworkBuilder::new(["A", "B", "C", "E"]);
    for (u, v) in [
        ("A", "B"),
        ("B", "A"),
        ("A", "C"),
        ("C", "A"),
        ("B", "E"),
        ("E", "B"),
        ("C", "E"),
        ("E", "C"),
    ] {
        let lp = if (u, v) == ("B", "E") { 300 } else { 100 };
        b.add_edge_with(u, v, set_lp(lp));
    }
    b.default_init_no_route();
    b.set_init("A", Route::Valid(RouteAttrs::originate(DEST_PREFIX)));
    let net = b.build().expect("running example is well formed");
    let c = net.node("C").expect("C");
    let e = net.node("E").expect("E");
    let no_c = || Predicate::not(Predicate::Visited(c));

    let package1 = Interfaces::from_fn(&net, |v| {
        let y = if v == e { has() } else { Predicate::True };
        (Predicate::True, has(), y)
    });

    let lp = |n| Predicate::Lp(CmpOp::Eq, n);
    let len = |op, n| Predicate::PathLen(op, n);
    let package2 = Interfaces::from_fn(&net, |v| {
        let q = match net.name(v) {
            "A" => and([has(), lp(100), len(CmpOp::Eq, 0), no_c()]),
            "B" => and([has(), lp(100), len(CmpOp::Eq, 1), no_c()]),
            "C" => and([has(), lp(100), len(CmpOp::Eq, 1)]),
            _ => and([has(), lp(300), len(CmpOp::Eq, 2), no_c()]),
        };
        let i = match net.name(v) {
            "A" => q.clone(),
            "B" | "C" => or([
                Predicate::IsNoRoute,
                and([has(), lp(100), len(CmpOp::Ge, 1)]),
            ]),
            _ => or([
                Predicate::IsNoRoute,
                and([has(), Predicate::Lp(CmpOp::Le, 300), len(CmpOp::Ge, 2)]),
            ]),
        };
        let y = if v == e {
            and([has(), no_c()])
        } else {
            Predicate::True
        };
        (i, q, y)
    });
    RunningExample {
        network: net,
        package1,
        package2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Reachability,
    PathLength,
    ValleyFree,
    Hijack,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Reachability,
        Variant::PathLength,
        Variant::ValleyFree,
        Variant::Hijack,
    ];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Reachability => "reachability",
            Variant::PathLength => "pathlength",
            Variant::ValleyFree => "valleyfree",
            Variant::Hijack => "hijack",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "reachability" | "reach" => Ok(Variant::Reachability),
            "pathlength" | "length" => Ok(Variant::PathLength),
            "valleyfree" | "valley" => Ok(Variant::ValleyFree),
            "hijack" => Ok(Variant::Hijack),
            _ => Err(format!("unknown variant `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FattreeSpec {
    pub pods: usize,
    pub variant: Variant,
    /// Destination node name; `edge0_0` by default.
    pub destination: String,
}

impl FattreeSpec {
    pub fn new(pods: usize, variant: Variant) -> Self {
        FattreeSpec {
            pods,
            variant,
            destination: "edge0_0".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchError {
    #[error("pod count must be even and at least 2, got {0}")]
    BadPods(usize),
    #[error("unknown destination `{0}`")]
    UnknownDestination(String),
}

/// Position of a switch in the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Edge,
    Aggregation,
    Core,
    External,
}

/// Topology only: node names, layers and undirected links.
#[derive(Debug, Clone)]
pub struct Fattree {
    pub pods: usize,
    pub names: Vec<String>,
    pub layers: Vec<Layer>,
    /// Undirected links as (lower, upper) index pairs: edge-aggregation and
    /// aggregation-core.
    pub links: Vec<(usize, usize)>,
}

impl Fattree {
    pub fn new(pods: usize) -> Result<Self, BenchError> {
        if pods < 2 || pods % 2 != 0 {
            return Err(BenchError::BadPods(pods));
        }
        let half = pods / 2;
        let mut names = Vec::new();
        let mut layers = Vec::new();
        for p in 0..pods {
            for i in 0..half {
                names.push(format!("edge{p}_{i}"));
                layers.push(Layer::Edge);
            }
            for i in 0..half {
                names.push(format!("agg{p}_{i}"));
                layers.push(Layer::Aggregation);
            }
        }
        let core_base = names.len();
        for j in 0..half * half {
            names.push(format!("core{j}"));
            layers.push(Layer::Core);
        }
        let edge_idx = |p: usize, i: usize| p * pods + i;
        let agg_idx = |p: usize, i: usize| p * pods + half + i;
        let mut links = Vec::new();
        for p in 0..pods {
            for i in 0..half {
                for j in 0..half {
                    links.push((edge_idx(p, i), agg_idx(p, j)));
                }
            }
            for i in 0..half {
                for m in 0..half {
                    links.push((agg_idx(p, i), core_base + i * half + m));
                }
            }
        }
        Ok(Fattree {
            pods,
            names,
            layers,
            links,
        })
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    fn adjacency(&self, up_only: bool) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.names.len()];
        for &(lo, hi) in &self.links {
            adj[lo].push(hi);
            if !up_only {
                adj[hi].push(lo);
            }
        }
        adj
    }

    /// Hop distance of every node from `d`.
    pub fn distances(&self, d: usize) -> Vec<u64> {
        let adj = self.adjacency(false);
        let mut dist = vec![u64::MAX; self.names.len()];
        dist[d] = 0;
        let mut queue = VecDeque::from([d]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == u64::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Nodes reachable from `d` using only up links, `d` included.
    pub fn uphill(&self, d: usize) -> BTreeSet<usize> {
        let adj = self.adjacency(true);
        let mut seen = BTreeSet::from([d]);
        let mut queue = VecDeque::from([d]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        seen
    }
}

/// A generated fat-tree instance.
#[derive(Debug, Clone)]
pub struct FattreeInstance {
    pub network: Network,
    pub interfaces: Interfaces,
    pub destination: NodeId,
    pub dist: Vec<u64>,
    pub uphill: BTreeSet<NodeId>,
}

/// The hijacker's initial route: an internal prefix with high preference.
pub fn hijack_route() -> Route {
    Route::Valid(RouteAttrs {
        lp: HIJACK_LP,
        ..RouteAttrs::originate(DEST_PREFIX)
    })
}

pub fn gen_fattree(spec: &FattreeSpec) -> Result<FattreeInstance, BenchError> {
    let tree = Fattree::new(spec.pods)?;
    let d = tree
        .names
        .iter()
        .position(|n| *n == spec.destination)
        .ok_or_else(|| BenchError::UnknownDestination(spec.destination.clone()))?;
    let dist = tree.distances(d);
    let uphill = tree.uphill(d);

    let mut names = tree.names.clone();
    let hijack = spec.variant == Variant::Hijack;
    if hijack {
        names.push(HIJACKER.to_string());
    }
    let mut b = NetworkBuilder::new(names.iter().cloned());
    let permit = Transfer::permit_all;
    let (down, up) = match spec.variant {
        Variant::ValleyFree => (
            Transfer::new(vec![Clause::permit(vec![Action::AddComm(DOWN_TAG)])]),
            Transfer::new(vec![
                Clause::deny_if(Predicate::HasComm(DOWN_TAG)),
                Clause::permit(Vec::new()),
            ]),
        ),
        _ => (permit(), permit()),
    };
    for &(lo, hi) in &tree.links {
        b.add_edge_with(&tree.names[lo], &tree.names[hi], up.clone());
        b.add_edge_with(&tree.names[hi], &tree.names[lo], down.clone());
    }
    if spec.variant == Variant::ValleyFree {
        b.declare_communities([DOWN_TAG]);
    }
    if hijack {
        let import = Transfer::new(vec![
            Clause::deny_if(Predicate::PrefixEq(DEST_PREFIX)),
            Clause::permit(Vec::new()),
        ]);
        for (i, l) in tree.layers.iter().enumerate() {
            if *l == Layer::Core {
                b.add_edge_with(HIJACKER, &tree.names[i], import.clone());
                b.add_edge_with(&tree.names[i], HIJACKER, Transfer::deny_all());
            }
        }
    }
    b.default_init_no_route();
    b.set_init(
        &tree.names[d],
        Route::Valid(RouteAttrs::originate(DEST_PREFIX)),
    );
    if hijack {
        b.set_init(HIJACKER, hijack_route());
    }
    let net = b.build().expect("generated fat-tree is well formed");
    let hijacker = net.node(HIJACKER);

    let lp100 = || Predicate::Lp(CmpOp::Eq, 100);
    let len = |op, n| Predicate::PathLen(op, n);
    let no_tag = || Predicate::not(Predicate::HasComm(DOWN_TAG));
    let interfaces = Interfaces::from_fn(&net, |v| {
        let i = v.index();
        match spec.variant {
            Variant::Reachability => (Predicate::True, has(), has()),
            Variant::PathLength => (
                or([
                    Predicate::IsNoRoute,
                    and([lp100(), len(CmpOp::Ge, dist[i])]),
                ]),
                and([has(), lp100(), len(CmpOp::Eq, dist[i])]),
                and([has(), len(CmpOp::Eq, dist[i])]),
            ),
            Variant::ValleyFree => {
                let up = uphill.contains(&i);
                let mut inv = vec![lp100(), len(CmpOp::Ge, dist[i])];
                let mut q = vec![has(), lp100(), len(CmpOp::Eq, dist[i])];
                let mut y = vec![has()];
                if up {
                    inv.push(Predicate::implies(len(CmpOp::Eq, dist[i]), no_tag()));
                    q.push(no_tag());
                    y.push(no_tag());
                }
                (or([Predicate::IsNoRoute, and(inv)]), and(q), and(y))
            }
            Variant::Hijack => {
                if Some(v) == hijacker {
                    let q = and([has(), Predicate::PrefixEq(DEST_PREFIX)]);
                    (q.clone(), q, Predicate::True)
                } else {
                    let h = hijacker.expect("hijack variant has a hijacker");
                    let clean = Predicate::not(Predicate::Visited(h));
                    (
                        or([Predicate::IsNoRoute, clean.clone()]),
                        and([has(), clean.clone()]),
                        and([has(), clean]),
                    )
                }
            }
        }
    });
    Ok(FattreeInstance {
        network: net,
        interfaces,
        destination: NodeId(d as u32),
        dist,
        uphill: uphill.into_iter().map(|i| NodeId(i as u32)).collect(),
    })
}

/// Valley-free mutant: the up link `lower -> upper` also adds the down tag,
/// so an uphill node can receive a tagged shortest route.
pub fn tag_on_up_link(inst: &FattreeInstance, lower: &str, upper: &str) -> Option<Network> {
    let net = &inst.network;
    let e = net.edge(net.node(lower)?, net.node(upper)?)?;
    let t = Transfer::new(vec![
        Clause::deny_if(Predicate::HasComm(DOWN_TAG)),
        Clause::permit(vec![Action::AddComm(DOWN_TAG)]),
    ]);
    net.with_transfer(e, t).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_and_edge_counts() {
        for k in (2..=12).step_by(2) {
            let t = Fattree::new(k).unwrap();
            assert_eq!(t.node_count() * 4, 5 * k * k, "k={k}");
            assert_eq!(2 * t.links.len(), k * k * k, "k={k}");
        }
    }

    #[test]
    fn bad_pods() {
        assert_eq!(Fattree::new(3).unwrap_err(), BenchError::BadPods(3));
        assert_eq!(Fattree::new(0).unwrap_err(), BenchError::BadPods(0));
    }

    #[test]
    fn pods4_shape() {
        let inst = gen_fattree(&FattreeSpec::new(4, Variant::Reachability)).unwrap();
        assert_eq!(inst.network.node_count(), 20);
        assert_eq!(inst.network.edge_count(), 64);
        let hij = gen_fattree(&FattreeSpec::new(4, Variant::Hijack)).unwrap();
        assert_eq!(hij.network.node_count(), 21);
        assert_eq!(hij.network.edge_count(), 64 + 8);
    }

    #[test]
    fn destination_distance_zero() {
        let inst = gen_fattree(&FattreeSpec::new(2, Variant::PathLength)).unwrap();
        assert_eq!(inst.dist[inst.destination.index()], 0);
        let q = inst.interfaces.q[inst.destination.index()]
            .as_expr()
            .unwrap();
        assert!(q.eval(inst.network.init(inst.destination)));
    }

    #[test]
    fn uphill_set_for_pods4() {
        let t = Fattree::new(4).unwrap();
        let up: BTreeSet<&str> = t
            .uphill(0)
            .into_iter()
            .map(|i| t.names[i].as_str())
            .collect();
        let expected: BTreeSet<&str> = [
            "edge0_0", "agg0_0", "agg0_1", "core0", "core1", "core2", "core3",
        ]
        .into_iter()
        .collect();
        assert_eq!(up, expected);
    }

    #[test]
    fn bfs_graph_spans_fattree() {
        let inst = gen_fattree(&FattreeSpec::new(4, Variant::Reachability)).unwrap();
        let g = bfs_cbgraph(&inst.network, inst.destination);
        assert_eq!(g.edges.len(), inst.network.node_count() - 1);
        assert!(crate::verify::is_connected(&g, &inst.network).0);
    }

    #[test]
    fn running_example_shape() {
        let ex = gen_running_example();
        assert_eq!(ex.network.edge_count(), 8);
        let be = ex
            .network
            .edge(ex.network.node("B").unwrap(), ex.network.node("E").unwrap())
            .unwrap();
        let out = ex
            .network
            .apply_transfer(be, &Route::Valid(RouteAttrs::originate(DEST_PREFIX)));
        assert_eq!(out.lp(), Ok(300));
    }
}
