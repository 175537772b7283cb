//! Max-flow tolerance against exhaustive edge removal.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use cbgraph_core::model::NetworkBuilder;
use cbgraph_core::tolerance::{max_tolerance, tolerance_report, Tolerance};
use cbgraph_core::verify::CbGraph;
use cbgraph_core::NodeId;

fn arb_graph() -> impl Strategy<Value = (usize, BTreeSet<usize>, Vec<(usize, usize)>)> {
    (2usize..=7).prop_flat_map(|n| {
        let edge = (0..n, 0..n).prop_filter("no self loops", |(a, b)| a != b);
        (
            Just(n),
            proptest::collection::btree_set(0..n, 1..=2),
            proptest::collection::btree_set(edge, 0..=12)
                .prop_map(|s| s.into_iter().collect::<Vec<_>>()),
        )
    })
}

fn cb_graph(roots: &BTreeSet<usize>, edges: &[(usize, usize)]) -> CbGraph {
    let id = |i: usize| NodeId(i as u32);
    CbGraph::new(
        roots.iter().map(|&r| id(r)),
        edges.iter().map(|&(a, b)| (id(a), id(b))),
    )
}

fn expected(n: usize, roots: &BTreeSet<usize>, edges: &[(usize, usize)], v: usize) -> Tolerance {
    match common::brute_force_tolerance(n, roots, edges, v) {
        None => Tolerance::Unbounded,
        Some(k) => Tolerance::Finite(k),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn flow_matches_exhaustive_removal((n, roots, edges) in arb_graph()) {
        let g = cb_graph(&roots, &edges);
        for v in 0..n {
            prop_assert_eq!(max_tolerance(&g, n, NodeId(v as u32)), expected(n, &roots, &edges, v), "node {}", v);
        }
    }

    #[test]
    fn adding_edges_never_lowers_tolerance((n, roots, edges) in arb_graph(), extra in (0usize..7, 0usize..7)) {
        let (a, b) = (extra.0 % n, extra.1 % n);
        prop_assume!(a != b && !edges.contains(&(a, b)));
        let before = cb_graph(&roots, &edges);
        let mut more = edges.clone();
        more.push((a, b));
        let after = cb_graph(&roots, &more);
        for v in 0..n {
            let v = NodeId(v as u32);
            prop_assert!(max_tolerance(&after, n, v) >= max_tolerance(&before, n, v));
        }
    }
}

#[test]
fn square_with_every_edge_tolerates_one_failure() {
    let ex = cbgraph_core::bench::gen_running_example();
    let net = &ex.network;
    let all: Vec<_> = net.edges().map(|(_, u, v)| (u, v)).collect();
    let g = CbGraph::new([net.node("A").unwrap()], all);
    let report = tolerance_report(&g, net, Some(1));
    assert_eq!(
        report.per_node[&net.node("E").unwrap()],
        Tolerance::Finite(1)
    );
    assert_eq!(
        report.per_node[&net.node("A").unwrap()],
        Tolerance::Unbounded
    );
    assert_eq!(report.network, Tolerance::Finite(1));
    assert_eq!(report.for_k, Some(true));
    assert_eq!(tolerance_report(&g, net, Some(2)).for_k, Some(false));
}

/// Three regions joined by single or double links: the US core is
/// redundant, Europe hangs off two US links, Asia off one.
#[test]
fn multi_region_fixture() {
    let names = [
        "Houston",
        "Dallas",
        "Chicago",
        "Seattle",
        "NewYork",
        "London",
        "Paris",
        "Frankfurt",
        "Amsterdam",
        "Tokyo",
        "HongKong",
        "Singapore",
        "Milan",
    ];
    let mut b = NetworkBuilder::new(names);
    let one_way = [
        ("Houston", "Dallas"),
        ("Houston", "Chicago"),
        ("Dallas", "Seattle"),
        ("Chicago", "Seattle"),
        ("Houston", "NewYork"),
        ("Chicago", "NewYork"),
        ("NewYork", "London"),
        ("NewYork", "Paris"),
        ("London", "Frankfurt"),
        ("Paris", "Frankfurt"),
        ("Frankfurt", "Amsterdam"),
        ("London", "Amsterdam"),
        ("Seattle", "Tokyo"),
        ("Tokyo", "HongKong"),
        ("Tokyo", "Singapore"),
        ("Tokyo", "Milan"),
    ];
    for (u, v) in one_way {
        b.add_edge_with(u, v, cbgraph_core::Transfer::permit_all());
    }
    for (u, v) in [
        ("Dallas", "Chicago"),
        ("London", "Paris"),
        ("HongKong", "Singapore"),
    ] {
        b.add_link(u, v, cbgraph_core::Transfer::permit_all());
    }
    b.default_init_no_route();
    let net = b.build().unwrap();
    let g = CbGraph::new(
        [net.node("Houston").unwrap()],
        net.edges().map(|(_, u, v)| (u, v)),
    );
    let report = tolerance_report(&g, &net, Some(1));
    for v in net.nodes() {
        let want = match net.name(v) {
            "Houston" => Tolerance::Unbounded,
            "Tokyo" | "HongKong" | "Singapore" | "Milan" => Tolerance::Finite(0),
            _ => Tolerance::Finite(1),
        };
        assert_eq!(report.per_node[&v], want, "{}", net.name(v));
    }
    assert_eq!(report.network, Tolerance::Finite(0));
    assert_eq!(report.for_k, Some(false));
    let json = report.to_json(&net);
    assert_eq!(json["perNode"]["Houston"], "unbounded");
    assert_eq!(json["network"], 0);
}

#[test]
fn unreachable_nodes_report_minus_one() {
    let roots = BTreeSet::from([0]);
    let edges = [(0, 1)];
    let g = cb_graph(&roots, &edges);
    assert_eq!(max_tolerance(&g, 3, NodeId(2)), Tolerance::Finite(-1));
    assert_eq!(
        common::brute_force_tolerance(3, &roots, &edges, 2),
        Some(-1)
    );
}
