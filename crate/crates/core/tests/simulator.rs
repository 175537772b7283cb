//! The executable semantics as an oracle for the verifier.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cbgraph_core::bench::gen_running_example;
use cbgraph_core::model::CmpOp;
use cbgraph_core::sim::{
    fairness_lemma_check, invariant_violations, local_check, random_fair_schedule, run,
    FairnessProfile, Schedule,
};
use cbgraph_core::tolerance::tolerance_report;
use cbgraph_core::verify::{verify, Status};
use cbgraph_core::{Network, NodeId, NodePredicate, Predicate};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn traces_satisfy_the_recurrence_and_are_deterministic(seed in any::<u64>(), n in 2usize..=5, h in 0usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = common::random_network(&mut rng, n, true);
        let sched = common::fuzz_schedule(&mut rng, &net, h);
        let trace = run(&net, &sched).unwrap();
        prop_assert_eq!(local_check(&net, &sched, &trace), None);
        prop_assert_eq!(run(&net, &sched).unwrap(), trace.clone());
        for v in net.nodes() {
            prop_assert_eq!(trace.state(v, 0), net.init(v));
        }
    }

    #[test]
    fn fairness_classes_match_their_definitions(seed in any::<u64>(), h in 1usize..30, lag in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = common::random_network(&mut rng, 3, false);
        let sched = common::fuzz_schedule(&mut rng, &net, h);
        let report = fairness_lemma_check(&sched, lag);
        prop_assert!(report.violations.is_empty());
        for (row, class) in sched.read.iter().zip(&report.edges) {
            prop_assert_eq!(common::oracle_classes(row, lag), (class.delivering, class.flushed, class.in_order));
        }
    }

    #[test]
    fn generated_schedules_meet_their_profile(seed in any::<u64>(), period in 1usize..5, lag in 1usize..5) {
        let ex = gen_running_example();
        let net = &ex.network;
        let h = 30;
        let sched = random_fair_schedule(net, seed, h, &FairnessProfile::new(period, lag)).unwrap();
        sched.validate(net).unwrap();
        for row in &sched.read {
            let (_, flushed, in_order) = common::oracle_classes(row, lag);
            prop_assert!(flushed && in_order);
        }
        for v in net.nodes() {
            for t0 in 0..=h - period {
                prop_assert!((t0 + 1..=t0 + period).any(|t| sched.active[t].contains(&v)));
            }
        }
    }
}

/// Every schedule over `horizon` steps: all activation sets and all causal
/// read rows. Only for tiny networks.
fn all_schedules(net: &Network, horizon: usize) -> Vec<Schedule> {
    let n = net.node_count();
    let m = net.edge_count();
    let mut out = vec![Schedule {
        horizon,
        active: vec![Default::default(); horizon + 1],
        read: vec![vec![0; horizon + 1]; m],
    }];
    for t in 1..=horizon {
        let mut next = Vec::new();
        for s in &out {
            for mask in 0..1u32 << n {
                let mut reads = vec![Vec::new()];
                for _ in 0..m {
                    reads = reads
                        .into_iter()
                        .flat_map(|r: Vec<usize>| {
                            (0..t).map(move |x| [r.clone(), vec![x]].concat())
                        })
                        .collect();
                }
                for r in reads {
                    let mut s = s.clone();
                    s.active[t] = (0..n as u32)
                        .filter(|i| mask >> i & 1 == 1)
                        .map(NodeId)
                        .collect();
                    for (e, &x) in r.iter().enumerate() {
                        s.read[e][t] = x;
                    }
                    next.push(s);
                }
            }
        }
        out = next;
    }
    out
}

#[test]
fn invariants_hold_on_every_schedule_of_tiny_networks() {
    let mut b = cbgraph_core::model::NetworkBuilder::new(["A", "B", "C"]);
    b.add_link("A", "B", common::set_lp(100));
    b.add_edge_with("B", "C", cbgraph_core::Transfer::permit_all());
    b.default_init_no_route();
    b.set_init(
        "A",
        cbgraph_core::Route::Valid(cbgraph_core::RouteAttrs::originate(common::DEST)),
    );
    let net = b.build().unwrap();
    let a = net.node("A").unwrap();
    for ifs in [common::reach_package(&net), common::length_package(&net, a)] {
        let verdict = verify(&net, &ifs, &common::options()).unwrap();
        assert_eq!(verdict.status, Status::Correct, "{}", verdict.render(&net));
        let schedules = all_schedules(&net, 3);
        // Eight activation sets and t^3 read choices at each step t.
        assert_eq!(schedules.len(), 8usize.pow(3) * (1 * 8 * 27));
        for s in &schedules {
            let trace = run(&net, s).unwrap();
            assert_eq!(invariant_violations(&net, &trace, &ifs.i).unwrap(), vec![]);
        }
    }
}

#[test]
fn simulation_exposes_a_false_property() {
    let ex = gen_running_example();
    let net = &ex.network;
    let e = net.node("E").unwrap();
    let mut bad = ex.package1.clone();
    bad.y[e.index()] = NodePredicate::from(Predicate::Lp(CmpOp::Eq, 100));
    assert_eq!(
        verify(net, &bad, &common::options()).unwrap().status,
        Status::Fail
    );
    let report = common::simulate_against(net, &bad, 20, &[]);
    assert_eq!(
        report.violations.len(),
        20,
        "E always settles on the lp 300 route"
    );
}

#[test]
fn failures_within_tolerance_keep_the_property() {
    let ex = gen_running_example();
    let net = &ex.network;
    let verdict = verify(net, &ex.package1, &common::options()).unwrap();
    let tol = tolerance_report(&verdict.cb_graph, net, None).network;
    assert_eq!(tol, cbgraph_core::tolerance::Tolerance::Finite(1));
    for (e, _, _) in net.edges() {
        let report = common::simulate_against(net, &ex.package1, 30, &[e]);
        assert!(
            report.violations.is_empty(),
            "{}: {:?}",
            net.edge_label(e),
            report.violations
        );
    }
}

#[test]
fn failures_beyond_tolerance_can_break_the_property() {
    let ex = gen_running_example();
    let net = &ex.network;
    let id = |s: &str| net.node(s).unwrap();
    let into_e = [
        net.edge(id("B"), id("E")).unwrap(),
        net.edge(id("C"), id("E")).unwrap(),
    ];
    let profile = FairnessProfile::new(2, 2)
        .with_failure(into_e[0], 0)
        .with_failure(into_e[1], 0);
    let sched = random_fair_schedule(net, 3, 30, &profile).unwrap();
    let trace = run(net, &sched).unwrap();
    assert!(trace.state(id("E"), 30).is_none());
}

#[test]
fn synchronous_schedule_reaches_the_preferred_route() {
    let ex = gen_running_example();
    let net = &ex.network;
    let trace = run(net, &Schedule::synchronous(net, 6)).unwrap();
    let e = trace.state(net.node("E").unwrap(), 6);
    assert_eq!(e.lp(), Ok(300));
    assert_eq!(e.path_len(), Ok(2));
}
