//! Generators and checkers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use cbgraph_core::model::{Action, Clause, CmpOp, NetworkBuilder};
use cbgraph_core::sim::{
    check_abstract_convergence, invariant_violations, is_quiescent, random_fair_schedule, run,
    FairnessProfile,
};
use cbgraph_core::smt::{Encoder, Profile, Sexp, SolverConfig};
use cbgraph_core::verify::VerifyOptions;
use cbgraph_core::{
    Community, EdgeId, Interfaces, Network, NodeId, Predicate, Route, RouteAttrs, Transfer,
};

pub const DEST: u32 = 0x0a00_0000;

pub fn options() -> VerifyOptions {
    VerifyOptions::default()
}

pub fn options_with(profile: Profile) -> VerifyOptions {
    VerifyOptions {
        profile,
        ..VerifyOptions::default()
    }
}

pub fn solver() -> SolverConfig {
    SolverConfig::discover(None)
}

pub fn has() -> Predicate {
    Predicate::has_route()
}

pub fn and<const N: usize>(ps: [Predicate; N]) -> Predicate {
    Predicate::And(ps.into())
}

pub fn set_lp(lp: u64) -> Transfer {
    Transfer::new(vec![Clause::permit(vec![Action::SetLp(lp)])])
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, xs: &[T]) -> T {
    *xs.choose(rng).expect("non-empty choice")
}

fn subset<T: Copy + Ord>(rng: &mut ChaCha8Rng, xs: &[T]) -> BTreeSet<T> {
    xs.iter().copied().filter(|_| rng.gen_bool(0.4)).collect()
}

pub fn random_route(rng: &mut ChaCha8Rng, net: &Network) -> Route {
    if rng.gen_bool(0.15) {
        return Route::NoRoute;
    }
    let nodes: Vec<NodeId> = net.nodes().collect();
    Route::Valid(RouteAttrs {
        prefix: if rng.gen_bool(0.5) {
            pick(rng, &[DEST, 0, 1, u32::MAX])
        } else {
            rng.gen()
        },
        lp: if rng.gen_bool(0.5) {
            pick(rng, &[0, 100, 200, 300])
        } else {
            rng.gen_range(0..1000)
        },
        path_len: rng.gen_range(0..6),
        visited: subset(rng, &nodes),
        comms: subset(rng, net.communities()),
    })
}

fn cmp_op(rng: &mut ChaCha8Rng) -> CmpOp {
    pick(rng, &CmpOp::ALL)
}

pub fn random_atom(rng: &mut ChaCha8Rng, net: &Network) -> Predicate {
    let nodes: Vec<NodeId> = net.nodes().collect();
    match rng.gen_range(0..9) {
        0 => Predicate::True,
        1 => Predicate::False,
        2 => Predicate::IsNoRoute,
        3 => Predicate::Lp(cmp_op(rng), pick(rng, &[0, 100, 150, 200, 300])),
        4 => Predicate::PathLen(cmp_op(rng), rng.gen_range(0..5)),
        5 => Predicate::PrefixEq(pick(rng, &[DEST, 0, 1])),
        6 if !net.communities().is_empty() => Predicate::HasComm(pick(rng, net.communities())),
        _ => Predicate::Visited(pick(rng, &nodes)),
    }
}

pub fn random_predicate(rng: &mut ChaCha8Rng, net: &Network, depth: u32) -> Predicate {
    if depth == 0 || rng.gen_bool(0.35) {
        return random_atom(rng, net);
    }
    let kids = |n: usize, rng: &mut ChaCha8Rng| {
        (0..n)
            .map(|_| random_predicate(rng, net, depth - 1))
            .collect()
    };
    match rng.gen_range(0..4) {
        0 => Predicate::not(random_predicate(rng, net, depth - 1)),
        1 => {
            let n = rng.gen_range(0..4);
            Predicate::And(kids(n, rng))
        }
        2 => {
            let n = rng.gen_range(0..4);
            Predicate::Or(kids(n, rng))
        }
        _ => Predicate::implies(
            random_predicate(rng, net, depth - 1),
            random_predicate(rng, net, depth - 1),
        ),
    }
}

pub fn random_transfer(rng: &mut ChaCha8Rng, net: &Network, tags: &[Community]) -> Transfer {
    let mut clauses = Vec::new();
    for _ in 0..rng.gen_range(0..3) {
        let guard = random_predicate(rng, net, 1);
        if rng.gen_bool(0.4) {
            clauses.push(Clause::deny_if(guard));
        } else {
            clauses.push(Clause {
                guard,
                ..Clause::permit(random_actions(rng, tags))
            });
        }
    }
    if rng.gen_bool(0.8) {
        clauses.push(Clause::permit(random_actions(rng, tags)));
    }
    Transfer::new(clauses)
}

fn random_actions(rng: &mut ChaCha8Rng, tags: &[Community]) -> Vec<Action> {
    let mut acts = Vec::new();
    for _ in 0..rng.gen_range(0..3) {
        acts.push(match rng.gen_range(0..4) {
            0 => Action::SetLp(pick(rng, &[50, 100, 200, 300])),
            1 if !tags.is_empty() => Action::AddComm(pick(rng, tags)),
            2 if !tags.is_empty() => Action::RemoveComm(pick(rng, tags)),
            _ => Action::SetPrefix(pick(rng, &[DEST, 1])),
        });
    }
    acts
}

pub const TAGS: [Community; 2] = [Community::new(1, 0), Community::new(2, 5)];

/// A random network on `n` nodes named `N0..`. Node `N0` originates; the
/// link set always contains a spanning path so the graph is connected.
pub fn random_network(rng: &mut ChaCha8Rng, n: usize, random_policies: bool) -> Network {
    let names: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
    let mut b = NetworkBuilder::new(names.clone());
    b.declare_communities(TAGS);
    let mut skeleton = NetworkBuilder::new(names.clone());
    skeleton.default_init_no_route();
    let skeleton = skeleton.build().expect("nodes only");
    let mut pairs = BTreeSet::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        pairs.insert((j, i));
        pairs.insert((i, j));
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen_bool(0.25) {
                pairs.insert((i, j));
            }
        }
    }
    for (i, j) in pairs {
        let t = if random_policies {
            random_transfer(rng, &skeleton, &TAGS)
        } else {
            Transfer::permit_all()
        };
        b.add_edge_with(&names[i], &names[j], t);
    }
    b.default_init_no_route();
    b.set_init("N0", Route::Valid(RouteAttrs::originate(DEST)));
    b.build().expect("random network is well formed")
}

/// Evaluates terms through the solver in batches.
pub fn solver_values(enc: &Encoder<'_>, terms: &[Sexp]) -> Vec<Sexp> {
    let cfg = solver();
    let mut out = Vec::with_capacity(terms.len());
    for (i, chunk) in terms.chunks(400).enumerate() {
        out.extend(
            cbgraph_core::smt::solver::eval_ground(&cfg, enc, &format!("agree{i}"), chunk)
                .expect("solver"),
        );
    }
    out
}

/// Counts of cases checked and mismatches found by [`agreement_cases`].
#[derive(Debug, Default)]
pub struct Agreement {
    pub predicates: usize,
    pub merges: usize,
    pub transfers: usize,
    pub mismatches: Vec<String>,
}

impl Agreement {
    pub fn total(&self) -> usize {
        self.predicates + self.merges + self.transfers
    }
}

/// Fuzzes `cases` (predicate, route), (merge, route pair) and (transfer,
/// route) instances over random networks and compares concrete evaluation
/// with the solver's evaluation of the encoding.
pub fn agreement_cases(seed: u64, cases: usize) -> Agreement {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Agreement::default();
    let per_net = 500;
    while report.total() < cases {
        let n = rng.gen_range(2..=5);
        let net = random_network(&mut rng, n, true);
        let enc = Encoder::new(&net, Profile::Full).expect("encoder");
        let edges: Vec<EdgeId> = net.edges().map(|(e, _, _)| e).collect();
        let batch = per_net.min(cases - report.total());
        let mut terms = Vec::new();
        let mut expected: Vec<(String, Expect)> = Vec::new();
        for _ in 0..batch {
            let r = random_route(&mut rng, &net);
            match rng.gen_range(0..3) {
                0 => {
                    let p = random_predicate(&mut rng, &net, 3);
                    terms.push(enc.predicate(&p, &enc.route(&r)));
                    expected.push((format!("{p:?} on {r:?}"), Expect::Bool(p.eval(&r))));
                    report.predicates += 1;
                }
                1 => {
                    let s = random_route(&mut rng, &net);
                    terms.push(enc.merge(enc.route(&r), enc.route(&s)));
                    expected.push((
                        format!("merge {r:?} {s:?}"),
                        Expect::Route(net.merge(&r, &s)),
                    ));
                    report.merges += 1;
                }
                _ => {
                    let e = pick(&mut rng, &edges);
                    terms.push(enc.transfer(e, enc.route(&r)));
                    expected.push((
                        format!("transfer {} {r:?}", net.edge_label(e)),
                        Expect::Route(net.apply_transfer(e, &r)),
                    ));
                    report.transfers += 1;
                }
            }
        }
        for (got, (what, want)) in solver_values(&enc, &terms).iter().zip(&expected) {
            let ok = match want {
                Expect::Bool(b) => got.as_atom() == Some(if *b { "true" } else { "false" }),
                Expect::Route(r) => enc.decode(got).ok().as_ref() == Some(r),
            };
            if !ok {
                report
                    .mismatches
                    .push(format!("{what}: solver {got}, concrete {want:?}"));
            }
        }
    }
    report
}

#[derive(Debug)]
enum Expect {
    Bool(bool),
    Route(Route),
}

/// Outcome of simulating one instance under many fair schedules.
#[derive(Debug, Default)]
pub struct SimReport {
    pub schedules: usize,
    /// Traces still changing after the horizon was doubled three times.
    /// Their window is checked anyway.
    pub unsettled: usize,
    pub violations: Vec<String>,
}

/// Runs `count` seeded fair schedules and checks I at every step and Q and
/// Y over the trailing window of each trace. A trace that is not yet
/// quiescent is rerun with a doubled horizon before the window is read.
pub fn simulate_against(
    net: &Network,
    ifs: &Interfaces,
    count: u64,
    failed: &[EdgeId],
) -> SimReport {
    use rand::SeedableRng;
    let tail = 5;
    let mut report = SimReport::default();
    for seed in 0..count {
        let mut knobs = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut profile = FairnessProfile::new(knobs.gen_range(1..=4), knobs.gen_range(1..=4));
        for &e in failed {
            profile = profile.with_failure(e, knobs.gen_range(0..6));
        }
        let mut horizon = profile.settling_horizon(net, tail);
        let (trace, settled) = loop {
            let sched = random_fair_schedule(net, seed, horizon, &profile).expect("schedule");
            let trace = run(net, &sched).expect("run");
            let settled = is_quiescent(net, &sched, &trace, tail, &profile);
            if settled || horizon >= 8 * profile.settling_horizon(net, tail) {
                break (trace, settled);
            }
            horizon *= 2;
        };
        report.schedules += 1;
        report.unsettled += usize::from(!settled);
        for (v, t) in invariant_violations(net, &trace, &ifs.i).expect("concrete I") {
            report
                .violations
                .push(format!("seed {seed}: I({}) fails at t={t}", net.name(v)));
        }
        for (key, preds) in [("Q", &ifs.q), ("Y", &ifs.y)] {
            for (v, ok) in
                check_abstract_convergence(net, &trace, preds, tail).expect("concrete predicate")
            {
                if !ok {
                    report.violations.push(format!(
                        "seed {seed}: {key}({}) fails in the final window",
                        net.name(v)
                    ));
                }
            }
        }
    }
    report
}

/// Nodes reachable from the roots of `edges` after deleting `removed`.
pub fn reachable(
    n: usize,
    roots: &BTreeSet<usize>,
    edges: &[(usize, usize)],
    removed: &[usize],
) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = roots.iter().copied().collect();
    for &r in roots {
        seen[r] = true;
    }
    while let Some(u) = stack.pop() {
        for (i, &(a, b)) in edges.iter().enumerate() {
            if a == u && !seen[b] && !removed.contains(&i) {
                seen[b] = true;
                stack.push(b);
            }
        }
    }
    seen
}

/// Tolerance by exhaustive removal: the largest `k` such that every
/// `k`-subset of edges leaves `v` reachable, `-1` if `v` is unreachable,
/// `None` for roots.
pub fn brute_force_tolerance(
    n: usize,
    roots: &BTreeSet<usize>,
    edges: &[(usize, usize)],
    v: usize,
) -> Option<i64> {
    if roots.contains(&v) {
        return None;
    }
    for k in 0..=edges.len() {
        let mut subset: Vec<usize> = (0..k).collect();
        loop {
            if !reachable(n, roots, edges, &subset)[v] {
                return Some(k as i64 - 1);
            }
            // Next k-combination in lexicographic order.
            let mut i = k;
            while i > 0 && subset[i - 1] == edges.len() - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            subset[i - 1] += 1;
            for j in i..k {
                subset[j] = subset[j - 1] + 1;
            }
        }
    }
    unreachable!("removing every edge disconnects a non-root")
}

/// One corpus entry for the soundness suite.
pub struct Instance {
    pub name: String,
    pub network: Network,
    pub interfaces: Interfaces,
}

fn hop_distances(net: &Network, from: NodeId) -> Vec<Option<u64>> {
    let mut dist = vec![None; net.node_count()];
    dist[from.index()] = Some(0);
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for (_, a, b) in net.edges() {
            if a == u && dist[b.index()].is_none() {
                dist[b.index()] = Some(dist[u.index()].unwrap() + 1);
                queue.push_back(b);
            }
        }
    }
    dist
}

/// Reachability: every node eventually holds some route.
pub fn reach_package(net: &Network) -> Interfaces {
    Interfaces::uniform(net, Predicate::True, has(), has())
}

/// Shortest paths under uniform preference 100: each node converges to a
/// route of exactly its hop distance from the origin and never holds a
/// shorter one. Only provable when every policy keeps preference 100.
pub fn length_package(net: &Network, origin: NodeId) -> Interfaces {
    let dist = hop_distances(net, origin);
    let lp = || Predicate::Lp(CmpOp::Eq, 100);
    Interfaces::from_fn(net, |v| match dist[v.index()] {
        Some(d) => (
            Predicate::Or(vec![
                Predicate::IsNoRoute,
                and([lp(), Predicate::PathLen(CmpOp::Ge, d)]),
            ]),
            and([has(), lp(), Predicate::PathLen(CmpOp::Eq, d)]),
            Predicate::PathLen(CmpOp::Le, d),
        ),
        None => (Predicate::IsNoRoute, Predicate::IsNoRoute, Predicate::True),
    })
}

fn mutate(rng: &mut ChaCha8Rng, net: &Network, ifs: &Interfaces) -> Interfaces {
    use cbgraph_core::NodePredicate;
    let mut out = ifs.clone();
    for _ in 0..rng.gen_range(1..=2) {
        let v = rng.gen_range(0..net.node_count());
        let slot = match rng.gen_range(0..3) {
            0 => &mut out.i[v],
            1 => &mut out.q[v],
            _ => &mut out.y[v],
        };
        let old = slot.as_expr().cloned().unwrap_or(Predicate::True);
        let atom = random_atom(rng, net);
        let new = match rng.gen_range(0..5) {
            0 => Predicate::And(vec![old, atom]),
            1 => Predicate::Or(vec![old, atom]),
            2 => Predicate::not(old),
            3 => atom,
            _ => random_predicate(rng, net, 2),
        };
        *slot = NodePredicate::from(new);
    }
    out
}

fn shaped(
    name: &str,
    n: usize,
    links: &[(usize, usize)],
    transfer: impl Fn(usize, usize) -> Transfer,
) -> Network {
    let names: Vec<String> = (0..n).map(|i| format!("{name}{i}")).collect();
    let mut b = NetworkBuilder::new(names.clone());
    for &(u, v) in links {
        b.add_edge_with(&names[u], &names[v], transfer(u, v));
        b.add_edge_with(&names[v], &names[u], transfer(v, u));
    }
    b.default_init_no_route();
    b.set_init(&names[0], Route::Valid(RouteAttrs::originate(DEST)));
    b.build().expect("shaped network")
}

/// Networks of at most five nodes with hand-written and mutated
/// interfaces. Deterministic.
pub fn soundness_corpus() -> Vec<Instance> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(0x50_0d);
    let mut bases: Vec<(String, Network)> = Vec::new();
    let permit = |_: usize, _: usize| Transfer::permit_all();
    bases.push(("line3".into(), shaped("L", 3, &[(0, 1), (1, 2)], permit)));
    bases.push((
        "ring4".into(),
        shaped("R", 4, &[(0, 1), (1, 2), (2, 3), (3, 0)], permit),
    ));
    bases.push((
        "star5".into(),
        shaped("S", 5, &[(0, 1), (0, 2), (0, 3), (0, 4)], permit),
    ));
    bases.push((
        "complete4".into(),
        shaped(
            "K",
            4,
            &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
            permit,
        ),
    ));
    bases.push((
        "diamond_pref".into(),
        shaped("D", 4, &[(0, 1), (0, 2), (1, 3), (2, 3)], |u, v| {
            set_lp(if (u, v) == (1, 3) { 300 } else { 100 })
        }),
    ));
    for seed in 0..8 {
        let n = 3 + seed % 3;
        bases.push((
            format!("random{seed}"),
            random_network(&mut rng, n, seed % 2 == 1),
        ));
    }

    let mut out = Vec::new();
    let ex = cbgraph_core::bench::gen_running_example();
    out.push(Instance {
        name: "square/pkg1".into(),
        network: ex.network.clone(),
        interfaces: ex.package1.clone(),
    });
    out.push(Instance {
        name: "square/pkg2".into(),
        network: ex.network.clone(),
        interfaces: ex.package2.clone(),
    });
    for m in 0..4 {
        let interfaces = mutate(&mut rng, &ex.network, &ex.package1);
        out.push(Instance {
            name: format!("square/pkg1~{m}"),
            network: ex.network.clone(),
            interfaces,
        });
    }
    for (name, net) in bases {
        let origin = NodeId(0);
        let packages = [
            ("reach", reach_package(&net)),
            ("len", length_package(&net, origin)),
        ];
        for (pname, ifs) in packages {
            for m in 0..3 {
                let interfaces = mutate(&mut rng, &net, &ifs);
                out.push(Instance {
                    name: format!("{name}/{pname}~{m}"),
                    network: net.clone(),
                    interfaces,
                });
            }
            out.push(Instance {
                name: format!("{name}/{pname}"),
                network: net.clone(),
                interfaces: ifs,
            });
        }
    }
    out
}

/// A causally valid schedule whose read rows are drawn from a mix of
/// generators: lagged fair, arbitrary, monotone, stuck and frozen.
pub fn fuzz_schedule(
    rng: &mut ChaCha8Rng,
    net: &Network,
    horizon: usize,
) -> cbgraph_core::sim::Schedule {
    let all: Vec<NodeId> = net.nodes().collect();
    let mut active: Vec<BTreeSet<NodeId>> = (0..=horizon).map(|_| subset(rng, &all)).collect();
    active[0].clear();
    let read = (0..net.edge_count())
        .map(|_| {
            let mode = rng.gen_range(0..6);
            let lag = rng.gen_range(1..=4);
            let freeze = rng.gen_range(1..=horizon.max(1));
            let mut row = vec![0usize; horizon + 1];
            for t in 1..=horizon {
                let prev = row[t - 1];
                row[t] = match mode {
                    0 => rng.gen_range(prev.max(t.saturating_sub(lag))..t),
                    1 => rng.gen_range(0..t),
                    2 => rng.gen_range(prev..t),
                    3 => 0,
                    4 if t > freeze => prev,
                    4 => t - 1,
                    _ => rng.gen_range(t.saturating_sub(lag + 1)..t),
                };
            }
            row
        })
        .collect();
    cbgraph_core::sim::Schedule {
        horizon,
        active,
        read,
    }
}

/// Delivery classes computed straight from their definitions: delivering
/// means every send time `T <= H - lag` is read at or after `T` within the
/// next `lag` steps, flushed means every read from time `lag` on is at most
/// `lag` steps old, in order means reads never go back in time.
pub fn oracle_classes(row: &[usize], lag: usize) -> (bool, bool, bool) {
    let h = row.len() - 1;
    let mut delivering = true;
    let mut t0 = 0;
    while t0 + lag <= h {
        delivering &= row[t0 + 1..=t0 + lag].iter().any(|&r| r >= t0);
        t0 += 1;
    }
    let flushed = (lag..=h).all(|t| t - row[t] <= lag);
    let in_order = (2..=h).all(|t| row[t - 1] <= row[t]);
    (delivering, flushed, in_order)
}
