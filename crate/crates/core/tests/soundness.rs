//! Whenever the verifier says Correct, no fair schedule may violate the
//! interfaces. The full corpus runs in the acceptance suite; this file
//! keeps a property-based sample and checks the corpus is not vacuous.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cbgraph_core::verify::verify;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn correct_verdicts_survive_fair_schedules(seed in any::<u64>(), n in 2usize..=5, policies in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = common::random_network(&mut rng, n, policies);
        let origin = cbgraph_core::NodeId(0);
        for ifs in [common::reach_package(&net), common::length_package(&net, origin)] {
            let verdict = verify(&net, &ifs, &common::options()).unwrap();
            if verdict.is_correct() {
                let report = common::simulate_against(&net, &ifs, 20, &[]);
                prop_assert!(report.violations.is_empty(), "{:?}", report.violations);
            }
        }
    }
}

#[test]
fn corpus_mixes_correct_and_failing_instances() {
    let corpus = common::soundness_corpus();
    assert!(corpus.len() >= 100);
    assert!(corpus.iter().all(|i| i.network.node_count() <= 5));
    let names: std::collections::BTreeSet<&str> = corpus.iter().map(|i| i.name.as_str()).collect();
    assert_eq!(names.len(), corpus.len(), "instance names are unique");
}

#[test]
fn permit_all_networks_verify_with_both_packages() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for n in 2..=5 {
        let net = common::random_network(&mut rng, n, false);
        let origin = cbgraph_core::NodeId(0);
        for ifs in [
            common::reach_package(&net),
            common::length_package(&net, origin),
        ] {
            let verdict = verify(&net, &ifs, &common::options()).unwrap();
            assert!(verdict.is_correct(), "{}", verdict.render(&net));
        }
    }
}
