use proptest::prelude::*;
use tsnbound::bounds::*;
use tsnbound::network::{flows_through, NetworkSpec};
use tsnbound::sim::random::random_spec;

/// Every (i, j, k, x) with a nonempty regulator input set at switch j.
fn ir_queues(spec: &NetworkSpec) -> Vec<(String, String, String, tsnbound::network::Class)> {
    let mut out = Vec::new();
    for f in &spec.flows {
        let p = &f.path;
        for w in p.windows(3) {
            let key = (w[0].clone(), w[1].clone(), w[2].clone(), f.class);
            if !out.contains(&key) {
                out.push(key);
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn combined_closed_form_equals_sup_form(seed in 0u64..10_000) {
        let spec = random_spec(seed);
        for (i, j, k, x) in ir_queues(&spec) {
            prop_assert!(!flows_through(&spec, &i, &j, &k, x).unwrap().is_empty());
            prop_assert_eq!(
                combined_bound(&spec, &i, &j, &k, x).unwrap(),
                combined_bound_sup_form(&spec, &i, &j, &k, x).unwrap()
            );
        }
    }

    #[test]
    fn e2e_never_exceeds_additive(seed in 0u64..10_000) {
        let spec = random_spec(seed);
        for f in &spec.flows {
            prop_assert!(e2e_bound(&spec, &f.id).unwrap() <= additive_e2e(&spec, &f.id).unwrap());
        }
    }

    #[test]
    fn per_flow_bound_beats_classical(seed in 0u64..10_000) {
        let spec = random_spec(seed);
        for f in &spec.flows {
            for hop in f.hops() {
                let link = spec.link(&hop.from, &hop.to).unwrap();
                let beta = cbs_service_curve(&spec, &hop.from, &hop.to, f.class).unwrap();
                let s = cbfs_response_bound(&spec, &f.id, &hop.from, &hop.to).unwrap();
                let classical = classical_cbfs_bound(&spec, &hop.from, &hop.to, f.class).unwrap();
                if beta.rate < link.capacity {
                    prop_assert!(s < classical);
                } else {
                    prop_assert!(s <= classical);
                }
            }
        }
    }

    #[test]
    fn ir_backlog_matches_curve_deviation(seed in 0u64..10_000) {
        let spec = random_spec(seed);
        for (i, j, k, x) in ir_queues(&spec) {
            prop_assert_eq!(
                ir_backlog(&spec, &i, &j, &k, x).unwrap(),
                ir_backlog_via_curves(&spec, &i, &j, &k, x).unwrap()
            );
        }
    }

    #[test]
    fn report_json_round_trips(seed in 0u64..10_000) {
        let spec = random_spec(seed);
        let report = full_report(&spec).unwrap();
        let back = BoundsReport::from_json(&report.to_json()).unwrap();
        prop_assert_eq!(back, report);
    }
}
