use proptest::prelude::*;
use tsnbound::network::*;
use tsnbound::sim::random::random_spec;

const CLASSES: [Class; 2] = [Class::A, Class::B];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn through_sets_partition_link_sets(seed in 0u64..10_000) {
        let spec = random_spec(seed);
        for link in &spec.links {
            let (i, j) = (link.from.as_str(), link.to.as_str());
            for x in CLASSES {
                let on = flows_on_link(&spec, i, j, x).unwrap();
                let mut total = 0;
                for node in &spec.nodes {
                    let through = flows_through(&spec, i, j, &node.id, x).unwrap();
                    for f in &through {
                        prop_assert!(on.iter().any(|g| g.id == f.id));
                    }
                    total += through.len();
                }
                // Flows ending at j continue nowhere.
                let ending = on.iter().filter(|f| f.destination() == j).count();
                prop_assert_eq!(total + ending, on.len());
            }
        }
    }

    #[test]
    fn aggregates_ignore_flow_order(seed in 0u64..10_000, rot in 0usize..8) {
        let spec = random_spec(seed);
        let mut flows = spec.flows.clone();
        flows.reverse();
        let n = flows.len();
        flows.rotate_left(rot % n);
        let permuted = NetworkSpec::new(spec.nodes.clone(), spec.links.clone(), flows);
        for link in &spec.links {
            for x in CLASSES {
                prop_assert_eq!(
                    link_aggregates(&spec, &link.from, &link.to, x).unwrap(),
                    link_aggregates(&permuted, &link.from, &link.to, x).unwrap()
                );
            }
        }
    }

    #[test]
    fn spec_json_round_trips(seed in 0u64..10_000) {
        let spec = random_spec(seed);
        let back = NetworkSpec::from_json(&spec.to_json()).unwrap().spec;
        prop_assert_eq!(back.fingerprint(), spec.fingerprint());
        prop_assert!(!has_errors(&validate(&back)));
    }
}
