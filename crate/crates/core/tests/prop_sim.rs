use proptest::prelude::*;
use tsnbound::bounds::full_report;
use tsnbound::network::NetworkSpec;
use tsnbound::rational::{parse, ratio, to_decimal};
use tsnbound::sim::random::{random_scenario, random_spec};
use tsnbound::sim::{conformance_check, run};

fn load(name: &str) -> NetworkSpec {
    let path = format!("{}/../../specs/{name}.json", env!("CARGO_MANIFEST_DIR"));
    NetworkSpec::from_json(&std::fs::read_to_string(path).unwrap()).unwrap().spec
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn runs_are_deterministic(seed in 0u64..10_000) {
        let spec = random_spec(seed);
        let sc = random_scenario(&spec, seed ^ 0x5eed, 500_000_000);
        let a = run(&spec, &sc, None).unwrap().to_json();
        let b = run(&spec, &sc, None).unwrap().to_json();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn shipped_specs_hold_under_random_traffic(seed in 0u64..10_000, second in any::<bool>()) {
        let spec = load(if second { "cs2" } else { "cs1" });
        let report = full_report(&spec).unwrap();
        let sc = random_scenario(&spec, seed, 1_000_000_000);
        let trace = run(&spec, &sc, None).unwrap();
        let v = conformance_check(&spec, &trace, &report).unwrap();
        prop_assert!(v.is_empty(), "{:?}", &v[..v.len().min(3)]);
    }
}

proptest! {
    #[test]
    fn rational_text_round_trips(n in -1_000_000i64..1_000_000, d in 1i64..10_000) {
        let x = ratio(n, d);
        prop_assert_eq!(parse(&x.to_string()), Some(x.clone()));
        // Denominators 2^a 5^b have a finite decimal form.
        let y = ratio(n, 1 << (d % 8)) / ratio(5i64.pow((d % 5) as u32), 1);
        let text = to_decimal(&y, 12);
        prop_assert_eq!(parse(&text), Some(y));
    }
}
