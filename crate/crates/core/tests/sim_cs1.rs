use tsnbound::network::LinkId;
use tsnbound::rational::int;
use tsnbound::sim::*;
use tsnbound::{Class, NetworkSpec};

const US: u64 = 1_000_000;

fn load(name: &str) -> NetworkSpec {
    let path = format!("{}/../../specs/{name}.json", env!("CARGO_MANIFEST_DIR"));
    NetworkSpec::from_json(&std::fs::read_to_string(path).unwrap()).unwrap().spec
}

fn pkt(flow: &str, t_us: u64, bits: u64) -> PacketInjection {
    PacketInjection { flow: flow.into(), time_ps: t_us * US, bits, hop: 0 }
}

#[test]
fn hand_written_cs1_trace() {
    let spec = load("cs1");
    let l = LinkId::new("H1", "1");
    let mut sc = Scenario::empty();
    sc.be.push(BeInjection { link: l.clone(), time_ps: 0, bits: 2000, late: false });
    sc.be.push(BeInjection { link: l.clone(), time_ps: 115 * US, bits: 2000, late: false });
    sc.cdt.push(CdtInjection { link: l.clone(), time_ps: 0, bits: 4000, rate: Some(int(20_000_000)), late: true });
    sc.cdt.push(CdtInjection { link: l.clone(), time_ps: 135 * US, bits: 1200, rate: Some(int(20_000_000)), late: false });
    sc.packets.push(pkt("f2", 20, 2000));
    for t in [20, 70, 120, 170, 220] {
        sc.packets.push(pkt("f1", t, 1000));
    }
    sc.packets.push(pkt("f2", 220, 2000));
    let tr = run(&spec, &sc, None).unwrap();
    let f1p1 = &tr.packets.iter().find(|p| p.flow == "f1" && p.seq == 0).unwrap().hops[0];
    assert_eq!(f1p1.d, Some(160 * US));
    assert_eq!(tr.max_backlog(&cbfs_queue_name(&l, Class::A)), Some(4000));
    assert_eq!(tr.max_backlog(&ir_queue_name(&l, "2", Class::A)), Some(5000));
}

#[test]
fn generated_cs1_and_cs2() {
    let us = |v: u64| tsnbound::rational::from_us(v as i64);
    let spec = load("cs1");
    let rep = tsnbound::bounds::full_report(&spec).unwrap();
    let adv = adversarial_scenario(&spec, "f1", 0).unwrap();
    assert!(adv.diagnostics.is_empty());
    let tr = run(&spec, &adv.scenario, None).unwrap();
    for (f, m, want) in [("f1", Metric::S, 140), ("f1", Metric::H, 130), ("f2", Metric::S, 75), ("f2", Metric::H, 100)] {
        assert_eq!(worst_observed(&spec, &tr, f, 0, m).unwrap(), us(want), "{f} {m:?}");
    }
    let l = LinkId::new("H1", "1");
    assert_eq!(tr.max_backlog(&cbfs_queue_name(&l, Class::A)), Some(4000));
    assert_eq!(tr.max_backlog(&ir_queue_name(&l, "2", Class::A)), Some(5000));
    assert!(conformance_check(&spec, &tr, &rep).unwrap().is_empty());

    let spec = load("cs2");
    let rep = tsnbound::bounds::full_report(&spec).unwrap();
    let adv = adversarial_path_scenario(&spec, "f1").unwrap();
    let tr = run(&spec, &adv.scenario, None).unwrap();
    assert_eq!(worst_observed(&spec, &tr, "f1", 0, Metric::E2e).unwrap(), us(700));
    assert!(conformance_check(&spec, &tr, &rep).unwrap().is_empty());
}
