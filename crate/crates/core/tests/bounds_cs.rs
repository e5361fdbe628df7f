use tsnbound::bounds::*;
use tsnbound::rational::{from_us, int};
use tsnbound::{Class, NetworkSpec};

fn load(name: &str) -> NetworkSpec {
    let path = format!("{}/../../specs/{name}.json", env!("CARGO_MANIFEST_DIR"));
    NetworkSpec::from_json(&std::fs::read_to_string(path).unwrap()).unwrap().spec
}

#[test]
fn cs1_hop_bounds() {
    let s = load("cs1");
    let beta = cbs_service_curve(&s, "H1", "1", Class::A).unwrap();
    assert_eq!(beta.rate, int(40_000_000));
    assert_eq!(beta.latency, from_us(80));
    assert_eq!(cbfs_waiting_bound(&s, "f1", "H1", "1").unwrap(), from_us(130));
    assert_eq!(cbfs_waiting_bound(&s, "f2", "H1", "1").unwrap(), from_us(105));
    assert_eq!(cbfs_response_bound(&s, "f1", "H1", "1").unwrap(), from_us(140));
    assert_eq!(cbfs_response_bound(&s, "f2", "H1", "1").unwrap(), from_us(125));
    assert_eq!(cbfs_response_bound(&s, "f1", "4", "H4").unwrap(), from_us(140));
    for (i, j, k) in [("H1", "1", "2"), ("1", "2", "3"), ("2", "3", "4"), ("3", "4", "H4")] {
        assert_eq!(combined_bound(&s, i, j, k, Class::A).unwrap(), from_us(140), "{i}{j}{k}");
        assert_eq!(combined_bound_sup_form(&s, i, j, k, Class::A).unwrap(), from_us(140));
    }
    assert_eq!(ir_response_bound(&s, "f1", "H1", "1", "2").unwrap(), from_us(130));
    assert_eq!(ir_response_bound(&s, "f2", "H1", "1", "2").unwrap(), from_us(120));
    assert_eq!(ir_fifo_delay(&s, "H1", "1", "2", Class::A).unwrap(), from_us(130));
    assert_eq!(e2e_bound(&s, "f1").unwrap(), from_us(700));
    assert_eq!(additive_e2e(&s, "f1").unwrap(), from_us(1220));
    assert_eq!(ir_backlog(&s, "H1", "1", "2", Class::A).unwrap(), int(11_400));
    assert_eq!(ir_backlog_via_curves(&s, "H1", "1", "2", Class::A).unwrap(), int(11_400));
    assert_eq!(cbfs_backlog(&s, "H1", "1", Class::A).unwrap(), int(6_200));
}

#[test]
fn cs2_e2e() {
    let s = load("cs2");
    assert_eq!(e2e_bound(&s, "f1").unwrap(), from_us(700));
    let r = full_report(&s).unwrap();
    assert_eq!(r.flow("f2").unwrap().e2e.0, from_us(225));
    assert_eq!(r.flow("f3").unwrap().additive_e2e.0, from_us(510));
}

#[test]
fn cs1_report() {
    let s = load("cs1");
    let r = full_report(&s).unwrap();
    let t = render_table(&r);
    assert!(t.contains("57.4%"));
    assert_eq!(BoundsReport::from_json(&r.to_json()).unwrap(), r);
}
