//! Acceptance criteria, one PASS/FAIL line each. All comparisons are exact.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use tsnbound::bounds::{self, full_report};
use tsnbound::network::{flows_on_link, flows_through};
use tsnbound::rational::{from_us, int};
use tsnbound::sim::check::service_curve_violations;
use tsnbound::sim::random::{random_scenario, random_spec};
use tsnbound::sim::{self, conformance_check, worst_observed, Metric, SimTrace};
use tsnbound::{Class, LinkId, NetworkSpec};

const SPECS: u64 = 20;
const SCENARIOS_PER_SPEC: u64 = 50;
const SPAN_PS: u64 = 2_000_000_000;

fn load(name: &str) -> NetworkSpec {
    let path = format!("{}/../../specs/{name}.json", env!("CARGO_MANIFEST_DIR"));
    NetworkSpec::from_json(&std::fs::read_to_string(path).unwrap()).unwrap().spec
}

macro_rules! ensure_eq {
    ($a:expr, $b:expr, $what:expr) => {{
        let (a, b) = (&$a, &$b);
        if a != b {
            return Err(format!("{}: got {}, expected {}", $what, a, b));
        }
    }};
}

type Check = Result<(), String>;

fn criterion_1() -> Check {
    let s = load("cs1");
    let a = Class::A;
    ensure_eq!(bounds::cbfs_response_bound(&s, "f1", "H1", "1").unwrap(), from_us(140), "S(f1,H1,1)");
    ensure_eq!(bounds::ir_response_bound(&s, "f1", "H1", "1", "2").unwrap(), from_us(130), "H(f1,H1,1,2)");
    for (i, j, k) in [("H1", "1", "2"), ("1", "2", "3"), ("2", "3", "4"), ("3", "4", "H4")] {
        ensure_eq!(bounds::combined_bound(&s, i, j, k, a).unwrap(), from_us(140), format!("C({i},{j},{k})"));
    }
    ensure_eq!(bounds::cbfs_response_bound(&s, "f1", "4", "H4").unwrap(), from_us(140), "S(f1,4,H4)");
    let e2e = bounds::e2e_bound(&s, "f1").unwrap();
    let add = bounds::additive_e2e(&s, "f1").unwrap();
    ensure_eq!(e2e, from_us(700), "e2e(f1)");
    ensure_eq!(add, from_us(1220), "additive(f1)");
    let pct = (&e2e / &add * int(100)).round();
    ensure_eq!(pct, int(57), "ratio percent");
    ensure_eq!(bounds::ir_backlog(&s, "H1", "1", "2", a).unwrap(), int(11_400), "B^IR(H1,1,2)");
    ensure_eq!(bounds::cbfs_backlog(&s, "H1", "1", a).unwrap(), int(6_200), "B^CBFS(H1,1)");
    let report = full_report(&s).unwrap();
    let f1 = report.flow("f1").unwrap();
    ensure_eq!(f1.e2e.0, from_us(700), "report e2e");
    ensure_eq!(f1.additive_e2e.0, from_us(1220), "report additive");
    Ok(())
}

fn criterion_2() -> Check {
    let s = load("cs2");
    ensure_eq!(bounds::e2e_bound(&s, "f1").unwrap(), from_us(700), "e2e bound");
    let adv = sim::adversarial_path_scenario(&s, "f1").map_err(|e| e.to_string())?;
    let trace = sim::run(&s, &adv.scenario, None).map_err(|e| e.to_string())?;
    ensure_eq!(worst_observed(&s, &trace, "f1", 0, Metric::E2e).unwrap(), from_us(700), "observed e2e");
    let v = conformance_check(&s, &trace, &full_report(&s).unwrap()).unwrap();
    if !v.is_empty() {
        return Err(format!("violations: {v:?}"));
    }
    Ok(())
}

fn criterion_3() -> Check {
    let s = load("cs1");
    let adv = sim::adversarial_scenario(&s, "f1", 0).map_err(|e| e.to_string())?;
    let trace = sim::run(&s, &adv.scenario, None).map_err(|e| e.to_string())?;
    let obs = |f: &str, m| worst_observed(&s, &trace, f, 0, m).unwrap();
    ensure_eq!(obs("f1", Metric::S), from_us(140), "f1 S");
    ensure_eq!(obs("f1", Metric::H), from_us(130), "f1 H");
    ensure_eq!(obs("f2", Metric::S), from_us(75), "f2 S");
    ensure_eq!(obs("f2", Metric::H), from_us(100), "f2 H");
    let l = LinkId::new("H1", "1");
    ensure_eq!(trace.max_backlog(&sim::cbfs_queue_name(&l, Class::A)).unwrap_or(0), 4000, "CBFS-A@H1 backlog");
    ensure_eq!(trace.max_backlog(&sim::ir_queue_name(&l, "2", Class::A)).unwrap_or(0), 5000, "IR@1 backlog");
    Ok(())
}

struct Sweep {
    specs: Vec<NetworkSpec>,
    traces: Vec<(usize, SimTrace)>,
    violations: Vec<String>,
    slowest: Duration,
}

fn sweep() -> Sweep {
    let specs: Vec<NetworkSpec> = (0..SPECS).map(|s| random_spec(1000 + s)).collect();
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8);
    let results: Vec<Vec<(usize, SimTrace, Vec<String>, Duration)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let specs = &specs;
                scope.spawn(move || {
                    let mut out = Vec::new();
                    for (i, spec) in specs.iter().enumerate().filter(|(i, _)| i % workers == w) {
                        let report = full_report(spec).unwrap();
                        for k in 0..SCENARIOS_PER_SPEC {
                            let sc = random_scenario(spec, (i as u64) << 32 | k, SPAN_PS);
                            let t0 = Instant::now();
                            let trace = sim::run(spec, &sc, None).unwrap();
                            let v = conformance_check(spec, &trace, &report).unwrap();
                            let dt = t0.elapsed();
                            let v = v.iter().map(|v| format!("spec {i} scenario {k}: {v:?}")).collect();
                            out.push((i, trace, v, dt));
                        }
                    }
                    out
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut sweep = Sweep { specs, traces: Vec::new(), violations: Vec::new(), slowest: Duration::ZERO };
    for (i, trace, v, dt) in results.into_iter().flatten() {
        sweep.violations.extend(v);
        sweep.slowest = sweep.slowest.max(dt);
        sweep.traces.push((i, trace));
    }
    sweep
}

fn criterion_4(sw: &Sweep) -> Check {
    let n = sw.traces.len();
    if n < 1000 || sw.specs.len() < 20 {
        return Err(format!("only {n} scenarios over {} specs", sw.specs.len()));
    }
    for s in &sw.specs {
        if s.nodes.len() > 6 || s.flows.len() > 8 {
            return Err("random spec too large".into());
        }
    }
    if !sw.violations.is_empty() {
        return Err(format!("{} violations, first: {}", sw.violations.len(), sw.violations[0]));
    }
    if sw.slowest >= Duration::from_secs(1) {
        return Err(format!("slowest scenario took {:?}", sw.slowest));
    }
    Ok(())
}

fn criterion_5(sw: &Sweep) -> Check {
    let mut starts = 0usize;
    for (i, trace) in &sw.traces {
        let v = service_curve_violations(&sw.specs[*i], trace).unwrap();
        if let Some(first) = v.first() {
            return Err(format!("spec {i}: {first:?}"));
        }
        starts += trace.packets.iter().flat_map(|p| &p.hops).filter(|h| h.q.is_some()).count();
    }
    if starts == 0 {
        return Err("no start-of-service events".into());
    }
    Ok(())
}

fn criterion_6(sw: &Sweep) -> Check {
    let mut checked = 0usize;
    for (i, trace) in &sw.traces {
        for (port, series) in &trace.credit {
            let ceiling = series.ceiling.as_ref().ok_or_else(|| format!("spec {i}: no ceiling for {port}"))?;
            for (t, v) in &series.points {
                checked += 1;
                if v.0 > ceiling.0 {
                    return Err(format!("spec {i} {port} at {t} ps: credit {} above {}", v, ceiling));
                }
            }
        }
    }
    if checked == 0 {
        return Err("no credit samples".into());
    }
    Ok(())
}

fn criterion_7(sw: &Sweep) -> Check {
    let mut specs: Vec<&NetworkSpec> = sw.specs.iter().collect();
    let cs = [load("cs1"), load("cs2")];
    specs.extend(cs.iter());
    for (n, s) in specs.iter().enumerate() {
        for link in &s.links {
            for x in [Class::A, Class::B] {
                let mut nexts: Vec<String> = flows_on_link(s, &link.from, &link.to, x)
                    .unwrap()
                    .iter()
                    .filter_map(|f| f.next_after(&link.from, &link.to).map(str::to_string))
                    .collect();
                nexts.dedup();
                for k in nexts {
                    if flows_through(s, &link.from, &link.to, &k, x).unwrap().is_empty() {
                        continue;
                    }
                    let sup_form = bounds::combined_bound_sup_form(s, &link.from, &link.to, &k, x).unwrap();
                    let closed = bounds::combined_bound(s, &link.from, &link.to, &k, x).unwrap();
                    ensure_eq!(sup_form, closed, format!("spec {n} C{}->{k}", link.id()));
                    let b11 = bounds::ir_backlog(s, &link.from, &link.to, &k, x).unwrap();
                    let bc = bounds::ir_backlog_via_curves(s, &link.from, &link.to, &k, x).unwrap();
                    ensure_eq!(b11, bc, format!("spec {n} B^IR{}->{k}", link.id()));
                }
            }
        }
        for f in &s.flows {
            let e2e = bounds::e2e_bound(s, &f.id).unwrap();
            let add = bounds::additive_e2e(s, &f.id).unwrap();
            if e2e > add {
                return Err(format!("spec {n} flow {}: e2e {e2e} above additive {add}", f.id));
            }
        }
    }
    Ok(())
}

fn criterion_8(sw: &Sweep) -> Check {
    let mut compared = 0;
    for (n, s) in sw.specs.iter().enumerate() {
        for f in &s.flows {
            for w in f.path.windows(2) {
                let beta = bounds::cbs_service_curve(s, &w[0], &w[1], f.class).unwrap();
                if beta.rate >= s.link(&w[0], &w[1]).unwrap().capacity {
                    continue;
                }
                let ours = bounds::cbfs_response_bound(s, &f.id, &w[0], &w[1]).unwrap();
                let classic = bounds::classical_cbfs_bound(s, &w[0], &w[1], f.class).unwrap();
                if ours >= classic {
                    return Err(format!("spec {n} flow {} on ({},{}): {ours} not below {classic}", f.id, w[0], w[1]));
                }
                compared += 1;
            }
        }
    }
    if compared == 0 {
        return Err("nothing compared".into());
    }
    Ok(())
}

fn report(n: usize, what: &str, f: impl FnOnce() -> Check) -> bool {
    let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    match res {
        Ok(()) => {
            println!("PASS {n} {what}");
            true
        }
        Err(e) => {
            println!("FAIL {n} {what}: {e}");
            false
        }
    }
}

fn main() {
    let mut ok = true;
    ok &= report(1, "CS1 golden bounds", criterion_1);
    ok &= report(2, "CS2 end-to-end bound and observed 700 us", criterion_2);
    ok &= report(3, "CS1 adversarial simulation meets the bounds", criterion_3);
    let sw = sweep();
    ok &= report(4, "randomized soundness (1000 scenarios, 20 specs, < 1 s each)", || criterion_4(&sw));
    ok &= report(5, "service-curve inequality at every start of service", || criterion_5(&sw));
    ok &= report(6, "credit ceilings at every event", || criterion_6(&sw));
    ok &= report(7, "cross-oracle equalities and e2e <= additive", || criterion_7(&sw));
    ok &= report(8, "per-flow CBFS bound strictly below the aggregate bound", || criterion_8(&sw));
    if !ok {
        std::process::exit(1);
    }
}
