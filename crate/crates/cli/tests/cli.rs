use std::path::PathBuf;
use std::process::{Command, Output};

use tsnbound::bounds::BoundsReport;
use tsnbound::rational::{from_us, int};
use tsnbound::sim::Comparison;

fn specs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs")
}

fn spec(name: &str) -> String {
    specs().join(name).display().to_string()
}

fn tsn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsnbound")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn validate_exit_codes() {
    assert_eq!(tsn(&["validate", "--spec", &spec("cs1.json")]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(spec("cs1.json")).unwrap().replace("\"H4\"\n      ]", "\"H9\"\n      ]");
    std::fs::write(&bad, text).unwrap();
    assert_eq!(tsn(&["validate", "--spec", bad.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(tsn(&["validate", "--spec", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(tsn(&["bounds", "--spec", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn bounds_table_and_determinism() {
    let a = tsn(&["bounds", "--spec", &spec("cs1.json")]);
    let b = tsn(&["bounds", "--spec", &spec("cs1.json")]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let t = stdout(&a);
    assert!(t.contains("S@(H1,1)       = 140 us"));
    assert!(t.contains("H@1->2 = 130 us"));
    assert!(t.contains("e2e = 700 us, additive = 1220 us, ratio 57.4%"));
    let cs2 = stdout(&tsn(&["bounds", "--spec", &spec("cs2.json")]));
    assert!(cs2.contains("flow f1 (class A)"));
    assert!(cs2.contains("e2e = 700 us"));
}

#[test]
fn bounds_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = tsn(&["bounds", "--spec", &spec("cs1.json"), "--format", "json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let r = BoundsReport::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r.flow("f1").unwrap().e2e.0, from_us(700));
    assert_eq!(r.ir_queue("H1", "1", "2", tsnbound::Class::A).unwrap().backlog.0, int(11_400));
    let csv = stdout(&tsn(&["bounds", "--spec", &spec("cs1.json"), "--format", "csv"]));
    assert!(csv.starts_with("kind,flow,class,from,to,next,unit,value,exact\n"));
    assert!(csv.contains("e2e,f1,A,4,H4,,us,700,700\n"));
    assert!(csv.contains("backlog_cbfs,,A,H1,1,,bits,6200,6200\n"));
}

fn comparison(args: &[&str]) -> (Option<i32>, Comparison) {
    let o = tsn(args);
    (o.status.code(), Comparison::from_json(&stdout(&o)).unwrap())
}

#[test]
fn compare_cs1_adversarial() {
    let (code, c) = comparison(&["compare", "--spec", &spec("cs1.json"), "--adversarial", "f1@0", "--format", "json"]);
    assert_eq!(code, Some(0));
    let cbfs = c.row("backlog_cbfs", "(H1,1)A").unwrap();
    assert_eq!((cbfs.observed.0.clone(), cbfs.bound.0.clone()), (int(4000), int(6200)));
    let ir = c.row("backlog_ir", "1->2 from H1 A").unwrap();
    assert_eq!((ir.observed.0.clone(), ir.bound.0.clone()), (int(5000), int(11_400)));
    let table = stdout(&tsn(&["compare", "--spec", &spec("cs1.json"), "--adversarial", "f1@H1,1"]));
    assert!(table.contains("64.5%"));
    assert!(table.contains("43.9%"));
    assert!(table.contains("no violations"));
}

#[test]
fn compare_shipped_pairs_are_clean() {
    let mut n = 0;
    for e in std::fs::read_dir(specs()).unwrap() {
        let p = e.unwrap().path();
        let name = p.file_name().unwrap().to_str().unwrap().to_string();
        if !name.ends_with(".scenario.json") {
            continue;
        }
        let s = spec(&format!("{}.json", name.split('.').next().unwrap()));
        let o = tsn(&["compare", "--spec", &s, "--scenario", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stdout(&o));
        n += 1;
    }
    assert!(n >= 4);
}

#[test]
fn compare_empty_scenario() {
    let (code, c) = comparison(&["compare", "--spec", &spec("cs2.json"), "--format", "json"]);
    assert_eq!(code, Some(0));
    assert!(c.violations.is_empty());
    assert!(c.rows.iter().all(|r| r.observed.0 == int(0)));
}

#[test]
fn compare_reports_violation() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = BoundsReport::from_json(&stdout(&tsn(&["bounds", "--spec", &spec("cs1.json"), "--format", "json"]))).unwrap();
    r.cbfs_queues[0].backlog.0 = int(3000);
    let stored = dir.path().join("r.json");
    std::fs::write(&stored, r.to_json()).unwrap();
    let o = tsn(&[
        "compare", "--spec", &spec("cs1.json"), "--adversarial", "f1@0", "--report", stored.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("violations"));
}

#[test]
fn tighten_hop_and_path() {
    let t = stdout(&tsn(&["tighten", "--spec", &spec("cs1.json"), "--flow", "f1", "--hop", "0", "--format", "csv"]));
    assert_eq!(
        t,
        "kind,subject,unit,bound,observed,utilization\n\
         S,\"f1@(H1,1)\",us,140,140,1\n\
         H,\"f1@1->2\",us,130,130,1\n\
         C,\"f1@1->2\",us,140,140,1\n"
    );
    let (code, c) = comparison(&["tighten", "--spec", &spec("cs2.json"), "--flow", "f1", "--format", "json"]);
    assert_eq!(code, Some(0));
    assert_eq!(c.rows.len(), 1);
    assert_eq!(c.rows[0].observed.0, from_us(700));
    assert_eq!(tsn(&["tighten", "--spec", &spec("cs1.json"), "--flow", "f9"]).status.code(), Some(2));
}

#[test]
fn simulate_writes_trace_dir() {
    let dir = tempfile::tempdir().unwrap();
    let td = dir.path().join("t");
    let o = tsn(&[
        "simulate", "--spec", &spec("cs1.json"), "--adversarial", "f1@0", "--trace-dir", td.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    for f in ["scenario.json", "trace.json", "packets.csv", "backlog.csv", "credit.csv"] {
        assert!(td.join(f).exists(), "{f}");
    }
    assert!(stdout(&o).contains("packets"));
    // The written scenario replays to the same trace.
    let again = dir.path().join("u");
    tsn(&[
        "simulate", "--spec", &spec("cs1.json"), "--scenario", td.join("scenario.json").to_str().unwrap(),
        "--trace-dir", again.to_str().unwrap(),
    ]);
    assert_eq!(std::fs::read(td.join("trace.json")).unwrap(), std::fs::read(again.join("trace.json")).unwrap());
}
