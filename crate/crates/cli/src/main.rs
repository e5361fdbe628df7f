use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tsnbound::bounds::{full_report, render_csv, render_table, BoundsReport};
use tsnbound::network::{has_errors, Diagnostic, NetworkSpec, Severity};
use tsnbound::rational;
use tsnbound::sim::{
    adversarial_path_scenario, adversarial_scenario, compare, render_comparison_csv, render_comparison_table, run,
    Comparison, Scenario, SimTrace,
};

#[derive(Parser)]
#[command(name = "tsnbound", version, about = "Latency and backlog bounds for CBS + interleaved regulator networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a spec and list its diagnostics.
    Validate(Common),
    /// Compute every bound of a spec.
    Bounds(Common),
    /// Run a scenario and write the trace.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        traffic: Traffic,
        /// Directory receiving trace.json, scenario.json and the CSV series.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
    },
    /// Run a scenario and put the worst observed values next to the bounds.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        traffic: Traffic,
        /// Check against a stored bounds report instead of recomputing.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build the worst-case scenario for a flow and report how close it gets.
    Tighten {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        flow: String,
        /// Hop index or link `i,j`; omit to target the end-to-end bound.
        #[arg(long)]
        hop: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Traffic {
    /// Scenario JSON file.
    #[arg(long, conflicts_with_all = ["adversarial", "adversarial_path"])]
    scenario: Option<PathBuf>,
    /// Generated worst case for one hop, `flow@hop` where hop is an index or `i,j`.
    #[arg(long, conflicts_with = "adversarial_path")]
    adversarial: Option<String>,
    /// Generated worst case for the end-to-end delay of a flow.
    #[arg(long)]
    adversarial_path: Option<String>,
    /// Stop the run after this many microseconds.
    #[arg(long)]
    horizon_us: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

/// Failure with its exit status.
enum Fail {
    Input(String),
    Violation,
}

type Res<T> = Result<T, Fail>;

fn input<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> Fail + '_ {
    move |e| Fail::Input(format!("{context}: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(c) => cmd_validate(&c),
        Command::Bounds(c) => cmd_bounds(&c),
        Command::Simulate { common, traffic, trace_dir } => cmd_simulate(&common, &traffic, trace_dir.as_deref()),
        Command::Compare { common, traffic, report } => cmd_compare(&common, &traffic, report.as_deref()),
        Command::Tighten { common, flow, hop } => cmd_tighten(&common, &flow, hop.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Violation) => ExitCode::from(1),
        Err(Fail::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn emit(common: &Common, text: &str) -> Res<()> {
    match &common.out {
        Some(p) => fs::write(p, text).map_err(input(&p.display().to_string())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(input(&path.display().to_string()))
}

fn load_spec(path: &Path) -> Res<(NetworkSpec, Vec<Diagnostic>)> {
    let loaded = NetworkSpec::from_json(&read(path)?).map_err(input(&path.display().to_string()))?;
    let mut diags = loaded.diagnostics;
    diags.extend(tsnbound::bounds::validate(&loaded.spec));
    Ok((loaded.spec, diags))
}

fn load_valid_spec(path: &Path) -> Res<NetworkSpec> {
    let (spec, diags) = load_spec(path)?;
    if has_errors(&diags) {
        let errs: Vec<String> = diags.iter().filter(|d| d.severity == Severity::Error).map(|d| d.to_string()).collect();
        return Err(Fail::Input(format!("{}: {}", path.display(), errs.join("; "))));
    }
    Ok(spec)
}

fn cmd_validate(c: &Common) -> Res<()> {
    let (_, diags) = load_spec(&c.spec)?;
    let text = match c.format {
        Format::Json => serde_json::to_string_pretty(&diags).expect("diagnostics serialize") + "\n",
        Format::Csv => {
            let mut s = String::from("severity,code,message\n");
            for d in &diags {
                let sev = format!("{:?}", d.severity).to_lowercase();
                s += &format!("{sev},{},\"{}\"\n", d.code, d.message.replace('"', "\"\""));
            }
            s
        }
        Format::Table => {
            let mut s: String = diags.iter().map(|d| format!("{d}\n")).collect();
            s += if has_errors(&diags) { "invalid\n" } else { "ok\n" };
            s
        }
    };
    emit(c, &text)?;
    if has_errors(&diags) {
        return Err(Fail::Input(format!("{} has errors", c.spec.display())));
    }
    Ok(())
}

fn report(spec: &NetworkSpec) -> Res<BoundsReport> {
    full_report(spec).map_err(input("bounds"))
}

fn cmd_bounds(c: &Common) -> Res<()> {
    let spec = load_valid_spec(&c.spec)?;
    let r = report(&spec)?;
    let text = match c.format {
        Format::Table => render_table(&r),
        Format::Json => r.to_json() + "\n",
        Format::Csv => render_csv(&r),
    };
    emit(c, &text)
}

/// Resolves `flow@hop` against the flow's path.
fn parse_target(spec: &NetworkSpec, flow: &str, hop: &str) -> Res<usize> {
    let f = spec.flow(flow).map_err(input("target"))?;
    if let Ok(n) = hop.parse::<usize>() {
        if n + 1 < f.path.len() {
            return Ok(n);
        }
        return Err(Fail::Input(format!("flow {flow} has no hop {n}")));
    }
    let (i, j) = hop.split_once(',').ok_or_else(|| Fail::Input(format!("bad hop {hop:?}: use an index or i,j")))?;
    f.path
        .windows(2)
        .position(|w| w[0] == i.trim() && w[1] == j.trim())
        .ok_or_else(|| Fail::Input(format!("flow {flow} does not use link ({i},{j})")))
}

fn print_notes(diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("{d}");
    }
}

fn scenario(spec: &NetworkSpec, t: &Traffic) -> Res<Scenario> {
    if let Some(p) = &t.scenario {
        let sc = Scenario::from_json(&read(p)?).map_err(input(&p.display().to_string()))?;
        sc.validate(spec).map_err(input(&p.display().to_string()))?;
        return Ok(sc);
    }
    if let Some(target) = &t.adversarial {
        let (flow, hop) = target
            .split_once('@')
            .ok_or_else(|| Fail::Input(format!("bad target {target:?}: use flow@hop")))?;
        let adv = adversarial_scenario(spec, flow, parse_target(spec, flow, hop)?).map_err(input("adversarial"))?;
        print_notes(&adv.diagnostics);
        return Ok(adv.scenario);
    }
    if let Some(flow) = &t.adversarial_path {
        let adv = adversarial_path_scenario(spec, flow).map_err(input("adversarial"))?;
        print_notes(&adv.diagnostics);
        return Ok(adv.scenario);
    }
    Ok(Scenario::empty())
}

fn simulate(spec: &NetworkSpec, sc: &Scenario, horizon_us: Option<u64>) -> Res<SimTrace> {
    let horizon = horizon_us.map(|us| us.saturating_mul(1_000_000));
    let trace = run(spec, sc, horizon).map_err(input("simulation"))?;
    if !trace.complete {
        eprintln!("note: horizon reached before the network drained");
    }
    Ok(trace)
}

#[derive(Serialize)]
struct Observed<'a> {
    kind: &'a str,
    subject: &'a str,
    unit: &'static str,
    value: String,
}

fn observed_rows(c: &Comparison) -> Vec<Observed<'_>> {
    c.rows
        .iter()
        .map(|r| {
            let (unit, v) = match r.quantity {
                tsnbound::sim::Quantity::Time => ("us", &r.observed.0 * rational::int(1_000_000)),
                tsnbound::sim::Quantity::Bits => ("bits", r.observed.0.clone()),
            };
            Observed { kind: &r.kind, subject: &r.subject, unit, value: rational::to_decimal(&v, 6) }
        })
        .collect()
}

fn write_trace_dir(dir: &Path, sc: &Scenario, trace: &SimTrace) -> Res<()> {
    fs::create_dir_all(dir).map_err(input(&dir.display().to_string()))?;
    let files = [
        ("scenario.json", sc.to_json()),
        ("trace.json", trace.to_json()),
        ("packets.csv", trace.packets_csv()),
        ("backlog.csv", trace.backlog_csv()),
        ("credit.csv", trace.credit_csv()),
    ];
    for (name, body) in files {
        let p = dir.join(name);
        fs::write(&p, body).map_err(input(&p.display().to_string()))?;
    }
    Ok(())
}

fn cmd_simulate(c: &Common, t: &Traffic, trace_dir: Option<&Path>) -> Res<()> {
    let spec = load_valid_spec(&c.spec)?;
    let sc = scenario(&spec, t)?;
    let trace = simulate(&spec, &sc, t.horizon_us)?;
    if let Some(dir) = trace_dir {
        write_trace_dir(dir, &sc, &trace)?;
    }
    let cmp = compare(&spec, &trace, &report(&spec)?).map_err(input("check"))?;
    let rows = observed_rows(&cmp);
    let text = match c.format {
        Format::Json => serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n",
        Format::Csv => {
            let mut s = String::from("kind,subject,unit,observed\n");
            for r in &rows {
                s += &format!("{},\"{}\",{},{}\n", r.kind, r.subject, r.unit, r.value);
            }
            s
        }
        Format::Table => {
            let mut s = format!("{} packets\n", trace.packets.len());
            for r in &rows {
                s += &format!("{:<14} {:<28} {:>16} {}\n", r.kind, r.subject, r.value, r.unit);
            }
            s
        }
    };
    emit(c, &text)
}

fn render(c: &Common, cmp: &Comparison) -> Res<()> {
    let text = match c.format {
        Format::Table => render_comparison_table(cmp),
        Format::Json => cmp.to_json() + "\n",
        Format::Csv => render_comparison_csv(cmp),
    };
    emit(c, &text)?;
    if cmp.violations.is_empty() {
        Ok(())
    } else {
        Err(Fail::Violation)
    }
}

fn cmd_compare(c: &Common, t: &Traffic, stored: Option<&Path>) -> Res<()> {
    let spec = load_valid_spec(&c.spec)?;
    let bounds = match stored {
        Some(p) => BoundsReport::from_json(&read(p)?).map_err(input(&p.display().to_string()))?,
        None => report(&spec)?,
    };
    let sc = scenario(&spec, t)?;
    let trace = simulate(&spec, &sc, t.horizon_us)?;
    let cmp = compare(&spec, &trace, &bounds).map_err(input("check"))?;
    render(c, &cmp)
}

fn cmd_tighten(c: &Common, flow: &str, hop: Option<&str>) -> Res<()> {
    let spec = load_valid_spec(&c.spec)?;
    let adv = match hop {
        Some(h) => adversarial_scenario(&spec, flow, parse_target(&spec, flow, h)?),
        None => adversarial_path_scenario(&spec, flow),
    }
    .map_err(input("adversarial"))?;
    print_notes(&adv.diagnostics);
    let trace = simulate(&spec, &adv.scenario, None)?;
    let mut cmp = compare(&spec, &trace, &report(&spec)?).map_err(input("check"))?;
    // Keep the rows about the target flow.
    let f = spec.flow(flow).map_err(input("target"))?;
    let keep = |subject: &str| subject == f.id || subject.starts_with(&format!("{}@", f.id));
    cmp.rows.retain(|r| match hop {
        Some(_) => keep(&r.subject) && r.kind != "e2e",
        None => r.kind == "e2e" && keep(&r.subject),
    });
    if let (Some(h), false) = (hop, cmp.rows.is_empty()) {
        let n = parse_target(&spec, flow, h)?;
        let link = format!("{}@({},{})", f.id, f.path[n], f.path[n + 1]);
        let via = format!("{}@{}->", f.id, f.path[n + 1]);
        cmp.rows.retain(|r| r.subject == link || r.subject.starts_with(&via));
    }
    render(c, &cmp)
}
