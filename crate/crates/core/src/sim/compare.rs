//! Side-by-side view of bounds and the worst values a trace reached.

use std::fmt::Write as _;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::bounds::{fmt_bits, fmt_percent, fmt_us, BoundsReport};
use crate::network::NetworkSpec;
use crate::rational::{self, Exact, Rational};

use super::check::{conformance_check, worst_observed, CheckError, Metric, Violation};
use super::trace::{cbfs_queue_name, credit_name, ir_queue_name, SimTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Time,
    Bits,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// `S`, `H`, `C`, `e2e`, `backlog_cbfs`, `backlog_ir` or `credit`.
    pub kind: String,
    pub subject: String,
    pub quantity: Quantity,
    pub bound: Exact,
    /// Worst value seen; 0 when the trace never exercised the subject.
    pub observed: Exact,
    /// `observed / bound`, absent when the bound is 0.
    pub utilization: Option<Exact>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub spec_fingerprint: String,
    pub rows: Vec<ComparisonRow>,
    pub violations: Vec<Violation>,
}

fn row(kind: &str, subject: String, quantity: Quantity, bound: &Rational, observed: Rational) -> ComparisonRow {
    let utilization = (!bound.is_zero()).then(|| Exact(&observed / bound));
    ComparisonRow { kind: kind.into(), subject, quantity, bound: Exact(bound.clone()), observed: Exact(observed), utilization }
}

fn observed(spec: &NetworkSpec, trace: &SimTrace, flow: &str, hop: usize, m: Metric) -> Result<Rational, CheckError> {
    match worst_observed(spec, trace, flow, hop, m) {
        Err(CheckError::NoPackets { .. }) => Ok(Rational::zero()),
        other => other,
    }
}

/// Every bound in `report` next to the worst value `trace` reached, plus
/// the full conformance check.
pub fn compare(spec: &NetworkSpec, trace: &SimTrace, report: &BoundsReport) -> Result<Comparison, CheckError> {
    let violations = conformance_check(spec, trace, report)?;
    let mut rows = Vec::new();
    for f in &report.flows {
        for (k, h) in f.hops.iter().enumerate() {
            let at = format!("{}@{}", f.flow, h.link);
            rows.push(row("S", at.clone(), Quantity::Time, &h.cbfs_response.0, observed(spec, trace, &f.flow, k, Metric::S)?));
            if let Some(ir) = &h.regulator {
                let at = format!("{}@{}->{}", f.flow, h.link.to, ir.next);
                rows.push(row("H", at.clone(), Quantity::Time, &ir.response.0, observed(spec, trace, &f.flow, k, Metric::H)?));
                rows.push(row("C", at, Quantity::Time, &ir.combined.0, observed(spec, trace, &f.flow, k, Metric::C)?));
            }
        }
        rows.push(row("e2e", f.flow.clone(), Quantity::Time, &f.e2e.0, observed(spec, trace, &f.flow, 0, Metric::E2e)?));
    }
    let bits = |name: &str| rational::int(trace.max_backlog(name).unwrap_or(0) as i64);
    for q in &report.cbfs_queues {
        let name = cbfs_queue_name(&q.link, q.class);
        rows.push(row("backlog_cbfs", format!("{}{}", q.link, q.class), Quantity::Bits, &q.backlog.0, bits(&name)));
    }
    for q in &report.ir_queues {
        let name = ir_queue_name(&q.link, &q.next, q.class);
        let subject = format!("{}->{} from {} {}", q.link.to, q.next, q.link.from, q.class);
        rows.push(row("backlog_ir", subject, Quantity::Bits, &q.backlog.0, bits(&name)));
    }
    for sc in &report.service_curves {
        let seen = trace
            .credit
            .get(&credit_name(&sc.link, sc.class))
            .and_then(|c| c.max.as_ref())
            .map(|m| m.0.clone())
            .unwrap_or_else(Rational::zero);
        rows.push(row("credit", format!("{}{}", sc.link, sc.class), Quantity::Bits, &sc.credit_max.0, seen));
    }
    Ok(Comparison { spec_fingerprint: report.spec_fingerprint.clone(), rows, violations })
}

impl Comparison {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn row(&self, kind: &str, subject: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.kind == kind && r.subject == subject)
    }
}

fn show(q: Quantity, v: &Rational) -> String {
    match q {
        Quantity::Time => fmt_us(v),
        Quantity::Bits => fmt_bits(v),
    }
}

pub fn render_comparison_table(c: &Comparison) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<14} {:<28} {:>22} {:>22} {:>8}", "kind", "subject", "bound", "observed", "use");
    for r in &c.rows {
        let _ = writeln!(
            out,
            "{:<14} {:<28} {:>22} {:>22} {:>8}",
            r.kind,
            r.subject,
            show(r.quantity, &r.bound.0),
            show(r.quantity, &r.observed.0),
            r.utilization.as_ref().map_or("-".into(), |u| fmt_percent(&u.0))
        );
    }
    if c.violations.is_empty() {
        let _ = writeln!(out, "\nno violations");
    } else {
        let _ = writeln!(out, "\n{} violations", c.violations.len());
        for v in &c.violations {
            let _ = writeln!(out, "  {} {}: observed {} > bound {}", v.check, v.subject, v.observed, v.bound);
        }
    }
    out
}

/// Durations in microseconds, data in bits.
pub fn render_comparison_csv(c: &Comparison) -> String {
    let mut out = String::from("kind,subject,unit,bound,observed,utilization\n");
    for r in &c.rows {
        let scale = match r.quantity {
            Quantity::Time => rational::int(1_000_000),
            Quantity::Bits => rational::int(1),
        };
        let unit = if r.quantity == Quantity::Time { "us" } else { "bits" };
        let _ = writeln!(
            out,
            "{},\"{}\",{unit},{},{},{}",
            r.kind,
            r.subject,
            rational::to_decimal(&(&r.bound.0 * &scale), 6),
            rational::to_decimal(&(&r.observed.0 * &scale), 6),
            r.utilization.as_ref().map_or(String::new(), |u| rational::to_decimal(&u.0, 6))
        );
    }
    out
}
