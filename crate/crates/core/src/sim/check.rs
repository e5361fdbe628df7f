//! Observed metrics and conformance of traces against computed bounds.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, BoundsReport};
use crate::curve::RateLatency;
use crate::network::{Class, LinkId, NetworkSpec, Regulator};
use crate::rational::{self, Exact, Rational};

use super::scenario::envelope_violation;
use super::trace::{cbfs_queue_name, credit_name, ir_queue_name, EventKind, SimTrace};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("trace and report come from different specs")]
    SpecMismatch,
    #[error("no packets of flow {flow} observed at hop {hop}")]
    NoPackets { flow: String, hop: usize },
    #[error("unknown flow {0}")]
    UnknownFlow(String),
    #[error(transparent)]
    Bounds(#[from] bounds::BoundsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    /// CBFS response time `D - A`.
    S,
    /// Regulator response time `E - D'`.
    H,
    /// CBFS plus regulator `E - A`.
    C,
    /// Destination reception minus source arrival.
    E2e,
}

fn secs(ps: u64) -> Rational {
    rational::from_ps(ps as i64)
}

/// Worst value of `metric` over the packets of `flow` at path hop `hop`
/// (ignored for `E2e`), in seconds.
pub fn worst_observed(
    spec: &NetworkSpec,
    trace: &SimTrace,
    flow: &str,
    hop: usize,
    metric: Metric,
) -> Result<Rational, CheckError> {
    let f = spec.flow(flow).map_err(|_| CheckError::UnknownFlow(flow.to_string()))?;
    let mut worst: Option<u64> = None;
    for p in trace.flow_packets(flow) {
        let v = match metric {
            Metric::E2e => {
                if p.first_hop != 0 || !p.delivered(f.path.len()) {
                    continue;
                }
                p.hops.last().and_then(|h| h.d).map(|d| d - p.hops[0].a)
            }
            _ => {
                let Some(h) = p.at_hop(hop) else { continue };
                match metric {
                    Metric::S => h.d.map(|d| d - h.a),
                    Metric::H => h.e.zip(h.d_proc).map(|(e, d)| e - d),
                    _ => h.e.map(|e| e - h.a),
                }
            }
        };
        if let Some(v) = v {
            worst = Some(worst.map_or(v, |w| w.max(v)));
        }
    }
    worst
        .map(secs)
        .ok_or_else(|| CheckError::NoPackets { flow: flow.to_string(), hop })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    /// Packet `flow#seq@link`, queue or port concerned.
    pub subject: String,
    pub observed: Exact,
    pub bound: Exact,
    /// `bound - observed`, negative.
    pub margin: Exact,
}

fn violation(check: &str, subject: String, observed: Rational, bound: Rational) -> Violation {
    let margin = &bound - &observed;
    Violation { check: check.into(), subject, observed: observed.into(), bound: bound.into(), margin: margin.into() }
}

/// Compares every observation in `trace` with its bound in `report` and runs
/// the structural checks (service curve, credit ceilings, shaper output,
/// FIFO order, CDT envelope). Returns all violations found.
pub fn conformance_check(
    spec: &NetworkSpec,
    trace: &SimTrace,
    report: &BoundsReport,
) -> Result<Vec<Violation>, CheckError> {
    let fp = spec.fingerprint();
    if trace.spec_fingerprint != fp || report.spec_fingerprint != fp {
        return Err(CheckError::SpecMismatch);
    }
    let mut out = Vec::new();
    check_packets(spec, trace, report, &mut out);
    check_backlogs(trace, report, &mut out);
    check_credit(trace, report, &mut out);
    out.extend(service_curve_violations(spec, trace)?);
    check_shaper_output(spec, trace, &mut out);
    check_fifo(trace, &mut out);
    check_cdt(spec, trace, &mut out);
    Ok(out)
}

fn check_packets(spec: &NetworkSpec, trace: &SimTrace, report: &BoundsReport, out: &mut Vec<Violation>) {
    for p in &trace.packets {
        let Ok(f) = spec.flow(&p.flow) else { continue };
        for (k, h) in p.hops.iter().enumerate() {
            let id = format!("{}#{}@{}", p.flow, p.seq, h.link);
            let Some(hr) = report.hop(&p.flow, &h.link.from, &h.link.to) else { continue };
            if let Some(d) = h.d {
                let s = secs(d - h.a);
                if s > hr.cbfs_response.0 {
                    out.push(violation("S", id.clone(), s, hr.cbfs_response.0.clone()));
                }
            }
            let hop = p.first_hop + k;
            if let (Some(e), Some(dp), Some(ir)) = (h.e, h.d_proc, &hr.regulator) {
                debug_assert_eq!(f.path.get(hop + 2), Some(&ir.next));
                let hv = secs(e - dp);
                if hv > ir.response.0 {
                    out.push(violation("H", id.clone(), hv, ir.response.0.clone()));
                }
                let c = secs(e - h.a);
                if c > ir.combined.0 {
                    out.push(violation("C", id, c, ir.combined.0.clone()));
                }
            }
        }
        if p.first_hop == 0 && p.delivered(f.path.len()) {
            let e2e = secs(p.hops.last().and_then(|h| h.d).expect("delivered") - p.hops[0].a);
            if let Some(fr) = report.flow(&p.flow) {
                if e2e > fr.e2e.0 {
                    out.push(violation("e2e", format!("{}#{}", p.flow, p.seq), e2e, fr.e2e.0.clone()));
                }
            }
        }
    }
}

fn check_backlogs(trace: &SimTrace, report: &BoundsReport, out: &mut Vec<Violation>) {
    let mut bounds: BTreeMap<String, Rational> = BTreeMap::new();
    for q in &report.cbfs_queues {
        bounds.insert(cbfs_queue_name(&q.link, q.class), q.backlog.0.clone());
    }
    for q in &report.ir_queues {
        bounds.insert(ir_queue_name(&q.link, &q.next, q.class), q.backlog.0.clone());
    }
    for (name, series) in &trace.backlog {
        let observed = rational::int(series.max_bits as i64);
        match bounds.get(name) {
            Some(b) if &observed > b => out.push(violation("backlog", name.clone(), observed, b.clone())),
            Some(_) => {}
            None if series.max_bits > 0 => out.push(violation("backlog", name.clone(), observed, Rational::zero())),
            None => {}
        }
    }
}

fn check_credit(trace: &SimTrace, report: &BoundsReport, out: &mut Vec<Violation>) {
    for sc in &report.service_curves {
        let name = credit_name(&sc.link, sc.class);
        if let Some(max) = trace.credit.get(&name).and_then(|s| s.max.as_ref()) {
            if max.0 > sc.credit_max.0 {
                out.push(violation("credit", name, max.0.clone(), sc.credit_max.0.clone()));
            }
        }
    }
}

/// Packets of `class` served on `link`, in order of service: `(A, Q, bits, id)`.
fn served(trace: &SimTrace, spec: &NetworkSpec, link: &LinkId, class: Class) -> Vec<(u64, u64, u64, String)> {
    let mut v = Vec::new();
    for p in &trace.packets {
        if spec.flow(&p.flow).ok().map(|f| f.class) != Some(class) {
            continue;
        }
        for h in p.hops.iter().filter(|h| &h.link == link) {
            if let Some(q) = h.q {
                v.push((h.a, q, p.bits, format!("{}#{}@{}", p.flow, p.seq, link)));
            }
        }
    }
    v.sort_by_key(|e| e.1);
    v
}

/// At every start of service `Q_n` of a class queue there is an `m <= n`
/// with `sum_{k=m}^{n-1} l_k >= beta(Q_n - A_m)`.
pub fn service_curve_violations(spec: &NetworkSpec, trace: &SimTrace) -> Result<Vec<Violation>, CheckError> {
    let mut out = Vec::new();
    for link in &spec.links {
        for class in [Class::A, Class::B] {
            let pkts = served(trace, spec, &link.id(), class);
            if pkts.is_empty() {
                continue;
            }
            let beta: RateLatency = bounds::cbs_service_curve(spec, &link.from, &link.to, class)?;
            let eval = |dt: u64| rational::pos(&beta.rate * (secs(dt) - &beta.latency));
            for n in 0..pkts.len() {
                let qn = pkts[n].1;
                let mut sum = Rational::zero();
                let mut best: Option<Rational> = None;
                let mut ok = false;
                for m in (0..=n).rev() {
                    if m < n {
                        sum += rational::int(pkts[m].2 as i64);
                    }
                    let need = eval(qn.saturating_sub(pkts[m].0));
                    if sum >= need {
                        ok = true;
                        break;
                    }
                    let gap = &need - &sum;
                    if best.as_ref().is_none_or(|b| &gap < b) {
                        best = Some(gap);
                    }
                }
                if !ok {
                    let gap = best.expect("at least one m");
                    out.push(violation("service-curve", pkts[n].3.clone(), gap, Rational::zero()));
                }
            }
        }
    }
    Ok(out)
}

fn check_shaper_output(spec: &NetworkSpec, trace: &SimTrace, out: &mut Vec<Violation>) {
    // (flow, hop) -> releases (E, bits)
    let mut rel: BTreeMap<(&str, usize), Vec<(u64, u64)>> = BTreeMap::new();
    for p in &trace.packets {
        for (k, h) in p.hops.iter().enumerate() {
            if let Some(e) = h.e {
                rel.entry((&p.flow, p.first_hop + k)).or_default().push((e, p.bits));
            }
        }
    }
    for ((flow, hop), mut v) in rel {
        let Ok(f) = spec.flow(flow) else { continue };
        v.sort();
        let subject = format!("{flow}@{}", f.path[hop + 1]);
        match f.regulator {
            Regulator::Lrq => {
                for w in v.windows(2) {
                    let gap = secs(w[1].0 - w[0].0);
                    let need = rational::int(w[0].1 as i64) / &f.rate;
                    if gap < need {
                        out.push(violation("shaper-output", subject.clone(), need, gap));
                    }
                }
            }
            Regulator::Lb => {
                let pts: Vec<_> = v.iter().map(|(t, b)| (secs(*t), rational::int(*b as i64))).collect();
                if let Some((s, t)) = envelope_violation(&pts, &f.rate, &f.burst) {
                    out.push(violation("shaper-output", format!("{subject} [{s},{t}]"), t.clone(), s));
                }
            }
        }
    }
}

/// Departure order equals arrival order in every regulator and class queue.
fn check_fifo(trace: &SimTrace, out: &mut Vec<Violation>) {
    let mut ins: BTreeMap<&str, Vec<(&str, usize)>> = BTreeMap::new();
    let mut outs: BTreeMap<&str, Vec<(&str, usize)>> = BTreeMap::new();
    for e in &trace.events {
        let is_ir = e.queue.starts_with("ir");
        let is_cbfs = e.queue.starts_with("cbfs");
        let target = match (e.kind, is_ir, is_cbfs) {
            (EventKind::Receive, true, _) | (EventKind::Arrive, _, true) => &mut ins,
            (EventKind::Eligible, true, _) | (EventKind::StartTx, _, true) => &mut outs,
            _ => continue,
        };
        target.entry(&e.queue).or_default().push((&e.flow, e.seq));
    }
    for (q, o) in &outs {
        let i = &ins[q];
        if let Some(k) = (0..o.len()).find(|&k| i[k] != o[k]) {
            out.push(violation(
                "fifo",
                format!("{q}: {}#{} left before {}#{}", o[k].0, o[k].1, i[k].0, i[k].1),
                rational::int(k as i64),
                rational::int(k as i64),
            ));
        }
    }
}

/// Realized CDT arrivals satisfy the link's token bucket over every window.
fn check_cdt(spec: &NetworkSpec, trace: &SimTrace, out: &mut Vec<Violation>) {
    for link in &spec.links {
        let Some(arr) = trace.cdt_arrivals.get(&link.id().to_string()) else { continue };
        // Breakpoints of the cumulative arrival function; each burst is a jump.
        let mut times: Vec<u64> = arr.iter().flat_map(|a| [a.start, a.end]).collect();
        times.sort_unstable();
        times.dedup();
        // Arrivals in [s, t] including jumps at both ends.
        let amount = |s: u64, t: u64| -> Rational {
            let mut total = Rational::zero();
            for a in arr {
                if a.start >= s && a.start <= t {
                    total += rational::int(a.bits as i64);
                }
                if let Some(r) = &a.rate {
                    let lo = a.start.max(s);
                    let hi = a.end.min(t);
                    if hi > lo {
                        total += &r.0 * secs(hi - lo);
                    }
                }
            }
            total
        };
        for (x, &s) in times.iter().enumerate() {
            for &t in &times[x..] {
                let got = amount(s, t);
                let cap = &link.cdt.rate * secs(t - s) + &link.cdt.burst;
                if got > cap {
                    out.push(violation("cdt-envelope", format!("{} [{s},{t}] ps", link.id()), got, cap));
                }
            }
        }
    }
}
