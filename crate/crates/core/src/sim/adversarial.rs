//! Worst-case scenario construction.
//!
//! At one output port: a BE frame of maximal size starts just before the
//! class burst arrives, a CDT burst arrives right behind it and keeps
//! arriving at the CDT rate until the CDT queue drains. The class burst holds
//! the other flows' bursts first and the target packet last. When the credit
//! is about to recover, a second BE frame grabs the link, and a CDT replay of
//! everything the bucket allows arrives as it ends.

use num_traits::{ToPrimitive, Zero};

use crate::network::{flows_on_link, Class, Diagnostic, FlowSpec, LinkParams, NetworkSpec, Regulator, Severity};
use crate::rational::{self, Rational, PS_PER_SECOND};

use super::check::{worst_observed, Metric};
use super::scenario::{BeInjection, CdtInjection, DelayPolicy, PacketInjection, Scenario};
use super::{engine, SimError};

/// A generated scenario plus notes on why it may fall short of the bound.
#[derive(Debug, Clone)]
pub struct Adversarial {
    pub scenario: Scenario,
    pub diagnostics: Vec<Diagnostic>,
}

fn notice(code: &str, message: String) -> Diagnostic {
    Diagnostic { severity: Severity::Warning, code: code.into(), message }
}

fn ps(seconds: &Rational, what: &str) -> Result<u64, SimError> {
    rational::to_ps_exact(seconds)
        .and_then(|v| v.to_u64())
        .ok_or_else(|| SimError::NonIntegral(what.to_string()))
}

fn secs(t: u64) -> Rational {
    rational::ratio(t as i64, PS_PER_SECOND)
}

fn bits_u64(v: &Rational) -> u64 {
    v.floor().to_integer().to_u64().unwrap_or(0)
}

/// Splits `total` bits of flow `f` into packets of at most `L_f` bits; a tail
/// shorter than `M_f` is dropped.
fn split(f: &FlowSpec, total: &Rational) -> Vec<u64> {
    let l = bits_u64(&f.max_packet);
    let m = bits_u64(&f.min_packet);
    let mut left = bits_u64(total);
    let mut out = Vec::new();
    while left >= l.max(1) {
        out.push(l);
        left -= l;
    }
    if left >= m && left > 0 {
        out.push(left);
    }
    out
}

fn hop_of(f: &FlowSpec, link: &LinkParams) -> usize {
    f.path
        .windows(2)
        .position(|w| w[0] == link.from && w[1] == link.to)
        .expect("flow uses link")
}

fn psi_bits(f: &FlowSpec) -> u64 {
    bits_u64(f.psi())
}

/// The target's own packets preceding its `psi`-sized packet.
fn target_lead(f: &FlowSpec) -> Vec<u64> {
    match f.regulator {
        Regulator::Lrq => Vec::new(),
        Regulator::Lb => split(f, &(&f.burst - f.psi())),
    }
}

/// BE and CDT interference at `link` for a class-`x` burst arriving at `s`
/// carrying `before` bits ahead of the target packet.
fn port_pattern(link: &LinkParams, x: Class, s: u64, before: &Rational, sc: &mut Scenario) -> Result<(), SimError> {
    let c = &link.capacity;
    let le = &link.be_max_packet;
    let le_ps = ps(&(le / c), "BE transmission time")?;
    let s0 = s - le_ps;
    let (r, b) = (&link.cdt.rate, &link.cdt.burst);
    let id = link.id();
    if le_ps > 0 {
        sc.be.push(BeInjection { link: id.clone(), time_ps: s0, bits: bits_u64(le), late: false });
    }
    if !r.is_zero() || !b.is_zero() {
        sc.cdt.push(CdtInjection {
            link: id.clone(),
            time_ps: s0,
            bits: bits_u64(b),
            rate: (!r.is_zero()).then(|| r.clone()),
            late: true,
        });
    }
    let drain = if r.is_zero() { b / c } else { (b + r * le / c) / (c - r) };
    let s1 = s + ps(&drain, "CDT drain time")?;
    let slopes = link.cbs.get(x).ok_or_else(|| SimError::Scenario(format!("no class {x} slopes on {id}")))?;
    let (idle, send) = (&slopes.idle_slope, &slopes.send_slope);
    let s3 = s1 + ps(&(before * (idle - send) / (c * idle)), "credit recovery time")?;
    if le_ps > 0 {
        sc.be.push(BeInjection { link: id.clone(), time_ps: s3, bits: bits_u64(le), late: false });
    }
    let s4 = s3 + le_ps;
    let replay = bits_u64(&(r * secs(s4 - s1)));
    if replay > 0 {
        sc.cdt.push(CdtInjection { link: id, time_ps: s4, bits: replay, rate: Some(r.clone()), late: false });
    }
    Ok(())
}

/// Worst case for `target` at path hop `hop`: the CBFS construction at that
/// link and, when the next node is a switch, a greedy tail that maximizes the
/// target's delay in the regulator there.
pub fn adversarial_scenario(spec: &NetworkSpec, target: &str, hop: usize) -> Result<Adversarial, SimError> {
    let f = spec.flow(target).map_err(|_| SimError::UnknownFlow(target.to_string()))?;
    if hop + 1 >= f.path.len() {
        return Err(SimError::Scenario(format!("flow {target} has no hop {hop}")));
    }
    let link = spec.link(&f.path[hop], &f.path[hop + 1])?;
    let mut diagnostics = preconditions(spec, f, link)?;
    let base = hop_base(spec, f, link, hop, &mut diagnostics)?;
    if hop + 2 >= f.path.len() {
        return Ok(Adversarial { scenario: base.scenario, diagnostics });
    }
    let mut best: Option<(Rational, Scenario)> = None;
    for k in 1..=16 {
        let sc = with_tail(spec, f, link, hop, &base, k)?;
        let trace = engine::run(spec, &sc, None)?;
        let h = worst_observed(spec, &trace, target, hop, Metric::H).unwrap_or_else(|_| Rational::zero());
        if best.as_ref().is_none_or(|(b, _)| &h > b) {
            best = Some((h, sc));
        }
    }
    Ok(Adversarial { scenario: best.expect("at least one tail").1, diagnostics })
}

struct HopBase {
    scenario: Scenario,
    /// Time the class burst arrives.
    s: u64,
    /// Bits each flow injected in the burst.
    sent: Vec<(String, u64)>,
}

fn preconditions(spec: &NetworkSpec, f: &FlowSpec, link: &LinkParams) -> Result<Vec<Diagnostic>, SimError> {
    let mut d = Vec::new();
    let agg = crate::network::link_aggregates(spec, &link.from, &link.to, f.class)?;
    if agg.l_e != agg.l_bar_a || agg.l_e != agg.l_bar {
        d.push(notice(
            "adversarial-be-size",
            format!("{}: the BE maximum is not the largest interfering frame, the construction may stay below the bound", link.id()),
        ));
    }
    if f.class == Class::B {
        d.push(notice("adversarial-class-b", "class B construction is best effort".into()));
    }
    let others = flows_on_link(spec, &link.from, &link.to, f.class)?.len() - 1;
    if f.regulator == Regulator::Lrq && others == 0 {
        d.push(notice("adversarial-lone-lrq", format!("flow {} is alone in its class queue on {}", f.id, link.id())));
    }
    Ok(d)
}

fn hop_base(
    spec: &NetworkSpec,
    f: &FlowSpec,
    link: &LinkParams,
    hop: usize,
    diagnostics: &mut Vec<Diagnostic>,
) -> Result<HopBase, SimError> {
    let mut sc = Scenario::empty();
    sc.delays = DelayPolicy::Max;
    let s = ps(&(&link.be_max_packet / &link.capacity), "BE transmission time")?;
    let mut before = Rational::zero();
    let mut sent = Vec::new();
    for g in flows_on_link(spec, &link.from, &link.to, f.class)? {
        if g.id == f.id {
            continue;
        }
        let q = hop_of(g, link);
        let pk = split(g, &g.burst);
        if hop == 0 && q != 0 {
            diagnostics.push(notice("adversarial-direct", format!("flow {} is injected directly at {}", g.id, link.id())));
        }
        let total: u64 = pk.iter().sum();
        for b in pk {
            sc.packets.push(PacketInjection { flow: g.id.clone(), time_ps: s, bits: b, hop: q });
        }
        before += rational::int(total as i64);
        sent.push((g.id.clone(), total));
    }
    let mut own = target_lead(f);
    before += rational::int(own.iter().sum::<u64>() as i64);
    own.push(psi_bits(f));
    sent.push((f.id.clone(), own.iter().sum()));
    for b in own {
        sc.packets.push(PacketInjection { flow: f.id.clone(), time_ps: s, bits: b, hop });
    }
    port_pattern(link, f.class, s, &before, &mut sc)?;
    Ok(HopBase { scenario: sc, s, sent })
}

/// Earliest time after `s` at which `g` may send `extra` more bits, given it
/// sent `sent` bits at `s`.
fn earliest(g: &FlowSpec, s: u64, sent: u64, extra: u64, last_len: u64) -> u64 {
    let wait = match g.regulator {
        Regulator::Lrq => rational::int(last_len as i64) / &g.rate,
        Regulator::Lb => rational::pos((rational::int((sent + extra) as i64) - &g.burst) / &g.rate),
    };
    s + (wait * rational::int(PS_PER_SECOND)).ceil().to_integer().to_u64().unwrap_or(0)
}

fn with_tail(spec: &NetworkSpec, f: &FlowSpec, link: &LinkParams, hop: usize, base: &HopBase, k: usize) -> Result<Scenario, SimError> {
    let mut sc = base.scenario.clone();
    let l = bits_u64(&f.max_packet);
    let mut sent = base.sent.iter().find(|(id, _)| id == &f.id).map(|e| e.1).unwrap_or(0);
    let mut last = base.s;
    let mut last_len = psi_bits(f);
    for _ in 1..k {
        let t = match f.regulator {
            Regulator::Lrq => earliest(f, last, 0, l, last_len),
            Regulator::Lb => earliest(f, base.s, sent, l, last_len).max(last),
        };
        sc.packets.push(PacketInjection { flow: f.id.clone(), time_ps: t, bits: l, hop });
        sent += l;
        last = t;
        last_len = l;
    }
    for g in flows_on_link(spec, &link.from, &link.to, f.class)? {
        if g.id == f.id {
            continue;
        }
        let lg = bits_u64(&g.max_packet);
        let g_sent = base.sent.iter().find(|(id, _)| id == &g.id).map(|e| e.1).unwrap_or(0);
        let t = earliest(g, base.s, g_sent, lg, lg).max(last);
        sc.packets.push(PacketInjection { flow: g.id.clone(), time_ps: t, bits: lg, hop: hop_of(g, link) });
    }
    Ok(sc)
}

/// Chains single-packet constructions along the whole path of `target`: at
/// every hop the burst is timed to meet the target packet as it arrives.
pub fn adversarial_path_scenario(spec: &NetworkSpec, target: &str) -> Result<Adversarial, SimError> {
    let f = spec.flow(target).map_err(|_| SimError::UnknownFlow(target.to_string()))?;
    let mut diagnostics = Vec::new();
    let mut sc = Scenario::empty();
    sc.delays = DelayPolicy::Max;
    let n_hops = f.path.len() - 1;
    let mut arrival: Option<u64> = None;
    for m in 0..n_hops {
        let link = spec.link(&f.path[m], &f.path[m + 1])?;
        diagnostics.extend(preconditions(spec, f, link)?);
        let le_ps = ps(&(&link.be_max_packet / &link.capacity), "BE transmission time")?;
        let a = arrival.unwrap_or(le_ps);
        if a < le_ps {
            return Err(SimError::Scenario(format!("hop {m} is reached before a BE frame fits")));
        }
        let mut before = Rational::zero();
        for g in flows_on_link(spec, &link.from, &link.to, f.class)? {
            if g.id == f.id {
                continue;
            }
            let q = hop_of(g, link);
            let pk = split(g, &g.burst);
            before += rational::int(pk.iter().sum::<u64>() as i64);
            let lead = free_flow_ps(spec, g, q, pk.first().copied().unwrap_or(0))?;
            if pk.len() == 1 && lead <= a {
                sc.packets.push(PacketInjection { flow: g.id.clone(), time_ps: a - lead, bits: pk[0], hop: 0 });
            } else {
                diagnostics.push(notice("adversarial-direct", format!("flow {} is injected directly at {}", g.id, link.id())));
                for b in pk {
                    sc.packets.push(PacketInjection { flow: g.id.clone(), time_ps: a, bits: b, hop: q });
                }
            }
        }
        if m == 0 {
            sc.packets.push(PacketInjection { flow: f.id.clone(), time_ps: a, bits: psi_bits(f), hop: 0 });
        }
        port_pattern(link, f.class, a, &before, &mut sc)?;
        if m + 1 < n_hops {
            let trace = engine::run(spec, &sc, None)?;
            let rec = trace
                .flow_packets(&f.id)
                .find(|p| p.first_hop == 0)
                .ok_or_else(|| SimError::Scenario("target packet lost".into()))?;
            arrival = rec.at_hop(m).and_then(|h| h.e);
            if arrival.is_none() {
                return Err(SimError::Scenario(format!("target packet did not leave hop {m}")));
            }
        }
    }
    Ok(Adversarial { scenario: sc, diagnostics })
}

/// Uncontended latency of a `bits` packet of `g` from its source to the CBFS
/// of path hop `q`.
fn free_flow_ps(spec: &NetworkSpec, g: &FlowSpec, q: usize, bits: u64) -> Result<u64, SimError> {
    let mut total = 0;
    for w in g.path.windows(2).take(q) {
        let l = spec.link(&w[0], &w[1])?;
        total += ps(&(rational::int(bits as i64) / &l.capacity), "transmission time")?;
        total += (l.t_var[1] + l.t_proc[1]) as u64;
    }
    Ok(total)
}
