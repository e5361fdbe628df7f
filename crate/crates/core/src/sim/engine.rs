//! Discrete-event engine.
//!
//! Events at the same instant are handled in category order: frame
//! completions and receptions, regulator releases, arrivals, then a selection
//! pass on every touched port; credit-recovery timers with a second selection
//! pass; late arrivals with a final pass. Ties inside a category follow
//! insertion order.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds;
use crate::network::{has_errors, validate, Class, FlowSpec, LinkId, LinkParams, NetworkSpec, Regulator, Severity};
use crate::rational::{self, Exact, Rational, PS_PER_SECOND};

use super::scenario::{DelayPolicy, Scenario};
use super::trace::{
    cbfs_queue_name, credit_name, ir_queue_name, BacklogSeries, CdtArrival, CreditSeries, EventKind, HopLog,
    PacketRecord, SimTrace, TraceEvent,
};
use super::SimError;

const CAT_COMPLETE: u8 = 0;
const CAT_ELIGIBLE: u8 = 1;
const CAT_ARRIVAL: u8 = 2;
const CAT_RECOVERED: u8 = 3;
const CAT_LATE: u8 = 4;

fn phase(cat: u8) -> u8 {
    match cat {
        0..=2 => 0,
        3 => 1,
        _ => 2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    time: u64,
    cat: u8,
    seq: u64,
}

#[derive(Debug, Clone, Copy)]
enum Ev {
    InjectPacket(usize),
    InjectCdt(usize),
    InjectBe(usize),
    TxEnd(usize),
    Receive(usize),
    Eligible(usize),
    Recovered { port: usize, class: usize, gen: u64 },
}

fn ci(x: Class) -> usize {
    match x {
        Class::A => 0,
        Class::B => 1,
    }
}

const CLASSES: [Class; 2] = [Class::A, Class::B];

fn bits(b: u64) -> Rational {
    Rational::from_integer(b.into())
}

fn seconds(ps: u64) -> Rational {
    Rational::new(ps.into(), PS_PER_SECOND.into())
}

/// Smallest whole number of picoseconds not shorter than `s` seconds.
fn ceil_ps(s: &Rational) -> u64 {
    (s * rational::int(PS_PER_SECOND)).ceil().to_integer().to_u64().expect("duration fits in u64")
}

fn exact_ps(s: &Rational, what: impl FnOnce() -> String) -> Result<u64, SimError> {
    rational::to_ps_exact(s)
        .and_then(|v| v.to_u64())
        .ok_or_else(|| SimError::NonIntegral(what()))
}

struct CdtJob {
    arrival: u64,
    bits: u64,
    rate: Option<Rational>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum TxKind {
    Cdt,
    Avb(usize, usize),
    Be,
}

struct Port {
    link: LinkId,
    capacity: Rational,
    slopes: [Option<(Rational, Rational)>; 2],
    credit: [Rational; 2],
    last: u64,
    pending: [bool; 2],
    gen: [u64; 2],
    avb: [VecDeque<usize>; 2],
    waiting_bits: [u64; 2],
    cdt: VecDeque<CdtJob>,
    be: VecDeque<(u64, usize)>,
    tx: Option<TxKind>,
}

struct Reg {
    input: LinkId,
    next: String,
    class: Class,
    fifo: VecDeque<usize>,
    bits: u64,
}

/// Per (flow, hop) regulator state.
enum FlowReg {
    Lrq { next: u64 },
    Lb { tokens: Rational, last: u64 },
}

struct Live {
    flow: usize,
    /// Current hop index on the flow path.
    hop: usize,
}

struct Engine<'a> {
    spec: &'a NetworkSpec,
    scenario: &'a Scenario,
    events: BTreeMap<Key, Ev>,
    seq: u64,
    ports: Vec<Port>,
    port_index: BTreeMap<LinkId, usize>,
    regs: Vec<Reg>,
    reg_index: BTreeMap<(LinkId, String, Class), usize>,
    flow_regs: BTreeMap<(usize, usize), FlowReg>,
    live: Vec<Live>,
    flow_seq: Vec<usize>,
    dirty: BTreeSet<usize>,
    rng: Option<ChaCha8Rng>,
    trace: SimTrace,
}

/// Runs `scenario` on `spec` until the event queue empties or simulated time
/// passes `horizon_ps`.
pub fn run(spec: &NetworkSpec, scenario: &Scenario, horizon_ps: Option<u64>) -> Result<SimTrace, SimError> {
    let diags = validate(spec);
    if has_errors(&diags) {
        let msg: Vec<String> = diags
            .iter()
            .filter(|d| d.severity == Severity::Error)
            .map(|d| d.to_string())
            .collect();
        return Err(SimError::InvalidSpec(msg.join("; ")));
    }
    scenario.validate(spec)?;
    let mut eng = Engine::new(spec, scenario);
    eng.schedule_injections();
    eng.main_loop(horizon_ps)?;
    eng.trace.horizon_ps = horizon_ps;
    Ok(eng.trace)
}

impl<'a> Engine<'a> {
    fn new(spec: &'a NetworkSpec, scenario: &'a Scenario) -> Self {
        let mut ports = Vec::new();
        let mut port_index = BTreeMap::new();
        let mut credit = BTreeMap::new();
        for link in &spec.links {
            let ceilings = bounds::cbs_analysis(spec, &link.from, &link.to).ok();
            for x in CLASSES {
                if link.cbs.get(x).is_some() {
                    let ceiling = ceilings.as_ref().and_then(|c| match x {
                        Class::A => c.v_a_max.clone(),
                        Class::B => c.v_b_max.clone(),
                    });
                    let mut s = CreditSeries { ceiling: ceiling.map(Exact), ..Default::default() };
                    s.record(0, &Rational::zero());
                    credit.insert(credit_name(&link.id(), x), s);
                }
            }
            port_index.insert(link.id(), ports.len());
            ports.push(Port::new(link));
        }
        let rng = match scenario.delays {
            DelayPolicy::Seeded { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        Engine {
            spec,
            scenario,
            events: BTreeMap::new(),
            seq: 0,
            ports,
            port_index,
            regs: Vec::new(),
            reg_index: BTreeMap::new(),
            flow_regs: BTreeMap::new(),
            live: Vec::new(),
            flow_seq: vec![0; spec.flows.len()],
            dirty: BTreeSet::new(),
            rng,
            trace: SimTrace {
                spec_fingerprint: spec.fingerprint(),
                horizon_ps: None,
                complete: true,
                packets: Vec::new(),
                backlog: BTreeMap::new(),
                credit,
                cdt_arrivals: BTreeMap::new(),
                events: Vec::new(),
            },
        }
    }

    fn push(&mut self, time: u64, cat: u8, ev: Ev) {
        self.seq += 1;
        self.events.insert(Key { time, cat, seq: self.seq }, ev);
    }

    fn schedule_injections(&mut self) {
        for (i, p) in self.scenario.packets.iter().enumerate() {
            self.push(p.time_ps, CAT_ARRIVAL, Ev::InjectPacket(i));
        }
        for (i, c) in self.scenario.cdt.iter().enumerate() {
            self.push(c.time_ps, if c.late { CAT_LATE } else { CAT_ARRIVAL }, Ev::InjectCdt(i));
        }
        for (i, b) in self.scenario.be.iter().enumerate() {
            self.push(b.time_ps, if b.late { CAT_LATE } else { CAT_ARRIVAL }, Ev::InjectBe(i));
        }
    }

    fn main_loop(&mut self, horizon: Option<u64>) -> Result<(), SimError> {
        let mut cur: Option<(u64, u8)> = None;
        loop {
            let next = self.events.first_key_value().map(|(k, _)| (k.time, phase(k.cat)));
            if let Some(c) = cur {
                if next != Some(c) {
                    self.select_dirty(c.0)?;
                    cur = None;
                    continue;
                }
            }
            let Some((time, ph)) = next else { break };
            if horizon.is_some_and(|h| time > h) {
                self.trace.complete = false;
                break;
            }
            cur = Some((time, ph));
            let (_, ev) = self.events.pop_first().expect("peeked");
            self.handle(time, ev)?;
        }
        Ok(())
    }

    fn handle(&mut self, t: u64, ev: Ev) -> Result<(), SimError> {
        match ev {
            Ev::InjectPacket(i) => self.inject_packet(t, i),
            Ev::InjectCdt(i) => {
                let c = &self.scenario.cdt[i];
                let p = self.port_index[&c.link];
                self.touch(p, t);
                self.ports[p].cdt.push_back(CdtJob { arrival: t, bits: c.bits, rate: c.rate.clone() });
                self.log(t, p, "cdt", EventKind::Arrive, "CDT", i, c.bits);
                self.dirty.insert(p);
                Ok(())
            }
            Ev::InjectBe(i) => {
                let b = &self.scenario.be[i];
                let p = self.port_index[&b.link];
                self.touch(p, t);
                self.ports[p].be.push_back((b.bits, i));
                self.log(t, p, "be", EventKind::Arrive, "BE", i, b.bits);
                self.dirty.insert(p);
                Ok(())
            }
            Ev::TxEnd(p) => self.tx_end(t, p),
            Ev::Receive(pkt) => self.receive(t, pkt),
            Ev::Eligible(r) => self.try_release(t, r),
            Ev::Recovered { port, class, gen } => {
                if self.ports[port].gen[class] == gen && self.ports[port].pending[class] {
                    self.touch(port, t);
                    self.ports[port].pending[class] = false;
                    let x = CLASSES[class];
                    let name = cbfs_queue_name(&self.ports[port].link, x);
                    self.log(t, port, &name, EventKind::CreditRecovered, "", 0, 0);
                    self.dirty.insert(port);
                }
                Ok(())
            }
        }
    }

    fn log(&mut self, t: u64, port: usize, queue: &str, kind: EventKind, flow: &str, seq: usize, b: u64) {
        let node = self.ports[port].link.from.clone();
        let queue = if queue == "cdt" || queue == "be" {
            format!("{queue}{}", self.ports[port].link)
        } else {
            queue.to_string()
        };
        self.trace.events.push(TraceEvent { time_ps: t, node, queue, kind, flow: flow.to_string(), seq, bits: b });
    }

    fn record_cbfs(&mut self, t: u64, p: usize, x: Class) {
        let name = cbfs_queue_name(&self.ports[p].link, x);
        let b = self.ports[p].waiting_bits[ci(x)];
        self.trace.backlog.entry(name).or_default().record(t, b);
    }

    fn record_credit(&mut self, t: u64, p: usize) {
        for x in CLASSES {
            if self.ports[p].slopes[ci(x)].is_some() {
                let name = credit_name(&self.ports[p].link, x);
                let v = self.ports[p].credit[ci(x)].clone();
                self.trace.credit.entry(name).or_default().record(t, &v);
            }
        }
    }

    /// Brings the credits of port `p` forward to time `t`.
    fn touch(&mut self, p: usize, t: u64) {
        self.ports[p].integrate(t);
        self.record_credit(t, p);
    }

    fn flow(&self, pkt: usize) -> &'a FlowSpec {
        &self.spec.flows[self.live[pkt].flow]
    }

    fn enqueue_avb(&mut self, t: u64, pkt: usize) {
        let f = self.flow(pkt);
        let hop = self.live[pkt].hop;
        let link = LinkId::new(f.path[hop].clone(), f.path[hop + 1].clone());
        let p = self.port_index[&link];
        self.touch(p, t);
        let rec = &mut self.trace.packets[pkt];
        rec.hops.push(HopLog { link, a: t, q: None, d: None, d_proc: None, e: None });
        let b = rec.bits;
        let seq = rec.seq;
        let x = ci(f.class);
        self.ports[p].avb[x].push_back(pkt);
        self.ports[p].waiting_bits[x] += b;
        self.record_cbfs(t, p, f.class);
        let name = cbfs_queue_name(&self.ports[p].link, f.class);
        self.log(t, p, &name, EventKind::Arrive, &f.id, seq, b);
        self.dirty.insert(p);
    }

    fn inject_packet(&mut self, t: u64, i: usize) -> Result<(), SimError> {
        let inj = &self.scenario.packets[i];
        let fi = self.spec.flow_index(&inj.flow).ok_or_else(|| SimError::UnknownFlow(inj.flow.clone()))?;
        if self.live.len() >= self.scenario.packet_cap {
            return Err(SimError::PacketCap(self.scenario.packet_cap));
        }
        let seq = self.flow_seq[fi];
        self.flow_seq[fi] += 1;
        self.trace.packets.push(PacketRecord {
            flow: inj.flow.clone(),
            seq,
            bits: inj.bits,
            first_hop: inj.hop,
            hops: Vec::new(),
        });
        self.live.push(Live { flow: fi, hop: inj.hop });
        self.enqueue_avb(t, self.live.len() - 1);
        Ok(())
    }

    fn select_dirty(&mut self, t: u64) -> Result<(), SimError> {
        let dirty = std::mem::take(&mut self.dirty);
        for p in dirty {
            self.select(t, p)?;
        }
        Ok(())
    }

    fn select(&mut self, t: u64, p: usize) -> Result<(), SimError> {
        self.touch(p, t);
        if self.ports[p].tx.is_some() {
            return Ok(());
        }
        if let Some(job) = self.ports[p].cdt.pop_front() {
            return self.start_cdt(t, p, job);
        }
        for x in CLASSES {
            let port = &self.ports[p];
            let k = ci(x);
            if !port.avb[k].is_empty() && !port.pending[k] && !port.credit[k].is_negative() {
                let pkt = self.ports[p].avb[k].pop_front().expect("nonempty");
                return self.start_avb(t, p, x, pkt);
            }
        }
        if let Some((b, i)) = self.ports[p].be.pop_front() {
            let dur = exact_ps(&(bits(b) / &self.ports[p].capacity), || format!("BE packet of {b} bits"))?;
            self.begin(t, p, TxKind::Be, dur);
            self.log(t, p, "be", EventKind::StartTx, "BE", i, b);
            return Ok(());
        }
        // Idle with a backlogged class waiting for credit.
        for x in CLASSES {
            let k = ci(x);
            let port = &self.ports[p];
            if !port.avb[k].is_empty() && !port.pending[k] && port.credit[k].is_negative() {
                let idle = &port.slopes[k].as_ref().expect("validated slopes").0;
                let at = t + ceil_ps(&(-&port.credit[k] / idle));
                let gen = port.gen[k];
                self.ports[p].pending[k] = true;
                self.push(at, CAT_RECOVERED, Ev::Recovered { port: p, class: k, gen });
            }
        }
        Ok(())
    }

    fn begin(&mut self, t: u64, p: usize, kind: TxKind, dur: u64) {
        let port = &mut self.ports[p];
        port.tx = Some(kind);
        for k in 0..2 {
            if port.pending[k] {
                port.pending[k] = false;
                port.gen[k] += 1;
            }
        }
        self.push(t + dur, CAT_COMPLETE, Ev::TxEnd(p));
    }

    fn start_cdt(&mut self, t: u64, p: usize, job: CdtJob) -> Result<(), SimError> {
        let c = self.ports[p].capacity.clone();
        let link = self.ports[p].link.clone();
        let (dur, rate) = match &job.rate {
            None => (exact_ps(&(bits(job.bits) / &c), || format!("CDT packet on {link}"))?, None),
            Some(r) => {
                let backlog = bits(job.bits) + r * seconds(t - job.arrival);
                let d = exact_ps(&(backlog / (&c - r)), || format!("CDT fluid drain on {link} at {t} ps"))?;
                (d, Some(Exact(r.clone())))
            }
        };
        let end = if rate.is_some() { t + dur } else { job.arrival };
        self.trace
            .cdt_arrivals
            .entry(link.to_string())
            .or_default()
            .push(CdtArrival { start: job.arrival, bits: job.bits, rate, end });
        self.begin(t, p, TxKind::Cdt, dur);
        self.log(t, p, "cdt", EventKind::StartTx, "CDT", 0, job.bits);
        Ok(())
    }

    fn start_avb(&mut self, t: u64, p: usize, x: Class, pkt: usize) -> Result<(), SimError> {
        let b = self.trace.packets[pkt].bits;
        let dur = exact_ps(&(bits(b) / &self.ports[p].capacity), || format!("{b} bits"))?;
        self.ports[p].waiting_bits[ci(x)] -= b;
        self.record_cbfs(t, p, x);
        self.trace.packets[pkt].hops.last_mut().expect("hop log").q = Some(t);
        self.begin(t, p, TxKind::Avb(ci(x), pkt), dur);
        let name = cbfs_queue_name(&self.ports[p].link, x);
        let (flow, seq) = (self.flow(pkt).id.clone(), self.trace.packets[pkt].seq);
        self.log(t, p, &name, EventKind::StartTx, &flow, seq, b);
        Ok(())
    }

    fn sample(&mut self, range: [i64; 2]) -> u64 {
        let v = match (self.scenario.delays, &mut self.rng) {
            (DelayPolicy::Min, _) => range[0],
            (DelayPolicy::Seeded { .. }, Some(rng)) => rng.gen_range(range[0]..=range[1]),
            _ => range[1],
        };
        v as u64
    }

    fn tx_end(&mut self, t: u64, p: usize) -> Result<(), SimError> {
        self.touch(p, t);
        let kind = self.ports[p].tx.take().expect("transmission in progress");
        match kind {
            TxKind::Cdt => self.log(t, p, "cdt", EventKind::EndTx, "CDT", 0, 0),
            TxKind::Be => self.log(t, p, "be", EventKind::EndTx, "BE", 0, 0),
            TxKind::Avb(k, pkt) => {
                let link: &LinkParams = self.spec.link(&self.ports[p].link.from, &self.ports[p].link.to)?;
                let tvar = self.sample(link.t_var);
                let tproc = self.sample(link.t_proc);
                let h = self.trace.packets[pkt].hops.last_mut().expect("hop log");
                h.d = Some(t + tvar);
                h.d_proc = Some(t + tvar + tproc);
                self.push(t + tvar + tproc, CAT_COMPLETE, Ev::Receive(pkt));
                let port = &mut self.ports[p];
                if port.avb[k].is_empty() && port.credit[k].is_positive() {
                    port.credit[k] = Rational::zero();
                    self.record_credit(t, p);
                }
                let name = cbfs_queue_name(&self.ports[p].link, CLASSES[k]);
                let (flow, seq, b) = (self.flow(pkt).id.clone(), self.trace.packets[pkt].seq, self.trace.packets[pkt].bits);
                self.log(t, p, &name, EventKind::EndTx, &flow, seq, b);
            }
        }
        self.dirty.insert(p);
        Ok(())
    }

    fn receive(&mut self, t: u64, pkt: usize) -> Result<(), SimError> {
        let f = self.flow(pkt);
        let hop = self.live[pkt].hop;
        if hop + 2 >= f.path.len() {
            return Ok(());
        }
        let input = LinkId::new(f.path[hop].clone(), f.path[hop + 1].clone());
        let next = f.path[hop + 2].clone();
        let key = (input.clone(), next.clone(), f.class);
        let r = match self.reg_index.get(&key) {
            Some(&r) => r,
            None => {
                self.regs.push(Reg { input, next, class: f.class, fifo: VecDeque::new(), bits: 0 });
                self.reg_index.insert(key, self.regs.len() - 1);
                self.regs.len() - 1
            }
        };
        let b = self.trace.packets[pkt].bits;
        let reg = &mut self.regs[r];
        reg.fifo.push_back(pkt);
        reg.bits += b;
        let was_empty = reg.fifo.len() == 1;
        self.record_reg(t, r);
        self.reg_event(t, r, EventKind::Receive, pkt);
        if was_empty {
            self.try_release(t, r)?;
        }
        Ok(())
    }

    fn record_reg(&mut self, t: u64, r: usize) {
        let reg = &self.regs[r];
        let name = ir_queue_name(&reg.input, &reg.next, reg.class);
        let b = reg.bits;
        self.trace.backlog.entry(name).or_insert_with(BacklogSeries::default).record(t, b);
    }

    fn reg_event(&mut self, t: u64, r: usize, kind: EventKind, pkt: usize) {
        let reg = &self.regs[r];
        let rec = &self.trace.packets[pkt];
        self.trace.events.push(TraceEvent {
            time_ps: t,
            node: reg.input.to.clone(),
            queue: ir_queue_name(&reg.input, &reg.next, reg.class),
            kind,
            flow: rec.flow.clone(),
            seq: rec.seq,
            bits: rec.bits,
        });
    }

    /// Releases head-of-line packets of regulator `r` that are eligible at
    /// `t`, then arms a timer for the next head.
    fn try_release(&mut self, t: u64, r: usize) -> Result<(), SimError> {
        while let Some(&pkt) = self.regs[r].fifo.front() {
            let fi = self.live[pkt].flow;
            let hop = self.live[pkt].hop;
            let f = &self.spec.flows[fi];
            let l = bits(self.trace.packets[pkt].bits);
            let state = self.flow_regs.entry((fi, hop)).or_insert_with(|| match f.regulator {
                Regulator::Lrq => FlowReg::Lrq { next: 0 },
                Regulator::Lb => FlowReg::Lb { tokens: f.burst.clone(), last: 0 },
            });
            let eligible = match state {
                FlowReg::Lrq { next } => (*next).max(t),
                FlowReg::Lb { tokens, last } => {
                    let now = rational::min(f.burst.clone(), &*tokens + &f.rate * seconds(t - *last));
                    if now >= l {
                        t
                    } else {
                        t + ceil_ps(&((&l - now) / &f.rate))
                    }
                }
            };
            if eligible > t {
                self.push(eligible, CAT_ELIGIBLE, Ev::Eligible(r));
                return Ok(());
            }
            match state {
                FlowReg::Lrq { next } => *next = t + ceil_ps(&(&l / &f.rate)),
                FlowReg::Lb { tokens, last } => {
                    let now = rational::min(f.burst.clone(), &*tokens + &f.rate * seconds(t - *last));
                    *tokens = now - &l;
                    *last = t;
                }
            }
            let reg = &mut self.regs[r];
            reg.fifo.pop_front();
            reg.bits -= self.trace.packets[pkt].bits;
            self.record_reg(t, r);
            self.reg_event(t, r, EventKind::Eligible, pkt);
            self.trace.packets[pkt].hops.last_mut().expect("hop log").e = Some(t);
            self.live[pkt].hop += 1;
            self.enqueue_avb(t, pkt);
        }
        Ok(())
    }
}

impl Port {
    fn new(link: &LinkParams) -> Self {
        let slopes = [Class::A, Class::B].map(|x| link.cbs.get(x).map(|s| (s.idle_slope.clone(), s.send_slope.clone())));
        Port {
            link: link.id(),
            capacity: link.capacity.clone(),
            slopes,
            credit: [Rational::zero(), Rational::zero()],
            last: 0,
            pending: [false; 2],
            gen: [0; 2],
            avb: [VecDeque::new(), VecDeque::new()],
            waiting_bits: [0; 2],
            cdt: VecDeque::new(),
            be: VecDeque::new(),
            tx: None,
        }
    }

    fn integrate(&mut self, t: u64) {
        if t <= self.last {
            return;
        }
        let dt = seconds(t - self.last);
        self.last = t;
        for k in 0..2 {
            let Some((idle, send)) = &self.slopes[k] else { continue };
            match self.tx {
                Some(TxKind::Cdt) => {}
                Some(TxKind::Avb(x, _)) if x == k => self.credit[k] += send * &dt,
                _ => {
                    if !self.avb[k].is_empty() {
                        self.credit[k] += idle * &dt;
                    } else if self.credit[k].is_negative() {
                        let v = &self.credit[k] + idle * &dt;
                        self.credit[k] = rational::min(v, Rational::zero());
                    }
                }
            }
        }
    }
}
