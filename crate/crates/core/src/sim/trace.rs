//! Simulation output: per-packet timestamps, queue and credit series and a
//! flat event log.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::network::{Class, LinkId};
use crate::rational::{Exact, Rational};

/// Timestamps of one packet at one hop, in picoseconds: arrival at the CBFS
/// (`a`), start of transmission (`q`), reception at the next node (`d`),
/// end of processing (`d_proc`) and release by the regulator (`e`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopLog {
    pub link: LinkId,
    pub a: u64,
    pub q: Option<u64>,
    pub d: Option<u64>,
    pub d_proc: Option<u64>,
    /// Absent on the last hop, where the packet leaves the network.
    pub e: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub flow: String,
    pub seq: usize,
    pub bits: u64,
    /// Index of the first hop the packet traversed.
    pub first_hop: usize,
    pub hops: Vec<HopLog>,
}

impl PacketRecord {
    /// Log of path hop `hop`, if the packet reached it.
    pub fn at_hop(&self, hop: usize) -> Option<&HopLog> {
        hop.checked_sub(self.first_hop).and_then(|k| self.hops.get(k))
    }

    /// Whether the packet reached its destination.
    pub fn delivered(&self, path_len: usize) -> bool {
        self.first_hop + self.hops.len() == path_len - 1 && self.hops.last().is_some_and(|h| h.d.is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrive,
    StartTx,
    EndTx,
    Receive,
    Eligible,
    CreditRecovered,
}

impl EventKind {
    fn as_str(self) -> &'static str {
        match self {
            EventKind::Arrive => "arrive",
            EventKind::StartTx => "start_tx",
            EventKind::EndTx => "end_tx",
            EventKind::Receive => "receive",
            EventKind::Eligible => "eligible",
            EventKind::CreditRecovered => "credit_recovered",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time_ps: u64,
    pub node: String,
    pub queue: String,
    pub kind: EventKind,
    /// Flow id, or `CDT` / `BE` for non-AVB traffic.
    pub flow: String,
    pub seq: usize,
    pub bits: u64,
}

/// Step function of queued bits, one point per change.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BacklogSeries {
    pub max_bits: u64,
    pub max_at_ps: u64,
    pub points: Vec<(u64, u64)>,
}

impl BacklogSeries {
    pub(crate) fn record(&mut self, t: u64, bits: u64) {
        if self.points.last().map(|p| p.1) == Some(bits) {
            return;
        }
        self.points.push((t, bits));
        if bits > self.max_bits {
            self.max_bits = bits;
            self.max_at_ps = t;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreditSeries {
    pub ceiling: Option<Exact>,
    pub max: Option<Exact>,
    pub points: Vec<(u64, Exact)>,
}

impl CreditSeries {
    pub(crate) fn record(&mut self, t: u64, v: &Rational) {
        if self.points.last().map(|p| &p.1 .0) == Some(v) {
            return;
        }
        if self.max.as_ref().is_none_or(|m| v > &m.0) {
            self.max = Some(Exact(v.clone()));
        }
        self.points.push((t, Exact(v.clone())));
    }
}

/// Realized CDT arrivals on one link: `bits` at `start`, then `rate` until `end`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdtArrival {
    pub start: u64,
    pub bits: u64,
    pub rate: Option<Exact>,
    pub end: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTrace {
    pub spec_fingerprint: String,
    pub horizon_ps: Option<u64>,
    /// False when the horizon cut the run short.
    pub complete: bool,
    pub packets: Vec<PacketRecord>,
    pub backlog: BTreeMap<String, BacklogSeries>,
    pub credit: BTreeMap<String, CreditSeries>,
    pub cdt_arrivals: BTreeMap<String, Vec<CdtArrival>>,
    pub events: Vec<TraceEvent>,
}

pub fn cbfs_queue_name(link: &LinkId, class: Class) -> String {
    format!("cbfs{link}{class}")
}

/// Regulator at `link.to` for output `(link.to, next)`, fed by `link`.
pub fn ir_queue_name(link: &LinkId, next: &str, class: Class) -> String {
    format!("ir{link}->{next}{class}")
}

pub fn credit_name(link: &LinkId, class: Class) -> String {
    format!("{link}{class}")
}

impl SimTrace {
    pub fn flow_packets<'a>(&'a self, flow: &'a str) -> impl Iterator<Item = &'a PacketRecord> + 'a {
        self.packets.iter().filter(move |p| p.flow == flow)
    }

    pub fn max_backlog(&self, queue: &str) -> Option<u64> {
        self.backlog.get(queue).map(|s| s.max_bits)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serialization cannot fail")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// One event per line: `time_ps node queue kind flow seq bits`.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {}",
                e.time_ps,
                e.node,
                e.queue,
                e.kind.as_str(),
                e.flow,
                e.seq,
                e.bits
            );
        }
        out
    }

    pub fn backlog_csv(&self) -> String {
        let mut out = String::from("queue,time_ps,bits\n");
        for (q, s) in &self.backlog {
            for (t, b) in &s.points {
                let _ = writeln!(out, "{q},{t},{b}");
            }
        }
        out
    }

    pub fn credit_csv(&self) -> String {
        let mut out = String::from("port,time_ps,credit_bits\n");
        for (q, s) in &self.credit {
            for (t, v) in &s.points {
                let _ = writeln!(out, "{q},{t},{v}");
            }
        }
        out
    }

    pub fn packets_csv(&self) -> String {
        let mut out = String::from("flow,seq,bits,link,a_ps,q_ps,d_ps,d_proc_ps,e_ps\n");
        let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        for p in &self.packets {
            for h in &p.hops {
                let _ = writeln!(
                    out,
                    "{},{},{},{}->{},{},{},{},{},{}",
                    p.flow,
                    p.seq,
                    p.bits,
                    h.link.from,
                    h.link.to,
                    h.a,
                    opt(h.q),
                    opt(h.d),
                    opt(h.d_proc),
                    opt(h.e)
                );
            }
        }
        out
    }
}
