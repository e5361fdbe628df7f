//! Scripted inputs of a simulation run.

use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::network::{LinkId, NetworkSpec, Regulator};
use crate::rational::{self, Rational};

use super::SimError;

/// How the variable output delay and the processing delay are realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DelayPolicy {
    #[default]
    Max,
    Min,
    /// Uniform integer picoseconds within the configured range.
    Seeded { seed: u64 },
}

/// A packet of an AVB flow entering the CBFS of hop `hop` (0 is the source
/// link) at `time_ps`. Injections at later hops skip the upstream path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketInjection {
    pub flow: String,
    pub time_ps: u64,
    pub bits: u64,
    #[serde(default)]
    pub hop: usize,
}

/// Control-data traffic entering the CDT queue of `link`. Without `rate` it is
/// a single packet. With `rate` it is fluid: `bits` arrive at once and further
/// data keeps arriving at `rate` until the CDT queue drains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdtInjection {
    pub link: LinkId,
    pub time_ps: u64,
    pub bits: u64,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_rate")]
    pub rate: Option<Rational>,
    /// Processed after everything else at the same instant.
    #[serde(default)]
    pub late: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeInjection {
    pub link: LinkId,
    pub time_ps: u64,
    pub bits: u64,
    #[serde(default)]
    pub late: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Scenario {
    #[serde(default)]
    pub delays: DelayPolicy,
    #[serde(default)]
    pub packets: Vec<PacketInjection>,
    #[serde(default)]
    pub cdt: Vec<CdtInjection>,
    #[serde(default)]
    pub be: Vec<BeInjection>,
    /// Upper limit on simulated packets of all kinds.
    #[serde(default = "default_cap")]
    pub packet_cap: usize,
}

fn default_cap() -> usize {
    1_000_000
}

mod opt_rate {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(r) => rational::quantity::serialize(r, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        #[derive(Deserialize)]
        struct W(#[serde(with = "rational::quantity")] Rational);
        Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
    }
}

/// Duration of `bits` at `rate` in picoseconds, if integral.
pub fn duration_ps(bits: &Rational, rate: &Rational) -> Option<u64> {
    rational::to_ps_exact(&(bits / rate)).and_then(|v| v.to_u64())
}

impl Scenario {
    pub fn empty() -> Self {
        Scenario { packet_cap: default_cap(), ..Default::default() }
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization cannot fail")
    }

    /// Checks references, packet sizes, integral transmission times and the
    /// conformance of every scripted arrival process to its envelope.
    pub fn validate(&self, spec: &NetworkSpec) -> Result<(), SimError> {
        let total = self.packets.len() + self.cdt.len() + self.be.len();
        if total > self.packet_cap {
            return Err(SimError::PacketCap(self.packet_cap));
        }
        for p in &self.packets {
            let f = spec.flow(&p.flow).map_err(|_| SimError::UnknownFlow(p.flow.clone()))?;
            if p.hop + 1 >= f.path.len() {
                return Err(SimError::Scenario(format!("flow {} has no hop {}", f.id, p.hop)));
            }
            let l = Rational::from(num_bigint::BigInt::from(p.bits));
            if l < f.min_packet || l > f.max_packet {
                return Err(SimError::Scenario(format!(
                    "flow {} packet of {} bits outside [{}, {}]",
                    f.id, p.bits, f.min_packet, f.max_packet
                )));
            }
            for w in f.path.windows(2).skip(p.hop) {
                let link = spec.link(&w[0], &w[1])?;
                if duration_ps(&l, &link.capacity).is_none() {
                    return Err(SimError::NonIntegral(format!("{} bits on ({},{})", p.bits, w[0], w[1])));
                }
            }
            if p.hop + 2 < f.path.len() && duration_ps(&l, &f.rate).is_none() {
                return Err(SimError::NonIntegral(format!("{} bits at the rate of flow {}", p.bits, f.id)));
            }
        }
        self.check_flow_conformance(spec)?;
        for c in &self.cdt {
            let link = spec.link(&c.link.from, &c.link.to)?;
            if c.bits == 0 && c.rate.is_none() {
                return Err(SimError::Scenario(format!("empty CDT packet on {}", c.link)));
            }
            if let Some(r) = &c.rate {
                if r.is_zero() || r > &link.cdt.rate {
                    return Err(SimError::Nonconforming(format!("CDT fluid rate on {} exceeds the CDT rate", c.link)));
                }
            } else if duration_ps(&rational::int(c.bits as i64), &link.capacity).is_none() {
                return Err(SimError::NonIntegral(format!("CDT packet of {} bits on {}", c.bits, c.link)));
            }
        }
        self.check_cdt_packets(spec)?;
        for b in &self.be {
            let link = spec.link(&b.link.from, &b.link.to)?;
            let l = rational::int(b.bits as i64);
            if b.bits == 0 || l > link.be_max_packet {
                return Err(SimError::Scenario(format!("BE packet of {} bits on {}", b.bits, b.link)));
            }
            if duration_ps(&l, &link.capacity).is_none() {
                return Err(SimError::NonIntegral(format!("BE packet of {} bits on {}", b.bits, b.link)));
            }
        }
        Ok(())
    }

    /// Source traffic of each flow (per injection hop) must satisfy the flow's
    /// token bucket `r t + b`.
    fn check_flow_conformance(&self, spec: &NetworkSpec) -> Result<(), SimError> {
        let mut groups: std::collections::BTreeMap<(&str, usize), Vec<(u64, u64)>> = Default::default();
        for p in &self.packets {
            groups.entry((p.flow.as_str(), p.hop)).or_default().push((p.time_ps, p.bits));
        }
        for ((flow, hop), mut pkts) in groups {
            let f = spec.flow(flow)?;
            pkts.sort();
            let pts: Vec<(Rational, Rational)> = pkts
                .iter()
                .map(|(t, b)| (rational::from_ps(*t as i64), rational::int(*b as i64)))
                .collect();
            if let Some((s, t)) = envelope_violation(&pts, &f.rate, &f.burst) {
                return Err(SimError::Nonconforming(format!(
                    "flow {flow} at hop {hop}: packets between {s} and {t} s exceed its token bucket"
                )));
            }
            if f.regulator == Regulator::Lrq {
                for w in pts.windows(2) {
                    if &w[1].0 - &w[0].0 < &w[0].1 / &f.rate {
                        return Err(SimError::Nonconforming(format!(
                            "flow {flow} at hop {hop}: packets at {} and {} s are closer than l/r",
                            w[0].0, w[1].0
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_cdt_packets(&self, spec: &NetworkSpec) -> Result<(), SimError> {
        let mut groups: std::collections::BTreeMap<&LinkId, Vec<(u64, u64)>> = Default::default();
        for c in self.cdt.iter().filter(|c| c.rate.is_none()) {
            groups.entry(&c.link).or_default().push((c.time_ps, c.bits));
        }
        for (link, mut pkts) in groups {
            let params = spec.link(&link.from, &link.to)?;
            pkts.sort();
            let pts: Vec<(Rational, Rational)> = pkts
                .iter()
                .map(|(t, b)| (rational::from_ps(*t as i64), rational::int(*b as i64)))
                .collect();
            if envelope_violation(&pts, &params.cdt.rate, &params.cdt.burst).is_some() {
                return Err(SimError::Nonconforming(format!("CDT packets on {link} exceed its token bucket")));
            }
        }
        Ok(())
    }
}

/// Instantaneous arrivals `(time, bits)` sorted by time; returns the first
/// window `[s, t]` whose total exceeds `rate (t - s) + burst`.
pub(crate) fn envelope_violation(
    pts: &[(Rational, Rational)],
    rate: &Rational,
    burst: &Rational,
) -> Option<(Rational, Rational)> {
    for a in 0..pts.len() {
        let mut sum = Rational::zero();
        for b in a..pts.len() {
            sum += &pts[b].1;
            if sum > rate * (&pts[b].0 - &pts[a].0) + burst {
                return Some((pts[a].0.clone(), pts[b].0.clone()));
            }
        }
    }
    None
}
