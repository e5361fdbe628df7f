//! Declarative network model: nodes, directed links with their shaping
//! parameters, and the flow set, plus the per-link queries every bound
//! formula consumes.
//!
//! Specs are loaded from JSON. All quantities are plain integers (or
//! `"num/den"` strings) in bits, bits/second and picoseconds; the document
//! must carry a `units` header stating exactly that.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::curve::TokenBucket;
use crate::rational::{self, Rational};

pub const UNIT_DATA: &str = "bits";
pub const UNIT_RATE: &str = "bits/s";
pub const UNIT_TIME: &str = "ps";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed network spec: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown link ({0}, {1})")]
    UnknownLink(String, String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("unknown flow {0}")]
    UnknownFlow(String),
    #[error("spec is invalid: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Class {
    A,
    B,
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Class::A => "A",
            Class::B => "B",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regulator {
    #[serde(rename = "LRQ")]
    Lrq,
    #[serde(rename = "LB")]
    Lb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Host,
    Switch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub role: Role,
}

/// Directed link `(from, to)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId {
    pub from: String,
    pub to: String,
}

impl LinkId {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        LinkId { from: from.into(), to: to.into() }
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.from, self.to)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CbsSlopes {
    #[serde(with = "rational::quantity")]
    pub idle_slope: Rational,
    #[serde(with = "rational::quantity")]
    pub send_slope: Rational,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CbsConfig {
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<CbsSlopes>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<CbsSlopes>,
}

impl CbsConfig {
    pub fn get(&self, class: Class) -> Option<&CbsSlopes> {
        match class {
            Class::A => self.a.as_ref(),
            Class::B => self.b.as_ref(),
        }
    }
}

/// Parameters of the output port driving link `(from, to)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinkParams {
    pub from: String,
    pub to: String,
    #[serde(with = "rational::quantity")]
    pub capacity: Rational,
    /// `[min, max]` processing delay at the receiving node, picoseconds.
    pub t_proc: [i64; 2],
    /// `[min, max]` variable output delay, picoseconds.
    pub t_var: [i64; 2],
    #[serde(with = "rational::quantity")]
    pub be_max_packet: Rational,
    pub cdt: TokenBucket,
    pub cbs: CbsConfig,
}

impl LinkParams {
    pub fn id(&self) -> LinkId {
        LinkId::new(self.from.clone(), self.to.clone())
    }

    pub fn t_proc_min(&self) -> Rational {
        rational::from_ps(self.t_proc[0])
    }

    pub fn t_proc_max(&self) -> Rational {
        rational::from_ps(self.t_proc[1])
    }

    pub fn t_var_min(&self) -> Rational {
        rational::from_ps(self.t_var[0])
    }

    pub fn t_var_max(&self) -> Rational {
        rational::from_ps(self.t_var[1])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub id: String,
    pub class: Class,
    pub path: Vec<String>,
    pub regulator: Regulator,
    #[serde(with = "rational::quantity")]
    pub rate: Rational,
    #[serde(with = "rational::quantity")]
    pub burst: Rational,
    #[serde(with = "rational::quantity")]
    pub max_packet: Rational,
    #[serde(with = "rational::quantity")]
    pub min_packet: Rational,
}

impl FlowSpec {
    pub fn hops(&self) -> impl Iterator<Item = LinkId> + '_ {
        self.path.windows(2).map(|w| LinkId::new(w[0].clone(), w[1].clone()))
    }

    pub fn source(&self) -> &str {
        &self.path[0]
    }

    pub fn destination(&self) -> &str {
        &self.path[self.path.len() - 1]
    }

    pub fn uses_link(&self, i: &str, j: &str) -> bool {
        self.path.windows(2).any(|w| w[0] == i && w[1] == j)
    }

    /// Node following `(i, j)` on the path, if the flow continues past `j`.
    pub fn next_after(&self, i: &str, j: &str) -> Option<&str> {
        self.path
            .windows(3)
            .find(|w| w[0] == i && w[1] == j)
            .map(|w| w[2].as_str())
    }

    pub fn bucket(&self) -> TokenBucket {
        TokenBucket { rate: self.rate.clone(), burst: self.burst.clone() }
    }

    /// Packet length used by the per-flow CBFS bound: the largest packet for
    /// LRQ, the smallest for LB.
    pub fn psi(&self) -> &Rational {
        match self.regulator {
            Regulator::Lrq => &self.max_packet,
            Regulator::Lb => &self.min_packet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Notice,
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    fn new(severity: Severity, code: &str, message: String) -> Self {
        Diagnostic { severity, code: code.to_string(), message }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Notice => "notice",
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}[{}]: {}", self.code, self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Units {
    pub data: String,
    pub rate: String,
    pub time: String,
}

impl Default for Units {
    fn default() -> Self {
        Units { data: UNIT_DATA.into(), rate: UNIT_RATE.into(), time: UNIT_TIME.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NetworkSpec {
    pub units: Units,
    pub nodes: Vec<Node>,
    pub links: Vec<LinkParams>,
    pub flows: Vec<FlowSpec>,
    #[serde(skip)]
    link_index: BTreeMap<LinkId, usize>,
}

/// Aggregates over the flows of one class on one link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkAggregates {
    pub b_tot: Rational,
    pub r_tot: Rational,
    /// Largest packet of the queried class on the link.
    pub l_class: Rational,
    /// `max(L^B, L^E)`.
    pub l_bar_a: Rational,
    /// `max(L^A, L^B, L^E)`.
    pub l_bar: Rational,
    pub l_a: Rational,
    pub l_b: Rational,
    pub l_e: Rational,
}

// ---- raw file schema -------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUnits {
    data: String,
    rate: String,
    time: String,
}

#[derive(Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct RawLink {
    from: Option<String>,
    to: Option<String>,
    #[serde(default, deserialize_with = "opt_quantity")]
    capacity: Option<Rational>,
    t_proc: Option<[i64; 2]>,
    t_var: Option<[i64; 2]>,
    #[serde(default, deserialize_with = "opt_quantity")]
    be_max_packet: Option<Rational>,
    cdt: Option<TokenBucket>,
    cbs: Option<CbsConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFlow {
    id: String,
    class: Class,
    path: Vec<String>,
    regulator: Regulator,
    #[serde(with = "rational::quantity")]
    rate: Rational,
    #[serde(default, deserialize_with = "opt_quantity")]
    burst: Option<Rational>,
    #[serde(with = "rational::quantity")]
    max_packet: Rational,
    #[serde(default, deserialize_with = "opt_quantity")]
    min_packet: Option<Rational>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    units: RawUnits,
    nodes: Vec<Node>,
    #[serde(default)]
    link_defaults: Option<RawLink>,
    links: Vec<RawLink>,
    flows: Vec<RawFlow>,
    #[serde(default, rename = "description")]
    _description: Option<String>,
}

fn opt_quantity<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
    #[derive(Deserialize)]
    struct W(#[serde(with = "rational::quantity")] Rational);
    Ok(Some(W::deserialize(d)?.0))
}

/// A spec together with the notices produced while normalizing it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub spec: NetworkSpec,
    pub diagnostics: Vec<Diagnostic>,
}

impl NetworkSpec {
    pub fn new(nodes: Vec<Node>, links: Vec<LinkParams>, flows: Vec<FlowSpec>) -> Self {
        let link_index = links.iter().enumerate().map(|(i, l)| (l.id(), i)).collect();
        NetworkSpec { units: Units::default(), nodes, links, flows, link_index }
    }

    /// Parses a JSON spec. Fails on malformed documents and on missing link
    /// fields; semantic checks are left to [`validate`].
    pub fn from_json(text: &str) -> Result<Loaded, ModelError> {
        let raw: RawSpec = serde_json::from_str(text)?;
        let mut diagnostics = Vec::new();
        if raw.units.data != UNIT_DATA || raw.units.rate != UNIT_RATE || raw.units.time != UNIT_TIME {
            return Err(ModelError::Invalid(format!(
                "units header must be {{\"data\": \"{UNIT_DATA}\", \"rate\": \"{UNIT_RATE}\", \"time\": \"{UNIT_TIME}\"}}"
            )));
        }
        let defaults = raw.link_defaults.unwrap_or_default();
        let mut links = Vec::with_capacity(raw.links.len());
        for l in raw.links {
            let from = l.from.ok_or_else(|| ModelError::Invalid("link without \"from\"".into()))?;
            let to = l.to.ok_or_else(|| ModelError::Invalid(format!("link from {from} without \"to\"")))?;
            let missing = |field: &str| ModelError::Invalid(format!("link ({from},{to}) has no {field} and no default"));
            links.push(LinkParams {
                capacity: l.capacity.or_else(|| defaults.capacity.clone()).ok_or_else(|| missing("capacity"))?,
                t_proc: l.t_proc.or(defaults.t_proc).unwrap_or([0, 0]),
                t_var: l.t_var.or(defaults.t_var).unwrap_or([0, 0]),
                be_max_packet: l
                    .be_max_packet
                    .or_else(|| defaults.be_max_packet.clone())
                    .unwrap_or_else(Rational::zero),
                cdt: l.cdt.or_else(|| defaults.cdt.clone()).unwrap_or_else(TokenBucket::zero),
                cbs: l.cbs.or_else(|| defaults.cbs.clone()).unwrap_or_default(),
                from: from.clone(),
                to: to.clone(),
            });
        }
        let mut flows = Vec::with_capacity(raw.flows.len());
        for f in raw.flows {
            let min_packet = f.min_packet.unwrap_or_else(|| f.max_packet.clone());
            let burst = match (f.regulator, f.burst) {
                (Regulator::Lrq, Some(b)) if b != f.max_packet => {
                    diagnostics.push(Diagnostic::new(
                        Severity::Notice,
                        "lrq-burst-rewritten",
                        format!("flow {}: LRQ burst {} replaced by its max packet {}", f.id, b, f.max_packet),
                    ));
                    f.max_packet.clone()
                }
                (Regulator::Lrq, _) => f.max_packet.clone(),
                (Regulator::Lb, Some(b)) => b,
                (Regulator::Lb, None) => {
                    return Err(ModelError::Invalid(format!("LB flow {} needs a burst", f.id)));
                }
            };
            flows.push(FlowSpec {
                id: f.id,
                class: f.class,
                path: f.path,
                regulator: f.regulator,
                rate: f.rate,
                burst,
                max_packet: f.max_packet,
                min_packet,
            });
        }
        Ok(Loaded { spec: NetworkSpec::new(raw.nodes, links, flows), diagnostics })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialization cannot fail")
    }

    /// SHA-256 over the canonical JSON form; ties traces and reports to the
    /// spec they were produced from.
    pub fn fingerprint(&self) -> String {
        let canon = serde_json::to_string(self).expect("spec serialization cannot fail");
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn is_host(&self, id: &str) -> bool {
        self.node(id).map(|n| n.role == Role::Host).unwrap_or(false)
    }

    pub fn link(&self, i: &str, j: &str) -> Result<&LinkParams, ModelError> {
        self.link_index
            .get(&LinkId::new(i, j))
            .map(|&ix| &self.links[ix])
            .ok_or_else(|| ModelError::UnknownLink(i.to_string(), j.to_string()))
    }

    pub fn flow(&self, id: &str) -> Result<&FlowSpec, ModelError> {
        self.flows.iter().find(|f| f.id == id).ok_or_else(|| ModelError::UnknownFlow(id.to_string()))
    }

    pub fn flow_index(&self, id: &str) -> Option<usize> {
        self.flows.iter().position(|f| f.id == id)
    }
}

/// `F^x_ij`: flows of class `x` using link `(i, j)`.
pub fn flows_on_link<'a>(spec: &'a NetworkSpec, i: &str, j: &str, x: Class) -> Result<Vec<&'a FlowSpec>, ModelError> {
    spec.link(i, j)?;
    Ok(spec.flows.iter().filter(|f| f.class == x && f.uses_link(i, j)).collect())
}

/// `F^x_ijk`: flows of `F^x_ij` that continue from `j` to `k`.
pub fn flows_through<'a>(
    spec: &'a NetworkSpec,
    i: &str,
    j: &str,
    k: &str,
    x: Class,
) -> Result<Vec<&'a FlowSpec>, ModelError> {
    if spec.node(k).is_none() {
        return Err(ModelError::UnknownNode(k.to_string()));
    }
    Ok(flows_on_link(spec, i, j, x)?
        .into_iter()
        .filter(|f| f.next_after(i, j) == Some(k))
        .collect())
}

fn max_packet_of(spec: &NetworkSpec, i: &str, j: &str, x: Class) -> Rational {
    spec.flows
        .iter()
        .filter(|f| f.class == x && f.uses_link(i, j))
        .map(|f| f.max_packet.clone())
        .max()
        .unwrap_or_else(Rational::zero)
}

/// Burst and rate totals plus the packet-size maxima of the link. Maxima over
/// absent classes are 0.
pub fn link_aggregates(spec: &NetworkSpec, i: &str, j: &str, x: Class) -> Result<LinkAggregates, ModelError> {
    let link = spec.link(i, j)?;
    let flows = flows_on_link(spec, i, j, x)?;
    let b_tot = flows.iter().fold(Rational::zero(), |acc, f| acc + &f.burst);
    let r_tot = flows.iter().fold(Rational::zero(), |acc, f| acc + &f.rate);
    let l_a = max_packet_of(spec, i, j, Class::A);
    let l_b = max_packet_of(spec, i, j, Class::B);
    let l_e = link.be_max_packet.clone();
    let l_bar_a = rational::max(l_b.clone(), l_e.clone());
    let l_bar = rational::max(l_a.clone(), l_bar_a.clone());
    let l_class = match x {
        Class::A => l_a.clone(),
        Class::B => l_b.clone(),
    };
    Ok(LinkAggregates { b_tot, r_tot, l_class, l_bar_a, l_bar, l_a, l_b, l_e })
}

/// Rate of the CBS rate-latency curve, `I (c - r) / (I - S)`.
pub(crate) fn cbs_rate(link: &LinkParams, slopes: &CbsSlopes) -> Rational {
    &slopes.idle_slope * (&link.capacity - &link.cdt.rate) / (&slopes.idle_slope - &slopes.send_slope)
}

/// Checks every structural invariant of the spec and the per-link stability
/// condition. Errors are fatal; warnings and notices are informational.
pub fn validate(spec: &NetworkSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut err = |code: &str, msg: String| out.push(Diagnostic::new(Severity::Error, code, msg));

    let mut seen = BTreeSet::new();
    for n in &spec.nodes {
        if !seen.insert(n.id.as_str()) {
            err("duplicate-node", format!("node {} declared twice", n.id));
        }
    }
    let mut seen_links = BTreeSet::new();
    for l in &spec.links {
        let id = l.id();
        if !seen_links.insert(id.clone()) {
            err("duplicate-link", format!("link {id} declared twice"));
        }
        for end in [&l.from, &l.to] {
            if spec.node(end).is_none() {
                err("unknown-node", format!("link {id} references undeclared node {end}"));
            }
        }
        if l.from == l.to {
            err("self-loop", format!("link {id} is a self loop"));
        }
        if !l.capacity.is_positive() {
            err("capacity", format!("link {id}: capacity must be > 0"));
        }
        if l.t_proc[0] < 0 || l.t_proc[0] > l.t_proc[1] {
            err("t-proc", format!("link {id}: need 0 <= t_proc_min <= t_proc_max"));
        }
        if l.t_var[0] < 0 || l.t_var[0] > l.t_var[1] {
            err("t-var", format!("link {id}: need 0 <= t_var_min <= t_var_max"));
        }
        if l.be_max_packet.is_negative() {
            err("be-packet", format!("link {id}: BE max packet must be >= 0"));
        }
        if l.cdt.rate.is_negative() || l.cdt.burst.is_negative() {
            err("cdt", format!("link {id}: CDT rate and burst must be >= 0"));
        }
        if l.cdt.rate >= l.capacity {
            err("cdt-saturates", format!("link {id}: CDT rate {} must be below the capacity {}", l.cdt.rate, l.capacity));
        }
        for (class, slopes) in [(Class::A, &l.cbs.a), (Class::B, &l.cbs.b)] {
            if let Some(s) = slopes {
                if !s.idle_slope.is_positive() {
                    err("idle-slope", format!("link {id}: idle slope of class {class} must be > 0"));
                }
                if !s.send_slope.is_negative() {
                    err("send-slope", format!("link {id}: send slope of class {class} must be < 0"));
                }
            }
        }
    }

    let mut seen_flows = BTreeSet::new();
    for f in &spec.flows {
        let id = &f.id;
        if !seen_flows.insert(id.as_str()) {
            err("duplicate-flow", format!("flow {id} declared twice"));
        }
        if f.path.len() < 2 {
            err("path", format!("flow {id}: path needs at least two nodes"));
            continue;
        }
        let distinct: BTreeSet<_> = f.path.iter().collect();
        if distinct.len() != f.path.len() {
            err("path", format!("flow {id}: path visits a node twice"));
        }
        for (pos, n) in f.path.iter().enumerate() {
            match spec.node(n) {
                None => err("unknown-node", format!("flow {id}: path node {n} is not declared")),
                Some(node) => {
                    let endpoint = pos == 0 || pos + 1 == f.path.len();
                    if endpoint && node.role != Role::Host {
                        err("path", format!("flow {id}: endpoint {n} must be a host"));
                    }
                    if !endpoint && node.role != Role::Switch {
                        err("path", format!("flow {id}: intermediate node {n} must be a switch"));
                    }
                }
            }
        }
        for hop in f.hops() {
            match spec.link(&hop.from, &hop.to) {
                Err(_) => err("path", format!("flow {id}: no link {hop}")),
                Ok(l) => {
                    if l.cbs.get(f.class).is_none() {
                        err("cbs-missing", format!("flow {id}: link {hop} has no CBS slopes for class {}", f.class));
                    }
                    if f.class == Class::B && l.cbs.a.is_none() {
                        err("cbs-missing", format!("link {hop}: class B bounds need the class A slopes as well"));
                    }
                }
            }
        }
        if !f.rate.is_positive() {
            err("rate", format!("flow {id}: rate must be > 0"));
        }
        if !f.min_packet.is_positive() {
            err("packet", format!("flow {id}: min packet must be > 0"));
        }
        if f.min_packet > f.max_packet {
            err("packet", format!("flow {id}: min packet exceeds max packet"));
        }
        if f.regulator == Regulator::Lb && f.burst < f.max_packet {
            err("burst", format!("flow {id}: LB burst {} is smaller than the max packet {}", f.burst, f.max_packet));
        }
        if f.regulator == Regulator::Lrq && f.burst != f.max_packet {
            err("burst", format!("flow {id}: LRQ burst must equal the max packet"));
        }
    }

    if has_errors(&out) {
        return out;
    }

    for l in &spec.links {
        let id = l.id();
        let mut any = false;
        for class in [Class::A, Class::B] {
            let flows: Vec<_> = spec.flows.iter().filter(|f| f.class == class && f.uses_link(&l.from, &l.to)).collect();
            if flows.is_empty() {
                continue;
            }
            any = true;
            let Some(slopes) = l.cbs.get(class) else { continue };
            let rate = cbs_rate(l, slopes);
            let load = flows.iter().fold(Rational::zero(), |acc, f| acc + &f.rate);
            if load > rate {
                out.push(Diagnostic::new(
                    Severity::Warning,
                    "unstable",
                    format!(
                        "link {id} class {class}: flow rates sum to {} b/s, above the CBS service rate {} b/s",
                        rational::to_decimal(&load, 3),
                        rational::to_decimal(&rate, 3)
                    ),
                ));
            } else if load == rate {
                out.push(Diagnostic::new(
                    Severity::Notice,
                    "non-strict-stability",
                    format!(
                        "link {id} class {class}: flow rates sum exactly to the CBS service rate {} b/s",
                        rational::to_decimal(&rate, 3)
                    ),
                ));
            }
        }
        if !any {
            out.push(Diagnostic::new(
                Severity::Notice,
                "no-avb-flows",
                format!("link {id} carries no class A or B flows; per-class queries on it have empty flow sets"),
            ));
        }
    }
    out
}
