//! Delay and backlog bounds for AVB classes: CBS service curves, per-flow
//! CBFS response times, interleaved-regulator response times, end-to-end
//! bounds and per-queue backlog bounds. Every function is a pure query on a
//! [`NetworkSpec`] returning exact rationals.

use std::fmt::Write as _;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{self, Arrival, CappedArrival, CurveError, Impulse, RateLatency, Service, TokenBucket};
use crate::network::{
    self, flows_on_link, flows_through, link_aggregates, Class, Diagnostic, FlowSpec, LinkId, ModelError, NetworkSpec,
    Role, Severity,
};
use crate::rational::{self, Exact, Rational};

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("link {0}: CDT rate is not below the line rate")]
    CdtSaturates(LinkId),
    #[error("link {link}: class {class} has no CBS slopes")]
    ClassNotConfigured { link: LinkId, class: Class },
    #[error("flow {flow} does not use link {link}")]
    FlowNotOnLink { flow: String, link: LinkId },
    #[error("flow {flow} does not continue from {link} to {next}")]
    FlowNotThrough { flow: String, link: LinkId, next: String },
    #[error("empty flow set for {0}: the supremum is undefined")]
    EmptyFlowSet(String),
    #[error("node {0} is not a switch and has no interleaved regulator")]
    NotASwitch(String),
    #[error("flow {0}: path must have at least two nodes")]
    PathTooShort(String),
    #[error("while computing {context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<BoundsError>,
    },
}

impl BoundsError {
    fn context(self, context: impl Into<String>) -> Self {
        BoundsError::Context { context: context.into(), source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, BoundsError>;

/// Rate-latency curves of both AVB classes on one link together with the
/// credit maxima they are derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CbsCurveResult {
    pub class_a: Option<RateLatency>,
    pub class_b: Option<RateLatency>,
    pub v_a_max: Option<Rational>,
    pub v_b_max: Option<Rational>,
}

fn link_id(i: &str, j: &str) -> LinkId {
    LinkId::new(i, j)
}

/// Service curves and credit ceilings for link `(i, j)`.
pub fn cbs_analysis(spec: &NetworkSpec, i: &str, j: &str) -> Result<CbsCurveResult> {
    let link = spec.link(i, j)?;
    let c = &link.capacity;
    let r = &link.cdt.rate;
    let b = &link.cdt.burst;
    if r >= c {
        return Err(BoundsError::CdtSaturates(link_id(i, j)));
    }
    let agg = link_aggregates(spec, i, j, Class::A)?;
    let cdt_term = b + r * &agg.l_bar / c;
    let headroom = c - r;

    let (class_a, v_a_max) = match &link.cbs.a {
        Some(s) => {
            let latency = (&agg.l_bar_a + &cdt_term) / &headroom;
            let rate = &s.idle_slope * &headroom / (&s.idle_slope - &s.send_slope);
            let v = &agg.l_bar_a * &s.idle_slope / c;
            (Some(RateLatency { rate, latency }), Some(v))
        }
        None => (None, None),
    };
    let (class_b, v_b_max) = match (&link.cbs.b, &link.cbs.a) {
        (Some(sb), Some(sa)) => {
            // -L̄^A I^A / S^A is positive since S^A < 0.
            let a_blocking = -(&agg.l_bar_a * &sa.idle_slope / &sa.send_slope);
            let inner = &agg.l_e + &agg.l_a + &a_blocking;
            let latency = (&inner + &cdt_term) / &headroom;
            let rate = &sb.idle_slope * &headroom / (&sb.idle_slope - &sb.send_slope);
            let v = &sb.idle_slope / c * &inner;
            (Some(RateLatency { rate, latency }), Some(v))
        }
        _ => (None, None),
    };
    Ok(CbsCurveResult { class_a, class_b, v_a_max, v_b_max })
}

/// Rate-latency service curve `(R^x_ij, T^x_ij)` offered by the CBFS to class `x`.
pub fn cbs_service_curve(spec: &NetworkSpec, i: &str, j: &str, x: Class) -> Result<RateLatency> {
    let res = cbs_analysis(spec, i, j)?;
    let curve = match x {
        Class::A => res.class_a,
        Class::B => res.class_b,
    };
    curve.ok_or(BoundsError::ClassNotConfigured { link: link_id(i, j), class: x })
}

fn flow_on(spec: &NetworkSpec, f: &str, i: &str, j: &str) -> Result<FlowSpec> {
    let flow = spec.flow(f)?;
    spec.link(i, j)?;
    if !flow.uses_link(i, j) {
        return Err(BoundsError::FlowNotOnLink { flow: f.to_string(), link: link_id(i, j) });
    }
    Ok(flow.clone())
}

/// Waiting-time bound in the CBFS queue, `T + (b_tot - psi) / R`, using the
/// worst packet of the flow.
pub fn cbfs_waiting_bound(spec: &NetworkSpec, f: &str, i: &str, j: &str) -> Result<Rational> {
    let flow = flow_on(spec, f, i, j)?;
    let beta = cbs_service_curve(spec, i, j, flow.class)?;
    let agg = link_aggregates(spec, i, j, flow.class)?;
    Ok(&beta.latency + (&agg.b_tot - flow.psi()) / &beta.rate)
}

/// Per-flow response-time bound in the CBFS, `S(f, i, j, x)`.
pub fn cbfs_response_bound(spec: &NetworkSpec, f: &str, i: &str, j: &str) -> Result<Rational> {
    let flow = flow_on(spec, f, i, j)?;
    let link = spec.link(i, j)?;
    let waiting = cbfs_waiting_bound(spec, f, i, j)?;
    Ok(waiting + flow.psi() / &link.capacity + link.t_var_max())
}

/// The aggregate FIFO bound `T + b_tot / R + T^var,max`, which the per-flow
/// bound improves on.
pub fn classical_cbfs_bound(spec: &NetworkSpec, i: &str, j: &str, x: Class) -> Result<Rational> {
    let link = spec.link(i, j)?;
    let beta = cbs_service_curve(spec, i, j, x)?;
    let agg = link_aggregates(spec, i, j, x)?;
    Ok(&beta.latency + &agg.b_tot / &beta.rate + link.t_var_max())
}

fn require_switch(spec: &NetworkSpec, j: &str) -> Result<()> {
    match spec.node(j) {
        None => Err(ModelError::UnknownNode(j.to_string()).into()),
        Some(n) if n.role != Role::Switch => Err(BoundsError::NotASwitch(j.to_string())),
        Some(_) => Ok(()),
    }
}

fn nonempty_through<'a>(spec: &'a NetworkSpec, i: &str, j: &str, k: &str, x: Class) -> Result<Vec<&'a FlowSpec>> {
    require_switch(spec, j)?;
    let set = flows_through(spec, i, j, k, x)?;
    if set.is_empty() {
        return Err(BoundsError::EmptyFlowSet(format!("F^{x}_({i},{j},{k})")));
    }
    Ok(set)
}

/// Combined CBFS + interleaved regulator bound `C(i, j, k, x)` in its
/// closed form.
pub fn combined_bound(spec: &NetworkSpec, i: &str, j: &str, k: &str, x: Class) -> Result<Rational> {
    let set = nonempty_through(spec, i, j, k, x)?;
    let link = spec.link(i, j)?;
    let beta = cbs_service_curve(spec, i, j, x)?;
    let agg = link_aggregates(spec, i, j, x)?;
    let worst = set
        .iter()
        .map(|f| f.psi() / &link.capacity - f.psi() / &beta.rate)
        .max()
        .expect("set is nonempty");
    Ok(&beta.latency + &agg.b_tot / &beta.rate + link.t_var_max() + worst + link.t_proc_max())
}

/// `C(i, j, k, x)` as the supremum of per-flow CBFS bounds plus the maximum
/// processing delay.
pub fn combined_bound_sup_form(spec: &NetworkSpec, i: &str, j: &str, k: &str, x: Class) -> Result<Rational> {
    let set = nonempty_through(spec, i, j, k, x)?;
    let link = spec.link(i, j)?;
    let mut best: Option<Rational> = None;
    for f in set {
        let s = cbfs_response_bound(spec, &f.id, i, j)?;
        best = Some(match best {
            Some(b) => rational::max(b, s),
            None => s,
        });
    }
    Ok(best.expect("set is nonempty") + link.t_proc_max())
}

/// `C - M_f / c - T^var,min - T^proc,min` before clamping at zero.
pub fn ir_response_unclamped(spec: &NetworkSpec, f: &str, i: &str, j: &str, k: &str) -> Result<Rational> {
    let flow = flow_on(spec, f, i, j)?;
    if flow.next_after(i, j) != Some(k) {
        return Err(BoundsError::FlowNotThrough { flow: f.to_string(), link: link_id(i, j), next: k.to_string() });
    }
    let link = spec.link(i, j)?;
    let c = combined_bound(spec, i, j, k, flow.class)?;
    Ok(c - &flow.min_packet / &link.capacity - link.t_var_min() - link.t_proc_min())
}

/// Response-time bound `H(f, i, j, k, x)` in the interleaved regulator of
/// node `j` for link `(j, k)`. Negative values are clamped to zero.
pub fn ir_response_bound(spec: &NetworkSpec, f: &str, i: &str, j: &str, k: &str) -> Result<Rational> {
    Ok(rational::pos(ir_response_unclamped(spec, f, i, j, k)?))
}

/// Delay bound of the whole regulator FIFO, `D(i, j, k, x)`.
pub fn ir_fifo_delay(spec: &NetworkSpec, i: &str, j: &str, k: &str, x: Class) -> Result<Rational> {
    let set = nonempty_through(spec, i, j, k, x)?;
    let mut best: Option<Rational> = None;
    for f in set {
        let h = ir_response_bound(spec, &f.id, i, j, k)?;
        best = Some(match best {
            Some(b) => rational::max(b, h),
            None => h,
        });
    }
    Ok(best.expect("set is nonempty"))
}

fn path_of(spec: &NetworkSpec, f: &str) -> Result<FlowSpec> {
    let flow = spec.flow(f)?.clone();
    if flow.path.len() < 2 {
        return Err(BoundsError::PathTooShort(f.to_string()));
    }
    Ok(flow)
}

/// End-to-end bound: combined bounds of every CBFS/regulator pair along the
/// path plus the CBFS bound of the last hop.
pub fn e2e_bound(spec: &NetworkSpec, f: &str) -> Result<Rational> {
    let flow = path_of(spec, f)?;
    let p = &flow.path;
    let mut total = Rational::zero();
    for w in p.windows(3) {
        total += combined_bound(spec, &w[0], &w[1], &w[2], flow.class)?;
    }
    let n = p.len();
    Ok(total + cbfs_response_bound(spec, f, &p[n - 2], &p[n - 1])?)
}

/// Sum of per-switch bounds `H + S + T^proc,max` along the path, with no
/// regulator delay at the source.
pub fn additive_e2e(spec: &NetworkSpec, f: &str) -> Result<Rational> {
    let flow = path_of(spec, f)?;
    let p = &flow.path;
    let mut total = cbfs_response_bound(spec, f, &p[0], &p[1])?;
    for w in p.windows(3) {
        let h = ir_response_bound(spec, f, &w[0], &w[1], &w[2])?;
        let s = cbfs_response_bound(spec, f, &w[1], &w[2])?;
        let proc = spec.link(&w[0], &w[1])?.t_proc_max();
        total += h + s + proc;
    }
    Ok(total)
}

/// Aggregates feeding the regulator backlog bound: `(r_s, b_s)` of the flows
/// sharing the regulator, `b_w` of the flows on `(i, j)` that go to other
/// regulators at `j`, and whether flows terminating at `j` were left out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrInputAggregates {
    pub shared: TokenBucket,
    pub other_burst: Rational,
    pub max_packet: Rational,
    pub b_w_ambiguous: bool,
}

pub fn ir_input_aggregates(spec: &NetworkSpec, i: &str, j: &str, k: &str, x: Class) -> Result<IrInputAggregates> {
    let set = nonempty_through(spec, i, j, k, x)?;
    let shared = set.iter().fold(TokenBucket::zero(), |acc, f| &acc + &f.bucket());
    let max_packet = set.iter().map(|f| f.max_packet.clone()).max().expect("set is nonempty");
    let mut other_burst = Rational::zero();
    let mut ambiguous = false;
    for f in flows_on_link(spec, i, j, x)? {
        match f.next_after(i, j) {
            Some(next) if next != k => other_burst += &f.burst,
            Some(_) => {}
            None => ambiguous = true,
        }
    }
    Ok(IrInputAggregates { shared, other_burst, max_packet, b_w_ambiguous: ambiguous })
}

/// Arrival curve at the input of the regulator: the line-rate curve capped by
/// the CBFS output curve of the flows sharing it. Falls back to the bucket
/// alone when the line rate does not exceed the aggregate rate.
pub fn ir_arrival_curve(spec: &NetworkSpec, i: &str, j: &str, k: &str, x: Class) -> Result<Arrival> {
    let agg = ir_input_aggregates(spec, i, j, k, x)?;
    let link = spec.link(i, j)?;
    let beta = cbs_service_curve(spec, i, j, x)?;
    let out_burst = curve::output_burst(&agg.shared, &agg.other_burst, &beta)?;
    let bucket = TokenBucket { rate: agg.shared.rate.clone(), burst: out_burst };
    Ok(match CappedArrival::new(link.capacity.clone(), agg.max_packet, bucket.clone()) {
        Ok(c) => Arrival::Capped(c),
        Err(_) => Arrival::Bucket(bucket),
    })
}

/// Backlog bound of the interleaved regulator at `j` for `(j, k)` fed by
/// `(i, j)`, in closed form.
pub fn ir_backlog(spec: &NetworkSpec, i: &str, j: &str, k: &str, x: Class) -> Result<Rational> {
    let agg = ir_input_aggregates(spec, i, j, k, x)?;
    let link = spec.link(i, j)?;
    let beta = cbs_service_curve(spec, i, j, x)?;
    let d = ir_fifo_delay(spec, i, j, k, x)?;
    let line = &link.capacity * &d + &agg.max_packet;
    let bucket = &agg.shared.rate * &d
        + &agg.shared.burst
        + &agg.shared.rate * (&beta.latency + &agg.other_burst / &beta.rate);
    Ok(rational::min(line, bucket))
}

/// The same bound computed as the vertical deviation between the regulator
/// input arrival curve and the impulse service curve `delta_D`.
pub fn ir_backlog_via_curves(spec: &NetworkSpec, i: &str, j: &str, k: &str, x: Class) -> Result<Rational> {
    let alpha = ir_arrival_curve(spec, i, j, k, x)?;
    let d = ir_fifo_delay(spec, i, j, k, x)?;
    Ok(curve::backlog_bound(&alpha, &Service::Impulse(Impulse::new(d)?))?)
}

/// Backlog bound of the class-`x` CBFS queue of `(i, j)`: `sum b + (sum r) T`.
pub fn cbfs_backlog(spec: &NetworkSpec, i: &str, j: &str, x: Class) -> Result<Rational> {
    let agg = link_aggregates(spec, i, j, x)?;
    if agg.b_tot.is_zero() && agg.r_tot.is_zero() {
        return Ok(Rational::zero());
    }
    let beta = cbs_service_curve(spec, i, j, x)?;
    Ok(&agg.b_tot + &agg.r_tot * &beta.latency)
}

// ---- report -----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrHopReport {
    pub next: String,
    pub combined: Exact,
    pub response: Exact,
    pub fifo_delay: Exact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopReport {
    pub link: LinkId,
    pub waiting: Exact,
    pub cbfs_response: Exact,
    /// Regulator at the downstream node, absent on the last hop.
    pub regulator: Option<IrHopReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowReport {
    pub flow: String,
    pub class: Class,
    pub hops: Vec<HopReport>,
    pub e2e: Exact,
    pub additive_e2e: Exact,
    /// `e2e / additive_e2e`.
    pub ratio: Exact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceCurveReport {
    pub link: LinkId,
    pub class: Class,
    pub rate: Exact,
    pub latency: Exact,
    pub credit_max: Exact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CbfsQueueReport {
    pub link: LinkId,
    pub class: Class,
    pub backlog: Exact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrQueueReport {
    /// Upstream link `(i, j)`; the regulator sits at `j`.
    pub link: LinkId,
    pub next: String,
    pub class: Class,
    pub fifo_delay: Exact,
    pub backlog: Exact,
    pub b_w_ambiguous: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub spec_fingerprint: String,
    pub service_curves: Vec<ServiceCurveReport>,
    pub flows: Vec<FlowReport>,
    pub cbfs_queues: Vec<CbfsQueueReport>,
    pub ir_queues: Vec<IrQueueReport>,
    pub diagnostics: Vec<Diagnostic>,
}

impl BoundsReport {
    pub fn flow(&self, id: &str) -> Option<&FlowReport> {
        self.flows.iter().find(|f| f.flow == id)
    }

    pub fn hop(&self, flow: &str, i: &str, j: &str) -> Option<&HopReport> {
        self.flow(flow)?.hops.iter().find(|h| h.link.from == i && h.link.to == j)
    }

    pub fn cbfs_queue(&self, i: &str, j: &str, x: Class) -> Option<&CbfsQueueReport> {
        self.cbfs_queues.iter().find(|q| q.link.from == i && q.link.to == j && q.class == x)
    }

    pub fn ir_queue(&self, i: &str, j: &str, k: &str, x: Class) -> Option<&IrQueueReport> {
        self.ir_queues
            .iter()
            .find(|q| q.link.from == i && q.link.to == j && q.next == k && q.class == x)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

fn with_ctx<T>(r: Result<T>, ctx: impl FnOnce() -> String) -> Result<T> {
    r.map_err(|e| e.context(ctx()))
}

/// Computes every bound for every flow, hop and queue of the spec.
pub fn full_report(spec: &NetworkSpec) -> Result<BoundsReport> {
    let mut diagnostics = Vec::new();
    let mut service_curves = Vec::new();
    let mut cbfs_queues = Vec::new();
    let mut ir_queues = Vec::new();

    for link in &spec.links {
        let (i, j) = (link.from.as_str(), link.to.as_str());
        let cbs = with_ctx(cbs_analysis(spec, i, j), || format!("service curves of {}", link.id()))?;
        for (class, beta, vmax) in [
            (Class::A, &cbs.class_a, &cbs.v_a_max),
            (Class::B, &cbs.class_b, &cbs.v_b_max),
        ] {
            let carried = !flows_on_link(spec, i, j, class)?.is_empty();
            if let (Some(beta), Some(vmax)) = (beta, vmax) {
                service_curves.push(ServiceCurveReport {
                    link: link.id(),
                    class,
                    rate: beta.rate.clone().into(),
                    latency: beta.latency.clone().into(),
                    credit_max: vmax.clone().into(),
                });
            }
            if !carried {
                continue;
            }
            let backlog = with_ctx(cbfs_backlog(spec, i, j, class), || format!("CBFS backlog of {} class {class}", link.id()))?;
            cbfs_queues.push(CbfsQueueReport { link: link.id(), class, backlog: backlog.into() });

            if spec.node(j).map(|n| n.role) != Some(Role::Switch) {
                continue;
            }
            let mut nexts: Vec<&str> = flows_on_link(spec, i, j, class)?
                .iter()
                .filter_map(|f| f.next_after(i, j))
                .collect();
            nexts.sort_unstable();
            nexts.dedup();
            for k in nexts {
                let ctx = || format!("regulator at {j} for ({j},{k}) fed by {} class {class}", link.id());
                let sup_form = with_ctx(combined_bound_sup_form(spec, i, j, k, class), ctx)?;
                let closed = with_ctx(combined_bound(spec, i, j, k, class), ctx)?;
                debug_assert_eq!(sup_form, closed, "closed and sup forms of C disagree");
                let d = with_ctx(ir_fifo_delay(spec, i, j, k, class), ctx)?;
                let backlog = with_ctx(ir_backlog(spec, i, j, k, class), ctx)?;
                let agg = with_ctx(ir_input_aggregates(spec, i, j, k, class), ctx)?;
                if agg.b_w_ambiguous {
                    diagnostics.push(Diagnostic {
                        severity: Severity::Notice,
                        code: "b-w-interpretation".into(),
                        message: format!(
                            "{}: flows terminating at {j} are excluded from b_w of the regulator for ({j},{k})",
                            link.id()
                        ),
                    });
                }
                ir_queues.push(IrQueueReport {
                    link: link.id(),
                    next: k.to_string(),
                    class,
                    fifo_delay: d.into(),
                    backlog: backlog.into(),
                    b_w_ambiguous: agg.b_w_ambiguous,
                });
            }
        }
    }

    let mut flows = Vec::with_capacity(spec.flows.len());
    for flow in &spec.flows {
        let ctx = |what: &str| format!("{what} of flow {}", flow.id);
        let mut hops = Vec::new();
        let p = &flow.path;
        for (n, w) in p.windows(2).enumerate() {
            let (i, j) = (&w[0], &w[1]);
            let waiting = with_ctx(cbfs_waiting_bound(spec, &flow.id, i, j), || ctx("waiting bound"))?;
            let s = with_ctx(cbfs_response_bound(spec, &flow.id, i, j), || ctx("CBFS bound"))?;
            let regulator = match p.get(n + 2) {
                Some(k) => {
                    let c = with_ctx(combined_bound(spec, i, j, k, flow.class), || ctx("combined bound"))?;
                    let raw = with_ctx(ir_response_unclamped(spec, &flow.id, i, j, k), || ctx("regulator bound"))?;
                    if raw.is_negative() {
                        diagnostics.push(Diagnostic {
                            severity: Severity::Warning,
                            code: "negative-h".into(),
                            message: format!(
                                "flow {}: regulator bound at {j} for ({j},{k}) is negative ({}); clamped to 0",
                                flow.id, raw
                            ),
                        });
                    }
                    let d = with_ctx(ir_fifo_delay(spec, i, j, k, flow.class), || ctx("regulator FIFO delay"))?;
                    Some(IrHopReport {
                        next: k.clone(),
                        combined: c.into(),
                        response: rational::pos(raw).into(),
                        fifo_delay: d.into(),
                    })
                }
                None => None,
            };
            hops.push(HopReport { link: LinkId::new(i.clone(), j.clone()), waiting: waiting.into(), cbfs_response: s.into(), regulator });
        }
        let e2e = with_ctx(e2e_bound(spec, &flow.id), || ctx("end-to-end bound"))?;
        let additive = with_ctx(additive_e2e(spec, &flow.id), || ctx("additive bound"))?;
        let ratio = if additive.is_zero() { Rational::zero() } else { &e2e / &additive };
        flows.push(FlowReport {
            flow: flow.id.clone(),
            class: flow.class,
            hops,
            e2e: e2e.into(),
            additive_e2e: additive.into(),
            ratio: ratio.into(),
        });
    }

    Ok(BoundsReport {
        spec_fingerprint: spec.fingerprint(),
        service_curves,
        flows,
        cbfs_queues,
        ir_queues,
        diagnostics,
    })
}

// ---- rendering ----------------------------------------------------------------

/// Duration in microseconds; non-integral values carry the exact fraction.
pub fn fmt_us(seconds: &Rational) -> String {
    let us = seconds * rational::int(1_000_000);
    if us.is_integer() {
        format!("{} us", us.numer())
    } else {
        format!("{} us ({})", rational::to_decimal(&us, 3), Exact(us))
    }
}

pub fn fmt_bits(bits: &Rational) -> String {
    if bits.is_integer() {
        format!("{} bits", bits.numer())
    } else {
        format!("{} bits ({})", rational::to_decimal(bits, 3), Exact(bits.clone()))
    }
}

/// Percentage with one decimal, rounded half up.
pub fn fmt_percent(fraction: &Rational) -> String {
    let tenths = fraction * rational::int(1000) + rational::ratio(1, 2);
    let t = tenths.floor().to_integer();
    let (whole, rem) = num_integer::Integer::div_rem(&t, &num_bigint::BigInt::from(10));
    format!("{whole}.{rem}%")
}

/// Human-readable rendering of a report.
pub fn render_table(report: &BoundsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "spec {}", &report.spec_fingerprint[..12]);
    let _ = writeln!(out, "\nservice curves");
    let _ = writeln!(out, "  {:<14} {:<5} {:>16} {:>22} {:>16}", "link", "class", "rate (b/s)", "latency", "credit max");
    for sc in &report.service_curves {
        let _ = writeln!(
            out,
            "  {:<14} {:<5} {:>16} {:>22} {:>16}",
            sc.link.to_string(),
            sc.class.to_string(),
            rational::to_decimal(&sc.rate.0, 3),
            fmt_us(&sc.latency.0),
            fmt_bits(&sc.credit_max.0)
        );
    }
    for f in &report.flows {
        let _ = writeln!(out, "\nflow {} (class {})", f.flow, f.class);
        for h in &f.hops {
            let _ = write!(out, "  S@{:<12} = {:<12}", h.link.to_string(), fmt_us(&h.cbfs_response.0));
            if let Some(ir) = &h.regulator {
                let _ = write!(
                    out,
                    "  H@{}->{} = {:<12}  C = {}",
                    h.link.to, ir.next, fmt_us(&ir.response.0), fmt_us(&ir.combined.0)
                );
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "  e2e = {}, additive = {}, ratio {}",
            fmt_us(&f.e2e.0),
            fmt_us(&f.additive_e2e.0),
            fmt_percent(&f.ratio.0)
        );
    }
    let _ = writeln!(out, "\nCBFS backlog bounds");
    for q in &report.cbfs_queues {
        let _ = writeln!(out, "  {:<14} {}  {}", q.link.to_string(), q.class, fmt_bits(&q.backlog.0));
    }
    let _ = writeln!(out, "\nregulator backlog bounds");
    for q in &report.ir_queues {
        let _ = writeln!(
            out,
            "  at {} for ({},{}) from {}  {}  D = {}  B = {}{}",
            q.link.to,
            q.link.to,
            q.next,
            q.link.from,
            q.class,
            fmt_us(&q.fifo_delay.0),
            fmt_bits(&q.backlog.0),
            if q.b_w_ambiguous { "  [b_w excludes terminating flows]" } else { "" }
        );
    }
    if !report.diagnostics.is_empty() {
        let _ = writeln!(out, "\ndiagnostics");
        for d in &report.diagnostics {
            let _ = writeln!(out, "  {d}");
        }
    }
    out
}

/// One row per bound. Durations are in microseconds, data in bits; `exact`
/// is the same quantity as a fraction.
pub fn render_csv(report: &BoundsReport) -> String {
    let mut out = String::from("kind,flow,class,from,to,next,unit,value,exact\n");
    let mut row = |kind: &str, flow: &str, class: Class, link: &LinkId, next: &str, v: &Rational, time: bool| {
        let (unit, v) = if time { ("us", v * rational::int(1_000_000)) } else { ("bits", v.clone()) };
        let _ = writeln!(
            out,
            "{kind},{flow},{class},{},{},{next},{unit},{},{}",
            link.from,
            link.to,
            rational::to_decimal(&v, 6),
            Exact(v.clone())
        );
    };
    for f in &report.flows {
        for h in &f.hops {
            row("W", &f.flow, f.class, &h.link, "", &h.waiting.0, true);
            row("S", &f.flow, f.class, &h.link, "", &h.cbfs_response.0, true);
            if let Some(ir) = &h.regulator {
                row("C", &f.flow, f.class, &h.link, &ir.next, &ir.combined.0, true);
                row("H", &f.flow, f.class, &h.link, &ir.next, &ir.response.0, true);
            }
        }
        let last = &f.hops[f.hops.len() - 1].link;
        row("e2e", &f.flow, f.class, last, "", &f.e2e.0, true);
        row("additive_e2e", &f.flow, f.class, last, "", &f.additive_e2e.0, true);
    }
    for q in &report.cbfs_queues {
        row("backlog_cbfs", "", q.class, &q.link, "", &q.backlog.0, false);
    }
    for q in &report.ir_queues {
        row("fifo_delay_ir", "", q.class, &q.link, &q.next, &q.fifo_delay.0, true);
        row("backlog_ir", "", q.class, &q.link, &q.next, &q.backlog.0, false);
    }
    out
}

pub use network::validate;
