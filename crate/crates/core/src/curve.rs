//! Closed-form min-plus calculus for the curve shapes used by the analysis:
//! token buckets, rate-latency servers, impulse (pure delay) servers and the
//! minimum of a line-rate curve with a token bucket.
//!
//! Units are bits, bits/second and seconds. All results are exact.

use std::fmt;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurveError {
    #[error("curve evaluated at negative time {0}")]
    NegativeTime(Rational),
    #[error("negative amount of data {0}")]
    NegativeData(Rational),
    #[error("service rate {service} is below the arrival rate {arrival}; the deviation is unbounded")]
    Unbounded { arrival: Rational, service: Rational },
    #[error("invalid curve: {0}")]
    Invalid(String),
}

/// A curve value: either a finite number of bits or `+inf`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bits {
    Finite(Rational),
    Infinite,
}

impl Bits {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Bits::Finite(v) => Some(v),
            Bits::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Bits::Infinite)
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bits::Finite(v) => write!(f, "{}", rational::to_decimal(v, 6)),
            Bits::Infinite => f.write_str("+inf"),
        }
    }
}

/// Affine arrival curve `rate * t + burst`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBucket {
    #[serde(with = "rational::quantity")]
    pub rate: Rational,
    #[serde(with = "rational::quantity")]
    pub burst: Rational,
}

impl TokenBucket {
    pub fn new(rate: Rational, burst: Rational) -> Result<Self, CurveError> {
        if rate.is_negative() || burst.is_negative() {
            return Err(CurveError::Invalid(format!(
                "token bucket needs rate >= 0 and burst >= 0, got ({rate}, {burst})"
            )));
        }
        Ok(TokenBucket { rate, burst })
    }

    pub fn zero() -> Self {
        TokenBucket { rate: Rational::zero(), burst: Rational::zero() }
    }

    fn at(&self, t: &Rational) -> Rational {
        &self.rate * t + &self.burst
    }
}

impl std::ops::Add for &TokenBucket {
    type Output = TokenBucket;
    fn add(self, rhs: &TokenBucket) -> TokenBucket {
        TokenBucket { rate: &self.rate + &rhs.rate, burst: &self.burst + &rhs.burst }
    }
}

/// Rate-latency service curve `rate * [t - latency]^+`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateLatency {
    #[serde(with = "rational::quantity")]
    pub rate: Rational,
    #[serde(with = "rational::quantity")]
    pub latency: Rational,
}

impl RateLatency {
    pub fn new(rate: Rational, latency: Rational) -> Result<Self, CurveError> {
        if !rate.is_positive() || latency.is_negative() {
            return Err(CurveError::Invalid(format!(
                "rate-latency curve needs rate > 0 and latency >= 0, got ({rate}, {latency})"
            )));
        }
        Ok(RateLatency { rate, latency })
    }

    fn at(&self, t: &Rational) -> Rational {
        &self.rate * rational::pos(t - &self.latency)
    }
}

/// Impulse service curve: 0 up to `delay`, `+inf` afterwards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Impulse {
    #[serde(with = "rational::quantity")]
    pub delay: Rational,
}

impl Impulse {
    pub fn new(delay: Rational) -> Result<Self, CurveError> {
        if delay.is_negative() {
            return Err(CurveError::Invalid(format!("impulse delay must be >= 0, got {delay}")));
        }
        Ok(Impulse { delay })
    }
}

/// `min(line_rate * t + line_offset, bucket)`: a token bucket further limited
/// by the capacity of the upstream line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CappedArrival {
    #[serde(with = "rational::quantity")]
    pub line_rate: Rational,
    #[serde(with = "rational::quantity")]
    pub line_offset: Rational,
    pub bucket: TokenBucket,
}

impl CappedArrival {
    pub fn new(line_rate: Rational, line_offset: Rational, bucket: TokenBucket) -> Result<Self, CurveError> {
        if line_rate <= bucket.rate {
            return Err(CurveError::Invalid(format!(
                "line rate {line_rate} must exceed the bucket rate {}",
                bucket.rate
            )));
        }
        if line_offset.is_negative() {
            return Err(CurveError::Invalid(format!("line offset must be >= 0, got {line_offset}")));
        }
        Ok(CappedArrival { line_rate, line_offset, bucket })
    }

    fn at(&self, t: &Rational) -> Rational {
        rational::min(&self.line_rate * t + &self.line_offset, self.bucket.at(t))
    }

    /// Time at which the line branch meets the bucket branch (0 if the bucket
    /// is already the smaller one at the origin).
    fn knee(&self) -> Rational {
        let gap = &self.bucket.burst - &self.line_offset;
        if gap.is_positive() {
            gap / (&self.line_rate - &self.bucket.rate)
        } else {
            Rational::zero()
        }
    }
}

/// Arrival curves admitted by the deviation operators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arrival {
    Bucket(TokenBucket),
    Capped(CappedArrival),
}

impl Arrival {
    pub fn long_term_rate(&self) -> &Rational {
        match self {
            Arrival::Bucket(tb) => &tb.rate,
            Arrival::Capped(c) => &c.bucket.rate,
        }
    }

    fn at(&self, t: &Rational) -> Rational {
        match self {
            Arrival::Bucket(tb) => tb.at(t),
            Arrival::Capped(c) => c.at(t),
        }
    }

    /// Points where the slope of the curve changes, besides the origin.
    fn breakpoints(&self) -> Vec<Rational> {
        match self {
            Arrival::Bucket(_) => Vec::new(),
            Arrival::Capped(c) => vec![c.knee()],
        }
    }
}

impl From<TokenBucket> for Arrival {
    fn from(v: TokenBucket) -> Self {
        Arrival::Bucket(v)
    }
}

impl From<CappedArrival> for Arrival {
    fn from(v: CappedArrival) -> Self {
        Arrival::Capped(v)
    }
}

/// Service curves admitted by [`backlog_bound`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Service {
    RateLatency(RateLatency),
    Impulse(Impulse),
}

impl From<RateLatency> for Service {
    fn from(v: RateLatency) -> Self {
        Service::RateLatency(v)
    }
}

impl From<Impulse> for Service {
    fn from(v: Impulse) -> Self {
        Service::Impulse(v)
    }
}

/// Any of the supported curve shapes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Curve {
    TokenBucket(TokenBucket),
    RateLatency(RateLatency),
    Impulse(Impulse),
    Capped(CappedArrival),
}

impl From<Arrival> for Curve {
    fn from(v: Arrival) -> Self {
        match v {
            Arrival::Bucket(tb) => Curve::TokenBucket(tb),
            Arrival::Capped(c) => Curve::Capped(c),
        }
    }
}

impl From<Service> for Curve {
    fn from(v: Service) -> Self {
        match v {
            Service::RateLatency(rl) => Curve::RateLatency(rl),
            Service::Impulse(i) => Curve::Impulse(i),
        }
    }
}

pub fn evaluate(curve: &Curve, t: &Rational) -> Result<Bits, CurveError> {
    if t.is_negative() {
        return Err(CurveError::NegativeTime(t.clone()));
    }
    Ok(match curve {
        Curve::TokenBucket(tb) => Bits::Finite(tb.at(t)),
        Curve::RateLatency(rl) => Bits::Finite(rl.at(t)),
        Curve::Capped(c) => Bits::Finite(c.at(t)),
        Curve::Impulse(i) => {
            if *t <= i.delay {
                Bits::Finite(Rational::zero())
            } else {
                Bits::Infinite
            }
        }
    })
}

fn check_rate(arrival: &Arrival, service_rate: &Rational) -> Result<(), CurveError> {
    if service_rate < arrival.long_term_rate() {
        return Err(CurveError::Unbounded {
            arrival: arrival.long_term_rate().clone(),
            service: service_rate.clone(),
        });
    }
    Ok(())
}

/// Horizontal deviation between an arrival curve and a rate-latency service
/// curve: the worst-case delay.
pub fn delay_bound(arrival: &Arrival, service: &RateLatency) -> Result<Rational, CurveError> {
    check_rate(arrival, &service.rate)?;
    // sup_t { T + alpha(t)/R - t }; the expression is piecewise linear and
    // concave, so the sup sits at the origin or at a breakpoint.
    let candidate = |t: &Rational| &service.latency + arrival.at(t) / &service.rate - t;
    let mut best = candidate(&Rational::zero());
    for bp in arrival.breakpoints() {
        best = rational::max(best, candidate(&bp));
    }
    Ok(best)
}

/// Vertical deviation `sup_s alpha(s) - beta(s)`: the worst-case backlog.
pub fn backlog_bound(arrival: &Arrival, service: &Service) -> Result<Rational, CurveError> {
    match service {
        Service::Impulse(imp) => Ok(arrival.at(&imp.delay)),
        Service::RateLatency(rl) => {
            check_rate(arrival, &rl.rate)?;
            let mut best = arrival.at(&rl.latency);
            for bp in arrival.breakpoints() {
                if bp > rl.latency {
                    best = rational::max(best, arrival.at(&bp) - rl.at(&bp));
                }
            }
            Ok(best)
        }
    }
}

/// Output arrival curve of a token-bucket-constrained flow after a
/// rate-latency server: `(r, b + r*T)`.
pub fn deconvolve_affine(arrival: &TokenBucket, service: &RateLatency) -> Result<TokenBucket, CurveError> {
    if service.rate < arrival.rate {
        return Err(CurveError::Unbounded { arrival: arrival.rate.clone(), service: service.rate.clone() });
    }
    Ok(TokenBucket {
        rate: arrival.rate.clone(),
        burst: &arrival.burst + &arrival.rate * &service.latency,
    })
}

/// Earliest time the service curve exceeds `y` bits: `T + y/R`.
pub fn upper_pseudo_inverse(service: &RateLatency, y: &Rational) -> Result<Rational, CurveError> {
    if y.is_negative() {
        return Err(CurveError::NegativeData(y.clone()));
    }
    Ok(&service.latency + y / &service.rate)
}

/// Burst of the output of an aggregate `shared` that is served together with
/// other traffic of burst `other_burst`: `b_s + r_s (T + b_w / R)`.
pub fn output_burst(shared: &TokenBucket, other_burst: &Rational, service: &RateLatency) -> Result<Rational, CurveError> {
    if other_burst.is_negative() {
        return Err(CurveError::NegativeData(other_burst.clone()));
    }
    Ok(&shared.burst + &shared.rate * (&service.latency + other_burst / &service.rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{from_us, int};

    fn mbps(v: i64) -> Rational {
        int(v * 1_000_000)
    }

    fn tb(r: i64, b: i64) -> TokenBucket {
        TokenBucket::new(mbps(r), int(b)).unwrap()
    }

    fn rl(r: i64, t_us: i64) -> RateLatency {
        RateLatency::new(mbps(r), from_us(t_us)).unwrap()
    }

    #[test]
    fn evaluate_shapes() {
        let v = evaluate(&Curve::TokenBucket(tb(20, 3000)), &int(0)).unwrap();
        assert_eq!(v, Bits::Finite(int(3000)));
        let v = evaluate(&Curve::RateLatency(rl(40, 80)), &from_us(80)).unwrap();
        assert_eq!(v, Bits::Finite(int(0)));
        let capped = CappedArrival::new(mbps(100), int(2000), tb(40, 6200)).unwrap();
        let v = evaluate(&Curve::Capped(capped), &from_us(50)).unwrap();
        assert_eq!(v, Bits::Finite(int(7000)));
    }

    #[test]
    fn impulse_is_infinite_after_delay() {
        let imp = Curve::Impulse(Impulse::new(from_us(10)).unwrap());
        assert_eq!(evaluate(&imp, &from_us(10)).unwrap(), Bits::Finite(int(0)));
        assert!(evaluate(&imp, &from_us(11)).unwrap().is_infinite());
    }

    #[test]
    fn negative_time_rejected() {
        let err = evaluate(&Curve::TokenBucket(tb(1, 1)), &int(-1)).unwrap_err();
        assert!(matches!(err, CurveError::NegativeTime(_)));
    }

    #[test]
    fn delay_bound_examples() {
        assert_eq!(delay_bound(&tb(20, 3000).into(), &rl(40, 80)).unwrap(), from_us(155));
        assert_eq!(delay_bound(&tb(40, 3000).into(), &rl(40, 80)).unwrap(), from_us(155));
        assert_eq!(delay_bound(&tb(20, 0).into(), &rl(30, 7)).unwrap(), from_us(7));
        let err = delay_bound(&tb(50, 0).into(), &rl(40, 0)).unwrap_err();
        assert!(matches!(err, CurveError::Unbounded { .. }));
    }

    #[test]
    fn backlog_bound_examples() {
        let capped = CappedArrival::new(mbps(100), int(1000), tb(40, 6200)).unwrap();
        let imp = Impulse::new(from_us(130)).unwrap();
        assert_eq!(backlog_bound(&capped.into(), &imp.into()).unwrap(), int(11_400));
        let zero = Impulse::new(int(0)).unwrap();
        assert_eq!(backlog_bound(&tb(20, 1234).into(), &zero.into()).unwrap(), int(1234));
        assert_eq!(backlog_bound(&tb(40, 3000).into(), &rl(40, 80).into()).unwrap(), int(6200));
    }

    #[test]
    fn capped_backlog_against_rate_latency_uses_knee() {
        // line 100 Mb/s + 0, bucket 10 Mb/s + 9000: knee at 100 us with 10000 bits.
        let capped = CappedArrival::new(mbps(100), int(0), tb(10, 9000)).unwrap();
        // rate-latency 20 Mb/s after 10 us: at the knee 10000 - 20*90 = 8200.
        assert_eq!(backlog_bound(&capped.clone().into(), &rl(20, 10).into()).unwrap(), int(8200));
        // delay: T + alpha(knee)/R - knee = 10 + 500 - 100 = 410 us.
        assert_eq!(delay_bound(&capped.into(), &rl(20, 10)).unwrap(), from_us(410));
    }

    #[test]
    fn deconvolution_examples() {
        let out = deconvolve_affine(&tb(20, 4000), &rl(100, 20)).unwrap();
        assert_eq!(out, tb(20, 4400));
        assert_eq!(deconvolve_affine(&tb(20, 4000), &rl(100, 0)).unwrap(), tb(20, 4000));
        assert_eq!(deconvolve_affine(&tb(0, 4000), &rl(100, 50)).unwrap(), tb(0, 4000));
        assert!(deconvolve_affine(&tb(200, 1), &rl(100, 0)).is_err());
    }

    #[test]
    fn pseudo_inverse_examples() {
        assert_eq!(upper_pseudo_inverse(&rl(40, 80), &int(2000)).unwrap(), from_us(130));
        assert_eq!(upper_pseudo_inverse(&rl(40, 80), &int(0)).unwrap(), from_us(80));
        assert_eq!(upper_pseudo_inverse(&rl(100, 0), &int(1000)).unwrap(), from_us(10));
        assert!(upper_pseudo_inverse(&rl(100, 0), &int(-1)).is_err());
    }

    #[test]
    fn output_burst_examples() {
        assert_eq!(output_burst(&tb(40, 3000), &int(0), &rl(40, 80)).unwrap(), int(6200));
        assert_eq!(output_burst(&tb(40, 3000), &int(0), &rl(40, 0)).unwrap(), int(3000));
        assert_eq!(output_burst(&tb(20, 1000), &int(2000), &rl(40, 80)).unwrap(), int(3600));
    }

    #[test]
    fn constructors_validate() {
        assert!(TokenBucket::new(int(-1), int(0)).is_err());
        assert!(RateLatency::new(int(0), int(0)).is_err());
        assert!(Impulse::new(int(-1)).is_err());
        assert!(CappedArrival::new(mbps(10), int(0), tb(10, 0)).is_err());
    }
}
