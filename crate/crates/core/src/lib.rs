//! Worst-case latency and backlog analysis for TSN output ports that combine
//! credit-based shapers with per-input interleaved regulators, together with
//! a packet-level simulator that checks the bounds against concrete traces.

pub mod bounds;
pub mod curve;
pub mod network;
pub mod rational;
pub mod sim;

pub use bounds::{BoundsError, BoundsReport};
pub use curve::{Arrival, Bits, CappedArrival, Curve, CurveError, Impulse, RateLatency, Service, TokenBucket};
pub use network::{Class, Diagnostic, FlowSpec, LinkId, LinkParams, ModelError, NetworkSpec, Regulator, Role, Severity};
pub use rational::Rational;
