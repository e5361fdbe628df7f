//! Packet-level simulation of the output-port pipeline: interleaved
//! regulators per input port and class, CDT/A/B/BE class queues with credit
//! based shapers and non-preemptive strict-priority selection.

use thiserror::Error;

use crate::network::ModelError;

pub mod adversarial;
pub mod check;
pub mod compare;
pub mod engine;
pub mod random;
pub mod scenario;
pub mod trace;

pub use adversarial::{adversarial_path_scenario, adversarial_scenario, Adversarial};
pub use compare::{compare, render_comparison_csv, render_comparison_table, Comparison, ComparisonRow, Quantity};
pub use check::{conformance_check, worst_observed, CheckError, Metric, Violation};
pub use engine::run;
pub use scenario::{BeInjection, CdtInjection, DelayPolicy, PacketInjection, Scenario};
pub use trace::{cbfs_queue_name, credit_name, ir_queue_name, HopLog, PacketRecord, SimTrace};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unknown flow {0}")]
    UnknownFlow(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("non-integral duration in picoseconds: {0}")]
    NonIntegral(String),
    #[error("arrivals violate their envelope: {0}")]
    Nonconforming(String),
    #[error("more than {0} packets")]
    PacketCap(usize),
    #[error("spec has errors: {0}")]
    InvalidSpec(String),
}
