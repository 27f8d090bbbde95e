//! Cycle-level simulation of the PAE array.

mod config_report;
mod report;
mod sim;

pub use config_report::{config_report, parse_resource_line};
pub use report::{ChannelStats, PaeStats, SimReport, StreamStats};
pub use sim::{build_array, build_array_with, CycleSummary, SimOptions, Simulator};

use crate::config::Diagnostic;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("dangling reference: {0}")]
    Dangling(String),
    #[error("configuration has {} error(s); first: {}", .0.len(), .0.first().map(ToString::to_string).unwrap_or_default())]
    InvalidConfig(Vec<Diagnostic>),
    #[error("RAM `{0}` has a host-memory preload that was not resolved")]
    UnresolvedPreload(String),
    #[error("unknown stream `{0}`")]
    UnknownStream(String),
    #[error("stream `{0}` used in the wrong direction")]
    WrongDirection(String),
    #[error("RAM `{ram}` accessed at address {address} (capacity {capacity}) in cycle {cycle}")]
    AddressOutOfRange { ram: String, address: i64, capacity: u32, cycle: u64 },
    #[error("no idle state within {max_cycles} cycles; elements with pending work: {}", .stalled.join(", "))]
    Timeout { max_cycles: u64, stalled: Vec<String> },
    #[error("deadlock at cycle {cycle}: data stranded at {}", .stalled.join(", "))]
    Deadlock { cycle: u64, stalled: Vec<String> },
    #[error("tracing was not enabled when the simulator was built")]
    TracingDisabled,
    #[error("{0}")]
    InvalidArgument(String),
}
