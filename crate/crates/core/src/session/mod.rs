//! Trace recording, replay and task metrics.

pub mod metrics;
pub mod replay;
pub mod script;
pub mod trace;

pub use metrics::{MetricsAccumulator, MetricsReport};
pub use replay::{compare, compare_table, replay, replay_with, CompareRow, ReplayError, ReplayOutput};
pub use trace::{Trace, TraceError, TraceHeader, TraceRecord};
