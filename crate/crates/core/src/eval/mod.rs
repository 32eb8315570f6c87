//! Metrics and theory checks.

pub mod metrics;
pub mod sweep;

pub use metrics::*;
pub use sweep::*;
