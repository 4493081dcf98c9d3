//! Problem-specific instances, closed-form updates and generators.

pub mod anomaly;
pub mod phase_retrieval;
