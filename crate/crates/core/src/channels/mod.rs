//! Channels on boxes, their distinguishability, the dominated extension of a
//! de Finetti box, and channels invisible to round-wise non-signaling boxes.

mod channel;
mod counterexample;
mod dominated;

pub use channel::{
    apply, diamond_over_polytope, distinguishability, pattern_count, Channel, DistinguishReport,
};
pub use counterexample::{
    counterexample_channels, distinguisher_box, distinguisher_box_ab, statistic_channel,
    verify_counterexample, verify_counterexample_with, wt_statistic, Counterexample,
    CounterexampleReport,
};
pub use dominated::{build_dominated_extension, dominated_chain, ChainReport, DominatedExtension};
