//! Two-stage hybrid beamforming for multi-group uplink SC-FDE: one-ring
//! channel statistics, generalized eigenbeamformers, hardware-constrained
//! analog designs, digital equalizers, link-level capacity and channel
//! estimation.

// `!(x > 0.0)` is how NaN gets rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chanest;
pub mod channel;
pub mod constrained;
pub mod digital;
pub mod error;
pub mod geb;
pub mod linksim;
pub mod metrics;
pub mod numerics;
pub mod pipeline;
pub mod rng;
pub mod statistics;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use channel::{ChannelRealization, CovarianceSet, GroupProfile, Mpc, Scenario, UserProfile};
pub use constrained::{AmTrace, Connection, ConstrainedBeamformer};
pub use error::{Error, Result};
pub use geb::UnconstrainedBeamformer;
pub use linksim::{CapacityEstimate, CombinerKind};
pub use metrics::{EstimatorKind, SweepConfig, SweepResult};
pub use numerics::{CMat, CVec};
pub use pipeline::{BeamformerKind, DesignSettings};
pub use statistics::{GroupStatistics, ReducedStatistics};
