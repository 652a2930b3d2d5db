//! Joint uplink/downlink power and spectrum-overlap optimization for
//! cellular networks whose uplink and downlink channels partially overlap.
//!
//! Each cell `i` picks an overlap fraction `α_i ∈ [α_min, 1]`: the uplink and
//! downlink channels (each `B` Hz wide at `α = 0`) are widened to `(1+α)B`
//! and share `2αB` of spectrum. `α = 0` is half duplex, `α = 1` full duplex.
//! Leakage between the two directions is governed by the matched-filter
//! factors in [`spectral`], rates by [`link`], and the joint allocation is
//! found with the barrier method in [`ipm`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod harness;
pub mod ipm;
pub mod link;
pub mod network;
pub mod quadrature;
pub mod schemes;
pub mod spectral;

pub use error::{Error, Result};
pub use harness::{
    alpha_histogram, emit_csv, run_sweep, AlphaHistogram, DropRecord, ExperimentConfig,
    SweepOutput, SweepRecord,
};
pub use ipm::{BarrierSettings, OptimizationResult, ProblemSpec};
pub use link::{DecisionVector, Direction, LinkMetrics, LinkModel, UtilityKind};
pub use network::{Fading, Layout, NetworkRealization, Point, SystemParams};
pub use schemes::{SchemeConfig, SchemeKind, SchemeResult};
pub use spectral::{PulseKind, PulseOverlapProfile, PulseSpec};
