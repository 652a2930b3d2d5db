//! Interior-point (log-barrier) optimizer.

mod barrier;
mod problem;

pub use barrier::{
    shifted_newton, AffineConstraint, BarrierOutcome, BarrierSettings, BarrierSolver,
    ConstraintSet, NewtonStep, OuterRecord, SmoothObjective,
};
pub use problem::{OptimizationResult, ProblemSpec};
