//! AdaGrad-Norm and the machinery to check its linear-convergence guarantees.
//!
//! The crate is organised around four pieces:
//!
//! - [`problems`]: objectives with full and per-component gradient oracles and
//!   their known constants (smoothness `L`, strong convexity / PL constant `mu`).
//! - [`optimizers`]: AdaGrad-Norm and the constant / square-root-decay baselines,
//!   producing per-iteration [`Trace`](optimizers::Trace)s.
//! - [`ruig`]: Monte-Carlo estimation of the restricted uniform inequality of
//!   gradients and the stage-one (accumulator growth) budget.
//! - [`bounds`]: closed-form iteration budgets and trace verifiers for the
//!   accumulator and error bounds.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! at the crate root fix the scalar to `f64`, which is what experiments use.

// `!(x > 0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod linalg;
pub mod optimizers;
pub mod problems;
pub mod rng;
pub mod ruig;
mod scalar;

pub use scalar::Scalar;

pub type LeastSquares64 = problems::LeastSquares<f64>;
pub type TwoLayerRelu64 = problems::TwoLayerRelu<f64>;
pub type ProblemInfo64 = problems::ProblemInfo<f64>;
pub type OptimizerState64 = optimizers::OptimizerState<f64>;
pub type RunConfig64 = optimizers::RunConfig<f64>;
pub type Trace64 = optimizers::Trace<f64>;
pub type TraceRecord64 = optimizers::TraceRecord<f64>;
pub type RuigEstimate64 = ruig::RuigEstimate<f64>;
pub type StageOneBudget64 = ruig::StageOneBudget<f64>;
pub type IterationBudget64 = bounds::IterationBudget<f64>;
pub type BoundCheckReport64 = bounds::BoundCheckReport<f64>;
