//! Objectives with full and stochastic gradient oracles.
//!
//! A [`ProblemInstance`] is immutable once built: sampling of component
//! indices happens in the optimizer, so one instance can be shared by any
//! number of concurrent runs.

mod assumptions;
mod least_squares;
mod relu;

use std::fmt;

use thiserror::Error;

use crate::Scalar;

pub use assumptions::{
    probe_cocoercivity, probe_pl_ratio, probe_smoothness, probe_stationarity,
    probe_strong_convexity, probe_strong_cocoercivity, probe_unbiasedness, ProbeResult,
};
pub use least_squares::{
    make_least_squares, make_least_squares_degenerate, make_regularized_strongly_convex,
    LeastSquares, LeastSquaresParts,
};
pub use relu::{make_two_layer_relu, TwoLayerRelu};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error(
        "least squares with n = {n} < d = {d} has mu = 0; use the degenerate constructor to opt in"
    )]
    RankDeficient { n: usize, d: usize },
    #[error("buffer `{name}` has length {got}, expected {expected}")]
    ShapeMismatch {
        name: &'static str,
        got: usize,
        expected: usize,
    },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> ProblemError {
    ProblemError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    StronglyConvex,
    PlNonconvex,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::StronglyConvex => "strongly-convex",
            Flavor::PlNonconvex => "pl-nonconvex",
        })
    }
}

/// Label noise for the least-squares generator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum NoiseModel {
    #[default]
    Noiseless,
    /// `y = A x* + sigma z` with `z` standard Gaussian.
    AdditiveGaussian { sigma: f64 },
}

impl NoiseModel {
    /// `sigma = 0` collapses to [`NoiseModel::Noiseless`].
    pub fn gaussian(sigma: f64) -> Result<Self, ProblemError> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid("sigma", format!("must be finite and >= 0, got {sigma}")));
        }
        Ok(if sigma == 0.0 {
            NoiseModel::Noiseless
        } else {
            NoiseModel::AdditiveGaussian { sigma }
        })
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseModel::Noiseless => 0.0,
            NoiseModel::AdditiveGaussian { sigma } => sigma,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        matches!(self, NoiseModel::Noiseless)
    }
}

/// Known constants of an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInfo<T> {
    pub name: String,
    pub dimension: usize,
    pub component_count: usize,
    /// `L = sup_i L_i`.
    pub smoothness: T,
    /// Per-component gradient Lipschitz constants `L_i`.
    pub component_smoothness: Vec<T>,
    /// Strong convexity or PL constant; zero when unknown.
    pub mu: T,
    pub flavor: Flavor,
    pub minimizer: Option<Vec<T>>,
    pub optimal_value: T,
    /// Every component gradient vanishes at the minimizer.
    pub interpolating: bool,
    /// `min_j mu_j` when every component is strongly convex.
    pub min_component_mu: Option<T>,
}

pub trait ProblemInstance<T: Scalar>: Send + Sync {
    fn info(&self) -> &ProblemInfo<T>;

    fn value(&self, x: &[T]) -> T;

    fn grad(&self, x: &[T], out: &mut [T]);

    fn component_value(&self, i: usize, x: &[T]) -> T;

    fn component_grad(&self, i: usize, x: &[T], out: &mut [T]);

    /// Starting point used when a run does not supply one.
    fn default_start(&self) -> Vec<T>;

    /// `F(x) - F*`.
    fn gap(&self, x: &[T]) -> T {
        self.value(x) - self.info().optimal_value
    }

    /// Average of the component gradients over an index multiset.
    fn batch_grad(&self, indices: &[usize], x: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        let mut buf = vec![T::zero(); out.len()];
        for &i in indices {
            self.component_grad(i, x, &mut buf);
            crate::linalg::axpy(T::one(), &buf, out);
        }
        crate::linalg::scale(T::one() / T::of(indices.len() as f64), out);
    }

    fn dimension(&self) -> usize {
        self.info().dimension
    }

    fn component_count(&self) -> usize {
        self.info().component_count
    }

    /// `‖x − x*‖²` when the minimizer is known.
    fn err_sq(&self, x: &[T]) -> Option<T> {
        self.info()
            .minimizer
            .as_deref()
            .map(|xs| crate::linalg::dist_sq(x, xs))
    }
}

/// Smallest observed `‖∇F(x)‖² / (2 (F(x) − F*))` over the given points.
///
/// The over-parameterized network has no closed-form PL constant, so this
/// serves as an empirical lower-bound fit. Points at (numerical) optimality
/// are skipped.
pub fn empirical_pl_constant<T: Scalar>(
    problem: &dyn ProblemInstance<T>,
    points: &[Vec<T>],
) -> Option<T> {
    let mut g = vec![T::zero(); problem.dimension()];
    points
        .iter()
        .filter_map(|x| {
            let gap = problem.gap(x);
            if gap <= T::of(1e-300) {
                return None;
            }
            problem.grad(x, &mut g);
            Some(crate::linalg::norm_sq(&g) / (T::of(2.0) * gap))
        })
        .fold(None, |acc: Option<T>, r| Some(acc.map_or(r, |a| a.min(r))))
}
