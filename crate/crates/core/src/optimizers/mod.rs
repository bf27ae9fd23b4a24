//! AdaGrad-Norm and the fixed-schedule baselines it is compared against.
//!
//! A run samples component indices uniformly with replacement from a seeded
//! ChaCha stream, so equal seeds give bit-identical traces.

mod trace;

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use thiserror::Error;

use crate::linalg::{axpy, is_finite, norm_sq};
use crate::problems::ProblemInstance;
use crate::rng;
use crate::Scalar;

pub use trace::{best_error, FinalSnapshot, Trace, TraceMeta, TraceParseError, TraceRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("gradient has a non-finite entry")]
    NonFiniteGradient,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("unknown mode `{0}`")]
    UnknownMode(String),
    #[error("trace has no records")]
    EmptyTrace,
}

fn invalid(name: &'static str, reason: impl Into<String>) -> OptimizerError {
    OptimizerError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    AdagradNorm,
    SgdConst,
    SgdSqrt,
    GdConst,
    GdSqrt,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::AdagradNorm,
        Method::SgdConst,
        Method::SgdSqrt,
        Method::GdConst,
        Method::GdSqrt,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::AdagradNorm => "adagrad_norm",
            Method::SgdConst => "sgd_const",
            Method::SgdSqrt => "sgd_sqrt",
            Method::GdConst => "gd_const",
            Method::GdSqrt => "gd_sqrt",
        }
    }

    /// The mode a method name implies; AdaGrad-Norm runs in either.
    pub fn implied_mode(&self) -> Option<Mode> {
        match self {
            Method::AdagradNorm => None,
            Method::SgdConst | Method::SgdSqrt => Some(Mode::Stochastic),
            Method::GdConst | Method::GdSqrt => Some(Mode::Batch),
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, Method::AdagradNorm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = OptimizerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| OptimizerError::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// `G_j` is a (mini-batch) component gradient at a sampled index.
    Stochastic,
    /// `G_j = ∇F(x_j)`.
    Batch,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Stochastic => "stochastic",
            Mode::Batch => "batch",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = OptimizerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stochastic" => Ok(Mode::Stochastic),
            "batch" => Ok(Mode::Batch),
            other => Err(OptimizerError::UnknownMode(other.to_string())),
        }
    }
}

/// `sqrt(b² + g²)`.
pub fn square_form_update<T: Scalar>(b: T, grad_norm_sq: T) -> T {
    (b * b + grad_norm_sq).sqrt()
}

/// `b + g² / (b + b')`, evaluated without forming `b'` from itself: the
/// denominator uses the square form, so the two agree up to rounding.
pub fn solution_form_update<T: Scalar>(b: T, grad_norm_sq: T) -> T {
    b + grad_norm_sq / (b + square_form_update(b, grad_norm_sq))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub x: Vec<T>,
    /// Current stepsize denominator `b_t`.
    pub b: T,
    pub eta: T,
    pub t: usize,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(x: Vec<T>, b0: T, eta: T) -> Result<Self, OptimizerError> {
        if !(b0 > T::zero()) || !b0.is_finite() {
            return Err(invalid("b0", format!("must be finite and > 0, got {b0}")));
        }
        if !(eta > T::zero()) || !eta.is_finite() {
            return Err(invalid("eta", format!("must be finite and > 0, got {eta}")));
        }
        Ok(OptimizerState { x, b: b0, eta, t: 0 })
    }

    /// One AdaGrad-Norm step in place; returns `‖G‖²`.
    pub fn adagrad_norm_step_mut(&mut self, g: &[T]) -> Result<T, OptimizerError> {
        if !is_finite(g) {
            return Err(OptimizerError::NonFiniteGradient);
        }
        let gn = norm_sq(g);
        self.b = square_form_update(self.b, gn);
        axpy(-self.eta / self.b, g, &mut self.x);
        self.t += 1;
        Ok(gn)
    }

    /// A step of fixed size `eta / denom`; `b` records `denom`.
    pub fn fixed_step_mut(&mut self, g: &[T], denom: T) -> Result<T, OptimizerError> {
        if !is_finite(g) {
            return Err(OptimizerError::NonFiniteGradient);
        }
        self.b = denom;
        axpy(-self.eta / denom, g, &mut self.x);
        self.t += 1;
        Ok(norm_sq(g))
    }
}

/// Functional form of one AdaGrad-Norm step.
pub fn adagrad_norm_step<T: Scalar>(
    state: &OptimizerState<T>,
    g: &[T],
) -> Result<OptimizerState<T>, OptimizerError> {
    if !(state.b > T::zero()) {
        return Err(invalid("b", format!("must be > 0, got {}", state.b)));
    }
    let mut next = state.clone();
    next.adagrad_norm_step_mut(g)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig<T> {
    pub method: Method,
    pub mode: Mode,
    pub eta: T,
    pub b0: T,
    /// Indices per stochastic gradient; ignored in batch mode.
    pub batch_size: usize,
    pub max_iters: usize,
    pub stop_tol: T,
    pub seed: u64,
    /// Coefficient `c` of the `b0 + c·√j` baseline schedule.
    pub decay: T,
    /// Keep every `stride`-th record; extrema stay exact.
    pub stride: usize,
    pub divergence_threshold: T,
    pub x0: Option<Vec<T>>,
}

impl<T: Scalar> RunConfig<T> {
    /// Defaults: the mode implied by the method (stochastic for AdaGrad-Norm),
    /// batch size 1, `stop_tol = 0`, decay 0.2, stride 1, threshold 1e12.
    pub fn new(method: Method, eta: T, b0: T, max_iters: usize, seed: u64) -> Self {
        RunConfig {
            method,
            mode: method.implied_mode().unwrap_or(Mode::Stochastic),
            eta,
            b0,
            batch_size: 1,
            max_iters,
            stop_tol: T::zero(),
            seed,
            decay: T::of(0.2),
            stride: 1,
            divergence_threshold: T::of(1e12),
            x0: None,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn with_stop_tol(mut self, stop_tol: T) -> Self {
        self.stop_tol = stop_tol;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_x0(mut self, x0: Vec<T>) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn validate(&self, dimension: usize) -> Result<(), OptimizerError> {
        if let Some(m) = self.method.implied_mode() {
            if m != self.mode {
                return Err(invalid(
                    "mode",
                    format!("{} runs in {} mode, not {}", self.method, m, self.mode),
                ));
            }
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be >= 1"));
        }
        if self.stride == 0 {
            return Err(invalid("stride", "must be >= 1"));
        }
        if !(self.decay >= T::zero()) {
            return Err(invalid("decay", "must be >= 0"));
        }
        if !(self.stop_tol >= T::zero()) {
            return Err(invalid("stop_tol", "must be >= 0"));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != dimension {
                return Err(invalid(
                    "x0",
                    format!("has length {}, expected {dimension}", x0.len()),
                ));
            }
        }
        Ok(())
    }

    /// Stepsize denominator a baseline uses at iteration `j`.
    fn baseline_denominator(&self, j: usize) -> T {
        match self.method {
            Method::SgdSqrt | Method::GdSqrt => self.b0 + self.decay * T::of(j as f64).sqrt(),
            _ => self.b0,
        }
    }
}

/// Runs `cfg.method` on `problem`.
///
/// Iteration `t` evaluates the progress measure at `x_t` (`‖x_t − x*‖²`, or
/// `F(x_t) − F*` without a known minimizer) and stops before stepping if it is
/// at most `stop_tol`, or flags divergence if it exceeds the threshold or is
/// not finite. Otherwise it takes a step and logs a record carrying the
/// pre-step error and the post-step denominator `b_{t+1}`.
pub fn run<T: Scalar>(
    problem: &dyn ProblemInstance<T>,
    cfg: &RunConfig<T>,
) -> Result<Trace<T>, OptimizerError> {
    let d = problem.dimension();
    cfg.validate(d)?;
    let x0 = cfg.x0.clone().unwrap_or_else(|| problem.default_start());
    let mut state = OptimizerState::new(x0, cfg.b0, cfg.eta)?;
    let mut rng = rng::stream(cfg.seed, 0);
    let n = problem.component_count();
    let mut indices = vec![0usize; cfg.batch_size];
    let mut g = vec![T::zero(); d];

    let meta = TraceMeta {
        method: cfg.method,
        mode: cfg.mode,
        problem: problem.info().name.clone(),
        seed: cfg.seed,
        eta: cfg.eta,
        b0: cfg.b0,
        batch_size: cfg.batch_size,
        stride: cfg.stride,
        decay: cfg.decay,
    };
    let mut trace = Trace::empty(meta);
    let mut diverged = false;

    while state.t < cfg.max_iters {
        let t = state.t;
        let err_sq = problem.err_sq(&state.x);
        let gap = problem.gap(&state.x);
        let metric = err_sq.unwrap_or(gap);
        trace.observe(err_sq, gap, state.b);
        if !metric.is_finite() || metric > cfg.divergence_threshold {
            diverged = true;
            break;
        }
        if metric <= cfg.stop_tol {
            break;
        }

        match cfg.mode {
            Mode::Batch => problem.grad(&state.x, &mut g),
            Mode::Stochastic if cfg.batch_size == 1 => {
                problem.component_grad(rng.random_range(0..n), &state.x, &mut g)
            }
            Mode::Stochastic => {
                for i in indices.iter_mut() {
                    *i = rng.random_range(0..n);
                }
                problem.batch_grad(&indices, &state.x, &mut g);
            }
        }

        let step = if cfg.method.is_adaptive() {
            state.adagrad_norm_step_mut(&g)
        } else {
            state.fixed_step_mut(&g, cfg.baseline_denominator(t))
        };
        let grad_norm_sq = match step {
            Ok(v) => v,
            Err(OptimizerError::NonFiniteGradient) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        trace.observe_b(state.b);
        if t % cfg.stride == 0 {
            trace.records.push(TraceRecord {
                t,
                b: state.b,
                err_sq,
                gap,
                grad_norm_sq,
                stepsize: state.eta / state.b,
            });
        }
    }

    let err_sq = problem.err_sq(&state.x);
    let gap = problem.gap(&state.x);
    if !diverged {
        trace.observe(err_sq, gap, state.b);
        let metric = err_sq.unwrap_or(gap);
        diverged = !metric.is_finite() || metric > cfg.divergence_threshold;
    }
    trace.final_state = FinalSnapshot {
        t: state.t,
        b: state.b,
        err_sq,
        gap,
    };
    trace.diverged = diverged;
    Ok(trace)
}
