//! Monte-Carlo estimation of the restricted uniform inequality of gradients
//! (RUIG) and the stage-one budget it implies.
//!
//! RUIG with tuple `(ε, α, γ)` asks that for every `x` with `‖x − x*‖² > ε`, a
//! uniformly drawn component satisfies `‖∇f_i(x)‖² ≥ α ‖x − x*‖²` with
//! probability at least `γ`. The estimator here probes finitely many points
//! and reports the smallest empirical pass fraction, so it can only ever
//! falsify a claimed tuple, not prove one.

use std::io::{self, Write};

use rand::Rng as _;
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{dist_sq, norm_sq};
use crate::optimizers::OptimizerState;
use crate::problems::ProblemInstance;
use crate::rng::{self, Rng};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuigError {
    #[error("the instance has no known minimizer")]
    MissingMinimizer,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

fn invalid(name: &'static str, reason: impl Into<String>) -> RuigError {
    RuigError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuigEstimate<T> {
    pub epsilon: T,
    pub alpha: T,
    /// Minimum over probed points of the per-point empirical pass fraction.
    pub gamma: T,
    pub samples_per_point: usize,
    pub points_probed: usize,
    /// 95% normal-approximation binomial half-width at `gamma`.
    pub gamma_ci_halfwidth: T,
}

/// `1.96 √(γ(1−γ)/samples)`.
pub fn binomial_ci_halfwidth<T: Scalar>(gamma: T, samples: usize) -> T {
    T::of(1.96) * (gamma * (T::one() - gamma) / T::of(samples as f64)).sqrt()
}

/// Points strictly outside the `ε`-ball around `center`: uniform directions
/// and radii log-uniform in `[1.01 √ε, 10 √(ε d)]`. Point `k` draws from its
/// own stream, so the set does not depend on how it is consumed.
pub fn sample_probe_points<T: Scalar>(
    center: &[T],
    epsilon: T,
    count: usize,
    seed: u64,
) -> Vec<Vec<T>> {
    let d = center.len();
    let lo = (T::of(1.01) * epsilon.sqrt()).to_f64_lossy().ln();
    let hi = (T::of(10.0) * (epsilon * T::of(d as f64)).sqrt())
        .to_f64_lossy()
        .ln();
    (0..count)
        .map(|k| {
            let mut r = point_rng(seed, k);
            let radius = T::of(r.random_range(lo..=hi).exp());
            let mut dir: Vec<T> = rng::gaussian_vec(&mut r, d);
            let norm = norm_sq(&dir).sqrt();
            for (v, &c) in dir.iter_mut().zip(center) {
                *v = c + radius * *v / norm;
            }
            dir
        })
        .collect()
}

fn point_rng(seed: u64, k: usize) -> Rng {
    rng::stream(rng::derive_seed(seed, k as u64), 0)
}

fn index_rng(seed: u64, k: usize) -> Rng {
    rng::stream(rng::derive_seed(seed, k as u64), 1)
}

/// Pass fractions at one point for each `alpha`, all computed from the same
/// `samples` indices so the fractions are monotone in `alpha`.
pub fn probe_fractions<T: Scalar>(
    problem: &dyn ProblemInstance<T>,
    x: &[T],
    x_star: &[T],
    alphas: &[T],
    samples: usize,
    rng: &mut Rng,
) -> Vec<T> {
    let n = problem.component_count();
    let mut g = vec![T::zero(); problem.dimension()];
    let norms: Vec<T> = (0..n)
        .map(|i| {
            problem.component_grad(i, x, &mut g);
            norm_sq(&g)
        })
        .collect();
    let r2 = dist_sq(x, x_star);
    let mut hits = vec![0usize; alphas.len()];
    for _ in 0..samples {
        let gi = norms[rng.random_range(0..n)];
        for (h, &a) in hits.iter_mut().zip(alphas) {
            if gi >= a * r2 {
                *h += 1;
            }
        }
    }
    hits.into_iter()
        .map(|h| T::of(h as f64 / samples as f64))
        .collect()
}

/// Per-point pass fractions (`points × alphas`) at explicit probe points.
pub fn fractions_at_points<T: Scalar>(
    problem: &dyn ProblemInstance<T>,
    points: &[Vec<T>],
    alphas: &[T],
    samples: usize,
    seed: u64,
) -> Result<Vec<Vec<T>>, RuigError> {
    let xs = problem
        .info()
        .minimizer
        .clone()
        .ok_or(RuigError::MissingMinimizer)?;
    if samples == 0 {
        return Err(invalid("samples", "must be >= 1"));
    }
    Ok(points
        .par_iter()
        .enumerate()
        .map(|(k, x)| probe_fractions(problem, x, &xs, alphas, samples, &mut index_rng(seed, k)))
        .collect())
}

/// One estimate per `alpha`; `gamma` is the minimum pass fraction over
/// `points` probe points outside the `ε`-ball.
pub fn estimate_ruig<T: Scalar>(
    problem: &dyn ProblemInstance<T>,
    epsilon: T,
    alphas: &[T],
    points: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<RuigEstimate<T>>, RuigError> {
    let xs = problem
        .info()
        .minimizer
        .as_deref()
        .ok_or(RuigError::MissingMinimizer)?;
    if !(epsilon > T::zero()) {
        return Err(invalid("epsilon", "must be > 0"));
    }
    if points == 0 {
        return Err(invalid("points", "must be >= 1"));
    }
    if alphas.iter().any(|a| !(*a > T::zero())) {
        return Err(invalid("alpha", "every alpha must be > 0"));
    }
    let pts = sample_probe_points(xs, epsilon, points, seed);
    let fr = fractions_at_points(problem, &pts, alphas, samples, seed)?;
    Ok(alphas
        .iter()
        .enumerate()
        .map(|(j, &alpha)| {
            let gamma = fr.iter().map(|row| row[j]).fold(T::one(), T::min);
            RuigEstimate {
                epsilon,
                alpha,
                gamma,
                samples_per_point: samples,
                points_probed: points,
                gamma_ci_halfwidth: binomial_ci_halfwidth(gamma, samples),
            }
        })
        .collect())
}

pub fn write_ruig_csv<T: Scalar, W: Write>(mut w: W, estimates: &[RuigEstimate<T>]) -> io::Result<()> {
    writeln!(w, "alpha,gamma,ci")?;
    for e in estimates {
        writeln!(w, "{:e},{:e},{:e}", e.alpha, e.gamma, e.gamma_ci_halfwidth)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageOneBudget<T> {
    /// Iterations after which `b_N > C` or the ε-ball was visited, w.h.p.
    pub n: u64,
    pub c: T,
    pub delta: T,
    /// Bernstein failure probability `δ₁`.
    pub failure_prob: T,
    /// `b0 >= C`: nothing left to grow.
    pub stage_one_complete: bool,
}

/// `exp(−δ² / (2 (N γ (1 − γ) + δ)))`.
pub fn bernstein_failure_probability<T: Scalar>(n: u64, gamma: T, delta: T) -> T {
    let var = T::of(n as f64) * gamma * (T::one() - gamma);
    (-(delta * delta) / (T::of(2.0) * (var + delta))).exp()
}

fn base_count<T: Scalar>(b0: T, c: T, est: &RuigEstimate<T>) -> T {
    ((c * c - b0 * b0) / (est.alpha * est.gamma * est.epsilon)).ceil() + T::one()
}

/// `√(4 γ (1 − γ) N₀ ln N₀)` with `N₀ = ⌈(C² − b₀²)/(αγε)⌉ + 1`; falls back to
/// `max(2 ln N₀, 1)` when that vanishes (e.g. `γ = 1`).
pub fn default_delta<T: Scalar>(b0: T, c: T, est: &RuigEstimate<T>) -> T {
    let n0 = base_count(b0, c, est).max(T::one());
    let g = est.gamma;
    let d = (T::of(4.0) * g * (T::one() - g) * n0 * n0.ln()).sqrt();
    if d > T::zero() {
        d
    } else {
        (T::of(2.0) * n0.ln()).max(T::one())
    }
}

/// `N = ⌈(C² − b₀²)/(αγε) + δ/γ⌉ + 1` and its failure probability.
pub fn stage_one_budget<T: Scalar>(
    b0: T,
    c: T,
    est: &RuigEstimate<T>,
    delta: T,
) -> Result<StageOneBudget<T>, RuigError> {
    if !(b0 > T::zero()) {
        return Err(invalid("b0", "must be > 0"));
    }
    if !(delta > T::zero()) {
        return Err(invalid("delta", "must be > 0"));
    }
    if !(est.gamma > T::zero() && est.gamma <= T::one()) {
        return Err(invalid("gamma", "must lie in (0, 1]"));
    }
    if c <= b0 {
        return Ok(StageOneBudget {
            n: 0,
            c,
            delta,
            failure_prob: T::zero(),
            stage_one_complete: true,
        });
    }
    let raw = ((c * c - b0 * b0) / (est.alpha * est.gamma * est.epsilon) + delta / est.gamma)
        .ceil()
        + T::one();
    let n = raw
        .to_u64()
        .filter(|_| raw.is_finite())
        .ok_or_else(|| invalid("N", format!("budget {raw} does not fit in u64")))?;
    Ok(StageOneBudget {
        n,
        c,
        delta,
        failure_prob: bernstein_failure_probability(n, est.gamma, delta),
        stage_one_complete: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageOneOutcome<T> {
    pub runs: usize,
    pub successes: usize,
    pub frequency: T,
    pub ci_halfwidth: T,
}

/// Runs stochastic AdaGrad-Norm for `budget.n` steps from each seed and
/// counts runs ending with `b_N > C` or having visited `‖x − x*‖² ≤ ε`.
///
/// A run stops early once either event happens, since `b` never decreases.
pub fn verify_stage_one<T: Scalar>(
    problem: &dyn ProblemInstance<T>,
    budget: &StageOneBudget<T>,
    epsilon: T,
    eta: T,
    b0: T,
    seeds: &[u64],
) -> Result<StageOneOutcome<T>, RuigError> {
    if seeds.is_empty() {
        return Err(invalid("runs", "must be >= 1"));
    }
    if problem.info().minimizer.is_none() {
        return Err(RuigError::MissingMinimizer);
    }
    let n = problem.component_count();
    let x0 = problem.default_start();
    let successes = seeds
        .par_iter()
        .map(|&seed| -> Result<bool, RuigError> {
            let mut st = OptimizerState::new(x0.clone(), b0, eta)
                .map_err(|e| invalid("b0/eta", e.to_string()))?;
            let mut r = rng::stream(seed, 0);
            let mut g = vec![T::zero(); x0.len()];
            for _ in 0..budget.n {
                if st.b > budget.c || problem.err_sq(&st.x).is_some_and(|e| e <= epsilon) {
                    return Ok(true);
                }
                problem.component_grad(r.random_range(0..n), &st.x, &mut g);
                if st.adagrad_norm_step_mut(&g).is_err() {
                    return Ok(false);
                }
            }
            Ok(st.b > budget.c || problem.err_sq(&st.x).is_some_and(|e| e <= epsilon))
        })
        .collect::<Result<Vec<bool>, _>>()?
        .into_iter()
        .filter(|&ok| ok)
        .count();
    let frequency = T::of(successes as f64 / seeds.len() as f64);
    Ok(StageOneOutcome {
        runs: seeds.len(),
        successes,
        frequency,
        ci_halfwidth: binomial_ci_halfwidth(frequency, seeds.len()),
    })
}
