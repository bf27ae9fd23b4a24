//! Randomized probes of the standing assumptions on an instance.
//!
//! Each probe evaluates one inequality on seeded random points and reports the
//! worst value seen. None of them proves anything; they make the constants an
//! instance claims falsifiable.

use rand::Rng as _;

use crate::linalg::{dot, norm_sq, sub};
use crate::rng::{self, Rng};
use crate::Scalar;

use super::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult<T> {
    /// Worst value of the probed quantity (max or min, see each probe).
    pub worst: T,
    pub samples: usize,
}

fn anchor<T: Scalar>(p: &dyn ProblemInstance<T>) -> Vec<T> {
    p.info()
        .minimizer
        .clone()
        .unwrap_or_else(|| p.default_start())
}

fn random_point<T: Scalar>(center: &[T], rng: &mut Rng) -> Vec<T> {
    let scale: f64 = rng.random_range(0.1..3.0);
    center
        .iter()
        .map(|&c| c + T::of(scale) * rng::gaussian::<T>(rng))
        .collect()
}

/// Max over random `(i, x, y)` of `‖∇f_i(x) − ∇f_i(y)‖ / (L_i ‖x − y‖)`;
/// the smoothness assumption holds on the sample when this is `<= 1`.
pub fn probe_smoothness<T: Scalar>(
    p: &dyn ProblemInstance<T>,
    pairs: usize,
    seed: u64,
) -> ProbeResult<T> {
    let mut rng = rng::stream(seed, 100);
    let c = anchor(p);
    let d = p.dimension();
    let (mut gx, mut gy) = (vec![T::zero(); d], vec![T::zero(); d]);
    let mut worst = T::zero();
    for _ in 0..pairs {
        let i = rng.random_range(0..p.component_count());
        let x = random_point(&c, &mut rng);
        let y = random_point(&c, &mut rng);
        p.component_grad(i, &x, &mut gx);
        p.component_grad(i, &y, &mut gy);
        let num = norm_sq(&sub(&gx, &gy)).sqrt();
        let den = p.info().component_smoothness[i] * norm_sq(&sub(&x, &y)).sqrt();
        worst = worst.max(num / den);
    }
    ProbeResult {
        worst,
        samples: pairs,
    }
}

/// Min over random pairs of `⟨∇F(x) − ∇F(y), x − y⟩ / ‖x − y‖²`.
pub fn probe_strong_convexity<T: Scalar>(
    p: &dyn ProblemInstance<T>,
    pairs: usize,
    seed: u64,
) -> ProbeResult<T> {
    let mut rng = rng::stream(seed, 101);
    let c = anchor(p);
    let d = p.dimension();
    let (mut gx, mut gy) = (vec![T::zero(); d], vec![T::zero(); d]);
    let mut worst = T::infinity();
    for _ in 0..pairs {
        let x = random_point(&c, &mut rng);
        let y = random_point(&c, &mut rng);
        p.grad(&x, &mut gx);
        p.grad(&y, &mut gy);
        let diff = sub(&x, &y);
        worst = worst.min(dot(&sub(&gx, &gy), &diff) / norm_sq(&diff));
    }
    ProbeResult {
        worst,
        samples: pairs,
    }
}

/// Min over random points of `‖∇F(x)‖² / (2 (F(x) − F*))`.
pub fn probe_pl_ratio<T: Scalar>(
    p: &dyn ProblemInstance<T>,
    points: usize,
    seed: u64,
) -> ProbeResult<T> {
    let mut rng = rng::stream(seed, 102);
    let c = anchor(p);
    let pts: Vec<Vec<T>> = (0..points).map(|_| random_point(&c, &mut rng)).collect();
    ProbeResult {
        worst: super::empirical_pl_constant(p, &pts).unwrap_or(T::infinity()),
        samples: points,
    }
}

/// `max_i ‖∇f_i(x*)‖`, or `None` without a known minimizer.
pub fn probe_stationarity<T: Scalar>(p: &dyn ProblemInstance<T>) -> Option<T> {
    let xs = p.info().minimizer.as_deref()?;
    let mut g = vec![T::zero(); p.dimension()];
    Some(
        (0..p.component_count())
            .map(|i| {
                p.component_grad(i, xs, &mut g);
                norm_sq(&g).sqrt()
            })
            .fold(T::zero(), T::max),
    )
}

/// Max relative gap between `(1/n) Σ ∇f_i(x)` and `∇F(x)`.
pub fn probe_unbiasedness<T: Scalar>(
    p: &dyn ProblemInstance<T>,
    points: usize,
    seed: u64,
) -> ProbeResult<T> {
    let mut rng = rng::stream(seed, 103);
    let c = anchor(p);
    let d = p.dimension();
    let n = p.component_count();
    let all: Vec<usize> = (0..n).collect();
    let (mut avg, mut full) = (vec![T::zero(); d], vec![T::zero(); d]);
    let mut worst = T::zero();
    for _ in 0..points {
        let x = random_point(&c, &mut rng);
        p.batch_grad(&all, &x, &mut avg);
        p.grad(&x, &mut full);
        let err = norm_sq(&sub(&avg, &full)).sqrt();
        worst = worst.max(err / T::one().max(norm_sq(&full).sqrt()));
    }
    ProbeResult {
        worst,
        samples: points,
    }
}

/// Max over random `(i, x, y)` of
/// `(‖∇f_i(x) − ∇f_i(y)‖² − L_i ⟨x − y, ∇f_i(x) − ∇f_i(y)⟩) / (L_i² ‖x − y‖²)`,
/// which is `<= 0` for convex `L_i`-smooth components.
pub fn probe_cocoercivity<T: Scalar>(
    p: &dyn ProblemInstance<T>,
    pairs: usize,
    seed: u64,
) -> ProbeResult<T> {
    let mut rng = rng::stream(seed, 104);
    let c = anchor(p);
    let d = p.dimension();
    let (mut gx, mut gy) = (vec![T::zero(); d], vec![T::zero(); d]);
    let mut worst = T::neg_infinity();
    for _ in 0..pairs {
        let i = rng.random_range(0..p.component_count());
        let li = p.info().component_smoothness[i];
        let x = random_point(&c, &mut rng);
        let y = random_point(&c, &mut rng);
        p.component_grad(i, &x, &mut gx);
        p.component_grad(i, &y, &mut gy);
        let dg = sub(&gx, &gy);
        let dx = sub(&x, &y);
        let v = (norm_sq(&dg) - li * dot(&dx, &dg)) / (li * li * norm_sq(&dx));
        worst = worst.max(v);
    }
    ProbeResult {
        worst,
        samples: pairs,
    }
}

/// Min over random pairs of
/// `(⟨∇F(x) − ∇F(y), x − y⟩ − μL/(μ+L) ‖x − y‖² − ‖∇F(x) − ∇F(y)‖²/(μ+L)) / (L ‖x − y‖²)`,
/// which is `>= 0` for `μ`-strongly convex `L`-smooth `F`.
pub fn probe_strong_cocoercivity<T: Scalar>(
    p: &dyn ProblemInstance<T>,
    pairs: usize,
    seed: u64,
) -> ProbeResult<T> {
    let mut rng = rng::stream(seed, 105);
    let c = anchor(p);
    let d = p.dimension();
    let mu = p.info().mu;
    let l = p.info().smoothness;
    let (mut gx, mut gy) = (vec![T::zero(); d], vec![T::zero(); d]);
    let mut worst = T::infinity();
    for _ in 0..pairs {
        let x = random_point(&c, &mut rng);
        let y = random_point(&c, &mut rng);
        p.grad(&x, &mut gx);
        p.grad(&y, &mut gy);
        let dg = sub(&gx, &gy);
        let dx = sub(&x, &y);
        let nx = norm_sq(&dx);
        let lhs = dot(&dg, &dx);
        let rhs = mu * l / (mu + l) * nx + norm_sq(&dg) / (mu + l);
        worst = worst.min((lhs - rhs) / (l * nx));
    }
    ProbeResult {
        worst,
        samples: pairs,
    }
}
