use crate::linalg::{self, dot, norm_sq};
use crate::rng;
use crate::Scalar;

use super::{invalid, Flavor, NoiseModel, ProblemError, ProblemInfo, ProblemInstance};

/// `F(x) = (1/n) Σ f_i(x)` with
/// `f_i(x) = ½(⟨a_i, x⟩ − y_i)² + (λ/2)‖x − c‖²`.
///
/// With `λ = 0` this is plain least squares; with `λ > 0` and `c = x*` every
/// component is `λ`-strongly convex and stationary at `x*`.
#[derive(Debug, Clone)]
pub struct LeastSquares<T> {
    rows: Vec<T>,
    labels: Vec<T>,
    ridge: T,
    center: Vec<T>,
    /// `AᵀA/n + λI`, row-major.
    hessian: Vec<T>,
    noise: NoiseModel,
    info: ProblemInfo<T>,
}

/// Explicit data for [`LeastSquares::from_parts`].
#[derive(Debug, Clone)]
pub struct LeastSquaresParts<T> {
    pub name: String,
    pub rows: Vec<T>,
    pub labels: Vec<T>,
    pub n: usize,
    pub d: usize,
    pub ridge: T,
    /// Regularization center; zero when absent.
    pub center: Option<Vec<T>>,
    /// Exact minimizer if known (otherwise solved for).
    pub minimizer: Option<Vec<T>>,
    pub noise: NoiseModel,
    pub allow_degenerate: bool,
}

impl<T: Scalar> LeastSquares<T> {
    pub fn from_parts(parts: LeastSquaresParts<T>) -> Result<Self, ProblemError> {
        let LeastSquaresParts {
            name,
            rows,
            labels,
            n,
            d,
            ridge,
            center,
            minimizer,
            noise,
            allow_degenerate,
        } = parts;
        if n == 0 {
            return Err(invalid("n", "must be >= 1"));
        }
        if d == 0 {
            return Err(invalid("d", "must be >= 1"));
        }
        if !(ridge >= T::zero()) || !ridge.is_finite() {
            return Err(invalid("lambda", "must be finite and >= 0"));
        }
        check_len("rows", rows.len(), n * d)?;
        check_len("labels", labels.len(), n)?;
        let center = center.unwrap_or_else(|| vec![T::zero(); d]);
        check_len("center", center.len(), d)?;
        if ridge == T::zero() && n < d && !allow_degenerate {
            return Err(ProblemError::RankDeficient { n, d });
        }

        let spectrum = linalg::normalized_gram_spectrum(&rows, n, d);
        let full_rank = spectrum.rank == d;
        if ridge == T::zero() && !full_rank && !allow_degenerate {
            return Err(ProblemError::RankDeficient { n, d });
        }

        let mut hessian = linalg::normalized_gram(&rows, n, d);
        for i in 0..d {
            hessian[i * d + i] += ridge;
        }

        let component_smoothness: Vec<T> = rows.chunks(d).map(|a| norm_sq(a) + ridge).collect();
        let smoothness = component_smoothness
            .iter()
            .cloned()
            .fold(T::zero(), T::max);

        let (flavor, mu) = if ridge > T::zero() || full_rank {
            (Flavor::StronglyConvex, T::of(spectrum.min.max(0.0)) + ridge)
        } else {
            // rank-deficient least squares still satisfies PL with the
            // smallest positive eigenvalue
            (Flavor::PlNonconvex, T::of(spectrum.min_positive))
        };

        let component_mu: Vec<T> = rows
            .chunks(d)
            .map(|a| if d == 1 { ridge + a[0] * a[0] } else { ridge })
            .collect();
        let min_mu = component_mu.iter().cloned().fold(T::infinity(), T::min);
        let min_component_mu = (min_mu > T::zero()).then_some(min_mu);

        let minimizer = match minimizer {
            Some(x) => {
                check_len("minimizer", x.len(), d)?;
                x
            }
            None => solve_minimizer(&rows, &labels, n, d, ridge, &center),
        };

        let mut problem = LeastSquares {
            rows,
            labels,
            ridge,
            center,
            hessian,
            noise,
            info: ProblemInfo {
                name,
                dimension: d,
                component_count: n,
                smoothness,
                component_smoothness,
                mu,
                flavor,
                minimizer: None,
                optimal_value: T::zero(),
                interpolating: false,
                min_component_mu,
            },
        };
        problem.info.optimal_value = problem.value(&minimizer);
        problem.info.interpolating = problem.is_stationary_componentwise(&minimizer);
        problem.info.minimizer = Some(minimizer);
        Ok(problem)
    }

    pub fn rows(&self) -> &[T] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[T] {
        let d = self.info.dimension;
        &self.rows[i * d..(i + 1) * d]
    }

    pub fn labels(&self) -> &[T] {
        &self.labels
    }

    pub fn ridge(&self) -> T {
        self.ridge
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    /// `min_j ‖a_j‖²`, the scale used for the Gaussian RUIG table.
    pub fn min_row_norm_sq(&self) -> T {
        self.rows
            .chunks(self.info.dimension)
            .map(norm_sq)
            .fold(T::infinity(), T::min)
    }

    fn residual(&self, i: usize, x: &[T]) -> T {
        dot(self.row(i), x) - self.labels[i]
    }

    fn is_stationary_componentwise(&self, x: &[T]) -> bool {
        let mut g = vec![T::zero(); self.info.dimension];
        let scale = T::one() + norm_sq(x);
        (0..self.info.component_count).all(|i| {
            self.component_grad(i, x, &mut g);
            norm_sq(&g) <= T::of(1e-24) * scale * self.info.smoothness * self.info.smoothness
        })
    }
}

fn solve_minimizer<T: Scalar>(
    rows: &[T],
    labels: &[T],
    n: usize,
    d: usize,
    ridge: T,
    center: &[T],
) -> Vec<T> {
    if ridge == T::zero() {
        return linalg::least_squares_solve(rows, labels, n, d);
    }
    // ‖Ax − y‖² + nλ‖x − c‖² as one stacked least-squares system
    let s = (T::of(n as f64) * ridge).sqrt();
    let mut aug_rows = rows.to_vec();
    let mut aug_labels = labels.to_vec();
    for i in 0..d {
        let mut e = vec![T::zero(); d];
        e[i] = s;
        aug_rows.extend(e);
        aug_labels.push(s * center[i]);
    }
    linalg::least_squares_solve(&aug_rows, &aug_labels, n + d, d)
}

fn check_len(name: &'static str, got: usize, expected: usize) -> Result<(), ProblemError> {
    if got != expected {
        return Err(ProblemError::ShapeMismatch {
            name,
            got,
            expected,
        });
    }
    Ok(())
}

impl<T: Scalar> ProblemInstance<T> for LeastSquares<T> {
    fn info(&self) -> &ProblemInfo<T> {
        &self.info
    }

    fn value(&self, x: &[T]) -> T {
        let n = self.info.component_count;
        let data: T = (0..n)
            .map(|i| {
                let r = self.residual(i, x);
                r * r
            })
            .sum();
        let half = T::of(0.5);
        let reg = if self.ridge > T::zero() {
            half * self.ridge * linalg::dist_sq(x, &self.center)
        } else {
            T::zero()
        };
        half * data / T::of(n as f64) + reg
    }

    fn grad(&self, x: &[T], out: &mut [T]) {
        let n = self.info.component_count;
        out.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..n {
            let r = self.residual(i, x);
            linalg::axpy(r, self.row(i), out);
        }
        linalg::scale(T::one() / T::of(n as f64), out);
        if self.ridge > T::zero() {
            for ((o, &xi), &ci) in out.iter_mut().zip(x).zip(&self.center) {
                *o += self.ridge * (xi - ci);
            }
        }
    }

    fn component_value(&self, i: usize, x: &[T]) -> T {
        let r = self.residual(i, x);
        let half = T::of(0.5);
        let reg = if self.ridge > T::zero() {
            half * self.ridge * linalg::dist_sq(x, &self.center)
        } else {
            T::zero()
        };
        half * r * r + reg
    }

    fn component_grad(&self, i: usize, x: &[T], out: &mut [T]) {
        let r = self.residual(i, x);
        for (o, &a) in out.iter_mut().zip(self.row(i)) {
            *o = r * a;
        }
        if self.ridge > T::zero() {
            for ((o, &xi), &ci) in out.iter_mut().zip(x).zip(&self.center) {
                *o += self.ridge * (xi - ci);
            }
        }
    }

    fn default_start(&self) -> Vec<T> {
        vec![T::zero(); self.info.dimension]
    }

    /// Exact quadratic form `½ (x − x*)ᵀ H (x − x*)`, which avoids the
    /// cancellation of `F(x) − F*` near the optimum.
    fn gap(&self, x: &[T]) -> T {
        let d = self.info.dimension;
        let xs = self
            .info
            .minimizer
            .as_deref()
            .expect("least squares always carries its minimizer");
        let e = linalg::sub(x, xs);
        let mut acc = T::zero();
        for i in 0..d {
            let row = &self.hessian[i * d..(i + 1) * d];
            acc += e[i] * dot(row, &e);
        }
        T::of(0.5) * acc
    }
}

/// Gaussian least squares: rows `a_i` and `x*` i.i.d. standard normal,
/// `y = A x*` plus optional label noise.
pub fn make_least_squares<T: Scalar>(
    n: usize,
    d: usize,
    seed: u64,
    noise: NoiseModel,
) -> Result<LeastSquares<T>, ProblemError> {
    gaussian_least_squares(n, d, seed, noise, false)
}

/// Like [`make_least_squares`] but accepts `n < d` (or any rank deficiency),
/// yielding a PL instance with `mu` the smallest positive eigenvalue of `AᵀA/n`.
pub fn make_least_squares_degenerate<T: Scalar>(
    n: usize,
    d: usize,
    seed: u64,
    noise: NoiseModel,
) -> Result<LeastSquares<T>, ProblemError> {
    gaussian_least_squares(n, d, seed, noise, true)
}

fn gaussian_least_squares<T: Scalar>(
    n: usize,
    d: usize,
    seed: u64,
    noise: NoiseModel,
    allow_degenerate: bool,
) -> Result<LeastSquares<T>, ProblemError> {
    if n == 0 || d == 0 {
        return Err(invalid("n, d", "must both be >= 1"));
    }
    if n < d && !allow_degenerate {
        return Err(ProblemError::RankDeficient { n, d });
    }
    let rows: Vec<T> = rng::gaussian_vec(&mut rng::stream(seed, 0), n * d);
    let x_star: Vec<T> = rng::gaussian_vec(&mut rng::stream(seed, 1), d);
    let mut labels: Vec<T> = rows.chunks(d).map(|a| dot(a, &x_star)).collect();
    let name = match noise {
        NoiseModel::Noiseless => "least_squares",
        NoiseModel::AdditiveGaussian { sigma } => {
            let mut z = rng::stream(seed, 2);
            for y in labels.iter_mut() {
                *y += T::of(sigma) * rng::gaussian::<T>(&mut z);
            }
            "least_squares_noisy"
        }
    };
    let minimizer = noise.is_noiseless().then_some(x_star);
    LeastSquares::from_parts(LeastSquaresParts {
        name: name.to_string(),
        rows,
        labels,
        n,
        d,
        ridge: T::zero(),
        center: None,
        minimizer,
        noise,
        allow_degenerate,
    })
}

/// Components `½(⟨a_i,x⟩ − y_i)² + (λ/2)‖x − x*‖²` with `y = A x*`, so each
/// `f_i` is at least `λ`-strongly convex and stationary at the shared `x*`.
pub fn make_regularized_strongly_convex<T: Scalar>(
    n: usize,
    d: usize,
    lambda: T,
    seed: u64,
) -> Result<LeastSquares<T>, ProblemError> {
    if !(lambda > T::zero()) {
        return Err(invalid("lambda", "must be > 0"));
    }
    if n == 0 || d == 0 {
        return Err(invalid("n, d", "must both be >= 1"));
    }
    let rows: Vec<T> = rng::gaussian_vec(&mut rng::stream(seed, 0), n * d);
    let x_star: Vec<T> = rng::gaussian_vec(&mut rng::stream(seed, 1), d);
    let labels: Vec<T> = rows.chunks(d).map(|a| dot(a, &x_star)).collect();
    LeastSquares::from_parts(LeastSquaresParts {
        name: "regularized".to_string(),
        rows,
        labels,
        n,
        d,
        ridge: lambda,
        center: Some(x_star.clone()),
        minimizer: Some(x_star),
        noise: NoiseModel::Noiseless,
        allow_degenerate: true,
    })
}
