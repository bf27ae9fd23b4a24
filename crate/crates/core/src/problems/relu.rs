use crate::linalg::{dot, norm_sq};
use crate::rng;
use crate::Scalar;

use super::{invalid, Flavor, ProblemError, ProblemInfo, ProblemInstance};

/// One-hidden-layer ReLU network trained on its inner weights:
///
/// `f_i(W) = ½ (u_i(W) − y_i)²`, `u_i(W) = (1/√m) Σ_r a_r relu(⟨w_r, x_i⟩)`.
///
/// The outer weights `a_r ∈ {−1, +1}` are frozen. The optimization variable is
/// `W` flattened row-major (`m` rows of length `d`). Inputs lie on the unit
/// sphere and labels are standard normal.
///
/// `smoothness` is the Gauss–Newton bound `max_i ‖x_i‖²` (the loss is not
/// globally smooth because of the ReLU kinks) and `mu` is left at zero since
/// no PL constant is known in closed form; see
/// [`empirical_pl_constant`](super::empirical_pl_constant).
#[derive(Debug, Clone)]
pub struct TwoLayerRelu<T> {
    inputs: Vec<T>,
    labels: Vec<T>,
    outer: Vec<T>,
    width: usize,
    input_dim: usize,
    start: Vec<T>,
    info: ProblemInfo<T>,
}

impl<T: Scalar> TwoLayerRelu<T> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn outer_weights(&self) -> &[T] {
        &self.outer
    }

    fn input(&self, i: usize) -> &[T] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    fn inv_sqrt_m(&self) -> T {
        T::one() / T::of(self.width as f64).sqrt()
    }

    /// Network output `u_i(W)`.
    pub fn output(&self, i: usize, w: &[T]) -> T {
        let x = self.input(i);
        let s: T = w
            .chunks(self.input_dim)
            .zip(&self.outer)
            .map(|(wr, &ar)| ar * relu(dot(wr, x)))
            .sum();
        s * self.inv_sqrt_m()
    }

    /// Adds `scale · ∇_W u_i(W)` into `out`.
    fn add_output_grad(&self, i: usize, w: &[T], scale: T, out: &mut [T]) {
        let x = self.input(i);
        let c = scale * self.inv_sqrt_m();
        for ((wr, &ar), gr) in w
            .chunks(self.input_dim)
            .zip(&self.outer)
            .zip(out.chunks_mut(self.input_dim))
        {
            // derivative of relu taken as 0 at the kink
            if dot(wr, x) > T::zero() {
                crate::linalg::axpy(c * ar, x, gr);
            }
        }
    }

    /// Weights where every hidden unit is at least `margin` away from its kink
    /// for all inputs; used to pick safe points for finite differences.
    pub fn min_kink_margin(&self, w: &[T]) -> T {
        let mut m = T::infinity();
        for i in 0..self.info.component_count {
            let x = self.input(i);
            for wr in w.chunks(self.input_dim) {
                m = m.min(dot(wr, x).abs());
            }
        }
        m
    }
}

fn relu<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        z
    } else {
        T::zero()
    }
}

impl<T: Scalar> ProblemInstance<T> for TwoLayerRelu<T> {
    fn info(&self) -> &ProblemInfo<T> {
        &self.info
    }

    fn value(&self, w: &[T]) -> T {
        let n = self.info.component_count;
        let s: T = (0..n).map(|i| self.component_value(i, w)).sum();
        s / T::of(n as f64)
    }

    fn grad(&self, w: &[T], out: &mut [T]) {
        let n = self.info.component_count;
        out.iter_mut().for_each(|v| *v = T::zero());
        let inv_n = T::one() / T::of(n as f64);
        for i in 0..n {
            let r = self.output(i, w) - self.labels[i];
            self.add_output_grad(i, w, r * inv_n, out);
        }
    }

    fn component_value(&self, i: usize, w: &[T]) -> T {
        let r = self.output(i, w) - self.labels[i];
        T::of(0.5) * r * r
    }

    fn component_grad(&self, i: usize, w: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        let r = self.output(i, w) - self.labels[i];
        self.add_output_grad(i, w, r, out);
    }

    fn default_start(&self) -> Vec<T> {
        self.start.clone()
    }
}

/// Builds the over-parameterized regression instance with `n` samples,
/// hidden width `m` and input dimension `d`.
pub fn make_two_layer_relu<T: Scalar>(
    n: usize,
    m: usize,
    d: usize,
    seed: u64,
) -> Result<TwoLayerRelu<T>, ProblemError> {
    if n == 0 {
        return Err(invalid("n", "must be >= 1"));
    }
    if m == 0 {
        return Err(invalid("m", "must be >= 1"));
    }
    if d == 0 {
        return Err(invalid("d", "must be >= 1"));
    }
    let mut rng_x = rng::stream(seed, 0);
    let mut inputs: Vec<T> = Vec::with_capacity(n * d);
    for _ in 0..n {
        let mut x: Vec<T> = rng::gaussian_vec(&mut rng_x, d);
        let norm = norm_sq(&x).sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
        inputs.extend(x);
    }
    let labels: Vec<T> = rng::gaussian_vec(&mut rng::stream(seed, 1), n);
    let mut rng_a = rng::stream(seed, 2);
    let outer: Vec<T> = (0..m)
        .map(|_| {
            if rand::Rng::random::<bool>(&mut rng_a) {
                T::one()
            } else {
                -T::one()
            }
        })
        .collect();
    let start: Vec<T> = rng::gaussian_vec(&mut rng::stream(seed, 3), m * d);

    let component_smoothness: Vec<T> = inputs.chunks(d).map(norm_sq).collect();
    let smoothness = component_smoothness
        .iter()
        .cloned()
        .fold(T::zero(), T::max);
    Ok(TwoLayerRelu {
        inputs,
        labels,
        outer,
        width: m,
        input_dim: d,
        start,
        info: ProblemInfo {
            name: "two_layer_relu".to_string(),
            dimension: m * d,
            component_count: n,
            smoothness,
            component_smoothness,
            mu: T::zero(),
            flavor: Flavor::PlNonconvex,
            minimizer: None,
            optimal_value: T::zero(),
            interpolating: true,
            min_component_mu: None,
        },
    })
}
