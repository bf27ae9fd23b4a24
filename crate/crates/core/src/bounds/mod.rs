//! Closed-form iteration budgets and trace verifiers.
//!
//! Logarithms are natural. Each budget picks its case with a strict `>` on
//! the threshold (Case 1) and `<=` otherwise (Case 2).

mod checks;

use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

use crate::problems::Flavor;
use crate::Scalar;

pub use checks::{
    check_descent, check_integral_lemma, check_lemma2_contract, check_lemma3, check_lemma4,
    integral_lemma_sums, write_bound_checks_csv, BoundCheckReport, IntegralLemmaSums,
};

/// Budgets above this are reported as [`BoundsError::ExceedsDeskScale`]:
/// past `2^53` the count is no longer an exact integer in `f64`.
pub const DESK_SCALE_LIMIT: f64 = 9_007_199_254_740_992.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("budget {value:e} exceeds desk scale")]
    ExceedsDeskScale { value: f64 },
    #[error("F(x0) - F* = {0} is not positive: already optimal")]
    AlreadyOptimal(f64),
    #[error("trace has no err_sq column (unknown minimizer)")]
    MissingErrSq,
    #[error("lemma hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("check needs every iteration recorded, but the trace has stride {0}")]
    Strided(usize),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> BoundsError {
    BoundsError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

fn positive<T: Scalar>(name: &'static str, v: T) -> Result<(), BoundsError> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

fn unit_open<T: Scalar>(name: &'static str, v: T) -> Result<(), BoundsError> {
    if v > T::zero() && v < T::one() {
        Ok(())
    } else {
        Err(invalid(name, format!("must lie in (0, 1), got {v}")))
    }
}

/// `max(ln v, 0)`.
pub(crate) fn clamped_ln<T: Scalar>(v: T) -> T {
    v.ln().max(T::zero())
}

fn to_count<T: Scalar>(raw: T) -> Result<u64, BoundsError> {
    let v = raw.to_f64_lossy();
    if !v.is_finite() || v > DESK_SCALE_LIMIT {
        return Err(BoundsError::ExceedsDeskScale { value: v });
    }
    Ok(v.max(0.0) as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Theorem {
    /// Strongly convex, stochastic.
    StochasticStronglyConvex,
    /// Strongly convex, batch.
    BatchStronglyConvex,
    /// PL, batch.
    BatchPl,
}

impl Theorem {
    pub fn as_str(&self) -> &'static str {
        match self {
            Theorem::StochasticStronglyConvex => "thm1",
            Theorem::BatchStronglyConvex => "thm2",
            Theorem::BatchPl => "thm3",
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    /// `b0` already above the threshold.
    Case1,
    Case2,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::Case1 => "case1",
            Case::Case2 => "case2",
        })
    }
}

/// Constants that produced a budget; `None` marks one the theorem does not use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetConstants<T> {
    pub b0: T,
    pub eta: T,
    pub l: T,
    pub mu: T,
    /// `‖x0 − x*‖²`, or `F(x0) − F*` for the PL budget.
    pub delta0: T,
    /// Stage-one inflated counterpart of `delta0` (Case 2 only).
    pub delta_inflated: Option<T>,
    pub eps: T,
    pub delta_h: Option<T>,
    /// Bernstein slack `δ`.
    pub delta: Option<T>,
    pub alpha: Option<T>,
    pub gamma: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationBudget<T> {
    pub theorem: Theorem,
    pub case: Case,
    /// Predicted iteration count `T`.
    pub total: u64,
    /// Rounded-up stage-one addend (zero in Case 1).
    pub stage1_part: u64,
    /// `total − stage1_part`.
    pub stage2_part: u64,
    pub constants: BudgetConstants<T>,
}

impl<T> IterationBudget<T> {
    fn new(
        theorem: Theorem,
        case: Case,
        total: u64,
        stage1_part: u64,
        constants: BudgetConstants<T>,
    ) -> Self {
        IterationBudget {
            theorem,
            case,
            total,
            stage1_part,
            stage2_part: total.saturating_sub(stage1_part),
            constants,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thm1Input<T> {
    pub b0: T,
    pub eta: T,
    pub l: T,
    pub mu: T,
    pub delta0: T,
    pub eps: T,
    pub delta_h: T,
    pub alpha: T,
    pub gamma: T,
    pub delta: T,
}

/// Stochastic, strongly convex; threshold `ηL`.
pub fn budget_thm1<T: Scalar>(p: &Thm1Input<T>) -> Result<IterationBudget<T>, BoundsError> {
    for (name, v) in [
        ("b0", p.b0),
        ("eta", p.eta),
        ("L", p.l),
        ("mu", p.mu),
        ("delta0", p.delta0),
        ("alpha", p.alpha),
        ("gamma", p.gamma),
        ("delta", p.delta),
    ] {
        positive(name, v)?;
    }
    unit_open("eps", p.eps)?;
    unit_open("delta_h", p.delta_h)?;
    if p.gamma > T::one() {
        return Err(invalid("gamma", "must be <= 1"));
    }
    let one = T::one();
    let mut k = BudgetConstants {
        b0: p.b0,
        eta: p.eta,
        l: p.l,
        mu: p.mu,
        delta0: p.delta0,
        delta_inflated: None,
        eps: p.eps,
        delta_h: Some(p.delta_h),
        delta: Some(p.delta),
        alpha: Some(p.alpha),
        gamma: Some(p.gamma),
    };
    let el = p.eta * p.l;
    if p.b0 > el {
        let raw = ((p.b0 + p.l * p.delta0 / p.eta) / p.mu
            * clamped_ln(p.delta0 / (p.eps * p.delta_h)))
        .ceil()
            + one;
        return Ok(IterationBudget::new(
            Theorem::StochasticStronglyConvex,
            Case::Case1,
            to_count(raw)?,
            0,
            k,
        ));
    }
    let big = p.delta0 + p.eta * p.eta * (clamped_ln(el * el / (p.b0 * p.b0)) + one);
    k.delta_inflated = Some(big);
    let stage1 = (el * el - p.b0 * p.b0) / (p.alpha * p.gamma * p.eps) + p.delta / p.gamma;
    let stage2 =
        p.l * (p.eta + big / p.eta) / p.mu * clamped_ln(big / (p.eps * p.delta_h));
    let raw = (stage1 + stage2).ceil() + one;
    Ok(IterationBudget::new(
        Theorem::StochasticStronglyConvex,
        Case::Case2,
        to_count(raw)?,
        to_count(stage1.ceil())?,
        k,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thm2Input<T> {
    pub b0: T,
    pub eta: T,
    pub l: T,
    pub mu: T,
    pub delta0: T,
    pub eps: T,
}

/// Batch, strongly convex; threshold `η(μ + L)/2`.
///
/// Case 2 inflates `Δ0` by `η²(ln(η²(μ+L)²/(4 b0²)) + 1)`, the stage-one
/// distance bound at the Case-2 threshold.
pub fn budget_thm2<T: Scalar>(p: &Thm2Input<T>) -> Result<IterationBudget<T>, BoundsError> {
    for (name, v) in [
        ("b0", p.b0),
        ("eta", p.eta),
        ("L", p.l),
        ("mu", p.mu),
        ("delta0", p.delta0),
        ("eps", p.eps),
    ] {
        positive(name, v)?;
    }
    let (one, two) = (T::one(), T::of(2.0));
    let threshold = p.eta * (p.mu + p.l) / two;
    let ratio = (p.mu + p.l) / (two * p.mu);
    let factor = |d: T| (p.l * (one + d / (p.eta * p.eta)) / p.mu).max(ratio);
    let mut k = BudgetConstants {
        b0: p.b0,
        eta: p.eta,
        l: p.l,
        mu: p.mu,
        delta0: p.delta0,
        delta_inflated: None,
        eps: p.eps,
        delta_h: None,
        delta: None,
        alpha: None,
        gamma: None,
    };
    if p.b0 > threshold {
        let raw = one + (factor(p.delta0) * clamped_ln(p.delta0 / p.eps)).ceil();
        return Ok(IterationBudget::new(
            Theorem::BatchStronglyConvex,
            Case::Case1,
            to_count(raw)?,
            0,
            k,
        ));
    }
    let log_c = clamped_ln(threshold * threshold / (p.b0 * p.b0));
    let big = p.delta0 + p.eta * p.eta * (log_c + one);
    k.delta_inflated = Some(big);
    let s = p.mu + p.l;
    let denom = (T::of(4.0) * p.mu * p.mu * p.eps / (s * s)).ln_1p();
    let stage1 = if log_c == T::zero() {
        T::zero()
    } else {
        log_c / denom
    };
    let raw = one + (factor(big) * clamped_ln(big / p.eps) + stage1).ceil();
    Ok(IterationBudget::new(
        Theorem::BatchStronglyConvex,
        Case::Case2,
        to_count(raw)?,
        to_count(stage1.ceil())?,
        k,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thm3Input<T> {
    pub b0: T,
    pub eta: T,
    pub l: T,
    pub mu: T,
    /// `F(x0) − F*`.
    pub gap0: T,
    pub eps: T,
}

/// Batch, PL; threshold `ηL`.
pub fn budget_thm3<T: Scalar>(p: &Thm3Input<T>) -> Result<IterationBudget<T>, BoundsError> {
    if !(p.gap0 > T::zero()) {
        return Err(BoundsError::AlreadyOptimal(p.gap0.to_f64_lossy()));
    }
    for (name, v) in [
        ("b0", p.b0),
        ("eta", p.eta),
        ("L", p.l),
        ("mu", p.mu),
        ("gap0", p.gap0),
        ("eps", p.eps),
    ] {
        positive(name, v)?;
    }
    let (one, two) = (T::one(), T::of(2.0));
    let el = p.eta * p.l;
    let mut k = BudgetConstants {
        b0: p.b0,
        eta: p.eta,
        l: p.l,
        mu: p.mu,
        delta0: p.gap0,
        delta_inflated: None,
        eps: p.eps,
        delta_h: None,
        delta: None,
        alpha: None,
        gamma: None,
    };
    if p.b0 > el {
        let raw = ((p.b0 + two / p.eta * p.gap0) / (p.mu * p.eta) * clamped_ln(p.gap0 / p.eps))
            .ceil()
            + one;
        return Ok(IterationBudget::new(
            Theorem::BatchPl,
            Case::Case1,
            to_count(raw)?,
            0,
            k,
        ));
    }
    let big = p.eta * p.eta * p.l / two * (one + two * clamped_ln(el / p.b0)) + p.gap0;
    k.delta_inflated = Some(big);
    let log_c = clamped_ln(el * el / (p.b0 * p.b0));
    let stage1 = if log_c == T::zero() {
        T::zero()
    } else {
        log_c / (two * p.mu * p.eps / (el * el)).ln_1p()
    };
    let stage2 = (el + two / p.eta * big) / (p.mu * p.eta) * clamped_ln(big / p.eps);
    let raw = (stage1 + stage2).ceil() + one;
    Ok(IterationBudget::new(
        Theorem::BatchPl,
        Case::Case2,
        to_count(raw)?,
        to_count(stage1.ceil())?,
        k,
    ))
}

/// Batch iterations after which `b_N > C` or the error dropped to `ε`:
/// strongly convex `⌈ln(C²/b0²)/ln(1 + μ²ε/C²)⌉ + 1`,
/// PL `⌈ln(C²/b0²)/ln(1 + 2με/C²)⌉`. Zero when `b0 >= C`.
pub fn lemma2_budget<T: Scalar>(
    b0: T,
    c: T,
    mu: T,
    eps: T,
    flavor: Flavor,
) -> Result<u64, BoundsError> {
    positive("b0", b0)?;
    positive("C", c)?;
    positive("mu", mu)?;
    positive("eps", eps)?;
    if b0 >= c {
        return Ok(0);
    }
    let num = (c * c / (b0 * b0)).ln();
    let raw = match flavor {
        Flavor::StronglyConvex => (num / (mu * mu * eps / (c * c)).ln_1p()).ceil() + T::one(),
        Flavor::PlNonconvex => (num / (T::of(2.0) * mu * eps / (c * c)).ln_1p()).ceil(),
    };
    to_count(raw)
}

pub fn write_budget_csv<T: Scalar, W: Write>(
    mut w: W,
    budgets: &[IterationBudget<T>],
) -> io::Result<()> {
    writeln!(
        w,
        "theorem,case,T,stage1_part,stage2_part,b0,eta,L,mu,delta0,delta_inflated,eps,delta_h,delta,alpha,gamma"
    )?;
    let o = |v: Option<T>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for b in budgets {
        let k = &b.constants;
        writeln!(
            w,
            "{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{},{:e},{},{},{},{}",
            b.theorem,
            b.case,
            b.total,
            b.stage1_part,
            b.stage2_part,
            k.b0,
            k.eta,
            k.l,
            k.mu,
            k.delta0,
            o(k.delta_inflated),
            k.eps,
            o(k.delta_h),
            o(k.delta),
            o(k.alpha),
            o(k.gamma)
        )?;
    }
    Ok(())
}
