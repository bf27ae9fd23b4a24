use std::io::{self, Write};

use super::{clamped_ln, invalid, BoundsError};
use crate::optimizers::Trace;
use crate::Scalar;

/// Outcome of comparing one lemma's bound with a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheckReport<T> {
    pub lemma: &'static str,
    pub bound: T,
    pub observed: T,
    /// `bound − observed`.
    pub slack: T,
    pub passed: bool,
    /// False when the trace never reached the lemma's regime.
    pub applicable: bool,
    /// A log term in the bound had argument below 1 and was clamped to 0.
    pub log_clamped: bool,
    pub note: String,
}

impl<T: Scalar> BoundCheckReport<T> {
    fn compare(lemma: &'static str, bound: T, observed: T, log_clamped: bool) -> Self {
        let slack = bound - observed;
        BoundCheckReport {
            lemma,
            bound,
            observed,
            slack,
            passed: slack >= -T::of(1e-9) * bound.abs(),
            applicable: true,
            log_clamped,
            note: String::new(),
        }
    }

    fn not_applicable(lemma: &'static str, bound: T, note: impl Into<String>) -> Self {
        BoundCheckReport {
            lemma,
            bound,
            observed: T::nan(),
            slack: T::nan(),
            passed: true,
            applicable: false,
            log_clamped: false,
            note: note.into(),
        }
    }
}

fn require_err<T: Scalar>(trace: &Trace<T>) -> Result<(), BoundsError> {
    if trace.has_err_sq() {
        Ok(())
    } else {
        Err(BoundsError::MissingErrSq)
    }
}

/// `Δ0 + η² (ln(C²/b0²) + 1)` with the log clamped at zero.
fn stage_one_distance<T: Scalar>(c: T, eta: T, b0: T, delta0: T) -> (T, bool) {
    let arg = c * c / (b0 * b0);
    (
        delta0 + eta * eta * (clamped_ln(arg) + T::one()),
        arg < T::one(),
    )
}

/// Compares `‖x_{J−1} − x*‖²` with `Δ0 + η²(ln(C²/b0²) + 1)`, where `J` is
/// the first index with `b_J > C`.
pub fn check_lemma3<T: Scalar>(
    trace: &Trace<T>,
    c: T,
    eta: T,
    b0: T,
    delta0: T,
) -> Result<BoundCheckReport<T>, BoundsError> {
    require_err(trace)?;
    if trace.meta.stride != 1 {
        return Err(BoundsError::Strided(trace.meta.stride));
    }
    let (bound, clamped) = stage_one_distance(c, eta, b0, delta0);
    if b0 > c {
        let mut r = BoundCheckReport::not_applicable("lemma3", bound, "b0 > C: J = 0");
        r.log_clamped = clamped;
        return Ok(r);
    }
    // record t carries err_sq(x_t) and b_{t+1}, so the first record with
    // b > C is the iterate J − 1
    match trace.records.iter().find(|r| r.b > c) {
        Some(r) => {
            let mut rep = BoundCheckReport::compare("lemma3", bound, r.err_sq.unwrap(), clamped);
            rep.note = format!("J = {}", r.t + 1);
            Ok(rep)
        }
        None => Ok(BoundCheckReport::not_applicable(
            "lemma3",
            bound,
            "b never exceeded C",
        )),
    }
}

/// Compares `max_t b_t` with `C' + (L/η)(Δ0 + η²(ln(C'²/b0²) + 1))`,
/// `C' = max(C, b0)`. Requires `C >= ηL`.
pub fn check_lemma4<T: Scalar>(
    trace: &Trace<T>,
    c: T,
    eta: T,
    l: T,
    b0: T,
    delta0: T,
) -> Result<BoundCheckReport<T>, BoundsError> {
    if c < eta * l {
        return Err(BoundsError::HypothesisViolated(format!(
            "C = {c} < eta L = {}",
            eta * l
        )));
    }
    let c_eff = c.max(b0);
    let (dist, _) = stage_one_distance(c_eff, eta, b0, delta0);
    let bound = c_eff + l / eta * dist;
    let mut rep = BoundCheckReport::compare("lemma4", bound, trace.max_b(), b0 > c);
    if c_eff > c {
        rep.note = "b0 > C: C replaced by b0".into();
    }
    Ok(rep)
}

/// Checks that the error never increases across a step taken with
/// `b_{t+1} > ηL/2`, and that every later error stays within the error at
/// the crossing. `observed` is the worst excess over a `1e-12 · max(1, err)`
/// rounding allowance; `bound` is 0.
pub fn check_descent<T: Scalar>(
    trace: &Trace<T>,
    eta: T,
    l: T,
) -> Result<BoundCheckReport<T>, BoundsError> {
    require_err(trace)?;
    let threshold = eta * l / T::of(2.0);
    let Some(start) = trace.records.iter().position(|r| r.b > threshold) else {
        return Ok(BoundCheckReport::not_applicable(
            "descent",
            T::zero(),
            "b never exceeded eta L / 2",
        ));
    };
    let mut errs: Vec<T> = trace.records[start..]
        .iter()
        .map(|r| r.err_sq.unwrap())
        .collect();
    if !trace.diverged {
        errs.push(trace.final_state.err_sq.unwrap());
    }
    let tol = |e: T| T::of(1e-12) * e.max(T::one());
    let mut worst = T::zero();
    for w in errs.windows(2) {
        worst = worst.max(w[1] - w[0] - tol(w[0]));
    }
    let anchor = errs[0];
    for &e in &errs[1..] {
        worst = worst.max(e - anchor - tol(anchor));
    }
    let mut rep = BoundCheckReport::compare("descent", T::zero(), worst, false);
    rep.note = format!("crossing at t = {}", trace.records[start].t);
    Ok(rep)
}

/// After `n` batch iterations, `b_N > C` or `min_{i<N}` error `<= ε`. A
/// trace that stopped early on its tolerance counts its last iterate.
pub fn check_lemma2_contract<T: Scalar>(
    trace: &Trace<T>,
    c: T,
    eps: T,
    n: u64,
) -> Result<BoundCheckReport<T>, BoundsError> {
    let ran = trace.final_state.t as u64;
    if ran > n || (ran < n && trace.diverged) {
        return Err(invalid(
            "trace",
            format!("ran {ran} iterations, expected {n}"),
        ));
    }
    if trace.final_state.b > c {
        let mut rep = BoundCheckReport::compare("lemma2", trace.final_state.b, c, false);
        rep.note = "b_N > C".into();
        return Ok(rep);
    }
    // a run that stopped early on its tolerance reached x_ran with ran < N
    let early = if ran < n {
        trace.final_state.metric()
    } else {
        T::infinity()
    };
    let best = trace.records.iter().map(|r| r.metric()).fold(early, T::min);
    let mut rep = BoundCheckReport::compare("lemma2", eps, best, false);
    rep.note = "min error over first N iterates".into();
    Ok(rep)
}

/// Both sides of the two integral-lemma inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralLemmaSums<T> {
    /// `Σ a_l / Σ_{i≤l} a_i`.
    pub ratio_sum: T,
    /// `ln(Σ a) + 1`.
    pub ratio_bound: T,
    /// `Σ a_l / √(Σ_{i≤l} a_i)`.
    pub sqrt_sum: T,
    /// `2 √(Σ a)`.
    pub sqrt_bound: T,
}

pub fn integral_lemma_sums<T: Scalar>(a: &[T]) -> Result<IntegralLemmaSums<T>, BoundsError> {
    match a.first() {
        None => return Err(invalid("a", "must be nonempty")),
        Some(&a1) if !(a1 >= T::one()) => {
            return Err(invalid("a", format!("a_1 = {a1} must be >= 1")))
        }
        _ => {}
    }
    if a.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
        return Err(invalid("a", "entries must be finite and >= 0"));
    }
    let (mut prefix, mut ratio_sum, mut sqrt_sum) = (T::zero(), T::zero(), T::zero());
    for &v in a {
        prefix += v;
        ratio_sum += v / prefix;
        sqrt_sum += v / prefix.sqrt();
    }
    Ok(IntegralLemmaSums {
        ratio_sum,
        ratio_bound: prefix.ln() + T::one(),
        sqrt_sum,
        sqrt_bound: T::of(2.0) * prefix.sqrt(),
    })
}

/// Whether both integral-lemma inequalities hold for `a` (up to rounding).
pub fn check_integral_lemma<T: Scalar>(a: &[T]) -> Result<bool, BoundsError> {
    let s = integral_lemma_sums(a)?;
    let tol = |b: T| T::of(1e-12) * b.abs().max(T::one());
    Ok(s.ratio_sum <= s.ratio_bound + tol(s.ratio_bound)
        && s.sqrt_sum <= s.sqrt_bound + tol(s.sqrt_bound))
}

pub fn write_bound_checks_csv<T: Scalar, W: Write>(
    mut w: W,
    reports: &[BoundCheckReport<T>],
) -> io::Result<()> {
    writeln!(w, "lemma,bound,observed,slack,passed,applicable")?;
    for r in reports {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{},{}",
            r.lemma, r.bound, r.observed, r.slack, r.passed, r.applicable
        )?;
    }
    Ok(())
}
