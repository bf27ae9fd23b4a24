use std::fmt::Write as _;
use std::path::Path;

use adanorm::bounds::{
    budget_thm1, budget_thm2, budget_thm3, check_descent, check_lemma3, check_lemma4,
    write_bound_checks_csv, write_budget_csv, Thm1Input, Thm2Input, Thm3Input,
};
use adanorm::optimizers::{best_error, run, Method, Mode, RunConfig};
use adanorm::problems::{
    make_least_squares, make_least_squares_degenerate, make_regularized_strongly_convex, make_two_layer_relu, Flavor,
    NoiseModel, ProblemInstance,
};
use adanorm::ruig::{default_delta, estimate_ruig, write_ruig_csv};
use adanorm::{
    rng, BoundCheckReport64, IterationBudget64, LeastSquares64, RuigEstimate64, Trace64,
    TwoLayerRelu64,
};
use rayon::prelude::*;

use crate::config::{
    AlphaScale, ExperimentConfig, Generator, MethodSpec, ProblemSpec, StartSpec, Statistic,
    SweepParam,
};
use crate::output::{ensure_dir, fmt_opt, write_atomic};
use crate::HarnessError;

/// A generated problem.
pub enum Instance {
    LeastSquares(LeastSquares64),
    Relu(TwoLayerRelu64),
}

impl Instance {
    pub fn as_dyn(&self) -> &dyn ProblemInstance<f64> {
        match self {
            Instance::LeastSquares(p) => p,
            Instance::Relu(p) => p,
        }
    }

    pub fn least_squares(&self) -> Option<&LeastSquares64> {
        match self {
            Instance::LeastSquares(p) => Some(p),
            Instance::Relu(_) => None,
        }
    }
}

pub fn build_instance(spec: &ProblemSpec) -> Result<Instance, HarnessError> {
    let err = |e: adanorm::problems::ProblemError| HarnessError::config(e.to_string());
    Ok(match spec.generator {
        Generator::LeastSquares => Instance::LeastSquares(
            make_least_squares(spec.n, spec.d, spec.seed, NoiseModel::Noiseless).map_err(err)?,
        ),
        Generator::LeastSquaresDegenerate => Instance::LeastSquares(
            make_least_squares_degenerate(spec.n, spec.d, spec.seed, NoiseModel::Noiseless)
                .map_err(err)?,
        ),
        Generator::LeastSquaresNoisy => {
            let noise = NoiseModel::gaussian(spec.sigma.unwrap_or(0.1)).map_err(err)?;
            Instance::LeastSquares(make_least_squares(spec.n, spec.d, spec.seed, noise).map_err(err)?)
        }
        Generator::Regularized => Instance::LeastSquares(
            make_regularized_strongly_convex(spec.n, spec.d, spec.lambda.unwrap_or(0.0), spec.seed)
                .map_err(err)?,
        ),
        Generator::TwoLayerRelu => Instance::Relu(
            make_two_layer_relu(spec.n, spec.m.unwrap_or(0), spec.d, spec.seed).map_err(err)?,
        ),
    })
}

/// Starting point requested by the config; `None` keeps the generator's.
pub fn start_point(spec: &ProblemSpec, dim: usize) -> Option<Vec<f64>> {
    let gaussian = |scale: f64| {
        let w: Vec<f64> = rng::gaussian_vec(&mut rng::stream(spec.seed, 7), dim);
        w.into_iter().map(|v| scale * v).collect()
    };
    match spec.x0 {
        StartSpec::Default => None,
        StartSpec::Zero => Some(vec![0.0; dim]),
        StartSpec::Gaussian => Some(gaussian(spec.x0_scale.unwrap_or(1.0))),
        StartSpec::Extreme => Some(gaussian(spec.x0_scale.unwrap_or(100.0))),
    }
}

/// One finished (method, repeat) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub label: String,
    pub method: Method,
    pub repeat: usize,
    pub seed: u64,
    pub trace: Trace64,
}

impl CellResult {
    /// File stem `<label>_r<repeat>`.
    pub fn stem(&self) -> String {
        format!("{}_r{}", self.label, self.repeat)
    }

    /// Best error over the run; `None` for a zero-length trace.
    pub fn min_err(&self) -> Option<f64> {
        best_error(&self.trace).ok()
    }
}

struct CellPlan {
    index: usize,
    method_idx: usize,
    repeat: usize,
    b0: f64,
    eta: f64,
    sweep_value: Option<f64>,
}

fn run_config(
    cfg: &ExperimentConfig,
    m: &MethodSpec,
    plan: &CellPlan,
    x0: &Option<Vec<f64>>,
) -> Result<RunConfig<f64>, HarnessError> {
    let mut rc = RunConfig::new(
        m.method()?,
        plan.eta,
        plan.b0,
        cfg.max_iters,
        rng::derive_seed(cfg.seed, plan.index as u64),
    )
    .with_mode(m.mode()?)
    .with_batch_size(m.batch_size)
    .with_stop_tol(cfg.stop_tol)
    .with_stride(cfg.stride);
    if let Some(x) = x0 {
        rc = rc.with_x0(x.clone());
    }
    Ok(rc)
}

fn execute(
    cfg: &ExperimentConfig,
    problem: &dyn ProblemInstance<f64>,
    plans: &[CellPlan],
) -> Vec<Result<CellResult, String>> {
    let x0 = start_point(&cfg.problem, problem.dimension());
    plans
        .par_iter()
        .map(|plan| {
            let m = &cfg.methods[plan.method_idx];
            let label = cfg.label(plan.method_idx);
            let rc = run_config(cfg, m, plan, &x0).map_err(|e| format!("{label}: {e}"))?;
            let trace = run(problem, &rc).map_err(|e| format!("{label} r{}: {e}", plan.repeat))?;
            Ok(CellResult {
                label,
                method: rc.method,
                repeat: plan.repeat,
                seed: rc.seed,
                trace,
            })
        })
        .collect()
}

fn split(results: Vec<Result<CellResult, String>>) -> Result<Vec<CellResult>, HarnessError> {
    let total = results.len();
    let mut ok = Vec::with_capacity(total);
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(c) => ok.push(c),
            Err(e) => errors.push(e),
        }
    }
    if errors.is_empty() {
        Ok(ok)
    } else {
        Err(HarnessError::Cells {
            failed: errors.len(),
            total,
            first: errors.swap_remove(0),
        })
    }
}

const SUMMARY_HEADER: &str =
    "method,label,mode,repeat,seed,eta,b0,final_t,final_err_sq,min_err_sq,final_b,max_b,diverged";

fn summary_row(c: &CellResult) -> String {
    let m = &c.trace.meta;
    let f = &c.trace.final_state;
    format!(
        "{},{},{},{},{},{:e},{:e},{},{:e},{},{:e},{:e},{}",
        c.method,
        c.label,
        m.mode,
        c.repeat,
        c.seed,
        m.eta,
        m.b0,
        f.t,
        f.metric(),
        fmt_opt(c.min_err()),
        f.b,
        c.trace.max_b(),
        c.trace.diverged
    )
}

fn method_plans(cfg: &ExperimentConfig, smoothness: f64) -> Result<Vec<CellPlan>, HarnessError> {
    let mut plans = Vec::new();
    for (i, m) in cfg.methods.iter().enumerate() {
        let b0 = m.b0_for(smoothness)?;
        for r in 0..cfg.repeats {
            plans.push(CellPlan {
                index: i * cfg.repeats + r,
                method_idx: i,
                repeat: r,
                b0,
                eta: m.eta,
                sweep_value: None,
            });
        }
    }
    Ok(plans)
}

/// Runs every (method, repeat) cell, writing `trace_<label>_r<k>.csv`,
/// `summary.csv` and plot data under `out`.
///
/// Divergence is recorded, not an error. If any cell fails the remaining
/// outputs are still written and [`HarnessError::Cells`] is returned.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<CellResult>, HarnessError> {
    let inst = build_instance(&cfg.problem)?;
    let problem = inst.as_dyn();
    let plans = method_plans(cfg, problem.info().smoothness)?;
    ensure_dir(out)?;
    let results = execute(cfg, problem, &plans);
    let ok: Vec<&CellResult> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    ok.par_iter()
        .map(|c| {
            write_atomic(
                &out.join(format!("trace_{}.csv", c.stem())),
                c.trace.to_csv_string().as_bytes(),
            )
        })
        .collect::<Result<Vec<()>, _>>()?;
    let mut summary = format!("{SUMMARY_HEADER}\n");
    for c in &ok {
        summary.push_str(&summary_row(c));
        summary.push('\n');
    }
    write_atomic(&out.join("summary.csv"), summary.as_bytes())?;
    let cells = split(results)?;
    if cells.iter().any(|c| !c.trace.records.is_empty()) {
        crate::output::emit_plot_data(&cells, &out.join("plot"))?;
    }
    Ok(cells)
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub label: String,
    pub method: Method,
    pub repeat: usize,
    pub b0: f64,
    pub eta: f64,
    /// The configured statistic; `None` when undefined (empty trace).
    pub statistic: Option<f64>,
    pub diverged: bool,
}

/// Runs every (method, grid value, repeat) cell and writes `sweep.csv`.
pub fn run_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SweepRow>, HarnessError> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| HarnessError::config("config has no [sweep] section"))?;
    let inst = build_instance(&cfg.problem)?;
    let problem = inst.as_dyn();
    let l = problem.info().smoothness;
    let nv = sweep.values.len();
    let mut plans = Vec::new();
    for (i, m) in cfg.methods.iter().enumerate() {
        for (v, &value) in sweep.values.iter().enumerate() {
            let (b0, eta) = match sweep.param {
                SweepParam::B0 => (value, m.eta),
                SweepParam::B0L => (value * l, m.eta),
                SweepParam::Eta => (m.b0_for(l)?, value),
            };
            for r in 0..cfg.repeats {
                plans.push(CellPlan {
                    index: (i * nv + v) * cfg.repeats + r,
                    method_idx: i,
                    repeat: r,
                    b0,
                    eta,
                    sweep_value: Some(value),
                });
            }
        }
    }
    ensure_dir(out)?;
    let cells = split(execute(cfg, problem, &plans))?;
    let rows: Vec<SweepRow> = cells
        .iter()
        .zip(&plans)
        .map(|(c, p)| SweepRow {
            value: p.sweep_value.unwrap_or(f64::NAN),
            label: c.label.clone(),
            method: c.method,
            repeat: c.repeat,
            b0: p.b0,
            eta: p.eta,
            statistic: match sweep.statistic {
                Statistic::FinalErrSq => {
                    (c.trace.final_state.t > 0).then(|| c.trace.final_state.metric())
                }
                Statistic::MinErrSq => c.min_err(),
            },
            diverged: c.trace.diverged,
        })
        .collect();
    let param = match sweep.param {
        SweepParam::B0 => "b0",
        SweepParam::B0L => "b0_l",
        SweepParam::Eta => "eta",
    };
    let stat = match sweep.statistic {
        Statistic::FinalErrSq => "final_err_sq",
        Statistic::MinErrSq => "min_err_sq",
    };
    let mut csv = format!("{param},method,label,repeat,b0,eta,{stat},diverged\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{:e},{},{},{},{:e},{:e},{},{}",
            r.value,
            r.method,
            r.label,
            r.repeat,
            r.b0,
            r.eta,
            fmt_opt(r.statistic),
            r.diverged
        );
    }
    write_atomic(&out.join("sweep.csv"), csv.as_bytes())?;
    Ok(rows)
}

/// Estimates the RUIG fractions for the `[ruig]` section and writes `ruig.csv`.
pub fn run_ruig(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<RuigEstimate64>, HarnessError> {
    let spec = cfg
        .ruig
        .as_ref()
        .ok_or_else(|| HarnessError::config("config has no [ruig] section"))?;
    let inst = build_instance(&cfg.problem)?;
    let problem = inst.as_dyn();
    let unit = match spec.alpha_scale {
        AlphaScale::Absolute => 1.0,
        AlphaScale::MinRowNormSq => inst
            .least_squares()
            .ok_or_else(|| HarnessError::config("min_row_norm_sq needs a least-squares problem"))?
            .min_row_norm_sq(),
        AlphaScale::MinComponentMuSq => {
            let mu = problem.info().min_component_mu.ok_or_else(|| {
                HarnessError::config("min_component_mu_sq needs strongly convex components")
            })?;
            mu * mu
        }
    };
    let alphas: Vec<f64> = spec.alpha_factors.iter().map(|f| f * unit).collect();
    let est = estimate_ruig(
        problem,
        spec.epsilon,
        &alphas,
        spec.points,
        spec.samples,
        spec.seed,
    )
    .map_err(|e| HarnessError::config(e.to_string()))?;
    ensure_dir(out)?;
    let mut buf = Vec::new();
    write_ruig_csv(&mut buf, &est).expect("writing to memory");
    write_atomic(&out.join("ruig.csv"), &buf)?;
    Ok(est)
}

/// Budgets, lemma checks and budget attainment for every AdaGrad-Norm cell.
#[derive(Debug, Clone)]
pub struct BoundsOutcome {
    pub cells: Vec<CellResult>,
    pub budgets: Vec<IterationBudget64>,
    pub checks: Vec<Vec<BoundCheckReport64>>,
    /// First `t` with error at most `eps`, per cell.
    pub hit: Vec<Option<usize>>,
}

/// Runs the AdaGrad-Norm cells of a noiseless least-squares config, computes
/// the matching theorem budget for each and checks the trace lemmas with
/// `C = ηL`. Writes `budgets.csv`, `bound_checks.csv` and `bounds_summary.csv`.
pub fn verify_bounds(cfg: &ExperimentConfig, out: &Path) -> Result<BoundsOutcome, HarnessError> {
    let spec = cfg
        .bounds
        .as_ref()
        .ok_or_else(|| HarnessError::config("config has no [bounds] section"))?;
    if cfg.stride != 1 {
        return Err(HarnessError::config("verify-bounds needs stride = 1"));
    }
    let inst = build_instance(&cfg.problem)?;
    let ls = inst
        .least_squares()
        .ok_or_else(|| HarnessError::config("verify-bounds needs a least-squares problem"))?;
    let info = ls.info();
    if !info.interpolating || info.minimizer.is_none() {
        return Err(HarnessError::config(
            "verify-bounds needs a noiseless (interpolating) instance",
        ));
    }
    let (l, mu) = (info.smoothness, info.mu);
    let plans: Vec<CellPlan> = method_plans(cfg, l)?
        .into_iter()
        .filter(|p| cfg.methods[p.method_idx].name == Method::AdagradNorm.as_str())
        .collect();
    if plans.is_empty() {
        return Err(HarnessError::config("verify-bounds needs an adagrad_norm method"));
    }
    let x0 = start_point(&cfg.problem, ls.dimension()).unwrap_or_else(|| ls.default_start());
    let delta0 = ls.err_sq(&x0).expect("minimizer known");
    let gap0 = ls.gap(&x0);
    let berr = |e: adanorm::bounds::BoundsError| HarnessError::config(e.to_string());

    let mut budgets = Vec::with_capacity(plans.len());
    for p in &plans {
        let mode = cfg.methods[p.method_idx].mode()?;
        let b = match (mode, info.flavor) {
            (Mode::Stochastic, _) => {
                let alpha = spec.alpha_factor * ls.min_row_norm_sq();
                let est = RuigEstimate64 {
                    epsilon: spec.eps,
                    alpha,
                    gamma: spec.gamma,
                    samples_per_point: 0,
                    points_probed: 0,
                    gamma_ci_halfwidth: 0.0,
                };
                budget_thm1(&Thm1Input {
                    b0: p.b0,
                    eta: p.eta,
                    l,
                    mu,
                    delta0,
                    eps: spec.eps,
                    delta_h: spec.delta_h,
                    alpha,
                    gamma: spec.gamma,
                    delta: default_delta(p.b0, p.eta * l, &est),
                })
            }
            (Mode::Batch, Flavor::StronglyConvex) => budget_thm2(&Thm2Input {
                b0: p.b0,
                eta: p.eta,
                l,
                mu,
                delta0,
                eps: spec.eps,
            }),
            (Mode::Batch, Flavor::PlNonconvex) => budget_thm3(&Thm3Input {
                b0: p.b0,
                eta: p.eta,
                l,
                mu,
                gap0,
                eps: spec.eps,
            }),
        }
        .map_err(berr)?;
        budgets.push(b);
    }

    ensure_dir(out)?;
    let cells = split(execute(cfg, ls, &plans))?;
    let mut checks = Vec::with_capacity(cells.len());
    let mut hit = Vec::with_capacity(cells.len());
    for (c, p) in cells.iter().zip(&plans) {
        let tr = &c.trace;
        let c_thr = p.eta * l;
        checks.push(vec![
            check_lemma3(tr, c_thr, p.eta, p.b0, delta0).map_err(berr)?,
            check_lemma4(tr, c_thr, p.eta, l, p.b0, delta0).map_err(berr)?,
            check_descent(tr, p.eta, l).map_err(berr)?,
        ]);
        let final_hit = (!tr.diverged && tr.final_state.metric() <= spec.eps)
            .then_some(tr.final_state.t);
        hit.push(
            tr.records
                .iter()
                .find(|r| r.metric() <= spec.eps)
                .map(|r| r.t)
                .or(final_hit),
        );
    }

    let prefix = |c: &CellResult| format!("{},{}", c.label, c.repeat);
    let mut budget_csv = String::new();
    let mut check_csv = String::new();
    let mut summary = String::from("label,repeat,theorem,case,T,hit_t,within_budget\n");
    for (k, c) in cells.iter().enumerate() {
        let mut buf = Vec::new();
        write_budget_csv(&mut buf, std::slice::from_ref(&budgets[k])).expect("memory");
        prefixed(&mut budget_csv, &buf, k == 0, &prefix(c));
        let mut buf = Vec::new();
        write_bound_checks_csv(&mut buf, &checks[k]).expect("memory");
        prefixed(&mut check_csv, &buf, k == 0, &prefix(c));
        let b = &budgets[k];
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{}",
            prefix(c),
            b.theorem,
            b.case,
            b.total,
            hit[k].map(|t| t.to_string()).unwrap_or_default(),
            hit[k].is_some_and(|t| t as u64 <= b.total)
        );
    }
    write_atomic(&out.join("budgets.csv"), budget_csv.as_bytes())?;
    write_atomic(&out.join("bound_checks.csv"), check_csv.as_bytes())?;
    write_atomic(&out.join("bounds_summary.csv"), summary.as_bytes())?;
    Ok(BoundsOutcome {
        cells,
        budgets,
        checks,
        hit,
    })
}

/// Appends the CSV in `buf` with `label,repeat` columns prepended, keeping
/// the header only when `header` is set.
fn prefixed(dst: &mut String, buf: &[u8], header: bool, prefix: &str) {
    let text = std::str::from_utf8(buf).expect("CSV writers emit UTF-8");
    for (i, line) in text.lines().enumerate() {
        match i {
            0 if header => {
                let _ = writeln!(dst, "label,repeat,{line}");
            }
            0 => {}
            _ => {
                let _ = writeln!(dst, "{prefix},{line}");
            }
        }
    }
}
