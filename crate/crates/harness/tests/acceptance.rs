//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::fs;
use std::path::Path;
use std::time::Instant;

use adanorm::bounds::{
    budget_thm1, budget_thm2, budget_thm3, check_descent, check_integral_lemma,
    check_lemma2_contract, check_lemma3, check_lemma4, lemma2_budget, Thm1Input, Thm2Input,
    Thm3Input,
};
use adanorm::optimizers::{
    run, solution_form_update, square_form_update, FinalSnapshot, Method, Mode, RunConfig, Trace,
    TraceMeta,
};
use adanorm::problems::{make_least_squares, Flavor, NoiseModel, ProblemInstance};
use adanorm::ruig::{
    bernstein_failure_probability, default_delta, estimate_ruig, stage_one_budget,
    verify_stage_one,
};
use adanorm::{rng, LeastSquares64, RuigEstimate64, Trace64};
use adanorm_harness::{
    build_instance, bundled, resolve_config, run_experiment, run_ruig, run_sweep, verify_bounds,
    ExperimentConfig,
};
use rand::Rng;

const N_ROWS: usize = 1000;
const D_COLS: usize = 20;
const INSTANCE_SEED: u64 = 1;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn instance() -> LeastSquares64 {
    make_least_squares(N_ROWS, D_COLS, INSTANCE_SEED, NoiseModel::Noiseless).unwrap()
}

/// Coefficient of determination of the least-squares line through `(x, y)`.
fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

fn first_hit(tr: &Trace64, tol: f64) -> Option<usize> {
    tr.records
        .iter()
        .find(|r| r.metric() <= tol)
        .map(|r| r.t)
        .or_else(|| (!tr.diverged && tr.final_state.metric() <= tol).then_some(tr.final_state.t))
}

fn criterion_1() -> Outcome {
    const EPS: f64 = 1e-10;
    const R2_MIN: f64 = 0.99;
    const SECONDS: f64 = 10.0;
    let start = Instant::now();
    let p = instance();
    let (l, mu) = (p.info().smoothness, p.info().mu);
    let delta0 = p.err_sq(&p.default_start()).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for b0 in [1e-3, 1.0, 2.0 * l] {
        let budget = budget_thm2(&Thm2Input {
            b0,
            eta: 1.0,
            l,
            mu,
            delta0,
            eps: EPS,
        })
        .unwrap();
        let iters = budget.total.min(1_000_000) as usize;
        let cfg = RunConfig::new(Method::AdagradNorm, 1.0, b0, iters, 0)
            .with_mode(Mode::Batch)
            .with_stop_tol(EPS);
        let tr = run(&p, &cfg).unwrap();
        let hit = first_hit(&tr, EPS);
        let tail = &tr.records[tr.records.len() / 2..];
        let t: Vec<f64> = tail.iter().map(|r| r.t as f64).collect();
        let le: Vec<f64> = tail.iter().map(|r| r.metric().ln()).collect();
        let r2 = r_squared(&t, &le);
        let good = hit.is_some_and(|h| h as u64 <= budget.total) && r2 >= R2_MIN;
        ok &= good;
        parts.push(format!(
            "b0={b0:.3e}: hit={} T={} R2={r2:.4}",
            hit.map_or("none".into(), |h| h.to_string()),
            budget.total
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs <= SECONDS;
    outcome(ok, format!("{}; {secs:.2}s", parts.join("; ")))
}

fn criterion_2() -> Outcome {
    const EPS: f64 = 1e-8;
    const DELTA_H: f64 = 0.05;
    const ALPHA_FACTOR: f64 = 0.45;
    const GAMMA: f64 = 0.5;
    const RUNS: u64 = 50;
    const ITER_CAP: u64 = 2_000_000;
    const SECONDS: f64 = 60.0;
    let start = Instant::now();
    let p = instance();
    let (l, mu) = (p.info().smoothness, p.info().mu);
    let delta0 = p.err_sq(&p.default_start()).unwrap();
    let alpha = ALPHA_FACTOR * p.min_row_norm_sq();
    let est = RuigEstimate64 {
        epsilon: EPS,
        alpha,
        gamma: GAMMA,
        samples_per_point: 0,
        points_probed: 0,
        gamma_ci_halfwidth: 0.0,
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for b0 in [1.0, 2.0 * l] {
        let c = l;
        let delta = default_delta(b0, c, &est);
        let budget = budget_thm1(&Thm1Input {
            b0,
            eta: 1.0,
            l,
            mu,
            delta0,
            eps: EPS,
            delta_h: DELTA_H,
            alpha,
            gamma: GAMMA,
            delta,
        })
        .unwrap();
        let delta1 = stage_one_budget(b0, c, &est, delta).unwrap().failure_prob;
        let iters = budget.total.min(ITER_CAP) as usize;
        let successes = (0..RUNS)
            .filter(|&s| {
                let cfg = RunConfig::new(Method::AdagradNorm, 1.0, b0, iters, 100 + s)
                    .with_stop_tol(EPS);
                let tr = run(&p, &cfg).unwrap();
                first_hit(&tr, EPS).is_some()
            })
            .count();
        let freq = successes as f64 / RUNS as f64;
        let need = 1.0 - DELTA_H - delta1 - 0.05;
        ok &= freq >= need;
        parts.push(format!(
            "b0={b0:.3e}: {} T={} ran<={iters} success={freq:.2} need>={need:.4}",
            budget.case, budget.total
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs <= SECONDS;
    outcome(ok, format!("{}; {secs:.2}s", parts.join("; ")))
}

fn criterion_3(out: &Path) -> Outcome {
    const MAX_RATIO: f64 = 1e3;
    let cfg = resolve_config("fig4_robustness").unwrap();
    let rows = run_sweep(&cfg, out).unwrap();
    let ada: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == Method::AdagradNorm)
        .map(|r| r.statistic.unwrap())
        .collect();
    let max = ada.iter().cloned().fold(f64::MIN, f64::max);
    let min = ada.iter().cloned().fold(f64::MAX, f64::min);
    let ratio = max / min;
    let sgd = rows.iter().filter(|r| r.method == Method::SgdConst);
    let low: Vec<&_> = sgd.clone().filter(|r| r.value <= 0.5).collect();
    let high: Vec<&_> = sgd.filter(|r| r.value >= 2.0).collect();
    let low_ok = low.iter().all(|r| r.diverged);
    let high_ok = high.iter().all(|r| !r.diverged);
    let stable_low: Vec<String> = low
        .iter()
        .filter(|r| !r.diverged)
        .map(|r| format!("{}L", r.value))
        .collect();
    outcome(
        ratio.is_finite() && ratio <= MAX_RATIO && low_ok && high_ok,
        format!(
            "T={} adagrad max/min={ratio:.3e}; sgd_const diverged for all b0<=L/2: {low_ok} \
             (converged at {stable_low:?}); sgd_const stable for b0>=2L: {high_ok}",
            cfg.max_iters
        ),
    )
}

fn criterion_4(out: &Path) -> Outcome {
    const TOL: f64 = 0.05;
    const TABLE: [f64; 5] = [0.9, 0.75, 0.5, 0.25, 0.1];
    let cfg = resolve_config("ruig_example1").unwrap();
    let est = run_ruig(&cfg, &out.join("ex1")).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (e, want) in est.iter().zip(TABLE) {
        ok &= (e.gamma - want).abs() <= TOL;
        parts.push(format!("{:.4}(want {want})", e.gamma));
    }
    let cfg2 = resolve_config("ruig_example2").unwrap();
    let est2 = run_ruig(&cfg2, &out.join("ex2")).unwrap();
    let exact = est2[0].gamma == 1.0;
    outcome(
        ok && exact && est.len() == TABLE.len(),
        format!(
            "n=d={}, {} samples: {}; example 2 gamma={}",
            cfg.problem.n,
            cfg.ruig.as_ref().unwrap().samples,
            parts.join(" "),
            est2[0].gamma
        ),
    )
}

fn criterion_5() -> Outcome {
    const INSTANCES: u64 = 100;
    const FUZZ: usize = 1000;
    const PAIRS: usize = 1000;
    const FORM_TOL: f64 = 1e-10;
    let mut failures = Vec::new();
    for k in 0..INSTANCES {
        let mut r = rng::stream(5000 + k, 0);
        let n = r.random_range(30..200);
        let d = r.random_range(2..8);
        let b0 = 10f64.powf(r.random_range(-3.0..1.0));
        let eta = r.random_range(0.2..3.0);
        let mode = if r.random_bool(0.5) {
            Mode::Batch
        } else {
            Mode::Stochastic
        };
        let eps = r.random_range(0.05..0.9);
        let p = make_least_squares(n, d, 7000 + k, NoiseModel::Noiseless).unwrap();
        let (l, mu) = (p.info().smoothness, p.info().mu);
        let delta0 = p.err_sq(&p.default_start()).unwrap();
        let cfg = RunConfig::new(Method::AdagradNorm, eta, b0, 1500, k).with_mode(mode);
        let tr = run(&p, &cfg).unwrap();
        let c = eta * l;
        let mut reports = vec![
            check_lemma3(&tr, c, eta, b0, delta0).unwrap(),
            check_lemma4(&tr, c, eta, l, b0, delta0).unwrap(),
            check_descent(&tr, eta, l).unwrap(),
        ];
        let c2 = (mu + l) / 2.0;
        let n2 = lemma2_budget(b0, c2, mu, eps, Flavor::StronglyConvex).unwrap();
        let tr2 = run(
            &p,
            &RunConfig::new(Method::AdagradNorm, 1.0, b0, n2 as usize, 0).with_mode(Mode::Batch),
        )
        .unwrap();
        reports.push(check_lemma2_contract(&tr2, c2, eps, n2).unwrap());
        for rep in reports {
            if !rep.passed || (rep.applicable && rep.slack < 0.0) || tr.diverged {
                failures.push(format!("instance {k}: {} slack {:e}", rep.lemma, rep.slack));
            }
        }
    }
    let mut r = rng::stream(6000, 0);
    let mut fuzz_fail = 0;
    for _ in 0..FUZZ {
        let len = r.random_range(1..200);
        let mut a = vec![r.random_range(1.0..10.0)];
        for _ in 1..len {
            let v: f64 = if r.random_bool(0.1) {
                0.0
            } else {
                10f64.powf(r.random_range(-4.0..3.0))
            };
            a.push(v);
        }
        if !check_integral_lemma(&a).unwrap() {
            fuzz_fail += 1;
        }
    }
    let mut worst: f64 = 0.0;
    for _ in 0..PAIRS {
        let b = 10f64.powf(r.random_range(-3.0..3.0));
        let g = 10f64.powf(r.random_range(-6.0..6.0));
        let (s, q) = (square_form_update(b, g), solution_form_update(b, g));
        worst = worst.max((s - q).abs() / s);
    }
    outcome(
        failures.is_empty() && fuzz_fail == 0 && worst <= FORM_TOL,
        format!(
            "{INSTANCES} instances, {} lemma failures{}; integral fuzz {fuzz_fail}/{FUZZ} failed; \
             max form rel diff {worst:.2e}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn criterion_6() -> Outcome {
    const EPS: f64 = 0.1;
    const RUNS: u64 = 200;
    const ETA: f64 = 1.0;
    const B0: f64 = 0.1;
    let p = instance();
    let c = ETA * p.info().smoothness;
    let alpha = 0.45 * p.min_row_norm_sq();
    let est = estimate_ruig(&p, EPS, &[alpha], 20, 10_000, 17).unwrap()[0];
    let delta = default_delta(B0, c, &est);
    let budget = stage_one_budget(B0, c, &est, delta).unwrap();
    let seeds: Vec<u64> = (0..RUNS).map(|s| 9000 + s).collect();
    let out = verify_stage_one(&p, &budget, EPS, ETA, B0, &seeds).unwrap();
    let need = 1.0 - budget.failure_prob - 0.05;
    outcome(
        out.frequency >= need,
        format!(
            "gamma_hat={:.3} N={} delta1={:.3e} success={}/{} need>={need:.4}",
            est.gamma, budget.n, budget.failure_prob, out.successes, out.runs
        ),
    )
}

fn criterion_7() -> Outcome {
    const TOL: f64 = 1e-3;
    const ITERS: usize = 5000;
    let cfg = resolve_config("appendix_e2").unwrap();
    let inst = build_instance(&cfg.problem).unwrap();
    let p = inst.as_dyn();
    let seed = rng::derive_seed(cfg.seed, 0);
    let ada = run(
        p,
        &RunConfig::new(Method::AdagradNorm, 100.0, 0.1, ITERS, seed).with_batch_size(20),
    )
    .unwrap();
    let t_ada = first_hit(&ada, TOL);
    // GD_const with the stepsize AdaGrad-Norm actually took at its first step
    let b1 = ada.records[0].b;
    let gd = run(
        p,
        &RunConfig::new(Method::GdConst, 100.0, b1, ITERS, seed).with_mode(Mode::Batch),
    )
    .unwrap();
    let t_gd = first_hit(&gd, TOL);
    let faster = match (t_ada, t_gd) {
        (Some(a), Some(g)) => 2 * a <= g,
        (Some(_), None) => true,
        _ => false,
    };
    let gd_at = |t: usize| {
        gd.records
            .get(t)
            .map_or(gd.final_state.metric(), |r| r.metric())
    };
    outcome(
        t_ada.is_some() && faster,
        format!(
            "adagrad hit 1e-3 at {}; gd_const (stepsize {:.3e}) hit at {}, diverged={}, gap at that t={:.3e}",
            t_ada.map_or("never".into(), |t| t.to_string()),
            100.0 / b1,
            t_gd.map_or("never".into(), |t| t.to_string()),
            gd.diverged,
            gd_at(t_ada.unwrap_or(0)),
        ),
    )
}

/// Equal when rounded to 6 significant digits.
fn close6(a: f64, b: f64) -> bool {
    format!("{a:.5e}") == format!("{b:.5e}")
}

fn criterion_8() -> Outcome {
    let mut bad = Vec::new();
    let t1 = budget_thm1(&Thm1Input {
        b0: 2.0,
        eta: 1.0,
        l: 1.0,
        mu: 0.5,
        delta0: 1.0,
        eps: 0.1,
        delta_h: 0.1,
        alpha: 1.0,
        gamma: 0.5,
        delta: 1.0,
    })
    .unwrap()
    .total;
    if t1 != ((2.0f64 + 1.0) / 0.5 * 100f64.ln()).ceil() as u64 + 1 || t1 != 29 {
        bad.push(format!("thm1 {t1}"));
    }
    let e = std::f64::consts::E;
    let t2 = budget_thm2(&Thm2Input {
        b0: 2.0,
        eta: 1.0,
        l: 1.0,
        mu: 1.0,
        delta0: 1.0,
        eps: e.powi(-2),
    })
    .unwrap()
    .total;
    let ref2 = 1 + (f64::max(1.0 * (1.0 + 1.0) / 1.0, 1.0) * 2.0).ceil() as u64;
    if t2 != ref2 || t2 != 5 {
        bad.push(format!("thm2 {t2}"));
    }
    let t3 = budget_thm3(&Thm3Input {
        b0: 2.0,
        eta: 1.0,
        l: 1.0,
        mu: 1.0,
        gap0: 1.0,
        eps: e.recip(),
    })
    .unwrap()
    .total;
    if t3 != ((2.0f64 + 2.0) / 1.0 * 1.0).ceil() as u64 + 1 || t3 != 5 {
        bad.push(format!("thm3 {t3}"));
    }
    let n = lemma2_budget(1.0, 2.0, 1.0, 0.4, Flavor::StronglyConvex).unwrap();
    if n != (4f64.ln() / 1.1f64.ln()).ceil() as u64 + 1 || n != 16 {
        bad.push(format!("lemma2 {n}"));
    }
    let d1 = bernstein_failure_probability(100, 0.5, 20.0);
    if !close6(d1, (-400.0f64 / 90.0).exp()) || !close6(d1, 0.0117436) {
        bad.push(format!("delta1 {d1}"));
    }
    let meta = TraceMeta {
        method: Method::AdagradNorm,
        mode: Mode::Batch,
        problem: "synthetic".into(),
        seed: 0,
        eta: 1.0,
        b0: 1.0,
        batch_size: 1,
        stride: 1,
        decay: 0.2,
    };
    let fin = FinalSnapshot {
        t: 0,
        b: 1.0,
        err_sq: Some(1.0),
        gap: 1.0,
    };
    let tr = Trace::from_records(meta, Vec::new(), fin, false);
    let bmax = check_lemma4(&tr, 2.0, 1.0, 2.0, 1.0, 1.0).unwrap().bound;
    let ref4 = 2.0 + 2.0 * (1.0 + (4f64.ln() + 1.0));
    if !close6(bmax, ref4) || !close6(bmax, 8.77259) {
        bad.push(format!("b_max {bmax}"));
    }
    outcome(
        bad.is_empty(),
        format!(
            "T={t1},{t2},{t3} N={n} delta1={d1:.6} b_max bound={bmax:.6}{}",
            if bad.is_empty() {
                String::new()
            } else {
                format!("; mismatches: {bad:?}")
            }
        ),
    )
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn run_all_commands(cfg: &ExperimentConfig, dir: &Path) {
    if cfg.ruig.is_some() {
        run_ruig(cfg, dir).unwrap();
    } else if cfg.sweep.is_some() {
        run_sweep(cfg, dir).unwrap();
    } else if cfg.bounds.is_some() {
        verify_bounds(cfg, dir).unwrap();
    } else {
        run_experiment(cfg, dir).unwrap();
    }
}

fn criterion_9(out: &Path) -> Outcome {
    let mut differing = Vec::new();
    let mut files = 0;
    for name in bundled::names() {
        let cfg = resolve_config(name).unwrap();
        let (a, b) = (out.join(format!("{name}_a")), out.join(format!("{name}_b")));
        run_all_commands(&cfg, &a);
        run_all_commands(&cfg, &b);
        let (sa, sb) = (snapshot(&a), snapshot(&b));
        files += sa.len();
        if sa != sb || sa.is_empty() {
            differing.push(name);
        }
    }
    outcome(
        differing.is_empty(),
        format!(
            "{} bundled configs, {files} files compared; differing: {differing:?}",
            bundled::names().count()
        ),
    )
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("batch linear convergence", Box::new(criterion_1)),
        ("stochastic linear convergence", Box::new(criterion_2)),
        ("robustness sweep", Box::new(|| criterion_3(&root.join("c3")))),
        ("RUIG table", Box::new(|| criterion_4(&root.join("c4")))),
        ("lemma suite", Box::new(criterion_5)),
        ("stage-one frequency", Box::new(criterion_6)),
        ("PL two-layer ReLU", Box::new(criterion_7)),
        ("budget calculators", Box::new(criterion_8)),
        ("determinism", Box::new(|| criterion_9(&root.join("c9")))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        if !o.passed {
            failed += 1;
        }
        println!("{tag} criterion {} ({name}): {}", i + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
