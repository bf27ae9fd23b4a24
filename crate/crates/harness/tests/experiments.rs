use std::fs;
use std::path::Path;

use adanorm::optimizers::{best_error, Method, Trace};
use adanorm_harness::config::SweepSpec;
use adanorm_harness::output::PLOT_FLOOR;
use adanorm_harness::{
    bundled, emit_plot_data, resolve_config, run_experiment, run_sweep, ExperimentConfig,
};

fn small(extra: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&format!(
        r#"
id = "small"
max_iters = 300
repeats = 2
seed = 3
{extra}
[problem]
generator = "least_squares"
n = 100
d = 5
seed = 4

[[method]]
name = "adagrad_norm"
b0 = 0.5
label = "ada"

[[method]]
name = "gd_sqrt"
b0_l = 2.0
label = "gd"
"#
    ))
    .unwrap()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
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

#[test]
fn reruns_are_byte_identical() {
    let cfg = resolve_config("fig1").unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&cfg, a.path()).unwrap();
    run_experiment(&cfg, b.path()).unwrap();
    let (fa, fb) = (read_dir_sorted(a.path()), read_dir_sorted(b.path()));
    assert!(fa.len() >= 4 + 1 + 9);
    assert_eq!(fa, fb);
}

#[test]
fn summary_min_matches_trace_best_error() {
    let dir = tempfile::tempdir().unwrap();
    let cells = run_experiment(&small(""), dir.path()).unwrap();
    assert_eq!(cells.len(), 4);
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    assert_eq!(lines.len(), 5);
    for (row, c) in lines[1..].iter().zip(&cells) {
        let f: Vec<&str> = row.split(',').collect();
        let file = dir.path().join(format!("trace_{}.csv", c.stem()));
        let tr = Trace::read_csv(std::io::BufReader::new(fs::File::open(file).unwrap())).unwrap();
        let min: f64 = f[col("min_err_sq")].parse().unwrap();
        assert_eq!(min, best_error(&tr).unwrap());
        assert_eq!(f[col("label")], c.label);
        assert_eq!(f[col("diverged")], "false");
    }
}

#[test]
fn repeats_draw_distinct_streams() {
    let dir = tempfile::tempdir().unwrap();
    let cells = run_experiment(&small(""), dir.path()).unwrap();
    assert_ne!(cells[0].seed, cells[1].seed);
    assert_ne!(cells[0].trace.records, cells[1].trace.records);
    // batch runs ignore the seed
    assert_eq!(cells[2].trace.records, cells[3].trace.records);
}

#[test]
fn zero_iterations_give_empty_traces() {
    let mut cfg = small("");
    cfg.max_iters = 0;
    cfg.repeats = 1;
    let dir = tempfile::tempdir().unwrap();
    let cells = run_experiment(&cfg, dir.path()).unwrap();
    assert!(cells.iter().all(|c| c.trace.records.is_empty()));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[7], "0");
    assert_eq!(row[9], "");
}

#[test]
fn single_point_sweep_matches_plain_run() {
    let mut cfg = small("");
    cfg.methods.truncate(1);
    cfg.repeats = 1;
    let dir = tempfile::tempdir().unwrap();
    let cells = run_experiment(&cfg, dir.path()).unwrap();
    cfg.sweep = Some(SweepSpec {
        param: adanorm_harness::config::SweepParam::B0,
        values: vec![0.5],
        statistic: Default::default(),
    });
    let rows = run_sweep(&cfg, dir.path()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].statistic, Some(cells[0].trace.final_state.metric()));
}

#[test]
fn sgd_const_far_below_l_diverges() {
    let mut cfg = resolve_config("fig4_robustness").unwrap();
    cfg.methods.retain(|m| m.name == "sgd_const");
    cfg.sweep.as_mut().unwrap().values = vec![0.1];
    let dir = tempfile::tempdir().unwrap();
    let rows = run_sweep(&cfg, dir.path()).unwrap();
    assert_eq!(rows[0].method, Method::SgdConst);
    assert!(rows[0].diverged);
}

#[test]
fn plot_data_floors_exact_zeros() {
    let mut cfg = small("");
    // batch GD from the minimizer's neighbourhood reaches exactly zero error
    cfg.problem.n = 1;
    cfg.problem.d = 1;
    cfg.methods.truncate(1);
    cfg.methods[0].mode = Some("batch".into());
    cfg.methods[0].b0 = Some(1.0);
    cfg.methods[0].eta = 1.0;
    let dir = tempfile::tempdir().unwrap();
    let cells = run_experiment(&cfg, dir.path()).unwrap();
    assert!(cells[0].trace.records.iter().any(|r| r.err_sq == Some(0.0))
        || cells[0].trace.final_state.err_sq == Some(0.0));
    emit_plot_data(&cells, &dir.path().join("p")).unwrap();
    let text = fs::read_to_string(dir.path().join("p/ada_r0.err.dat")).unwrap();
    for line in text.lines() {
        let v: f64 = line.split(' ').nth(1).unwrap().parse().unwrap();
        assert!(v >= PLOT_FLOOR && v.is_finite());
    }
    assert!(dir.path().join("p/ada_r0.b.dat").exists());
    assert!(dir.path().join("p/plot.gp").exists());
}

#[test]
fn fig2_noiseless_sqrt_schedules_trail_constant_ones() {
    let mut cfg = resolve_config("fig2_noiseless").unwrap();
    cfg.repeats = 1;
    let dir = tempfile::tempdir().unwrap();
    let cells = run_experiment(&cfg, dir.path()).unwrap();
    let fin = |label: &str| {
        let c = cells.iter().find(|c| c.label == label).unwrap();
        assert!(!c.trace.diverged, "{label}");
        c.trace.final_state.metric()
    };
    assert!(fin("m4_sgd_sqrt") > 100.0 * fin("m3_sgd_const"));
    assert!(fin("m9_gd_sqrt") > 10.0 * fin("m8_gd_const"));
    for ada in ["ada_gd_b0_1", "ada_gd_b0_below_l"] {
        assert!(fin(ada) < fin("m9_gd_sqrt"), "{ada}");
    }
    for ada in [
        "ada_sgd_b0_1",
        "ada_sgd_b0_below_l",
        "ada_sgd_b0_above_l",
        "ada_gd_b0_above_l",
    ] {
        assert!(fin(ada) < 1e-6, "{ada}");
    }
}

#[test]
fn fig3_b_grows_then_plateaus() {
    let dir = tempfile::tempdir().unwrap();
    let cells = run_experiment(&resolve_config("fig3_b_growth").unwrap(), dir.path()).unwrap();
    let c = cells.iter().find(|c| c.label == "ada_b0_0p1").unwrap();
    let b: Vec<f64> = c.trace.records.iter().map(|r| r.b).collect();
    let last = *b.last().unwrap();
    // most growth happens early and the tail is flat
    assert!(b[300] > 0.9 * last);
    assert!((last - b[b.len() / 2]) / last < 1e-3);
    assert!(b.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn every_bundled_name_resolves() {
    for name in bundled::names() {
        assert_eq!(resolve_config(name).unwrap().id, name);
    }
    assert!(resolve_config("no_such_config").is_err());
}

#[test]
fn ruig_table_is_a_lower_bound_on_the_figure_instance() {
    let mut cfg = resolve_config("ruig_example1").unwrap();
    cfg.problem.generator = adanorm_harness::config::Generator::LeastSquares;
    cfg.problem.d = 20;
    cfg.ruig.as_mut().unwrap().samples = 20_000;
    let dir = tempfile::tempdir().unwrap();
    let est = adanorm_harness::run_ruig(&cfg, dir.path()).unwrap();
    for (e, table) in est.iter().zip([0.9, 0.75, 0.5, 0.25, 0.1]) {
        assert!(e.gamma >= table - 0.05, "{} < {table}", e.gamma);
    }
    assert!(fs::read_to_string(dir.path().join("ruig.csv")).unwrap().starts_with("alpha,gamma,ci\n"));
}
