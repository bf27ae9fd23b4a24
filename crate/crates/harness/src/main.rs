use std::path::PathBuf;
use std::process::ExitCode;

use adanorm_harness::{
    bundled, resolve_config, run_experiment, run_ruig, run_sweep, verify_bounds, ExperimentConfig,
    HarnessError,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adanorm-harness", version, about = "Run AdaGrad-Norm experiments from TOML configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (method, repeat) cell and write traces, summary and plot data.
    Run(Common),
    /// Run the [sweep] grid and write sweep.csv.
    Sweep(Common),
    /// Estimate RUIG fractions and write ruig.csv.
    Ruig(Common),
    /// Compute theorem budgets and check lemma bounds on AdaGrad-Norm traces.
    VerifyBounds(Common),
    /// List the configs compiled into the binary.
    ListBundled,
}

#[derive(Args)]
struct Common {
    /// Bundled config name or path to a TOML file.
    config: String,
    /// Output directory (default: out/<id>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the repeat count.
    #[arg(long)]
    repeats: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), HarnessError> {
        let mut cfg = resolve_config(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.repeats {
            cfg.repeats = r;
        }
        cfg.validate()?;
        let out = self
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(&cfg.id));
        Ok((cfg, out))
    }
}

fn dispatch(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::ListBundled => {
            for name in bundled::names() {
                println!("{name}");
            }
        }
        Command::Run(c) => {
            let (cfg, out) = c.load()?;
            let cells = run_experiment(&cfg, &out)?;
            let diverged = cells.iter().filter(|c| c.trace.diverged).count();
            println!(
                "{}: {} cells ({diverged} diverged) -> {}",
                cfg.id,
                cells.len(),
                out.display()
            );
        }
        Command::Sweep(c) => {
            let (cfg, out) = c.load()?;
            let rows = run_sweep(&cfg, &out)?;
            println!("{}: {} sweep rows -> {}", cfg.id, rows.len(), out.display());
        }
        Command::Ruig(c) => {
            let (cfg, out) = c.load()?;
            for e in run_ruig(&cfg, &out)? {
                println!("alpha={:e} gamma={:.4} ci=±{:.4}", e.alpha, e.gamma, e.gamma_ci_halfwidth);
            }
        }
        Command::VerifyBounds(c) => {
            let (cfg, out) = c.load()?;
            let r = verify_bounds(&cfg, &out)?;
            for (k, cell) in r.cells.iter().enumerate() {
                let failed: Vec<&str> = r.checks[k]
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.lemma)
                    .collect();
                println!(
                    "{}: {} {} T={} hit={} failed_checks={:?}",
                    cell.stem(),
                    r.budgets[k].theorem,
                    r.budgets[k].case,
                    r.budgets[k].total,
                    r.hit[k].map_or("-".to_string(), |t| t.to_string()),
                    failed
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
