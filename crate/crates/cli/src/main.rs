//! `wnood`: fit the linear model, score datasets, evaluate AUROCs, run the
//! synthetic demos and sweep the maximum lag.
//!
//! Exit codes: 0 success, 2 configuration or argument error, 3 data or format
//! error, 4 numerical error.

mod commands;
mod run_config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wnood_core::{Error, Result};

use commands::{Demo, DemoParams};
use run_config::{parse_tests, LagMode, RunConfig};

#[derive(Parser)]
#[command(
    name = "wnood",
    version,
    about = "White-noise outlier detection for images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the Gaussian model on the inlier training set.
    Fit(RunArgs),
    /// Score the inlier test set and every outlier setting.
    Score(RunArgs),
    /// AUROC, bootstrap intervals and average ranks from the score files.
    Eval(RunArgs),
    /// Synthetic demonstrations with known answers.
    Demo(DemoArgs),
    /// WN AUROC per setting for several maximum lags.
    #[command(name = "sweep-l")]
    SweepL {
        #[command(flatten)]
        run: RunArgs,
        /// Maximum lags to evaluate, e.g. `300 600 1200 2400`.
        #[arg(value_name = "L")]
        values: Vec<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Key-value run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Shrinkage toward the scaled identity.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, value_enum)]
    lags: Option<LagMode>,
    /// Maximum lag.
    #[arg(long = "L", value_name = "L")]
    max_lag: Option<usize>,
    /// Comma-separated subset of wn, lh, lh2s, lr.
    #[arg(long)]
    tests: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra config entries, e.g. `--set outlier.svhn=svhn.oodt`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut overrides = Vec::new();
        for entry in &self.set {
            let (k, v) = entry
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {entry:?}")))?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        if let Some(s) = self.seed {
            overrides.push(("seed".into(), s.to_string()));
        }
        if let Some(e) = self.eps {
            overrides.push(("eps".into(), e.to_string()));
        }
        if let Some(l) = self.lags {
            overrides.push(("lags".into(), l.to_string()));
        }
        if let Some(l) = self.max_lag {
            overrides.push(("L".into(), l.to_string()));
        }
        if let Some(t) = &self.tests {
            parse_tests(t)?;
            overrides.push(("tests".into(), t.clone()));
        }
        if let Some(o) = &self.out {
            overrides.push(("out".into(), o.display().to_string()));
        }
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Args)]
struct DemoArgs {
    #[arg(value_enum)]
    name: Demo,
    /// Sequence length.
    #[arg(long, default_value_t = 3072)]
    d: usize,
    /// Number of samples (typicality, circle).
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// Lags `1..=k` (circle, null-calibration).
    #[arg(long, default_value_t = 12)]
    k: usize,
    /// Trials (null-calibration).
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report to `<out>/demo_<name>.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(args) => {
            let dir = commands::cmd_fit(&args.config()?)?;
            println!("model written to {}", dir.display());
        }
        Command::Score(args) => {
            for path in commands::cmd_score(&args.config()?)? {
                println!("{}", path.display());
            }
        }
        Command::Eval(args) => {
            let report = commands::cmd_eval(&args.config()?)?;
            print!("{}", report.to_table());
        }
        Command::Demo(args) => {
            let params = DemoParams {
                d: args.d,
                n: args.n,
                k: args.k,
                trials: args.trials,
                seed: args.seed,
            };
            let text = commands::cmd_demo(args.name, &params)?;
            print!("{text}");
            if let Some(dir) = &args.out {
                commands::write_demo(dir, args.name, &text)?;
            }
        }
        Command::SweepL { run, values } => {
            print!("{}", commands::cmd_sweep_l(&run.config()?, &values)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wnood: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
