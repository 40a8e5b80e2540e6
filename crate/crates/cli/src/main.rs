use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use keyrank::commands::{
    cmd_evaluate, cmd_gap_sweep, cmd_pseudo_label, cmd_run_all, cmd_theory_check, cmd_train,
    parse_gaps, SweepArgs, DEFAULT_GAPS,
};
use keyrank::{CliError, PipelineConfig};
use keyrank_core::theory::{MixtureSpec, NoiseKind, SuiteConfig};

#[derive(Parser)]
#[command(
    name = "keyrank",
    version,
    about = "Rank documents from a few keywords"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set loss=logistic`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig, CliError> {
        PipelineConfig::load(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Split the corpus into corrupted positive and negative sets.
    PseudoLabel(ConfigArgs),
    /// Train a ranker on a split.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Split file (default: <output_dir>/split.txt).
        #[arg(long)]
        split: Option<PathBuf>,
    },
    /// Score a labeled test corpus and report metrics.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Model file (default: <output_dir>/model.txt).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Split file, needed for the split-ratio prior.
        #[arg(long)]
        split: Option<PathBuf>,
    },
    /// Check the exact-risk identities on random finite problems.
    TheoryCheck {
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Add an instance with theta = theta_prime.
        #[arg(long)]
        inject_equal_gap: bool,
    },
    /// Clean test AUC against the contamination gap on synthetic mixtures.
    GapSweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        /// Comma-separated theta:theta_prime pairs, largest gap first.
        #[arg(long)]
        gaps: Option<String>,
        #[arg(long, default_value_t = 10)]
        dim: usize,
        #[arg(long, default_value_t = 2.0)]
        separation: f64,
        /// `gaussian` or `t:<degrees of freedom>`.
        #[arg(long, default_value = "gaussian")]
        noise: String,
        #[arg(long, default_value_t = 0.0)]
        outlier_rate: f64,
        #[arg(long, default_value_t = 0.0)]
        outlier_shift: f64,
        /// Size of each corrupted set.
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        n_test: usize,
    },
    /// pseudo-label, train and evaluate in one go.
    RunAll(ConfigArgs),
}

fn parse_noise(text: &str) -> Result<NoiseKind, CliError> {
    match text.split_once(':') {
        None if text == "gaussian" => Ok(NoiseKind::Gaussian),
        Some(("t", df)) => df
            .parse()
            .map(|df| NoiseKind::StudentT { df })
            .map_err(|_| CliError::Usage(format!("invalid degrees of freedom {df:?}"))),
        _ => Err(CliError::Usage(format!("unknown noise {text:?}"))),
    }
}

fn run(command: Command) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    let print = |out: &mut io::StdoutLock, s: &str| {
        let _ = out.write_all(s.as_bytes());
    };
    match command {
        Command::PseudoLabel(args) => {
            let outcome = cmd_pseudo_label(&args.load()?)?;
            print(&mut out, &outcome.summary());
        }
        Command::Train { config, split } => {
            let outcome = cmd_train(&config.load()?, split.as_deref())?;
            print(&mut out, &outcome.summary());
        }
        Command::Evaluate {
            config,
            model,
            split,
        } => {
            let outcome = cmd_evaluate(&config.load()?, model.as_deref(), split.as_deref())?;
            print(&mut out, &outcome.table());
        }
        Command::RunAll(args) => {
            let (p, t, e) = cmd_run_all(&args.load()?)?;
            print(&mut out, &p.summary());
            print(&mut out, &t.summary());
            print(&mut out, &e.table());
        }
        Command::TheoryCheck {
            tol,
            instances,
            seed,
            inject_equal_gap,
        } => {
            let suite = SuiteConfig {
                tol,
                instances,
                seed,
                inject_equal_gap,
                ..SuiteConfig::default()
            };
            cmd_theory_check(&suite, &mut out)?;
        }
        Command::GapSweep {
            config,
            seeds,
            gaps,
            dim,
            separation,
            noise,
            outlier_rate,
            outlier_shift,
            n,
            n_test,
        } => {
            let args = SweepArgs {
                mixture: MixtureSpec {
                    dim,
                    separation,
                    noise: parse_noise(&noise)?,
                    outlier_rate,
                    outlier_shift,
                    n_cp: n,
                    n_cn: n,
                    n_test_per_class: n_test,
                },
                gaps: gaps
                    .as_deref()
                    .map_or(Ok(DEFAULT_GAPS.to_vec()), parse_gaps)?,
                n_seeds: seeds,
            };
            let sweep = cmd_gap_sweep(&config.load()?, &args)?;
            print(&mut out, &sweep.to_csv());
            print(
                &mut out,
                &format!(
                    "spearman={} worst_inversion={}\n",
                    sweep.spearman,
                    sweep.worst_inversion()
                ),
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
