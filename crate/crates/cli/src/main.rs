use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fhnls::experiments::{self, ExperimentConfig, ExperimentKind, RunManifest, RunOptions};
use fhnls::inequality::Suite;
use fhnls::GridSpec;

/// Fractional Hartree NLS simulator: runs experiments from TOML configs.
#[derive(Parser)]
#[command(name = "fhnls", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `outputs.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Solve for the ground state Q and print its summary.
    GroundState {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        gamma: f64,
        /// Space dimension.
        #[arg(long)]
        n: usize,
        /// Points per axis.
        #[arg(long, default_value_t = 64)]
        points: usize,
        #[arg(long, default_value_t = 12.0)]
        half_length: f64,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value_t = 400)]
        max_iter: usize,
        #[arg(long, default_value = "out/ground_state")]
        out: PathBuf,
    },
    /// Run the pinned inequality suite and print the reports.
    CheckInequalities {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value = "out/inequalities")]
        out: PathBuf,
    },
    /// Continue an evolution from a checkpoint.
    Resume {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        t_final: f64,
        /// Config supplying ψ and the step policy; defaults to the
        /// `config.toml` next to the checkpoint when present.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    /// The standard suite.
    All,
    Standard,
    Quick,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Suite {
        match s {
            SuiteArg::All | SuiteArg::Standard => Suite::Standard,
            SuiteArg::Quick => Suite::Quick,
        }
    }
}

fn report(manifest: &RunManifest, dir: &std::path::Path) -> ExitCode {
    let verdict = match manifest.passed {
        Some(true) => "passed",
        Some(false) => "FAILED",
        None => "no verdict",
    };
    eprintln!(
        "{:?}: status {:?}, {verdict}; outputs in {}",
        manifest.experiment,
        manifest.status,
        dir.display()
    );
    if manifest.passed == Some(false) {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            out,
            workers,
        } => {
            let cfg = ExperimentConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            let dir = out.clone().unwrap_or_else(|| cfg.outputs.directory.clone());
            let manifest = experiments::run(&cfg, &RunOptions { out, workers })?;
            Ok(report(&manifest, &dir))
        }
        Command::GroundState {
            alpha,
            gamma,
            n,
            points,
            half_length,
            tol,
            max_iter,
            out,
        } => {
            let mut cfg = ExperimentConfig::evolve_template(
                GridSpec::new(n, points, half_length),
                0.0,
                alpha,
                gamma,
                -1,
            );
            cfg.experiment = ExperimentKind::GroundState;
            cfg.scan.tol = Some(tol);
            cfg.scan.max_iter = Some(max_iter);
            let manifest = experiments::run(
                &cfg,
                &RunOptions {
                    out: Some(out.clone()),
                    workers: 1,
                },
            )?;
            println!("{}", serde_json::to_string_pretty(&manifest.report)?);
            Ok(report(&manifest, &out))
        }
        Command::CheckInequalities {
            suite,
            seed,
            workers,
            out,
        } => {
            let mut cfg =
                ExperimentConfig::evolve_template(GridSpec::new(2, 64, 8.0), 0.0, 1.5, 1.0, -1);
            cfg.experiment = ExperimentKind::Inequalities;
            cfg.seed = seed;
            cfg.scan.suite = Some(suite.into());
            let manifest = experiments::run(
                &cfg,
                &RunOptions {
                    out: Some(out.clone()),
                    workers,
                },
            )?;
            println!("{}", serde_json::to_string_pretty(&manifest.report)?);
            Ok(report(&manifest, &out))
        }
        Command::Resume {
            checkpoint,
            t_final,
            config,
            out,
            workers,
        } => {
            let sibling = checkpoint
                .parent()
                .map(|d| d.join(experiments::CONFIG_FILE));
            let config = config.or(sibling.filter(|p| p.exists()));
            let base = config
                .as_ref()
                .map(|p| {
                    ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))
                })
                .transpose()?;
            let cfg = experiments::resume_config(&checkpoint, t_final, base.as_ref())?;
            // Never overwrite the run being resumed.
            let out = out.or_else(|| checkpoint.parent().map(|d| d.join("resume")));
            let dir = out.clone().unwrap_or_else(|| cfg.outputs.directory.clone());
            let manifest = experiments::run(&cfg, &RunOptions { out, workers })?;
            Ok(report(&manifest, &dir))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
