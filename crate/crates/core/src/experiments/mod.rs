//! Config-driven experiment runner: builds the initial data, runs the named
//! experiment and writes CSV series, JSON reports, checkpoints and a run
//! manifest into the output directory.

mod config;
mod runs;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    ExperimentConfig, ExperimentKind, InitialData, OutputConfig, PhysicsConfig, ScanConfig,
    TimeConfig, SCHEMA_VERSION,
};
pub use runs::{
    BlowupRow, EvolveReport, LimitRow, MassThresholdReport, RunReport, ScatteringReport,
    ThresholdRun,
};

use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::ground_state::{dilate, solve_ground_state, GroundStateError, GroundStateResult};
use crate::hartree::HartreeError;
use crate::inequality::InequalityError;
use crate::observables::ObservableError;
use crate::propagator::{EvolutionStatus, PropagatorError, StepMode};
use crate::spectral::{ComplexField, Grid, SpectralError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Hartree(#[from] HartreeError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    GroundState(#[from] GroundStateError),
    #[error(transparent)]
    Inequality(#[from] InequalityError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("writing results: {0}")]
    Csv(#[from] csv::Error),
    #[error("writing results: {0}")]
    Json(#[from] serde_json::Error),
}

/// Record of one run. Every file written to the output directory is listed
/// in `files`, relative to that directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub code_version: String,
    /// Wall-clock start and end, seconds since the Unix epoch.
    pub started_at: f64,
    pub finished_at: f64,
    pub status: EvolutionStatus,
    /// Experiment-level verdict, for experiments that define one.
    pub passed: Option<bool>,
    pub files: Vec<String>,
    pub report: RunReport,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `outputs.directory`.
    pub out: Option<PathBuf>,
    pub workers: usize,
}

/// Output directory plus the list of files written into it.
pub(crate) struct Emitter {
    dir: PathBuf,
    files: Vec<String>,
}

impl Emitter {
    fn new(dir: PathBuf) -> Result<Self, ExperimentError> {
        std::fs::create_dir_all(&dir).map_err(|e| ExperimentError::Io {
            path: dir.clone(),
            source: e,
        })?;
        Ok(Emitter {
            dir,
            files: Vec::new(),
        })
    }

    pub(crate) fn path(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.dir.join(name)
    }

    pub(crate) fn create(&mut self, name: &str) -> Result<BufWriter<File>, ExperimentError> {
        let path = self.path(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| ExperimentError::Io { path, source: e })
    }

    pub(crate) fn json<T: Serialize>(
        &mut self,
        name: &str,
        value: &T,
    ) -> Result<(), ExperimentError> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        use std::io::Write;
        let path = self.dir.join(name);
        w.write_all(b"\n")
            .and_then(|_| w.flush())
            .map_err(|e| ExperimentError::Io { path, source: e })
    }

    pub(crate) fn csv(
        &mut self,
        name: &str,
    ) -> Result<csv::Writer<BufWriter<File>>, ExperimentError> {
        Ok(csv::Writer::from_writer(self.create(name)?))
    }

    pub(crate) fn checkpoint(
        &mut self,
        name: &str,
        checkpoint: &Checkpoint,
    ) -> Result<(), ExperimentError> {
        let path = self.path(name);
        Ok(checkpoint.save(path)?)
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// Executes `config` and writes its outputs and manifest.
pub fn run(
    config: &ExperimentConfig,
    options: &RunOptions,
) -> Result<RunManifest, ExperimentError> {
    config.validate()?;
    let started_at = unix_now();
    let dir = options
        .out
        .clone()
        .unwrap_or_else(|| config.outputs.directory.clone());
    let mut emitter = Emitter::new(dir)?;
    {
        let path = emitter.path(CONFIG_FILE);
        std::fs::write(&path, config.with_absolute_paths().to_toml_string())
            .map_err(|e| ExperimentError::Io { path, source: e })?;
    }
    let workers = options.workers.max(1);
    let (status, passed, report) = runs::dispatch(config, &mut emitter, workers)?;
    emitter.path(MANIFEST_FILE);
    let manifest = RunManifest {
        experiment: config.experiment,
        config_hash: config.hash(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: unix_now(),
        status,
        passed,
        files: emitter.files.clone(),
        report,
    };
    emitter.json(MANIFEST_FILE, &manifest)?;
    Ok(manifest)
}

/// Config that continues the evolution saved in `checkpoint_path` up to
/// `t_final`. Physics and cadence come from `base` when given (grid and
/// parameters stored in the checkpoint take precedence); otherwise `ψ ≡ 1`,
/// the checkpoint's step size and an observer every ten steps.
pub fn resume_config(
    checkpoint_path: &Path,
    t_final: f64,
    base: Option<&ExperimentConfig>,
) -> Result<ExperimentConfig, ExperimentError> {
    let ck = Checkpoint::load(checkpoint_path)?;
    let grid = ck.field.grid().spec();
    let mut config = match base {
        Some(b) => b.clone(),
        None => {
            let mut c = ExperimentConfig::evolve_template(
                grid,
                ck.mass,
                ck.alpha,
                ck.gamma,
                ck.lambda as i64,
            );
            c.time.step = StepMode::Fixed { dt: ck.dt };
            c.time.observe_every = 10.0 * ck.dt;
            c
        }
    };
    config.experiment = ExperimentKind::Evolve;
    config.grid = grid;
    config.physics.m = ck.mass;
    config.physics.alpha = ck.alpha;
    config.physics.gamma = ck.gamma;
    config.physics.lambda = ck.lambda as i64;
    let absolute =
        std::fs::canonicalize(checkpoint_path).unwrap_or_else(|_| checkpoint_path.to_path_buf());
    config.initial_data = InitialData::FromCheckpoint { path: absolute };
    config.time.t_final = t_final;
    config.outputs.checkpoint_every = None;
    if !(t_final > ck.t) {
        return Err(ExperimentError::InvalidConfig {
            field: "t_final".into(),
            reason: format!("must exceed the checkpoint time {}", ck.t),
        });
    }
    config.validate()?;
    Ok(config)
}

/// Continues a checkpointed evolution; see [`resume_config`].
pub fn resume(
    checkpoint_path: &Path,
    t_final: f64,
    base: Option<&ExperimentConfig>,
    options: &RunOptions,
) -> Result<RunManifest, ExperimentError> {
    run(&resume_config(checkpoint_path, t_final, base)?, options)
}

/// Initial field and time described by `config.initial_data`.
pub fn initial_field(
    config: &ExperimentConfig,
    grid: &Grid,
) -> Result<(ComplexField, f64), ExperimentError> {
    let dim = grid.dim();
    match &config.initial_data {
        InitialData::Gaussian {
            width,
            amplitude,
            chirp,
            center,
        } => {
            let c: Vec<f64> = if center.is_empty() {
                vec![0.0; dim]
            } else {
                center.clone()
            };
            let u = ComplexField::from_fn(grid, |x| {
                let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                *amplitude * Complex64::new(-r2 / (2.0 * width * width), chirp * r2).exp()
            });
            Ok((u, 0.0))
        }
        InitialData::PlaneModulated {
            wavevector,
            amplitude,
            envelope_width,
        } => {
            let u = ComplexField::from_fn(grid, |x| {
                let phase: f64 = x.iter().zip(wavevector).map(|(a, k)| a * k).sum();
                let env = envelope_width.map_or(1.0, |w| {
                    let r2: f64 = x.iter().map(|a| a * a).sum();
                    (-r2 / (2.0 * w * w)).exp()
                });
                Complex64::from_polar(amplitude * env, phase)
            });
            Ok((u, 0.0))
        }
        InitialData::FromCheckpoint { path } => {
            let ck = Checkpoint::load(config.resolve(path))?;
            if ck.field.grid() != grid {
                return Err(ExperimentError::InvalidConfig {
                    field: "initial_data.path".into(),
                    reason: format!(
                        "checkpoint grid {:?} differs from the config grid",
                        ck.field.grid().spec()
                    ),
                });
            }
            Ok((ck.field, ck.t))
        }
        InitialData::GroundStateRescaled {
            mass,
            amplitude,
            concentration,
        } => {
            let gs = ground_state(config, grid)?;
            Ok((
                rescale_profile(&gs.q, *amplitude, *concentration, *mass)?,
                0.0,
            ))
        }
    }
}

/// `a λ^{n/2} q(λx)`, or the same profile normalized to `‖·‖²_{L²} = mass`.
pub fn rescale_profile(
    q: &ComplexField,
    amplitude: f64,
    concentration: f64,
    mass: Option<f64>,
) -> Result<ComplexField, ExperimentError> {
    let dim = q.grid().dim() as i32;
    let shaped = if concentration == 1.0 {
        q.clone()
    } else {
        dilate(q, concentration)?
    };
    let factor = match mass {
        Some(mass) => (mass / shaped.l2_norm_sq()).sqrt(),
        None => amplitude * concentration.powf(0.5 * dim as f64),
    };
    Ok(&shaped * factor)
}

/// Ground state for the config's `(α, γ)` on `grid`, with `scan.tol`
/// (default `1e-7`) and `scan.max_iter` (default 400).
pub fn ground_state(
    config: &ExperimentConfig,
    grid: &Grid,
) -> Result<GroundStateResult, ExperimentError> {
    let tol = config.scan.tol.unwrap_or(1e-7);
    let max_iter = config.scan.max_iter.unwrap_or(400);
    let gs = solve_ground_state(
        grid,
        config.physics.alpha,
        config.physics.gamma,
        tol,
        max_iter,
    )?;
    if !gs.converged {
        log::warn!(
            "ground state stopped at residual {:e} (tol {:e})",
            gs.residual,
            tol
        );
    }
    Ok(gs)
}
