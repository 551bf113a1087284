//! Versioned TOML schema for experiment runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::hartree::{Coupling, PotentialSpec, RadialProfile, RadialTable};
use crate::inequality::Suite;
use crate::propagator::{StepController, StepMode, DEFAULT_BLOWUP_THRESHOLD};
use crate::spectral::GridSpec;

use super::ExperimentError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Evolve,
    BlowupScan,
    MassThreshold,
    Scattering,
    LimitMToZero,
    LimitMToInfinity,
    GroundState,
    Inequalities,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub m: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// `+1` defocusing, `-1` focusing.
    pub lambda: i64,
    /// `"one"`, `"zero"` or the path of a `rho,psi[,dpsi]` CSV table,
    /// relative to the config file.
    #[serde(default = "default_psi")]
    pub psi: String,
}

fn default_psi() -> String {
    "one".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `A exp(−|x−c|²/(2w²) + i b |x−c|²)`.
    Gaussian {
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        chirp: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// `A e^{ik·x}`, times `exp(−|x|²/(2w²))` when a width is given.
    PlaneModulated {
        wavevector: Vec<f64>,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        envelope_width: Option<f64>,
    },
    FromCheckpoint {
        path: PathBuf,
    },
    /// `a λ^{n/2} Q(λx)` with `Q` the ground state for `(α, γ)`; `mass`,
    /// when given, overrides `amplitude` and fixes `‖φ‖²_{L²}`.
    GroundStateRescaled {
        #[serde(default)]
        mass: Option<f64>,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        concentration: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_final: f64,
    pub step: StepMode,
    /// Observer cadence.
    pub observe_every: f64,
    #[serde(default = "default_threshold")]
    pub blowup_threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_BLOWUP_THRESHOLD
}

impl TimeConfig {
    pub fn controller(&self) -> StepController {
        StepController {
            mode: self.step,
            blowup_threshold: self.blowup_threshold,
            observe_every: Some(self.observe_every),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    /// Write `checkpoint_<step>.bin` at this cadence (evolve only).
    #[serde(default)]
    pub checkpoint_every: Option<f64>,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: default_directory(),
            checkpoint_every: None,
        }
    }
}

/// Experiment-specific parameters; each experiment reads the fields it
/// needs and falls back to the documented defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    /// Target masses `‖φ‖²_{L²}` (blowup scan) or dispersion masses `m`
    /// (limit experiments).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub super_amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub super_concentration: Option<f64>,
    /// Growth factor of `‖u‖_{Ḣ^{α/2}}` allowed for the sub-threshold run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_bound: Option<f64>,
    /// Sobolev index of comparison norms; defaults to `γ/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sobolev_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strichartz_q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strichartz_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation_after: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<Suite>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub grid: GridSpec,
    pub physics: PhysicsConfig,
    pub initial_data: InitialData,
    pub time: TimeConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scan: ScanConfig,
    /// Directory that relative paths resolve against; not serialized.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn invalid(field: &str, reason: impl Into<String>) -> ExperimentError {
    ExperimentError::InvalidConfig {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        let config = Self::parse(text)?;
        config.validate()?;
        Ok(config)
    }

    fn parse(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| {
            let field = e.span().map(|s| locate(text, s.start)).unwrap_or_default();
            invalid(&field, e.message().to_string())
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut config = Self::parse(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf);
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configs serialize to TOML")
    }

    /// SHA-256 of the canonical TOML form, in hex.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if path.is_relative() => base.join(path),
            _ => path.to_path_buf(),
        }
    }

    /// Copy whose file references no longer depend on `base_dir`, suitable
    /// for saving next to the run outputs.
    pub fn with_absolute_paths(&self) -> ExperimentConfig {
        let absolute = |p: &Path| {
            let p = self.resolve(p);
            std::fs::canonicalize(&p).unwrap_or(p)
        };
        let mut c = self.clone();
        if !matches!(c.physics.psi.as_str(), "one" | "zero") {
            c.physics.psi = absolute(Path::new(&c.physics.psi))
                .to_string_lossy()
                .into_owned();
        }
        if let InitialData::FromCheckpoint { path } = &mut c.initial_data {
            *path = absolute(path);
        }
        c.base_dir = None;
        c
    }

    pub fn coupling(&self) -> Coupling {
        if self.physics.lambda < 0 {
            Coupling::Focusing
        } else {
            Coupling::Defocusing
        }
    }

    pub fn psi(&self) -> Result<RadialProfile, ExperimentError> {
        match self.physics.psi.as_str() {
            "one" => Ok(RadialProfile::one()),
            "zero" => Ok(RadialProfile::Constant(0.0)),
            path => {
                let table = RadialTable::from_csv_path(self.resolve(Path::new(path)))
                    .map_err(|e| invalid("physics.psi", e.to_string()))?;
                Ok(RadialProfile::Table(table))
            }
        }
    }

    pub fn potential(&self) -> Result<PotentialSpec, ExperimentError> {
        Ok(PotentialSpec::new(
            self.physics.gamma,
            self.coupling(),
            self.psi()?,
        ))
    }

    /// Sobolev index of comparison norms.
    pub fn sobolev_s(&self) -> f64 {
        self.scan.sobolev_s.unwrap_or(0.5 * self.physics.gamma)
    }

    /// Checks ranges and the preconditions of the named experiment; errors
    /// name the offending field.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        let g = &self.grid;
        if !(1..=3).contains(&g.dim) {
            return Err(invalid(
                "grid.dim",
                format!("must be 1, 2 or 3, got {}", g.dim),
            ));
        }
        if g.points < 8 || !g.points.is_multiple_of(2) {
            return Err(invalid(
                "grid.points",
                format!("must be even and at least 8, got {}", g.points),
            ));
        }
        if !(g.half_length > 0.0 && g.half_length.is_finite()) {
            return Err(invalid(
                "grid.half_length",
                format!("must be positive, got {}", g.half_length),
            ));
        }
        let p = &self.physics;
        let n = g.dim as f64;
        if !(p.m >= 0.0 && p.m.is_finite()) {
            return Err(invalid("physics.m", format!("must be >= 0, got {}", p.m)));
        }
        if !(p.alpha > 0.0 && p.alpha <= 2.0) {
            return Err(invalid(
                "physics.alpha",
                format!("must lie in (0, 2], got {}", p.alpha),
            ));
        }
        if !(p.gamma > 0.0 && p.gamma < n) {
            return Err(invalid(
                "physics.gamma",
                format!("must lie in (0, n) = (0, {n}), got {}", p.gamma),
            ));
        }
        if p.lambda != 1 && p.lambda != -1 {
            return Err(invalid(
                "physics.lambda",
                format!("must be +1 or -1, got {}", p.lambda),
            ));
        }
        let t = &self.time;
        if !(t.t_final > 0.0 && t.t_final.is_finite()) {
            return Err(invalid(
                "time.t_final",
                format!("must be positive, got {}", t.t_final),
            ));
        }
        if !(t.observe_every > 0.0) {
            return Err(invalid(
                "time.observe_every",
                format!("must be positive, got {}", t.observe_every),
            ));
        }
        t.controller()
            .validate()
            .map_err(|e| invalid("time.step", e.to_string()))?;
        if let Some(every) = self.outputs.checkpoint_every {
            if !(every > 0.0) {
                return Err(invalid(
                    "outputs.checkpoint_every",
                    format!("must be positive, got {every}"),
                ));
            }
        }
        self.validate_initial_data()?;
        self.validate_experiment()
    }

    fn validate_initial_data(&self) -> Result<(), ExperimentError> {
        let dim = self.grid.dim;
        match &self.initial_data {
            InitialData::Gaussian { width, center, .. } => {
                if !(*width > 0.0) {
                    return Err(invalid(
                        "initial_data.width",
                        format!("must be positive, got {width}"),
                    ));
                }
                if !center.is_empty() && center.len() != dim {
                    return Err(invalid(
                        "initial_data.center",
                        format!("needs {dim} components"),
                    ));
                }
            }
            InitialData::PlaneModulated {
                wavevector,
                envelope_width,
                ..
            } => {
                if wavevector.len() != dim {
                    return Err(invalid(
                        "initial_data.wavevector",
                        format!("needs {dim} components"),
                    ));
                }
                if let Some(w) = envelope_width {
                    if !(*w > 0.0) {
                        return Err(invalid(
                            "initial_data.envelope_width",
                            format!("must be positive, got {w}"),
                        ));
                    }
                }
            }
            InitialData::FromCheckpoint { .. } => {}
            InitialData::GroundStateRescaled {
                mass,
                concentration,
                ..
            } => {
                if let Some(mass) = mass {
                    if !(*mass > 0.0) {
                        return Err(invalid(
                            "initial_data.mass",
                            format!("must be positive, got {mass}"),
                        ));
                    }
                }
                if !(*concentration > 0.0) {
                    return Err(invalid(
                        "initial_data.concentration",
                        format!("must be positive, got {concentration}"),
                    ));
                }
                let p = &self.physics;
                if !(p.alpha > 1.0) {
                    return Err(invalid(
                        "physics.alpha",
                        "the ground state needs alpha in (1, 2]",
                    ));
                }
            }
        }
        Ok(())
    }

    fn validate_experiment(&self) -> Result<(), ExperimentError> {
        let p = &self.physics;
        let masses = || self.scan.masses.clone().unwrap_or_default();
        match self.experiment {
            ExperimentKind::BlowupScan | ExperimentKind::MassThreshold => {
                if (p.gamma - p.alpha).abs() > 1e-12 {
                    return Err(invalid(
                        "physics.gamma",
                        "blowup experiments need gamma = alpha",
                    ));
                }
                if p.lambda != -1 {
                    return Err(invalid(
                        "physics.lambda",
                        "blowup experiments need the focusing sign -1",
                    ));
                }
                if !(p.m > 0.0) {
                    return Err(invalid("physics.m", "blowup experiments need m > 0"));
                }
                if let RadialProfile::Table(table) = self.psi()? {
                    if table
                        .rho()
                        .iter()
                        .any(|&r| r > 0.0 && table.derivative(r) > 0.0)
                    {
                        return Err(invalid(
                            "physics.psi",
                            "blowup experiments need a nonincreasing profile",
                        ));
                    }
                }
                if self.experiment == ExperimentKind::BlowupScan {
                    let m = masses();
                    if m.is_empty() || m.iter().any(|&x| !(x > 0.0)) {
                        return Err(invalid(
                            "scan.masses",
                            "needs a nonempty list of positive masses",
                        ));
                    }
                } else if !(p.alpha > 1.0) {
                    return Err(invalid(
                        "physics.alpha",
                        "the ground state needs alpha in (1, 2]",
                    ));
                }
            }
            ExperimentKind::LimitMToZero | ExperimentKind::LimitMToInfinity
                if !matches!(self.time.step, StepMode::Fixed { .. }) =>
            {
                return Err(invalid("time.step", "limit runs share a fixed step size"));
            }
            ExperimentKind::LimitMToZero => {
                let m = masses();
                if m.is_empty() || m.iter().any(|&x| !(x > 0.0)) {
                    return Err(invalid(
                        "scan.masses",
                        "needs a nonempty list of positive masses",
                    ));
                }
            }
            ExperimentKind::LimitMToInfinity => {
                let m = masses();
                if m.is_empty() || m[0] <= 0.0 || m.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid(
                        "scan.masses",
                        "needs a strictly increasing list of positive masses",
                    ));
                }
            }
            ExperimentKind::Scattering => {
                let q = self.scan.strichartz_q.unwrap_or(4.0);
                let r = self.scan.strichartz_r.unwrap_or(3.0);
                if !(q >= 1.0 && r >= 1.0) {
                    return Err(invalid(
                        "scan.strichartz_q",
                        "Strichartz exponents must be >= 1",
                    ));
                }
                if !(self.time.t_final > self.scan.saturation_after.unwrap_or(0.0)) {
                    return Err(invalid(
                        "scan.saturation_after",
                        "must precede time.t_final",
                    ));
                }
                if !(p.gamma > 2.0 * p.alpha) {
                    log::warn!("scattering run outside the regime gamma > 2 alpha");
                }
            }
            ExperimentKind::GroundState => {
                if !(p.alpha > 1.0) {
                    return Err(invalid(
                        "physics.alpha",
                        "the ground state needs alpha in (1, 2]",
                    ));
                }
            }
            ExperimentKind::Evolve | ExperimentKind::Inequalities => {}
        }
        Ok(())
    }
}

/// Dotted path of the TOML key enclosing byte `offset`, as far as it can be
/// read off the source lines.
fn locate(text: &str, offset: usize) -> String {
    let mut table = String::new();
    let mut key = String::new();
    let mut pos = 0;
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            table = trimmed
                .trim_matches(|c| c == '[' || c == ']')
                .trim()
                .to_string();
            key.clear();
        } else if let Some((k, _)) = trimmed.split_once('=') {
            key = k.trim().to_string();
        }
        pos += line.len() + 1;
        if pos > offset {
            break;
        }
    }
    match (table.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}

impl ExperimentConfig {
    /// Minimal evolve config; used by the CLI and tests as a template.
    pub fn evolve_template(grid: GridSpec, m: f64, alpha: f64, gamma: f64, lambda: i64) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            experiment: ExperimentKind::Evolve,
            grid,
            physics: PhysicsConfig {
                m,
                alpha,
                gamma,
                lambda,
                psi: default_psi(),
            },
            initial_data: InitialData::Gaussian {
                width: 1.0,
                amplitude: 1.0,
                chirp: 0.0,
                center: Vec::new(),
            },
            time: TimeConfig {
                t_final: 1.0,
                step: StepMode::Fixed { dt: 1e-2 },
                observe_every: 0.1,
                blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            },
            outputs: OutputConfig::default(),
            seed: 0,
            scan: ScanConfig::default(),
            base_dir: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
schema_version = 1
experiment = "evolve"
seed = 3

[grid]
dim = 1
points = 64
half_length = 10.0

[physics]
m = 1.0
alpha = 1.5
gamma = 0.5
lambda = -1

[initial_data]
kind = "gaussian"
width = 1.0
chirp = 0.25

[time]
t_final = 1.0
observe_every = 0.1
step = { mode = "fixed", dt = 0.01 }

[outputs]
directory = "out"
"#;

    #[test]
    fn sample_config_parses_and_round_trips() {
        let c = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.experiment, ExperimentKind::Evolve);
        assert_eq!(c.coupling(), Coupling::Focusing);
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.hash(), c.hash());
        let mut other = c.clone();
        other.seed = 4;
        assert_ne!(other.hash(), c.hash());
    }

    #[test]
    fn errors_name_the_offending_field() {
        let field_of = |text: &str| match ExperimentConfig::from_toml_str(text) {
            Err(ExperimentError::InvalidConfig { field, .. }) => field,
            other => panic!("expected a config error, got {other:?}"),
        };
        assert_eq!(
            field_of(&SAMPLE.replace("gamma = 0.5", "gamma = 1.5")),
            "physics.gamma"
        );
        assert_eq!(
            field_of(&SAMPLE.replace("lambda = -1", "lambda = 2")),
            "physics.lambda"
        );
        assert_eq!(
            field_of(&SAMPLE.replace("schema_version = 1", "schema_version = 9")),
            "schema_version"
        );
        assert_eq!(
            field_of(&SAMPLE.replace("dt = 0.01", "dt = -0.01")),
            "time.step"
        );
        assert_eq!(
            field_of(&SAMPLE.replace("width = 1.0", "width = 1.0\nheight = 2.0")),
            "initial_data"
        );
        assert_eq!(
            field_of(&SAMPLE.replace("alpha = 1.5", "alpha = \"x\"")),
            "physics.alpha"
        );
    }

    #[test]
    fn blowup_preconditions_are_checked() {
        let mut c = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        c.experiment = ExperimentKind::BlowupScan;
        c.scan.masses = Some(vec![0.5, 1.0]);
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("physics.gamma"), "{err}");
        c.grid.dim = 2;
        c.physics.gamma = 1.5;
        assert!(c.validate().is_ok());
        c.physics.lambda = 1;
        assert!(c
            .validate()
            .unwrap_err()
            .to_string()
            .contains("physics.lambda"));
    }

    #[test]
    fn limit_to_infinity_needs_increasing_masses() {
        let mut c = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        c.experiment = ExperimentKind::LimitMToInfinity;
        c.scan.masses = Some(vec![2.0, 8.0, 4.0]);
        assert!(c
            .validate()
            .unwrap_err()
            .to_string()
            .contains("scan.masses"));
        c.scan.masses = Some(vec![2.0, 4.0, 8.0]);
        assert!(c.validate().is_ok());
    }
}
