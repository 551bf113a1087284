//! The individual experiments behind [`super::run`].

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::ground_state::{critical_mass_threshold, pairing_defect, GroundStateSummary};
use crate::hartree::{build_kernel, nonlinearity, HartreeKernel};
use crate::inequality::{run_suite, RatioReport, Suite};
use crate::observables::{
    energy, parabola_root, pulled_back_defect, sobolev_distance, virial_inequality_residuals,
    ObservableRecord, ObservableWriter, ScatteringAccumulator, StrichartzAccumulator, VirialReport,
    MIN_VIRIAL_SAMPLES,
};
use crate::parallel::parallel_map;
use crate::propagator::{
    evolve, free_evolve, phase_modulate, EvolutionState, EvolutionStatus, EvolutionSummary,
    Snapshot, StepController, StepMode,
};
use crate::spectral::{
    sobolev_norm, ComplexField, DispersionSymbol, Grid, SobolevVariant, SymbolKind,
};

use super::{
    ground_state, initial_field, rescale_profile, Emitter, ExperimentConfig, ExperimentError,
    ExperimentKind,
};

/// Experiment-specific results stored in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunReport {
    Evolve(EvolveReport),
    BlowupScan {
        rows: Vec<BlowupRow>,
        /// `T*` nonincreasing in mass over the rows that blew up.
        t_star_monotone: bool,
    },
    MassThreshold(MassThresholdReport),
    Scattering(ScatteringReport),
    LimitMToZero {
        sobolev_s: f64,
        rows: Vec<LimitRow>,
        decreasing: bool,
    },
    LimitMToInfinity {
        sobolev_s: f64,
        rows: Vec<LimitRow>,
        decreasing: bool,
    },
    GroundState {
        summary: GroundStateSummary,
        pairing_defect: f64,
        critical_mass_threshold: f64,
    },
    Inequalities {
        reports: Vec<RatioReport>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveReport {
    pub summary: EvolutionSummary,
    pub t_start: f64,
    /// `max_t |M(t) − M(0)| / M(0)`.
    pub mass_drift: f64,
    /// `max_t |E(t) − E(0)| / max(|E(0)|, K(0))`.
    pub energy_drift: f64,
    /// `max_t ‖u(t) − U(t)φ‖_{L²} / ‖φ‖_{L²}`, for `ψ ≡ 0`.
    pub free_flow_defect: Option<f64>,
    /// Virial residuals on fixed-step runs with enough observations.
    pub virial: Option<VirialReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupRow {
    pub mass: f64,
    pub status: EvolutionStatus,
    pub t_end: f64,
    pub energy: f64,
    pub dilation_virial: f64,
    pub weighted_virial: f64,
    /// Calibrated constant of the weighted virial bound, clamped at zero.
    pub fitted_c: Option<f64>,
    pub parabola_root: Option<f64>,
    /// `T*_num ≤ 2 r` for runs that blew up with a root available.
    pub within_bound: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRun {
    pub amplitude: f64,
    pub concentration: f64,
    pub mass: f64,
    pub energy: f64,
    pub status: EvolutionStatus,
    pub t_end: f64,
    pub initial_hdot: f64,
    pub max_hdot: f64,
    pub fitted_c: Option<f64>,
    pub parabola_root: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassThresholdReport {
    pub ground_state: GroundStateSummary,
    /// `‖Q‖²_{L²} / ‖ψ‖_∞`.
    pub threshold_mass: f64,
    pub growth_bound: f64,
    pub sub_threshold: ThresholdRun,
    pub super_threshold: ThresholdRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringReport {
    pub status: EvolutionStatus,
    pub strichartz_q: f64,
    pub strichartz_r: f64,
    pub strichartz_final: f64,
    /// Largest relative growth of the accumulated norm over one time unit
    /// after `saturation_after`.
    pub max_increment_per_unit_time: f64,
    /// `(t, ‖U(−t)u(t) − φ⁺‖_{H^s})` over the final quarter.
    pub defect: Vec<(f64, f64)>,
    pub defect_decreasing: bool,
    /// `‖φ⁺(T/2) − φ⁺(T)‖_{H^s} / ‖φ⁺(T)‖_{H^s}`.
    pub phi_plus_change: f64,
    pub sobolev_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub m: f64,
    /// Maximum over observation times of the `H^s` gap.
    pub gap: f64,
}

type Outcome = (EvolutionStatus, Option<bool>, RunReport);

pub(super) fn dispatch(
    config: &ExperimentConfig,
    emitter: &mut Emitter,
    workers: usize,
) -> Result<Outcome, ExperimentError> {
    match config.experiment {
        ExperimentKind::Evolve => run_evolve(config, emitter),
        ExperimentKind::BlowupScan => run_blowup_scan(config, emitter, workers),
        ExperimentKind::MassThreshold => run_mass_threshold(config, emitter, workers),
        ExperimentKind::Scattering => run_scattering(config, emitter),
        ExperimentKind::LimitMToZero => run_limit_to_zero(config, emitter, workers),
        ExperimentKind::LimitMToInfinity => run_limit_to_infinity(config, emitter, workers),
        ExperimentKind::GroundState => run_ground_state(config, emitter),
        ExperimentKind::Inequalities => run_inequalities(config, emitter, workers),
    }
}

fn relativistic(
    config: &ExperimentConfig,
    grid: &Grid,
) -> Result<DispersionSymbol, ExperimentError> {
    Ok(DispersionSymbol::relativistic(
        grid,
        config.physics.m,
        config.physics.alpha,
    )?)
}

fn kernel(config: &ExperimentConfig, grid: &Grid) -> Result<HartreeKernel, ExperimentError> {
    Ok(build_kernel(grid, config.potential()?)?)
}

const HDOT_COLUMN: &str = "hdot_alpha_half";

/// Evolves `state` to `t_final` and returns the observation records, with
/// `‖u‖_{Ḣ^{α/2}}` as an extra column. `hook` sees every snapshot and may
/// add columns.
fn evolve_recorded(
    state: &mut EvolutionState,
    t_final: f64,
    controller: &StepController,
    alpha: f64,
    hook: &mut dyn FnMut(&Snapshot<'_>, &mut ObservableRecord) -> Result<(), ExperimentError>,
) -> Result<(EvolutionSummary, Vec<ObservableRecord>), ExperimentError> {
    let mut records = Vec::new();
    let mut failure: Option<ExperimentError> = None;
    let mut observer = |snap: &Snapshot<'_>| {
        if failure.is_some() {
            return;
        }
        let result = (|| -> Result<ObservableRecord, ExperimentError> {
            let mut record =
                ObservableRecord::measure(snap.u, snap.t, snap.dispersion, snap.kernel)?;
            let hdot = sobolev_norm(snap.u, 0.5 * alpha, SobolevVariant::Homogeneous)?;
            record.extra.insert(HDOT_COLUMN.into(), hdot);
            hook(snap, &mut record)?;
            Ok(record)
        })();
        match result {
            Ok(r) => records.push(r),
            Err(e) => failure = Some(e),
        }
    };
    let summary = evolve(state, t_final, controller, &mut [&mut observer])?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((summary, records))
}

fn write_records(
    emitter: &mut Emitter,
    name: &str,
    records: &[ObservableRecord],
) -> Result<(), ExperimentError> {
    let mut writer = ObservableWriter::new(emitter.create(name)?);
    for r in records {
        writer.write(r)?;
    }
    writer.finish()?.flush().map_err(|e| ExperimentError::Io {
        path: name.into(),
        source: e,
    })
}

fn drifts(records: &[ObservableRecord]) -> (f64, f64) {
    let first = &records[0];
    let scale = first
        .energy
        .abs()
        .max(first.kinetic.abs())
        .max(f64::MIN_POSITIVE);
    let mass = records
        .iter()
        .map(|r| (r.mass - first.mass).abs())
        .fold(0.0, f64::max)
        / first.mass;
    let energy = records
        .iter()
        .map(|r| (r.energy - first.energy).abs())
        .fold(0.0, f64::max)
        / scale;
    (mass, energy)
}

fn step_size(config: &ExperimentConfig) -> f64 {
    match config.time.step {
        StepMode::Fixed { dt } => dt,
        StepMode::Adaptive { dt_initial, .. } => dt_initial,
    }
}

fn checkpoint_of(config: &ExperimentConfig, u: &ComplexField, t: f64, dt: f64) -> Checkpoint {
    Checkpoint {
        field: u.clone(),
        t,
        dt,
        mass: config.physics.m,
        alpha: config.physics.alpha,
        gamma: config.physics.gamma,
        lambda: config.physics.lambda as i8,
    }
}

/// Virial residuals when the trajectory allows them.
fn virial_of(config: &ExperimentConfig, records: &[ObservableRecord]) -> Option<VirialReport> {
    if records.len() < MIN_VIRIAL_SAMPLES {
        return None;
    }
    let psi = config.psi().ok()?;
    virial_inequality_residuals(records, records[0].energy, config.physics.alpha, &psi).ok()
}

fn run_evolve(
    config: &ExperimentConfig,
    emitter: &mut Emitter,
) -> Result<Outcome, ExperimentError> {
    let grid = config.grid.build()?;
    let dispersion = relativistic(config, &grid)?;
    let kernel = kernel(config, &grid)?;
    let (phi, t0) = initial_field(config, &grid)?;
    let dt = step_size(config);
    let free = kernel.is_free();
    let phi_norm = phi.l2_norm();
    let mut state = EvolutionState::new(phi.clone(), t0, dt, dispersion.clone(), kernel)?;

    let every = config.outputs.checkpoint_every;
    let mut next_checkpoint = every.map(|e| t0 + e);
    let mut checkpoints: Vec<(String, Checkpoint)> = Vec::new();
    let mut hook =
        |snap: &Snapshot<'_>, record: &mut ObservableRecord| -> Result<(), ExperimentError> {
            if free {
                let exact = free_evolve(&phi, snap.t - t0, &dispersion)?;
                record.extra.insert(
                    "free_flow_defect".into(),
                    (snap.u - &exact).l2_norm() / phi_norm,
                );
            }
            if let (Some(every), Some(next)) = (every, next_checkpoint) {
                if snap.t >= next - 1e-9 * every {
                    let name = format!("checkpoint_{:08}.bin", snap.step);
                    checkpoints.push((name, checkpoint_of(config, snap.u, snap.t, dt)));
                    next_checkpoint = Some(next + every);
                }
            }
            Ok(())
        };
    let (summary, records) = evolve_recorded(
        &mut state,
        config.time.t_final,
        &config.time.controller(),
        config.physics.alpha,
        &mut hook,
    )?;
    for (name, ck) in &checkpoints {
        emitter.checkpoint(name, ck)?;
    }
    write_records(emitter, "observables.csv", &records)?;
    emitter.checkpoint(
        "final.bin",
        &checkpoint_of(config, state.u(), state.t(), dt),
    )?;

    let (mass_drift, energy_drift) = drifts(&records);
    let free_flow_defect = free.then(|| {
        records
            .iter()
            .filter_map(|r| r.extra.get("free_flow_defect").copied())
            .fold(0.0, f64::max)
    });
    let virial = if matches!(config.time.step, StepMode::Fixed { .. }) {
        virial_of(config, &records)
    } else {
        None
    };
    let report = EvolveReport {
        summary: summary.clone(),
        t_start: t0,
        mass_drift,
        energy_drift,
        free_flow_defect,
        virial,
    };
    Ok((summary.status, None, RunReport::Evolve(report)))
}

/// One focusing run from `phi`, with the calibrated constant and the
/// parabola root.
struct FocusingRun {
    summary: EvolutionSummary,
    records: Vec<ObservableRecord>,
    energy: f64,
    dilation_virial: f64,
    weighted_virial: f64,
    fitted_c: Option<f64>,
    parabola_root: Option<f64>,
}

fn focusing_run(
    config: &ExperimentConfig,
    grid: &Grid,
    phi: ComplexField,
) -> Result<FocusingRun, ExperimentError> {
    let dispersion = relativistic(config, grid)?;
    let kernel = kernel(config, grid)?;
    let alpha = config.physics.alpha;
    let (_, _, e_phi) = energy(&phi, &dispersion, &kernel)?;
    let first = ObservableRecord::measure(&phi, 0.0, &dispersion, &kernel)?;
    let phi_norm = phi.l2_norm();
    let mut state = EvolutionState::new(phi, 0.0, step_size(config), dispersion, kernel)?;
    let (summary, records) = evolve_recorded(
        &mut state,
        config.time.t_final,
        &config.time.controller(),
        alpha,
        &mut |_, _| Ok(()),
    )?;
    let fitted_c = virial_of(config, &records).map(|v| v.fitted_c.max(0.0));
    let parabola_root = parabola_root(
        e_phi,
        first.dilation_virial,
        first.weighted_virial,
        alpha,
        fitted_c.unwrap_or(0.0),
        phi_norm,
    );
    Ok(FocusingRun {
        summary,
        records,
        energy: e_phi,
        dilation_virial: first.dilation_virial,
        weighted_virial: first.weighted_virial,
        fitted_c,
        parabola_root,
    })
}

fn blew_up(status: EvolutionStatus) -> bool {
    matches!(
        status,
        EvolutionStatus::Blowup | EvolutionStatus::StalledNearSingularity
    )
}

fn run_blowup_scan(
    config: &ExperimentConfig,
    emitter: &mut Emitter,
    workers: usize,
) -> Result<Outcome, ExperimentError> {
    let grid = config.grid.build()?;
    let (profile, _) = initial_field(config, &grid)?;
    let masses = config.scan.masses.clone().unwrap_or_default();
    let runs = parallel_map(masses.len(), workers, |i| {
        let phi = rescale_profile(&profile, 1.0, 1.0, Some(masses[i]))?;
        focusing_run(config, &grid, phi)
    });
    let mut rows = Vec::with_capacity(masses.len());
    for (i, run) in runs.into_iter().enumerate() {
        let run = run?;
        write_records(emitter, &format!("scan_{i:03}.csv"), &run.records)?;
        let status = run.summary.status;
        let within_bound = match (blew_up(status), run.parabola_root) {
            (true, Some(r)) => Some(run.summary.t_end <= 2.0 * r),
            _ => None,
        };
        rows.push(BlowupRow {
            mass: masses[i],
            status,
            t_end: run.summary.t_end,
            energy: run.energy,
            dilation_virial: run.dilation_virial,
            weighted_virial: run.weighted_virial,
            fitted_c: run.fitted_c,
            parabola_root: run.parabola_root,
            within_bound,
        });
    }
    let mut csv = emitter.csv("blowup_scan.csv")?;
    csv.write_record([
        "mass",
        "status",
        "t_end",
        "energy",
        "dilation_virial",
        "weighted_virial",
        "fitted_c",
        "parabola_root",
        "within_bound",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in &rows {
        csv.write_record([
            format!("{:e}", r.mass),
            serde_json::to_value(r.status)?
                .as_str()
                .unwrap_or_default()
                .to_string(),
            format!("{:e}", r.t_end),
            format!("{:e}", r.energy),
            format!("{:e}", r.dilation_virial),
            format!("{:e}", r.weighted_virial),
            opt(r.fitted_c),
            opt(r.parabola_root),
            r.within_bound.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    csv.flush().map_err(|e| ExperimentError::Io {
        path: "blowup_scan.csv".into(),
        source: e,
    })?;
    let mut by_mass: Vec<&BlowupRow> = rows.iter().filter(|r| blew_up(r.status)).collect();
    by_mass.sort_by(|a, b| a.mass.total_cmp(&b.mass));
    let t_star_monotone = by_mass.windows(2).all(|w| w[1].t_end <= w[0].t_end);
    let passed = rows
        .iter()
        .filter(|r| r.energy < 0.0)
        .all(|r| r.within_bound == Some(true));
    Ok((
        EvolutionStatus::Completed,
        Some(passed),
        RunReport::BlowupScan {
            rows,
            t_star_monotone,
        },
    ))
}

fn threshold_run(
    run: FocusingRun,
    amplitude: f64,
    concentration: f64,
    mass: f64,
    passed: impl Fn(&FocusingRun, f64, f64) -> bool,
) -> ThresholdRun {
    let hdot = |r: &ObservableRecord| r.extra.get(HDOT_COLUMN).copied().unwrap_or(f64::NAN);
    let initial_hdot = run.records.first().map_or(f64::NAN, hdot);
    let max_hdot = run.records.iter().map(hdot).fold(0.0, f64::max);
    let ok = passed(&run, initial_hdot, max_hdot);
    ThresholdRun {
        amplitude,
        concentration,
        mass,
        energy: run.energy,
        status: run.summary.status,
        t_end: run.summary.t_end,
        initial_hdot,
        max_hdot,
        fitted_c: run.fitted_c,
        parabola_root: run.parabola_root,
        passed: ok,
    }
}

fn run_mass_threshold(
    config: &ExperimentConfig,
    emitter: &mut Emitter,
    workers: usize,
) -> Result<Outcome, ExperimentError> {
    let grid = config.grid.build()?;
    let gs = ground_state(config, &grid)?;
    let threshold_mass = critical_mass_threshold(&gs, config.psi()?.sup())?.powi(2);
    let growth_bound = config.scan.growth_bound.unwrap_or(5.0);
    let settings = [
        (config.scan.sub_amplitude.unwrap_or(0.9), 1.0),
        (
            config.scan.super_amplitude.unwrap_or(1.2),
            config.scan.super_concentration.unwrap_or(2.0),
        ),
    ];
    let runs = parallel_map(2, workers, |i| {
        let (a, lambda) = settings[i];
        let phi = rescale_profile(&gs.q, a, lambda, None)?;
        let mass = phi.l2_norm_sq();
        focusing_run(config, &grid, phi).map(|r| (r, mass))
    });
    let mut runs = runs.into_iter();
    let (sub, sub_mass) = runs.next().unwrap()?;
    let (sup, sup_mass) = runs.next().unwrap()?;
    write_records(emitter, "sub_threshold.csv", &sub.records)?;
    write_records(emitter, "super_threshold.csv", &sup.records)?;
    let sub = threshold_run(
        sub,
        settings[0].0,
        settings[0].1,
        sub_mass,
        |r, h0, hmax| r.summary.status == EvolutionStatus::Completed && hmax <= growth_bound * h0,
    );
    let sup = threshold_run(sup, settings[1].0, settings[1].1, sup_mass, |r, _, _| {
        r.energy < 0.0
            && r.summary.status == EvolutionStatus::Blowup
            && r.parabola_root
                .is_some_and(|root| r.summary.t_end <= 2.0 * root)
    });
    let passed = sub.passed && sup.passed;
    let report = MassThresholdReport {
        ground_state: gs.summary(),
        threshold_mass,
        growth_bound,
        sub_threshold: sub,
        super_threshold: sup,
    };
    Ok((
        EvolutionStatus::Completed,
        Some(passed),
        RunReport::MassThreshold(report),
    ))
}

fn run_scattering(
    config: &ExperimentConfig,
    emitter: &mut Emitter,
) -> Result<Outcome, ExperimentError> {
    let grid = config.grid.build()?;
    let dispersion = relativistic(config, &grid)?;
    let kernel = kernel(config, &grid)?;
    let (phi, t0) = initial_field(config, &grid)?;
    let s = config.sobolev_s();
    let q = config.scan.strichartz_q.unwrap_or(4.0);
    let r = config.scan.strichartz_r.unwrap_or(3.0);
    let t_final = config.time.t_final;
    let half = t0 + 0.5 * (t_final - t0);
    let quarter = t0 + 0.75 * (t_final - t0);

    let mut strichartz = StrichartzAccumulator::new(q, r, None)?;
    let mut scattering = ScatteringAccumulator::new(&phi, &dispersion)?;
    let mut half_state: Option<ScatteringAccumulator> = None;
    let mut series: Vec<(f64, f64)> = Vec::new();
    let mut pulled: Vec<(f64, ComplexField)> = Vec::new();
    let tol = 1e-9 * config.time.observe_every;
    let mut hook =
        |snap: &Snapshot<'_>, record: &mut ObservableRecord| -> Result<(), ExperimentError> {
            strichartz.update(snap.u, snap.t)?;
            scattering.push(snap.t, &nonlinearity(snap.u, snap.kernel)?)?;
            if half_state.is_none() && snap.t >= half - tol {
                half_state = Some(scattering.clone());
            }
            if snap.t >= quarter - tol {
                pulled.push((snap.t, free_evolve(snap.u, -snap.t, snap.dispersion)?));
            }
            series.push((snap.t, strichartz.value()));
            record.extra.insert("strichartz".into(), strichartz.value());
            Ok(())
        };
    let mut state = EvolutionState::new(phi, t0, step_size(config), dispersion, kernel)?;
    let (summary, records) = evolve_recorded(
        &mut state,
        t_final,
        &config.time.controller(),
        config.physics.alpha,
        &mut hook,
    )?;
    write_records(emitter, "observables.csv", &records)?;

    let phi_plus = scattering.phi_plus()?;
    let phi_half = half_state.as_ref().map(|a| a.phi_plus()).transpose()?;
    let zero = ComplexField::zeros(&grid);
    let plus_norm = sobolev_distance(&phi_plus, &zero, s);
    let phi_plus_change =
        phi_half.map_or(f64::NAN, |h| sobolev_distance(&h, &phi_plus, s) / plus_norm);
    let defect: Vec<(f64, f64)> = pulled
        .iter()
        .map(|(t, p)| (*t, pulled_back_defect(&phi_plus, p, s)))
        .collect();
    let defect_decreasing = defect.len() >= 2 && defect.windows(2).all(|w| w[1].1 <= w[0].1);

    let after = config.scan.saturation_after.unwrap_or(t0);
    let mut max_increment: f64 = 0.0;
    for (i, &(t, v)) in series.iter().enumerate() {
        if t < after - tol {
            continue;
        }
        if let Some(&(_, w)) = series[i..].iter().find(|(u, _)| *u >= t + 1.0 - tol) {
            max_increment = max_increment.max((w - v) / v);
        }
    }

    let mut csv = emitter.csv("scattering_defect.csv")?;
    csv.write_record(["t", "defect"])?;
    for (t, d) in &defect {
        csv.write_record([format!("{t:e}"), format!("{d:e}")])?;
    }
    csv.flush().map_err(|e| ExperimentError::Io {
        path: "scattering_defect.csv".into(),
        source: e,
    })?;
    emitter.checkpoint(
        "phi_plus.bin",
        &checkpoint_of(config, &phi_plus, state.t(), step_size(config)),
    )?;
    emitter.checkpoint(
        "final.bin",
        &checkpoint_of(config, state.u(), state.t(), step_size(config)),
    )?;

    let report = ScatteringReport {
        status: summary.status,
        strichartz_q: q,
        strichartz_r: r,
        strichartz_final: strichartz.value(),
        max_increment_per_unit_time: max_increment,
        defect,
        defect_decreasing,
        phi_plus_change,
        sobolev_s: s,
    };
    let passed = summary.status == EvolutionStatus::Completed
        && report.max_increment_per_unit_time < 1e-2
        && report.defect_decreasing
        && report.phi_plus_change < 1e-3;
    Ok((summary.status, Some(passed), RunReport::Scattering(report)))
}

/// Fields at every observation time of a run with dispersion `symbol`.
fn snapshots(
    config: &ExperimentConfig,
    grid: &Grid,
    phi: &ComplexField,
    symbol: SymbolKind,
) -> Result<Vec<(f64, ComplexField)>, ExperimentError> {
    let dispersion = DispersionSymbol::new(grid, symbol)?;
    let mut state = EvolutionState::new(
        phi.clone(),
        0.0,
        step_size(config),
        dispersion,
        kernel(config, grid)?,
    )?;
    let mut out = Vec::new();
    let mut observer = |snap: &Snapshot<'_>| out.push((snap.t, snap.u.clone()));
    let summary = evolve(
        &mut state,
        config.time.t_final,
        &config.time.controller(),
        &mut [&mut observer],
    )?;
    if summary.status != EvolutionStatus::Completed {
        log::warn!(
            "limit run with {symbol:?} ended as {:?} at t = {}",
            summary.status,
            summary.t_end
        );
    }
    Ok(out)
}

/// Max over observation times of `‖f(t, a(t)) − b(t)‖_{H^s}`.
fn max_gap(
    a: &[(f64, ComplexField)],
    b: &[(f64, ComplexField)],
    s: f64,
    f: impl Fn(f64, &ComplexField) -> ComplexField,
) -> f64 {
    a.iter()
        .zip(b)
        .map(|((t, u), (_, v))| sobolev_distance(&f(*t, u), v, s))
        .fold(0.0, f64::max)
}

fn write_limit_rows(
    emitter: &mut Emitter,
    name: &str,
    rows: &[LimitRow],
) -> Result<(), ExperimentError> {
    let mut csv = emitter.csv(name)?;
    csv.write_record(["m", "gap"])?;
    for r in rows {
        csv.write_record([format!("{:e}", r.m), format!("{:e}", r.gap)])?;
    }
    csv.flush().map_err(|e| ExperimentError::Io {
        path: name.into(),
        source: e,
    })
}

fn run_limit_to_zero(
    config: &ExperimentConfig,
    emitter: &mut Emitter,
    workers: usize,
) -> Result<Outcome, ExperimentError> {
    let grid = config.grid.build()?;
    let (phi, _) = initial_field(config, &grid)?;
    let alpha = config.physics.alpha;
    let s = config.sobolev_s();
    let reference = snapshots(
        config,
        &grid,
        &phi,
        SymbolKind::Homogeneous { exponent: alpha },
    )?;
    let mut masses = config.scan.masses.clone().unwrap_or_default();
    masses.sort_by(|a, b| b.total_cmp(a));
    let gaps = parallel_map(masses.len(), workers, |i| {
        let run = snapshots(
            config,
            &grid,
            &phi,
            SymbolKind::Relativistic {
                mass: masses[i],
                exponent: alpha,
            },
        )?;
        Ok::<f64, ExperimentError>(max_gap(&run, &reference, s, |_, u| u.clone()))
    });
    let rows = masses
        .iter()
        .zip(gaps)
        .map(|(&m, gap)| Ok(LimitRow { m, gap: gap? }))
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    write_limit_rows(emitter, "limit_m_to_zero.csv", &rows)?;
    let decreasing = rows.windows(2).all(|w| w[1].gap < w[0].gap);
    Ok((
        EvolutionStatus::Completed,
        Some(decreasing),
        RunReport::LimitMToZero {
            sobolev_s: s,
            rows,
            decreasing,
        },
    ))
}

fn run_limit_to_infinity(
    config: &ExperimentConfig,
    emitter: &mut Emitter,
    workers: usize,
) -> Result<Outcome, ExperimentError> {
    let grid = config.grid.build()?;
    let (phi, _) = initial_field(config, &grid)?;
    let alpha = config.physics.alpha;
    let s = config.sobolev_s();
    let masses = config.scan.masses.clone().unwrap_or_default();
    let gaps = parallel_map(masses.len(), workers, |i| {
        let m = masses[i];
        let u = snapshots(
            config,
            &grid,
            &phi,
            SymbolKind::Relativistic {
                mass: m,
                exponent: alpha,
            },
        )?;
        let w = snapshots(
            config,
            &grid,
            &phi,
            SymbolKind::Nonrelativistic {
                mass: m,
                exponent: alpha,
            },
        )?;
        Ok::<f64, ExperimentError>(max_gap(&u, &w, s, |t, u| phase_modulate(u, t, m, alpha)))
    });
    let rows = masses
        .iter()
        .zip(gaps)
        .map(|(&m, gap)| Ok(LimitRow { m, gap: gap? }))
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    write_limit_rows(emitter, "limit_m_to_infinity.csv", &rows)?;
    let decreasing = rows.windows(2).all(|w| w[1].gap < w[0].gap);
    Ok((
        EvolutionStatus::Completed,
        Some(decreasing),
        RunReport::LimitMToInfinity {
            sobolev_s: s,
            rows,
            decreasing,
        },
    ))
}

fn run_ground_state(
    config: &ExperimentConfig,
    emitter: &mut Emitter,
) -> Result<Outcome, ExperimentError> {
    let grid = config.grid.build()?;
    let gs = ground_state(config, &grid)?;
    let defect = pairing_defect(&gs.q, gs.alpha, gs.gamma)?;
    let threshold = critical_mass_threshold(&gs, config.psi()?.sup())?;
    emitter.checkpoint("ground_state.bin", &checkpoint_of(config, &gs.q, 0.0, 0.0))?;
    let mut csv = emitter.csv("quotient_trace.csv")?;
    csv.write_record(["iteration", "quotient"])?;
    for (i, v) in gs.quotient_trace.iter().enumerate() {
        csv.write_record([i.to_string(), format!("{v:e}")])?;
    }
    csv.flush().map_err(|e| ExperimentError::Io {
        path: "quotient_trace.csv".into(),
        source: e,
    })?;
    let report = RunReport::GroundState {
        summary: gs.summary(),
        pairing_defect: defect,
        critical_mass_threshold: threshold,
    };
    Ok((EvolutionStatus::Completed, Some(gs.converged), report))
}

fn run_inequalities(
    config: &ExperimentConfig,
    emitter: &mut Emitter,
    workers: usize,
) -> Result<Outcome, ExperimentError> {
    let suite = config.scan.suite.unwrap_or(Suite::Standard);
    let reports = run_suite(suite, config.seed, workers)?;
    emitter.json("inequalities.json", &reports)?;
    let passed = reports.iter().all(|r| {
        r.is_healthy()
            && (0.8..=1.2).contains(&r.refinement_ratio)
            && r.m_spread().is_none_or(|spread| spread < 2.0)
    });
    Ok((
        EvolutionStatus::Completed,
        Some(passed),
        RunReport::Inequalities { reports },
    ))
}
