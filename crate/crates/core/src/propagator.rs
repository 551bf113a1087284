//! Time stepping: the exact free flow `U(t) = e^{-itσ(D)}`, the Strang
//! split step for the full equation, and the evolution driver.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hartree::HartreeKernel;
use crate::spectral::{ComplexField, DispersionSymbol, SobolevVariant, Space, SpectralError};

#[derive(Debug, Error)]
pub enum PropagatorError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("dispersion and kernel live on different grids")]
    GridMismatch,
    #[error("non-finite value in the solution at t = {t}")]
    NonFinite { t: f64 },
    #[error("invalid step controller: {0}")]
    InvalidController(String),
    #[error("energy evaluation failed: {0}")]
    Energy(String),
    #[error("t_final = {t_final} is not after the current time {t}")]
    InvalidHorizon { t: f64, t_final: f64 },
}

/// `e^{-itσ}` for one multiplier value.
fn free_phase(t: f64, sigma: f64) -> Complex64 {
    Complex64::from_polar(1.0, -t * sigma)
}

/// `U(t)u`: multiplies the transform by `e^{-itσ(ξ)}`.
pub fn free_evolve(
    u: &ComplexField,
    t: f64,
    dispersion: &DispersionSymbol,
) -> Result<ComplexField, SpectralError> {
    u.expect_grid(dispersion.grid())?;
    u.expect_space(Space::Physical)?;
    let grid = u.grid();
    let mut values = u.values().to_vec();
    grid.raw_forward(&mut values);
    for (v, &s) in values.iter_mut().zip(dispersion.multiplier()) {
        *v *= free_phase(t, s);
    }
    grid.raw_inverse(&mut values);
    ComplexField::new(grid, values, Space::Physical)
}

/// `e^{itm^α} u`, the modulation relating the shifted and unshifted flows.
pub fn phase_modulate(u: &ComplexField, t: f64, m: f64, alpha: f64) -> ComplexField {
    u.scaled(Complex64::from_polar(1.0, t * m.powf(alpha)))
}

/// Solution state of the split-step integrator.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    u: ComplexField,
    t: f64,
    dt: f64,
    dispersion: DispersionSymbol,
    kernel: HartreeKernel,
    step_count: u64,
    norm_weights: Vec<f64>,
    last_norm: f64,
    phase_cache: Option<(f64, Vec<Complex64>)>,
}

impl EvolutionState {
    pub fn new(
        u: ComplexField,
        t: f64,
        dt: f64,
        dispersion: DispersionSymbol,
        kernel: HartreeKernel,
    ) -> Result<Self, PropagatorError> {
        u.expect_space(Space::Physical)?;
        u.expect_grid(dispersion.grid())?;
        if dispersion.grid() != kernel.grid() {
            return Err(PropagatorError::GridMismatch);
        }
        let norm_weights = SobolevVariant::Inhomogeneous.weights(u.grid(), 0.5 * kernel.gamma());
        let last_norm = crate::spectral::weighted_norm(&u, &norm_weights).sqrt();
        Ok(EvolutionState {
            u,
            t,
            dt,
            dispersion,
            kernel,
            step_count: 0,
            norm_weights,
            last_norm,
            phase_cache: None,
        })
    }

    pub fn u(&self) -> &ComplexField {
        &self.u
    }

    pub fn into_field(self) -> ComplexField {
        self.u
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn set_dt(&mut self, dt: f64) {
        self.dt = dt;
    }

    pub fn dispersion(&self) -> &DispersionSymbol {
        &self.dispersion
    }

    pub fn kernel(&self) -> &HartreeKernel {
        &self.kernel
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// `‖u‖_{H^{γ/2}}` as of the last step (or construction).
    pub fn h_gamma_half_norm(&self) -> f64 {
        self.last_norm
    }

    fn half_phases(&mut self, dt: f64) -> &[Complex64] {
        let stale = !matches!(&self.phase_cache, Some((cached, _)) if *cached == dt);
        if stale {
            let half = 0.5 * dt;
            let phases = self
                .dispersion
                .multiplier()
                .iter()
                .map(|&s| free_phase(half, s))
                .collect();
            self.phase_cache = Some((dt, phases));
        }
        &self.phase_cache.as_ref().unwrap().1
    }

    /// One Strang step `U(dt/2) ∘ e^{-i dt λ K(|u|²)} ∘ U(dt/2)`. Negative
    /// `dt` steps backwards. With `ψ ≡ 0` this is a single free step.
    pub fn strang_step(&mut self, dt: f64) -> Result<(), PropagatorError> {
        let grid = self.u.grid().clone();
        if self.kernel.is_free() {
            let mut values = self.u.values().to_vec();
            grid.raw_forward(&mut values);
            for (v, &s) in values.iter_mut().zip(self.dispersion.multiplier()) {
                *v *= free_phase(dt, s);
            }
            self.last_norm = grid.spectral_norm_sq(&values, &self.norm_weights).sqrt();
            grid.raw_inverse(&mut values);
            self.u.values_mut().copy_from_slice(&values);
        } else {
            let mut values = self.u.values().to_vec();
            let phases = self.half_phases(dt).to_vec();
            grid.raw_forward(&mut values);
            values.iter_mut().zip(&phases).for_each(|(v, p)| *v *= p);
            grid.raw_inverse(&mut values);

            let density: Vec<f64> = values.iter().map(|v| v.norm_sqr()).collect();
            let potential = self.kernel.convolve_density(&density);
            let scale = -dt * self.kernel.coupling().sign();
            for (v, p) in values.iter_mut().zip(&potential) {
                *v *= Complex64::from_polar(1.0, scale * p);
            }

            grid.raw_forward(&mut values);
            values.iter_mut().zip(&phases).for_each(|(v, p)| *v *= p);
            self.last_norm = grid.spectral_norm_sq(&values, &self.norm_weights).sqrt();
            grid.raw_inverse(&mut values);
            self.u.values_mut().copy_from_slice(&values);
        }
        self.t += dt;
        self.step_count += 1;
        if !self.last_norm.is_finite()
            || self
                .u
                .values()
                .iter()
                .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(PropagatorError::NonFinite { t: self.t });
        }
        Ok(())
    }

    /// Takes `steps` fixed steps of size `dt`.
    pub fn advance(&mut self, dt: f64, steps: usize) -> Result<(), PropagatorError> {
        for _ in 0..steps {
            self.strang_step(dt)?;
        }
        Ok(())
    }
}

/// Step size policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StepMode {
    Fixed {
        dt: f64,
    },
    /// Halve on a per-step energy change above `energy_tol` (relative to the
    /// initial kinetic energy), double after ten accepted steps.
    Adaptive {
        dt_initial: f64,
        energy_tol: f64,
        dt_min: f64,
        dt_max: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepController {
    pub mode: StepMode,
    /// Blowup is declared once `‖u‖_{H^{γ/2}}` exceeds this multiple of its
    /// initial value.
    pub blowup_threshold: f64,
    /// Time between observer calls. `None` means every ten steps of the
    /// initial step size.
    pub observe_every: Option<f64>,
}

pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e3;

impl StepController {
    pub fn fixed(dt: f64) -> Self {
        StepController {
            mode: StepMode::Fixed { dt },
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            observe_every: None,
        }
    }

    pub fn adaptive(dt_initial: f64, energy_tol: f64, dt_min: f64, dt_max: f64) -> Self {
        StepController {
            mode: StepMode::Adaptive {
                dt_initial,
                energy_tol,
                dt_min,
                dt_max,
            },
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            observe_every: None,
        }
    }

    pub fn with_blowup_threshold(mut self, threshold: f64) -> Self {
        self.blowup_threshold = threshold;
        self
    }

    pub fn with_observer_interval(mut self, interval: f64) -> Self {
        self.observe_every = Some(interval);
        self
    }

    pub fn initial_dt(&self) -> f64 {
        match self.mode {
            StepMode::Fixed { dt } => dt,
            StepMode::Adaptive { dt_initial, .. } => dt_initial,
        }
    }

    pub fn observer_interval(&self) -> f64 {
        self.observe_every.unwrap_or(10.0 * self.initial_dt())
    }

    pub fn validate(&self) -> Result<(), PropagatorError> {
        let bad = |m: &str| Err(PropagatorError::InvalidController(m.to_string()));
        match self.mode {
            StepMode::Fixed { dt } if !(dt > 0.0 && dt.is_finite()) => {
                return bad("dt must be positive")
            }
            StepMode::Adaptive {
                dt_initial,
                energy_tol,
                dt_min,
                dt_max,
            } => {
                if !(dt_min > 0.0 && dt_min <= dt_initial && dt_initial <= dt_max) {
                    return bad("need 0 < dt_min <= dt_initial <= dt_max");
                }
                if !(energy_tol > 0.0) {
                    return bad("energy_tol must be positive");
                }
            }
            _ => {}
        }
        if !(self.blowup_threshold > 1.0) {
            return bad("blowup_threshold must exceed 1");
        }
        if let Some(every) = self.observe_every {
            if !(every > 0.0) {
                return bad("observer interval must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionStatus {
    Completed,
    Blowup,
    StalledNearSingularity,
    NonFinite,
}

/// Read-only view handed to observers.
pub struct Snapshot<'a> {
    pub t: f64,
    pub step: u64,
    pub u: &'a ComplexField,
    pub dispersion: &'a DispersionSymbol,
    pub kernel: &'a HartreeKernel,
}

pub trait Observer {
    fn observe(&mut self, snapshot: &Snapshot<'_>);
}

impl<F: FnMut(&Snapshot<'_>)> Observer for F {
    fn observe(&mut self, snapshot: &Snapshot<'_>) {
        self(snapshot)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSummary {
    pub status: EvolutionStatus,
    /// Final time reached; the numerical blowup time when `status` is `Blowup`.
    pub t_end: f64,
    pub steps: u64,
    pub rejected_steps: u64,
    pub observations: u64,
    pub initial_norm: f64,
    pub final_norm: f64,
}

fn notify(state: &EvolutionState, observers: &mut [&mut dyn Observer]) {
    let snap = Snapshot {
        t: state.t,
        step: state.step_count,
        u: &state.u,
        dispersion: &state.dispersion,
        kernel: &state.kernel,
    };
    for o in observers.iter_mut() {
        o.observe(&snap);
    }
}

/// Runs the state to `t_final`, calling observers at `t` and then on the
/// controller's cadence. Stops early on blowup, a stalled step size or
/// non-finite values.
pub fn evolve(
    state: &mut EvolutionState,
    t_final: f64,
    controller: &StepController,
    observers: &mut [&mut dyn Observer],
) -> Result<EvolutionSummary, PropagatorError> {
    controller.validate()?;
    if !(t_final > state.t) {
        return Err(PropagatorError::InvalidHorizon {
            t: state.t,
            t_final,
        });
    }
    let initial_norm = state.h_gamma_half_norm();
    let limit = controller.blowup_threshold * initial_norm;
    let mut summary = EvolutionSummary {
        status: EvolutionStatus::Completed,
        t_end: state.t,
        steps: 0,
        rejected_steps: 0,
        observations: 1,
        initial_norm,
        final_norm: initial_norm,
    };
    notify(state, observers);

    let finish = |state: &EvolutionState, mut summary: EvolutionSummary, status| {
        summary.status = status;
        summary.t_end = state.t;
        summary.final_norm = state.h_gamma_half_norm();
        summary
    };

    match controller.mode {
        StepMode::Fixed { dt } => {
            state.dt = dt;
            let span = t_final - state.t;
            let full = (span / dt * (1.0 + 1e-12)).floor() as u64;
            let remainder = span - full as f64 * dt;
            let every = ((controller.observer_interval() / dt).round() as u64).max(1);
            let t0 = state.t;
            for k in 1..=full {
                if let Err(e) = state.strang_step(dt) {
                    return nonfinite(e, state, summary, finish);
                }
                // Integer step counting keeps restarts bit-reproducible.
                state.t = t0 + k as f64 * dt;
                summary.steps += 1;
                if k % every == 0 || (k == full && remainder <= 1e-12 * dt) {
                    notify(state, observers);
                    summary.observations += 1;
                }
                if state.h_gamma_half_norm() > limit {
                    return Ok(finish(state, summary, EvolutionStatus::Blowup));
                }
            }
            if remainder > 1e-12 * dt {
                if let Err(e) = state.strang_step(remainder) {
                    return nonfinite(e, state, summary, finish);
                }
                state.t = t_final;
                summary.steps += 1;
                notify(state, observers);
                summary.observations += 1;
                if state.h_gamma_half_norm() > limit {
                    return Ok(finish(state, summary, EvolutionStatus::Blowup));
                }
            }
            Ok(finish(state, summary, EvolutionStatus::Completed))
        }
        StepMode::Adaptive {
            dt_initial,
            energy_tol,
            dt_min,
            dt_max,
        } => {
            let interval = controller.observer_interval();
            let (k0, _, e0) =
                crate::observables::energy(&state.u, &state.dispersion, &state.kernel)
                    .map_err(|e| PropagatorError::Energy(e.to_string()))?;
            let scale = k0.abs().max(e0.abs()).max(f64::MIN_POSITIVE);
            let mut energy_now = e0;
            let mut dt = dt_initial;
            let mut accepted_run = 0;
            // Observation times are counted, not accumulated, so the cadence
            // stays uniform to rounding; one within tolerance of t_final snaps to it.
            let t_start = state.t;
            let mut k_obs = 1u64;
            let obs_time = |k: u64| {
                let t = t_start + k as f64 * interval;
                if (t - t_final).abs() <= 1e-9 * interval {
                    t_final
                } else {
                    t
                }
            };
            while state.t < t_final * (1.0 - 1e-14) {
                let target = obs_time(k_obs).min(t_final);
                let step = dt.min(target - state.t);
                let backup = (state.u.clone(), state.t, state.last_norm, state.step_count);
                if let Err(e) = state.strang_step(step) {
                    return nonfinite(e, state, summary, finish);
                }
                let (_, _, e_new) =
                    crate::observables::energy(&state.u, &state.dispersion, &state.kernel)
                        .map_err(|e| PropagatorError::Energy(e.to_string()))?;
                if (e_new - energy_now).abs() > energy_tol * scale {
                    (state.u, state.t, state.last_norm, state.step_count) = backup;
                    summary.rejected_steps += 1;
                    dt *= 0.5;
                    accepted_run = 0;
                    if dt < dt_min {
                        return Ok(finish(
                            state,
                            summary,
                            EvolutionStatus::StalledNearSingularity,
                        ));
                    }
                    continue;
                }
                energy_now = e_new;
                summary.steps += 1;
                state.dt = step;
                accepted_run += 1;
                if accepted_run == 10 {
                    dt = (2.0 * dt).min(dt_max);
                    accepted_run = 0;
                }
                if (state.t - target).abs() <= 1e-12 * interval.max(1.0) {
                    state.t = target;
                    k_obs += 1;
                    notify(state, observers);
                    summary.observations += 1;
                }
                if state.h_gamma_half_norm() > limit {
                    return Ok(finish(state, summary, EvolutionStatus::Blowup));
                }
            }
            Ok(finish(state, summary, EvolutionStatus::Completed))
        }
    }
}

fn nonfinite(
    err: PropagatorError,
    state: &EvolutionState,
    summary: EvolutionSummary,
    finish: impl Fn(&EvolutionState, EvolutionSummary, EvolutionStatus) -> EvolutionSummary,
) -> Result<EvolutionSummary, PropagatorError> {
    match err {
        PropagatorError::NonFinite { .. } => Ok(finish(state, summary, EvolutionStatus::NonFinite)),
        other => Err(other),
    }
}
