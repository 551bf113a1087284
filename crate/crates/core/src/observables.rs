//! Diagnostics along a trajectory: conserved quantities, virial functionals,
//! moments, Strichartz-type norms and the scattering state.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hartree::{potential_energy_from, HartreeError, HartreeKernel, RadialProfile};
use crate::propagator::free_evolve;
use crate::spectral::{
    apply_symbol, weighted_norm, ComplexField, DispersionSymbol, SobolevVariant, Space,
    SpectralError, SymbolKind,
};

#[derive(Debug, Error)]
pub enum ObservableError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Hartree(#[from] HartreeError),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("samples are not on a uniform cadence")]
    NonUniformCadence,
    #[error("time went backwards: {previous} then {t}")]
    NonMonotoneTime { previous: f64, t: f64 },
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("radial profile is increasing near rho = {0}")]
    IncreasingProfile(f64),
    #[error("writing observables: {0}")]
    Csv(#[from] csv::Error),
    #[error("writing observables: {0}")]
    Io(#[from] std::io::Error),
}

/// `(K, V, E)` with `K = ½⟨σ(D)u, u⟩` for the dispersion symbol `σ`.
pub fn energy(
    u: &ComplexField,
    dispersion: &DispersionSymbol,
    kernel: &HartreeKernel,
) -> Result<(f64, f64, f64), ObservableError> {
    u.expect_grid(dispersion.grid())?;
    u.expect_space(Space::Physical)?;
    let kinetic = 0.5 * weighted_norm(u, dispersion.multiplier());
    let potential = if kernel.is_free() {
        0.0
    } else {
        let density = u.density();
        let conv = kernel.convolve_density(&density);
        potential_energy_from(&density, &conv, kernel)
    };
    Ok((kinetic, potential, kinetic + potential))
}

/// Per-axis spectral derivatives `∂_k u`; the Nyquist mode is dropped.
pub fn spectral_gradient(u: &ComplexField) -> Result<Vec<Vec<Complex64>>, SpectralError> {
    u.expect_space(Space::Physical)?;
    let grid = u.grid();
    let mut raw = u.values().to_vec();
    grid.raw_forward(&mut raw);
    let nyquist = -(grid.points_per_axis() as i64) / 2;
    (0..grid.dim())
        .map(|axis| {
            let mut d: Vec<Complex64> = raw
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let q = grid.unflatten(i)[axis];
                    if grid.frequency_index(q) == nyquist {
                        Complex64::new(0.0, 0.0)
                    } else {
                        v * Complex64::new(0.0, grid.frequency(i)[axis])
                    }
                })
                .collect();
            grid.raw_inverse(&mut d);
            Ok(d)
        })
        .collect()
}

/// `Im ∫ ū (x·∇u) dx`, which is `⟨u, Au⟩` for the dilation generator
/// `A = -(i/2)(∇·x + x·∇)` on decaying data.
pub fn dilation_virial(u: &ComplexField) -> Result<f64, SpectralError> {
    let grid = u.grid();
    let grad = spectral_gradient(u)?;
    let mut acc = 0.0;
    for (i, v) in u.values().iter().enumerate() {
        let x = grid.position(i);
        let mut xg = Complex64::new(0.0, 0.0);
        for (axis, g) in grad.iter().enumerate() {
            xg += g[i] * x[axis];
        }
        acc += (v.conj() * xg).im;
    }
    Ok(acc * grid.cell_volume())
}

/// `⟨u, Mu⟩ = Σ_k ‖D_m^{(2-α)/2}(x_k u)‖²`, nonnegative by construction.
pub fn weighted_virial(u: &ComplexField, m: f64, alpha: f64) -> Result<f64, SpectralError> {
    u.expect_space(Space::Physical)?;
    let grid = u.grid();
    let weights = SobolevVariant::Massive(m).weights(grid, 0.5 * (2.0 - alpha));
    let mut total = 0.0;
    for axis in 0..grid.dim() {
        let xk: Vec<Complex64> = u
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| v * grid.position(i)[axis])
            .collect();
        let field = ComplexField::new(grid, xk, Space::Physical)?;
        total += weighted_norm(&field, &weights);
    }
    Ok(total)
}

/// Rate of change of `⟨u, Au⟩` under the free flow with symbol
/// `(m² + |ξ|²)^{α/2}`: `α⟨u, D_m^α u⟩ − αm²⟨u, D_m^{α−2} u⟩`.
pub fn free_dilation_virial_rate(
    u: &ComplexField,
    m: f64,
    alpha: f64,
) -> Result<f64, SpectralError> {
    let grid = u.grid();
    let top = SobolevVariant::Massive(m).weights(grid, 0.5 * alpha);
    let low: Vec<f64> = grid
        .xi_squared()
        .iter()
        .map(|&k2| {
            let w = m * m + k2;
            if w == 0.0 {
                0.0
            } else {
                w.powf(0.5 * alpha - 1.0)
            }
        })
        .collect();
    Ok(alpha * weighted_norm(u, &top) - alpha * m * m * weighted_norm(u, &low))
}

/// `(‖xu‖², ‖|x|∇u‖)`.
pub fn moments(u: &ComplexField) -> Result<(f64, f64), SpectralError> {
    let grid = u.grid();
    let r2 = grid.radius_squared();
    let h_n = grid.cell_volume();
    let moment2: f64 = u
        .values()
        .iter()
        .zip(&r2)
        .map(|(v, r)| r * v.norm_sqr())
        .sum::<f64>()
        * h_n;
    let grad = spectral_gradient(u)?;
    let mut g = 0.0;
    for comp in &grad {
        g += comp
            .iter()
            .zip(&r2)
            .map(|(v, r)| r * v.norm_sqr())
            .sum::<f64>();
    }
    Ok((moment2, (g * h_n).sqrt()))
}

/// `∫ x |u|² / ∫ |u|²`.
pub fn centroid(u: &ComplexField) -> [f64; 3] {
    let grid = u.grid();
    let mut c = [0.0; 3];
    let mut mass = 0.0;
    for (i, v) in u.values().iter().enumerate() {
        let x = grid.position(i);
        let d = v.norm_sqr();
        mass += d;
        for axis in 0..grid.dim() {
            c[axis] += x[axis] * d;
        }
    }
    if mass > 0.0 {
        c.iter_mut().for_each(|v| *v /= mass);
    }
    c
}

/// One row of diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub mass: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub energy: f64,
    pub h_gamma_half: f64,
    pub dilation_virial: f64,
    pub weighted_virial: f64,
    pub moment2: f64,
    pub grad_moment: f64,
    pub extra: BTreeMap<String, f64>,
}

pub const RECORD_COLUMNS: [&str; 10] = [
    "t",
    "mass",
    "kinetic",
    "potential",
    "energy",
    "h_gamma_half",
    "dilation_virial",
    "weighted_virial",
    "moment2",
    "grad_moment",
];

impl ObservableRecord {
    /// Evaluates every field at time `t`. The weighted virial uses the mass
    /// and exponent of the dispersion symbol.
    pub fn measure(
        u: &ComplexField,
        t: f64,
        dispersion: &DispersionSymbol,
        kernel: &HartreeKernel,
    ) -> Result<Self, ObservableError> {
        let (kinetic, potential, energy) = energy(u, dispersion, kernel)?;
        let (m, alpha) = dispersion.kind().mass_and_exponent();
        let h_gamma_half = weighted_norm(
            u,
            &SobolevVariant::Inhomogeneous.weights(u.grid(), 0.5 * kernel.gamma()),
        )
        .sqrt();
        let (moment2, grad_moment) = moments(u)?;
        let c = centroid(u);
        let half_length = u.grid().half_length();
        if c.iter().map(|x| x * x).sum::<f64>().sqrt() > 0.1 * half_length
            && !CENTROID_WARNED.swap(true, Ordering::Relaxed)
        {
            log::warn!(
                "data centroid {:?} is off-centre; virial values assume centred data",
                &c[..u.grid().dim()]
            );
        }
        Ok(ObservableRecord {
            t,
            mass: u.l2_norm_sq(),
            kinetic,
            potential,
            energy,
            h_gamma_half,
            dilation_virial: dilation_virial(u)?,
            weighted_virial: weighted_virial(u, m, alpha)?,
            moment2,
            grad_moment,
            extra: BTreeMap::new(),
        })
    }

    fn fixed_values(&self) -> [f64; 10] {
        [
            self.t,
            self.mass,
            self.kinetic,
            self.potential,
            self.energy,
            self.h_gamma_half,
            self.dilation_virial,
            self.weighted_virial,
            self.moment2,
            self.grad_moment,
        ]
    }
}

/// CSV sink for records. Extra keys of the first record fix the trailing
/// columns; later records must carry the same keys (missing ones are blank).
pub struct ObservableWriter<W: Write> {
    inner: csv::Writer<W>,
    extra_keys: Option<Vec<String>>,
}

impl<W: Write> ObservableWriter<W> {
    pub fn new(writer: W) -> Self {
        ObservableWriter {
            inner: csv::Writer::from_writer(writer),
            extra_keys: None,
        }
    }

    pub fn write(&mut self, record: &ObservableRecord) -> Result<(), ObservableError> {
        if self.extra_keys.is_none() {
            let keys: Vec<String> = record.extra.keys().cloned().collect();
            let header: Vec<&str> = RECORD_COLUMNS
                .iter()
                .copied()
                .chain(keys.iter().map(String::as_str))
                .collect();
            self.inner.write_record(&header)?;
            self.extra_keys = Some(keys);
        }
        let keys = self.extra_keys.as_ref().unwrap();
        let mut row: Vec<String> = record
            .fixed_values()
            .iter()
            .map(|v| format!("{v:e}"))
            .collect();
        for k in keys {
            row.push(
                record
                    .extra
                    .get(k)
                    .map(|v| format!("{v:e}"))
                    .unwrap_or_default(),
            );
        }
        self.inner.write_record(&row)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, ObservableError> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| ObservableError::Io(e.into_error()))
    }
}

// Warned once per process; a drifting run would otherwise warn at every record.
static CENTROID_WARNED: AtomicBool = AtomicBool::new(false);

/// Residuals of the two virial inequalities and the concavity bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirialReport {
    /// `max_t [d/dt⟨u,Au⟩ − 2αE(φ)]`.
    pub dilation_residual: f64,
    /// `max_t [d/dt⟨u,Mu⟩ − 2α⟨u,Au⟩] / ‖φ‖⁴`.
    pub fitted_c: f64,
    /// `max_t [d²/dt²⟨u,Mu⟩ − 4α²E(φ)]`.
    pub concavity_residual: f64,
    pub samples: usize,
}

pub const MIN_VIRIAL_SAMPLES: usize = 16;

/// Central differences of the virials along a uniform-cadence trajectory.
/// `psi` must be nonincreasing.
pub fn virial_inequality_residuals(
    trajectory: &[ObservableRecord],
    e_phi: f64,
    alpha: f64,
    psi: &RadialProfile,
) -> Result<VirialReport, ObservableError> {
    let n = trajectory.len();
    if n < MIN_VIRIAL_SAMPLES {
        return Err(ObservableError::TooFewSamples {
            needed: MIN_VIRIAL_SAMPLES,
            got: n,
        });
    }
    if let RadialProfile::Table(table) = psi {
        for (r, _) in table.rho().iter().zip(table.psi()) {
            if *r > 0.0 && table.derivative(*r) > 0.0 {
                return Err(ObservableError::IncreasingProfile(*r));
            }
        }
    }
    let dt = trajectory[1].t - trajectory[0].t;
    if trajectory
        .windows(2)
        .any(|w| ((w[1].t - w[0].t) - dt).abs() > 1e-9 * dt.abs().max(1e-300))
    {
        return Err(ObservableError::NonUniformCadence);
    }
    let mass_sq = trajectory[0].mass * trajectory[0].mass;
    let mut report = VirialReport {
        dilation_residual: f64::NEG_INFINITY,
        fitted_c: f64::NEG_INFINITY,
        concavity_residual: f64::NEG_INFINITY,
        samples: n,
    };
    for i in 1..n - 1 {
        let (a, b, c) = (&trajectory[i - 1], &trajectory[i], &trajectory[i + 1]);
        let d_a = (c.dilation_virial - a.dilation_virial) / (2.0 * dt);
        let d_m = (c.weighted_virial - a.weighted_virial) / (2.0 * dt);
        let dd_m = (c.weighted_virial - 2.0 * b.weighted_virial + a.weighted_virial) / (dt * dt);
        report.dilation_residual = report.dilation_residual.max(d_a - 2.0 * alpha * e_phi);
        report.fitted_c = report
            .fitted_c
            .max((d_m - 2.0 * alpha * b.dilation_virial) / mass_sq);
        report.concavity_residual = report
            .concavity_residual
            .max(dd_m - 4.0 * alpha * alpha * e_phi);
    }
    Ok(report)
}

/// Smallest positive root of `2α²E t² + 2α(A + C‖φ‖⁴) t + M`.
pub fn parabola_root(
    e_phi: f64,
    a_phi: f64,
    m_phi: f64,
    alpha: f64,
    c: f64,
    phi_norm: f64,
) -> Option<f64> {
    let qa = 2.0 * alpha * alpha * e_phi;
    let qb = 2.0 * alpha * (a_phi + c * phi_norm.powi(4));
    let qc = m_phi;
    let roots: Vec<f64> = if qa == 0.0 {
        if qb == 0.0 {
            vec![]
        } else {
            vec![-qc / qb]
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            vec![]
        } else {
            let sq = disc.sqrt();
            let q = -0.5 * (qb + qb.signum() * sq);
            if q == 0.0 {
                vec![0.0]
            } else {
                vec![q / qa, qc / q]
            }
        }
    };
    roots
        .into_iter()
        .filter(|r| *r > 0.0 && r.is_finite())
        .min_by(|a, b| a.total_cmp(b))
}

/// Running `(∫ ‖u(t)‖^q dt)^{1/q}` with `‖·‖` the `L^r` norm of `|∇|^s u`.
#[derive(Debug, Clone)]
pub struct StrichartzAccumulator {
    q: f64,
    r: f64,
    sobolev_s: Option<f64>,
    integral: f64,
    last: Option<(f64, f64)>,
}

impl StrichartzAccumulator {
    pub fn new(q: f64, r: f64, sobolev_s: Option<f64>) -> Result<Self, ObservableError> {
        if !(q >= 1.0) || !(r >= 1.0) {
            return Err(ObservableError::InvalidExponent(format!(
                "need q, r >= 1, got q = {q}, r = {r}"
            )));
        }
        Ok(StrichartzAccumulator {
            q,
            r,
            sobolev_s,
            integral: 0.0,
            last: None,
        })
    }

    pub fn spatial_norm(&self, u: &ComplexField) -> Result<f64, ObservableError> {
        match self.sobolev_s {
            Some(s) if s != 0.0 => {
                let sym = DispersionSymbol::new(u.grid(), SymbolKind::Homogeneous { exponent: s })?;
                Ok(apply_symbol(u, &sym)?.lebesgue_norm(self.r))
            }
            _ => {
                u.expect_space(Space::Physical)?;
                Ok(u.lebesgue_norm(self.r))
            }
        }
    }

    pub fn update(&mut self, u: &ComplexField, t: f64) -> Result<(), ObservableError> {
        let norm = self.spatial_norm(u)?;
        self.update_with_norm(norm, t)
    }

    pub fn update_with_norm(&mut self, norm: f64, t: f64) -> Result<(), ObservableError> {
        if let Some((t_prev, n_prev)) = self.last {
            if t < t_prev {
                return Err(ObservableError::NonMonotoneTime {
                    previous: t_prev,
                    t,
                });
            }
            if self.q.is_infinite() {
                self.integral = self.integral.max(norm);
            } else {
                self.integral += 0.5 * (t - t_prev) * (n_prev.powf(self.q) + norm.powf(self.q));
            }
        } else if self.q.is_infinite() {
            self.integral = norm;
        }
        self.last = Some((t, norm));
        Ok(())
    }

    pub fn value(&self) -> f64 {
        if self.q.is_infinite() {
            self.integral
        } else {
            self.integral.powf(1.0 / self.q)
        }
    }
}

/// Streaming trapezoid quadrature of `φ⁺ = φ − i∫₀^T U(−t)F(u(t)) dt`.
#[derive(Debug, Clone)]
pub struct ScatteringAccumulator {
    dispersion: DispersionSymbol,
    phi: ComplexField,
    integral: Vec<Complex64>,
    last: Option<(f64, Vec<Complex64>)>,
    samples: usize,
}

pub const MIN_SCATTERING_SAMPLES: usize = 16;

impl ScatteringAccumulator {
    pub fn new(phi: &ComplexField, dispersion: &DispersionSymbol) -> Result<Self, ObservableError> {
        phi.expect_space(Space::Physical)?;
        phi.expect_grid(dispersion.grid())?;
        Ok(ScatteringAccumulator {
            dispersion: dispersion.clone(),
            phi: phi.clone(),
            integral: vec![Complex64::new(0.0, 0.0); phi.grid().len()],
            last: None,
            samples: 0,
        })
    }

    /// Adds the sample `F(u(t))`.
    pub fn push(&mut self, t: f64, f: &ComplexField) -> Result<(), ObservableError> {
        let pulled = free_evolve(f, -t, &self.dispersion)?.into_values();
        if let Some((t_prev, prev)) = &self.last {
            if t < *t_prev {
                return Err(ObservableError::NonMonotoneTime {
                    previous: *t_prev,
                    t,
                });
            }
            let w = 0.5 * (t - t_prev);
            for ((acc, a), b) in self.integral.iter_mut().zip(prev).zip(&pulled) {
                *acc += (a + b) * w;
            }
        }
        self.last = Some((t, pulled));
        self.samples += 1;
        Ok(())
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn horizon(&self) -> f64 {
        self.last.as_ref().map_or(0.0, |(t, _)| *t)
    }

    pub fn phi_plus(&self) -> Result<ComplexField, ObservableError> {
        if self.samples < MIN_SCATTERING_SAMPLES {
            return Err(ObservableError::TooFewSamples {
                needed: MIN_SCATTERING_SAMPLES,
                got: self.samples,
            });
        }
        let i = Complex64::new(0.0, 1.0);
        let values = self
            .phi
            .values()
            .iter()
            .zip(&self.integral)
            .map(|(p, acc)| p - i * acc)
            .collect();
        Ok(ComplexField::new(self.phi.grid(), values, Space::Physical)?)
    }
}

/// Batch form: `φ⁺` from `F(u(t))` snapshots on a cadence.
pub fn scattering_state(
    samples: &[(f64, ComplexField)],
    phi: &ComplexField,
    dispersion: &DispersionSymbol,
) -> Result<ComplexField, ObservableError> {
    let mut acc = ScatteringAccumulator::new(phi, dispersion)?;
    for (t, f) in samples {
        acc.push(*t, f)?;
    }
    acc.phi_plus()
}

/// `‖u(t) − U(t)φ⁺‖_{H^s}` for each `(t, u(t))`.
pub fn scattering_defect(
    phi_plus: &ComplexField,
    states: &[(f64, ComplexField)],
    dispersion: &DispersionSymbol,
    s: f64,
) -> Result<Vec<(f64, f64)>, ObservableError> {
    let weights = SobolevVariant::Inhomogeneous.weights(phi_plus.grid(), s);
    states
        .iter()
        .map(|(t, u)| {
            let free = free_evolve(phi_plus, *t, dispersion)?;
            Ok((*t, weighted_norm(&(u - &free), &weights).sqrt()))
        })
        .collect()
}

/// `‖U(−t)u − φ⁺‖_{H^s}` from pulled-back states, equal to the defect above.
pub fn pulled_back_defect(phi_plus: &ComplexField, pulled: &ComplexField, s: f64) -> f64 {
    let weights = SobolevVariant::Inhomogeneous.weights(phi_plus.grid(), s);
    weighted_norm(&(pulled - phi_plus), &weights).sqrt()
}

/// `H^s` distance between two fields on the same grid.
pub fn sobolev_distance(a: &ComplexField, b: &ComplexField, s: f64) -> f64 {
    let weights = SobolevVariant::Inhomogeneous.weights(a.grid(), s);
    weighted_norm(&(a - b), &weights).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hartree::{build_kernel, Coupling, PotentialSpec};
    use crate::spectral::{build_grid, Grid};
    use approx::assert_relative_eq;

    fn free_kernel(grid: &Grid) -> HartreeKernel {
        build_kernel(
            grid,
            PotentialSpec::new(0.5, Coupling::Focusing, RadialProfile::Constant(0.0)),
        )
        .unwrap()
    }

    #[test]
    fn plane_wave_kinetic_energy() {
        let g = build_grid(2, 16, 3.0).unwrap();
        let k = [2.0 * g.frequency_step(), -g.frequency_step()];
        let a = 0.7;
        let u = ComplexField::from_fn(&g, |x| Complex64::from_polar(a, k[0] * x[0] + k[1] * x[1]));
        let d = DispersionSymbol::relativistic(&g, 1.5, 1.4).unwrap();
        let (kin, pot, e) = energy(&u, &d, &free_kernel(&g)).unwrap();
        let k2 = k[0] * k[0] + k[1] * k[1];
        let expected = 0.5 * (2.25 + k2).powf(0.7) * a * a * 36.0;
        assert_relative_eq!(kin, expected, max_relative = 1e-12);
        assert_eq!(pot, 0.0);
        assert_eq!(e, kin);
    }

    #[test]
    fn real_data_has_zero_dilation_virial() {
        let g = build_grid(2, 32, 6.0).unwrap();
        let u = ComplexField::from_fn(&g, |x| {
            Complex64::new((-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp(), 0.0)
        });
        assert!(dilation_virial(&u).unwrap().abs() < 1e-14);
    }

    #[test]
    fn chirped_gaussian_dilation_virial() {
        let g = build_grid(1, 256, 12.0).unwrap();
        let b = 0.3;
        let u = ComplexField::from_fn(&g, |x| {
            Complex64::from_polar((-x[0] * x[0]).exp(), b * x[0] * x[0])
        });
        let expected: f64 = 2.0 * b * (std::f64::consts::PI / 2.0).sqrt() / 4.0;
        assert_relative_eq!(dilation_virial(&u).unwrap(), expected, max_relative = 1e-10);
    }

    #[test]
    fn weighted_virial_examples() {
        let g = build_grid(1, 128, 12.0).unwrap();
        let u = ComplexField::from_fn(&g, |x| {
            Complex64::new((-x[0] * x[0]).exp(), 0.2 * x[0] * (-x[0] * x[0]).exp())
        });
        let (moment2, _) = moments(&u).unwrap();
        assert_relative_eq!(
            weighted_virial(&u, 1.0, 2.0).unwrap(),
            moment2,
            max_relative = 1e-12
        );
        assert_eq!(
            weighted_virial(&ComplexField::zeros(&g), 1.0, 1.5).unwrap(),
            0.0
        );
        let big = weighted_virial(&u, 100.0, 1.5).unwrap();
        assert_relative_eq!(big, 100f64.powf(0.5) * moment2, max_relative = 1e-2);
    }

    #[test]
    fn free_rate_matches_finite_difference() {
        let g = build_grid(1, 256, 20.0).unwrap();
        let d = DispersionSymbol::relativistic(&g, 1.0, 1.5).unwrap();
        let u = ComplexField::from_fn(&g, |x| {
            Complex64::from_polar((-x[0] * x[0] / 2.0).exp(), 0.4 * x[0] * x[0])
        });
        let h = 1e-3;
        let plus = dilation_virial(&free_evolve(&u, h, &d).unwrap()).unwrap();
        let minus = dilation_virial(&free_evolve(&u, -h, &d).unwrap()).unwrap();
        let fd = (plus - minus) / (2.0 * h);
        let rate = free_dilation_virial_rate(&u, 1.0, 1.5).unwrap();
        assert_relative_eq!(fd, rate, max_relative = 1e-4);
    }

    #[test]
    fn parabola_root_examples() {
        for alpha in [1.2, 1.5, 1.9] {
            let r = parabola_root(-1.0, 0.0, 2.0 * alpha * alpha, alpha, 0.0, 1.0).unwrap();
            assert_relative_eq!(r, 1.0, max_relative = 1e-14);
        }
        assert!(parabola_root(1.0, 0.5, 1.0, 1.5, 0.1, 1.0).is_none());
        // Positive energy but a very negative linear term: two positive roots.
        let r = parabola_root(1.0, -10.0, 1.0, 1.5, 0.0, 1.0).unwrap();
        let (qa, qb) = (2.0 * 2.25, -30.0);
        assert!((qa * r * r + qb * r + 1.0).abs() < 1e-12);
        assert!(r < -qb / (2.0 * qa));
    }

    #[test]
    fn strichartz_accumulator_examples() {
        let g = build_grid(1, 16, 4.0).unwrap();
        let mut acc = StrichartzAccumulator::new(2.0, 2.0, None).unwrap();
        for i in 0..=10 {
            acc.update(&ComplexField::zeros(&g), i as f64).unwrap();
        }
        assert_eq!(acc.value(), 0.0);
        let u = ComplexField::from_fn(&g, |x| Complex64::new((-x[0] * x[0]).exp(), 0.0));
        let norm = u.l2_norm();
        let mut acc = StrichartzAccumulator::new(2.0, 2.0, None).unwrap();
        for i in 0..=20 {
            acc.update(&u, 0.25 * i as f64).unwrap();
        }
        assert_relative_eq!(acc.value(), norm * 5f64.sqrt(), max_relative = 1e-13);
        assert!(acc.update(&u, 1.0).is_err());
    }

    #[test]
    fn free_scattering_state_is_the_initial_datum() {
        let g = build_grid(1, 64, 10.0).unwrap();
        let d = DispersionSymbol::relativistic(&g, 1.0, 1.5).unwrap();
        let k = free_kernel(&g);
        let phi = ComplexField::from_fn(&g, |x| Complex64::new((-x[0] * x[0]).exp(), 0.0));
        let mut snaps = Vec::new();
        let mut states = Vec::new();
        for i in 0..20 {
            let t = 0.1 * i as f64;
            let u = free_evolve(&phi, t, &d).unwrap();
            snaps.push((t, crate::hartree::nonlinearity(&u, &k).unwrap()));
            states.push((t, u));
        }
        let plus = scattering_state(&snaps, &phi, &d).unwrap();
        assert!((&plus - &phi).max_abs() < 1e-12);
        for (_, defect) in scattering_defect(&plus, &states, &d, 0.25).unwrap() {
            assert!(defect < 1e-12);
        }
        assert!(scattering_state(&snaps[..10], &phi, &d).is_err());
    }

    #[test]
    fn virial_residuals_need_enough_uniform_samples() {
        let rec = |t: f64| ObservableRecord {
            t,
            mass: 1.0,
            kinetic: 0.0,
            potential: 0.0,
            energy: 0.0,
            h_gamma_half: 0.0,
            dilation_virial: t,
            weighted_virial: t * t,
            moment2: 0.0,
            grad_moment: 0.0,
            extra: BTreeMap::new(),
        };
        let few: Vec<_> = (0..8).map(|i| rec(i as f64)).collect();
        assert!(virial_inequality_residuals(&few, -1.0, 1.5, &RadialProfile::one()).is_err());
        let many: Vec<_> = (0..20).map(|i| rec(0.5 * i as f64)).collect();
        let report = virial_inequality_residuals(&many, 0.5, 1.5, &RadialProfile::one()).unwrap();
        assert_relative_eq!(report.dilation_residual, 1.0 - 1.5, max_relative = 1e-12);
        assert_relative_eq!(
            report.concavity_residual,
            2.0 - 4.0 * 2.25 * 0.5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn csv_writer_emits_header_and_rows() {
        let g = build_grid(1, 16, 4.0).unwrap();
        let d = DispersionSymbol::relativistic(&g, 1.0, 1.5).unwrap();
        let u = ComplexField::from_fn(&g, |x| Complex64::new((-x[0] * x[0]).exp(), 0.0));
        let mut rec = ObservableRecord::measure(&u, 0.0, &d, &free_kernel(&g)).unwrap();
        rec.extra.insert("probe".into(), 2.5);
        let mut w = ObservableWriter::new(Vec::new());
        w.write(&rec).unwrap();
        w.write(&rec).unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], format!("{},probe", RECORD_COLUMNS.join(",")));
        assert!(lines[1].ends_with("2.5e0"));
    }
}
