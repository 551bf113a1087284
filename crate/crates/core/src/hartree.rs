//! The Hartree convolution `K_γ(v) = (ψ(|·|)/|·|^γ) * v`, the nonlinearity
//! `F(u) = λ K_γ(|u|²) u` and the potential energy `V(u) = ¼⟨F(u), u⟩`.
//!
//! The kernel is sampled in physical space on a grid with twice as many
//! points per axis as the simulation grid, so the FFT product is a linear
//! (non-circular) convolution over the box. The sample at the origin is
//! replaced by the exact cell average of the kernel.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;
use thiserror::Error;

use crate::fft::FftNd;
use crate::quadrature::singular_cell_average;
use crate::spectral::{ComplexField, Grid, Space, SpectralError};

#[derive(Debug, Error)]
pub enum HartreeError {
    #[error("gamma must satisfy 0 < gamma < {dim}, got {gamma}")]
    InvalidGamma { gamma: f64, dim: usize },
    #[error("radial profile takes a negative value {value} at rho = {rho}")]
    NegativeProfile { rho: f64, value: f64 },
    #[error("invalid radial table: {0}")]
    InvalidTable(String),
    #[error("coupling sign must be +1 or -1, got {0}")]
    InvalidCoupling(i64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("reading radial table: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing radial table: {0}")]
    Csv(#[from] csv::Error),
}

/// Sign `λ` of the nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `λ = -1`.
    Focusing,
    /// `λ = +1`.
    Defocusing,
}

impl Coupling {
    pub fn sign(self) -> f64 {
        match self {
            Coupling::Focusing => -1.0,
            Coupling::Defocusing => 1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Coupling::Focusing => -1,
            Coupling::Defocusing => 1,
        }
    }

    pub fn from_sign(sign: i64) -> Result<Self, HartreeError> {
        match sign {
            -1 => Ok(Coupling::Focusing),
            1 => Ok(Coupling::Defocusing),
            other => Err(HartreeError::InvalidCoupling(other)),
        }
    }
}

/// Tabulated radial profile with linear interpolation, extended by its last
/// value beyond the table.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialTable {
    rho: Vec<f64>,
    psi: Vec<f64>,
    dpsi: Option<Vec<f64>>,
}

impl RadialTable {
    pub fn new(rho: Vec<f64>, psi: Vec<f64>, dpsi: Option<Vec<f64>>) -> Result<Self, HartreeError> {
        if rho.len() < 2 || rho.len() != psi.len() {
            return Err(HartreeError::InvalidTable(
                "need at least two (rho, psi) rows of equal length".into(),
            ));
        }
        if let Some(d) = &dpsi {
            if d.len() != rho.len() {
                return Err(HartreeError::InvalidTable(
                    "derivative column length differs".into(),
                ));
            }
        }
        if rho[0] != 0.0 {
            return Err(HartreeError::InvalidTable("rho must start at 0".into()));
        }
        if rho.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(HartreeError::InvalidTable(
                "rho must be strictly increasing".into(),
            ));
        }
        for (&r, &p) in rho.iter().zip(&psi) {
            if !p.is_finite() {
                return Err(HartreeError::InvalidTable(format!(
                    "non-finite psi at rho = {r}"
                )));
            }
            if p < 0.0 {
                return Err(HartreeError::NegativeProfile { rho: r, value: p });
            }
        }
        Ok(RadialTable { rho, psi, dpsi })
    }

    /// Reads `rho,psi[,dpsi]` rows. A non-numeric first row is treated as a header.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, HartreeError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut rho = Vec::new();
        let mut psi = Vec::new();
        let mut dpsi = Vec::new();
        let mut columns = None;
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.iter().all(|f| f.is_empty()) {
                continue;
            }
            let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
            let fields = match parsed {
                Ok(v) => v,
                Err(_) if line == 0 => continue,
                Err(e) => {
                    return Err(HartreeError::InvalidTable(format!("row {}: {e}", line + 1)));
                }
            };
            if !(2..=3).contains(&fields.len()) {
                return Err(HartreeError::InvalidTable(format!(
                    "row {} has {} columns, expected 2 or 3",
                    line + 1,
                    fields.len()
                )));
            }
            if *columns.get_or_insert(fields.len()) != fields.len() {
                return Err(HartreeError::InvalidTable(
                    "inconsistent column count".into(),
                ));
            }
            rho.push(fields[0]);
            psi.push(fields[1]);
            if fields.len() == 3 {
                dpsi.push(fields[2]);
            }
        }
        let dpsi = if columns == Some(3) { Some(dpsi) } else { None };
        RadialTable::new(rho, psi, dpsi)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self, HartreeError> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    fn locate(&self, r: f64) -> Option<(usize, f64)> {
        if r >= *self.rho.last().unwrap() {
            return None;
        }
        let i = match self.rho.partition_point(|&x| x <= r) {
            0 => 0,
            k => k - 1,
        };
        let t = (r - self.rho[i]) / (self.rho[i + 1] - self.rho[i]);
        Some((i, t))
    }

    pub fn value(&self, r: f64) -> f64 {
        match self.locate(r) {
            Some((i, t)) => self.psi[i] * (1.0 - t) + self.psi[i + 1] * t,
            None => *self.psi.last().unwrap(),
        }
    }

    /// `ψ'(ρ)`: the tabulated derivative when present, else the slope of the
    /// interpolant. Zero beyond the table.
    pub fn derivative(&self, r: f64) -> f64 {
        match (self.locate(r), &self.dpsi) {
            (None, _) => 0.0,
            (Some((i, t)), Some(d)) => d[i] * (1.0 - t) + d[i + 1] * t,
            (Some((i, _)), None) => {
                (self.psi[i + 1] - self.psi[i]) / (self.rho[i + 1] - self.rho[i])
            }
        }
    }

    pub fn sup(&self) -> f64 {
        self.psi.iter().cloned().fold(0.0, f64::max)
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }
}

/// The bounded radial factor `ψ` of the kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialProfile {
    Constant(f64),
    Table(RadialTable),
}

impl RadialProfile {
    pub fn one() -> Self {
        RadialProfile::Constant(1.0)
    }

    pub fn value(&self, r: f64) -> f64 {
        match self {
            RadialProfile::Constant(c) => *c,
            RadialProfile::Table(t) => t.value(r),
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match self {
            RadialProfile::Constant(_) => 0.0,
            RadialProfile::Table(t) => t.derivative(r),
        }
    }

    /// `‖ψ‖_∞`.
    pub fn sup(&self) -> f64 {
        match self {
            RadialProfile::Constant(c) => *c,
            RadialProfile::Table(t) => t.sup(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sup() == 0.0
    }
}

/// `(γ, λ, ψ)` describing the Hartree term.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub gamma: f64,
    pub coupling: Coupling,
    pub psi: RadialProfile,
}

impl PotentialSpec {
    pub fn new(gamma: f64, coupling: Coupling, psi: RadialProfile) -> Self {
        PotentialSpec {
            gamma,
            coupling,
            psi,
        }
    }

    /// Pure Riesz kernel `|x|^{-γ}` (`ψ ≡ 1`).
    pub fn riesz(gamma: f64, coupling: Coupling) -> Self {
        Self::new(gamma, coupling, RadialProfile::one())
    }

    pub fn validate(&self, dim: usize) -> Result<(), HartreeError> {
        if !(self.gamma > 0.0 && self.gamma < dim as f64) {
            return Err(HartreeError::InvalidGamma {
                gamma: self.gamma,
                dim,
            });
        }
        if let RadialProfile::Constant(c) = self.psi {
            if !(c.is_finite() && c >= 0.0) {
                return Err(HartreeError::NegativeProfile { rho: 0.0, value: c });
            }
        }
        Ok(())
    }
}

/// `c_{n,γ} = 2^{n-γ} π^{n/2} Γ((n-γ)/2) / Γ(γ/2)`: the Fourier transform of
/// `|x|^{-γ}` is `c_{n,γ} |ξ|^{γ-n}` under the `e^{-ix·ξ}` convention.
pub fn riesz_constant(dim: usize, gamma: f64) -> f64 {
    let n = dim as f64;
    2f64.powf(n - gamma) * std::f64::consts::PI.powf(0.5 * n) * gamma_fn(0.5 * (n - gamma))
        / gamma_fn(0.5 * gamma)
}

/// Precomputed kernel transform on the doubled grid.
#[derive(Clone)]
pub struct HartreeKernel {
    inner: Arc<KernelInner>,
}

struct KernelInner {
    grid: Grid,
    spec: PotentialSpec,
    padded: FftNd,
    multiplier: Vec<Complex64>,
    singular_cell_value: f64,
    free: bool,
}

impl fmt::Debug for HartreeKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HartreeKernel")
            .field("grid", &self.inner.grid)
            .field("spec", &self.inner.spec)
            .field("singular_cell_value", &self.inner.singular_cell_value)
            .finish()
    }
}

pub fn build_kernel(grid: &Grid, spec: PotentialSpec) -> Result<HartreeKernel, HartreeError> {
    HartreeKernel::new(grid, spec)
}

impl HartreeKernel {
    pub fn new(grid: &Grid, spec: PotentialSpec) -> Result<Self, HartreeError> {
        let dim = grid.dim();
        spec.validate(dim)?;
        let n = grid.points_per_axis();
        let big = 2 * n;
        let h = grid.spacing();
        let padded = FftNd::new(dim, big);
        let psi = spec.psi.clone();
        let singular_cell_value = singular_cell_average(dim, h, spec.gamma, &|r| psi.value(r));

        let free = spec.psi.is_zero();
        let mut multiplier = vec![Complex64::new(0.0, 0.0); padded.len()];
        if !free {
            for (flat, slot) in multiplier.iter_mut().enumerate() {
                let mut rem = flat;
                let mut r2 = 0.0;
                for _ in 0..dim {
                    let q = rem % big;
                    rem /= big;
                    let offset = if q < n {
                        q as f64
                    } else {
                        q as f64 - big as f64
                    };
                    r2 += (offset * h).powi(2);
                }
                let value = if r2 == 0.0 {
                    singular_cell_value
                } else {
                    let r = r2.sqrt();
                    spec.psi.value(r) * r.powf(-spec.gamma)
                };
                if value < 0.0 {
                    return Err(HartreeError::NegativeProfile {
                        rho: r2.sqrt(),
                        value,
                    });
                }
                *slot = Complex64::new(value, 0.0);
            }
            padded.forward(&mut multiplier);
            let h_n = grid.cell_volume();
            multiplier.iter_mut().for_each(|v| *v *= h_n);
        }
        Ok(HartreeKernel {
            inner: Arc::new(KernelInner {
                grid: grid.clone(),
                spec,
                padded,
                multiplier,
                singular_cell_value,
                free,
            }),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.inner.grid
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.inner.spec
    }

    pub fn gamma(&self) -> f64 {
        self.inner.spec.gamma
    }

    pub fn coupling(&self) -> Coupling {
        self.inner.spec.coupling
    }

    pub fn singular_cell_value(&self) -> f64 {
        self.inner.singular_cell_value
    }

    /// Transform of the sampled kernel on the doubled grid (storage order,
    /// frequency step `π / (2L)`), scaled by the cell volume.
    pub fn padded_multiplier(&self) -> &[Complex64] {
        &self.inner.multiplier
    }

    /// True when `ψ ≡ 0`, i.e. the equation is linear.
    pub fn is_free(&self) -> bool {
        self.inner.free
    }

    /// Kernel sample at an integer lattice offset (in units of the spacing).
    pub fn sample(&self, offset: &[i64]) -> f64 {
        let h = self.inner.grid.spacing();
        let r2: f64 = offset.iter().map(|&o| (o as f64 * h).powi(2)).sum();
        if r2 == 0.0 {
            self.inner.singular_cell_value
        } else {
            let r = r2.sqrt();
            self.inner.spec.psi.value(r) * r.powf(-self.inner.spec.gamma)
        }
    }

    /// Linear convolution `h^n Σ_y k(x - y) v(y)` of complex samples.
    pub fn convolve(&self, values: &[Complex64]) -> Vec<Complex64> {
        let grid = &self.inner.grid;
        let dim = grid.dim();
        let n = grid.points_per_axis();
        if self.inner.free {
            return vec![Complex64::new(0.0, 0.0); values.len()];
        }
        let big = 2 * n;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.inner.padded.len()];
        for (i, v) in values.iter().enumerate() {
            buf[padded_index(i, n, big, dim)] = *v;
        }
        self.inner.padded.forward_pruned(&mut buf, n);
        for (b, m) in buf.iter_mut().zip(&self.inner.multiplier) {
            *b *= m;
        }
        self.inner.padded.inverse_pruned(&mut buf, n);
        let scale = 1.0 / self.inner.padded.len() as f64;
        (0..values.len())
            .map(|i| buf[padded_index(i, n, big, dim)] * scale)
            .collect()
    }

    /// Convolution of a real density; the result is clamped at zero, which
    /// only removes round-off since the kernel and density are nonnegative.
    pub fn convolve_density(&self, density: &[f64]) -> Vec<f64> {
        let values: Vec<Complex64> = density.iter().map(|&d| Complex64::new(d, 0.0)).collect();
        self.convolve(&values)
            .into_iter()
            .map(|v| v.re.max(0.0))
            .collect()
    }

    /// Largest relative deviation of the shell-averaged padded multiplier
    /// from the continuum value `c_{n,γ}|ξ|^{γ-n}`, over shells of width one
    /// frequency step with mean radius in `[xi_min, xi_max]`. Meaningful for
    /// `ψ ≡ 1` only.
    ///
    /// Individual lattice values carry an oscillating term from the faces of
    /// the truncation box that is of the same order as the multiplier along
    /// the coordinate axes; averaging over a shell cancels it.
    pub fn riesz_multiplier_deviation(&self, xi_min: f64, xi_max: f64) -> f64 {
        let grid = &self.inner.grid;
        let dim = grid.dim();
        let big = 2 * grid.points_per_axis();
        let step = std::f64::consts::PI / (2.0 * grid.half_length());
        let gamma = self.inner.spec.gamma;
        let c = riesz_constant(dim, gamma) * self.inner.spec.psi.value(0.0);
        let shells = (xi_max / step).ceil() as usize + 2;
        // (Σ multiplier, Σ expected) per shell.
        let mut sums = vec![(0.0, 0.0, 0usize); shells];
        for (flat, m) in self.inner.multiplier.iter().enumerate() {
            let mut rem = flat;
            let mut k2 = 0.0;
            for _ in 0..dim {
                let q = rem % big;
                rem /= big;
                let j = if q < big / 2 {
                    q as f64
                } else {
                    q as f64 - big as f64
                };
                k2 += (j * step).powi(2);
            }
            let k = k2.sqrt();
            let shell = (k / step).round() as usize;
            if k > 0.0 && shell < shells {
                sums[shell].0 += m.re;
                sums[shell].1 += c * k.powf(gamma - dim as f64);
                sums[shell].2 += 1;
            }
        }
        sums.iter()
            .enumerate()
            .filter(|(s, acc)| {
                acc.2 > 0 && (*s as f64 * step) >= xi_min && (*s as f64 * step) <= xi_max
            })
            .map(|(_, acc)| (acc.0 - acc.1).abs() / acc.1)
            .fold(0.0, f64::max)
    }
}

fn padded_index(flat: usize, n: usize, big: usize, dim: usize) -> usize {
    let mut rem = flat;
    let mut out = 0;
    let mut place = 1;
    for _ in 0..dim {
        out += (rem % n) * place;
        rem /= n;
        place *= big;
    }
    out
}

/// `K_γ(|u|²)` on the simulation grid.
pub fn hartree_potential(
    u: &ComplexField,
    kernel: &HartreeKernel,
) -> Result<Vec<f64>, HartreeError> {
    u.expect_grid(kernel.grid())?;
    u.expect_space(Space::Physical)?;
    Ok(kernel.convolve_density(&u.density()))
}

/// `F(u) = λ K_γ(|u|²) u`.
pub fn nonlinearity(
    u: &ComplexField,
    kernel: &HartreeKernel,
) -> Result<ComplexField, HartreeError> {
    let potential = hartree_potential(u, kernel)?;
    let lambda = kernel.coupling().sign();
    let values = u
        .values()
        .iter()
        .zip(&potential)
        .map(|(v, p)| v * (lambda * p))
        .collect();
    Ok(ComplexField::new(u.grid(), values, Space::Physical)?)
}

/// `V(u) = (λ/4) ∫ K_γ(|u|²) |u|² dx`.
pub fn potential_energy(u: &ComplexField, kernel: &HartreeKernel) -> Result<f64, HartreeError> {
    let density = {
        u.expect_grid(kernel.grid())?;
        u.expect_space(Space::Physical)?;
        u.density()
    };
    let potential = kernel.convolve_density(&density);
    Ok(potential_energy_from(&density, &potential, kernel))
}

pub(crate) fn potential_energy_from(
    density: &[f64],
    potential: &[f64],
    kernel: &HartreeKernel,
) -> f64 {
    let sum: f64 = density.iter().zip(potential).map(|(d, p)| d * p).sum();
    0.25 * kernel.coupling().sign() * sum * kernel.grid().cell_volume()
}
