//! Periodic grids, scaled Fourier transforms and Fourier multipliers.
//!
//! The continuum transform being approximated is
//! `û(ξ) = ∫ e^{-i x·ξ} u(x) dx` with inverse
//! `u(x) = (2π)^{-n} ∫ e^{i x·ξ} û(ξ) dξ`. On the box `[-L, L)^n` with `N`
//! points per axis the forward transform therefore carries the cell volume
//! `h^n` and the inverse carries `(2π)^{-n} (π/L)^n = (2L)^{-n}`.
//!
//! Frequency-space arrays are stored in FFT order: along each axis index `q`
//! holds `ξ = π q / L` for `q < N/2` and `ξ = π (q - N) / L` otherwise.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft::FftNd;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field is in {found:?} space, expected {expected:?}")]
    SpaceMismatch { expected: Space, found: Space },
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("invalid symbol: {0}")]
    InvalidSymbol(String),
    #[error("expected {expected} samples, got {found}")]
    LengthMismatch { expected: usize, found: usize },
}

/// Whether a field holds physical samples or scaled Fourier coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Physical,
    Frequency,
}

/// Uniform periodic lattice on `[-L, L)^n`, shared cheaply between fields.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

struct GridInner {
    dim: usize,
    points: usize,
    half_length: f64,
    spacing: f64,
    fft: FftNd,
    xi_sq: OnceLock<Arc<Vec<f64>>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.inner.dim)
            .field("points", &self.inner.points)
            .field("half_length", &self.inner.half_length)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.dim == other.inner.dim
                && self.inner.points == other.inner.points
                && self.inner.half_length == other.inner.half_length)
    }
}

/// Builds a grid with `points_per_axis` samples on `[-half_length, half_length)`
/// along each of `dim` axes.
pub fn build_grid(
    dim: usize,
    points_per_axis: usize,
    half_length: f64,
) -> Result<Grid, SpectralError> {
    Grid::new(dim, points_per_axis, half_length)
}

/// Serializable description `(n, N, L)` of a [`Grid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub points: usize,
    pub half_length: f64,
}

impl GridSpec {
    pub fn new(dim: usize, points: usize, half_length: f64) -> Self {
        GridSpec {
            dim,
            points,
            half_length,
        }
    }

    pub fn build(&self) -> Result<Grid, SpectralError> {
        Grid::new(self.dim, self.points, self.half_length)
    }

    /// Same box with twice the points per axis.
    pub fn refined(&self) -> Self {
        GridSpec {
            points: 2 * self.points,
            ..*self
        }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.points as f64
    }
}

impl Grid {
    pub fn spec(&self) -> GridSpec {
        GridSpec::new(self.inner.dim, self.inner.points, self.inner.half_length)
    }

    pub fn new(
        dim: usize,
        points_per_axis: usize,
        half_length: f64,
    ) -> Result<Grid, SpectralError> {
        if !(1..=3).contains(&dim) {
            return Err(SpectralError::InvalidGrid(format!(
                "dimension {dim} not in 1..=3"
            )));
        }
        if points_per_axis < 8 || !points_per_axis.is_multiple_of(2) {
            return Err(SpectralError::InvalidGrid(format!(
                "points per axis must be even and at least 8, got {points_per_axis}"
            )));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(SpectralError::InvalidGrid(format!(
                "half length must be positive, got {half_length}"
            )));
        }
        Ok(Grid {
            inner: Arc::new(GridInner {
                dim,
                points: points_per_axis,
                half_length,
                spacing: 2.0 * half_length / points_per_axis as f64,
                fft: FftNd::new(dim, points_per_axis),
                xi_sq: OnceLock::new(),
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.inner.points
    }

    pub fn half_length(&self) -> f64 {
        self.inner.half_length
    }

    pub fn spacing(&self) -> f64 {
        self.inner.spacing
    }

    /// Total number of lattice points, `N^n`.
    pub fn len(&self) -> usize {
        self.inner.points.pow(self.inner.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h^n`, the quadrature weight of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.inner.spacing.powi(self.inner.dim as i32)
    }

    /// Frequency lattice step `π / L`.
    pub fn frequency_step(&self) -> f64 {
        PI / self.inner.half_length
    }

    /// Largest resolved frequency magnitude along one axis, `π N / (2L)`.
    pub fn nyquist(&self) -> f64 {
        self.frequency_step() * (self.inner.points / 2) as f64
    }

    /// Positions `-L + k h` along one axis.
    pub fn axis_positions(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.inner.points)
            .map(|k| -self.inner.half_length + k as f64 * h)
            .collect()
    }

    /// Signed integer frequency index for FFT storage index `q`.
    pub fn frequency_index(&self, q: usize) -> i64 {
        let n = self.inner.points;
        if q < n / 2 {
            q as i64
        } else {
            q as i64 - n as i64
        }
    }

    /// Frequencies along one axis in FFT storage order.
    pub fn axis_frequencies(&self) -> Vec<f64> {
        let step = self.frequency_step();
        (0..self.inner.points)
            .map(|q| step * self.frequency_index(q) as f64)
            .collect()
    }

    /// Frequencies along one axis in increasing order, `j = -N/2 .. N/2-1`.
    pub fn sorted_axis_frequencies(&self) -> Vec<f64> {
        let step = self.frequency_step();
        let half = (self.inner.points / 2) as i64;
        (-half..half).map(|j| step * j as f64).collect()
    }

    /// Splits a flat row-major index into per-axis indices.
    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let n = self.inner.points;
        let mut idx = [0usize; 3];
        for axis in (0..self.inner.dim).rev() {
            idx[axis] = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        let n = self.inner.points;
        idx.iter()
            .take(self.inner.dim)
            .fold(0, |acc, &i| acc * n + i)
    }

    /// Physical coordinates of the lattice point with flat index `flat`.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for axis in 0..self.inner.dim {
            x[axis] = -self.inner.half_length + idx[axis] as f64 * h;
        }
        x
    }

    /// Frequency vector at storage index `flat`.
    pub fn frequency(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let step = self.frequency_step();
        let mut xi = [0.0; 3];
        for axis in 0..self.inner.dim {
            xi[axis] = step * self.frequency_index(idx[axis]) as f64;
        }
        xi
    }

    /// `x_axis` sampled over the whole lattice.
    pub fn coordinate(&self, axis: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.position(i)[axis]).collect()
    }

    /// `ξ_axis` over the whole frequency lattice (storage order).
    pub fn frequency_component(&self, axis: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.frequency(i)[axis]).collect()
    }

    /// `|x|²` over the whole lattice.
    pub fn radius_squared(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.position(i).iter().map(|c| c * c).sum())
            .collect()
    }

    /// `|ξ|²` over the frequency lattice in storage order, cached.
    pub fn xi_squared(&self) -> Arc<Vec<f64>> {
        self.inner
            .xi_sq
            .get_or_init(|| {
                Arc::new(
                    (0..self.len())
                        .map(|i| self.frequency(i).iter().map(|c| c * c).sum())
                        .collect(),
                )
            })
            .clone()
    }

    pub(crate) fn fft(&self) -> &FftNd {
        &self.inner.fft
    }

    /// `(-1)^{Σ q_axis}` phase that turns a raw DFT into the centred-box transform.
    fn parity(&self, flat: usize) -> f64 {
        let idx = self.unflatten(flat);
        let s: usize = idx.iter().take(self.inner.dim).sum();
        if s.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// Raw unnormalized forward DFT in place.
    pub(crate) fn raw_forward(&self, data: &mut [Complex64]) {
        self.inner.fft.forward(data);
    }

    /// Raw inverse DFT in place, including the `1/N^n` normalization.
    pub(crate) fn raw_inverse(&self, data: &mut [Complex64]) {
        self.inner.fft.inverse(data);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    /// `Σ w |F|² · h^n / N^n` for a raw DFT `F`: the squared weighted `L²`
    /// norm via Parseval.
    pub(crate) fn spectral_norm_sq(&self, raw: &[Complex64], weights: &[f64]) -> f64 {
        let sum: f64 = raw.iter().zip(weights).map(|(v, w)| w * v.norm_sqr()).sum();
        sum * self.cell_volume() / self.len() as f64
    }
}

/// A complex field sampled on a [`Grid`], in physical or frequency space.
#[derive(Clone, Debug)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
    space: Space,
}

impl ComplexField {
    pub fn new(grid: &Grid, values: Vec<Complex64>, space: Space) -> Result<Self, SpectralError> {
        if values.len() != grid.len() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(ComplexField {
            grid: grid.clone(),
            values,
            space,
        })
    }

    pub fn zeros(grid: &Grid) -> Self {
        ComplexField {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            space: Space::Physical,
        }
    }

    /// Samples `f(x)` at every lattice point (physical space). The slice
    /// passed to `f` has length `grid.dim()`.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.position(i);
                f(&x[..dim])
            })
            .collect();
        ComplexField {
            grid: grid.clone(),
            values,
            space: Space::Physical,
        }
    }

    /// Physical-space field from real samples.
    pub fn from_real(grid: &Grid, values: &[f64]) -> Result<Self, SpectralError> {
        Self::new(
            grid,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            Space::Physical,
        )
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub(crate) fn expect_space(&self, expected: Space) -> Result<(), SpectralError> {
        if self.space == expected {
            Ok(())
        } else {
            Err(SpectralError::SpaceMismatch {
                expected,
                found: self.space,
            })
        }
    }

    pub(crate) fn expect_grid(&self, grid: &Grid) -> Result<(), SpectralError> {
        if &self.grid == grid {
            Ok(())
        } else {
            Err(SpectralError::GridMismatch)
        }
    }

    /// `‖u‖²_{L²}`: grid quadrature in physical space, the `(2π)^{-n}`
    /// weighted sum in frequency space.
    pub fn l2_norm_sq(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        match self.space {
            Space::Physical => sum * self.grid.cell_volume(),
            Space::Frequency => sum / (2.0 * self.grid.half_length()).powi(self.grid.dim() as i32),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// `max |u|` over the lattice.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `⟨self, other⟩ = ∫ conj(self) · other dx` (physical space).
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64, SpectralError> {
        self.expect_grid(&other.grid)?;
        self.expect_space(Space::Physical)?;
        other.expect_space(Space::Physical)?;
        let sum: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(sum * self.grid.cell_volume())
    }

    pub fn scaled(&self, factor: Complex64) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
            space: self.space,
        }
    }

    /// Pointwise `|u|²`.
    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Forward transform into the continuum-normalized frequency space.
    pub fn transform(&self) -> Result<ComplexField, SpectralError> {
        self.expect_space(Space::Physical)?;
        let mut values = self.values.clone();
        self.grid.raw_forward(&mut values);
        let h_n = self.grid.cell_volume();
        for (i, v) in values.iter_mut().enumerate() {
            *v *= h_n * self.grid.parity(i);
        }
        Ok(ComplexField {
            grid: self.grid.clone(),
            values,
            space: Space::Frequency,
        })
    }

    pub fn inverse_transform(&self) -> Result<ComplexField, SpectralError> {
        self.expect_space(Space::Frequency)?;
        let mut values = self.values.clone();
        for (i, v) in values.iter_mut().enumerate() {
            *v *= self.grid.parity(i);
        }
        self.grid.fft().inverse(&mut values);
        let scale = 1.0 / (2.0 * self.grid.half_length()).powi(self.grid.dim() as i32);
        values.iter_mut().for_each(|v| *v *= scale);
        Ok(ComplexField {
            grid: self.grid.clone(),
            values,
            space: Space::Physical,
        })
    }

    /// Lebesgue norm `(∫|u|^p)^{1/p}` by grid quadrature; `p = ∞` is the grid max.
    pub fn lebesgue_norm(&self, p: f64) -> f64 {
        lebesgue_norm(&self.values, self.grid.cell_volume(), p)
    }
}

/// `(h^n Σ |v|^p)^{1/p}`, or `max |v|` for infinite `p`.
pub fn lebesgue_norm(values: &[Complex64], cell_volume: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    }
    let sum: f64 = values.iter().map(|v| v.norm().powf(p)).sum();
    (sum * cell_volume).powf(1.0 / p)
}

impl<'a> Add<&'a ComplexField> for &'a ComplexField {
    type Output = ComplexField;

    /// Panics when the operands live on different grids or spaces.
    fn add(self, rhs: &'a ComplexField) -> ComplexField {
        assert!(
            self.grid == rhs.grid && self.space == rhs.space,
            "field mismatch"
        );
        ComplexField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| a + b)
                .collect(),
            space: self.space,
        }
    }
}

impl<'a> Sub<&'a ComplexField> for &'a ComplexField {
    type Output = ComplexField;

    /// Panics when the operands live on different grids or spaces.
    fn sub(self, rhs: &'a ComplexField) -> ComplexField {
        assert!(
            self.grid == rhs.grid && self.space == rhs.space,
            "field mismatch"
        );
        ComplexField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| a - b)
                .collect(),
            space: self.space,
        }
    }
}

impl Mul<Complex64> for &ComplexField {
    type Output = ComplexField;

    fn mul(self, rhs: Complex64) -> ComplexField {
        self.scaled(rhs)
    }
}

impl Mul<f64> for &ComplexField {
    type Output = ComplexField;

    fn mul(self, rhs: f64) -> ComplexField {
        self.scaled(Complex64::new(rhs, 0.0))
    }
}

/// Which fractional operator a [`DispersionSymbol`] represents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymbolKind {
    /// `(m² + |ξ|²)^{s/2}`.
    Relativistic { mass: f64, exponent: f64 },
    /// `|ξ|^s`, with the zero mode set to 0 for `s ≠ 0`.
    Homogeneous { exponent: f64 },
    /// `(m² + |ξ|²)^{α/2} - m^α`.
    ShiftedRelativistic { mass: f64, exponent: f64 },
    /// `α / (2 m^{2-α}) |ξ|²`, the large-mass expansion of the shifted symbol.
    Nonrelativistic { mass: f64, exponent: f64 },
}

impl SymbolKind {
    fn validate(&self) -> Result<(), SpectralError> {
        let (mass, exponent) = match *self {
            SymbolKind::Relativistic { mass, exponent }
            | SymbolKind::ShiftedRelativistic { mass, exponent }
            | SymbolKind::Nonrelativistic { mass, exponent } => (mass, exponent),
            SymbolKind::Homogeneous { exponent } => (0.0, exponent),
        };
        if !(mass.is_finite() && mass >= 0.0) {
            return Err(SpectralError::InvalidSymbol(format!(
                "mass must be >= 0, got {mass}"
            )));
        }
        if !exponent.is_finite() {
            return Err(SpectralError::InvalidSymbol(format!(
                "exponent must be finite, got {exponent}"
            )));
        }
        if let SymbolKind::Nonrelativistic { mass, .. } = *self {
            if mass <= 0.0 {
                return Err(SpectralError::InvalidSymbol(
                    "nonrelativistic symbol needs a positive mass".into(),
                ));
            }
        }
        Ok(())
    }

    /// Symbol value at a frequency with squared magnitude `xi_sq`.
    pub fn eval(&self, xi_sq: f64) -> f64 {
        match *self {
            SymbolKind::Relativistic { mass, exponent } => {
                let base = mass * mass + xi_sq;
                if base == 0.0 {
                    zero_mode(exponent)
                } else {
                    base.powf(0.5 * exponent)
                }
            }
            SymbolKind::Homogeneous { exponent } => {
                if xi_sq == 0.0 {
                    zero_mode(exponent)
                } else {
                    xi_sq.powf(0.5 * exponent)
                }
            }
            SymbolKind::ShiftedRelativistic { mass, exponent } => {
                if mass == 0.0 {
                    if xi_sq == 0.0 {
                        0.0
                    } else {
                        xi_sq.powf(0.5 * exponent)
                    }
                } else {
                    // m^α ((1 + |ξ|²/m²)^{α/2} - 1) without cancellation.
                    let ratio = xi_sq / (mass * mass);
                    mass.powf(exponent) * (0.5 * exponent * ratio.ln_1p()).exp_m1()
                }
            }
            SymbolKind::Nonrelativistic { mass, exponent } => {
                exponent / (2.0 * mass.powf(2.0 - exponent)) * xi_sq
            }
        }
    }

    /// The `(m, α)` pair the symbol was built from (`m = 0` for homogeneous).
    pub fn mass_and_exponent(&self) -> (f64, f64) {
        match *self {
            SymbolKind::Relativistic { mass, exponent }
            | SymbolKind::ShiftedRelativistic { mass, exponent }
            | SymbolKind::Nonrelativistic { mass, exponent } => (mass, exponent),
            SymbolKind::Homogeneous { exponent } => (0.0, exponent),
        }
    }
}

fn zero_mode(exponent: f64) -> f64 {
    if exponent == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// A real Fourier multiplier cached over a grid's frequency lattice.
#[derive(Clone, Debug)]
pub struct DispersionSymbol {
    grid: Grid,
    kind: SymbolKind,
    multiplier: Arc<Vec<f64>>,
}

impl DispersionSymbol {
    pub fn new(grid: &Grid, kind: SymbolKind) -> Result<Self, SpectralError> {
        kind.validate()?;
        let multiplier = grid.xi_squared().iter().map(|&k2| kind.eval(k2)).collect();
        Ok(DispersionSymbol {
            grid: grid.clone(),
            kind,
            multiplier: Arc::new(multiplier),
        })
    }

    pub fn relativistic(grid: &Grid, mass: f64, exponent: f64) -> Result<Self, SpectralError> {
        Self::new(grid, SymbolKind::Relativistic { mass, exponent })
    }

    pub fn homogeneous(grid: &Grid, exponent: f64) -> Result<Self, SpectralError> {
        Self::new(grid, SymbolKind::Homogeneous { exponent })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    /// Multiplier values in frequency storage order.
    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }
}

/// `F^{-1}(σ · F u)`. Frequency-space input skips the forward transform.
pub fn apply_symbol(
    field: &ComplexField,
    symbol: &DispersionSymbol,
) -> Result<ComplexField, SpectralError> {
    field.expect_grid(&symbol.grid)?;
    let grid = field.grid();
    match field.space() {
        Space::Physical => {
            let mut values = field.values.clone();
            grid.raw_forward(&mut values);
            for (v, s) in values.iter_mut().zip(symbol.multiplier.iter()) {
                *v *= *s;
            }
            grid.raw_inverse(&mut values);
            ComplexField::new(grid, values, Space::Physical)
        }
        Space::Frequency => {
            let scaled = ComplexField {
                grid: grid.clone(),
                values: field
                    .values
                    .iter()
                    .zip(symbol.multiplier.iter())
                    .map(|(v, s)| v * *s)
                    .collect(),
                space: Space::Frequency,
            };
            scaled.inverse_transform()
        }
    }
}

/// Sobolev norm flavours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SobolevVariant {
    /// Weight `|ξ|^{2s}`; the zero mode is dropped for `s ≠ 0`.
    Homogeneous,
    /// Weight `(1 + |ξ|²)^s`.
    Inhomogeneous,
    /// Weight `(m² + |ξ|²)^s`.
    Massive(f64),
}

impl SobolevVariant {
    pub(crate) fn weight_kind(&self, s: f64) -> SymbolKind {
        match *self {
            SobolevVariant::Homogeneous => SymbolKind::Homogeneous { exponent: 2.0 * s },
            SobolevVariant::Inhomogeneous => SymbolKind::Relativistic {
                mass: 1.0,
                exponent: 2.0 * s,
            },
            SobolevVariant::Massive(m) => SymbolKind::Relativistic {
                mass: m,
                exponent: 2.0 * s,
            },
        }
    }

    /// Squared-norm weights over the frequency lattice of `grid`.
    pub fn weights(&self, grid: &Grid, s: f64) -> Vec<f64> {
        let kind = self.weight_kind(s);
        grid.xi_squared().iter().map(|&k2| kind.eval(k2)).collect()
    }
}

pub fn sobolev_norm(
    field: &ComplexField,
    s: f64,
    variant: SobolevVariant,
) -> Result<f64, SpectralError> {
    let grid = field.grid();
    let weights = variant.weights(grid, s);
    Ok(weighted_norm(field, &weights).sqrt())
}

/// `(2π)^{-n} ∫ w(ξ)|û(ξ)|² dξ` over the lattice for a field in either space.
pub(crate) fn weighted_norm(field: &ComplexField, weights: &[f64]) -> f64 {
    let grid = field.grid();
    match field.space() {
        Space::Physical => {
            let mut values = field.values.clone();
            grid.raw_forward(&mut values);
            grid.spectral_norm_sq(&values, weights)
        }
        Space::Frequency => {
            let sum: f64 = field
                .values
                .iter()
                .zip(weights)
                .map(|(v, w)| w * v.norm_sqr())
                .sum();
            sum / (2.0 * grid.half_length()).powi(grid.dim() as i32)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_examples() {
        let g = build_grid(1, 8, PI).unwrap();
        assert_relative_eq!(g.spacing(), PI / 4.0, max_relative = 1e-14);
        let freqs: Vec<f64> = g.sorted_axis_frequencies();
        let expected: Vec<f64> = (-4..4).map(|j| j as f64).collect();
        for (a, b) in freqs.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }

        let g = build_grid(2, 16, 10.0).unwrap();
        assert_eq!(g.len(), 256);
        assert_relative_eq!(g.spacing(), 1.25, max_relative = 1e-14);

        let g = build_grid(3, 32, 8.0).unwrap();
        assert_relative_eq!(g.frequency_step(), PI / 8.0, max_relative = 1e-14);
        assert_relative_eq!(
            g.cell_volume() * g.len() as f64,
            16f64.powi(3),
            max_relative = 1e-13
        );
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(build_grid(1, 7, 1.0).is_err());
        assert!(build_grid(1, 6, 1.0).is_err());
        assert!(build_grid(1, 8, 0.0).is_err());
        assert!(build_grid(1, 8, -1.0).is_err());
        assert!(build_grid(0, 8, 1.0).is_err());
        assert!(build_grid(4, 8, 1.0).is_err());
    }

    #[test]
    fn frequency_lattice_is_symmetric_except_nyquist() {
        let g = build_grid(1, 16, 3.0).unwrap();
        let f = g.sorted_axis_frequencies();
        for j in 1..8 {
            assert!((f[8 + j] + f[8 - j]).abs() < 1e-13);
        }
        assert!((f[0] + g.nyquist()).abs() < 1e-13);
    }

    #[test]
    fn constant_transforms_to_single_bin() {
        let g = build_grid(2, 8, 3.0).unwrap();
        let u = ComplexField::from_fn(&g, |_| Complex64::new(1.0, 0.0));
        let uh = u.transform().unwrap();
        assert_relative_eq!(uh.values()[0].re, 36.0, max_relative = 1e-13);
        for v in &uh.values()[1..] {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn plane_wave_transforms_to_its_frequency() {
        let g = build_grid(1, 16, 2.0).unwrap();
        let k = 3.0 * g.frequency_step();
        let u = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, k * x[0]));
        let uh = u.transform().unwrap();
        for (i, v) in uh.values().iter().enumerate() {
            if g.frequency_index(i) == 3 {
                assert_relative_eq!(v.re, 4.0, max_relative = 1e-12);
                assert!(v.im.abs() < 1e-12);
            } else {
                assert!(v.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn transforms_require_matching_space() {
        let g = build_grid(1, 8, 1.0).unwrap();
        let u = ComplexField::zeros(&g);
        assert!(u.inverse_transform().is_err());
        assert!(u.transform().unwrap().transform().is_err());
    }

    #[test]
    fn constant_under_massive_symbol() {
        let g = build_grid(1, 16, 4.0).unwrap();
        let alpha = 1.3;
        let sym = DispersionSymbol::relativistic(&g, 2.0, alpha).unwrap();
        let u = ComplexField::from_fn(&g, |_| Complex64::new(0.5, 0.25));
        let v = apply_symbol(&u, &sym).unwrap();
        let factor = 2f64.powf(alpha);
        for (a, b) in v.values().iter().zip(u.values()) {
            assert!((a - b * factor).norm() < 1e-12);
        }
    }

    #[test]
    fn symbol_kinds_evaluate_as_documented() {
        let shifted = SymbolKind::ShiftedRelativistic {
            mass: 3.0,
            exponent: 1.5,
        };
        let rel = SymbolKind::Relativistic {
            mass: 3.0,
            exponent: 1.5,
        };
        assert_eq!(shifted.eval(0.0), 0.0);
        assert_relative_eq!(
            shifted.eval(2.0),
            rel.eval(2.0) - 3f64.powf(1.5),
            max_relative = 1e-12
        );
        let nr = SymbolKind::Nonrelativistic {
            mass: 2.0,
            exponent: 1.5,
        };
        assert_relative_eq!(
            nr.eval(4.0),
            1.5 / (2.0 * 2f64.powf(0.5)) * 4.0,
            max_relative = 1e-14
        );
        let neg = SymbolKind::Homogeneous { exponent: -0.5 };
        assert_eq!(neg.eval(0.0), 0.0);
        assert_eq!(SymbolKind::Homogeneous { exponent: 0.0 }.eval(0.0), 1.0);
        assert!(DispersionSymbol::new(
            &build_grid(1, 8, 1.0).unwrap(),
            SymbolKind::Nonrelativistic {
                mass: 0.0,
                exponent: 1.5
            }
        )
        .is_err());
    }

    #[test]
    fn sobolev_zero_index_is_l2() {
        let g = build_grid(2, 16, 5.0).unwrap();
        let u = ComplexField::from_fn(&g, |x| {
            Complex64::new((-(x[0] * x[0] + x[1] * x[1]) / 3.0).exp(), 0.2 * x[0])
        });
        let l2 = u.l2_norm();
        for variant in [
            SobolevVariant::Homogeneous,
            SobolevVariant::Inhomogeneous,
            SobolevVariant::Massive(2.5),
        ] {
            let s = sobolev_norm(&u, 0.0, variant).unwrap();
            assert_relative_eq!(s, l2, max_relative = 1e-12);
        }
    }

    #[test]
    fn sobolev_plane_wave() {
        let g = build_grid(2, 16, 3.0).unwrap();
        let step = g.frequency_step();
        let (k0, k1) = (2.0 * step, -step);
        let a = 0.7;
        let u = ComplexField::from_fn(&g, |x| Complex64::from_polar(a, k0 * x[0] + k1 * x[1]));
        let s = 0.8;
        let kn: f64 = (k0 * k0 + k1 * k1).sqrt();
        let expected = a * 6.0 * kn.powf(s);
        let got = sobolev_norm(&u, s, SobolevVariant::Homogeneous).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-12);
    }
}
