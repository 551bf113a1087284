//! Numerical probes of the functional inequalities used in the local theory
//! and in the blowup argument. Both sides are evaluated on seeded families
//! of test functions and the worst ratio LHS/RHS is tracked, together with
//! its drift when the same functions are sampled at twice the resolution.
//!
//! Every test function is an analytic profile (Gaussian packets, optionally
//! multiplied by a band-limited trigonometric polynomial), so the refined,
//! translated and dilated versions are exactly the same function sampled on
//! a different lattice.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hartree::{build_kernel, Coupling, HartreeError, HartreeKernel, PotentialSpec};
use crate::parallel::parallel_map;
use crate::quadrature::{gauss_legendre_on, singular_cell_average};
use crate::spectral::{
    apply_symbol, sobolev_norm, ComplexField, DispersionSymbol, Grid, GridSpec, SobolevVariant,
    Space, SpectralError,
};

#[derive(Debug, Error)]
pub enum InequalityError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("the right-hand side vanishes")]
    ZeroInput,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Hartree(#[from] HartreeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityId {
    Hardy,
    KgammaBound,
    SteinWeiss,
    Leibniz,
    WeightedConvolution,
    Commutator,
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            InequalityId::Hardy => "hardy",
            InequalityId::KgammaBound => "kgamma_bound",
            InequalityId::SteinWeiss => "stein_weiss",
            InequalityId::Leibniz => "leibniz",
            InequalityId::WeightedConvolution => "weighted_convolution",
            InequalityId::Commutator => "commutator",
        };
        f.write_str(name)
    }
}

/// Worst ratio at one mass in a commutator sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub m: f64,
    pub worst_ratio: f64,
    pub worst_case_seed: u64,
}

/// Outcome of one checker over one family. Lebesgue exponents that may be
/// infinite are recorded in `params` as reciprocals (`inv_p` and so on).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub inequality_id: InequalityId,
    pub params: BTreeMap<String, f64>,
    pub samples: usize,
    pub worst_ratio: f64,
    pub worst_case_seed: u64,
    pub grid_spec: GridSpec,
    /// Worst ratio over the family at `2N` divided by `worst_ratio`.
    pub refinement_ratio: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m_sweep: Vec<SweepPoint>,
}

impl RatioReport {
    /// Largest over smallest worst ratio across an `m` sweep.
    pub fn m_spread(&self) -> Option<f64> {
        if self.m_sweep.is_empty() {
            return None;
        }
        let max = self
            .m_sweep
            .iter()
            .map(|p| p.worst_ratio)
            .fold(f64::MIN, f64::max);
        let min = self
            .m_sweep
            .iter()
            .map(|p| p.worst_ratio)
            .fold(f64::MAX, f64::min);
        Some(max / min)
    }

    pub fn is_healthy(&self) -> bool {
        self.worst_ratio.is_finite() && self.worst_ratio > 0.0 && self.refinement_ratio.is_finite()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sample `index` in a family seeded with `family_seed`.
pub fn sample_seed(family_seed: u64, index: usize) -> u64 {
    splitmix64(family_seed ^ splitmix64(index as u64 + 1))
}

const COMPANION_SALT: u64 = 0x5bd1_e995_c0ff_ee00;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// Band-limited Gaussian random field (cutoff `N/4` per axis) under a
    /// Gaussian envelope.
    RandomField,
    OffCenterBump,
    Chirp,
    TwoBump,
    /// Sum of centred chirped Gaussians with random complex amplitudes.
    RadialMixture,
}

const GENERAL_KINDS: [ProfileKind; 4] = [
    ProfileKind::RandomField,
    ProfileKind::OffCenterBump,
    ProfileKind::Chirp,
    ProfileKind::TwoBump,
];

/// `a · exp(−|x−c|²/(2w²) + i b |x−c|²)`.
#[derive(Debug, Clone, PartialEq)]
struct Packet {
    center: [f64; 3],
    width: f64,
    amplitude: Complex64,
    chirp: f64,
}

impl Packet {
    fn value(&self, x: &[f64]) -> Complex64 {
        let r2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum();
        self.amplitude
            * Complex64::new(-r2 / (2.0 * self.width * self.width), self.chirp * r2).exp()
    }
}

/// `Σ_k c_k exp(i s k·(x − x₀))` over `|k|_∞ ≤ kmax`, coefficients row-major.
#[derive(Debug, Clone, PartialEq)]
struct TrigPolynomial {
    kmax: usize,
    step: f64,
    shift: [f64; 3],
    coeffs: Vec<Complex64>,
}

impl TrigPolynomial {
    /// Values on the tensor product of the per-axis coordinate lists.
    fn on_tensor(&self, axes: &[Vec<f64>]) -> Vec<Complex64> {
        let k = 2 * self.kmax + 1;
        let mut data = self.coeffs.clone();
        let mut shape = vec![k; axes.len()];
        for (axis, xs) in axes.iter().enumerate() {
            let matrix: Vec<Complex64> = xs
                .iter()
                .flat_map(|&x| {
                    (0..k).map(move |a| {
                        let wave = self.step * (a as f64 - self.kmax as f64);
                        Complex64::from_polar(1.0, wave * (x - self.shift[axis]))
                    })
                })
                .collect();
            data = contract_axis(&data, &shape, axis, &matrix, xs.len());
            shape[axis] = xs.len();
        }
        data
    }
}

/// Applies `matrix` (`rows × shape[axis]`, row-major) along `axis`.
fn contract_axis(
    data: &[Complex64],
    shape: &[usize],
    axis: usize,
    matrix: &[Complex64],
    rows: usize,
) -> Vec<Complex64> {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let cols = shape[axis];
    let mut out = vec![Complex64::new(0.0, 0.0); outer * rows * inner];
    for o in 0..outer {
        for r in 0..rows {
            let row = &matrix[r * cols..(r + 1) * cols];
            let dst = &mut out[(o * rows + r) * inner..(o * rows + r + 1) * inner];
            for (c, m) in row.iter().enumerate() {
                let src = &data[(o * cols + c) * inner..(o * cols + c + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += m * s;
                }
            }
        }
    }
    out
}

/// An analytic test function: the packet sum, times the trigonometric
/// factor when present.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    kind: ProfileKind,
    seed: u64,
    dim: usize,
    packets: Vec<Packet>,
    field: Option<TrigPolynomial>,
}

fn random_center(rng: &mut ChaCha8Rng, dim: usize, reach: f64) -> [f64; 3] {
    let mut c = [0.0; 3];
    for v in c.iter_mut().take(dim) {
        *v = if reach > 0.0 {
            rng.random_range(-reach..reach)
        } else {
            0.0
        };
    }
    c
}

fn random_phase(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))
}

impl Profile {
    /// Draws a profile of `kind` for the box of `grid`. Packets keep eight
    /// widths between their centre and the box faces, and at least three
    /// lattice spacings of width.
    pub fn generate(kind: ProfileKind, seed: u64, grid: &GridSpec) -> Profile {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = grid.dim;
        let l = grid.half_length;
        let h = grid.spacing();
        let wmin = 3.0 * h;
        let width_in = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
            let lo = lo.max(wmin);
            let hi = hi.max(lo * 1.0001);
            rng.random_range(lo..hi)
        };
        // Highest wavenumber carried by the family on the base lattice.
        let k_cut = (grid.points / 4) as f64 * PI / l;
        let mut field = None;
        let packets = match kind {
            ProfileKind::RandomField => {
                let kmax = grid.points / 4;
                let count = (2 * kmax + 1).pow(dim as u32);
                let norm = (count as f64).sqrt();
                let coeffs = (0..count)
                    .map(|_| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(re, im) / norm
                    })
                    .collect();
                field = Some(TrigPolynomial {
                    kmax,
                    step: PI / l,
                    shift: [0.0; 3],
                    coeffs,
                });
                let w = width_in(&mut rng, l / 16.0, l / 12.0);
                vec![Packet {
                    center: random_center(&mut rng, dim, (l - 8.0 * w).min(l / 4.0)),
                    width: w,
                    amplitude: Complex64::new(1.0, 0.0),
                    chirp: 0.0,
                }]
            }
            ProfileKind::OffCenterBump => {
                let w = width_in(&mut rng, wmin, l / 12.0);
                vec![Packet {
                    center: random_center(&mut rng, dim, (l - 8.0 * w).min(l / 2.0)),
                    width: w,
                    amplitude: random_phase(&mut rng),
                    chirp: 0.0,
                }]
            }
            ProfileKind::Chirp => {
                let w = width_in(&mut rng, l / 16.0, l / 10.0);
                // Local wavenumber 2b|x−c| stays below the cutoff out to 3w.
                let b_max = k_cut / (6.0 * w);
                vec![Packet {
                    center: random_center(&mut rng, dim, (l - 8.0 * w).min(l / 8.0)),
                    width: w,
                    amplitude: random_phase(&mut rng),
                    chirp: rng.random_range(0.3..1.0) * b_max,
                }]
            }
            ProfileKind::TwoBump => {
                let w = width_in(&mut rng, wmin, l / 16.0);
                let d_max = (2.0 * (l - 8.0 * w)).min(l).max(3.0 * w * 1.0001);
                let d = rng.random_range(3.0 * w..d_max);
                let mut dir = [0.0; 3];
                loop {
                    for v in dir.iter_mut().take(dim) {
                        *v = rng.sample(StandardNormal);
                    }
                    let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if len > 1e-3 {
                        dir.iter_mut().for_each(|v| *v /= len);
                        break;
                    }
                }
                let second = random_phase(&mut rng) * rng.random_range(0.5..1.0);
                [1.0, -1.0]
                    .iter()
                    .zip([Complex64::new(1.0, 0.0), second])
                    .map(|(sign, amplitude)| {
                        let mut center = [0.0; 3];
                        for a in 0..dim {
                            center[a] = sign * 0.5 * d * dir[a];
                        }
                        Packet {
                            center,
                            width: w,
                            amplitude,
                            chirp: 0.0,
                        }
                    })
                    .collect()
            }
            ProfileKind::RadialMixture => {
                let terms = rng.random_range(1..=3);
                (0..terms)
                    .map(|_| {
                        let w = width_in(&mut rng, l / 12.0, l / 5.0);
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Packet {
                            center: [0.0; 3],
                            width: w,
                            amplitude: Complex64::new(re, im),
                            chirp: rng.random_range(-1.0..1.0) * k_cut / (6.0 * w),
                        }
                    })
                    .collect()
            }
        };
        Profile {
            kind,
            seed,
            dim,
            packets,
            field,
        }
    }

    /// A single centred Gaussian `exp(−|x|²/(2w²))`.
    pub fn gaussian(dim: usize, width: f64) -> Profile {
        Profile {
            kind: ProfileKind::RadialMixture,
            seed: 0,
            dim,
            packets: vec![Packet {
                center: [0.0; 3],
                width,
                amplitude: Complex64::new(1.0, 0.0),
                chirp: 0.0,
            }],
            field: None,
        }
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn packet_sum(&self, x: &[f64]) -> Complex64 {
        self.packets.iter().map(|p| p.value(x)).sum()
    }

    pub fn value_at(&self, x: &[f64]) -> Complex64 {
        let base = self.packet_sum(x);
        match &self.field {
            None => base,
            Some(poly) => {
                let axes: Vec<Vec<f64>> = x.iter().take(self.dim).map(|&c| vec![c]).collect();
                base * poly.on_tensor(&axes)[0]
            }
        }
    }

    /// Samples the profile on `grid`.
    pub fn sample(&self, grid: &Grid) -> ComplexField {
        assert_eq!(grid.dim(), self.dim, "profile and grid dimensions differ");
        let mut u = ComplexField::from_fn(grid, |x| self.packet_sum(x));
        if let Some(poly) = &self.field {
            let axis = grid.axis_positions();
            let axes = vec![axis; self.dim];
            for (v, t) in u.values_mut().iter_mut().zip(poly.on_tensor(&axes)) {
                *v *= t;
            }
        }
        u
    }

    pub fn scaled(&self, factor: Complex64) -> Profile {
        let mut p = self.clone();
        p.packets.iter_mut().for_each(|q| q.amplitude *= factor);
        p
    }

    /// `x ↦ u(x − shift)`.
    pub fn translated(&self, shift: &[f64]) -> Profile {
        let mut p = self.clone();
        for q in p.packets.iter_mut() {
            for (c, s) in q.center.iter_mut().zip(shift) {
                *c += s;
            }
        }
        if let Some(poly) = p.field.as_mut() {
            for (c, s) in poly.shift.iter_mut().zip(shift) {
                *c += s;
            }
        }
        p
    }

    /// `x ↦ u(x/λ)`.
    pub fn dilated(&self, lambda: f64) -> Profile {
        let mut p = self.clone();
        for q in p.packets.iter_mut() {
            q.center.iter_mut().for_each(|c| *c *= lambda);
            q.width *= lambda;
            q.chirp /= lambda * lambda;
        }
        if let Some(poly) = p.field.as_mut() {
            poly.step /= lambda;
            poly.shift.iter_mut().for_each(|c| *c *= lambda);
        }
        p
    }
}

/// A seeded family of profiles on a base grid. Each profile has a companion
/// drawn from an independent seed, used by two-function inequalities.
#[derive(Debug, Clone)]
pub struct Family {
    grid: GridSpec,
    seed: u64,
    profiles: Vec<Profile>,
    companions: Vec<Profile>,
    workers: usize,
}

impl Family {
    /// Kinds cycle through random field, off-centre bump, chirp and two bumps.
    pub fn random(grid: GridSpec, samples: usize, seed: u64) -> Family {
        Self::build(grid, samples, seed, |i| {
            GENERAL_KINDS[i % GENERAL_KINDS.len()]
        })
    }

    /// Radially symmetric profiles only.
    pub fn radial(grid: GridSpec, samples: usize, seed: u64) -> Family {
        Self::build(grid, samples, seed, |_| ProfileKind::RadialMixture)
    }

    fn build(
        grid: GridSpec,
        samples: usize,
        seed: u64,
        kind: impl Fn(usize) -> ProfileKind,
    ) -> Family {
        let profiles = (0..samples)
            .map(|i| Profile::generate(kind(i), sample_seed(seed, i), &grid))
            .collect();
        let companions = (0..samples)
            .map(|i| Profile::generate(kind(i + 1), sample_seed(seed ^ COMPANION_SALT, i), &grid))
            .collect();
        Family {
            grid,
            seed,
            profiles,
            companions,
            workers: 1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Family {
        self.workers = workers.max(1);
        self
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    pub fn companions(&self) -> &[Profile] {
        &self.companions
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Applies `f` to every profile and companion and moves the family to
    /// `grid`.
    pub fn map(&self, grid: GridSpec, f: impl Fn(&Profile) -> Profile) -> Family {
        Family {
            grid,
            seed: self.seed,
            profiles: self.profiles.iter().map(&f).collect(),
            companions: self.companions.iter().map(&f).collect(),
            workers: self.workers,
        }
    }
}

type Evaluator<'a> = Box<dyn Fn(usize, &Grid) -> Result<Vec<f64>, InequalityError> + Sync + 'a>;

/// Worst value per channel and the index attaining it.
fn worst_per_channel(rows: &[Vec<f64>]) -> Vec<(f64, usize)> {
    let channels = rows.first().map_or(0, |r| r.len());
    (0..channels)
        .map(|c| {
            rows.iter().enumerate().map(|(i, r)| (r[c], i)).fold(
                (f64::NEG_INFINITY, 0),
                |acc, x| if x.0 > acc.0 { x } else { acc },
            )
        })
        .collect()
}

/// Runs a checker on the base and refined grids. `setup` builds the
/// per-sample evaluator for a grid; it returns one ratio per channel.
fn run_checker<'a>(
    family: &Family,
    id: InequalityId,
    params: BTreeMap<String, f64>,
    setup: impl Fn(&Grid) -> Result<Evaluator<'a>, InequalityError>,
) -> Result<(RatioReport, Vec<(f64, usize)>), InequalityError> {
    if family.is_empty() {
        return Err(InequalityError::InvalidParameters("empty family".into()));
    }
    let evaluate = |spec: GridSpec| -> Result<Vec<(f64, usize)>, InequalityError> {
        let grid = spec.build()?;
        let eval = setup(&grid)?;
        let rows = parallel_map(family.len(), family.workers, |i| eval(i, &grid));
        let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_, _>>()?;
        Ok(worst_per_channel(&rows))
    };
    let base = evaluate(family.grid)?;
    let fine = evaluate(family.grid.refined())?;
    let (worst, index) =
        base.iter()
            .copied()
            .fold((f64::NEG_INFINITY, 0), |a, x| if x.0 > a.0 { x } else { a });
    let fine_worst = fine.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
    let report = RatioReport {
        inequality_id: id,
        params,
        samples: family.len(),
        worst_ratio: worst,
        worst_case_seed: family.profiles[index].seed,
        grid_spec: family.grid,
        refinement_ratio: fine_worst / worst,
        m_sweep: Vec::new(),
    };
    Ok((report, base))
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn riesz(grid: &Grid, exponent: f64) -> Result<HartreeKernel, InequalityError> {
    Ok(build_kernel(
        grid,
        PotentialSpec::riesz(exponent, Coupling::Focusing),
    )?)
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<(), InequalityError> {
    if cond {
        Ok(())
    } else {
        Err(InequalityError::InvalidParameters(msg()))
    }
}

/// `sup_x (|·|^{−γ} * |u|²)(x) / ‖u‖²_{Ḣ^{γ/2}}` with `kernel` the Riesz
/// kernel of exponent `γ`.
pub fn hardy_ratio(u: &ComplexField, kernel: &HartreeKernel) -> Result<f64, InequalityError> {
    let lhs = kernel
        .convolve_density(&u.density())
        .into_iter()
        .fold(0.0, f64::max);
    let rhs = sobolev_norm(u, 0.5 * kernel.gamma(), SobolevVariant::Homogeneous)?.powi(2);
    if rhs == 0.0 {
        return Err(InequalityError::ZeroInput);
    }
    Ok(lhs / rhs)
}

pub fn check_hardy(family: &Family, gamma: f64) -> Result<RatioReport, InequalityError> {
    let n = family.grid.dim as f64;
    require(gamma > 0.0 && gamma < n, || {
        format!("need 0 < gamma < n, got {gamma}")
    })?;
    let (report, _) = run_checker(
        family,
        InequalityId::Hardy,
        params(&[("gamma", gamma)]),
        |grid| {
            let kernel = riesz(grid, gamma)?;
            Ok(Box::new(move |i, g| {
                Ok(vec![hardy_ratio(&family.profiles[i].sample(g), &kernel)?])
            }))
        },
    )?;
    Ok(report)
}

/// `‖K_γ(|u|²)‖_∞ / (‖u‖_{2n/(n−γ−ε)} ‖u‖_{2n/(n−γ+ε)})`.
pub fn kgamma_ratio(
    u: &ComplexField,
    kernel: &HartreeKernel,
    epsilon: f64,
) -> Result<f64, InequalityError> {
    let n = u.grid().dim() as f64;
    let gamma = kernel.gamma();
    let lhs = kernel
        .convolve_density(&u.density())
        .into_iter()
        .fold(0.0, f64::max);
    let p1 = 2.0 * n / (n - gamma - epsilon);
    let p2 = 2.0 * n / (n - gamma + epsilon);
    let rhs = u.lebesgue_norm(p1) * u.lebesgue_norm(p2);
    if rhs == 0.0 {
        return Err(InequalityError::ZeroInput);
    }
    Ok(lhs / rhs)
}

pub fn check_kgamma_bound(
    family: &Family,
    gamma: f64,
    epsilon: f64,
) -> Result<RatioReport, InequalityError> {
    let n = family.grid.dim as f64;
    require(gamma > 0.0 && gamma < n, || {
        format!("need 0 < gamma < n, got {gamma}")
    })?;
    require(epsilon > 0.0 && epsilon < n - gamma, || {
        format!("need 0 < epsilon < n - gamma, got {epsilon}")
    })?;
    let p = params(&[("gamma", gamma), ("epsilon", epsilon)]);
    let (report, _) = run_checker(family, InequalityId::KgammaBound, p, |grid| {
        let kernel = riesz(grid, gamma)?;
        Ok(Box::new(move |i, g| {
            Ok(vec![kgamma_ratio(
                &family.profiles[i].sample(g),
                &kernel,
                epsilon,
            )?])
        }))
    })?;
    Ok(report)
}

/// `‖ |x|^{−β} (|·|^{−λ} * f) ‖_{L^p} / ‖f‖_{L^p}` with `kernel` the Riesz
/// kernel of exponent `λ`. The weight is integrable at the origin since
/// `βp < n`; the origin cell uses the cell average of `|x|^{−βp}`.
pub fn stein_weiss_ratio(
    f: &ComplexField,
    kernel: &HartreeKernel,
    beta: f64,
    p: f64,
) -> Result<f64, InequalityError> {
    let grid = f.grid();
    let rhs = f.lebesgue_norm(p);
    if rhs == 0.0 {
        return Err(InequalityError::ZeroInput);
    }
    let conv = kernel.convolve(f.values());
    let origin = singular_cell_average(grid.dim(), grid.spacing(), beta * p, &|_| 1.0);
    let r2 = grid.radius_squared();
    let sum: f64 = conv
        .iter()
        .zip(r2.iter())
        .map(|(v, &r2)| {
            let w = if r2 == 0.0 {
                origin
            } else {
                r2.powf(-0.5 * beta * p)
            };
            w * v.norm().powf(p)
        })
        .sum();
    Ok((sum * grid.cell_volume()).powf(1.0 / p) / rhs)
}

pub fn check_stein_weiss(
    family: &Family,
    beta: f64,
    lambda: f64,
    p: f64,
) -> Result<RatioReport, InequalityError> {
    let n = family.grid.dim as f64;
    require(p > 1.0 && p.is_finite(), || {
        format!("need 1 < p < inf, got {p}")
    })?;
    require(lambda > 0.0 && lambda < n, || {
        format!("need 0 < lambda < n, got {lambda}")
    })?;
    require(beta < n / p, || {
        format!("need beta < n/p, got beta = {beta}")
    })?;
    require((lambda + beta - n).abs() < 1e-12, || {
        format!("need n = lambda + beta, got {lambda} + {beta}")
    })?;
    let pr = params(&[("beta", beta), ("lambda", lambda), ("p", p)]);
    let (report, _) = run_checker(family, InequalityId::SteinWeiss, pr, |grid| {
        let kernel = riesz(grid, lambda)?;
        Ok(Box::new(move |i, g| {
            Ok(vec![stein_weiss_ratio(
                &family.profiles[i].sample(g),
                &kernel,
                beta,
                p,
            )?])
        }))
    })?;
    Ok(report)
}

/// Hölder split for the Leibniz rule: `1/r = 1/r₁ + 1/q₂ = 1/q₁ + 1/r₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeibnizSplit {
    pub r1: f64,
    pub q2: f64,
    pub q1: f64,
    pub r2: f64,
}

impl LeibnizSplit {
    /// Checks the exponent ranges and returns `r`.
    pub fn validate(&self) -> Result<f64, InequalityError> {
        let open = |x: f64| x > 1.0 && x.is_finite();
        let half_open = |x: f64| x > 1.0;
        require(open(self.r1) && open(self.r2), || {
            format!(
                "r1, r2 must lie in (1, inf), got {} and {}",
                self.r1, self.r2
            )
        })?;
        require(half_open(self.q1) && half_open(self.q2), || {
            format!(
                "q1, q2 must lie in (1, inf], got {} and {}",
                self.q1, self.q2
            )
        })?;
        let a = 1.0 / self.r1 + 1.0 / self.q2;
        let b = 1.0 / self.q1 + 1.0 / self.r2;
        require((a - b).abs() < 1e-12, || {
            format!("1/r1 + 1/q2 = {a} differs from 1/q1 + 1/r2 = {b}")
        })?;
        require(a < 1.0, || format!("r = {} must exceed 1", 1.0 / a))?;
        Ok(1.0 / a)
    }
}

/// `‖|∇|^s(uv)‖_r / (‖|∇|^s u‖_{r₁}‖v‖_{q₂} + ‖u‖_{q₁}‖|∇|^s v‖_{r₂})`.
pub fn leibniz_ratio(
    u: &ComplexField,
    v: &ComplexField,
    s: f64,
    split: &LeibnizSplit,
) -> Result<f64, InequalityError> {
    let r = split.validate()?;
    let grid = u.grid();
    let d = DispersionSymbol::homogeneous(grid, s)?;
    let uv: Vec<Complex64> = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| a * b)
        .collect();
    let uv = ComplexField::new(grid, uv, Space::Physical)?;
    let lhs = apply_symbol(&uv, &d)?.lebesgue_norm(r);
    let du = apply_symbol(u, &d)?;
    let dv = apply_symbol(v, &d)?;
    let rhs = du.lebesgue_norm(split.r1) * v.lebesgue_norm(split.q2)
        + u.lebesgue_norm(split.q1) * dv.lebesgue_norm(split.r2);
    if rhs == 0.0 {
        return Err(InequalityError::ZeroInput);
    }
    Ok(lhs / rhs)
}

pub fn check_leibniz(
    family: &Family,
    s: f64,
    split: LeibnizSplit,
) -> Result<RatioReport, InequalityError> {
    require(s >= 0.0, || format!("need s >= 0, got {s}"))?;
    split.validate()?;
    let pr = params(&[
        ("s", s),
        ("inv_r1", 1.0 / split.r1),
        ("inv_q2", 1.0 / split.q2),
        ("inv_q1", 1.0 / split.q1),
        ("inv_r2", 1.0 / split.r2),
    ]);
    let (report, _) = run_checker(family, InequalityId::Leibniz, pr, |_| {
        Ok(Box::new(move |i, g| {
            let u = family.profiles[i].sample(g);
            let v = family.companions[i].sample(g);
            Ok(vec![leibniz_ratio(&u, &v, s, &split)?])
        }))
    })?;
    Ok(report)
}

/// Parameters of the weighted convolution estimate. The Lorentz norm
/// `L^{q,1}` on the sphere is replaced by `L^q`; the two are comparable on
/// smooth samples, which is all this probe needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedConvolution {
    pub p: f64,
    pub q: f64,
    pub d1: f64,
    pub d2: f64,
}

impl WeightedConvolution {
    pub fn validate(&self, dim: usize) -> Result<(), InequalityError> {
        let n = dim as f64;
        require(dim == 2 || dim == 3, || {
            format!("needs n = 2 or 3, got {dim}")
        })?;
        require(self.p >= 1.0 && self.q >= 1.0, || {
            format!("need p, q >= 1, got {} and {}", self.p, self.q)
        })?;
        let p_dual_inv = 1.0 - 1.0 / self.p;
        let top = (n - 1.0) * p_dual_inv;
        let ordered = if self.p.is_infinite() {
            self.d1 <= self.d2
        } else {
            self.d1 < self.d2
        };
        require(self.d1 >= 0.0 && ordered && self.d2 < top, || {
            format!(
                "need 0 <= d1 < d2 < (n-1)/p' = {top}, got d1 = {}, d2 = {}",
                self.d1, self.d2
            )
        })?;
        require(1.0 / self.q <= 1.0 - self.d2 / (n - 1.0) + 1e-15, || {
            format!("need 1/q <= 1 - d2/(n-1), got q = {}", self.q)
        })?;
        Ok(())
    }

    /// Exponent of the convolution kernel, `n/p + d₂`.
    pub fn kernel_exponent(&self, dim: usize) -> f64 {
        dim as f64 / self.p + self.d2
    }
}

/// `‖ |x|^{d₁} (|·|^{−n/p−d₂} * f) ‖_{L^p}` on the grid (`p = ∞`: grid max).
pub fn weighted_convolution_lhs(
    f: &ComplexField,
    kernel: &HartreeKernel,
    params: &WeightedConvolution,
) -> f64 {
    let grid = f.grid();
    let conv = kernel.convolve(f.values());
    let weighted: Vec<Complex64> = conv
        .iter()
        .zip(grid.radius_squared().iter())
        .map(|(v, &r2)| v * r2.powf(0.5 * params.d1))
        .collect();
    crate::spectral::lebesgue_norm(&weighted, grid.cell_volume(), params.p)
}

/// Quadrature rule on the unit sphere `S^{n−1}` (`n = 2, 3`): equispaced
/// angles on the circle; Gauss–Legendre in `cos θ` times equispaced `φ` on
/// the 2-sphere. Weights sum to the sphere area.
pub fn sphere_rule(dim: usize, order: usize) -> (Vec<[f64; 3]>, Vec<f64>) {
    match dim {
        2 => {
            let m = 2 * order;
            let w = 2.0 * PI / m as f64;
            let nodes = (0..m)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / m as f64;
                    [t.cos(), t.sin(), 0.0]
                })
                .collect();
            (nodes, vec![w; m])
        }
        3 => {
            let (z, wz) = gauss_legendre_on(order, -1.0, 1.0);
            let m = 2 * order;
            let dphi = 2.0 * PI / m as f64;
            let mut nodes = Vec::with_capacity(order * m);
            let mut weights = Vec::with_capacity(order * m);
            for (zi, wi) in z.iter().zip(&wz) {
                let s = (1.0 - zi * zi).sqrt();
                for k in 0..m {
                    let phi = dphi * k as f64;
                    nodes.push([s * phi.cos(), s * phi.sin(), *zi]);
                    weights.push(wi * dphi);
                }
            }
            (nodes, weights)
        }
        _ => panic!("sphere rule for n = {dim} not available"),
    }
}

/// `∫₀^R r^{n−1} ‖ |x|^{−(d₂−d₁)} f(r·) ‖_{L^q(S^{n−1})} dr` from the
/// analytic profile. Radial nodes follow `r = R t²`, which clusters them
/// at the origin where the weight is singular.
pub fn weighted_mixed_norm(
    profile: &Profile,
    params: &WeightedConvolution,
    radius: f64,
    angular_order: usize,
) -> f64 {
    let dim = profile.dim();
    let n = dim as f64;
    let (nodes, weights) = sphere_rule(dim, angular_order);
    let panels = 24;
    let mut total = 0.0;
    for panel in 0..panels {
        let a = panel as f64 / panels as f64;
        let b = (panel + 1) as f64 / panels as f64;
        let (ts, wts) = gauss_legendre_on(8, a, b);
        for (t, wt) in ts.iter().zip(&wts) {
            let r = radius * t * t;
            let dr = 2.0 * radius * t * wt;
            let sphere = if params.q.is_infinite() {
                nodes
                    .iter()
                    .map(|w| profile.value_at(&[r * w[0], r * w[1], r * w[2]]).norm())
                    .fold(0.0, f64::max)
            } else {
                nodes
                    .iter()
                    .zip(&weights)
                    .map(|(w, wq)| {
                        wq * profile
                            .value_at(&[r * w[0], r * w[1], r * w[2]])
                            .norm()
                            .powf(params.q)
                    })
                    .sum::<f64>()
                    .powf(1.0 / params.q)
            };
            total += dr * r.powf(n - 1.0 - (params.d2 - params.d1)) * sphere;
        }
    }
    total
}

pub fn check_weighted_convolution(
    family: &Family,
    params_in: WeightedConvolution,
    angular_order: usize,
) -> Result<RatioReport, InequalityError> {
    let dim = family.grid.dim;
    params_in.validate(dim)?;
    let radius = family.grid.half_length;
    // The right side is grid independent; compute it once per profile.
    let rhs: Vec<f64> = parallel_map(family.len(), family.workers, |i| {
        weighted_mixed_norm(&family.profiles[i], &params_in, radius, angular_order)
    });
    let pr = params(&[
        ("inv_p", 1.0 / params_in.p),
        ("inv_q", 1.0 / params_in.q),
        ("d1", params_in.d1),
        ("d2", params_in.d2),
    ]);
    let rhs = &rhs;
    let (report, _) = run_checker(family, InequalityId::WeightedConvolution, pr, |grid| {
        let kernel = riesz(grid, params_in.kernel_exponent(dim))?;
        Ok(Box::new(move |i, g| {
            if rhs[i] == 0.0 {
                return Err(InequalityError::ZeroInput);
            }
            let f = family.profiles[i].sample(g);
            Ok(vec![
                weighted_convolution_lhs(&f, &kernel, &params_in) / rhs[i],
            ])
        }))
    })?;
    Ok(report)
}

/// `⟨u, [D_m^{2−α}, f] u⟩` with `f = |x|² K(|u|²)`, by composing the
/// spectral and pointwise operators in both orders.
pub fn commutator_value(
    u: &ComplexField,
    kernel: &HartreeKernel,
    alpha: f64,
    m: f64,
) -> Result<Complex64, InequalityError> {
    let f = commutator_weight(u, kernel);
    commutator_with_weight(u, &f, alpha, m)
}

fn commutator_weight(u: &ComplexField, kernel: &HartreeKernel) -> Vec<f64> {
    let potential = kernel.convolve_density(&u.density());
    potential
        .iter()
        .zip(u.grid().radius_squared().iter())
        .map(|(k, r2)| k * r2)
        .collect()
}

fn commutator_with_weight(
    u: &ComplexField,
    f: &[f64],
    alpha: f64,
    m: f64,
) -> Result<Complex64, InequalityError> {
    require(m > 0.0, || format!("need m > 0, got {m}"))?;
    let grid = u.grid();
    let d = DispersionSymbol::relativistic(grid, m, 2.0 - alpha)?;
    let fu: Vec<Complex64> = u.values().iter().zip(f).map(|(v, w)| v * w).collect();
    let d_fu = apply_symbol(&ComplexField::new(grid, fu, Space::Physical)?, &d)?;
    let du = apply_symbol(u, &d)?;
    let diff: Vec<Complex64> = d_fu
        .values()
        .iter()
        .zip(du.values())
        .zip(f)
        .map(|((a, b), w)| a - b * w)
        .collect();
    Ok(u.inner(&ComplexField::new(grid, diff, Space::Physical)?)?)
}

/// `|⟨u, [D_m^{2−α}, |x|²K(|u|²)] u⟩| / ‖u‖⁴_{L²}`.
pub fn commutator_ratio(
    u: &ComplexField,
    kernel: &HartreeKernel,
    alpha: f64,
    m: f64,
) -> Result<f64, InequalityError> {
    let mass = u.l2_norm_sq();
    if mass == 0.0 {
        return Err(InequalityError::ZeroInput);
    }
    Ok(commutator_value(u, kernel, alpha, m)?.norm() / (mass * mass))
}

/// Commutator probe over a radial family and a sweep of masses. The report's
/// `worst_ratio` is the maximum over the sweep.
pub fn probe_commutator(
    family: &Family,
    masses: &[f64],
    alpha: f64,
    potential: &PotentialSpec,
) -> Result<RatioReport, InequalityError> {
    require(!masses.is_empty(), || "empty mass sweep".into())?;
    require(masses.iter().all(|&m| m > 0.0), || {
        format!("masses must be positive, got {masses:?}")
    })?;
    require(alpha > 1.0 && alpha <= 2.0, || {
        format!("need 1 < alpha <= 2, got {alpha}")
    })?;
    require((potential.gamma - alpha).abs() < 1e-12, || {
        format!(
            "the probe needs gamma = alpha, got gamma = {}",
            potential.gamma
        )
    })?;
    let pr = params(&[("alpha", alpha), ("gamma", potential.gamma)]);
    let (mut report, base) = run_checker(family, InequalityId::Commutator, pr, |grid| {
        let kernel = build_kernel(grid, potential.clone())?;
        Ok(Box::new(move |i, g| {
            let u = family.profiles[i].sample(g);
            let mass = u.l2_norm_sq();
            if mass == 0.0 {
                return Err(InequalityError::ZeroInput);
            }
            let f = commutator_weight(&u, &kernel);
            masses
                .iter()
                .map(|&m| Ok(commutator_with_weight(&u, &f, alpha, m)?.norm() / (mass * mass)))
                .collect()
        }))
    })?;
    report.m_sweep = masses
        .iter()
        .zip(&base)
        .map(|(&m, &(worst, index))| SweepPoint {
            m,
            worst_ratio: worst,
            worst_case_seed: family.profiles[index].seed,
        })
        .collect();
    Ok(report)
}

/// Pinned parameter sets for the six checkers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Standard,
    /// Coarser grids and fewer samples, for smoke tests.
    Quick,
}

impl FromStr for Suite {
    type Err = InequalityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Suite::Standard),
            "quick" => Ok(Suite::Quick),
            other => Err(InequalityError::InvalidParameters(format!(
                "unknown suite {other:?}"
            ))),
        }
    }
}

/// Masses swept by the commutator probe.
pub const COMMUTATOR_MASSES: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// Runs all six checkers with the parameters pinned for `suite`.
pub fn run_suite(
    suite: Suite,
    seed: u64,
    workers: usize,
) -> Result<Vec<RatioReport>, InequalityError> {
    let (plane, samples, space, radial_samples) = match suite {
        // The commutator box is small so that the profiles carry frequencies
        // above the swept masses.
        Suite::Standard => (GridSpec::new(2, 64, 8.0), 24, GridSpec::new(3, 48, 3.0), 8),
        Suite::Quick => (GridSpec::new(2, 48, 8.0), 8, GridSpec::new(3, 32, 2.0), 3),
    };
    let family = Family::random(plane, samples, seed).with_workers(workers);
    let radial = Family::radial(space, radial_samples, seed).with_workers(workers);
    let split = LeibnizSplit {
        r1: 4.0,
        q2: 4.0,
        q1: 4.0,
        r2: 4.0,
    };
    let weighted = WeightedConvolution {
        p: 2.0,
        q: 2.0,
        d1: 0.1,
        d2: 0.4,
    };
    Ok(vec![
        check_hardy(&family, 1.0)?,
        check_kgamma_bound(&family, 1.0, 0.5)?,
        check_stein_weiss(&family, 0.5, 1.5, 2.0)?,
        check_leibniz(&family, 0.5, split)?,
        check_weighted_convolution(&family, weighted, 48)?,
        probe_commutator(
            &radial,
            &COMMUTATOR_MASSES,
            1.5,
            &PotentialSpec::riesz(1.5, Coupling::Focusing),
        )?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn plane() -> GridSpec {
        GridSpec::new(2, 64, 8.0)
    }

    #[test]
    fn profiles_are_reproducible_from_their_seed() {
        let f = Family::random(plane(), 8, 11);
        let g = Family::random(plane(), 8, 11);
        let grid = plane().build().unwrap();
        for (a, b) in f.profiles().iter().zip(g.profiles()) {
            assert_eq!(a.sample(&grid).values(), b.sample(&grid).values());
            assert_eq!(*a, Profile::generate(a.kind(), a.seed(), &plane()));
        }
        let other = Family::random(plane(), 8, 12);
        assert_ne!(f.profiles()[0], other.profiles()[0]);
    }

    #[test]
    fn grid_sampling_matches_pointwise_evaluation() {
        let grid = plane().build().unwrap();
        for p in Family::random(plane(), 4, 3).profiles() {
            let u = p.sample(&grid);
            for flat in [0, 17, 2000, 4095] {
                let x = grid.position(flat);
                assert!((u.values()[flat] - p.value_at(&x[..2])).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn profiles_are_small_on_the_box_faces() {
        let grid = plane().build().unwrap();
        for p in Family::random(plane(), 16, 5).profiles() {
            let u = p.sample(&grid);
            let n = grid.points_per_axis();
            let face = (0..n).map(|j| u.values()[j].norm()).fold(0.0, f64::max);
            assert!(face < 1e-12 * u.max_abs(), "{:?}", p.kind());
        }
    }

    #[test]
    fn transformations_act_on_the_argument() {
        let p = Family::random(plane(), 1, 9).profiles()[0].clone();
        let x = [0.7, -1.3];
        let t = p.translated(&[0.5, 0.25]);
        assert!((t.value_at(&x) - p.value_at(&[0.2, -1.55])).norm() < 1e-13);
        let d = p.dilated(2.0);
        assert!((d.value_at(&x) - p.value_at(&[0.35, -0.65])).norm() < 1e-13);
    }

    #[test]
    fn hardy_ratio_is_scale_phase_and_translation_invariant() {
        let grid = plane().build().unwrap();
        let kernel = riesz(&grid, 1.0).unwrap();
        let p = Profile::generate(ProfileKind::Chirp, 4, &plane());
        let base = hardy_ratio(&p.sample(&grid), &kernel).unwrap();
        let scaled =
            hardy_ratio(&p.scaled(Complex64::new(0.0, 3.0)).sample(&grid), &kernel).unwrap();
        assert_relative_eq!(base, scaled, max_relative = 1e-12);
        let h = grid.spacing();
        let moved =
            hardy_ratio(&p.translated(&[3.0 * h, -2.0 * h]).sample(&grid), &kernel).unwrap();
        assert_relative_eq!(base, moved, max_relative = 1e-10);
    }

    #[test]
    fn stein_weiss_ratio_is_dilation_covariant() {
        let grid = plane().build().unwrap();
        let wide = GridSpec::new(2, 64, 16.0).build().unwrap();
        let k = riesz(&grid, 1.5).unwrap();
        let kw = riesz(&wide, 1.5).unwrap();
        for p in Family::random(plane(), 4, 21).profiles() {
            let a = stein_weiss_ratio(&p.sample(&grid), &k, 0.5, 2.0).unwrap();
            let b = stein_weiss_ratio(&p.dilated(2.0).sample(&wide), &kw, 0.5, 2.0).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-8);
        }
        assert!(matches!(
            stein_weiss_ratio(&ComplexField::zeros(&grid), &k, 0.5, 2.0),
            Err(InequalityError::ZeroInput)
        ));
    }

    #[test]
    fn leibniz_reduces_to_equality_for_a_constant_factor() {
        let grid = plane().build().unwrap();
        let u = Profile::generate(ProfileKind::RandomField, 8, &plane()).sample(&grid);
        let one = ComplexField::from_fn(&grid, |_| Complex64::new(1.0, 0.0));
        let split = LeibnizSplit {
            r1: 2.0,
            q2: f64::INFINITY,
            q1: 4.0,
            r2: 4.0,
        };
        let r = leibniz_ratio(&u, &one, 0.7, &split).unwrap();
        assert!(r <= 1.0 + 1e-10 && r > 1.0 - 1e-10, "{r}");
    }

    #[test]
    fn leibniz_at_zero_order_is_holder() {
        let grid = plane().build().unwrap();
        let f = Family::random(plane(), 6, 2);
        let split = LeibnizSplit {
            r1: 3.0,
            q2: 6.0,
            q1: 6.0,
            r2: 3.0,
        };
        for (u, v) in f.profiles().iter().zip(f.companions()) {
            let r = leibniz_ratio(&u.sample(&grid), &v.sample(&grid), 0.0, &split).unwrap();
            assert!(r <= 0.5 + 1e-12, "{r}");
        }
        let bad = LeibnizSplit { r2: 5.0, ..split };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn mixed_norm_of_a_radial_profile_collapses_to_a_radial_integral() {
        let w = 1.3;
        let params = WeightedConvolution {
            p: 2.0,
            q: 3.0,
            d1: 0.0,
            d2: 0.4,
        };
        for dim in [2usize, 3] {
            let p = Profile::gaussian(dim, w);
            let got = weighted_mixed_norm(&p, &params, 12.0, 16);
            let area = if dim == 2 { 2.0 * PI } else { 4.0 * PI };
            // ∫₀^∞ r^{n−1−d₂} e^{−r²/(2w²)} dr · |S|^{1/q}.
            let a = dim as f64 - params.d2;
            let radial =
                statrs::function::gamma::gamma(0.5 * a) * 2f64.powf(0.5 * a - 1.0) * w.powf(a);
            assert_relative_eq!(got, radial * area.powf(1.0 / params.q), max_relative = 1e-8);
        }
    }

    #[test]
    fn weighted_convolution_ratio_is_dilation_covariant() {
        let params = WeightedConvolution {
            p: 2.0,
            q: 2.0,
            d1: 0.1,
            d2: 0.4,
        };
        let grid = plane().build().unwrap();
        let wide = GridSpec::new(2, 64, 16.0).build().unwrap();
        let k = riesz(&grid, params.kernel_exponent(2)).unwrap();
        let kw = riesz(&wide, params.kernel_exponent(2)).unwrap();
        let p = Profile::generate(ProfileKind::TwoBump, 3, &plane());
        let a = weighted_convolution_lhs(&p.sample(&grid), &k, &params)
            / weighted_mixed_norm(&p, &params, 8.0, 32);
        let q = p.dilated(2.0);
        let b = weighted_convolution_lhs(&q.sample(&wide), &kw, &params)
            / weighted_mixed_norm(&q, &params, 16.0, 32);
        assert_relative_eq!(a, b, max_relative = 1e-8);
    }

    #[test]
    fn weighted_convolution_constraints_are_enforced() {
        let ok = WeightedConvolution {
            p: 2.0,
            q: 2.0,
            d1: 0.1,
            d2: 0.4,
        };
        assert!(ok.validate(2).is_ok());
        assert!(WeightedConvolution { d2: 0.6, ..ok }.validate(2).is_err());
        assert!(WeightedConvolution { d1: 0.4, ..ok }.validate(2).is_err());
        assert!(WeightedConvolution {
            p: f64::INFINITY,
            d1: 0.4,
            ..ok
        }
        .validate(2)
        .is_ok());
        assert!(ok.validate(1).is_err());
    }

    #[test]
    fn commutator_vanishes_for_the_schroedinger_exponent() {
        let spec = GridSpec::new(2, 64, 8.0);
        let grid = spec.build().unwrap();
        let kernel = riesz(&grid, 1.5).unwrap();
        for p in Family::radial(spec, 3, 1).profiles() {
            let u = p.sample(&grid);
            assert!(commutator_ratio(&u, &kernel, 2.0, 1.0).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn commutator_value_is_homogeneous_of_degree_four() {
        let spec = GridSpec::new(2, 64, 8.0);
        let grid = spec.build().unwrap();
        let kernel = riesz(&grid, 1.5).unwrap();
        let p = Family::radial(spec, 1, 4).profiles()[0].clone();
        let v1 = commutator_value(&p.sample(&grid), &kernel, 1.5, 1.0).unwrap();
        let v2 = commutator_value(
            &p.scaled(Complex64::new(2.0, 0.0)).sample(&grid),
            &kernel,
            1.5,
            1.0,
        )
        .unwrap();
        assert!((v2 - v1 * 16.0).norm() < 1e-10 * v2.norm());
        assert!(v1.norm() > 0.0);
        assert!(commutator_value(&p.sample(&grid), &kernel, 1.5, 0.0).is_err());
    }

    #[test]
    fn reports_serialize_with_the_documented_fields() {
        let family = Family::random(GridSpec::new(1, 32, 8.0), 3, 7);
        let report = check_hardy(&family, 0.5).unwrap();
        let json: serde_json::Value = serde_json::to_value(&report).unwrap();
        for key in [
            "inequality_id",
            "params",
            "samples",
            "worst_ratio",
            "worst_case_seed",
            "refinement_ratio",
        ] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["inequality_id"], "hardy");
        assert!(json.get("m_sweep").is_none());
        let back: RatioReport = serde_json::from_value(json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let family = Family::random(plane(), 6, 13);
        let a = check_kgamma_bound(&family, 1.0, 0.5).unwrap();
        let b = check_kgamma_bound(&family.clone().with_workers(3), 1.0, 0.5).unwrap();
        assert_eq!(a, b);
    }
}
