//! End-to-end acceptance checks. Each check prints one PASS or FAIL line;
//! the process exits nonzero if any check fails.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use fhnls::experiments::{self, ExperimentConfig, RunManifest, RunOptions, RunReport};
use fhnls::ground_state::solve_ground_state;
use fhnls::inequality::{
    commutator_ratio, hardy_ratio, run_suite, Family, Profile, ProfileKind, Suite,
};
use fhnls::observables::energy;
use fhnls::propagator::{free_evolve, EvolutionState, EvolutionStatus};
use fhnls::{
    build_kernel, hartree_potential, sobolev_norm, ComplexField, Coupling, DispersionSymbol, Grid,
    GridSpec, PotentialSpec, SobolevVariant,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(bool, String), Box<dyn std::error::Error>>;
type Named<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn gaussian(grid: &Grid, width: f64, amplitude: f64) -> ComplexField {
    ComplexField::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        Complex64::new(amplitude * (-r2 / (2.0 * width * width)).exp(), 0.0)
    })
}

fn distance(a: &ComplexField, b: &ComplexField) -> f64 {
    let s: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    (s * a.grid().cell_volume()).sqrt()
}

fn conservation() -> Check {
    let grid = GridSpec::new(1, 256, 20.0).build()?;
    let mut notes = Vec::new();
    let mut ok = true;
    for coupling in [Coupling::Defocusing, Coupling::Focusing] {
        let start = Instant::now();
        let dispersion = DispersionSymbol::relativistic(&grid, 1.0, 1.5)?;
        let kernel = build_kernel(&grid, PotentialSpec::riesz(0.5, coupling))?;
        let phi = gaussian(&grid, 1.0, 1.0);
        let (_, _, e0) = energy(&phi, &dispersion, &kernel)?;
        let m0 = phi.l2_norm_sq();
        let mut state = EvolutionState::new(phi, 0.0, 1e-3, dispersion.clone(), kernel.clone())?;
        let (mut mass_drift, mut energy_drift) = (0.0f64, 0.0f64);
        for _ in 0..50 {
            state.advance(1e-3, 100)?;
            let (_, _, e) = energy(state.u(), &dispersion, &kernel)?;
            mass_drift = mass_drift.max((state.u().l2_norm_sq() - m0).abs() / m0);
            energy_drift = energy_drift.max((e - e0).abs() / e0.abs());
        }
        let secs = start.elapsed().as_secs_f64();
        ok &= mass_drift <= 1e-10 && energy_drift <= 1e-6 && secs <= 60.0;
        notes.push(format!(
            "λ={:+}: mass drift {mass_drift:.1e}, energy drift {energy_drift:.1e}, {secs:.1}s",
            coupling.as_i8()
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn integrator_order() -> Check {
    let grid = GridSpec::new(1, 128, 20.0).build()?;
    let dispersion = DispersionSymbol::relativistic(&grid, 1.0, 1.5)?;
    let kernel = build_kernel(&grid, PotentialSpec::riesz(0.5, Coupling::Defocusing))?;
    let phi = gaussian(&grid, 1.0, 1.5);
    let finals: Vec<ComplexField> = [0.1, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&dt| {
            let mut s =
                EvolutionState::new(phi.clone(), 0.0, dt, dispersion.clone(), kernel.clone())?;
            s.advance(dt, (1.0 / dt).round() as usize)?;
            Ok(s.into_field())
        })
        .collect::<Result<_, fhnls::propagator::PropagatorError>>()?;
    let diffs: Vec<f64> = finals.windows(2).map(|w| distance(&w[0], &w[1])).collect();
    let slopes: Vec<f64> = diffs.windows(2).map(|d| (d[0] / d[1]).log2()).collect();
    let ok = slopes.iter().all(|s| (s - 2.0).abs() <= 0.2);
    Ok((ok, format!("slopes {:.3?}", slopes)))
}

fn free_flow() -> Check {
    let grid = GridSpec::new(1, 64, 10.0).build()?;
    let dk = PI / 10.0;
    let mut worst: f64 = 0.0;
    for (m, alpha, k) in [
        (0.0, 1.5, 3.0 * dk),
        (1.0, 1.2, 5.0 * dk),
        (2.0, 1.8, -7.0 * dk),
    ] {
        let dispersion = DispersionSymbol::relativistic(&grid, m, alpha)?;
        let wave = ComplexField::from_fn(&grid, |x| Complex64::from_polar(1.0, k * x[0]));
        let out = free_evolve(&wave, 1.0, &dispersion)?;
        let omega = (m * m + k * k).powf(0.5 * alpha);
        let exact = ComplexField::from_fn(&grid, |x| Complex64::from_polar(1.0, k * x[0] - omega));
        let err = out
            .values()
            .iter()
            .zip(exact.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst = worst.max(err);
    }
    Ok((worst <= 1e-12, format!("max pointwise error {worst:.1e}")))
}

fn convolution_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = 2 * rng.random_range(4..=16);
        let half_length = rng.random_range(1.0..10.0);
        let gamma = rng.random_range(0.1..0.9);
        let grid = GridSpec::new(1, n, half_length).build()?;
        let kernel = build_kernel(&grid, PotentialSpec::riesz(gamma, Coupling::Focusing))?;
        let values: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let u = ComplexField::new(&grid, values, fhnls::Space::Physical)?;
        let fast = hartree_potential(&u, &kernel)?;
        let h = grid.spacing();
        let cell = 2.0 / h * (0.5 * h).powf(1.0 - gamma) / (1.0 - gamma);
        let density = u.density();
        let brute: Vec<f64> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let k = if i == j {
                            cell
                        } else {
                            (((i as f64) - (j as f64)) * h).abs().powf(-gamma)
                        };
                        h * k * density[j]
                    })
                    .sum()
            })
            .collect();
        let scale = brute.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let err = fast
            .iter()
            .zip(&brute)
            .fold(0.0f64, |a, (f, b)| a.max((f - b).abs()))
            / scale;
        worst = worst.max(err);
    }
    Ok((
        worst <= 1e-10,
        format!("100 cases, worst relative error {worst:.1e}"),
    ))
}

fn ground_state() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for (dim, half_length, alpha, gamma) in [(3, 10.0, 2.0, 1.0), (1, 20.0, 1.5, 0.5)] {
        let mut norms = Vec::new();
        for points in [64, 128] {
            let grid = GridSpec::new(dim, points, half_length).build()?;
            let gs = solve_ground_state(&grid, alpha, gamma, 1e-8, 400)?;
            // Pairing identity recomputed from the public norm and potential routines.
            let kernel = build_kernel(&grid, PotentialSpec::riesz(gamma, Coupling::Focusing))?;
            let hdot = sobolev_norm(&gs.q, 0.5 * alpha, SobolevVariant::Homogeneous)?.powi(2);
            let density = gs.q.density();
            let v1: f64 = 0.25
                * hartree_potential(&gs.q, &kernel)?
                    .iter()
                    .zip(&density)
                    .map(|(k, d)| k * d)
                    .sum::<f64>()
                * grid.cell_volume();
            let mass = gs.q.l2_norm_sq();
            let pairing = (hdot - 4.0 * v1 + mass).abs() / mass;
            ok &= gs.residual < 1e-6 && pairing <= 1e-4;
            notes.push(format!(
                "n={dim} N={points}: residual {:.1e}, pairing {pairing:.1e}",
                gs.residual
            ));
            norms.push(mass.sqrt());
        }
        let drift = (norms[0] - norms[1]).abs() / norms[1];
        ok &= drift <= 1e-2;
        notes.push(format!("n={dim} ‖Q‖ change {drift:.1e}"));
    }
    Ok((ok, notes.join("; ")))
}

fn run_config(toml: &str, dir: &Path) -> Result<RunManifest, Box<dyn std::error::Error>> {
    let config = ExperimentConfig::from_toml_str(toml)?;
    Ok(experiments::run(
        &config,
        &RunOptions {
            out: Some(dir.to_path_buf()),
            workers: 1,
        },
    )?)
}

const FOCUSING_PHYSICS: &str = r#"
[grid]
dim = 2
points = 128
half_length = 12.0

[physics]
m = 1.0
alpha = 1.5
gamma = 1.5
lambda = -1
"#;

fn mass_threshold(dir: &Path) -> Check {
    let toml = format!(
        r#"schema_version = 1
experiment = "mass_threshold"
{FOCUSING_PHYSICS}
[initial_data]
kind = "ground_state_rescaled"

[time]
t_final = 10.0
observe_every = 0.02
blowup_threshold = 2.5
step = {{ mode = "adaptive", dt_initial = 1e-3, energy_tol = 1e-5, dt_min = 1e-8, dt_max = 1e-2 }}
"#
    );
    let manifest = run_config(&toml, dir)?;
    let RunReport::MassThreshold(r) = manifest.report else {
        return Err("unexpected report kind".into());
    };
    let sub = &r.sub_threshold;
    let sup = &r.super_threshold;
    let sub_ok = sub.status == EvolutionStatus::Completed
        && sub.t_end >= 10.0
        && sub.max_hdot <= 5.0 * sub.initial_hdot;
    let root = sup.parabola_root.unwrap_or(f64::NAN);
    let sup_ok =
        sup.energy < 0.0 && sup.status == EvolutionStatus::Blowup && sup.t_end <= 2.0 * root;
    Ok((
        sub_ok && sup_ok,
        format!(
            "0.9·Q: {:?} to t={}, growth {:.2}×; rescaled: E={:.3}, {:?} at T*={:.3}, root {:.3}",
            sub.status,
            sub.t_end,
            sub.max_hdot / sub.initial_hdot,
            sup.energy,
            sup.status,
            sup.t_end,
            root
        ),
    ))
}

fn virial(dir: &Path) -> Check {
    let toml = format!(
        r#"schema_version = 1
experiment = "evolve"
{FOCUSING_PHYSICS}
[initial_data]
kind = "ground_state_rescaled"
amplitude = 1.2
concentration = 2.0

[time]
t_final = 0.2
observe_every = 0.005
blowup_threshold = 2.5
step = {{ mode = "fixed", dt = 1e-4 }}
"#
    );
    let manifest = run_config(&toml, dir)?;
    let RunReport::Evolve(r) = manifest.report else {
        return Err("unexpected report kind".into());
    };
    let v = r.virial.ok_or("no virial report")?;
    let e_phi = {
        let csv = std::fs::read_to_string(dir.join("observables.csv"))?;
        let mut rows = csv.lines();
        let header: Vec<&str> = rows.next().ok_or("empty csv")?.split(',').collect();
        let col = header
            .iter()
            .position(|c| *c == "energy")
            .ok_or("no energy column")?;
        rows.next()
            .ok_or("no rows")?
            .split(',')
            .nth(col)
            .ok_or("short row")?
            .parse::<f64>()?
    };
    let gate = 1e-2 * e_phi.abs();
    let ok = e_phi < 0.0 && v.dilation_residual <= gate && v.concavity_residual <= gate;
    Ok((
        ok,
        format!(
            "E={e_phi:.3}, dilation residual {:.3}, concavity residual {:.3}, gate {gate:.1e}, {} samples",
            v.dilation_residual, v.concavity_residual, v.samples
        ),
    ))
}

fn limits(dir: &Path) -> Check {
    let body = r#"
[grid]
dim = 1
points = 256
half_length = 20.0

[physics]
m = 1.0
alpha = 1.5
gamma = 0.5
lambda = -1

[initial_data]
kind = "gaussian"
width = 1.0

[time]
t_final = 1.0
observe_every = 0.01
step = { mode = "fixed", dt = 1e-3 }
"#;
    let mut ok = true;
    let mut notes = Vec::new();
    for (kind, masses) in [
        ("limit_m_to_zero", "[1.0, 0.5, 0.25, 0.125]"),
        ("limit_m_to_infinity", "[2.0, 4.0, 8.0, 16.0]"),
    ] {
        let toml = format!(
            "schema_version = 1\nexperiment = \"{kind}\"\n{body}\n[scan]\nmasses = {masses}\n"
        );
        let manifest = run_config(&toml, &dir.join(kind))?;
        let rows = match manifest.report {
            RunReport::LimitMToZero { rows, .. } | RunReport::LimitMToInfinity { rows, .. } => rows,
            _ => return Err("unexpected report kind".into()),
        };
        let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
        ok &= gaps.windows(2).all(|w| w[1] < w[0]);
        let shown: Vec<String> = gaps.iter().map(|g| format!("{g:.3e}")).collect();
        notes.push(format!("{kind} gaps [{}]", shown.join(", ")));
    }
    Ok((ok, notes.join("; ")))
}

fn scattering(dir: &Path) -> Check {
    let toml = r#"schema_version = 1
experiment = "scattering"

[grid]
dim = 3
points = 32
half_length = 16.0

[physics]
m = 1.0
alpha = 1.2
gamma = 2.5
lambda = 1

[initial_data]
kind = "gaussian"
width = 1.5
amplitude = 0.02

[time]
t_final = 40.0
observe_every = 0.1
step = { mode = "fixed", dt = 0.05 }

[scan]
saturation_after = 20.0
"#;
    let manifest = run_config(toml, dir)?;
    let RunReport::Scattering(r) = manifest.report else {
        return Err("unexpected report kind".into());
    };
    let ok = r.status == EvolutionStatus::Completed
        && r.max_increment_per_unit_time < 1e-2
        && r.defect_decreasing
        && r.phi_plus_change < 1e-3;
    Ok((
        ok,
        format!(
            "Strichartz increment {:.1e}/unit time, defect decreasing {}, φ⁺ change {:.1e}",
            r.max_increment_per_unit_time, r.defect_decreasing, r.phi_plus_change
        ),
    ))
}

fn inequalities() -> Check {
    let reports = run_suite(Suite::Standard, 0, 1)?;
    let mut ok = reports.len() == 6;
    let mut notes = Vec::new();
    for r in &reports {
        let healthy = r.worst_ratio.is_finite() && (0.8..=1.2).contains(&r.refinement_ratio);
        ok &= healthy;
        notes.push(format!(
            "{} {:.4} (refine {:.3})",
            r.inequality_id, r.worst_ratio, r.refinement_ratio
        ));
        if let Some(spread) = r.m_spread() {
            ok &= spread < 2.0;
            notes.push(format!("m-spread {spread:.2}"));
        }
    }

    // Phase, scale and lattice-translation invariance of the Hardy ratio.
    let spec = GridSpec::new(2, 64, 8.0);
    let grid = spec.build()?;
    let kernel = build_kernel(&grid, PotentialSpec::riesz(1.0, Coupling::Focusing))?;
    let h = grid.spacing();
    let mut symmetry: f64 = 0.0;
    for (i, kind) in [
        ProfileKind::RandomField,
        ProfileKind::Chirp,
        ProfileKind::TwoBump,
    ]
    .into_iter()
    .enumerate()
    {
        let p = Profile::generate(kind, 40 + i as u64, &spec);
        let base = hardy_ratio(&p.sample(&grid), &kernel)?;
        for q in [
            p.scaled(Complex64::new(-1.7, 0.4)),
            p.translated(&[2.0 * h, -3.0 * h]),
        ] {
            symmetry = symmetry.max((hardy_ratio(&q.sample(&grid), &kernel)? - base).abs() / base);
        }
    }
    ok &= symmetry <= 1e-8;
    notes.push(format!("symmetry {symmetry:.1e}"));

    // At α = 2 the commutator multiplier D_m^0 is the identity.
    let spec3 = GridSpec::new(3, 32, 3.0);
    let grid3 = spec3.build()?;
    let kernel3 = build_kernel(&grid3, PotentialSpec::riesz(2.0, Coupling::Focusing))?;
    let mut schroedinger: f64 = 0.0;
    for p in Family::radial(spec3, 3, 5).profiles() {
        schroedinger = schroedinger.max(commutator_ratio(&p.sample(&grid3), &kernel3, 2.0, 1.0)?);
    }
    ok &= schroedinger <= 1e-12;
    notes.push(format!("α=2 commutator {schroedinger:.1e}"));
    Ok((ok, notes.join("; ")))
}

fn main() {
    let scratch = tempfile::tempdir().expect("temporary directory");
    let root = scratch.path();
    let checks: Vec<Named> = vec![
        ("conservation", Box::new(conservation)),
        ("integrator order", Box::new(integrator_order)),
        ("free flow", Box::new(free_flow)),
        ("convolution oracle", Box::new(convolution_oracle)),
        ("ground state", Box::new(ground_state)),
        (
            "mass-critical dichotomy",
            Box::new(|| mass_threshold(&root.join("mass_threshold"))),
        ),
        (
            "virial inequalities",
            Box::new(|| virial(&root.join("virial"))),
        ),
        ("limits", Box::new(|| limits(&root.join("limits")))),
        (
            "scattering",
            Box::new(|| scattering(&root.join("scattering"))),
        ),
        ("inequality suite", Box::new(inequalities)),
    ];
    // Optional name filters: `cargo test --test acceptance -- limits`.
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let selected: Vec<_> = checks
        .iter()
        .filter(|(name, _)| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str())))
        .collect();
    let mut failures = 0;
    for (name, check) in &selected {
        let start = Instant::now();
        let (passed, detail) = match check() {
            Ok(result) => result,
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        let verdict = if passed { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {name}: {detail} [{:.1}s]",
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} checks passed",
        selected.len() - failures,
        selected.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
