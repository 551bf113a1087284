use fhnls::checkpoint::Checkpoint;
use fhnls::ground_state::{dilate, weinstein_quotient};
use fhnls::inequality::{hardy_ratio, Profile, ProfileKind};
use fhnls::propagator::{free_evolve, EvolutionState};
use fhnls::{
    build_kernel, hartree_potential, sobolev_norm, ComplexField, Coupling, DispersionSymbol, Grid,
    GridSpec, PotentialSpec, SobolevVariant,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn packet(grid: &Grid, width: f64, shift: f64, k: f64) -> ComplexField {
    ComplexField::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|c| (c - shift) * (c - shift)).sum();
        Complex64::from_polar((-r2 / (2.0 * width * width)).exp(), k * x[0])
    })
}

fn grid_1d() -> impl Strategy<Value = Grid> {
    (prop::sample::select(vec![32usize, 48, 64]), 6.0..16.0f64)
        .prop_map(|(n, l)| GridSpec::new(1, n, l).build().unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn free_flow_is_unitary_and_a_group(
        grid in grid_1d(),
        m in 0.0..3.0f64,
        alpha in 1.05..2.0f64,
        s in -2.0..2.0f64,
        t in -2.0..2.0f64,
        k in -2.0..2.0f64,
    ) {
        let d = DispersionSymbol::relativistic(&grid, m, alpha).unwrap();
        let u = packet(&grid, 1.0, 0.3, k);
        let once = free_evolve(&u, s + t, &d).unwrap();
        let twice = free_evolve(&free_evolve(&u, s, &d).unwrap(), t, &d).unwrap();
        prop_assert!((&once - &twice).l2_norm() <= 1e-12 * u.l2_norm());
        prop_assert!((once.l2_norm_sq() - u.l2_norm_sq()).abs() <= 1e-12 * u.l2_norm_sq());
    }

    #[test]
    fn split_step_conserves_mass(
        grid in grid_1d(),
        gamma in 0.1..0.9f64,
        focusing in any::<bool>(),
        amplitude in 0.1..2.0f64,
        dt in 1e-3..5e-2f64,
    ) {
        let coupling = if focusing { Coupling::Focusing } else { Coupling::Defocusing };
        let d = DispersionSymbol::relativistic(&grid, 1.0, 1.5).unwrap();
        let kernel = build_kernel(&grid, PotentialSpec::riesz(gamma, coupling)).unwrap();
        let u = &packet(&grid, 1.0, 0.0, 0.5) * amplitude;
        let m0 = u.l2_norm_sq();
        let mut state = EvolutionState::new(u, 0.0, dt, d, kernel).unwrap();
        state.advance(dt, 20).unwrap();
        prop_assert!((state.u().l2_norm_sq() - m0).abs() <= 1e-12 * m0);
    }

    #[test]
    fn hartree_pairing_is_symmetric(
        grid in grid_1d(),
        gamma in 0.1..0.9f64,
        w1 in 0.5..2.0f64,
        w2 in 0.5..2.0f64,
        shift in -2.0..2.0f64,
    ) {
        let kernel = build_kernel(&grid, PotentialSpec::riesz(gamma, Coupling::Focusing)).unwrap();
        let a = packet(&grid, w1, 0.0, 0.0);
        let b = packet(&grid, w2, shift, 1.0);
        let pair = |p: &ComplexField, q: &ComplexField| -> f64 {
            hartree_potential(p, &kernel).unwrap().iter().zip(q.density()).map(|(k, d)| k * d).sum()
        };
        let ab = pair(&a, &b);
        let ba = pair(&b, &a);
        prop_assert!(ab > 0.0);
        prop_assert!((ab - ba).abs() <= 1e-12 * ab);
    }

    #[test]
    fn inhomogeneous_sobolev_norm_grows_with_order(
        grid in grid_1d(),
        s in 0.0..2.0f64,
        ds in 0.01..1.0f64,
        k in -2.0..2.0f64,
    ) {
        let u = packet(&grid, 1.0, 0.0, k);
        let low = sobolev_norm(&u, s, SobolevVariant::Inhomogeneous).unwrap();
        let high = sobolev_norm(&u, s + ds, SobolevVariant::Inhomogeneous).unwrap();
        prop_assert!(high >= low * (1.0 - 1e-14));
    }

    #[test]
    fn weinstein_quotient_ignores_amplitude_and_phase(
        scale in 0.1..10.0f64,
        phase in 0.0..std::f64::consts::TAU,
    ) {
        let grid = GridSpec::new(2, 32, 8.0).build().unwrap();
        let u = packet(&grid, 1.2, 0.0, 0.0);
        let w = weinstein_quotient(&u, 1.5, 1.5).unwrap();
        let v = weinstein_quotient(&u.scaled(Complex64::from_polar(scale, phase)), 1.5, 1.5).unwrap();
        prop_assert!((w - v).abs() <= 1e-10 * w);
    }

    #[test]
    fn dilation_by_one_is_the_identity(grid in grid_1d(), width in 0.5..2.0f64) {
        let u = packet(&grid, width, 0.0, 0.0);
        let d = dilate(&u, 1.0).unwrap();
        prop_assert!((&d - &u).l2_norm() <= 1e-12 * u.l2_norm());
    }

    #[test]
    fn checkpoints_round_trip_exactly(
        grid in grid_1d(),
        t in 0.0..100.0f64,
        dt in 1e-6..1.0f64,
        mass in 0.0..5.0f64,
        focusing in any::<bool>(),
    ) {
        let ck = Checkpoint {
            field: packet(&grid, 1.0, 0.5, 1.3),
            t,
            dt,
            mass,
            alpha: 1.5,
            gamma: 0.5,
            lambda: if focusing { -1 } else { 1 },
        };
        let mut bytes = Vec::new();
        ck.write_to(&mut bytes).unwrap();
        let back = Checkpoint::read_from(bytes.as_slice()).unwrap();
        prop_assert_eq!(back.field.values(), ck.field.values());
        prop_assert_eq!(back.field.grid(), ck.field.grid());
        prop_assert_eq!((back.t, back.dt, back.mass, back.lambda), (ck.t, ck.dt, ck.mass, ck.lambda));
    }

    #[test]
    fn hardy_ratio_is_invariant_under_lattice_shifts(
        seed in 0u64..1000,
        sx in -3i32..=3,
        sy in -3i32..=3,
    ) {
        let spec = GridSpec::new(2, 64, 8.0);
        let grid = spec.build().unwrap();
        let kernel = build_kernel(&grid, PotentialSpec::riesz(1.0, Coupling::Focusing)).unwrap();
        let p = Profile::generate(ProfileKind::OffCenterBump, seed, &spec);
        let h = grid.spacing();
        let base = hardy_ratio(&p.sample(&grid), &kernel).unwrap();
        let moved = hardy_ratio(&p.translated(&[sx as f64 * h, sy as f64 * h]).sample(&grid), &kernel).unwrap();
        prop_assert!((base - moved).abs() <= 1e-8 * base);
    }
}

#[test]
fn corrupted_checkpoints_are_rejected() {
    let grid = GridSpec::new(1, 32, 4.0).build().unwrap();
    let ck = Checkpoint {
        field: packet(&grid, 1.0, 0.0, 0.0),
        t: 0.0,
        dt: 0.1,
        mass: 1.0,
        alpha: 1.5,
        gamma: 0.5,
        lambda: -1,
    };
    let mut bytes = Vec::new();
    ck.write_to(&mut bytes).unwrap();
    let mut bad_magic = bytes.clone();
    bad_magic[0] ^= 0xff;
    assert!(Checkpoint::read_from(bad_magic.as_slice()).is_err());
    bytes.truncate(bytes.len() - 8);
    assert!(Checkpoint::read_from(bytes.as_slice()).is_err());
}
