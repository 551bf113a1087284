//! Pseudospectral simulation of the fractional Schrödinger equation with a
//! Hartree nonlinearity,
//!
//! ```text
//! i ∂_t u = (m² − Δ)^{α/2} u + λ (ψ(|·|)/|·|^γ * |u|²) u,
//! ```
//!
//! on a periodic box, together with the diagnostics used to study it:
//! conserved quantities, virial functionals, ground states, scattering and
//! limit experiments, and numerical probes of the supporting inequalities.

// Validation uses `!(x > a)` so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod experiments;
pub(crate) mod fft;
pub mod ground_state;
pub mod hartree;
pub mod inequality;
pub mod observables;
pub mod parallel;
pub mod propagator;
pub mod quadrature;
pub mod spectral;

pub use hartree::{
    build_kernel, hartree_potential, nonlinearity, potential_energy, Coupling, HartreeError,
    HartreeKernel, PotentialSpec, RadialProfile, RadialTable,
};
pub use spectral::{
    apply_symbol, build_grid, sobolev_norm, ComplexField, DispersionSymbol, Grid, GridSpec,
    SobolevVariant, Space, SpectralError, SymbolKind,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grids.md")]
    mod grids {}
    #[doc = include_str!("../../../book/src/evolution.md")]
    mod evolution {}
    #[doc = include_str!("../../../book/src/ground_state.md")]
    mod ground_state {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/inequalities.md")]
    mod inequalities {}
}
