//! Shared fixtures for the benchmarks.

use exwkb::{build_effective_q, Complex64, EffectiveQ, RationalPotential};

/// `q̃` of the double hump at a real energy.
pub fn double_hump_q(e: f64, hbar: f64) -> EffectiveQ {
    build_effective_q(&RationalPotential::double_hump(), Complex64::new(e, 0.0), hbar).expect("double hump is well formed")
}

/// Energies spanning the tunneling and over-barrier regimes at `ħ = 0.1`.
pub const SWEEP: [f64; 6] = [0.01, 0.03, 0.05, 0.3, 0.6, 1.2];
