//! Model fixtures shared by the benchmarks in `benches/`.

use tcl_core::bath::{
    correlation_from_spectral_density, super_correlation, BathMode, DiscreteBath, SpectralDensity,
};
use tcl_core::tcl::{BathMoments, TimeGrid};
use tcl_core::{CMatrix, Operator, Picture, SystemModel, SystemState, C64};

/// `H_S = σ_z/2`, `S = σ_x`.
pub fn spin_boson() -> SystemModel {
    SystemModel::new(Operator::pauli_z().scale_real(0.5), Operator::pauli_x())
        .expect("Pauli matrices are Hermitian")
}

/// Zero-temperature Ohmic bath, `η = 0.1`, `ω_c = 5`.
pub fn ohmic() -> BathMoments {
    let c = correlation_from_spectral_density(
        SpectralDensity::Ohmic {
            eta: 0.1,
            cutoff: 5.0,
        },
        None,
    )
    .expect("valid spectral density");
    BathMoments::Gaussian(super_correlation(c))
}

/// Three bath qubits at `β = 2`.
pub fn spin_bath() -> DiscreteBath {
    DiscreteBath::new(
        vec![
            BathMode::qubit(0.8, 0.5),
            BathMode::qubit(1.3, 0.4),
            BathMode::qubit(2.1, 0.6),
        ],
        Some(2.0),
        0.0,
    )
    .expect("valid bath")
}

pub fn grid(n_steps: usize, t_end: f64) -> TimeGrid {
    TimeGrid::new(0.0, t_end / n_steps as f64, n_steps).expect("valid grid")
}

pub fn plus_state() -> SystemState {
    let rho = Operator::new(CMatrix::from_element(2, 2, C64::new(0.5, 0.0))).expect("square");
    SystemState::new(rho, Picture::Interaction).expect("valid density matrix")
}
