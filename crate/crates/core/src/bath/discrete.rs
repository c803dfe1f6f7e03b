//! Finite baths built from qubits and truncated oscillators.
//!
//! `H_B = Σᵢ ωᵢ nᵢ` is diagonal in the product number basis (first mode most
//! significant) and `B = b₀ 𝟙 + Σᵢ gᵢ Xᵢ` with `Xᵢ = σ_x` for a qubit and
//! `Xᵢ = aᵢ + aᵢ†` for an oscillator. Multi-point moments are computed exactly, so
//! spin baths provide genuinely non-Gaussian statistics.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::liouville::{CMatrix, Operator, Sigma, C64};

use super::spectral::{BathCorrelation, DiscreteSpectrum};

pub const MAX_BATH_DIM: usize = 256;
pub const DEFAULT_OSCILLATOR_LEVELS: usize = 6;
/// Allowed population of the highest kept oscillator level.
pub const TRUNCATION_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModeKind {
    Qubit,
    /// Levels `0..=n_max`.
    Oscillator {
        n_max: usize,
    },
}

impl ModeKind {
    pub fn levels(&self) -> usize {
        match *self {
            ModeKind::Qubit => 2,
            ModeKind::Oscillator { n_max } => n_max + 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathMode {
    pub frequency: f64,
    pub coupling: f64,
    pub kind: ModeKind,
}

impl BathMode {
    pub fn qubit(frequency: f64, coupling: f64) -> Self {
        Self {
            frequency,
            coupling,
            kind: ModeKind::Qubit,
        }
    }

    pub fn oscillator(frequency: f64, coupling: f64, n_max: usize) -> Self {
        Self {
            frequency,
            coupling,
            kind: ModeKind::Oscillator { n_max },
        }
    }

    /// `X` in the single-mode number basis.
    fn coupling_matrix(&self) -> CMatrix {
        let n = self.kind.levels();
        CMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                let hi = i.max(j) as f64;
                match self.kind {
                    ModeKind::Qubit => C64::new(1.0, 0.0),
                    ModeKind::Oscillator { .. } => C64::new(hi.sqrt(), 0.0),
                }
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }
}

#[derive(Clone, Debug)]
pub struct DiscreteBath {
    modes: Vec<BathMode>,
    beta: Option<f64>,
    offset: f64,
    energies: Vec<f64>,
    populations: Vec<f64>,
    b: CMatrix,
}

impl DiscreteBath {
    /// `beta = None` starts the bath in its ground state, otherwise in the thermal state.
    pub fn new(modes: Vec<BathMode>, beta: Option<f64>, offset: f64) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidArgument(
                "a discrete bath needs at least one mode".into(),
            ));
        }
        for m in &modes {
            if !(m.frequency > 0.0) || !m.coupling.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "bath modes need a positive frequency and finite coupling: {m:?}"
                )));
            }
            if let ModeKind::Oscillator { n_max } = m.kind {
                if n_max == 0 {
                    return Err(Error::InvalidArgument(
                        "oscillator truncation must be >= 1".into(),
                    ));
                }
            }
        }
        if let Some(b) = beta {
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "inverse temperature must be positive, got {b}"
                )));
            }
        }
        let dim = modes
            .iter()
            .try_fold(1usize, |acc, m| acc.checked_mul(m.kind.levels()))
            .unwrap_or(usize::MAX);
        if dim > MAX_BATH_DIM {
            return Err(Error::Oversize {
                dim,
                limit: MAX_BATH_DIM,
            });
        }

        let mut energies = vec![0.0; dim];
        let mut b = CMatrix::identity(dim, dim) * C64::new(offset, 0.0);
        let mut stride = dim;
        for m in &modes {
            let levels = m.kind.levels();
            stride /= levels;
            for (idx, e) in energies.iter_mut().enumerate() {
                *e += m.frequency * ((idx / stride) % levels) as f64;
            }
            let left = CMatrix::identity(dim / (stride * levels), dim / (stride * levels));
            let right = CMatrix::identity(stride, stride);
            let x = left.kronecker(&m.coupling_matrix()).kronecker(&right);
            b += x * C64::new(m.coupling, 0.0);
        }

        let populations = match beta {
            None => {
                let mut p = vec![0.0; dim];
                p[0] = 1.0;
                p
            }
            Some(beta) => {
                let w: Vec<f64> = energies.iter().map(|e| (-beta * e).exp()).collect();
                let z: f64 = w.iter().sum();
                w.into_iter().map(|x| x / z).collect()
            }
        };

        Ok(Self {
            modes,
            beta,
            offset,
            energies,
            populations,
            b,
        })
    }

    pub fn modes(&self) -> &[BathMode] {
        &self.modes
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    pub fn h_b(&self) -> Operator {
        let d = self.dim();
        Operator::new(CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(self.energies[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
        .expect("square")
    }

    pub fn b_operator(&self) -> Operator {
        Operator::new(self.b.clone()).expect("square")
    }

    pub fn rho0(&self) -> Operator {
        let d = self.dim();
        Operator::new(CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(self.populations[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
        .expect("square")
    }

    /// Heisenberg-picture coupling operator `e^{iH_B t} B e^{−iH_B t}`.
    pub fn b_at(&self, t: f64) -> CMatrix {
        let d = self.dim();
        CMatrix::from_fn(d, d, |a, c| {
            self.b[(a, c)] * C64::from_polar(1.0, (self.energies[a] - self.energies[c]) * t)
        })
    }

    pub fn mean(&self) -> f64 {
        self.populations
            .iter()
            .enumerate()
            .map(|(a, p)| p * self.b[(a, a)].re)
            .sum()
    }

    /// Same bath with every coupling (and the offset) multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let modes = self
            .modes
            .iter()
            .map(|m| BathMode {
                coupling: m.coupling * lambda,
                ..*m
            })
            .collect();
        Self::new(modes, self.beta, self.offset * lambda).expect("scaling keeps a valid bath")
    }

    /// Exact stationary correlation of the fluctuation `B − ⟨B⟩`.
    pub fn correlation(&self) -> BathCorrelation {
        let d = self.dim();
        let mut weights = Vec::new();
        let mut frequencies = Vec::new();
        for a in 0..d {
            let p = self.populations[a];
            if p == 0.0 {
                continue;
            }
            for c in 0..d {
                let w = p * self.b[(a, c)].norm_sqr();
                if w != 0.0 {
                    weights.push(w);
                    frequencies.push(self.energies[c] - self.energies[a]);
                }
            }
        }
        BathCorrelation::from_discrete(
            DiscreteSpectrum {
                weights,
                frequencies,
            },
            self.beta,
            self.mean(),
        )
    }

    /// Population of the highest kept level, maximized over oscillator modes,
    /// for a diagonal-basis bath density matrix.
    pub fn top_level_population(&self, rho_b: &CMatrix) -> f64 {
        let d = self.dim();
        let mut stride = d;
        let mut worst = 0.0f64;
        for m in &self.modes {
            let levels = m.kind.levels();
            stride /= levels;
            if let ModeKind::Oscillator { n_max } = m.kind {
                let p: f64 = (0..d)
                    .filter(|idx| (idx / stride) % levels == n_max)
                    .map(|idx| rho_b[(idx, idx)].re)
                    .sum();
                worst = worst.max(p);
            }
        }
        worst
    }

    /// Shortest time after which bath correlations can revive: `2π` over the smallest
    /// nonzero mode frequency or frequency difference.
    pub fn recurrence_time(&self) -> f64 {
        let mut gaps: Vec<f64> = self.modes.iter().map(|m| m.frequency).collect();
        for (i, a) in self.modes.iter().enumerate() {
            for b in &self.modes[i + 1..] {
                gaps.push((a.frequency - b.frequency).abs());
            }
        }
        let min = gaps
            .into_iter()
            .filter(|g| *g > 1e-12)
            .fold(f64::INFINITY, f64::min);
        2.0 * PI / min
    }
}

/// `ℬ^σ X = (B X + σ X B)/√2`
fn apply_sigma(sigma: Sigma, b: &CMatrix, x: &CMatrix) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match sigma {
        Sigma::Plus => (b * x + x * b) * C64::new(s, 0.0),
        Sigma::Minus => (b * x - x * b) * C64::new(s, 0.0),
    }
}

/// `Tr_B[ℬ^{σ[0]}(t[0]) ⋯ ℬ^{σ[n−1]}(t[n−1]) ρ_B]` with `t[0] > t[1] > … `.
pub fn exact_multipoint_moment(
    bath: &DiscreteBath,
    sigmas: &[Sigma],
    times: &[f64],
) -> Result<C64> {
    if sigmas.len() != times.len() {
        return Err(Error::DimensionMismatch {
            expected: sigmas.len(),
            got: times.len(),
        });
    }
    if times.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::NonDescendingTimes);
    }
    let mut x = bath.rho0().into_matrix();
    for (sigma, t) in sigmas.iter().zip(times).rev() {
        x = apply_sigma(*sigma, &bath.b_at(*t), &x);
    }
    Ok(x.trace())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_qubits() -> DiscreteBath {
        DiscreteBath::new(
            vec![BathMode::qubit(1.0, 0.4), BathMode::qubit(1.7, 0.25)],
            Some(1.3),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn initial_state_is_a_density_matrix() {
        for bath in [
            two_qubits(),
            DiscreteBath::new(vec![BathMode::oscillator(1.0, 0.3, 6)], None, 0.0).unwrap(),
        ] {
            let rho = bath.rho0();
            assert!((rho.trace().re - 1.0).abs() < 1e-12);
            assert!(bath.populations().iter().all(|p| *p >= 0.0));
            assert!(bath.b_operator().is_hermitian(1e-14));
        }
    }

    #[test]
    fn oversize_is_rejected() {
        let modes = vec![BathMode::qubit(1.0, 0.1); 9];
        assert!(matches!(
            DiscreteBath::new(modes, None, 0.0),
            Err(Error::Oversize { dim: 512, .. })
        ));
    }

    #[test]
    fn leading_minus_and_zero_mean() {
        let bath = two_qubits();
        let v = exact_multipoint_moment(&bath, &[Sigma::Minus, Sigma::Plus], &[0.9, 0.2]).unwrap();
        assert!(v.norm() < 1e-15);
        let ground = DiscreteBath::new(vec![BathMode::qubit(1.0, 0.5)], None, 0.0).unwrap();
        let v = exact_multipoint_moment(&ground, &[Sigma::Plus], &[0.3]).unwrap();
        assert!(v.norm() < 1e-15);
        assert!(exact_multipoint_moment(&bath, &[Sigma::Plus, Sigma::Plus], &[0.2, 0.9]).is_err());
        assert!(exact_multipoint_moment(&bath, &[Sigma::Plus, Sigma::Plus], &[0.2, 0.2]).is_err());
    }

    #[test]
    fn mean_enters_single_point_moment() {
        let bath = DiscreteBath::new(vec![BathMode::qubit(1.0, 0.5)], None, 0.3).unwrap();
        assert!((bath.mean() - 0.3).abs() < 1e-15);
        let v = exact_multipoint_moment(&bath, &[Sigma::Plus], &[0.3]).unwrap();
        assert!((v - C64::new(0.3 * 2f64.sqrt(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn heisenberg_operator_matches_dense_exponential() {
        let bath = two_qubits();
        let t = 0.77;
        let h = bath.h_b().into_matrix();
        let u = crate::liouville::expm(&(h * C64::new(0.0, -t))).unwrap();
        let direct = u.adjoint() * bath.b_operator().matrix() * &u;
        assert!((direct - bath.b_at(t)).norm() < 1e-13);
    }

    #[test]
    fn correlation_matches_trace_formula() {
        let bath = DiscreteBath::new(
            vec![BathMode::qubit(1.0, 0.4), BathMode::oscillator(0.6, 0.2, 4)],
            Some(0.9),
            0.1,
        )
        .unwrap();
        let corr = bath.correlation();
        let tau = 1.37;
        let rho = bath.rho0().into_matrix();
        let m = bath.mean();
        let direct =
            (bath.b_at(tau) * bath.b_operator().matrix() * &rho).trace() - C64::new(m * m, 0.0);
        assert!((corr.eval(tau).unwrap() - direct).norm() < 1e-13);
    }

    #[test]
    fn recurrence_time_single_mode() {
        let bath = DiscreteBath::new(vec![BathMode::qubit(2.0, 0.1)], None, 0.0).unwrap();
        assert!((bath.recurrence_time() - PI).abs() < 1e-15);
    }
}
