//! Exact reference for small discrete baths.
//!
//! The total Hamiltonian `H = H_S ⊗ 𝟙 + 𝟙 ⊗ H_B + λ S ⊗ B` (system factor most
//! significant) is diagonalized once; states evolve as `e^{−iH(t−t₀)}` and are
//! rotated to the interaction picture of `H_S + H_B`, referenced to `t = 0`.
//!
//! The reduced dynamical map follows from tomography over the `d²` matrix units, its
//! time derivative from `Λ̇ X = U_S† Tr_B(−i[λ S⊗B, ρ_X(t)]) U_S`, and the exact
//! generator from `𝒢 = Λ̇ Λ⁻¹`.

use std::ops::Range;

use rayon::prelude::*;

use crate::bath::DiscreteBath;
use crate::error::{Error, Result};
use crate::liouville::{
    partial_trace_second, vec, CMatrix, InteractionFrame, Operator, Picture, SuperOperator,
    SystemModel, SystemState, C64,
};
use crate::quadrature::centered_derivative;
use crate::resummation::regularized_inverse_with_diagnostics;
use crate::tcl::{DynamicalMap, TimeGrid};

/// Total Hilbert-space dimension accepted by the oracle.
pub const MAX_TOTAL_DIM: usize = 256;

/// Tolerance for the assembled-versus-verified total Hamiltonian.
const ASSEMBLY_TOL: f64 = 1e-12;

/// Comparisons start this many points after `t₀` and stop this many before the end.
pub const WINDOW_MARGIN: usize = 2;

#[derive(Clone, Debug)]
pub struct FullModel {
    system: SystemModel,
    bath: DiscreteBath,
    lambda: f64,
    h_total: Operator,
    coupling: CMatrix,
    frame: InteractionFrame,
    system_frame: InteractionFrame,
}

impl FullModel {
    pub fn new(system: SystemModel, bath: DiscreteBath, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("coupling scale {lambda}")));
        }
        let d_s = system.dim();
        let d_b = bath.dim();
        let dim = d_s * d_b;
        if dim > MAX_TOTAL_DIM {
            return Err(Error::Oversize {
                dim,
                limit: MAX_TOTAL_DIM,
            });
        }
        let id_s = Operator::identity(d_s);
        let id_b = Operator::identity(d_b);
        let b = bath.b_operator();
        let coupling = system.s.kron(&b).into_matrix() * C64::new(lambda, 0.0);
        let h_total = Operator::new(
            system.h_s.kron(&id_b).into_matrix() + id_s.kron(&bath.h_b()).into_matrix() + &coupling,
        )?;
        verify_assembly(&system, &bath, lambda, h_total.matrix())?;
        let frame = InteractionFrame::new(&h_total)?;
        let system_frame = InteractionFrame::new(&system.h_s)?;
        Ok(Self {
            system,
            bath,
            lambda,
            h_total,
            coupling,
            frame,
            system_frame,
        })
    }

    pub fn system(&self) -> &SystemModel {
        &self.system
    }

    pub fn bath(&self) -> &DiscreteBath {
        &self.bath
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn h_total(&self) -> &Operator {
        &self.h_total
    }

    pub fn d_s(&self) -> usize {
        self.system.dim()
    }

    pub fn d_b(&self) -> usize {
        self.bath.dim()
    }

    pub fn rho_b0(&self) -> Operator {
        self.bath.rho0()
    }

    /// Frame of `H_S`, used to move reduced states between pictures.
    pub fn system_frame(&self) -> &InteractionFrame {
        &self.system_frame
    }

    /// `ρ_S ⊗ ρ_B(t₀)`
    pub fn product_state(&self, rho_s: &Operator) -> Result<Operator> {
        if rho_s.dim() != self.d_s() {
            return Err(Error::DimensionMismatch {
                expected: self.d_s(),
                got: rho_s.dim(),
            });
        }
        Ok(rho_s.kron(&self.rho_b0()))
    }

    /// `e^{−iHτ} X e^{iHτ}`
    pub fn evolve(&self, x: &CMatrix, tau: f64) -> CMatrix {
        let u = self.frame.propagator(tau);
        u.matrix() * x * u.matrix().adjoint()
    }

    /// `A ⊗ 𝟙_B` applied from the left.
    fn left_system(&self, a: &Operator, x: &CMatrix) -> CMatrix {
        a.kron(&Operator::identity(self.d_b())).into_matrix() * x
    }

    /// `U_S(t)† X U_S(t)` with `U_S = e^{−iH_S t}`.
    fn to_interaction(&self, x: &CMatrix, t: f64) -> CMatrix {
        let u = self.system_frame.propagator(t);
        u.matrix().adjoint() * x * u.matrix()
    }

    fn to_schrodinger(&self, x: &CMatrix, t: f64) -> CMatrix {
        let u = self.system_frame.propagator(t);
        u.matrix() * x * u.matrix().adjoint()
    }
}

fn verify_assembly(
    system: &SystemModel,
    bath: &DiscreteBath,
    lambda: f64,
    h: &CMatrix,
) -> Result<()> {
    let d_s = system.dim();
    let d_b = bath.dim();
    let b = bath.b_operator();
    let energies = bath.energies();
    let mut worst = 0.0f64;
    for i in 0..d_s {
        for a in 0..d_b {
            for j in 0..d_s {
                for c in 0..d_b {
                    let mut expected = system.s.matrix()[(i, j)] * b.matrix()[(a, c)] * lambda;
                    if a == c {
                        expected += system.h_s.matrix()[(i, j)];
                    }
                    if i == j && a == c {
                        expected += C64::new(energies[a], 0.0);
                    }
                    worst = worst.max((h[(i * d_b + a, j * d_b + c)] - expected).norm());
                }
            }
        }
    }
    if worst > ASSEMBLY_TOL {
        return Err(Error::Numerical(format!(
            "total Hamiltonian assembly deviates by {worst:.3e}"
        )));
    }
    Ok(())
}

/// Reduced state `Tr_B ρ`.
pub fn partial_trace_bath(
    rho_total: &Operator,
    d_s: usize,
    picture: Picture,
) -> Result<SystemState> {
    let d = rho_total.dim();
    if d_s == 0 || !d.is_multiple_of(d_s) {
        return Err(Error::DimensionMismatch {
            expected: d_s,
            got: d,
        });
    }
    let reduced = partial_trace_second(rho_total.matrix(), d_s, d / d_s)?;
    SystemState::new(Operator::new(reduced)?, picture)
}

/// Total states on a grid, kept in the Schrödinger picture.
#[derive(Clone, Debug)]
pub struct FullTrajectory {
    grid: TimeGrid,
    states: Vec<Operator>,
}

impl FullTrajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn schrodinger(&self) -> &[Operator] {
        &self.states
    }

    /// `U₀(t)† ρ(t) U₀(t)` with `U₀ = e^{−i(H_S + H_B)t}`.
    pub fn interaction(&self, full: &FullModel, k: usize) -> Operator {
        let t = self.grid.t(k);
        let u0 = full
            .system_frame
            .propagator(t)
            .kron(&diagonal_propagator(full.bath.energies(), t));
        &(&u0.dagger() * &self.states[k]) * &u0
    }

    /// Interaction-picture reduced state at `t_k`.
    pub fn reduced(&self, full: &FullModel, k: usize) -> Result<SystemState> {
        let rho = partial_trace_second(self.states[k].matrix(), full.d_s(), full.d_b())?;
        let rho = full.to_interaction(&rho, self.grid.t(k));
        SystemState::new(Operator::new(rho)?, Picture::Interaction)
    }

    pub fn max_trace_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|r| (r.trace() - C64::new(1.0, 0.0)).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_purity_drift(&self) -> f64 {
        let purity = |r: &Operator| (r.matrix() * r.matrix()).trace().re;
        let p0 = purity(&self.states[0]);
        self.states
            .iter()
            .map(|r| (purity(r) - p0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_energy_drift(&self, full: &FullModel) -> f64 {
        let energy = |r: &Operator| (full.h_total.matrix() * r.matrix()).trace().re;
        let e0 = energy(&self.states[0]);
        self.states
            .iter()
            .map(|r| (energy(r) - e0).abs())
            .fold(0.0, f64::max)
    }
}

fn diagonal_propagator(energies: &[f64], t: f64) -> Operator {
    let d = energies.len();
    Operator::new(CMatrix::from_fn(d, d, |i, j| {
        if i == j {
            C64::from_polar(1.0, -energies[i] * t)
        } else {
            C64::new(0.0, 0.0)
        }
    }))
    .expect("square")
}

/// Exact evolution of a Schrödinger-picture total state given at `t₀`.
pub fn propagate_full(
    full: &FullModel,
    rho_total0: &Operator,
    grid: &TimeGrid,
) -> Result<FullTrajectory> {
    let d = full.d_s() * full.d_b();
    if rho_total0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rho_total0.dim(),
        });
    }
    let states = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            Operator::new(full.evolve(rho_total0.matrix(), grid.t(k) - grid.t0())).expect("square")
        })
        .collect();
    Ok(FullTrajectory {
        grid: *grid,
        states,
    })
}

/// Anything that supplies interaction-picture maps `Λ(t_k, t₀)` on a grid.
pub trait MapSource {
    fn grid(&self) -> &TimeGrid;
    fn map_at(&self, k: usize) -> &SuperOperator;
}

impl MapSource for DynamicalMap {
    fn grid(&self) -> &TimeGrid {
        DynamicalMap::grid(self)
    }

    fn map_at(&self, k: usize) -> &SuperOperator {
        self.at(k)
    }
}

/// `Λ_exact`, `Λ̇_exact` and `𝒢_exact` on a grid.
#[derive(Clone, Debug)]
pub struct ExactMap {
    grid: TimeGrid,
    maps: Vec<SuperOperator>,
    derivatives: Vec<SuperOperator>,
    generators: Vec<SuperOperator>,
    conditions: Vec<f64>,
}

impl MapSource for ExactMap {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn map_at(&self, k: usize) -> &SuperOperator {
        &self.maps[k]
    }
}

impl ExactMap {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn maps(&self) -> &[SuperOperator] {
        &self.maps
    }

    pub fn derivatives(&self) -> &[SuperOperator] {
        &self.derivatives
    }

    pub fn generators(&self) -> &[SuperOperator] {
        &self.generators
    }

    /// Condition number of `Λ_exact(t_k)`.
    pub fn conditions(&self) -> &[f64] {
        &self.conditions
    }

    pub fn max_trace_preservation_defect(&self) -> f64 {
        self.maps
            .iter()
            .map(SuperOperator::trace_preservation_defect)
            .fold(0.0, f64::max)
    }

    /// `max_k ‖Λ̇_FD − 𝒢 Λ‖_F` with centered differences, over interior points.
    pub fn finite_difference_residual(&self) -> Result<f64> {
        let fd = centered_derivative(&self.maps, self.grid.dt())?;
        let n = self.maps.len();
        Ok((1..n - 1)
            .map(|k| (&fd[k] - &(&self.generators[k] * &self.maps[k])).norm())
            .fold(0.0, f64::max))
    }
}

/// Process tomography of the reduced dynamics over the `d_S²` matrix units.
///
/// Fails with [`Error::SingularMap`] when `Λ(t_k)` loses rank beyond `cutoff`.
pub fn exact_dynamical_map(full: &FullModel, grid: &TimeGrid, cutoff: f64) -> Result<ExactMap> {
    let d = full.d_s();
    let d2 = d * d;
    let t0 = grid.t0();
    let columns0: Vec<CMatrix> = (0..d2)
        .map(|idx| {
            let unit = Operator::matrix_unit(d, idx % d, idx / d);
            let schrodinger = full.to_schrodinger(unit.matrix(), t0);
            full.product_state(&Operator::new(schrodinger).expect("square"))
                .expect("dimensions checked")
                .into_matrix()
        })
        .collect();
    let minus_i = C64::new(0.0, -1.0);
    let per_time = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let t = grid.t(k);
            let u = full.frame.propagator(t - t0).into_matrix();
            let u_dag = u.adjoint();
            let mut lam = CMatrix::zeros(d2, d2);
            let mut lam_dot = CMatrix::zeros(d2, d2);
            for (col, x0) in columns0.iter().enumerate() {
                let rho = &u * x0 * &u_dag;
                let comm = (&full.coupling * &rho - &rho * &full.coupling) * minus_i;
                let reduced = partial_trace_second(&rho, d, full.d_b())?;
                let reduced_dot = partial_trace_second(&comm, d, full.d_b())?;
                let r = Operator::new(full.to_interaction(&reduced, t))?;
                let r_dot = Operator::new(full.to_interaction(&reduced_dot, t))?;
                lam.set_column(col, &vec(&r));
                lam_dot.set_column(col, &vec(&r_dot));
            }
            let lam = SuperOperator::from_matrix(d, lam)?;
            let lam_dot = SuperOperator::from_matrix(d, lam_dot)?;
            let inv = regularized_inverse_with_diagnostics(&lam, cutoff)?;
            if inv.rank < d2 {
                return Err(Error::SingularMap {
                    t,
                    reason: format!("rank {} of {d2} (condition above 1/{cutoff:e})", inv.rank),
                });
            }
            let g = &lam_dot * &inv.inverse;
            Ok((lam, lam_dot, g, inv.condition))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut maps = Vec::with_capacity(grid.len());
    let mut derivatives = Vec::with_capacity(grid.len());
    let mut generators = Vec::with_capacity(grid.len());
    let mut conditions = Vec::with_capacity(grid.len());
    for (m, md, g, c) in per_time {
        maps.push(m);
        derivatives.push(md);
        generators.push(g);
        conditions.push(c);
    }
    Ok(ExactMap {
        grid: *grid,
        maps,
        derivatives,
        generators,
        conditions,
    })
}

/// Grid indices safe for oracle comparisons: `WINDOW_MARGIN` points in from both ends
/// and `t − t₀` below half the bath recurrence time.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonWindow {
    pub range: Range<usize>,
    pub recurrence_time: f64,
}

pub fn recurrence_window(grid: &TimeGrid, bath: &DiscreteBath) -> Result<ComparisonWindow> {
    let recurrence_time = bath.recurrence_time();
    let start = WINDOW_MARGIN;
    let last = grid.n_steps().saturating_sub(WINDOW_MARGIN);
    let end = (start..=last)
        .take_while(|&k| grid.t(k) - grid.t0() < 0.5 * recurrence_time)
        .last()
        .map_or(start, |k| k + 1);
    if end <= start {
        return Err(Error::InvalidArgument(format!(
            "no grid points in the comparison window (recurrence time {recurrence_time:.4})"
        )));
    }
    Ok(ComparisonWindow {
        range: start..end,
        recurrence_time,
    })
}

/// `max_{k ∈ window} ‖𝒢_exact(t_k) − approx(t_k)‖_F`
pub fn max_generator_distance(
    exact: &ExactMap,
    approx: &[SuperOperator],
    window: &ComparisonWindow,
) -> Result<f64> {
    if approx.len() != exact.generators.len() {
        return Err(Error::GridMismatch(format!(
            "{} approximate values for {} grid points",
            approx.len(),
            exact.generators.len()
        )));
    }
    Ok(window
        .range
        .clone()
        .map(|k| (&exact.generators[k] - &approx[k]).norm())
        .fold(0.0, f64::max))
}

/// `values[i] / values[i + 1]`, the ratios observed when the coupling is halved.
pub fn successive_ratios(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[0] / w[1]).collect()
}

/// `Tr{A 𝒰(t₂,t₁) B 𝒰(t₁,t₀) C ρ₀}` with `ρ₀ = ρ_S(t₀) ⊗ ρ_B`, Schrödinger picture.
pub fn exact_multipoint_correlation(
    full: &FullModel,
    rho_s0: &Operator,
    ops: [&Operator; 3],
    times: [f64; 3],
) -> Result<C64> {
    let [t2, t1, t0] = times;
    if t2 < t1 || t1 < t0 {
        return Err(Error::NonDescendingTimes);
    }
    let [a, b, c] = ops;
    let x = full.left_system(c, full.product_state(rho_s0)?.matrix());
    let x = full.evolve(&x, t1 - t0);
    let x = full.left_system(b, &x);
    let x = full.evolve(&x, t2 - t1);
    Ok(full.left_system(a, &x).trace())
}

/// `Tr{A 𝒰(t,t₀) B ρ₀}`
pub fn exact_two_point(
    full: &FullModel,
    rho_s0: &Operator,
    a: &Operator,
    b: &Operator,
    t: f64,
    t0: f64,
) -> Result<C64> {
    let id = Operator::identity(full.d_s());
    exact_multipoint_correlation(full, rho_s0, [a, b, &id], [t, t0, t0])
}

/// Schrödinger-picture map `Λ(t_k, t₀) = 𝒰_S(t_k) Λ_I(t_k) 𝒰_S(t₀)†`.
fn schrodinger_map(source: &dyn MapSource, frame: &InteractionFrame, k: usize) -> SuperOperator {
    let grid = source.grid();
    let u_k = SuperOperator::unitary_conjugation(&frame.propagator(grid.t(k)));
    let u_0 = SuperOperator::unitary_conjugation(&frame.propagator(-grid.t0()));
    &(&u_k * source.map_at(k)) * &u_0
}

fn grid_index(grid: &TimeGrid, t: f64) -> Result<usize> {
    grid.index_of(t)
        .ok_or_else(|| Error::InvalidArgument(format!("t = {t} is not a grid point")))
}

/// `Tr_S{A Λ(t₂,t₁) B Λ(t₁,t₀) C ρ_S(t₀)}` with `Λ(t₂,t₁) = Λ(t₂,t₀) Λ(t₁,t₀)⁻¹`.
///
/// Exact only when system and bath stay uncorrelated. `t₂` and `t₁` must be grid points.
pub fn factorized_multipoint(
    source: &dyn MapSource,
    frame: &InteractionFrame,
    rho_s0: &Operator,
    ops: [&Operator; 3],
    times: [f64; 2],
) -> Result<C64> {
    let grid = *source.grid();
    let [t2, t1] = times;
    if t2 < t1 {
        return Err(Error::NonDescendingTimes);
    }
    let (k2, k1) = (grid_index(&grid, t2)?, grid_index(&grid, t1)?);
    let [a, b, c] = ops;
    let lam1 = schrodinger_map(source, frame, k1);
    let lam2 = schrodinger_map(source, frame, k2);
    let between = if k1 == k2 {
        SuperOperator::identity(lam1.dim())
    } else {
        let inv = lam1.try_inverse().ok_or_else(|| Error::SingularMap {
            t: t1,
            reason: "Λ(t₁, t₀) is not invertible".into(),
        })?;
        &lam2 * &inv
    };
    let x = lam1.apply(&(c * rho_s0))?;
    let x = between.apply(&(b * &x))?;
    Ok((a * &x).trace())
}

/// `Tr_S{A Λ(t_k, t₀) B ρ_S(t₀)}`
pub fn map_two_point(
    source: &dyn MapSource,
    frame: &InteractionFrame,
    rho_s0: &Operator,
    a: &Operator,
    b: &Operator,
    k: usize,
) -> Result<C64> {
    let lam = schrodinger_map(source, frame, k);
    let x = lam.apply(&(b * rho_s0))?;
    Ok((a * &x).trace())
}
