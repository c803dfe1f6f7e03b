//! Fixed-step fourth-order Runge–Kutta integration of `ρ̇ = 𝒢(t) ρ` and `Λ̇ = 𝒢(t) Λ`
//! in the interaction picture. The generator is known on the grid only; its midpoint
//! values come from cubic interpolation.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::liouville::{
    unvec, vec, CMatrix, InteractionFrame, Operator, Picture, SuperOperator, SystemState, C64,
};
use crate::quadrature::midpoint;

use super::grid::TimeGrid;

fn check_generator(generator: &[SuperOperator], grid: &TimeGrid) -> Result<usize> {
    if generator.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "generator has {} points, grid has {}",
            generator.len(),
            grid.len()
        )));
    }
    let d = generator[0].dim();
    if generator.iter().any(|g| g.dim() != d) {
        return Err(Error::InvalidArgument("mixed generator dimensions".into()));
    }
    Ok(d)
}

/// One RK4 step of `ẋ = G x` with `G` given at both ends and the midpoint.
fn rk4_step(x: &CMatrix, h: f64, g0: &CMatrix, gm: &CMatrix, g1: &CMatrix) -> CMatrix {
    let half = C64::new(0.5 * h, 0.0);
    let full = C64::new(h, 0.0);
    let k1 = g0 * x;
    let k2 = gm * (x + &k1 * half);
    let k3 = gm * (x + &k2 * half);
    let k4 = g1 * (x + &k3 * full);
    x + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0)
}

pub(crate) fn integrate(generator: &[SuperOperator], grid: &TimeGrid, x0: CMatrix) -> Vec<CMatrix> {
    let h = grid.dt();
    let mut out = Vec::with_capacity(grid.len());
    out.push(x0);
    for k in 0..grid.n_steps() {
        let gm = midpoint(generator, k);
        let next = rk4_step(
            &out[k],
            h,
            generator[k].matrix(),
            gm.matrix(),
            generator[k + 1].matrix(),
        );
        out.push(next);
    }
    out
}

/// Interaction-picture states on a grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    grid: TimeGrid,
    states: Vec<SystemState>,
}

impl Trajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn states(&self) -> &[SystemState] {
        &self.states
    }

    /// `max_k |Tr ρ(t_k) − 1|`
    pub fn max_trace_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (s.trace() - C64::new(1.0, 0.0)).norm())
            .fold(0.0, f64::max)
    }

    /// States rotated to the Schrödinger picture, `ρ_S(t) = e^{−iH_S t} ρ_I(t) e^{iH_S t}`.
    pub fn schrodinger(&self, frame: &InteractionFrame) -> Vec<SystemState> {
        self.states
            .iter()
            .enumerate()
            .map(|(k, s)| s.to_picture(frame, self.grid.t(k), Picture::Schrodinger))
            .collect()
    }
}

/// Propagates `rho0`, taken as the interaction-picture state at `t0`.
///
/// A Schrödinger-picture `rho0` is accepted only when `t0 = 0`, where the pictures agree.
pub fn propagate(
    generator: &[SuperOperator],
    rho0: &SystemState,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    let d = check_generator(generator, grid)?;
    if rho0.rho.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rho0.rho.dim(),
        });
    }
    if rho0.picture == Picture::Schrodinger && grid.t0() != 0.0 {
        return Err(Error::InvalidArgument(
            "initial state must be given in the interaction picture when t0 != 0".into(),
        ));
    }
    let v0 = vec(&rho0.rho);
    let x0 = CMatrix::from_column_slice(d * d, 1, v0.as_slice());
    let xs = integrate(generator, grid, x0);
    let states = xs
        .into_iter()
        .map(|x| {
            let v = DVector::from_column_slice(x.as_slice());
            Ok(SystemState {
                rho: unvec(&v, d)?,
                picture: Picture::Interaction,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        grid: *grid,
        states,
    })
}

/// Largest Frobenius distance between the trajectory on `grid` and the one on the
/// grid with twice the step, compared at the shared points.
pub fn step_halving_error(
    generator: &[SuperOperator],
    rho0: &SystemState,
    grid: &TimeGrid,
) -> Result<f64> {
    let coarse_grid = grid.coarsened(2)?;
    let coarse_gen: Vec<SuperOperator> = generator.iter().step_by(2).cloned().collect();
    let fine = propagate(generator, rho0, grid)?;
    let coarse = propagate(&coarse_gen, rho0, &coarse_grid)?;
    Ok(coarse
        .states()
        .iter()
        .enumerate()
        .map(|(k, s)| (&s.rho - &fine.states()[2 * k].rho).frobenius_norm())
        .fold(0.0, f64::max))
}

/// `Λ(t_k)` on a grid, interaction picture, `Λ(t₀) = 𝟙`.
#[derive(Clone, Debug)]
pub struct DynamicalMap {
    grid: TimeGrid,
    maps: Vec<SuperOperator>,
}

impl DynamicalMap {
    pub fn new(grid: TimeGrid, maps: Vec<SuperOperator>) -> Result<Self> {
        if maps.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} maps for {} grid points",
                maps.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, maps })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.maps[0].dim()
    }

    pub fn maps(&self) -> &[SuperOperator] {
        &self.maps
    }

    pub fn at(&self, k: usize) -> &SuperOperator {
        &self.maps[k]
    }

    pub fn max_trace_preservation_defect(&self) -> f64 {
        self.maps
            .iter()
            .map(SuperOperator::trace_preservation_defect)
            .fold(0.0, f64::max)
    }

    /// Applies `Λ(t_k)` to an operator.
    pub fn apply(&self, k: usize, x: &Operator) -> Result<Operator> {
        self.maps[k].apply(x)
    }
}

/// Solves `Λ̇ = 𝒢 Λ`, `Λ(t₀) = 𝟙`.
pub fn dynamical_map_from_generator(
    generator: &[SuperOperator],
    grid: &TimeGrid,
) -> Result<DynamicalMap> {
    let d = check_generator(generator, grid)?;
    let xs = integrate(generator, grid, CMatrix::identity(d * d, d * d));
    DynamicalMap::new(
        *grid,
        xs.into_iter()
            .map(|m| SuperOperator::from_matrix_unchecked(d, m))
            .collect(),
    )
}
