//! Nonperturbative resummation of a generator series.
//!
//! With `ℓ` the lowest non-vanishing order, the reduced series
//! `G̃ = [𝒢^{(ℓ)}]⁺ 𝒢 = 1 + Σ_{n≥1} G̃⁽ⁿ⁾`, `G̃⁽ⁿ⁾ = [𝒢^{(ℓ)}]⁺ 𝒢^{(ℓ+n)}`, has its own
//! time-local generator `𝒢₂ = (d G̃/dt) G̃⁻¹`, expanded order by order with the same
//! recursion that turns moments into TCL generators. The resummed generator is
//!
//! ```text
//! 𝒢_NP(t) = 𝒢^{(ℓ)}(t) X(t),    Ẋ = 𝒢₂ X,    X(t₀) = 1.
//! ```
//!
//! `𝒢^{(ℓ)}(t₀) = 0`, so the pseudo-inverse is meaningless close to `t₀`. On the start
//! segment `[t₀, t₀ + ε]` the auxiliary propagator is taken to first order,
//! `X = 1 + ∫_{t₀}^{t} 𝒢₂`, and RK4 takes over from `t₀ + ε`.

use nalgebra::{DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::liouville::{CMatrix, SuperOperator, C64};
use crate::quadrature::{centered_derivative, centered_derivative4, prefix_integrals};
use crate::tcl::propagate::integrate;
use crate::tcl::{generator_via_recursion, GeneratorSeries, MomentSeries, TimeGrid};

pub const DEFAULT_SVD_CUTOFF: f64 = 1e-10;
pub const DEFAULT_START_OFFSET: usize = 5;

/// Finite-difference stencil for `dG̃/dt`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DerivativeStencil {
    /// Three-point, second order.
    Second,
    /// Five-point, fourth order; matches the order of the quadrature and of RK4.
    #[default]
    Fourth,
}

impl DerivativeStencil {
    fn apply(self, values: &[SuperOperator], dt: f64) -> Result<Vec<SuperOperator>> {
        match self {
            Self::Second => centered_derivative(values, dt),
            Self::Fourth => centered_derivative4(values, dt),
        }
    }
}

/// Orders whose largest norm is below this fraction of the largest order are treated as zero.
pub const VANISHING_TOL: f64 = 1e-12;

/// Pseudo-inverse together with what was kept.
#[derive(Clone, Debug)]
pub struct PseudoInverse {
    pub inverse: SuperOperator,
    pub rank: usize,
    /// `σ_max / σ_min` over the retained singular values.
    pub condition: f64,
}

/// SVD pseudo-inverse dropping singular values below `cutoff · σ_max`.
pub fn regularized_inverse(a: &SuperOperator, cutoff: f64) -> Result<SuperOperator> {
    regularized_inverse_with_diagnostics(a, cutoff).map(|p| p.inverse)
}

pub fn regularized_inverse_with_diagnostics(
    a: &SuperOperator,
    cutoff: f64,
) -> Result<PseudoInverse> {
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "SVD cutoff must lie in (0, 1), got {cutoff}"
        )));
    }
    let n = a.matrix().nrows();
    let (sigma, pairs) = singular_triplets(a.matrix());
    let s_max = sigma.iter().copied().fold(0.0, f64::max);
    if !(s_max > 0.0) || !s_max.is_finite() {
        return Err(Error::NoRetainedSingularValues);
    }
    let threshold = cutoff * s_max;
    let mut inverse = CMatrix::zeros(n, n);
    let mut rank = 0;
    let mut s_min = s_max;
    for (&s, (u, v)) in sigma.iter().zip(&pairs) {
        if s <= threshold {
            continue;
        }
        rank += 1;
        s_min = s_min.min(s);
        inverse += v * u.adjoint() * C64::new(1.0 / s, 0.0);
    }
    Ok(PseudoInverse {
        inverse: SuperOperator::from_matrix_unchecked(a.dim(), inverse),
        rank,
        condition: s_max / s_min,
    })
}

/// Positive singular values of `a` with unit left/right vectors, read off the Hermitian
/// embedding `[[0, A], [A†, 0]]` whose eigenpairs are `±σ`, `(u, ±v)/√2`.
fn singular_triplets(a: &CMatrix) -> (Vec<f64>, Vec<(DVector<C64>, DVector<C64>)>) {
    let n = a.nrows();
    let mut h = CMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, n), (n, n)).copy_from(a);
    h.view_mut((n, 0), (n, n)).copy_from(&a.adjoint());
    let eig = SymmetricEigen::new(h);
    let root2 = C64::new(std::f64::consts::SQRT_2, 0.0);
    let mut sigma = Vec::with_capacity(n);
    let mut pairs = Vec::with_capacity(n);
    for (i, &e) in eig.eigenvalues.iter().enumerate() {
        if e > 0.0 {
            let x = eig.eigenvectors.column(i);
            sigma.push(e);
            pairs.push((x.rows(0, n) * root2, x.rows(n, n) * root2));
        }
    }
    (sigma, pairs)
}

fn lowest_nonvanishing(series: &GeneratorSeries) -> Result<usize> {
    let scale = series
        .orders()
        .map(|n| series.max_norm(n))
        .fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::VanishingGenerator);
    }
    series
        .orders()
        .find(|&n| series.max_norm(n) > VANISHING_TOL * scale)
        .ok_or(Error::VanishingGenerator)
}

/// One level `𝒢_k` of the hierarchy; `k = 1` is the physical generator.
#[derive(Clone, Debug)]
pub struct HierarchyLevel {
    k: usize,
    lowest_order: usize,
    series: GeneratorSeries,
}

impl HierarchyLevel {
    pub fn new(k: usize, series: GeneratorSeries) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("hierarchy levels start at 1".into()));
        }
        let lowest_order = lowest_nonvanishing(&series)?;
        Ok(Self {
            k,
            lowest_order,
            series,
        })
    }

    pub fn physical(series: GeneratorSeries) -> Result<Self> {
        Self::new(1, series)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lowest_order(&self) -> usize {
        self.lowest_order
    }

    pub fn series(&self) -> &GeneratorSeries {
        &self.series
    }

    pub fn grid(&self) -> &TimeGrid {
        self.series.grid()
    }

    /// `𝒢_k^{(ℓ)}` on the grid.
    pub fn base(&self) -> &[SuperOperator] {
        self.series
            .order(self.lowest_order)
            .expect("lowest order is present")
    }

    /// The next level `𝒢_{k+1}` truncated at relative order `truncation`.
    pub fn next_level(
        &self,
        cutoff: f64,
        truncation: usize,
    ) -> Result<(ReducedSeries, HierarchyLevel)> {
        let reduced = gtilde_series(self, cutoff)?;
        let g_next = level2_generator(&reduced, truncation)?;
        let next = HierarchyLevel::new(self.k + 1, g_next)?;
        Ok((reduced, next))
    }
}

/// Per-time diagnostics of the pseudo-inverse of the lowest order.
#[derive(Clone, Debug, PartialEq)]
pub struct InverseDiagnostics {
    pub t: f64,
    pub rank: usize,
    /// `None` where the lowest order vanishes identically.
    pub condition: Option<f64>,
}

/// `G̃ = 1 + Σ_{n≥1} G̃⁽ⁿ⁾` with orders counted relative to `ℓ`.
#[derive(Clone, Debug)]
pub struct ReducedSeries {
    lowest_order: usize,
    series: GeneratorSeries,
    diagnostics: Vec<InverseDiagnostics>,
}

impl ReducedSeries {
    pub fn lowest_order(&self) -> usize {
        self.lowest_order
    }

    /// Relative orders `n ≥ 1`; the zeroth order is the identity and is not stored.
    pub fn series(&self) -> &GeneratorSeries {
        &self.series
    }

    pub fn grid(&self) -> &TimeGrid {
        self.series.grid()
    }

    pub fn diagnostics(&self) -> &[InverseDiagnostics] {
        &self.diagnostics
    }

    /// Largest rank of the lowest order over the grid.
    pub fn full_rank(&self) -> usize {
        self.diagnostics.iter().map(|d| d.rank).max().unwrap_or(0)
    }

    /// Grid indices at or after `from` where the retained rank drops below [`Self::full_rank`].
    pub fn rank_drops(&self, from: usize) -> Vec<usize> {
        let full = self.full_rank();
        self.diagnostics
            .iter()
            .enumerate()
            .skip(from)
            .filter(|(_, d)| d.rank < full)
            .map(|(k, _)| k)
            .collect()
    }

    /// `1 + Σ_{n ≤ max_order} G̃⁽ⁿ⁾(t_k)`.
    pub fn summed(&self, max_order: usize) -> Vec<SuperOperator> {
        let identity = SuperOperator::identity(self.series.dim());
        self.series
            .summed(max_order)
            .into_iter()
            .map(|g| &g + &identity)
            .collect()
    }
}

/// Left-multiplies every higher order by the pseudo-inverse of the lowest one.
///
/// Where the lowest order vanishes identically (always at `t₀`) the pseudo-inverse
/// is taken as zero.
pub fn gtilde_series(level: &HierarchyLevel, cutoff: f64) -> Result<ReducedSeries> {
    let grid = *level.grid();
    let dim = level.series.dim();
    let inverses = level
        .base()
        .par_iter()
        .map(|g| match regularized_inverse_with_diagnostics(g, cutoff) {
            Err(Error::NoRetainedSingularValues) => Ok((SuperOperator::zeros(dim), 0, None)),
            Err(e) => Err(e),
            Ok(p) => Ok((p.inverse, p.rank, Some(p.condition))),
        })
        .collect::<Result<Vec<_>>>()?;
    let diagnostics = inverses
        .iter()
        .enumerate()
        .map(|(k, (_, rank, condition))| InverseDiagnostics {
            t: grid.t(k),
            rank: *rank,
            condition: *condition,
        })
        .collect();
    let ell = level.lowest_order;
    let mut series = GeneratorSeries::new(grid, dim);
    for (n, values) in level.series.iter().filter(|(n, _)| *n > ell) {
        let relative = values
            .iter()
            .zip(&inverses)
            .map(|(g, (inv, _, _))| inv * g)
            .collect();
        series.insert(n - ell, relative)?;
    }
    Ok(ReducedSeries {
        lowest_order: ell,
        series,
        diagnostics,
    })
}

/// `𝒢₂ = Σ_{m=1}^{truncation} 𝒢₂⁽ᵐ⁾`, returned order by order, with the default stencil.
///
/// `𝒢₂⁽ⁿ⁾ = dG̃⁽ⁿ⁾/dt − Σ_{m<n} 𝒢₂⁽ᵐ⁾ G̃⁽ⁿ⁻ᵐ⁾`, with derivatives by centered differences.
/// Relative orders absent from the series count as zero; `truncation` may not exceed
/// the highest stored relative order unless the series is empty.
pub fn level2_generator(gtilde: &ReducedSeries, truncation: usize) -> Result<GeneratorSeries> {
    level2_generator_with(gtilde, truncation, DerivativeStencil::default())
}

pub fn level2_generator_with(
    gtilde: &ReducedSeries,
    truncation: usize,
    stencil: DerivativeStencil,
) -> Result<GeneratorSeries> {
    let grid = *gtilde.grid();
    let dim = gtilde.series.dim();
    if truncation == 0 {
        return Err(Error::InvalidArgument(
            "truncation order must be at least 1".into(),
        ));
    }
    let highest = gtilde.series.orders().max();
    if let Some(h) = highest {
        if truncation > h {
            return Err(Error::UnsupportedOrder {
                order: truncation,
                reason: format!("the reduced series stops at relative order {h}"),
            });
        }
    } else {
        let mut out = GeneratorSeries::new(grid, dim);
        for n in 1..=truncation {
            out.insert(n, vec![SuperOperator::zeros(dim); grid.len()])?;
        }
        return Ok(out);
    }
    let moments = (1..=truncation)
        .map(|n| {
            let m = gtilde
                .series
                .order(n)
                .map(<[SuperOperator]>::to_vec)
                .unwrap_or_else(|| vec![SuperOperator::zeros(dim); grid.len()]);
            let mdot = stencil.apply(&m, grid.dt())?;
            MomentSeries::new(n, grid, m, mdot)
        })
        .collect::<Result<Vec<_>>>()?;
    generator_via_recursion(&moments, truncation)
}

/// `𝒢_NP = 𝒢^{(ℓ)} X` on the grid.
#[derive(Clone, Debug)]
pub struct ResummedGenerator {
    grid: TimeGrid,
    lowest_order: usize,
    start: usize,
    base: Vec<SuperOperator>,
    x: Vec<SuperOperator>,
    g_np: Vec<SuperOperator>,
}

impl ResummedGenerator {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn lowest_order(&self) -> usize {
        self.lowest_order
    }

    /// Grid index where RK4 integration of `X` begins.
    pub fn start(&self) -> usize {
        self.start
    }

    pub fn base(&self) -> &[SuperOperator] {
        &self.base
    }

    pub fn x(&self) -> &[SuperOperator] {
        &self.x
    }

    pub fn g_np(&self) -> &[SuperOperator] {
        &self.g_np
    }

    pub fn max_trace_annihilation_defect(&self) -> f64 {
        self.g_np
            .iter()
            .map(SuperOperator::trace_annihilation_defect)
            .fold(0.0, f64::max)
    }
}

/// Builds `X` from `𝒢₂` and multiplies it onto `base = 𝒢^{(ℓ)}`.
///
/// `start_offset` is `ε` in grid steps; it is clamped to the grid.
pub fn resummed_generator(
    lowest_order: usize,
    base: &[SuperOperator],
    g2: &[SuperOperator],
    grid: &TimeGrid,
    start_offset: usize,
) -> Result<ResummedGenerator> {
    let n = grid.len();
    if base.len() != n || g2.len() != n {
        return Err(Error::GridMismatch(format!(
            "base has {}, G2 has {}, grid has {} points",
            base.len(),
            g2.len(),
            n
        )));
    }
    let dim = base[0].dim();
    if base.iter().chain(g2).any(|s| s.dim() != dim) {
        return Err(Error::InvalidArgument(
            "mixed superoperator dimensions".into(),
        ));
    }
    let start = start_offset.min(grid.n_steps());
    let identity = SuperOperator::identity(dim);
    let mut x: Vec<SuperOperator> = if n >= 2 {
        prefix_integrals(g2, grid.dt())
            .into_iter()
            .take(start + 1)
            .map(|s| &s + &identity)
            .collect()
    } else {
        vec![identity.clone()]
    };
    x[0] = identity;
    if start < grid.n_steps() {
        let tail_grid = TimeGrid::new(grid.t(start), grid.dt(), grid.n_steps() - start)?;
        let tail = integrate(&g2[start..], &tail_grid, x[start].matrix().clone());
        x.extend(
            tail.into_iter()
                .skip(1)
                .map(|m| SuperOperator::from_matrix_unchecked(dim, m)),
        );
    }
    let g_np = base.iter().zip(&x).map(|(b, x)| b * x).collect();
    Ok(ResummedGenerator {
        grid: *grid,
        lowest_order,
        start,
        base: base.to_vec(),
        x,
        g_np,
    })
}

/// Settings for [`resum`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResummationOptions {
    pub cutoff: f64,
    pub start_offset: usize,
    pub truncation: usize,
    pub stencil: DerivativeStencil,
}

impl Default for ResummationOptions {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_SVD_CUTOFF,
            start_offset: DEFAULT_START_OFFSET,
            truncation: 2,
            stencil: DerivativeStencil::default(),
        }
    }
}

/// All intermediate products of a level-2 resummation.
#[derive(Clone, Debug)]
pub struct Resummation {
    pub reduced: ReducedSeries,
    pub g2: GeneratorSeries,
    pub generator: ResummedGenerator,
}

impl Resummation {
    pub fn max_g2_trace_annihilation_defect(&self) -> f64 {
        self.g2.max_trace_annihilation_defect()
    }
}

/// Level-2 resummation of a physical generator series.
///
/// The truncation is clamped to the available relative orders.
pub fn resum(series: &GeneratorSeries, options: ResummationOptions) -> Result<Resummation> {
    let level = HierarchyLevel::physical(series.clone())?;
    let reduced = gtilde_series(&level, options.cutoff)?;
    let available = reduced
        .series()
        .orders()
        .max()
        .unwrap_or(options.truncation);
    let g2 = level2_generator_with(
        &reduced,
        options.truncation.min(available).max(1),
        options.stencil,
    )?;
    let g2_total = g2.summed(usize::MAX);
    let generator = resummed_generator(
        level.lowest_order(),
        level.base(),
        &g2_total,
        level.grid(),
        options.start_offset,
    )?;
    Ok(Resummation {
        reduced,
        g2,
        generator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_inverts_to_identity() {
        let id = SuperOperator::identity(2);
        let inv = regularized_inverse(&id, DEFAULT_SVD_CUTOFF).unwrap();
        assert!((&inv - &id).max_abs() < 1e-15);
    }

    #[test]
    fn small_singular_values_are_dropped() {
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = c(1.0, 0.0);
        m[(1, 1)] = c(1e-20, 0.0);
        let a = SuperOperator::from_matrix(2, m).unwrap();
        let p = regularized_inverse_with_diagnostics(&a, 1e-12).unwrap();
        assert_eq!(p.rank, 1);
        let mut expected = CMatrix::zeros(4, 4);
        expected[(0, 0)] = c(1.0, 0.0);
        assert!((p.inverse.matrix() - expected).camax() < 1e-15);
    }

    #[test]
    fn zero_matrix_has_no_pseudo_inverse() {
        let z = SuperOperator::zeros(2);
        assert_eq!(
            regularized_inverse(&z, 1e-10).unwrap_err(),
            Error::NoRetainedSingularValues
        );
        assert!(regularized_inverse(&SuperOperator::identity(2), 1.0).is_err());
    }

    #[test]
    fn x_starts_at_identity_and_vanishing_g2_reduces_to_base() {
        let grid = TimeGrid::new(0.0, 0.1, 20).unwrap();
        let base: Vec<SuperOperator> = (0..grid.len())
            .map(|k| SuperOperator::identity(2).scale_real(grid.t(k)))
            .collect();
        let g2 = vec![SuperOperator::zeros(2); grid.len()];
        let r = resummed_generator(2, &base, &g2, &grid, 5).unwrap();
        assert_eq!(r.x()[0], SuperOperator::identity(2));
        for (a, b) in r.g_np().iter().zip(&base) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn constant_g2_gives_matrix_exponential() {
        let grid = TimeGrid::new(0.0, 0.01, 100).unwrap();
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 1)] = c(0.3, 0.1);
        m[(2, 3)] = c(-0.2, 0.0);
        let g = SuperOperator::from_matrix(2, m).unwrap();
        let g2 = vec![g.clone(); grid.len()];
        let base = vec![SuperOperator::identity(2); grid.len()];
        let r = resummed_generator(2, &base, &g2, &grid, 0).unwrap();
        let exact = crate::liouville::expm(&(g.matrix() * c(grid.t_end(), 0.0))).unwrap();
        assert!((r.x()[grid.n_steps()].matrix() - exact).camax() < 1e-12);
    }
}
