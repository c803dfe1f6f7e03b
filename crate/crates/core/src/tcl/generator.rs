//! Generator orders from moments: the recursion
//!
//! ```text
//! 𝒢⁽ⁿ⁾ = Ṁ⁽ⁿ⁾ − Σ_{m=1}^{n−1} 𝒢⁽ᵐ⁾ M⁽ⁿ⁻ᵐ⁾
//! ```
//!
//! and, as an independent path, its unrolled form as a signed sum over compositions.

use nalgebra::DMatrix;

use crate::bath::SuperCorrelation;
use crate::error::{Error, Result};
use crate::liouville::{SuperOperator, SystemModel, C64};
use crate::quadrature::{prefix_span, prefix_weight};

use super::compositions::enumerate_compositions;
use super::grid::TimeGrid;
use super::moments::SystemSuperops;
use super::series::{find_order, GeneratorSeries, MomentSeries};
use crate::liouville::Sigma;

fn common_grid(moments: &[MomentSeries]) -> Result<(TimeGrid, usize)> {
    let first = moments.first().ok_or(Error::MissingOrder(1))?;
    for s in moments {
        s.grid().ensure_same(first.grid())?;
        if s.dim() != first.dim() {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                got: s.dim(),
            });
        }
    }
    Ok((*first.grid(), first.dim()))
}

/// `𝒢⁽¹⁾ … 𝒢⁽ⁿ_max⁾` by the recursion, pointwise in time.
pub fn generator_via_recursion(moments: &[MomentSeries], n_max: usize) -> Result<GeneratorSeries> {
    let (grid, dim) = common_grid(moments)?;
    for n in 1..=n_max {
        find_order(moments, n)?;
    }
    let mut out = GeneratorSeries::new(grid, dim);
    for n in 1..=n_max {
        let mut g: Vec<SuperOperator> = find_order(moments, n)?.mdot().to_vec();
        for m in 1..n {
            let gm = out.order(m).expect("computed above");
            let mm = find_order(moments, n - m)?.m();
            for ((acc, a), b) in g.iter_mut().zip(gm).zip(mm) {
                *acc -= &(a * b);
            }
        }
        out.insert(n, g)?;
    }
    Ok(out)
}

/// `𝒢⁽ⁿ⁾ = Σ_{(n₁,…,n_k)} (−1)^{k−1} Ṁ^{(n₁)} M^{(n₂)} ⋯ M^{(n_k)}`.
pub fn generator_via_compositions(
    moments: &[MomentSeries],
    n: usize,
) -> Result<Vec<SuperOperator>> {
    let (grid, dim) = common_grid(moments)?;
    let compositions = enumerate_compositions(n)?;
    let mut total = vec![SuperOperator::zeros(dim); grid.len()];
    for comp in &compositions {
        let parts = comp.parts();
        let head = find_order(moments, parts[0])?.mdot();
        let tail = parts[1..]
            .iter()
            .map(|&p| find_order(moments, p).map(MomentSeries::m))
            .collect::<Result<Vec<_>>>()?;
        let sign = C64::new(f64::from(comp.sign()), 0.0);
        for (k, acc) in total.iter_mut().enumerate() {
            let mut term = head[k].clone();
            for factor in &tail {
                term = &term * &factor[k];
            }
            acc.add_scaled(sign, &term);
        }
    }
    Ok(total)
}

/// Second-order generator assembled directly from the two-point function:
///
/// ```text
/// 𝒢⁽¹⁾(t) = −i √2 ⟨B⟩ 𝒮⁻(t)
/// 𝒢⁽²⁾(t) = −𝒮⁻(t) ∫_{t₀}^{t} ds [𝒮⁺(s) 2i Im C(t−s) + 𝒮⁻(s) 2 Re C(t−s)]
/// ```
///
/// with `C` the fluctuation correlation. Order 1 is stored (zero for a zero-mean bath).
/// The integral uses the same grid rule as the moment engine.
pub fn tcl2_generator(
    model: &SystemModel,
    bath: &SuperCorrelation,
    grid: &TimeGrid,
) -> Result<GeneratorSeries> {
    let ops = SystemSuperops::new(model, grid)?;
    let n = grid.len();
    let dt = grid.dt();
    let table = bath.tabulate(dt, n - 1)?;
    let d = model.dim();
    let d2 = d * d;
    let mean = bath.mean();
    let mut g1 = Vec::with_capacity(n);
    let mut g2 = Vec::with_capacity(n);
    for k in 0..n {
        let s_minus = ops.get(Sigma::Minus, k);
        g1.push(SuperOperator::from_matrix_unchecked(
            d,
            s_minus * C64::new(0.0, -std::f64::consts::SQRT_2 * mean),
        ));
        let mut integral = DMatrix::<C64>::zeros(d2, d2);
        if k > 0 {
            for i in 0..=prefix_span(k, n - 1) {
                let w = dt * prefix_weight(k, i, n - 1);
                let c = table.at(k, i);
                integral += ops.get(Sigma::Plus, i) * C64::new(0.0, 2.0 * c.im * w);
                integral += ops.get(Sigma::Minus, i) * C64::new(2.0 * c.re * w, 0.0);
            }
        }
        g2.push(SuperOperator::from_matrix_unchecked(
            d,
            -(s_minus * integral),
        ));
    }
    let mut out = GeneratorSeries::new(*grid, d);
    out.insert(1, g1)?;
    out.insert(2, g2)?;
    Ok(out)
}
