//! Moments of the reduced dynamical map,
//!
//! ```text
//! M⁽ⁿ⁾(t) = (−i)ⁿ Σ_σ ∫_{t>tₙ>…>t₁} 𝒮^{σₙ}(tₙ)⋯𝒮^{σ₁}(t₁) Tr_B[ℬ^{σ̄ₙ}(tₙ)⋯ℬ^{σ̄₁}(t₁) ρ_B],
//! ```
//!
//! and their time derivatives `Ṁ⁽ⁿ⁾(t)`, obtained by pinning the latest vertex at `t`
//! rather than by differencing `M⁽ⁿ⁾`. The interaction picture is referenced to `t = 0`.
//!
//! Two engines share the grid and its fourth-order quadrature rules:
//!
//! * Gaussian baths: the bath factor is a Wick sum of two-point components `D`, and the
//!   nested integrals are reorganised into cumulative sums so that order 4 costs
//!   `O(N³)` superoperator products on an `N`-point grid.
//! * Discrete baths: the bath factor is carried exactly as an operator in the joint
//!   (system superoperator) ⊗ (bath operator) space and traced at the end.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bath::{DiscreteBath, SuperCorrelation};
use crate::error::{Error, Result};
use crate::liouville::{
    partial_trace_second, sigma_superop, CMatrix, InteractionFrame, Sigma, SuperOperator,
    SystemModel, C64,
};
use crate::quadrature::{cumulative, prefix_integrals, prefix_span, prefix_weight};

use super::grid::TimeGrid;
use super::series::MomentSeries;

pub const MAX_MOMENT_ORDER: usize = 4;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Source of bath multi-point moments.
#[derive(Clone, Debug)]
pub enum BathMoments {
    /// Gaussian bath: moments by Wick pairing of two-point components.
    Gaussian(SuperCorrelation),
    /// Finite bath: moments computed exactly, Gaussian or not.
    Exact(DiscreteBath),
}

impl BathMoments {
    pub fn mean(&self) -> f64 {
        match self {
            BathMoments::Gaussian(d) => d.mean(),
            BathMoments::Exact(b) => b.mean(),
        }
    }
}

/// `𝒮^±(t_k)` in the interaction picture at every grid point.
pub(crate) struct SystemSuperops {
    dim: usize,
    plus: Vec<CMatrix>,
    minus: Vec<CMatrix>,
}

impl SystemSuperops {
    pub(crate) fn new(model: &SystemModel, grid: &TimeGrid) -> Result<Self> {
        let frame = InteractionFrame::new(&model.h_s)?;
        let mut plus = Vec::with_capacity(grid.len());
        let mut minus = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let s = frame.rotate(&model.s, grid.t(k))?;
            plus.push(sigma_superop(Sigma::Plus, &s).into_matrix());
            minus.push(sigma_superop(Sigma::Minus, &s).into_matrix());
        }
        Ok(Self {
            dim: model.dim(),
            plus,
            minus,
        })
    }

    pub(crate) fn get(&self, sigma: Sigma, k: usize) -> &CMatrix {
        match sigma {
            Sigma::Plus => &self.plus[k],
            Sigma::Minus => &self.minus[k],
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.plus.len()
    }
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 || n > MAX_MOMENT_ORDER {
        return Err(Error::UnsupportedOrder {
            order: n,
            reason: format!("moments are computed for orders 1..={MAX_MOMENT_ORDER}"),
        });
    }
    Ok(())
}

fn neg_i_pow(n: usize) -> C64 {
    match n % 4 {
        0 => ONE,
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    }
}

fn to_superops(dim: usize, v: Vec<CMatrix>) -> Vec<SuperOperator> {
    v.into_iter()
        .map(|m| SuperOperator::from_matrix_unchecked(dim, m))
        .collect()
}

/// Moments of orders `1..=n_max` with the physical top vertex.
pub fn compute_moments(
    model: &SystemModel,
    bath: &BathMoments,
    n_max: usize,
    grid: &TimeGrid,
) -> Result<Vec<MomentSeries>> {
    check_order(n_max)?;
    let ops = SystemSuperops::new(model, grid)?;
    let raw = match bath {
        BathMoments::Gaussian(d) => gaussian_moments(&ops, d, n_max, grid, Sigma::Minus)?,
        BathMoments::Exact(b) => exact_moments(&ops, b, n_max, grid, Sigma::Minus)?,
    };
    raw.into_iter()
        .enumerate()
        .map(|(i, (m, mdot))| {
            MomentSeries::new(
                i + 1,
                *grid,
                to_superops(ops.dim, m),
                to_superops(ops.dim, mdot),
            )
        })
        .collect()
}

/// `M⁽ⁿ⁾` and `Ṁ⁽ⁿ⁾` of a single order.
pub fn compute_moment(
    model: &SystemModel,
    bath: &BathMoments,
    n: usize,
    grid: &TimeGrid,
) -> Result<MomentSeries> {
    let mut all = compute_moments(model, bath, n, grid)?;
    Ok(all.pop().expect("at least one order"))
}

/// `Ṁ⁽ⁿ⁾(t_k)` with the latest vertex pinned at `t_k`.
pub fn compute_moment_derivative(
    model: &SystemModel,
    bath: &BathMoments,
    n: usize,
    grid: &TimeGrid,
) -> Result<Vec<SuperOperator>> {
    compute_moment_derivative_with_top(model, bath, n, grid, Sigma::Minus)
}

/// `Ṁ⁽ⁿ⁾` with the system superoperator at the pinned vertex forced to `𝒮^{top}`.
/// Only `top = −` contributes; `top = +` pairs with a traced bath commutator.
pub fn compute_moment_derivative_with_top(
    model: &SystemModel,
    bath: &BathMoments,
    n: usize,
    grid: &TimeGrid,
    top: Sigma,
) -> Result<Vec<SuperOperator>> {
    check_order(n)?;
    let ops = SystemSuperops::new(model, grid)?;
    let mut raw = match bath {
        BathMoments::Gaussian(d) => gaussian_moments(&ops, d, n, grid, top)?,
        BathMoments::Exact(b) => exact_moments(&ops, b, n, grid, top)?,
    };
    let (_, mdot) = raw.pop().expect("at least one order");
    Ok(to_superops(ops.dim, mdot))
}

type RawOrders = Vec<(Vec<CMatrix>, Vec<CMatrix>)>;

struct GaussianKernel<'a> {
    ops: &'a SystemSuperops,
    table: crate::bath::CorrelationTable,
    dt: f64,
    n_steps: usize,
}

impl GaussianKernel<'_> {
    /// Last node entering `∫_{t₀}^{t_m}`.
    #[inline]
    fn span(&self, m: usize) -> usize {
        prefix_span(m, self.n_steps)
    }

    /// `dt · w` for node `i` of `∫_{t₀}^{t_m}`.
    #[inline]
    fn weight(&self, m: usize, i: usize) -> f64 {
        self.dt * prefix_weight(m, i, self.n_steps)
    }

    /// Scalar coefficients of `A^{(b)}_k(i) = 𝒮⁺(t_i) D_{b,−}(k,i) + 𝒮⁻(t_i) D_{b,+}(k,i)`
    /// with the full (mean-including) components.
    #[inline]
    fn coeffs(&self, b: Sigma, k: usize, i: usize) -> (C64, C64) {
        let plus = self.table.component(b, Sigma::Minus, k, i);
        let mut minus = self.table.component(b, Sigma::Plus, k, i);
        if b == Sigma::Plus {
            let m = self.table.mean();
            minus += C64::new(2.0 * m * m, 0.0);
        }
        (plus, minus)
    }

    /// `acc += α · A^{(b)}_k(i)`
    #[inline]
    fn axpy(&self, acc: &mut CMatrix, alpha: C64, b: Sigma, k: usize, i: usize) {
        let (cp, cm) = self.coeffs(b, k, i);
        let (sp, sm) = (&self.ops.plus[i], &self.ops.minus[i]);
        let (ap, am) = (alpha * cp, alpha * cm);
        acc.zip_zip_apply(sp, sm, |a, p, q| *a += ap * p + am * q);
    }

    /// `acc += α · A^{(b)}_k(i) · rhs`
    #[inline]
    fn gemm(&self, acc: &mut CMatrix, alpha: C64, b: Sigma, k: usize, i: usize, rhs: &CMatrix) {
        let (cp, cm) = self.coeffs(b, k, i);
        if cp != ZERO {
            acc.gemm(alpha * cp, &self.ops.plus[i], rhs, ONE);
        }
        if cm != ZERO {
            acc.gemm(alpha * cm, &self.ops.minus[i], rhs, ONE);
        }
    }

    /// `∫_{t₀}^{t_k} A^{(b)}_k(s) ds`
    fn integral(&self, b: Sigma, k: usize) -> CMatrix {
        let d2 = self.ops.dim * self.ops.dim;
        let mut acc = DMatrix::zeros(d2, d2);
        for i in 0..=self.span(k) {
            let w = self.weight(k, i);
            if w != 0.0 {
                self.axpy(&mut acc, C64::new(w, 0.0), b, k, i);
            }
        }
        acc
    }

    /// `Q(u) = ∫_{t₀}^{u} A^{(b)}_k(s) ds` at nodes `u = 0..=span(upto)`.
    fn cumulative_a(&self, b: Sigma, k: usize, upto: usize) -> Vec<CMatrix> {
        let d2 = self.ops.dim * self.ops.dim;
        let values: Vec<CMatrix> = (0..=self.span(upto))
            .map(|i| {
                let mut a = DMatrix::zeros(d2, d2);
                self.axpy(&mut a, ONE, b, k, i);
                a
            })
            .collect();
        cumulative(&values, self.dt)
    }
}

fn gaussian_moments(
    ops: &SystemSuperops,
    d: &SuperCorrelation,
    n_max: usize,
    grid: &TimeGrid,
    top: Sigma,
) -> Result<RawOrders> {
    let mean = d.mean();
    if mean != 0.0 && n_max > 2 {
        return Err(Error::UnsupportedOrder {
            order: n_max,
            reason: "Gaussian moments with a nonzero bath mean are implemented up to order 2"
                .into(),
        });
    }
    let n = grid.len();
    let dt = grid.dt();
    let d2 = ops.dim * ops.dim;
    let kernel = GaussianKernel {
        ops,
        table: d.tabulate(dt, n - 1)?,
        dt,
        n_steps: n - 1,
    };
    let zeros = || vec![DMatrix::<C64>::zeros(d2, d2); n];
    let top_bath = top.bar();
    let mut out: RawOrders = Vec::with_capacity(n_max);

    // order 1: −i ⟨ℬ^{σ̄}⟩ 𝒮^{σ}(t)
    let b_mean = if top_bath == Sigma::Plus {
        std::f64::consts::SQRT_2 * mean
    } else {
        0.0
    };
    let mdot1: Vec<CMatrix> = (0..n)
        .map(|k| ops.get(top, k) * C64::new(0.0, -b_mean))
        .collect();
    out.push((prefix_integrals(&mdot1, dt), mdot1));
    if n_max == 1 {
        return Ok(out);
    }

    // order 2: −𝒮^{σ}(t_k) ∫ A^{(σ̄)}_k
    let inner_top: Vec<CMatrix> = (0..n)
        .into_par_iter()
        .map(|k| kernel.integral(top_bath, k))
        .collect();
    let mdot2: Vec<CMatrix> = (0..n).map(|k| -(ops.get(top, k) * &inner_top[k])).collect();
    out.push((prefix_integrals(&mdot2, dt), mdot2));
    if n_max == 2 {
        return Ok(out);
    }

    // order 3 vanishes for a zero-mean Gaussian bath
    out.push((zeros(), zeros()));
    if n_max == 3 {
        return Ok(out);
    }

    // order 4: three Wick pairings of the pinned vertex k with t₃ > t₂ > t₁.
    //   (k,3)(2,1): ∫ A_k(t₃) K(t₃),               K = ∫ P,  P(u) = 𝒮⁻(u) ∫ A⁺_u
    //   (k,2)(3,1): ∫ 𝒮⁻(t₃) ∫ A_k(t₂) J(t₃,t₂),   J(t₃,u) = ∫₀^u A⁺_{t₃}
    //   (k,1)(3,2): ∫ 𝒮⁻(t₃) ∫ A⁺_{t₃}(t₂) Q_k(t₂), Q_k(u) = ∫₀^u A_k
    let p: Vec<CMatrix> = (0..n)
        .into_par_iter()
        .map(|k| {
            let inner = kernel.integral(Sigma::Plus, k);
            ops.get(Sigma::Minus, k) * inner
        })
        .collect();
    let k_cum = cumulative(&p, dt);
    let mdot4: Vec<CMatrix> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut total = DMatrix::zeros(d2, d2);
            if k == 0 {
                return total;
            }
            for t3 in 0..=kernel.span(k) {
                let w = kernel.weight(k, t3);
                kernel.gemm(&mut total, C64::new(w, 0.0), top_bath, k, t3, &k_cum[t3]);
            }
            let q = kernel.cumulative_a(top_bath, k, k);
            let mut inner = DMatrix::zeros(d2, d2);
            let mut tmp = DMatrix::zeros(d2, d2);
            for t3 in 1..=kernel.span(k) {
                let j = kernel.cumulative_a(Sigma::Plus, t3, t3);
                inner.fill(ZERO);
                for t2 in 0..=kernel.span(t3) {
                    let w = C64::new(kernel.weight(t3, t2), 0.0);
                    kernel.gemm(&mut inner, w, top_bath, k, t2, &j[t2]);
                    kernel.gemm(&mut inner, w, Sigma::Plus, t3, t2, &q[t2]);
                }
                tmp.gemm(ONE, ops.get(Sigma::Minus, t3), &inner, ZERO);
                let w = kernel.weight(k, t3);
                total.zip_apply(&tmp, |a, b| *a += w * b);
            }
            ops.get(top, k) * total
        })
        .collect();
    out.push((prefix_integrals(&mdot4, dt), mdot4));
    Ok(out)
}

fn exact_moments(
    ops: &SystemSuperops,
    bath: &DiscreteBath,
    n_max: usize,
    grid: &TimeGrid,
    top: Sigma,
) -> Result<RawOrders> {
    let n = grid.len();
    let dt = grid.dt();
    let d2 = ops.dim * ops.dim;
    let db = bath.dim();
    let id_s = CMatrix::identity(d2, d2);
    let id_b = CMatrix::identity(db, db);
    let rho_b = bath.rho0().into_matrix();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let b_at: Vec<CMatrix> = (0..ops.len()).map(|k| bath.b_at(grid.t(k))).collect();

    // Y = Σ_σ [(𝒮^σ ⊗ B) Z + s(σ̄) (𝒮^σ ⊗ 1) Z (1 ⊗ B)] / √2, s(+) = 1, s(−) = −1.
    let step = |k: usize, z: &CMatrix, only: Option<Sigma>| -> CMatrix {
        let zb = z * id_s.kronecker(&b_at[k]);
        let mut y = DMatrix::zeros(d2 * db, d2 * db);
        for sigma in Sigma::BOTH {
            if only.is_some_and(|s| s != sigma) {
                continue;
            }
            let s = ops.get(sigma, k);
            y.gemm(C64::new(r, 0.0), &s.kronecker(&b_at[k]), z, ONE);
            y.gemm(
                C64::new(r * sigma.bar().sign(), 0.0),
                &s.kronecker(&id_b),
                &zb,
                ONE,
            );
        }
        y
    };

    let mut z_prev: Vec<CMatrix> = vec![id_s.kronecker(&rho_b); n];
    let mut out: RawOrders = Vec::with_capacity(n_max);
    for j in 1..=n_max {
        let phase = neg_i_pow(j);
        let pairs: Vec<(CMatrix, CMatrix)> = (0..n)
            .into_par_iter()
            .map(|k| {
                let y = step(k, &z_prev[k], None);
                let y_top = step(k, &z_prev[k], Some(top));
                (y, y_top)
            })
            .collect();
        let (y, y_top): (Vec<CMatrix>, Vec<CMatrix>) = pairs.into_iter().unzip();
        let mdot = y_top
            .iter()
            .map(|m| partial_trace_second(m, d2, db).map(|t| t * phase))
            .collect::<Result<Vec<_>>>()?;
        let z = cumulative(&y, dt);
        let m = z
            .iter()
            .map(|m| partial_trace_second(m, d2, db).map(|t| t * phase))
            .collect::<Result<Vec<_>>>()?;
        out.push((m, mdot));
        z_prev = z;
    }
    Ok(out)
}
