//! Quadrature on uniform grids and on intervals.
//!
//! Grid rules integrate the local cubic interpolant of the samples, which makes
//! both the cumulative and the definite rules exact for cubics with O(dt⁴)
//! global error. Nested simplex integrals are built from these rules so that
//! every level shares the propagation grid.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::liouville::{CMatrix, SuperOperator, C64};

/// Values that can be integrated by the grid rules.
pub trait Accumulate: Clone {
    fn zero_like(&self) -> Self;
    /// `self += w * other`
    fn add_scaled(&mut self, w: f64, other: &Self);
}

impl Accumulate for C64 {
    fn zero_like(&self) -> Self {
        C64::new(0.0, 0.0)
    }
    fn add_scaled(&mut self, w: f64, other: &Self) {
        *self += other * w;
    }
}

impl Accumulate for CMatrix {
    fn zero_like(&self) -> Self {
        CMatrix::zeros(self.nrows(), self.ncols())
    }
    fn add_scaled(&mut self, w: f64, other: &Self) {
        self.zip_apply(other, |a, b| *a += b * w);
    }
}

impl Accumulate for SuperOperator {
    fn zero_like(&self) -> Self {
        SuperOperator::zeros(self.dim())
    }
    fn add_scaled(&mut self, w: f64, other: &Self) {
        SuperOperator::add_scaled(self, C64::new(w, 0.0), other);
    }
}

const TRAPEZOID: [f64; 2] = [0.5, 0.5];
const QUAD_FIRST: [f64; 3] = [5.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0];
const QUAD_LAST: [f64; 3] = [-1.0 / 12.0, 8.0 / 12.0, 5.0 / 12.0];
const CUBIC_FIRST: [f64; 4] = [9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0];
const CUBIC_CENTRAL: [f64; 4] = [-1.0 / 24.0, 13.0 / 24.0, 13.0 / 24.0, -1.0 / 24.0];
const CUBIC_LAST: [f64; 4] = [1.0 / 24.0, -5.0 / 24.0, 19.0 / 24.0, 9.0 / 24.0];

/// Weights (in units of dt) for the interval `[i, i+1]` of a grid with nodes `0..=n`.
/// Returns the first node index the weights apply to.
pub fn interval_rule(i: usize, n: usize) -> (usize, &'static [f64]) {
    debug_assert!(i < n);
    match n {
        1 => (0, &TRAPEZOID),
        2 => {
            if i == 0 {
                (0, &QUAD_FIRST)
            } else {
                (0, &QUAD_LAST)
            }
        }
        _ => {
            if i == 0 {
                (0, &CUBIC_FIRST)
            } else if i == n - 1 {
                (n - 3, &CUBIC_LAST)
            } else {
                (i - 1, &CUBIC_CENTRAL)
            }
        }
    }
}

const HEAD: [f64; 4] = [8.0 / 24.0, 31.0 / 24.0, 20.0 / 24.0, 25.0 / 24.0];

/// Weight (in units of dt) of node `i` in the definite integral over nodes `0..=n`.
pub fn definite_weight(n: usize, i: usize) -> f64 {
    debug_assert!(i <= n);
    if n >= 7 {
        if i < 4 {
            HEAD[i]
        } else if i > n - 4 {
            HEAD[n - i]
        } else {
            1.0
        }
    } else {
        let mut w = 0.0;
        for k in 0..n {
            let (start, rule) = interval_rule(k, n);
            if i >= start && i < start + rule.len() {
                w += rule[i - start];
            }
        }
        w
    }
}

/// All weights (in units of dt) for the definite integral over nodes `0..=n`.
pub fn definite_weights(n: usize) -> Vec<f64> {
    (0..=n).map(|i| definite_weight(n, i)).collect()
}

/// `∫_{t_0}^{t_n} f` from samples `f_0..f_n`.
pub fn definite<T: Accumulate>(values: &[T], dt: f64) -> T {
    let n = values.len() - 1;
    let mut acc = values[0].zero_like();
    if n == 0 {
        return acc;
    }
    for (i, v) in values.iter().enumerate() {
        acc.add_scaled(dt * definite_weight(n, i), v);
    }
    acc
}

/// Highest node used by [`prefix_weight`] for `∫_{t_0}^{t_m}` on a grid with nodes `0..=n`.
///
/// Integrals over fewer than three intervals borrow nodes past `t_m` (up to node 3) so
/// that they keep fourth-order accuracy; this requires the integrand to extend smoothly
/// beyond the upper limit.
pub fn prefix_span(m: usize, n: usize) -> usize {
    if m >= 3 || n < 3 {
        m
    } else {
        3
    }
}

const PREFIX_ONE: [f64; 4] = [9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0];
const PREFIX_TWO: [f64; 4] = [1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0, 0.0];

/// Weight (in units of dt) of node `i <= prefix_span(m, n)` in `∫_{t_0}^{t_m}`.
#[inline]
pub fn prefix_weight(m: usize, i: usize, n: usize) -> f64 {
    match (m, prefix_span(m, n)) {
        (0, _) => 0.0,
        (1, 3) => PREFIX_ONE[i],
        (2, 3) => PREFIX_TWO[i],
        _ => definite_weight(m, i),
    }
}

/// `F_m = ∫_{t_0}^{t_m} f` for every node, each by its own [`prefix_weight`] rule.
pub fn prefix_integrals<T: Accumulate>(values: &[T], dt: f64) -> Vec<T> {
    let n = values.len() - 1;
    (0..=n)
        .map(|m| {
            let mut acc = values[0].zero_like();
            for i in 0..=prefix_span(m, n) {
                let w = prefix_weight(m, i, n);
                if w != 0.0 {
                    acc.add_scaled(dt * w, &values[i]);
                }
            }
            acc
        })
        .collect()
}

/// `F_k = ∫_{t_0}^{t_k} f` for every node `k`, with `F_0 = 0`.
pub fn cumulative<T: Accumulate>(values: &[T], dt: f64) -> Vec<T> {
    let n = values.len() - 1;
    let mut out = Vec::with_capacity(values.len());
    let mut acc = values[0].zero_like();
    out.push(acc.clone());
    for i in 0..n {
        let (start, rule) = interval_rule(i, n);
        for (offset, w) in rule.iter().enumerate() {
            acc.add_scaled(dt * w, &values[start + offset]);
        }
        out.push(acc.clone());
    }
    out
}

/// First derivative on the grid by centered differences (second order),
/// with second-order one-sided stencils at the boundaries.
pub fn centered_derivative<T: Accumulate>(values: &[T], dt: f64) -> Result<Vec<T>> {
    let n = values.len();
    if n < 3 {
        return Err(Error::InvalidArgument(
            "finite differences need at least three grid points".into(),
        ));
    }
    let mut out = Vec::with_capacity(n);
    let h = 1.0 / dt;
    let mut first = values[0].zero_like();
    first.add_scaled(-1.5 * h, &values[0]);
    first.add_scaled(2.0 * h, &values[1]);
    first.add_scaled(-0.5 * h, &values[2]);
    out.push(first);
    for k in 1..n - 1 {
        let mut d = values[k].zero_like();
        d.add_scaled(0.5 * h, &values[k + 1]);
        d.add_scaled(-0.5 * h, &values[k - 1]);
        out.push(d);
    }
    let mut last = values[n - 1].zero_like();
    last.add_scaled(1.5 * h, &values[n - 1]);
    last.add_scaled(-2.0 * h, &values[n - 2]);
    last.add_scaled(0.5 * h, &values[n - 3]);
    out.push(last);
    Ok(out)
}

/// First derivative on the grid with fourth-order five-point stencils: centered in the
/// interior, shifted at the two nodes next to each boundary.
pub fn centered_derivative4<T: Accumulate>(values: &[T], dt: f64) -> Result<Vec<T>> {
    const EDGE: [[f64; 5]; 2] = [
        [-25.0, 48.0, -36.0, 16.0, -3.0],
        [-3.0, -10.0, 18.0, -6.0, 1.0],
    ];
    const CENTER: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
    let n = values.len();
    if n < 5 {
        return Err(Error::InvalidArgument(
            "fourth-order differences need at least five grid points".into(),
        ));
    }
    let h = 1.0 / (12.0 * dt);
    let stencil = |start: usize, w: &[f64; 5], sign: f64, reversed: bool| {
        let mut d = values[0].zero_like();
        for (j, &c) in w.iter().enumerate() {
            if c != 0.0 {
                let idx = if reversed { start - j } else { start + j };
                d.add_scaled(sign * c * h, &values[idx]);
            }
        }
        d
    };
    let mut out = Vec::with_capacity(n);
    out.push(stencil(0, &EDGE[0], 1.0, false));
    out.push(stencil(0, &EDGE[1], 1.0, false));
    for k in 2..n - 2 {
        out.push(stencil(k - 2, &CENTER, 1.0, false));
    }
    out.push(stencil(n - 1, &EDGE[1], -1.0, true));
    out.push(stencil(n - 1, &EDGE[0], -1.0, true));
    Ok(out)
}

/// Cubic interpolation of grid samples at the midpoint of `[k, k+1]`.
pub fn midpoint<T: Accumulate>(values: &[T], k: usize) -> T {
    let n = values.len() - 1;
    debug_assert!(k < n);
    let (start, w): (usize, [f64; 4]) = if n < 3 {
        let mut acc = values[k].zero_like();
        acc.add_scaled(0.5, &values[k]);
        acc.add_scaled(0.5, &values[k + 1]);
        return acc;
    } else if k == 0 {
        (0, [5.0 / 16.0, 15.0 / 16.0, -5.0 / 16.0, 1.0 / 16.0])
    } else if k == n - 1 {
        (n - 3, [1.0 / 16.0, -5.0 / 16.0, 15.0 / 16.0, 5.0 / 16.0])
    } else {
        (k - 1, [-1.0 / 16.0, 9.0 / 16.0, 9.0 / 16.0, -1.0 / 16.0])
    };
    let mut acc = values[k].zero_like();
    for (o, wi) in w.iter().enumerate() {
        acc.add_scaled(*wi, &values[start + o]);
    }
    acc
}

// Gauss–Kronrod 7/15 nodes on [-1, 1] (non-negative half).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = half * XGK[j];
        let pair = f(center - x) + f(center + x);
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).norm();
    (value, err)
}

/// Globally adaptive Gauss–Kronrod integration of a complex-valued function on `[a, b]`.
///
/// The interval is first split into `panels` equal pieces, which keeps
/// oscillatory integrands from fooling the first error estimate.
pub fn integrate_adaptive<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    panels: usize,
) -> Result<Complex64> {
    const MAX_INTERVALS: usize = 20_000;
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut pieces: Vec<(f64, f64, Complex64, f64)> = (0..panels)
        .map(|p| {
            let lo = a + width * p as f64;
            let hi = if p + 1 == panels { b } else { lo + width };
            let (v, e) = gk15(&f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    loop {
        let total: Complex64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.norm()) {
            return Ok(total);
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::Numerical(format!(
                "adaptive quadrature did not converge (error estimate {err:.3e})"
            )));
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
}
