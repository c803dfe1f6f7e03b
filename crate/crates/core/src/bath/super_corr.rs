//! Two-point correlations of the bath superoperators `ℬ^±`.
//!
//! With `ℬ^σ X = (B X + σ X B)/√2` and a stationary bath,
//!
//! ```text
//! D_{+,+}(t₂,t₁) = C(τ) + C(−τ) = 2 Re C(τ)
//! D_{+,−}(t₂,t₁) = C(τ) − C(−τ) = 2i Im C(τ)
//! D_{−,σ}(t₂,t₁) = 0
//! ```
//!
//! for `τ = t₂ − t₁`. The connected components use the fluctuation correlation;
//! [`SuperCorrelation::component_full`] adds the mean contribution `2⟨B⟩²` to `D_{+,+}`.

use crate::error::Result;
use crate::liouville::{Sigma, C64};

use super::spectral::BathCorrelation;

fn combine(s2: Sigma, s1: Sigma, forward: C64) -> C64 {
    match (s2, s1) {
        (Sigma::Minus, _) => C64::new(0.0, 0.0),
        (Sigma::Plus, Sigma::Plus) => C64::new(2.0 * forward.re, 0.0),
        (Sigma::Plus, Sigma::Minus) => C64::new(0.0, 2.0 * forward.im),
    }
}

#[derive(Clone, Debug)]
pub struct SuperCorrelation {
    correlation: BathCorrelation,
}

pub fn super_correlation(correlation: BathCorrelation) -> SuperCorrelation {
    SuperCorrelation { correlation }
}

impl SuperCorrelation {
    pub fn correlation(&self) -> &BathCorrelation {
        &self.correlation
    }

    pub fn mean(&self) -> f64 {
        self.correlation.mean()
    }

    /// Connected `D_{σ₂σ₁}(t₂, t₁)`.
    pub fn component(&self, s2: Sigma, s1: Sigma, t2: f64, t1: f64) -> Result<C64> {
        if s2 == Sigma::Minus {
            return Ok(C64::new(0.0, 0.0));
        }
        Ok(combine(s2, s1, self.correlation.eval(t2 - t1)?))
    }

    /// `Tr_B[ℬ^{σ₂}(t₂) ℬ^{σ₁}(t₁) ρ_B]` including the mean.
    pub fn component_full(&self, s2: Sigma, s1: Sigma, t2: f64, t1: f64) -> Result<C64> {
        let mut v = self.component(s2, s1, t2, t1)?;
        if s2 == Sigma::Plus && s1 == Sigma::Plus {
            let m = self.mean();
            v += C64::new(2.0 * m * m, 0.0);
        }
        Ok(v)
    }

    /// Samples `C` on the grid offsets `k·dt`, `k = 0..=n`.
    pub fn tabulate(&self, dt: f64, n: usize) -> Result<CorrelationTable> {
        Ok(CorrelationTable {
            forward: self.correlation.tabulate(dt, n)?,
            mean: self.mean(),
        })
    }
}

/// `C(k·dt)` for the non-negative grid offsets; negative offsets follow from `C(−τ) = C(τ)*`.
#[derive(Clone, Debug)]
pub struct CorrelationTable {
    forward: Vec<C64>,
    mean: f64,
}

impl CorrelationTable {
    pub fn from_values(forward: Vec<C64>, mean: f64) -> Self {
        Self { forward, mean }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `C((j − i)·dt)`
    pub fn at(&self, j: usize, i: usize) -> C64 {
        if j >= i {
            self.forward[j - i]
        } else {
            self.forward[i - j].conj()
        }
    }

    /// Connected `D_{σ₂σ₁}(t_j, t_i)`.
    pub fn component(&self, s2: Sigma, s1: Sigma, j: usize, i: usize) -> C64 {
        if s2 == Sigma::Minus {
            return C64::new(0.0, 0.0);
        }
        combine(s2, s1, self.at(j, i))
    }
}
