//! Pair partitions and Wick factorization of Gaussian bath moments.

use crate::error::{Error, Result};
use crate::liouville::{Sigma, C64};

use super::super_corr::SuperCorrelation;

pub const MAX_PAIRS: usize = 6;

/// A perfect matching of `{0, …, 2m−1}`. Each pair is stored as `(a, b)` with `a < b`,
/// and pairs are sorted by their first element.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairPartition {
    pairs: Vec<(usize, usize)>,
}

impl PairPartition {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// True when the pairs are disjoint and cover `{0, …, 2m−1}`.
    pub fn is_perfect_matching(&self) -> bool {
        let n = 2 * self.pairs.len();
        let mut seen = vec![false; n];
        for &(a, b) in &self.pairs {
            if a >= b || b >= n || seen[a] || seen[b] {
                return false;
            }
            seen[a] = true;
            seen[b] = true;
        }
        seen.into_iter().all(|s| s)
    }
}

/// All `(2m−1)!!` perfect matchings of `2m` points.
pub fn enumerate_pairings(m: usize) -> Result<Vec<PairPartition>> {
    if m == 0 || m > MAX_PAIRS {
        return Err(Error::InvalidArgument(format!(
            "pairings are enumerated for 1 <= m <= {MAX_PAIRS}, got m = {m}"
        )));
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(m);
    let remaining: Vec<usize> = (0..2 * m).collect();
    extend(&remaining, &mut current, &mut out);
    Ok(out)
}

fn extend(remaining: &[usize], current: &mut Vec<(usize, usize)>, out: &mut Vec<PairPartition>) {
    let Some((&first, rest)) = remaining.split_first() else {
        out.push(PairPartition {
            pairs: current.clone(),
        });
        return;
    };
    for (k, &partner) in rest.iter().enumerate() {
        let others: Vec<usize> = rest
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != k)
            .map(|(_, &x)| x)
            .collect();
        current.push((first, partner));
        extend(&others, current, out);
        current.pop();
    }
}

/// Sum over pairings of products of connected two-point components.
///
/// `sigmas` and `times` list the bath superoperators latest first, as in
/// `Tr_B[ℬ^{σ[0]}(t[0]) ⋯ ℬ^{σ[n−1]}(t[n−1]) ρ_B]`. Within each pair the earlier list
/// position is the later time and goes in the left slot of `D`. Valid for zero-mean
/// Gaussian baths.
pub fn wick_multipoint(d: &SuperCorrelation, sigmas: &[Sigma], times: &[f64]) -> Result<C64> {
    let n = sigmas.len();
    if times.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: times.len(),
        });
    }
    if n % 2 == 1 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "Wick factorization needs an even, positive number of points, got {n}"
        )));
    }
    if times.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::NonDescendingTimes);
    }
    if d.mean() != 0.0 {
        return Err(Error::InvalidArgument(
            "Wick pairings apply to zero-mean baths".into(),
        ));
    }
    let mut total = C64::new(0.0, 0.0);
    for p in enumerate_pairings(n / 2)? {
        let mut prod = C64::new(1.0, 0.0);
        for &(a, b) in p.pairs() {
            prod *= d.component(sigmas[a], sigmas[b], times[a], times[b])?;
            if prod == C64::new(0.0, 0.0) {
                break;
            }
        }
        total += prod;
    }
    Ok(total)
}
