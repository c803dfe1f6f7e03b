//! Ordered integer compositions, the algebraic form of cut diagrams.
//!
//! A composition `(n₁, …, n_k)` of `n` stands for the term
//! `(−1)^{k−1} Ṁ^{(n₁)} M^{(n₂)} ⋯ M^{(n_k)}` of `𝒢⁽ⁿ⁾`: a connected diagram with its
//! latest vertex pinned at `t`, followed by `k − 1` cuts.
//!
//! Unrolling the recursion gives `2^{n−1}` terms. For `n = 4` there are three
//! three-part compositions `(2,1,1)`, `(1,2,1)`, `(1,1,2)`, each a distinct product, so
//! the count is 8 rather than a list of seven drawn diagrams; the recursion is the
//! reference.

use std::fmt;

use crate::error::{Error, Result};

pub const MAX_COMPOSITION_ORDER: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Composition {
    parts: Vec<usize>,
}

impl Composition {
    pub fn new(parts: Vec<usize>) -> Result<Self> {
        if parts.is_empty() || parts.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "composition parts must be positive: {parts:?}"
            )));
        }
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn total(&self) -> usize {
        self.parts.iter().sum()
    }

    /// `(−1)^{k−1}` for `k` parts.
    pub fn sign(&self) -> i32 {
        if self.parts.len() % 2 == 1 {
            1
        } else {
            -1
        }
    }

    /// Human-readable product, e.g. `Ṁ(2)·M(1)`.
    pub fn term(&self) -> String {
        let mut s = format!("Ṁ({})", self.parts[0]);
        for p in &self.parts[1..] {
            s.push_str(&format!("·M({p})"));
        }
        s
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.parts.iter().map(ToString::to_string).collect();
        write!(
            f,
            "({}){}",
            parts.join(","),
            if self.sign() > 0 { '+' } else { '-' }
        )
    }
}

/// All `2^{n−1}` compositions of `n`, in descending lexicographic order of parts
/// (so `(n)` first and `(1,…,1)` last).
pub fn enumerate_compositions(n: usize) -> Result<Vec<Composition>> {
    if n == 0 || n > MAX_COMPOSITION_ORDER {
        return Err(Error::InvalidArgument(format!(
            "compositions are enumerated for 1 <= n <= {MAX_COMPOSITION_ORDER}, got {n}"
        )));
    }
    let mut out = Vec::with_capacity(1 << (n - 1));
    let mut current = Vec::new();
    fill(n, &mut current, &mut out);
    Ok(out)
}

fn fill(remaining: usize, current: &mut Vec<usize>, out: &mut Vec<Composition>) {
    if remaining == 0 {
        out.push(Composition {
            parts: current.clone(),
        });
        return;
    }
    for first in (1..=remaining).rev() {
        current.push(first);
        fill(remaining - first, current, out);
        current.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn third_order_matches_cut_expansion() {
        let c = enumerate_compositions(3).unwrap();
        let parts: Vec<&[usize]> = c.iter().map(Composition::parts).collect();
        assert_eq!(parts, vec![&[3][..], &[2, 1], &[1, 2], &[1, 1, 1]]);
        let signs: Vec<i32> = c.iter().map(Composition::sign).collect();
        assert_eq!(signs, vec![1, -1, -1, 1]);
        assert_eq!(c[1].term(), "Ṁ(2)·M(1)");
        assert_eq!(c[1].to_string(), "(2,1)-");
    }

    #[test]
    fn counts_and_alternating_sums() {
        assert_eq!(
            enumerate_compositions(1).unwrap(),
            vec![Composition::new(vec![1]).unwrap()]
        );
        for n in 1..=MAX_COMPOSITION_ORDER {
            let c = enumerate_compositions(n).unwrap();
            assert_eq!(c.len(), 1 << (n - 1));
            assert!(c.iter().all(|x| x.total() == n));
            let signed: i32 = c.iter().map(Composition::sign).sum();
            assert_eq!(signed, if n == 1 { 1 } else { 0 });
        }
        assert!(enumerate_compositions(0).is_err());
        assert!(enumerate_compositions(13).is_err());
    }
}
