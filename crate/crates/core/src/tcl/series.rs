use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::liouville::SuperOperator;

use super::grid::TimeGrid;

/// `M⁽ⁿ⁾(t_k)` and `Ṁ⁽ⁿ⁾(t_k)` of one perturbative order on a grid.
#[derive(Clone, Debug)]
pub struct MomentSeries {
    order: usize,
    grid: TimeGrid,
    m: Vec<SuperOperator>,
    mdot: Vec<SuperOperator>,
}

impl MomentSeries {
    pub fn new(
        order: usize,
        grid: TimeGrid,
        m: Vec<SuperOperator>,
        mdot: Vec<SuperOperator>,
    ) -> Result<Self> {
        if m.len() != grid.len() || mdot.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "order {order}: {} / {} values for {} grid points",
                m.len(),
                mdot.len(),
                grid.len()
            )));
        }
        if let Some(first) = m.first() {
            let d = first.dim();
            if m.iter().chain(&mdot).any(|s| s.dim() != d) {
                return Err(Error::InvalidArgument(
                    "mixed superoperator dimensions".into(),
                ));
            }
        }
        Ok(Self {
            order,
            grid,
            m,
            mdot,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.m[0].dim()
    }

    pub fn m(&self) -> &[SuperOperator] {
        &self.m
    }

    pub fn mdot(&self) -> &[SuperOperator] {
        &self.mdot
    }
}

pub(crate) fn find_order(moments: &[MomentSeries], n: usize) -> Result<&MomentSeries> {
    moments
        .iter()
        .find(|s| s.order() == n)
        .ok_or(Error::MissingOrder(n))
}

/// Generator orders `𝒢⁽ⁿ⁾(t_k)` on a common grid.
#[derive(Clone, Debug)]
pub struct GeneratorSeries {
    grid: TimeGrid,
    dim: usize,
    orders: BTreeMap<usize, Vec<SuperOperator>>,
}

impl GeneratorSeries {
    pub fn new(grid: TimeGrid, dim: usize) -> Self {
        Self {
            grid,
            dim,
            orders: BTreeMap::new(),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert(&mut self, n: usize, values: Vec<SuperOperator>) -> Result<()> {
        if values.len() != self.grid.len() {
            return Err(Error::GridMismatch(format!(
                "order {n}: {} values for {} grid points",
                values.len(),
                self.grid.len()
            )));
        }
        if values.iter().any(|v| v.dim() != self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: values
                    .iter()
                    .find(|v| v.dim() != self.dim)
                    .map_or(0, |v| v.dim()),
            });
        }
        self.orders.insert(n, values);
        Ok(())
    }

    pub fn order(&self, n: usize) -> Option<&[SuperOperator]> {
        self.orders.get(&n).map(Vec::as_slice)
    }

    pub fn orders(&self) -> impl Iterator<Item = usize> + '_ {
        self.orders.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[SuperOperator])> {
        self.orders.iter().map(|(n, v)| (*n, v.as_slice()))
    }

    /// `Σ_{n ≤ max_order} 𝒢⁽ⁿ⁾(t_k)` at every grid point.
    pub fn summed(&self, max_order: usize) -> Vec<SuperOperator> {
        let mut out = vec![SuperOperator::zeros(self.dim); self.grid.len()];
        for (_, series) in self.orders.range(..=max_order) {
            for (acc, g) in out.iter_mut().zip(series) {
                *acc += g;
            }
        }
        out
    }

    /// `max_k ‖𝒢⁽ⁿ⁾(t_k)‖_F`, zero for an absent order.
    pub fn max_norm(&self, n: usize) -> f64 {
        self.order(n)
            .map(|s| s.iter().map(SuperOperator::norm).fold(0.0, f64::max))
            .unwrap_or(0.0)
    }

    pub fn max_trace_annihilation_defect(&self) -> f64 {
        self.orders
            .values()
            .flatten()
            .map(SuperOperator::trace_annihilation_defect)
            .fold(0.0, f64::max)
    }

    pub fn max_hermiticity_defect(&self) -> f64 {
        self.orders
            .values()
            .flatten()
            .map(SuperOperator::hermiticity_defect)
            .fold(0.0, f64::max)
    }
}
