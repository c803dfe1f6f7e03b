use crate::error::{Error, Result};

/// Uniform time grid `t_k = t0 + k·dt`, `k = 0..=n_steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {dt}"
            )));
        }
        if !t0.is_finite() || !(t0 + n_steps as f64 * dt).is_finite() {
            return Err(Error::InvalidArgument("grid end time is not finite".into()));
        }
        Ok(Self { t0, dt, n_steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid points, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.n_steps)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.t(k)).collect()
    }

    /// Every `stride`-th point of this grid.
    pub fn coarsened(&self, stride: usize) -> Result<Self> {
        if stride == 0 || self.n_steps % stride != 0 {
            return Err(Error::GridMismatch(format!(
                "{} steps cannot be coarsened by {stride}",
                self.n_steps
            )));
        }
        Self::new(self.t0, self.dt * stride as f64, self.n_steps / stride)
    }

    /// Index of the grid point at time `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        let k = x.round();
        if k < 0.0 || k > self.n_steps as f64 || (x - k).abs() > 1e-9 {
            None
        } else {
            Some(k as usize)
        }
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.n_steps == other.n_steps
            && (self.t0 - other.t0).abs() <= 1e-14 * self.t0.abs().max(1.0)
            && (self.dt - other.dt).abs() <= 1e-14 * self.dt
    }

    pub(crate) fn ensure_same(&self, other: &TimeGrid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}
