//! Uniform time grids, sampled series and fractional orders.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{FracError, Result};

/// Uniform grid `t_j = t_start + j*h`, `j = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    t_start: f64,
    t_end: f64,
    n_steps: usize,
}

impl Grid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) {
            return Err(FracError::domain("grid bounds must be finite"));
        }
        if n_steps == 0 {
            return Err(FracError::domain("grid needs at least one step"));
        }
        if t_end <= t_start {
            return Err(FracError::domain(format!(
                "grid end {t_end} must exceed start {t_start}"
            )));
        }
        Ok(Self { t_start, t_end, n_steps })
    }

    /// Grid on `[t_start, t_end]` whose step is `h`, rounded to a whole number of steps.
    pub fn with_step(t_start: f64, t_end: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(FracError::domain(format!("step {h} must be positive")));
        }
        let n = libm::round((t_end - t_start) / h).max(1.0) as usize;
        Self::new(t_start, t_end, n)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.n_steps {
            self.t_end
        } else {
            self.t_start + j as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |j| self.node(j))
    }

    /// Grid refined by an integer factor (same interval).
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_steps: self.n_steps * factor.max(1),
            ..*self
        }
    }

    /// Index of the node closest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        let j = libm::round((t - self.t_start) / self.step());
        (j.max(0.0) as usize).min(self.n_steps)
    }
}

/// Samples of a scalar function on a [`Grid`].
///
/// Operator outputs that are singular at the left endpoint carry `NaN` in
/// slot 0; [`SampleSeries::interior_max_abs`] and friends skip it.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSeries {
    grid: Grid,
    values: Vec<f64>,
}

impl SampleSeries {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(FracError::domain(format!(
                "series has {} values but grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(FracError::domain(format!("sample {j} is not finite")));
        }
        Ok(Self { grid, values })
    }

    /// Operator output; may carry the endpoint sentinel.
    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, j: usize) -> f64 {
        self.values[j]
    }

    /// `c1*self + c2*other`; both series must share a grid.
    pub fn combine(&self, c1: f64, other: &SampleSeries, c2: f64) -> Result<SampleSeries> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| c1 * a + c2 * b)
            .collect();
        Ok(SampleSeries::from_parts(self.grid, values))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SampleSeries {
        SampleSeries::from_parts(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Series of `g(s) = f(t_start + t_end - s)`.
    pub fn reflected(&self) -> SampleSeries {
        let mut values = self.values.clone();
        values.reverse();
        SampleSeries::from_parts(self.grid, values)
    }

    pub fn check_same_grid(&self, other: &SampleSeries) -> Result<()> {
        if self.grid != other.grid {
            return Err(FracError::domain("series live on different grids"));
        }
        Ok(())
    }

    /// Largest |value| over finite entries with index in `from..`.
    pub fn max_abs_from(&self, from: usize) -> f64 {
        self.values
            .iter()
            .skip(from)
            .filter(|v| v.is_finite())
            .fold(0.0, |m, v| m.max(libm::fabs(*v)))
    }

    /// Largest |value| over interior nodes (endpoints excluded).
    pub fn interior_max_abs(&self) -> f64 {
        let n = self.values.len();
        self.values[1..n - 1]
            .iter()
            .filter(|v| v.is_finite())
            .fold(0.0, |m, v| m.max(libm::fabs(*v)))
    }
}

/// Fractional order α > 0 with `m = ⌊α⌋ + 1` and `ε = m - α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracOrder {
    alpha: f64,
}

impl FracOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(FracError::domain(format!("order {alpha} must be positive")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_integer(&self) -> bool {
        self.alpha == libm::floor(self.alpha)
    }

    /// Integer ceiling. For integer α this is α itself.
    pub fn m(&self) -> usize {
        if self.is_integer() {
            self.alpha as usize
        } else {
            libm::floor(self.alpha) as usize + 1
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.m() as f64 - self.alpha
    }

    pub(crate) fn require_fractional(&self) -> Result<()> {
        if self.is_integer() {
            Err(FracError::IntegerOrder { alpha: self.alpha })
        } else {
            Ok(())
        }
    }

    /// Order shifted by one (α + 1).
    pub fn plus_one(&self) -> FracOrder {
        FracOrder { alpha: self.alpha + 1.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes_and_step() {
        let g = Grid::new(0.0, 1.0, 4).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g.step(), 0.25);
        assert_eq!(g.node(4), 1.0);
        let nodes: Vec<f64> = g.nodes().collect();
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(Grid::new(0.0, 1.0, 0).is_err());
        assert!(Grid::new(1.0, 1.0, 3).is_err());
        assert!(Grid::with_step(0.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn series_length_and_finiteness_checked() {
        let g = Grid::new(0.0, 1.0, 2).unwrap();
        assert!(SampleSeries::new(g, alloc::vec![0.0; 2]).is_err());
        assert!(SampleSeries::new(g, alloc::vec![0.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn order_decomposition() {
        let o = FracOrder::new(1.5).unwrap();
        assert_eq!(o.m(), 2);
        assert_eq!(o.epsilon(), 0.5);
        let o = FracOrder::new(0.3).unwrap();
        assert_eq!(o.m(), 1);
        assert!((o.epsilon() - 0.7).abs() < 1e-15);
        let o = FracOrder::new(2.0).unwrap();
        assert!(o.is_integer());
        assert!(o.require_fractional().is_err());
        assert!(FracOrder::new(0.0).is_err());
    }
}
