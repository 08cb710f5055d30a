//! Empirical convergence orders from a ladder of step sizes.

use alloc::vec::Vec;

use crate::error::{FracError, Result};

/// Fewest rungs a study accepts.
pub const MIN_RUNGS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub error: f64,
    /// Order measured against the previous rung.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln error` against `ln h`.
    pub fitted_order: Option<f64>,
    /// `false` when some refinement failed to reduce the error.
    pub monotone: bool,
}

fn check_ladder(ladder: &[f64], min: usize) -> Result<()> {
    if ladder.len() < min {
        return Err(FracError::domain(alloc::format!(
            "ladder must have at least {min} rungs, got {}",
            ladder.len()
        )));
    }
    if ladder.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(FracError::domain("ladder steps must be positive"));
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(FracError::domain("ladder steps must decrease strictly"));
    }
    Ok(())
}

fn table(rows_in: Vec<(f64, f64)>) -> ConvergenceTable {
    let mut rows = Vec::with_capacity(rows_in.len());
    let mut monotone = true;
    for (i, &(h, e)) in rows_in.iter().enumerate() {
        let order = if i == 0 {
            None
        } else {
            let (hp, ep) = rows_in[i - 1];
            if e >= ep {
                monotone = false;
            }
            (e > 0.0 && ep > 0.0).then(|| libm::log(ep / e) / libm::log(hp / h))
        };
        rows.push(ConvergenceRow { h, error: e, order });
    }
    let pts: Vec<(f64, f64)> = rows_in
        .iter()
        .filter(|(_, e)| *e > 0.0 && e.is_finite())
        .map(|(h, e)| (libm::log(*h), libm::log(*e)))
        .collect();
    let fitted_order = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    });
    ConvergenceTable { rows, fitted_order, monotone }
}

/// Runs `error_at(h)` for every rung; `ladder` must decrease strictly.
pub fn convergence_study(ladder: &[f64], mut error_at: impl FnMut(f64) -> Result<f64>) -> Result<ConvergenceTable> {
    check_ladder(ladder, MIN_RUNGS)?;
    let mut rows = Vec::with_capacity(ladder.len());
    for &h in ladder {
        rows.push((h, error_at(h)?));
    }
    Ok(table(rows))
}

/// Uses the finest rung as the reference. `sample_at(h)` must return values
/// at the same physical times for every rung.
pub fn self_convergence(ladder: &[f64], mut sample_at: impl FnMut(f64) -> Result<Vec<f64>>) -> Result<ConvergenceTable> {
    check_ladder(ladder, MIN_RUNGS + 1)?;
    let mut runs = Vec::with_capacity(ladder.len());
    for &h in ladder {
        runs.push(sample_at(h)?);
    }
    let reference = runs.pop().expect("ladder is non-empty");
    let mut rows = Vec::with_capacity(runs.len());
    for (h, run) in ladder.iter().zip(&runs) {
        if run.len() != reference.len() {
            return Err(FracError::domain("rungs returned different sample counts"));
        }
        let e = run.iter().zip(&reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        rows.push((*h, e));
    }
    Ok(table(rows))
}
