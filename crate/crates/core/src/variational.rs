//! Post-hoc check of the variational Euler–Lagrange equations on a
//! completed trajectory.

use alloc::vec;
use alloc::vec::Vec;

use crate::constrained::{ConstraintPoint, SystemSpec};
use crate::error::{FracError, Result};
use crate::frac_ops::{caputo_left, caputo_right, differentiate};
use crate::grid::{FracOrder, Grid, SampleSeries};
use crate::linalg::dot;
use crate::solver::SimulationResult;

/// Residuals of the variational equations and the constraint-force bracket.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalReport {
    /// `∂L/∂q_k - d/dt ∂L/∂q̇_k + B_k` per coordinate.
    pub residual: Vec<SampleSeries>,
    /// `|P B|`, the bracket `B` contracted with all variations orthogonal to `∂f/∂q̇`.
    pub admissible_bracket: SampleSeries,
}

fn derivative(values: &[f64], h: f64, times: usize) -> Result<Vec<f64>> {
    let mut d = values.to_vec();
    for _ in 0..times {
        d = differentiate(&d, h)?;
    }
    Ok(d)
}

fn left(grid: Grid, values: &[f64], order: FracOrder) -> Result<Vec<f64>> {
    let d = derivative(values, grid.step(), order.m())?;
    Ok(caputo_left(&SampleSeries::from_parts(grid, d), order)?.into_values())
}

fn right(grid: Grid, values: &[f64], order: FracOrder) -> Result<Vec<f64>> {
    let d = derivative(values, grid.step(), order.m())?;
    Ok(caputo_right(&SampleSeries::from_parts(grid, d), order)?.into_values())
}

/// Evaluates the variational Euler–Lagrange residual for a caller-supplied
/// multiplier `mu`. Derivatives of samples use finite differences, so values
/// within a few nodes of either end carry the largest discretization error.
pub fn variational_residual(traj: &SimulationResult, mu: &SampleSeries, sys: &SystemSpec) -> Result<VariationalReport> {
    let grid = traj.grid;
    if *mu.grid() != grid || traj.q.len() != grid.len() || traj.qdot.len() != grid.len() {
        return Err(FracError::domain("trajectory, multiplier and grid lengths differ"));
    }
    let n = traj.dim();
    if n != sys.dim() {
        return Err(FracError::domain("trajectory dimension differs from the system"));
    }
    let h = grid.step();
    let len = grid.len();
    let mu = mu.values();

    let mut acc = Vec::with_capacity(n);
    for k in 0..n {
        acc.push(differentiate(&traj.velocity(k), h)?);
    }

    let mut residual: Vec<Vec<f64>> = vec![vec![0.0; len]; n];
    for (k, res) in residual.iter_mut().enumerate() {
        let mut g = vec![0.0; n];
        for (j, r) in res.iter_mut().enumerate() {
            g.iter_mut().for_each(|x| *x = 0.0);
            sys.potential.gradient(&traj.q[j], &mut g);
            *r = -g[k] - acc[k][j];
        }
    }

    let mut bracket: Vec<Vec<f64>> = vec![vec![0.0; len]; n];
    let mut chetaev: Vec<Vec<f64>> = vec![vec![0.0; n]; len];
    if let Some(c) = sys.constraint.as_deref() {
        let order = c.order();
        order.require_fractional()?;
        let mut dl = vec![vec![0.0; n]; len];
        let mut dr = vec![vec![0.0; n]; len];
        for k in 0..n {
            let q = traj.coordinate(k);
            for (j, (l, r)) in left(grid, &q, order)?.into_iter().zip(right(grid, &q, order)?).enumerate() {
                dl[j][k] = l;
                dr[j][k] = r;
            }
        }
        let mut fq = vec![vec![0.0; len]; n];
        let mut wl = vec![vec![0.0; len]; n];
        let mut wr = vec![vec![0.0; len]; n];
        let mut wg = vec![vec![0.0; len]; n];
        let mut buf = vec![0.0; n];
        for j in 0..len {
            let x = ConstraintPoint { q: &traj.q[j], qdot: &traj.qdot[j], dl: &dl[j], dr: &dr[j] };
            c.grad_q(&x, &mut buf);
            (0..n).for_each(|k| fq[k][j] = mu[j] * buf[k]);
            c.grad_left(&x, &mut buf);
            (0..n).for_each(|k| wl[k][j] = mu[j] * buf[k]);
            c.grad_right(&x, &mut buf);
            (0..n).for_each(|k| wr[k][j] = mu[j] * buf[k]);
            c.grad_qdot(&x, &mut chetaev[j]);
            (0..n).for_each(|k| wg[k][j] = mu[j] * chetaev[j][k]);
        }
        for k in 0..n {
            let l = left(grid, &wl[k], order)?;
            let r = right(grid, &wr[k], order)?;
            let d = differentiate(&wg[k], h)?;
            for j in 0..len {
                bracket[k][j] = fq[k][j] + l[j] + r[j] - d[j];
                residual[k][j] += bracket[k][j];
            }
        }
    }

    let admissible: Vec<f64> = (0..len)
        .map(|j| {
            let b: Vec<f64> = (0..n).map(|k| bracket[k][j]).collect();
            let g = &chetaev[j];
            let g2 = dot(g, g);
            let s = if g2 > 0.0 { dot(&b, g) / g2 } else { 0.0 };
            libm::sqrt(b.iter().zip(g).map(|(bk, gk)| (bk - s * gk) * (bk - s * gk)).sum())
        })
        .collect();

    Ok(VariationalReport {
        residual: residual.into_iter().map(|r| SampleSeries::from_parts(grid, r)).collect(),
        admissible_bracket: SampleSeries::from_parts(grid, admissible),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constrained::{LinearConstraint, Potential};
    use crate::solver::StepDiagnostics;

    fn line(grid: Grid) -> SimulationResult {
        let q = grid.nodes().map(|t| vec![1.0 + 2.0 * t, -t]).collect();
        let qdot = grid.nodes().map(|_| vec![2.0, -1.0]).collect();
        SimulationResult {
            grid,
            q,
            qdot,
            multiplier: Vec::new(),
            residual: Vec::new(),
            diagnostics: vec![StepDiagnostics::default(); grid.len()],
        }
    }

    #[test]
    fn free_particle_has_zero_residual() {
        let grid = Grid::new(0.0, 1.0, 50).unwrap();
        let sys = SystemSpec::new(Potential::zero(), vec![1.0, 0.0], vec![2.0, -1.0]);
        let mu = SampleSeries::from_fn(grid, |_| 0.0).unwrap();
        let r = variational_residual(&line(grid), &mu, &sys).unwrap();
        for s in &r.residual {
            assert!(s.values().iter().all(|x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn grid_mismatch_rejected() {
        let grid = Grid::new(0.0, 1.0, 50).unwrap();
        let sys = SystemSpec::new(Potential::zero(), vec![1.0, 0.0], vec![2.0, -1.0]);
        let mu = SampleSeries::from_fn(Grid::new(0.0, 1.0, 40).unwrap(), |_| 0.0).unwrap();
        assert!(variational_residual(&line(grid), &mu, &sys).is_err());
    }

    #[test]
    fn bracket_is_orthogonal_part_only() {
        // f = q̇₁ with a constant multiplier: the bracket is along ∂f/∂q̇ only
        let grid = Grid::new(0.0, 1.0, 50).unwrap();
        let sys = SystemSpec::new(Potential::zero(), vec![1.0, 0.0], vec![2.0, -1.0])
            .with_constraint(LinearConstraint::new(vec![1.0, 0.0], vec![0.0, 0.0], FracOrder::new(0.5).unwrap()).unwrap());
        let mu = SampleSeries::from_fn(grid, |t| t * t).unwrap();
        let r = variational_residual(&line(grid), &mu, &sys).unwrap();
        assert!(r.admissible_bracket.values().iter().all(|x| x.abs() < 1e-12));
        // residual₁ = -d/dt μ = -2t
        for (j, t) in grid.nodes().enumerate() {
            assert!((r.residual[0].at(j) + 2.0 * t).abs() < 1e-10);
        }
    }
}
