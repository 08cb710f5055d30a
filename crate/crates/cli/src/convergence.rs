//! Step-size ladders for a scenario.

use fracdyn_core::convergence::{convergence_study, self_convergence};
use fracdyn_core::{ConvergenceTable, FracError};
use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::scenario::{run, with_step, RunError};

/// Parses `"0.01,0.005,0.0025"`.
pub fn parse_ladder(spec: &str) -> Result<Vec<f64>, String> {
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad ladder entry {s:?}: {e}")))
        .collect()
}

/// `h, h/2, …` with `rungs` entries.
pub fn halving(h: f64, rungs: usize) -> Vec<f64> {
    (0..rungs).map(|i| h / (1u64 << i) as f64).collect()
}

/// Uses the scenario's oracle when it has one, the finest rung otherwise.
/// Rungs run in parallel on `pool`.
pub fn study(cfg: &ScenarioConfig, ladder: &[f64], pool: &rayon::ThreadPool) -> Result<ConvergenceTable, RunError> {
    // surfaces ladder errors before the expensive runs
    convergence_study(ladder, |_| Ok(1.0))?;
    let mut base = cfg.clone();
    base.output.compare = true;
    let runs: Vec<_> = pool.install(|| {
        ladder
            .par_iter()
            .map(|&h| {
                let c = with_step(&base, h);
                c.validate()?;
                run(&c)
            })
            .collect::<Result<Vec<_>, RunError>>()
    })?;
    let has_oracle = runs.iter().all(|r| r.comparison.is_some());
    if has_oracle {
        let mut it = runs.iter();
        return Ok(convergence_study(ladder, |_| {
            let r = it.next().expect("one run per rung");
            Ok(r.comparison.as_ref().expect("checked").max_error(&r.sim))
        })?);
    }
    // sample every run at the coarsest grid's nodes
    let coarse = runs[0].sim.grid;
    let mut it = runs.iter();
    Ok(self_convergence(ladder, |_| {
        let r = it.next().expect("one run per rung");
        let stride = (r.sim.grid.n_steps() as f64 / coarse.n_steps() as f64).round() as usize;
        if stride * coarse.n_steps() != r.sim.grid.n_steps() {
            return Err(FracError::Domain("rungs must refine the coarsest grid by integer factors".into()));
        }
        Ok(r.sim.q.iter().step_by(stride).flat_map(|q| q.iter().copied()).collect())
    })?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_parsing() {
        assert_eq!(parse_ladder("0.1, 0.05,0.025").unwrap(), vec![0.1, 0.05, 0.025]);
        assert!(parse_ladder("0.1,x").is_err());
        assert_eq!(halving(0.1, 3), vec![0.1, 0.05, 0.025]);
    }

    #[test]
    fn short_ladder_rejected() {
        let cfg = crate::preset("harmonic");
        let e = study(&cfg, &[0.01], &crate::thread_pool()).unwrap_err();
        assert!(e.to_string().contains("at least 3 rungs"), "{e}");
    }

    #[test]
    fn harmonic_baseline_is_second_order() {
        let cfg = crate::preset("harmonic");
        let t = study(&cfg, &halving(0.01, 4), &crate::thread_pool()).unwrap();
        assert!((t.fitted_order.unwrap() - 2.0).abs() < 0.1, "{t:?}");
    }
}
