//! CSV and JSON artifacts. Data files carry no timestamps so repeated runs
//! are byte-identical; wall time lives only in the summary.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use fracdyn_core::{ConvergenceTable, SimulationResult};
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::scenario::Comparison;

/// 17 significant digits.
fn num(out: &mut String, x: f64) {
    write!(out, "{x:.16e}").expect("writing to a String cannot fail");
}

fn row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        num(out, v);
    }
    out.push('\n');
}

/// Columns `t, q_1..q_n, qdot_1..qdot_n, lambda, constraint_residual`.
/// Quantities a system does not produce are written as `NaN`.
pub fn trajectory_csv(sim: &SimulationResult) -> String {
    let n = sim.dim();
    let mut out = String::from("t");
    (1..=n).for_each(|k| write!(out, ",q_{k}").unwrap());
    (1..=n).for_each(|k| write!(out, ",qdot_{k}").unwrap());
    out.push_str(",lambda,constraint_residual\n");
    for (j, t) in sim.grid.nodes().enumerate() {
        let lambda = sim.multiplier.get(j).copied().unwrap_or(f64::NAN);
        let res = sim.residual.get(j).copied().unwrap_or(f64::NAN);
        let vals = std::iter::once(t)
            .chain(sim.q[j].iter().copied())
            .chain(sim.qdot[j].iter().copied())
            .chain([lambda, res]);
        row(&mut out, vals);
    }
    out
}

/// Columns `t` then `q_k, q_k_exact, abs_error_k` per compared coordinate.
pub fn comparison_csv(sim: &SimulationResult, cmp: &Comparison) -> String {
    let mut out = String::from("t");
    for k in &cmp.coordinates {
        let k = k + 1;
        write!(out, ",q_{k},q_{k}_exact,abs_error_{k}").unwrap();
    }
    out.push('\n');
    for (j, t) in sim.grid.nodes().enumerate() {
        let mut vals = vec![t];
        for (k, exact) in cmp.coordinates.iter().zip(&cmp.exact) {
            let q = sim.q[j][*k];
            vals.extend([q, exact[j], (q - exact[j]).abs()]);
        }
        row(&mut out, vals);
    }
    out
}

pub fn convergence_csv(table: &ConvergenceTable) -> String {
    let mut out = String::from("h,error,order\n");
    for r in &table.rows {
        num(&mut out, r.h);
        out.push(',');
        num(&mut out, r.error);
        out.push(',');
        num(&mut out, r.order.unwrap_or(f64::NAN));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareSummary {
    pub max_error: f64,
    pub tolerance: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub scheme: String,
    pub path: String,
    pub h: f64,
    pub t_end: f64,
    pub steps: usize,
    /// `None` for systems without a constraint.
    pub max_residual: Option<f64>,
    pub final_q: Vec<f64>,
    pub final_qdot: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<CompareSummary>,
    pub wall_time_s: f64,
}

impl Summary {
    pub fn new(cfg: &ScenarioConfig, sim: &SimulationResult, cmp: Option<&Comparison>, wall_time_s: f64) -> Self {
        let comparison = cmp.map(|c| {
            let max_error = c.max_error(sim);
            let tolerance = cfg.output.compare_tolerance;
            CompareSummary { max_error, tolerance, within_tolerance: max_error <= tolerance }
        });
        Self {
            scenario: cfg.scenario.to_string(),
            scheme: format!("{:?}", cfg.solver.scheme).to_lowercase(),
            path: format!("{:?}", cfg.solver.path).to_lowercase(),
            h: sim.grid.step(),
            t_end: sim.grid.t_end(),
            steps: sim.grid.n_steps(),
            max_residual: (!sim.residual.is_empty()).then(|| sim.max_abs_residual()),
            final_q: sim.q.last().cloned().unwrap_or_default(),
            final_qdot: sim.qdot.last().cloned().unwrap_or_default(),
            comparison,
            wall_time_s,
        }
    }
}

/// Paths of the files written by one run.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub trajectory: PathBuf,
    pub summary: PathBuf,
    pub comparison: Option<PathBuf>,
}

pub fn write_run(
    dir: &Path,
    stem: &str,
    sim: &SimulationResult,
    cmp: Option<&Comparison>,
    summary: &Summary,
) -> io::Result<Artifacts> {
    std::fs::create_dir_all(dir)?;
    let trajectory = dir.join(format!("{stem}.csv"));
    std::fs::write(&trajectory, trajectory_csv(sim))?;
    let comparison = match cmp {
        Some(c) => {
            let p = dir.join(format!("{stem}_comparison.csv"));
            std::fs::write(&p, comparison_csv(sim, c))?;
            Some(p)
        }
        None => None,
    };
    let summary_path = dir.join(format!("{stem}_summary.json"));
    let json = serde_json::to_string_pretty(summary).map_err(io::Error::other)?;
    std::fs::write(&summary_path, json + "\n")?;
    Ok(Artifacts { trajectory, summary: summary_path, comparison })
}
