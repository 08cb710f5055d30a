//! Verification suites: each row is a measured quantity against a bound.

use std::f64::consts::PI;
use std::fmt::Write as _;

use fracdyn_core::constrained::LinearConstraint;
use fracdyn_core::convergence::convergence_study;
use fracdyn_core::frac_ops::{caputo_left, caputo_left_history, differentiate, prop1_shift};
use fracdyn_core::mittag_leffler::{ml, ml_decomp_f, ml_decomp_g, MLParams};
use fracdyn_core::solver::{integrate_second_order, IntegratorConfig};
use fracdyn_core::special::{gamma, rgamma};
use fracdyn_core::{
    exact_solution, integrate_hamilton, rhs_general, rhs_linear, rhs_nonlinear_frac_oscillator, AffineField, FluxPath,
    FracOrder, Grid, HamiltonSpec, OscillatorForm, OscillatorSpec, Potential, SampleSeries, SimulationResult,
    SystemSpec,
};
use rayon::prelude::*;

use crate::scenario::{run, with_step, RunError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Operators,
    MittagLeffler,
    Oscillator,
    Constraints,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    /// `NaN` when the evaluation itself failed.
    pub measured: f64,
    pub bound: Bound,
    pub note: Option<String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::AtMost(b) => self.measured <= b,
            Bound::AtLeast(b) => self.measured >= b,
        }
    }
}

type Eval = fn() -> Result<f64, RunError>;

struct Row {
    suite: &'static str,
    name: &'static str,
    bound: Bound,
    eval: Eval,
}

const fn row(suite: &'static str, name: &'static str, bound: Bound, eval: Eval) -> Row {
    Row { suite, name, bound, eval }
}

fn e(a: f64, b: f64, z: f64) -> Result<f64, RunError> {
    Ok(ml(MLParams::new(a, b)?, z)?)
}

fn max_over(xs: impl Iterator<Item = f64>, f: impl Fn(f64) -> Result<f64, RunError>) -> Result<f64, RunError> {
    let mut worst = 0.0f64;
    for x in xs {
        worst = worst.max(f(x)?);
    }
    Ok(worst)
}

fn span(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |i| lo + (hi - lo) * i as f64 / n as f64)
}

fn ml_exp() -> Result<f64, RunError> {
    max_over(span(-5.0, 5.0, 200), |z| Ok((e(1.0, 1.0, z)? - z.exp()).abs()))
}

fn ml_cos() -> Result<f64, RunError> {
    max_over(span(0.0, 10.0, 200), |t| Ok((e(2.0, 1.0, -t * t)? - t.cos()).abs()))
}

fn ml_expm1() -> Result<f64, RunError> {
    max_over(span(-5.0, 5.0, 200).filter(|z| *z != 0.0), |z| Ok((e(1.0, 2.0, z)? - z.exp_m1() / z).abs()))
}

fn ml_origin() -> Result<f64, RunError> {
    let mut worst = 0.0f64;
    for &(a, b) in &[(0.5, 1.0), (1.5, 2.5), (2.5, 0.7), (0.8, 3.2)] {
        worst = worst.max((e(a, b, 0.0)? - rgamma(b)).abs());
    }
    Ok(worst)
}

fn ml_decomposition() -> Result<f64, RunError> {
    let mut worst = 0.0f64;
    for &a in &[1.25, 1.5, 1.75] {
        for &t in &[0.5, 1.0, 2.0, 5.0, 10.0] {
            let split = ml_decomp_f(a, 0, t)? + ml_decomp_g(a, 0, t)?;
            worst = worst.max((e(a, 1.0, -t.powf(a))? - split).abs());
        }
    }
    Ok(worst)
}

/// Largest `|slope + α|` of `ln|E_α(-t^α)|` against `ln t` on `[50, 500]`.
fn ml_tail_slope() -> Result<f64, RunError> {
    let mut worst = 0.0f64;
    for &a in &[1.25, 1.5, 1.75] {
        let pts: Vec<(f64, f64)> = span(50f64.ln(), 500f64.ln(), 40)
            .map(|lt| Ok((lt, e(a, 1.0, -lt.exp().powf(a))?.abs().ln())))
            .collect::<Result<_, RunError>>()?;
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        worst = worst.max((slope + a).abs());
    }
    Ok(worst)
}

/// Largest `|g_{α,0}(t)| / ((2/α) e^{t cos(π/α)})`.
fn ml_envelope() -> Result<f64, RunError> {
    let mut worst = 0.0f64;
    for &a in &[1.25, 1.5, 1.75] {
        for t in span(0.1, 50.0, 100) {
            let env = 2.0 / a * (t * (PI / a).cos()).exp();
            worst = worst.max(ml_decomp_g(a, 0, t)?.abs() / env);
        }
    }
    Ok(worst)
}

const LADDER: [f64; 5] = [1.0 / 256.0, 1.0 / 512.0, 1.0 / 1024.0, 1.0 / 2048.0, 1.0 / 4096.0];

fn power_rule(p: f64, alpha: f64, t: f64) -> f64 {
    gamma(p + 1.0) / gamma(p + 1.0 - alpha) * t.powf(p - alpha)
}

/// Smallest fitted order of the quadrature power rule over a few `(p, α)`.
fn trapezoid_order() -> Result<f64, RunError> {
    let mut lowest = f64::INFINITY;
    for &(p, alpha) in &[(4.0, 0.5), (4.0, 1.5), (3.5, 0.3)] {
        let order = FracOrder::new(alpha)?;
        let m = order.m() as f64;
        let t = convergence_study(&LADDER, |h| {
            let g = Grid::with_step(0.0, 1.0, h)?;
            let dm = gamma(p + 1.0) / gamma(p + 1.0 - m);
            let d = caputo_left(&SampleSeries::from_fn(g, |t| dm * t.powf(p - m))?, order)?;
            Ok(g.nodes().zip(d.values()).map(|(t, v)| (v - power_rule(p, alpha, t)).abs()).fold(0.0, f64::max))
        })?;
        lowest = lowest.min(t.fitted_order.unwrap_or(f64::NAN));
    }
    Ok(lowest)
}

fn l1_order() -> Result<f64, RunError> {
    let order = FracOrder::new(0.5)?;
    let t = convergence_study(&LADDER, |h| {
        let g = Grid::with_step(0.0, 1.0, h)?;
        let q = SampleSeries::from_fn(g, |t| t * t)?;
        Ok((caputo_left_history(&q, g.n_steps(), order)? - power_rule(2.0, 0.5, 1.0)).abs())
    })?;
    Ok(t.fitted_order.unwrap_or(f64::NAN))
}

/// Residual of `d/dt D^α f = D^{α+1} f + shift` at `t = 1` for `f = t³ + t² + t`,
/// finest rung; infinite when refinement fails to reduce it.
fn shift_identity(alpha: f64) -> Result<f64, RunError> {
    let order = FracOrder::new(alpha)?;
    let derivs: [fn(f64) -> f64; 3] = [|t| 3.0 * t * t + 2.0 * t + 1.0, |t| 6.0 * t + 2.0, |_| 6.0];
    let m = order.m();
    let mut errs = Vec::new();
    for &h in &LADDER {
        let g = Grid::with_step(0.0, 1.0 + 2.0 * h, h)?;
        let low = caputo_left(&SampleSeries::from_fn(g, derivs[m - 1])?, order)?;
        let high = caputo_left(&SampleSeries::from_fn(g, derivs[m])?, order.plus_one())?;
        let j = g.index_of(1.0);
        let lhs = differentiate(low.values(), h)?[j];
        errs.push((lhs - high.at(j) - prop1_shift(order, derivs[m - 1](0.0), 1.0)?).abs());
    }
    if errs.windows(2).any(|w| w[1] >= w[0]) {
        return Ok(f64::INFINITY);
    }
    Ok(*errs.last().expect("ladder is non-empty"))
}

fn shift_half() -> Result<f64, RunError> {
    shift_identity(0.5)
}

fn shift_three_halves() -> Result<f64, RunError> {
    shift_identity(1.5)
}

fn oscillator_closed_form() -> Result<f64, RunError> {
    // with C1 = C2 = 0 only the q0 terms remain: free response plus the t^{3-α} forcing
    let spec = OscillatorSpec::with_constants(2.5, 1.0, 1.0, 0.0, 0.0, 0.0)?;
    let g = Grid::new(0.0, 10.0, 200)?;
    let q = exact_solution(&spec, &g)?;
    let b = 1.5;
    let mut worst = 0.0f64;
    for (t, v) in g.nodes().zip(q.values()) {
        let want = e(b, 1.0, -t.powf(b))? + t.powf(b + 1.5) * e(b, b + 2.5, -t.powf(b))?;
        worst = worst.max((v - want).abs());
    }
    Ok(worst)
}

fn preset_comparison(name: &str) -> Result<f64, RunError> {
    let cfg = crate::preset(name);
    let out = run(&cfg)?;
    Ok(out.comparison.map_or(f64::NAN, |c| c.max_error(&out.sim)))
}

fn oscillator_direct() -> Result<f64, RunError> {
    preset_comparison("oscillator-1d-direct")
}

fn oscillator_chain() -> Result<f64, RunError> {
    preset_comparison("oscillator-1d")
}

fn b2zero_classical() -> Result<f64, RunError> {
    preset_comparison("case1-2d-b2zero")
}

fn max_gap(a: &SimulationResult, b: &SimulationResult) -> f64 {
    a.q.iter()
        .zip(&b.q)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

fn projected_newton() -> Result<f64, RunError> {
    let spec = SystemSpec::new(Potential::quadratic(vec![1.0, 1.0]), vec![1.0, 0.0], vec![0.0, 0.0])
        .with_constraint(LinearConstraint::new(vec![0.0, 1.0], vec![0.0, 0.0], FracOrder::new(0.5)?)?);
    let r = integrate_second_order(&mut rhs_linear(spec, FluxPath::Shifted)?, &IntegratorConfig::new(1e-3, 10.0)?)?;
    Ok(r.grid.nodes().zip(&r.q).map(|(t, q)| (q[0] - t.cos()).abs().max(q[1].abs())).fold(0.0, f64::max))
}

fn hamilton_lagrange() -> Result<f64, RunError> {
    let a = vec![1.0, 1.0];
    let k = vec![1.0, 2.0];
    let order = FracOrder::new(0.5)?;
    let cfg = IntegratorConfig::new(1e-3, 5.0)?;
    let spec = SystemSpec::new(Potential::quadratic(k.clone()), vec![1.0, 0.0], vec![0.5, -0.5])
        .with_constraint(LinearConstraint::new(a.clone(), vec![0.0, 0.0], order)?);
    let lag = integrate_second_order(&mut rhs_linear(spec, FluxPath::Shifted)?, &cfg)?;
    let ham = integrate_hamilton(
        &HamiltonSpec {
            potential: Potential::quadratic(k),
            field: Box::new(AffineField::constant(a, order)),
            q_init: vec![1.0, 0.0],
            p_init: vec![0.5, -0.5],
        },
        &cfg,
    )?;
    Ok(max_gap(&lag, &ham.sim))
}

fn energy_drift() -> Result<f64, RunError> {
    let k = [1.0, 2.0];
    let energy = |q: &[f64], v: &[f64]| 0.5 * (0..2).map(|i| v[i] * v[i] + k[i] * q[i] * q[i]).sum::<f64>();
    let spec = SystemSpec::new(Potential::quadratic(k.to_vec()), vec![1.0, 0.0], vec![0.0, 0.5]);
    let r = integrate_second_order(&mut rhs_general(spec, FluxPath::Shifted)?, &IntegratorConfig::new(1e-3, 10.0)?)?;
    let e0 = energy(&r.q[0], &r.qdot[0]);
    Ok(r.q.iter().zip(&r.qdot).map(|(q, v)| (energy(q, v) - e0).abs()).fold(0.0, f64::max))
}

fn oscillator_forms() -> Result<f64, RunError> {
    let cfg = IntegratorConfig::new(1.0 / 1024.0, 5.0)?;
    let order = FracOrder::new(1.5)?;
    let mut pre = rhs_nonlinear_frac_oscillator(1.0, |x| x, order, OscillatorForm::PreReduction, 1.0, 0.0)?;
    let mut red = rhs_nonlinear_frac_oscillator(1.0, |x| x, order, OscillatorForm::Reduced, 1.0, 0.0)?;
    Ok(max_gap(&integrate_second_order(&mut pre, &cfg)?, &integrate_second_order(&mut red, &cfg)?))
}

/// `max|f|` at `h` over `max|f|` at `h/2`; infinite when the finer run holds
/// the constraint to round-off.
pub fn residual_ratio(name: &str) -> Result<f64, RunError> {
    let cfg = crate::preset(name);
    let coarse = run(&cfg)?.sim.max_abs_residual();
    let fine = run(&with_step(&cfg, cfg.grid.h / 2.0))?.sim.max_abs_residual();
    Ok(if fine < 1e-12 { f64::INFINITY } else { coarse / fine })
}

fn ratio_linear_2d() -> Result<f64, RunError> {
    residual_ratio("linear-2d")
}

fn ratio_linear_3d() -> Result<f64, RunError> {
    residual_ratio("linear-3d")
}

fn ratio_case2() -> Result<f64, RunError> {
    residual_ratio("case2-2d")
}

const TWO_GRID: f64 = 1.681_792_830_507_429; // 2^0.75

const ROWS: &[Row] = &[
    row("mittag-leffler", "E(1,1)(z) = exp z on [-5, 5]", Bound::AtMost(1e-10), ml_exp),
    row("mittag-leffler", "E(2,1)(-t^2) = cos t on [0, 10]", Bound::AtMost(1e-10), ml_cos),
    row("mittag-leffler", "E(1,2)(z) = (exp z - 1)/z", Bound::AtMost(1e-10), ml_expm1),
    row("mittag-leffler", "E(a,b)(0) = 1/Gamma(b)", Bound::AtMost(1e-10), ml_origin),
    row("mittag-leffler", "decomposition f + g", Bound::AtMost(1e-6), ml_decomposition),
    row("mittag-leffler", "tail slope deviation from -alpha", Bound::AtMost(0.05), ml_tail_slope),
    row("mittag-leffler", "oscillatory part / envelope", Bound::AtMost(1.0 + 1e-12), ml_envelope),
    row("operators", "power rule order, quadrature", Bound::AtLeast(1.8), trapezoid_order),
    row("operators", "power rule order, L1 history (alpha 0.5)", Bound::AtLeast(1.4), l1_order),
    row("operators", "derivative shift residual (alpha 0.5)", Bound::AtMost(1e-2), shift_half),
    row("operators", "derivative shift residual (alpha 1.5)", Bound::AtMost(1e-2), shift_three_halves),
    row("oscillator", "exact solution vs Mittag-Leffler form", Bound::AtMost(1e-6), oscillator_closed_form),
    row("oscillator", "predictor-corrector vs exact", Bound::AtMost(1e-2), oscillator_direct),
    row("oscillator", "constraint chain vs exact", Bound::AtMost(1e-2), oscillator_chain),
    row("constraints", "projected Newton vs cos t", Bound::AtMost(1e-4), projected_newton),
    row("constraints", "b2 = 0: q1 vs classical oscillator", Bound::AtMost(1e-4), b2zero_classical),
    row("constraints", "Hamilton vs Lagrange, constant field", Bound::AtMost(5e-6), hamilton_lagrange),
    row("constraints", "free energy drift", Bound::AtMost(1e-6), energy_drift),
    row("constraints", "nonlinear oscillator forms", Bound::AtMost(5e-6), oscillator_forms),
    row("constraints", "residual two-grid ratio, linear-2d", Bound::AtLeast(TWO_GRID), ratio_linear_2d),
    row("constraints", "residual two-grid ratio, linear-3d", Bound::AtLeast(TWO_GRID), ratio_linear_3d),
    row("constraints", "residual two-grid ratio, case2-2d", Bound::AtLeast(TWO_GRID), ratio_case2),
];

fn suite_name(s: Suite) -> Option<&'static str> {
    match s {
        Suite::Operators => Some("operators"),
        Suite::MittagLeffler => Some("mittag-leffler"),
        Suite::Oscillator => Some("oscillator"),
        Suite::Constraints => Some("constraints"),
        Suite::All => None,
    }
}

/// Evaluates the rows of `suite` in parallel on `pool`, in table order.
pub fn run_suite(suite: Suite, pool: &rayon::ThreadPool) -> Vec<Check> {
    let want = suite_name(suite);
    let rows: Vec<&Row> = ROWS.iter().filter(|r| want.is_none_or(|w| w == r.suite)).collect();
    pool.install(|| {
        rows.par_iter()
            .map(|r| {
                let (measured, note) = match (r.eval)() {
                    Ok(v) => (v, None),
                    Err(e) => (f64::NAN, Some(e.to_string())),
                };
                Check { suite: r.suite, name: r.name, measured, bound: r.bound, note }
            })
            .collect()
    })
}

/// Plain-text table; failing rows end with `<<`.
pub fn report(checks: &[Check]) -> String {
    let mut out = String::new();
    writeln!(out, "{:<15} {:<44} {:>12} {:>14}  result", "suite", "check", "measured", "bound").unwrap();
    for c in checks {
        let bound = match c.bound {
            Bound::AtMost(b) => format!("<= {b:.3e}"),
            Bound::AtLeast(b) => format!(">= {b:.3e}"),
        };
        let verdict = if c.passed() { "pass" } else { "FAIL <<" };
        writeln!(out, "{:<15} {:<44} {:>12.3e} {:>14}  {verdict}", c.suite, c.name, c.measured, bound).unwrap();
        if let Some(n) = &c.note {
            writeln!(out, "{:<15} {n}", "").unwrap();
        }
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    writeln!(out, "{} checks, {failed} failed", checks.len()).unwrap();
    out
}
