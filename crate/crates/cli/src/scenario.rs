//! Builds the named scenarios and runs them.

use fracdyn_core::constrained::{LinearConstraint, NonlinearOscillator, QuadraticConstraint};
use fracdyn_core::hamilton::integrate_hamilton;
use fracdyn_core::linalg::SquareMatrix;
use fracdyn_core::oscillator::forcing;
use fracdyn_core::solver::{integrate_fractional_abm, integrate_second_order, History, Scheme};
use fracdyn_core::{
    exact_solution, rhs_general, rhs_linear, rhs_nonlinear_frac_oscillator, AffineField, FluxPath, FracError, FracOrder,
    HamiltonSpec, IntegratorConfig, OscillatorForm, OscillatorSpec, Potential, SimulationResult, SystemSpec,
};

use crate::config::{
    ConfigError, ForceConfig, FormName, OscillatorMethod, PathName, PotentialConfig, ScenarioConfig, ScenarioId,
    SchemeName,
};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] FracError),
}

impl RunError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Solver(FracError::Diverged { .. } | FracError::SingularConstraint { .. }) => 2,
            RunError::Solver(FracError::AccuracyLoss { .. }) => 3,
            RunError::Solver(_) => 1,
        }
    }
}

/// Exact values of selected coordinates at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub coordinates: Vec<usize>,
    pub exact: Vec<Vec<f64>>,
}

impl Comparison {
    pub fn max_error(&self, sim: &SimulationResult) -> f64 {
        let mut worst = 0.0f64;
        for (k, exact) in self.coordinates.iter().zip(&self.exact) {
            for (q, e) in sim.q.iter().zip(exact) {
                worst = worst.max((q[*k] - e).abs());
            }
        }
        worst
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub sim: SimulationResult,
    pub comparison: Option<Comparison>,
}

pub fn integrator(cfg: &ScenarioConfig) -> Result<IntegratorConfig, RunError> {
    let scheme = match cfg.solver.scheme {
        SchemeName::Verlet => Scheme::VelocityVerletLagged,
        SchemeName::Euler => Scheme::SemiImplicitEuler,
        SchemeName::Abm => Scheme::AbmFractional,
    };
    let mut ic = IntegratorConfig::new(cfg.grid.h, cfg.grid.t_end)?.with_scheme(scheme);
    if let Some(w) = cfg.solver.window {
        ic = ic.with_history(History::Truncated(w))?;
    }
    ic.tolerance = cfg.solver.tolerance;
    Ok(ic)
}

fn potential(cfg: &ScenarioConfig) -> Potential {
    match cfg.params.potential.clone() {
        None | Some(PotentialConfig::Zero) => Potential::zero(),
        Some(PotentialConfig::Quadratic { k }) => Potential::quadratic(k),
        Some(PotentialConfig::Quartic { k, c }) => {
            let (k2, c2) = (k.clone(), c.clone());
            Potential::new(
                move |q| q.iter().enumerate().map(|(i, x)| 0.5 * k[i] * x * x + 0.25 * c[i] * x.powi(4)).sum(),
                move |q, g| {
                    for (i, (gi, x)) in g.iter_mut().zip(q).enumerate() {
                        *gi = k2[i] * x + c2[i] * x.powi(3);
                    }
                },
            )
        }
    }
}

fn order(cfg: &ScenarioConfig) -> Result<FracOrder, RunError> {
    Ok(FracOrder::new(cfg.alpha()?)?)
}

fn path(cfg: &ScenarioConfig) -> FluxPath {
    match cfg.solver.path {
        PathName::Shifted => FluxPath::Shifted,
        PathName::Direct => FluxPath::Direct,
    }
}

fn system(cfg: &ScenarioConfig) -> SystemSpec {
    let mut s = SystemSpec::new(potential(cfg), cfg.initial.q.clone(), cfg.initial.qdot.clone());
    s.project_initial = cfg.initial.project;
    s
}

/// `q = q0 cos ωt + (v0/ω) sin ωt` for `u = ½ k q²`.
fn harmonic(k: f64, q0: f64, v0: f64, t: f64) -> f64 {
    if k == 0.0 {
        return q0 + v0 * t;
    }
    let w = k.sqrt();
    q0 * (w * t).cos() + v0 / w * (w * t).sin()
}

fn quadratic_k(cfg: &ScenarioConfig) -> Option<Vec<f64>> {
    match &cfg.params.potential {
        None | Some(PotentialConfig::Zero) => Some(vec![0.0; cfg.dim()]),
        Some(PotentialConfig::Quadratic { k }) => Some(k.clone()),
        Some(PotentialConfig::Quartic { .. }) => None,
    }
}

fn harmonic_comparison(cfg: &ScenarioConfig, sim: &SimulationResult, coordinates: Vec<usize>) -> Option<Comparison> {
    let k = quadratic_k(cfg)?;
    let exact = coordinates
        .iter()
        .map(|&i| sim.grid.nodes().map(|t| harmonic(k[i], cfg.initial.q[i], cfg.initial.qdot[i], t)).collect())
        .collect();
    Some(Comparison { coordinates, exact })
}

fn nonlinear(cfg: &ScenarioConfig) -> Result<NonlinearOscillator, RunError> {
    let p = &cfg.params;
    let form = match p.form.unwrap_or_default() {
        FormName::Reduced => OscillatorForm::Reduced,
        FormName::PreReduction => OscillatorForm::PreReduction,
    };
    let g = p.g.expect("validated");
    let (q0, v0) = (cfg.initial.q[0], cfg.initial.qdot[0]);
    let sys = match p.force.clone().expect("validated") {
        ForceConfig::Linear { k } => rhs_nonlinear_frac_oscillator(g, move |x| k * x, order(cfg)?, form, q0, v0),
        ForceConfig::Cubic { k, c } => {
            rhs_nonlinear_frac_oscillator(g, move |x| k * x + c * x * x * x, order(cfg)?, form, q0, v0)
        }
    }?;
    Ok(sys)
}

/// Runs a validated scenario.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    run_inner(cfg).map_err(|e| match e {
        RunError::Solver(e @ FracError::InconsistentInitialData { .. }) => RunError::Config(ConfigError::Invalid {
            key: "initial.qdot",
            reason: format!("{e}; set initial.project = true to project onto the constraint"),
        }),
        e => e,
    })
}

fn run_inner(cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    let ic = integrator(cfg)?;
    let p = &cfg.params;
    let compare = cfg.output.compare;
    let out = match cfg.scenario {
        ScenarioId::Oscillator1d => {
            let alpha = cfg.alpha()?;
            let w2 = p.omega2.expect("validated");
            let (q0, qp0) = (cfg.initial.q[0], cfg.initial.qdot[0]);
            let spec = OscillatorSpec::new(alpha, w2, q0, qp0)?;
            let sim = match p.method.unwrap_or_default() {
                OscillatorMethod::Direct => {
                    let init = [q0, qp0];
                    let m = (alpha - 1.0).ceil() as usize;
                    integrate_fractional_abm(alpha - 1.0, |t, x| forcing(&spec, t) - w2 * x, &init[..m], &ic)?
                }
                OscillatorMethod::Constraint => {
                    let lin = LinearConstraint::new(vec![1.0], vec![1.0], FracOrder::new(alpha - 1.0)?)?;
                    let mut sys = rhs_linear(system(cfg).with_constraint(lin), path(cfg))?;
                    integrate_second_order(&mut sys, &ic)?
                }
            };
            let comparison = if compare {
                let exact = exact_solution(&spec, &sim.grid)?.into_values();
                Some(Comparison { coordinates: vec![0], exact: vec![exact] })
            } else {
                None
            };
            RunOutput { sim, comparison }
        }
        ScenarioId::LinearNd | ScenarioId::Case12d | ScenarioId::Case12dB2zero | ScenarioId::Case22d => {
            let lin = LinearConstraint::new(
                cfg.vector("params.a", &p.a)?,
                cfg.vector("params.b", &p.b)?,
                order(cfg)?,
            )?;
            let mut sys = rhs_linear(system(cfg).with_constraint(lin), path(cfg))?;
            let sim = integrate_second_order(&mut sys, &ic)?;
            let comparison = match cfg.scenario {
                ScenarioId::Case12dB2zero if compare => harmonic_comparison(cfg, &sim, vec![0]),
                _ => None,
            };
            RunOutput { sim, comparison }
        }
        ScenarioId::Custom => {
            let spec = system(cfg);
            let (spec, oracle) = match &p.a {
                None => (spec, true),
                Some(_) => {
                    let linear = LinearConstraint::new(
                        cfg.vector("params.a", &p.a)?,
                        cfg.vector("params.b", &p.b)?,
                        order(cfg)?,
                    )?;
                    let c = p.c.clone().unwrap_or_else(|| vec![0.0; cfg.dim()]);
                    let offset = p.offset.unwrap_or(0.0);
                    (spec.with_constraint(QuadraticConstraint { linear, c, offset }), false)
                }
            };
            let mut sys = rhs_general(spec, path(cfg))?;
            let sim = integrate_second_order(&mut sys, &ic)?;
            let comparison =
                if oracle && compare { harmonic_comparison(cfg, &sim, (0..cfg.dim()).collect()) } else { None };
            RunOutput { sim, comparison }
        }
        ScenarioId::NonlinearFracosc => {
            let mut sys = nonlinear(cfg)?;
            RunOutput { sim: integrate_second_order(&mut sys, &ic)?, comparison: None }
        }
        ScenarioId::HamiltonLinear => {
            let n = cfg.dim();
            let mut b = SquareMatrix::zeros(n);
            if let Some(m) = &p.b_matrix {
                for i in 0..n {
                    for j in 0..n {
                        b[(i, j)] = m[i * n + j];
                    }
                }
            }
            let spec = HamiltonSpec {
                potential: potential(cfg),
                field: Box::new(AffineField { a: cfg.vector("params.a", &p.a)?, b, order: order(cfg)? }),
                q_init: cfg.initial.q.clone(),
                p_init: cfg.initial.qdot.clone(),
            };
            RunOutput { sim: integrate_hamilton(&spec, &ic)?.sim, comparison: None }
        }
    };
    Ok(out)
}

pub fn with_step(cfg: &ScenarioConfig, h: f64) -> ScenarioConfig {
    let mut c = cfg.clone();
    c.grid.h = h;
    c
}
