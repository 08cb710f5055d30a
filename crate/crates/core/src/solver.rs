//! Fixed-step integrators for second-order systems with memory terms.
//!
//! Systems are written as `d/dt (v + M Φ) = F(t, q, v)` where `Φ` is a
//! causal memory flux. Over one step the flux increment is affine in the new
//! velocity, `ΔΦ = κ v_{n+1} + β`, so each step solves `(I + κM) v_{n+1} = r`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{FracError, Result};
use crate::frac_ops::{differentiate, first_node_weight, power_increments, second_difference_pow};
use crate::grid::{FracOrder, Grid};
use crate::linalg::SquareMatrix;
use crate::special::{gamma, rgamma};

/// States with a component above this magnitude count as diverged.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// Smallest memory window accepted by [`History::Truncated`].
pub const MIN_WINDOW: usize = 10;

/// Per-step bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    /// Number of history samples touched by the memory sums.
    pub history_terms: usize,
    /// Largest magnitude of the memory impulse applied in the step.
    pub max_correction: f64,
}

/// Trajectory produced by an integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub grid: Grid,
    /// `q[j]` is the configuration at node `j`.
    pub q: Vec<Vec<f64>>,
    pub qdot: Vec<Vec<f64>>,
    /// Multiplier history (λ or μ); empty without a constraint.
    pub multiplier: Vec<f64>,
    /// Constraint residual per node; empty without a constraint.
    pub residual: Vec<f64>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl SimulationResult {
    fn empty(grid: Grid) -> Self {
        Self {
            grid,
            q: Vec::with_capacity(grid.len()),
            qdot: Vec::with_capacity(grid.len()),
            multiplier: Vec::new(),
            residual: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.first().map_or(0, Vec::len)
    }

    /// Component `k` of the configuration at every node.
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.q.iter().map(|q| q[k]).collect()
    }

    pub fn velocity(&self, k: usize) -> Vec<f64> {
        self.qdot.iter().map(|v| v[k]).collect()
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    fn push(&mut self, q: Vec<f64>, v: Vec<f64>, obs: Observation) {
        self.q.push(q);
        self.qdot.push(v);
        if let Some(l) = obs.multiplier {
            self.multiplier.push(l);
        }
        if let Some(r) = obs.residual {
            self.residual.push(r);
        }
        self.diagnostics.push(obs.diagnostics);
    }

    /// Keeps the accepted prefix and shrinks the grid to match.
    fn truncated(mut self) -> Self {
        let n = self.q.len().saturating_sub(1);
        if n >= 1 && n < self.grid.n_steps() {
            let t_end = self.grid.node(n);
            if let Ok(g) = Grid::new(self.grid.t_start(), t_end, n) {
                self.grid = g;
            }
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    SemiImplicitEuler,
    /// Velocity Verlet; the memory flux of the predictor uses the lagged
    /// configuration, the corrector uses the predicted one.
    VelocityVerletLagged,
    /// Adams–Bashforth–Moulton predictor–corrector for single-term equations.
    AbmFractional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum History {
    Full,
    /// Keeps the most recent `n` intervals of every memory sum.
    Truncated(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub h: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub history: History,
    /// Accuracy target used by callers that compare against references.
    pub tolerance: f64,
}

impl IntegratorConfig {
    pub fn new(h: f64, t_end: f64) -> Result<Self> {
        let cfg = Self {
            h,
            t_end,
            scheme: Scheme::VelocityVerletLagged,
            history: History::Full,
            tolerance: 1e-6,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_history(mut self, history: History) -> Result<Self> {
        self.history = history;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(FracError::domain(alloc::format!("step {} must be positive", self.h)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(FracError::domain(alloc::format!("t_end {} must be positive", self.t_end)));
        }
        if self.h > self.t_end {
            return Err(FracError::domain("step exceeds the integration interval"));
        }
        if let History::Truncated(w) = self.history {
            if w < MIN_WINDOW {
                return Err(FracError::domain(alloc::format!(
                    "memory window {w} is below the minimum {MIN_WINDOW}"
                )));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(FracError::domain("tolerance must be positive"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::with_step(0.0, self.t_end, self.h)
    }

    pub fn window(&self) -> Option<usize> {
        match self.history {
            History::Full => None,
            History::Truncated(w) => Some(w),
        }
    }
}

/// What a system reports for an accepted node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Observation {
    pub multiplier: Option<f64>,
    pub residual: Option<f64>,
    pub diagnostics: StepDiagnostics,
}

/// Second-order system `d/dt (v + M Φ) = F` with a causal flux `Φ`.
///
/// Implementors own their history buffers; one value integrates one
/// trajectory.
pub trait MemorySystem {
    fn dim(&self) -> usize;

    /// Prepares buffers for `grid` and returns the initial state with its
    /// observation.
    fn start(&mut self, grid: &Grid, window: Option<usize>) -> Result<(Vec<f64>, Vec<f64>, Observation)>;

    /// Force at node `node` (the current node or the one after it).
    fn force(&mut self, node: usize, q: &[f64], v: &[f64], out: &mut [f64]) -> Result<()>;

    /// Coupling matrix at the current node `n`; `false` when it vanishes.
    fn coupling(&mut self, n: usize, q: &[f64], v: &[f64], m: &mut SquareMatrix) -> Result<bool>;

    /// Flux increment over `[t_n, t_{n+1}]` as `κ v_{n+1} + β`; writes `β`
    /// and returns `κ`. `q_next` is the best available end configuration.
    fn flux_increment(&mut self, n: usize, q_next: &[f64], beta: &mut [f64]) -> Result<f64>;

    /// Records the accepted state at node `node`.
    fn accept(&mut self, node: usize, q: &[f64], v: &[f64]) -> Result<Observation>;
}

fn check_finite(q: &[f64], v: &[f64]) -> bool {
    q.iter().chain(v).all(|x| x.is_finite() && x.abs() <= DIVERGENCE_BOUND)
}

/// `v_{n+1}` from `(I + κM) v = rhs - Mβ`.
fn implicit_velocity(
    coupled: bool,
    m: &SquareMatrix,
    kappa: f64,
    beta: &[f64],
    rhs: &mut [f64],
    t: f64,
) -> Result<Vec<f64>> {
    if !coupled {
        return Ok(rhs.to_vec());
    }
    let n = rhs.len();
    let mut mb = vec![0.0; n];
    m.mul_vec(beta, &mut mb);
    for (r, x) in rhs.iter_mut().zip(&mb) {
        *r -= x;
    }
    let mut a = SquareMatrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] += kappa * m[(i, j)];
        }
    }
    a.solve(rhs).ok_or_else(|| FracError::SingularPoint { t })
}

fn correction_size(coupled: bool, m: &SquareMatrix, kappa: f64, v: &[f64], beta: &[f64]) -> f64 {
    if !coupled {
        return 0.0;
    }
    let dphi: Vec<f64> = v.iter().zip(beta).map(|(x, b)| kappa * x + b).collect();
    let mut out = vec![0.0; v.len()];
    m.mul_vec(&dphi, &mut out);
    out.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Integrates a [`MemorySystem`] on `[0, cfg.t_end]`.
pub fn integrate_second_order<S: MemorySystem + ?Sized>(
    system: &mut S,
    cfg: &IntegratorConfig,
) -> Result<SimulationResult> {
    cfg.validate()?;
    if cfg.scheme == Scheme::AbmFractional {
        return Err(FracError::domain(
            "the predictor-corrector scheme applies to single-term equations only",
        ));
    }
    let grid = cfg.grid()?;
    let h = grid.step();
    let dim = system.dim();
    let (mut q, mut v, obs0) = system.start(&grid, cfg.window())?;
    let mut out = SimulationResult::empty(grid);
    out.push(q.clone(), v.clone(), obs0);

    let mut m = SquareMatrix::zeros(dim);
    let mut f_n = vec![0.0; dim];
    let mut f_next = vec![0.0; dim];
    let mut beta = vec![0.0; dim];

    for n in 0..grid.n_steps() {
        let t_next = grid.node(n + 1);
        system.force(n, &q, &v, &mut f_n)?;
        m.fill(0.0);
        let coupled = system.coupling(n, &q, &v, &mut m)?;

        let (q_new, v_new, kappa) = match cfg.scheme {
            Scheme::SemiImplicitEuler => {
                let kappa = system.flux_increment(n, &q, &mut beta)?;
                let mut rhs: Vec<f64> = v.iter().zip(&f_n).map(|(x, f)| x + h * f).collect();
                let v_new = implicit_velocity(coupled, &m, kappa, &beta, &mut rhs, t_next)?;
                let q_new: Vec<f64> = q.iter().zip(&v_new).map(|(x, w)| x + h * w).collect();
                (q_new, v_new, kappa)
            }
            _ => {
                let kappa = system.flux_increment(n, &q, &mut beta)?;
                let mut rhs: Vec<f64> = v.iter().zip(&f_n).map(|(x, f)| x + h * f).collect();
                let v_pred = implicit_velocity(coupled, &m, kappa, &beta, &mut rhs, t_next)?;
                let q_new: Vec<f64> =
                    (0..dim).map(|i| q[i] + 0.5 * h * (v[i] + v_pred[i])).collect();
                system.force(n + 1, &q_new, &v_pred, &mut f_next)?;
                let kappa = system.flux_increment(n, &q_new, &mut beta)?;
                let mut rhs: Vec<f64> =
                    (0..dim).map(|i| v[i] + 0.5 * h * (f_n[i] + f_next[i])).collect();
                let v_new = implicit_velocity(coupled, &m, kappa, &beta, &mut rhs, t_next)?;
                (q_new, v_new, kappa)
            }
        };

        if !check_finite(&q_new, &v_new) {
            return Err(FracError::Diverged {
                t: t_next,
                step: n + 1,
                partial: Box::new(out.truncated()),
            });
        }
        let correction = correction_size(coupled, &m, kappa, &v_new, &beta);
        let mut obs = system.accept(n + 1, &q_new, &v_new)?;
        obs.diagnostics.max_correction = obs.diagnostics.max_correction.max(correction);
        q = q_new;
        v = v_new;
        out.push(q.clone(), v.clone(), obs);
    }
    Ok(out)
}

/// Solves `D^α x = f(t, x)` (Caputo, `0 < α < 3`) with the fractional
/// Adams–Bashforth–Moulton scheme. `init[k]` is `x^{(k)}(0)` for
/// `k < ceil(α)`. The velocity column holds finite differences of `x`.
pub fn integrate_fractional_abm(
    order: f64,
    mut rhs: impl FnMut(f64, f64) -> f64,
    init: &[f64],
    cfg: &IntegratorConfig,
) -> Result<SimulationResult> {
    cfg.validate()?;
    FracOrder::new(order)?;
    if order >= 3.0 {
        return Err(FracError::UnsupportedOrder {
            alpha: order,
            reason: "predictor-corrector supports orders below 3",
        });
    }
    let m = libm::ceil(order) as usize;
    if init.len() != m {
        return Err(FracError::domain(alloc::format!(
            "order {order} needs {m} initial values, got {}",
            init.len()
        )));
    }
    let grid = cfg.grid()?;
    let h = grid.step();
    let n_steps = grid.n_steps();

    let taylor = |t: f64| -> f64 {
        let mut acc = 0.0;
        let mut tk = 1.0;
        for (k, x) in init.iter().enumerate() {
            acc += x * tk * rgamma(k as f64 + 1.0);
            tk *= t;
        }
        acc
    };
    let pred_w = power_increments(order, n_steps + 1);
    let corr_w: Vec<f64> = (0..=n_steps)
        .map(|d| if d == 0 { 0.0 } else { second_difference_pow(order + 1.0, d) })
        .collect();
    let pred_scale = libm::pow(h, order) / (order * gamma(order));
    let corr_scale = libm::pow(h, order) / gamma(order + 2.0);

    let mut x = Vec::with_capacity(grid.len());
    let mut fx = Vec::with_capacity(grid.len());
    x.push(init[0]);
    fx.push(rhs(0.0, init[0]));
    let mut diagnostics = vec![StepDiagnostics::default()];
    for n in 0..n_steps {
        let next = n + 1;
        let t = grid.node(next);
        let base = taylor(t);
        let mut pred = 0.0;
        for (j, f) in fx.iter().enumerate() {
            pred += pred_w[n - j] * f;
        }
        let x_pred = base + pred_scale * pred;
        let mut corr = first_node_weight(order, next) * fx[0];
        for (j, f) in fx.iter().enumerate().skip(1) {
            corr += corr_w[next - j] * f;
        }
        let f_pred = rhs(t, x_pred);
        let x_new = base + corr_scale * (corr + f_pred);
        if !(x_new.is_finite() && x_new.abs() <= DIVERGENCE_BOUND) {
            let mut partial = SimulationResult::empty(grid);
            for (j, xj) in x.iter().enumerate() {
                partial.push(vec![*xj], vec![f64::NAN], Observation { diagnostics: diagnostics[j], ..Default::default() });
            }
            return Err(FracError::Diverged { t, step: next, partial: Box::new(partial.truncated()) });
        }
        x.push(x_new);
        fx.push(rhs(t, x_new));
        diagnostics.push(StepDiagnostics {
            history_terms: next,
            max_correction: (x_new - x_pred).abs(),
        });
    }

    let xdot = differentiate(&x, h)?;
    let mut out = SimulationResult::empty(grid);
    for ((xj, vj), d) in x.iter().zip(&xdot).zip(diagnostics) {
        out.push(vec![*xj], vec![*vj], Observation { diagnostics: d, ..Default::default() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mittag_leffler::{ml, MLParams};

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(0.0, 1.0).is_err());
        assert!(IntegratorConfig::new(0.1, -1.0).is_err());
        let c = IntegratorConfig::new(0.1, 1.0).unwrap();
        assert!(c.with_history(History::Truncated(5)).is_err());
        assert!(c.with_history(History::Truncated(10)).is_ok());
    }

    #[test]
    fn abm_relaxation_matches_mittag_leffler() {
        let cfg = IntegratorConfig::new(1.0 / 1024.0, 2.0).unwrap().with_scheme(Scheme::AbmFractional);
        let r = integrate_fractional_abm(0.5, |_, x| -x, &[1.0], &cfg).unwrap();
        let e = MLParams::new(0.5, 1.0).unwrap();
        let n = r.grid.n_steps();
        let want = ml(e, -libm::sqrt(2.0)).unwrap();
        assert!((r.q[n][0] - want).abs() < 1e-4, "{} vs {want}", r.q[n][0]);
    }

    #[test]
    fn abm_integer_order_reproduces_harmonic_motion() {
        let cfg = IntegratorConfig::new(1.0 / 512.0, 3.0).unwrap();
        let r = integrate_fractional_abm(2.0, |_, x| -x, &[1.0, 0.0], &cfg).unwrap();
        let n = r.grid.n_steps();
        assert!((r.q[n][0] - libm::cos(3.0)).abs() < 1e-4);
    }

    #[test]
    fn abm_rejects_wrong_initial_data() {
        let cfg = IntegratorConfig::new(0.1, 1.0).unwrap();
        assert!(integrate_fractional_abm(1.5, |_, x| x, &[1.0], &cfg).is_err());
        assert!(integrate_fractional_abm(3.0, |_, x| x, &[1.0, 0.0, 0.0], &cfg).is_err());
    }

    #[test]
    fn abm_reports_divergence() {
        let cfg = IntegratorConfig::new(0.01, 50.0).unwrap();
        match integrate_fractional_abm(0.8, |_, x| 5.0 * x, &[1.0], &cfg) {
            Err(FracError::Diverged { partial, .. }) => assert!(partial.q.len() > 10),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    struct Harmonic;
    impl MemorySystem for Harmonic {
        fn dim(&self) -> usize {
            1
        }
        fn start(&mut self, _: &Grid, _: Option<usize>) -> Result<(Vec<f64>, Vec<f64>, Observation)> {
            Ok((vec![1.0], vec![0.0], Observation::default()))
        }
        fn force(&mut self, _: usize, q: &[f64], _: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = -q[0];
            Ok(())
        }
        fn coupling(&mut self, _: usize, _: &[f64], _: &[f64], _: &mut SquareMatrix) -> Result<bool> {
            Ok(false)
        }
        fn flux_increment(&mut self, _: usize, _: &[f64], beta: &mut [f64]) -> Result<f64> {
            beta[0] = 0.0;
            Ok(0.0)
        }
        fn accept(&mut self, _: usize, _: &[f64], _: &[f64]) -> Result<Observation> {
            Ok(Observation::default())
        }
    }

    #[test]
    fn verlet_is_second_order_and_euler_first_order() {
        let err = |scheme, h| {
            let cfg = IntegratorConfig::new(h, 2.0).unwrap().with_scheme(scheme);
            let r = integrate_second_order(&mut Harmonic, &cfg).unwrap();
            (r.q[r.grid.n_steps()][0] - libm::cos(2.0)).abs()
        };
        let v = err(Scheme::VelocityVerletLagged, 0.01) / err(Scheme::VelocityVerletLagged, 0.005);
        let e = err(Scheme::SemiImplicitEuler, 0.01) / err(Scheme::SemiImplicitEuler, 0.005);
        assert!((v - 4.0).abs() < 0.3, "{v}");
        assert!((e - 2.0).abs() < 0.3, "{e}");
    }
}
