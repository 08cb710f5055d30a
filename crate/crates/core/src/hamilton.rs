//! Hamiltonian form for constraints `f = A_k(q, D^α q) q̇_k = 0`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::constrained::Potential;
use crate::error::{FracError, Result};
use crate::grid::{FracOrder, Grid};
use crate::linalg::{dot, SquareMatrix};
use crate::memory::{MemoryKind, MemoryOperator};
use crate::solver::{IntegratorConfig, SimulationResult, StepDiagnostics, DIVERGENCE_BOUND};

/// Coefficients `A_k(q, D^α q)` of a constraint linear in the velocities.
pub trait ConstraintField: Send + Sync {
    fn order(&self) -> FracOrder;
    fn value(&self, q: &[f64], dq: &[f64], out: &mut [f64]);
    /// `out[(l, k)] = ∂A_l/∂q_k`.
    fn d_q(&self, q: &[f64], dq: &[f64], out: &mut SquareMatrix);
    /// `out[(l, k)] = ∂A_l/∂(D^α q_k)`.
    fn d_frac(&self, q: &[f64], dq: &[f64], out: &mut SquareMatrix);
}

/// `A = a + B D^α q`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineField {
    pub a: Vec<f64>,
    pub b: SquareMatrix,
    pub order: FracOrder,
}

impl AffineField {
    pub fn constant(a: Vec<f64>, order: FracOrder) -> Self {
        let n = a.len();
        Self { a, b: SquareMatrix::zeros(n), order }
    }
}

impl ConstraintField for AffineField {
    fn order(&self) -> FracOrder {
        self.order
    }
    fn value(&self, _q: &[f64], dq: &[f64], out: &mut [f64]) {
        self.b.mul_vec(dq, out);
        for (o, a) in out.iter_mut().zip(&self.a) {
            *o += a;
        }
    }
    fn d_q(&self, _: &[f64], _: &[f64], out: &mut SquareMatrix) {
        out.fill(0.0);
    }
    fn d_frac(&self, _: &[f64], _: &[f64], out: &mut SquareMatrix) {
        *out = self.b.clone();
    }
}

pub struct HamiltonSpec {
    pub potential: Potential,
    pub field: Box<dyn ConstraintField>,
    pub q_init: Vec<f64>,
    pub p_init: Vec<f64>,
}

/// Local part of the Hamilton equations at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonRates {
    pub mu: f64,
    pub qdot: Vec<f64>,
    /// `-∇u + μ (∂A/∂q)ᵀ q̇`, without the fractional term.
    pub pdot_local: Vec<f64>,
    /// Integrand `w_k = μ Σ_l ∂A_l/∂(D^α q_k) q̇_l` of the fractional term.
    pub w: Vec<f64>,
}

/// Evaluates `μ = A·p/A²`, `q̇ = p - μA` and the local momentum rates.
pub fn hamilton_rhs(spec: &HamiltonSpec, t: f64, q: &[f64], p: &[f64], dq: &[f64]) -> Result<HamiltonRates> {
    let n = q.len();
    let mut a = vec![0.0; n];
    spec.field.value(q, dq, &mut a);
    let a2 = dot(&a, &a);
    if !(a2 > 1e-24) {
        let mut state = q.to_vec();
        state.extend_from_slice(p);
        return Err(FracError::SingularConstraint { t, norm: libm::sqrt(a2), state });
    }
    let mu = dot(&a, p) / a2;
    let qdot: Vec<f64> = p.iter().zip(&a).map(|(pk, ak)| pk - mu * ak).collect();
    let mut grad = vec![0.0; n];
    spec.potential.gradient(q, &mut grad);
    let mut da = SquareMatrix::zeros(n);
    spec.field.d_q(q, dq, &mut da);
    let mut pdot_local = vec![0.0; n];
    for k in 0..n {
        let s: f64 = (0..n).map(|l| da[(l, k)] * qdot[l]).sum();
        pdot_local[k] = -grad[k] + mu * s;
    }
    spec.field.d_frac(q, dq, &mut da);
    let w = (0..n).map(|k| mu * (0..n).map(|l| da[(l, k)] * qdot[l]).sum::<f64>()).collect();
    Ok(HamiltonRates { mu, qdot, pdot_local, w })
}

/// Hamilton trajectory with its momenta.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonResult {
    pub sim: SimulationResult,
    pub p: Vec<Vec<f64>>,
}

struct FracHistory {
    op: MemoryOperator,
    second: bool,
    step: f64,
    hist: Vec<Vec<f64>>,
    rate: Vec<f64>,
}

impl FracHistory {
    fn new(order: f64, h: f64, n_max: usize, window: Option<usize>, first: &[f64], rate: Option<&[f64]>) -> Self {
        let second = order > 1.0;
        let kind = if second { MemoryKind::Second { gamma: order } } else { MemoryKind::L1 { gamma: order } };
        let mut hist = Vec::with_capacity(first.len());
        for x in first {
            let mut v = Vec::with_capacity(n_max + 1);
            v.push(*x);
            hist.push(v);
        }
        Self {
            op: MemoryOperator::new(kind, h, n_max, window),
            second,
            step: h,
            hist,
            rate: rate.map_or_else(|| vec![f64::NAN; first.len()], <[f64]>::to_vec),
        }
    }

    fn push(&mut self, x: &[f64]) {
        for (k, hk) in self.hist.iter_mut().enumerate() {
            hk.push(x[k]);
        }
    }

    fn replace_last(&mut self, x: &[f64]) {
        for (k, hk) in self.hist.iter_mut().enumerate() {
            *hk.last_mut().expect("history is never empty") = x[k];
        }
    }

    /// Caputo derivative at the newest node. An unknown initial rate is taken
    /// from the first two samples.
    fn current(&self) -> Vec<f64> {
        self.hist
            .iter()
            .zip(&self.rate)
            .map(|(hk, r)| {
                let rate = if self.second && r.is_nan() {
                    if hk.len() < 2 {
                        0.0
                    } else {
                        (hk[1] - hk[0]) / self.step
                    }
                } else {
                    *r
                };
                self.op.value(hk, rate)
            })
            .collect()
    }
}

/// Velocity-Verlet-like scheme: half kick, drift with `q̇ = P p`, half kick.
pub fn integrate_hamilton(spec: &HamiltonSpec, cfg: &IntegratorConfig) -> Result<HamiltonResult> {
    cfg.validate()?;
    let n = spec.q_init.len();
    if n == 0 || spec.p_init.len() != n {
        return Err(FracError::domain("q_init and p_init must have equal nonzero length"));
    }
    let order = spec.field.order();
    order.require_fractional()?;
    if order.alpha() > 2.0 {
        return Err(FracError::UnsupportedOrder { alpha: order.alpha(), reason: "Hamilton form supports orders below 2" });
    }
    let grid: Grid = cfg.grid()?;
    let h = grid.step();
    let steps = grid.n_steps();
    let window = cfg.window();

    let zeros = vec![0.0; n];
    let r0 = hamilton_rhs(spec, 0.0, &spec.q_init, &spec.p_init, &zeros)?;
    let mut qh = FracHistory::new(order.alpha(), h, steps, window, &spec.q_init, Some(&r0.qdot));
    let mut wh = FracHistory::new(order.alpha(), h, steps, window, &r0.w, None);

    let mut q = spec.q_init.clone();
    let mut p = spec.p_init.clone();
    let mut rates = r0;
    let mut dw = zeros.clone();
    let mut sim = SimulationResult {
        grid,
        q: vec![q.clone()],
        qdot: vec![rates.qdot.clone()],
        multiplier: vec![rates.mu],
        residual: vec![0.0],
        diagnostics: vec![StepDiagnostics::default()],
    };
    let mut moms = vec![p.clone()];

    for step in 1..=steps {
        let t = grid.node(step);
        let p_half: Vec<f64> = (0..n).map(|k| p[k] + 0.5 * h * (rates.pdot_local[k] + dw[k])).collect();
        let dq_now = qh.current();
        let drift = hamilton_rhs(spec, grid.node(step - 1), &q, &p_half, &dq_now)?;
        let q_new: Vec<f64> = (0..n).map(|k| q[k] + h * drift.qdot[k]).collect();
        qh.push(&q_new);
        let dq_new = qh.current();

        let trial = hamilton_rhs(spec, t, &q_new, &p_half, &dq_new)?;
        wh.push(&trial.w);
        let dw_trial = wh.current();
        let p_new: Vec<f64> =
            (0..n).map(|k| p_half[k] + 0.5 * h * (trial.pdot_local[k] + dw_trial[k])).collect();

        rates = hamilton_rhs(spec, t, &q_new, &p_new, &dq_new)?;
        wh.replace_last(&rates.w);
        dw = wh.current();

        if !q_new.iter().chain(&p_new).all(|x| x.is_finite() && x.abs() <= DIVERGENCE_BOUND) {
            return Err(FracError::Diverged { t, step, partial: Box::new(sim) });
        }
        let mut a = vec![0.0; n];
        spec.field.value(&q_new, &dq_new, &mut a);
        q = q_new;
        p = p_new;
        sim.q.push(q.clone());
        sim.residual.push(dot(&a, &rates.qdot));
        sim.qdot.push(rates.qdot.clone());
        sim.multiplier.push(rates.mu);
        sim.diagnostics.push(StepDiagnostics {
            history_terms: qh.op.span(step),
            max_correction: dw.iter().fold(0.0, |m, x| m.max(x.abs())),
        });
        moms.push(p.clone());
    }
    Ok(HamiltonResult { sim, p: moms })
}
