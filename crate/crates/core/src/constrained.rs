//! Equations of motion for systems with a fractional nonholonomic constraint
//! `f(q, q̇, D^α q) = 0` under Chetaev's rule.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{FracError, Result};
use crate::grid::{FracOrder, Grid};
use crate::linalg::{dot, SquareMatrix};
use crate::memory::{MemoryKind, MemoryOperator};
use crate::solver::{MemorySystem, Observation, StepDiagnostics};
use crate::special::rgamma;

/// Tolerance on `|f|` for initial data.
pub const CONSISTENCY_TOL: f64 = 1e-10;

/// Below this `|∂f/∂q̇|²` the constraint counts as singular.
const SINGULAR_NORM2: f64 = 1e-24;

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Potential energy `u(q)` with its gradient.
pub struct Potential {
    value: Box<ValueFn>,
    grad: Box<GradFn>,
}

impl core::fmt::Debug for Potential {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("Potential")
    }
}

impl Potential {
    pub fn new(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self { value: Box::new(value), grad: Box::new(grad) }
    }

    pub fn zero() -> Self {
        Self::new(|_| 0.0, |_, g| g.fill(0.0))
    }

    /// `u = ½ Σ k_i q_i²`.
    pub fn quadratic(k: Vec<f64>) -> Self {
        Self::polynomial(k, Vec::new())
    }

    /// `u = ½ Σ k_i q_i² + Σ c_i q_i`; missing coefficients are zero.
    pub fn polynomial(k: Vec<f64>, c: Vec<f64>) -> Self {
        let k2 = k.clone();
        let c2 = c.clone();
        Self::new(
            move |q| {
                q.iter()
                    .enumerate()
                    .map(|(i, x)| {
                        0.5 * k.get(i).copied().unwrap_or(0.0) * x * x + c.get(i).copied().unwrap_or(0.0) * x
                    })
                    .sum()
            },
            move |q, g| {
                for (i, (gi, x)) in g.iter_mut().zip(q).enumerate() {
                    *gi = k2.get(i).copied().unwrap_or(0.0) * x + c2.get(i).copied().unwrap_or(0.0);
                }
            },
        )
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        (self.value)(q)
    }

    pub fn gradient(&self, q: &[f64], out: &mut [f64]) {
        (self.grad)(q, out)
    }
}

/// Arguments of a constraint function.
#[derive(Debug, Clone, Copy)]
pub struct ConstraintPoint<'a> {
    pub q: &'a [f64],
    pub qdot: &'a [f64],
    /// Left Caputo derivative `D^α q`.
    pub dl: &'a [f64],
    /// Right Caputo derivative; zero in forward simulations.
    pub dr: &'a [f64],
}

/// Constraint `f(q, q̇, D^α_left q, D^α_right q)` with its partial derivatives.
pub trait FractionalConstraint: Send + Sync {
    fn order(&self) -> FracOrder;
    fn value(&self, x: &ConstraintPoint) -> f64;
    fn grad_q(&self, x: &ConstraintPoint, out: &mut [f64]);
    fn grad_qdot(&self, x: &ConstraintPoint, out: &mut [f64]);
    fn grad_left(&self, x: &ConstraintPoint, out: &mut [f64]);
    fn grad_right(&self, _x: &ConstraintPoint, out: &mut [f64]) {
        out.fill(0.0);
    }
    fn as_linear(&self) -> Option<&LinearConstraint> {
        None
    }
}

/// `f = Σ a_k q̇_k + Σ b_k D^α q_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub order: FracOrder,
}

impl LinearConstraint {
    pub fn new(a: Vec<f64>, b: Vec<f64>, order: FracOrder) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return Err(FracError::domain("a and b must have the same nonzero length"));
        }
        Ok(Self { a, b, order })
    }
}

impl FractionalConstraint for LinearConstraint {
    fn order(&self) -> FracOrder {
        self.order
    }
    fn value(&self, x: &ConstraintPoint) -> f64 {
        dot(&self.a, x.qdot) + dot(&self.b, x.dl)
    }
    fn grad_q(&self, _: &ConstraintPoint, out: &mut [f64]) {
        out.fill(0.0);
    }
    fn grad_qdot(&self, _: &ConstraintPoint, out: &mut [f64]) {
        out.copy_from_slice(&self.a);
    }
    fn grad_left(&self, _: &ConstraintPoint, out: &mut [f64]) {
        out.copy_from_slice(&self.b);
    }
    fn as_linear(&self) -> Option<&LinearConstraint> {
        Some(self)
    }
}

/// `f = a·q̇ + b·D^α q + ½ Σ c_k q_k² - offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticConstraint {
    pub linear: LinearConstraint,
    pub c: Vec<f64>,
    pub offset: f64,
}

impl FractionalConstraint for QuadraticConstraint {
    fn order(&self) -> FracOrder {
        self.linear.order
    }
    fn value(&self, x: &ConstraintPoint) -> f64 {
        let quad: f64 = self.c.iter().zip(x.q).map(|(c, q)| 0.5 * c * q * q).sum();
        self.linear.value(x) + quad - self.offset
    }
    fn grad_q(&self, x: &ConstraintPoint, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.c.get(i).copied().unwrap_or(0.0) * x.q[i];
        }
    }
    fn grad_qdot(&self, x: &ConstraintPoint, out: &mut [f64]) {
        self.linear.grad_qdot(x, out);
    }
    fn grad_left(&self, x: &ConstraintPoint, out: &mut [f64]) {
        self.linear.grad_left(x, out);
    }
}

/// Mechanical system with an optional fractional constraint.
pub struct SystemSpec {
    pub potential: Potential,
    pub constraint: Option<Box<dyn FractionalConstraint>>,
    pub q_init: Vec<f64>,
    pub qdot_init: Vec<f64>,
    /// `q^{(m)}(0)` with `m = ceil(α)`, when known.
    pub higher_init: Option<Vec<f64>>,
    /// Project inconsistent initial velocities onto the constraint instead of failing.
    pub project_initial: bool,
}

impl SystemSpec {
    pub fn new(potential: Potential, q_init: Vec<f64>, qdot_init: Vec<f64>) -> Self {
        Self {
            potential,
            constraint: None,
            q_init,
            qdot_init,
            higher_init: None,
            project_initial: false,
        }
    }

    pub fn with_constraint(mut self, c: impl FractionalConstraint + 'static) -> Self {
        self.constraint = Some(Box::new(c));
        self
    }

    pub fn dim(&self) -> usize {
        self.q_init.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 || self.qdot_init.len() != n {
            return Err(FracError::domain("initial position and velocity must have equal nonzero length"));
        }
        if let Some(h) = &self.higher_init {
            if h.len() != n {
                return Err(FracError::domain("higher-order initial data has the wrong length"));
            }
        }
        if self.q_init.iter().chain(&self.qdot_init).any(|x| !x.is_finite()) {
            return Err(FracError::domain("initial data must be finite"));
        }
        Ok(())
    }
}

/// `P = I - a aᵀ/a²`.
pub fn projector(a: &[f64]) -> Result<SquareMatrix> {
    let a2 = dot(a, a);
    if !(a2 > SINGULAR_NORM2) {
        return Err(FracError::SingularConstraint { t: 0.0, norm: libm::sqrt(a2), state: a.to_vec() });
    }
    let n = a.len();
    let mut p = SquareMatrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] -= a[i] * a[j] / a2;
        }
    }
    Ok(p)
}

/// Partial derivatives of a constraint at one point.
struct Partials {
    g: Vec<f64>,
    h: Vec<f64>,
    fq: Vec<f64>,
    g2: f64,
}

fn partials(c: &dyn FractionalConstraint, x: &ConstraintPoint, t: f64) -> Result<Partials> {
    let n = x.q.len();
    let mut p = Partials { g: vec![0.0; n], h: vec![0.0; n], fq: vec![0.0; n], g2: 0.0 };
    c.grad_qdot(x, &mut p.g);
    c.grad_left(x, &mut p.h);
    c.grad_q(x, &mut p.fq);
    p.g2 = dot(&p.g, &p.g);
    if !(p.g2 > SINGULAR_NORM2) {
        let mut state = x.q.to_vec();
        state.extend_from_slice(x.qdot);
        return Err(FracError::SingularConstraint { t, norm: libm::sqrt(p.g2), state });
    }
    Ok(p)
}

/// Multiplier `λ = (∂f/∂q̇·∇u - Σ ∂f/∂D^αq · D¹D^α q - ∂f/∂q · q̇) / |∂f/∂q̇|²`,
/// summed over the left and right derivatives.
pub fn lambda_general(
    c: &dyn FractionalConstraint,
    x: &ConstraintPoint,
    grad_u: &[f64],
    d1_dl: &[f64],
    d1_dr: &[f64],
    t: f64,
) -> Result<f64> {
    let p = partials(c, x, t)?;
    let mut hr = vec![0.0; x.q.len()];
    c.grad_right(x, &mut hr);
    Ok((dot(&p.g, grad_u) - dot(&p.h, d1_dl) - dot(&hr, d1_dr) - dot(&p.fq, x.qdot)) / p.g2)
}

/// How the time derivative of the memory flux is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxPath {
    /// Differences of a causal evaluation of `D^α q` from the velocity history.
    Direct,
    /// `D^{α+1} q` plus the initial-data term `t^{m-α-1}/Γ(m-α) q^{(m)}(0)`.
    Shifted,
}

enum Form {
    Free,
    General,
    Linear { p: SquareMatrix, m: SquareMatrix },
}

/// Right-hand side of the constrained equations of motion, ready for
/// [`crate::solver::integrate_second_order`].
pub struct ConstrainedRhs {
    spec: SystemSpec,
    form: Form,
    path: FluxPath,
    rt: Option<Runtime>,
}

struct Runtime {
    grid: Grid,
    order: f64,
    state_op: MemoryOperator,
    shift_op: Option<MemoryOperator>,
    v_hist: Vec<Vec<f64>>,
    /// `D^α q` at the current node.
    phi: Vec<f64>,
    /// Shifted path: `D^α q̇` at the current node for `α < 1`, its running
    /// time integral for `1 < α < 2`.
    dv: Vec<f64>,
    q_m0: Vec<f64>,
    current: usize,
    cache: Option<FluxCache>,
}

struct FluxCache {
    n: usize,
    kappa: f64,
    beta: Vec<f64>,
    /// Newest-sample coefficient and remainder of the shifted operator.
    op_kappa: f64,
    rests: Vec<f64>,
}

/// Right-hand side that evaluates λ from the constraint partials.
pub fn rhs_general(spec: SystemSpec, path: FluxPath) -> Result<ConstrainedRhs> {
    spec.validate()?;
    let form = if spec.constraint.is_some() { Form::General } else { Form::Free };
    Ok(ConstrainedRhs { spec, form, path, rt: None })
}

/// Closed-form right-hand side for `f = a·q̇ + b·D^α q`:
/// `q̈ = -P∇u - (a bᵀ/a²) D¹D^α q`.
pub fn rhs_linear(spec: SystemSpec, path: FluxPath) -> Result<ConstrainedRhs> {
    spec.validate()?;
    let lin = spec
        .constraint
        .as_ref()
        .and_then(|c| c.as_linear())
        .ok_or_else(|| FracError::domain("rhs_linear needs a linear constraint"))?;
    let n = spec.dim();
    if lin.a.len() != n {
        return Err(FracError::domain("constraint dimension differs from the state dimension"));
    }
    let p = projector(&lin.a)?;
    let a2 = dot(&lin.a, &lin.a);
    let mut m = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = lin.a[i] * lin.b[j] / a2;
        }
    }
    Ok(ConstrainedRhs { spec, form: Form::Linear { p, m }, path, rt: None })
}

impl ConstrainedRhs {
    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    /// Acceleration at a sampled state given `D^α q` and `D¹D^α q`.
    pub fn acceleration(&self, q: &[f64], v: &[f64], dl: &[f64], d1_dl: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.spec.dim();
        let mut f = vec![0.0; n];
        self.force_at(0.0, q, v, dl, &mut f)?;
        let mut m = SquareMatrix::zeros(n);
        let coupled = self.coupling_at(0.0, q, v, dl, &mut m)?;
        let mut md = vec![0.0; n];
        if coupled {
            m.mul_vec(d1_dl, &mut md);
        }
        for i in 0..n {
            out[i] = f[i] - md[i];
        }
        Ok(())
    }

    fn force_at(&self, t: f64, q: &[f64], v: &[f64], dl: &[f64], out: &mut [f64]) -> Result<()> {
        let n = q.len();
        let mut grad = vec![0.0; n];
        self.spec.potential.gradient(q, &mut grad);
        match &self.form {
            Form::Free => {
                for (o, g) in out.iter_mut().zip(&grad) {
                    *o = -g;
                }
            }
            Form::Linear { p, .. } => {
                p.mul_vec(&grad, out);
                out.iter_mut().for_each(|x| *x = -*x);
            }
            Form::General => {
                let c = self.spec.constraint.as_deref().expect("general form has a constraint");
                let zeros = vec![0.0; n];
                let x = ConstraintPoint { q, qdot: v, dl, dr: &zeros };
                let p = partials(c, &x, t)?;
                let s = (dot(&p.g, &grad) - dot(&p.fq, v)) / p.g2;
                for i in 0..n {
                    out[i] = -grad[i] + s * p.g[i];
                }
            }
        }
        Ok(())
    }

    fn coupling_at(&self, t: f64, q: &[f64], v: &[f64], dl: &[f64], m: &mut SquareMatrix) -> Result<bool> {
        match &self.form {
            Form::Free => Ok(false),
            Form::Linear { m: mm, .. } => {
                *m = mm.clone();
                Ok(true)
            }
            Form::General => {
                let c = self.spec.constraint.as_deref().expect("general form has a constraint");
                let n = q.len();
                let zeros = vec![0.0; n];
                let x = ConstraintPoint { q, qdot: v, dl, dr: &zeros };
                let p = partials(c, &x, t)?;
                for i in 0..n {
                    for j in 0..n {
                        m[(i, j)] = p.g[i] * p.h[j] / p.g2;
                    }
                }
                Ok(true)
            }
        }
    }

    fn observe(&self, t: f64, q: &[f64], v: &[f64], dl: &[f64], d1_dl: &[f64]) -> Result<(Option<f64>, Option<f64>)> {
        let Some(c) = self.spec.constraint.as_deref() else {
            return Ok((None, None));
        };
        let n = q.len();
        let zeros = vec![0.0; n];
        let x = ConstraintPoint { q, qdot: v, dl, dr: &zeros };
        let mut grad = vec![0.0; n];
        self.spec.potential.gradient(q, &mut grad);
        let lambda = lambda_general(c, &x, &grad, d1_dl, &zeros, t)?;
        Ok((Some(lambda), Some(c.value(&x))))
    }

    /// Makes `v0` satisfy the constraint with `D^α q(0) = 0`.
    fn consistent_velocity(&self) -> Result<Vec<f64>> {
        let mut v = self.spec.qdot_init.clone();
        let Some(c) = self.spec.constraint.as_deref() else {
            return Ok(v);
        };
        let q = &self.spec.q_init;
        let zeros = vec![0.0; q.len()];
        let residual = |v: &[f64]| c.value(&ConstraintPoint { q, qdot: v, dl: &zeros, dr: &zeros });
        let r0 = residual(&v);
        if r0.abs() <= CONSISTENCY_TOL {
            return Ok(v);
        }
        if !self.spec.project_initial {
            return Err(FracError::InconsistentInitialData { residual: r0.abs(), tolerance: CONSISTENCY_TOL });
        }
        for _ in 0..50 {
            let r = residual(&v);
            if r.abs() <= 1e-14 {
                break;
            }
            let p = partials(c, &ConstraintPoint { q, qdot: &v, dl: &zeros, dr: &zeros }, 0.0)?;
            for (vi, gi) in v.iter_mut().zip(&p.g) {
                *vi -= r * gi / p.g2;
            }
        }
        let r = residual(&v);
        if r.abs() > CONSISTENCY_TOL {
            return Err(FracError::InconsistentInitialData { residual: r.abs(), tolerance: CONSISTENCY_TOL });
        }
        Ok(v)
    }

    /// `q''(0)` for `1 < α < 2` when not supplied: the Chetaev direction is
    /// fixed so that `∂f/∂D^αq · q''(0) = 0`, which keeps `D¹D^α q` bounded at 0.
    fn estimate_second_derivative(&self, v0: &[f64]) -> Result<Vec<f64>> {
        let n = v0.len();
        let q = &self.spec.q_init;
        let zeros = vec![0.0; n];
        let mut f0 = vec![0.0; n];
        self.force_at(0.0, q, v0, &zeros, &mut f0)?;
        let Some(c) = self.spec.constraint.as_deref() else {
            return Ok(f0);
        };
        let p = partials(c, &ConstraintPoint { q, qdot: v0, dl: &zeros, dr: &zeros }, 0.0)?;
        let hg = dot(&p.h, &p.g);
        if hg.abs() > 1e-14 * libm::sqrt(dot(&p.h, &p.h) * p.g2) {
            let s = -dot(&p.h, &f0) / hg;
            for (x, g) in f0.iter_mut().zip(&p.g) {
                *x += s * g;
            }
        }
        Ok(f0)
    }

    fn rt(&self) -> &Runtime {
        self.rt.as_ref().expect("system not started")
    }

    /// Predicted `D^α q` at node `n+1` for velocity `v`.
    fn predicted_phi(&self, v: &[f64]) -> Vec<f64> {
        let rt = self.rt();
        rt.v_hist
            .iter()
            .zip(v)
            .map(|(hist, x)| {
                let (k, r) = rt.state_op.split_next(hist, 0.0);
                k * x + r
            })
            .collect()
    }
}

impl MemorySystem for ConstrainedRhs {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn start(&mut self, grid: &Grid, window: Option<usize>) -> Result<(Vec<f64>, Vec<f64>, Observation)> {
        let n = self.dim();
        let q0 = self.spec.q_init.clone();
        let v0 = self.consistent_velocity()?;
        let order = match self.spec.constraint.as_deref() {
            Some(c) => {
                let o = c.order();
                o.require_fractional()?;
                if o.alpha() > 2.0 {
                    return Err(FracError::UnsupportedOrder {
                        alpha: o.alpha(),
                        reason: "constraint orders above 2 are not integrated",
                    });
                }
                o.alpha()
            }
            None => 0.5,
        };
        let h = grid.step();
        let steps = grid.n_steps();
        let (state_kind, shift_kind) = if order < 1.0 {
            (MemoryKind::Integral { eps: 1.0 - order }, MemoryKind::L1 { gamma: order })
        } else {
            (MemoryKind::L1 { gamma: order - 1.0 }, MemoryKind::Staggered { gamma: order })
        };
        let q_m0 = if order < 1.0 {
            v0.clone()
        } else if let Some(hi) = &self.spec.higher_init {
            hi.clone()
        } else {
            self.estimate_second_derivative(&v0)?
        };
        let with_memory = !matches!(self.form, Form::Free);
        let state_op = MemoryOperator::new(state_kind, h, if with_memory { steps } else { 1 }, window);
        let shift_op = (with_memory && self.path == FluxPath::Shifted)
            .then(|| MemoryOperator::new(shift_kind, h, steps, window));
        let mut v_hist = Vec::with_capacity(n);
        for x in &v0 {
            let mut hist = Vec::with_capacity(if with_memory { grid.len() } else { 1 });
            hist.push(*x);
            v_hist.push(hist);
        }
        self.rt = Some(Runtime {
            grid: *grid,
            order,
            state_op,
            shift_op,
            v_hist,
            phi: vec![0.0; n],
            dv: vec![0.0; n],
            q_m0,
            current: 0,
            cache: None,
        });
        let zeros = vec![0.0; n];
        let (multiplier, residual) = self.observe(0.0, &q0, &v0, &zeros, &zeros)?;
        Ok((q0, v0, Observation { multiplier, residual, diagnostics: StepDiagnostics::default() }))
    }

    fn force(&mut self, node: usize, q: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        let rt = self.rt();
        let t = rt.grid.node(node);
        match self.form {
            Form::General if node != rt.current => {
                let dl = self.predicted_phi(v);
                self.force_at(t, q, v, &dl, out)
            }
            _ => self.force_at(t, q, v, &rt.phi, out),
        }
    }

    fn coupling(&mut self, n: usize, q: &[f64], v: &[f64], m: &mut SquareMatrix) -> Result<bool> {
        let rt = self.rt();
        self.coupling_at(rt.grid.node(n), q, v, &rt.phi, m)
    }

    fn flux_increment(&mut self, n: usize, _q_next: &[f64], beta: &mut [f64]) -> Result<f64> {
        if matches!(self.form, Form::Free) {
            beta.fill(0.0);
            return Ok(0.0);
        }
        if let Some(c) = &self.rt().cache {
            if c.n == n {
                beta.copy_from_slice(&c.beta);
                return Ok(c.kappa);
            }
        }
        let path = self.path;
        let rt = self.rt.as_mut().expect("system not started");
        let h = rt.grid.step();
        let dim = rt.v_hist.len();
        let mut rests = vec![0.0; dim];
        let mut op_kappa = 0.0;
        let kappa = match path {
            FluxPath::Direct => {
                let mut kappa = 0.0;
                for l in 0..dim {
                    let (k, r) = rt.state_op.split_next(&rt.v_hist[l], 0.0);
                    beta[l] = r - rt.phi[l];
                    kappa = k;
                }
                kappa
            }
            FluxPath::Shifted => {
                let op = rt.shift_op.as_ref().expect("shifted path has an operator");
                let p = libm::ceil(rt.order) - rt.order;
                let t0 = rt.grid.node(n);
                let t1 = rt.grid.node(n + 1);
                let jump = (libm::pow(t1, p) - libm::pow(t0, p)) * rgamma(p + 1.0);
                // below order 1 the trapezoid rule averages D^α q̇ over the
                // step; above it the operator already integrates in time
                let integrated = rt.order > 1.0;
                for l in 0..dim {
                    let (k, r) = op.split_next(&rt.v_hist[l], rt.q_m0[l]);
                    rests[l] = r;
                    op_kappa = k;
                    beta[l] = if integrated {
                        r - rt.dv[l]
                    } else {
                        0.5 * h * (rt.dv[l] + r)
                    } + rt.q_m0[l] * jump;
                }
                if integrated {
                    op_kappa
                } else {
                    0.5 * h * op_kappa
                }
            }
        };
        rt.cache = Some(FluxCache { n, kappa, beta: beta.to_vec(), op_kappa, rests });
        Ok(kappa)
    }

    fn accept(&mut self, node: usize, q: &[f64], v: &[f64]) -> Result<Observation> {
        let dim = self.dim();
        let path = self.path;
        let free = matches!(self.form, Form::Free);
        let rt = self.rt.as_mut().expect("system not started");
        let h = rt.grid.step();
        let mut d1 = vec![0.0; dim];
        if !free {
            let c = rt.cache.take().expect("flux evaluated before accept");
            debug_assert_eq!(c.n + 1, node);
            for l in 0..dim {
                let dphi = c.kappa * v[l] + c.beta[l];
                d1[l] = dphi / h;
                rt.v_hist[l].push(v[l]);
                match path {
                    FluxPath::Direct => rt.phi[l] += dphi,
                    FluxPath::Shifted => {
                        rt.dv[l] = c.op_kappa * v[l] + c.rests[l];
                        rt.phi[l] = rt.state_op.value(&rt.v_hist[l], 0.0);
                    }
                }
            }
        }
        rt.current = node;
        let t = rt.grid.node(node);
        let terms = rt.state_op.span(node);
        let phi = rt.phi.clone();
        let (multiplier, residual) = self.observe(t, q, v, &phi, &d1)?;
        Ok(Observation {
            multiplier,
            residual,
            diagnostics: StepDiagnostics { history_terms: if free { 0 } else { terms }, max_correction: 0.0 },
        })
    }
}

/// `(x, y) = ((q1+q2)/2, (q1-q2)/2)`.
pub fn case2_transform(q1: f64, q2: f64) -> (f64, f64) {
    (0.5 * (q1 + q2), 0.5 * (q1 - q2))
}

pub fn case2_inverse(x: f64, y: f64) -> (f64, f64) {
    (x + y, x - y)
}

/// `U(x, y) = u(x+y, x-y)`.
pub fn case2_potential(u: &Potential) -> impl Fn(f64, f64) -> f64 + '_ {
    move |x, y| u.value(&[x + y, x - y])
}

/// Which form of the nonlinear fractional oscillator to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OscillatorForm {
    /// `ẍ = -g D¹D^α x - g D¹J^{2-α} K(x)`.
    PreReduction,
    /// `ẍ = -(1/g) D^{2-α} ẋ - K(x)`.
    Reduced,
}

/// Nonlinear fractional oscillator obtained from the second planar case.
pub struct NonlinearOscillator {
    g: f64,
    alpha: f64,
    k: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    form: OscillatorForm,
    x0: f64,
    v0: f64,
    rt: Option<OscRuntime>,
}

struct OscRuntime {
    primary: MemoryOperator,
    forcing: Option<MemoryOperator>,
    v_hist: Vec<f64>,
    k_hist: Vec<f64>,
    phi: f64,
}

/// `1 < α < 2`, `g ≠ 0`.
pub fn rhs_nonlinear_frac_oscillator(
    g: f64,
    k: impl Fn(f64) -> f64 + Send + Sync + 'static,
    order: FracOrder,
    form: OscillatorForm,
    x0: f64,
    v0: f64,
) -> Result<NonlinearOscillator> {
    let alpha = order.alpha();
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(FracError::UnsupportedOrder { alpha, reason: "the oscillator reduction needs 1 < alpha < 2" });
    }
    if !(g != 0.0 && g.is_finite()) {
        return Err(FracError::domain("g must be finite and nonzero"));
    }
    Ok(NonlinearOscillator { g, alpha, k: Box::new(k), form, x0, v0, rt: None })
}

impl NonlinearOscillator {
    fn rt(&mut self) -> &mut OscRuntime {
        self.rt.as_mut().expect("system not started")
    }
}

impl MemorySystem for NonlinearOscillator {
    fn dim(&self) -> usize {
        1
    }

    fn start(&mut self, grid: &Grid, window: Option<usize>) -> Result<(Vec<f64>, Vec<f64>, Observation)> {
        let h = grid.step();
        let n = grid.n_steps();
        let eps = 2.0 - self.alpha;
        let (primary, forcing) = match self.form {
            // Φ = (1/g) J^{1-ε}(ẋ - ẋ0), so dΦ/dt = (1/g) D^ε ẋ
            OscillatorForm::Reduced => (MemoryOperator::new(MemoryKind::Integral { eps: 1.0 - eps }, h, n, window), None),
            // Φ = g (D^{α-1} ẋ + J^ε K(x))
            OscillatorForm::PreReduction => (
                MemoryOperator::new(MemoryKind::L1 { gamma: self.alpha - 1.0 }, h, n, window),
                Some(MemoryOperator::new(MemoryKind::Integral { eps }, h, n, window)),
            ),
        };
        let mut v_hist = Vec::with_capacity(grid.len());
        v_hist.push(if self.form == OscillatorForm::Reduced { 0.0 } else { self.v0 });
        let mut k_hist = Vec::with_capacity(grid.len());
        k_hist.push((self.k)(self.x0));
        self.rt = Some(OscRuntime { primary, forcing, v_hist, k_hist, phi: 0.0 });
        Ok((vec![self.x0], vec![self.v0], Observation::default()))
    }

    fn force(&mut self, _node: usize, q: &[f64], _v: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = match self.form {
            OscillatorForm::Reduced => -(self.k)(q[0]),
            OscillatorForm::PreReduction => 0.0,
        };
        Ok(())
    }

    fn coupling(&mut self, _n: usize, _q: &[f64], _v: &[f64], m: &mut SquareMatrix) -> Result<bool> {
        m[(0, 0)] = 1.0;
        Ok(true)
    }

    fn flux_increment(&mut self, _n: usize, q_next: &[f64], beta: &mut [f64]) -> Result<f64> {
        let g = self.g;
        let form = self.form;
        let v0 = self.v0;
        let k_next = (self.k)(q_next[0]);
        let rt = self.rt();
        let (kappa, rest) = rt.primary.split_next(&rt.v_hist, 0.0);
        match form {
            OscillatorForm::Reduced => {
                // the history stores ẋ - ẋ0
                beta[0] = (rest - kappa * v0 - rt.phi) / g;
                Ok(kappa / g)
            }
            OscillatorForm::PreReduction => {
                let op = rt.forcing.as_ref().expect("pre-reduction has a forcing memory");
                let j_now = op.value(&rt.k_hist, 0.0);
                let (kk, kr) = op.split_next(&rt.k_hist, 0.0);
                let j_next = kk * k_next + kr;
                beta[0] = g * (rest - rt.phi + j_next - j_now);
                Ok(g * kappa)
            }
        }
    }

    fn accept(&mut self, _node: usize, q: &[f64], v: &[f64]) -> Result<Observation> {
        let form = self.form;
        let v0 = self.v0;
        let k_now = (self.k)(q[0]);
        let rt = self.rt();
        let sample = if form == OscillatorForm::Reduced { v[0] - v0 } else { v[0] };
        rt.v_hist.push(sample);
        rt.phi = rt.primary.value(&rt.v_hist, 0.0);
        rt.k_hist.push(k_now);
        Ok(Observation {
            diagnostics: StepDiagnostics { history_terms: rt.v_hist.len() - 1, max_correction: 0.0 },
            ..Default::default()
        })
    }
}
