//! Gauss–Legendre rules, composite panels and a bisection-adaptive driver.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Sub};

use num_complex::Complex64;

/// Values that can be accumulated by the quadrature drivers.
pub trait Quadrand: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl Quadrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        libm::fabs(self)
    }
}

impl Quadrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        libm::hypot(self.re, self.im)
    }
}

/// n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            // Newton iteration on P_n from the Chebyshev-like initial guess.
            let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if libm::fabs(dx) < 1e-16 {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            weights[i] = w;
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<T: Quadrand, F: FnMut(f64) -> T>(&self, a: f64, b: f64, mut f: F) -> T {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(mid + half * x) * *w;
        }
        acc * half
    }

    /// Composite rule over `panels` equal sub-intervals.
    pub fn composite<T: Quadrand, F: FnMut(f64) -> T>(&self, a: f64, b: f64, panels: usize, mut f: F) -> T {
        let width = (b - a) / panels as f64;
        let mut acc = T::zero();
        for p in 0..panels {
            let lo = a + width * p as f64;
            acc = acc + self.integrate(lo, lo + width, &mut f);
        }
        acc
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Recursive bisection: accept a panel when the single-panel estimate and the
/// sum over its halves agree to `tol` (scaled by the panel's share of the
/// interval) or to the round-off level of the halves.
pub fn adaptive<T: Quadrand, F: FnMut(f64) -> T>(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
    f: &mut F,
) -> T {
    let whole = rule.integrate(a, b, &mut *f);
    adaptive_inner(rule, a, b, whole, tol, max_depth, f)
}

fn adaptive_inner<T: Quadrand, F: FnMut(f64) -> T>(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: T,
    tol: f64,
    depth: u32,
    f: &mut F,
) -> T {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(a, mid, &mut *f);
    let right = rule.integrate(mid, b, &mut *f);
    let refined = left + right;
    let floor = 8.0 * f64::EPSILON * (left.magnitude() + right.magnitude());
    let diff = (refined - whole).magnitude();
    if depth == 0 || diff <= tol || diff <= floor {
        return refined;
    }
    adaptive_inner(rule, a, mid, left, 0.5 * tol, depth - 1, f)
        + adaptive_inner(rule, mid, b, right, 0.5 * tol, depth - 1, f)
}
