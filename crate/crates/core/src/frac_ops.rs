//! Discrete fractional operators on uniformly sampled data.
//!
//! Full-series operators use product-trapezoidal quadrature of the
//! weakly singular kernel, which is exact for piecewise linear integrands.
//! The causal evaluators used inside time steppers use L1-type weights.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{FracError, Result};
use crate::grid::{FracOrder, SampleSeries};
use crate::special::{binomial, gamma, rgamma};

/// Distance beyond which weight differences are taken from a binomial
/// expansion instead of subtracting nearly equal powers.
const SERIES_SWITCH: usize = 64;

/// Second difference `(d+1)^p - 2 d^p + (d-1)^p` for `d >= 1`.
pub(crate) fn second_difference_pow(p: f64, d: usize) -> f64 {
    let df = d as f64;
    if d < SERIES_SWITCH {
        return libm::pow(df + 1.0, p) - 2.0 * libm::pow(df, p) + libm::pow(df - 1.0, p);
    }
    let inv2 = 1.0 / (df * df);
    let mut x = inv2;
    let mut acc = 0.0;
    let mut k = 2;
    while k <= 40 {
        let term = 2.0 * binomial(p, k) * x;
        acc += term;
        if libm::fabs(term) < 1e-18 * libm::fabs(acc) {
            break;
        }
        x *= inv2;
        k += 2;
    }
    libm::pow(df, p) * acc
}

/// First-node weight `(n-1)^{e+1} - (n-1-e) n^e` of the product trapezoid rule.
pub(crate) fn first_node_weight(eps: f64, n: usize) -> f64 {
    let nf = n as f64;
    if n < SERIES_SWITCH {
        return libm::pow(nf - 1.0, eps + 1.0) - (nf - 1.0 - eps) * libm::pow(nf, eps);
    }
    let x = -1.0 / nf;
    let mut xk = x * x;
    let mut tail = 0.0;
    for k in 2..40 {
        let term = binomial(eps, k) * xk;
        tail += term;
        if libm::fabs(term) < 1e-18 * libm::fabs(tail) {
            break;
        }
        xk *= x;
    }
    libm::pow(nf, eps) * (eps / nf + (nf - 1.0) * tail)
}

/// Unscaled product-trapezoid weights `a_{j,n}`, `j = 0..=n`, so that
/// `J^eps f(t_n) ≈ h^eps / Γ(eps+2) · Σ a_{j,n} f_j`.
pub fn product_trapezoid_weights(eps: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![0.0];
    }
    let p = eps + 1.0;
    let mut w = vec![0.0; n + 1];
    w[0] = first_node_weight(eps, n);
    for (j, wj) in w.iter_mut().enumerate().take(n).skip(1) {
        *wj = second_difference_pow(p, n - j);
    }
    w[n] = 1.0;
    w
}

/// L1 weights `b_k = (k+1)^{1-a} - k^{1-a}` for `k = 0..len`.
pub fn l1_weights(alpha: f64, len: usize) -> Vec<f64> {
    power_increments(1.0 - alpha, len)
}

/// `(k+1)^p - k^p` for `k = 0..len`.
pub(crate) fn power_increments(p: f64, len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| {
            let kf = k as f64;
            if k < SERIES_SWITCH {
                libm::pow(kf + 1.0, p) - libm::pow(kf, p)
            } else {
                // k^p ((1 + 1/k)^p - 1)
                let x = 1.0 / kf;
                let mut xk = x;
                let mut acc = 0.0;
                for i in 1..40 {
                    let term = binomial(p, i) * xk;
                    acc += term;
                    if libm::fabs(term) < 1e-18 * libm::fabs(acc) {
                        break;
                    }
                    xk *= x;
                }
                libm::pow(kf, p) * acc
            }
        })
        .collect()
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(FracError::domain(alloc::format!(
            "integral order {eps} must lie in (0, 1]"
        )));
    }
    Ok(())
}

/// Product-trapezoid `J^eps` of raw samples with step `h`.
pub(crate) fn fractional_integral_slice(values: &[f64], h: f64, eps: f64) -> Vec<f64> {
    let n = values.len().saturating_sub(1);
    let mut out = vec![0.0; values.len()];
    if n == 0 {
        return out;
    }
    let p = eps + 1.0;
    // interior weights depend only on the distance to the evaluation node
    let interior: Vec<f64> = (0..n).map(|d| if d == 0 { 0.0 } else { second_difference_pow(p, d) }).collect();
    let scale = libm::pow(h, eps) / gamma(eps + 2.0);
    for (k, slot) in out.iter_mut().enumerate().skip(1) {
        let mut acc = first_node_weight(eps, k) * values[0] + values[k];
        for (j, v) in values.iter().enumerate().take(k).skip(1) {
            acc += interior[k - j] * v;
        }
        *slot = scale * acc;
    }
    out
}

/// `J^eps f` at every node; the value at the first node is zero.
pub fn fractional_integral(f: &SampleSeries, eps: f64) -> Result<SampleSeries> {
    check_eps(eps)?;
    let out = fractional_integral_slice(f.values(), f.grid().step(), eps);
    Ok(SampleSeries::from_parts(*f.grid(), out))
}

/// Left Caputo derivative from samples of the m-th derivative `f^{(m)}`.
pub fn caputo_left(f_m: &SampleSeries, order: FracOrder) -> Result<SampleSeries> {
    order.require_fractional()?;
    fractional_integral(f_m, order.epsilon())
}

/// Right Caputo derivative `(-1)^m J^eps_{right} f^{(m)}` from samples of `f^{(m)}`.
pub fn caputo_right(f_m: &SampleSeries, order: FracOrder) -> Result<SampleSeries> {
    order.require_fractional()?;
    let sign = if order.m() % 2 == 0 { 1.0 } else { -1.0 };
    let left = fractional_integral(&f_m.reflected(), order.epsilon())?;
    Ok(left.reflected().map(|v| sign * v))
}

/// Caputo derivative of `f` itself, with `f^{(m)}` obtained by finite
/// differences. Loses roughly one order of accuracy near the ends compared
/// with passing analytic derivative samples to [`caputo_left`].
pub fn caputo_left_fd(f: &SampleSeries, order: FracOrder) -> Result<SampleSeries> {
    order.require_fractional()?;
    let h = f.grid().step();
    let mut d = f.values().to_vec();
    for _ in 0..order.m() {
        d = differentiate(&d, h)?;
    }
    caputo_left(&SampleSeries::from_parts(*f.grid(), d), order)
}

/// Second order finite-difference first derivative: central inside,
/// one-sided three-point at the ends.
pub fn differentiate(values: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 3 {
        return Err(FracError::domain("differentiation needs at least three samples"));
    }
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    for j in 1..n - 1 {
        d[j] = (values[j + 1] - values[j - 1]) / (2.0 * h);
    }
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    Ok(d)
}

fn second_derivative(values: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 4 {
        return Err(FracError::domain("second derivative needs at least four samples"));
    }
    let h2 = h * h;
    let mut d = vec![0.0; n];
    d[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / h2;
    for j in 1..n - 1 {
        d[j] = (values[j + 1] - 2.0 * values[j] + values[j - 1]) / h2;
    }
    d[n - 1] = (2.0 * values[n - 1] - 5.0 * values[n - 2] + 4.0 * values[n - 3] - values[n - 4]) / h2;
    Ok(d)
}

/// Left Riemann–Liouville derivative `D^m J^{m-α} f`. Slot 0 holds `NaN`.
pub fn riemann_liouville_left(f: &SampleSeries, order: FracOrder) -> Result<SampleSeries> {
    order.require_fractional()?;
    let h = f.grid().step();
    let mut d = fractional_integral_slice(f.values(), h, order.epsilon());
    let mut m = order.m();
    while m >= 2 {
        d = second_derivative(&d, h)?;
        m -= 2;
    }
    if m == 1 {
        d = differentiate(&d, h)?;
    }
    d[0] = f64::NAN;
    Ok(SampleSeries::from_parts(*f.grid(), d))
}

/// Right Riemann–Liouville derivative `(-D)^m J^{m-α}_{right} f`.
/// The last slot holds `NaN`.
pub fn riemann_liouville_right(f: &SampleSeries, order: FracOrder) -> Result<SampleSeries> {
    Ok(riemann_liouville_left(&f.reflected(), order)?.reflected())
}

/// Analytic defect `D^1 J^eps f - J^eps D^1 f = (t-a)^{eps-1} f(a) / Γ(eps)`.
/// Slot 0 holds `NaN` when `f(a)` is nonzero.
pub fn commutation_defect(f: &SampleSeries, eps: f64, f_at_a: f64) -> Result<SampleSeries> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(FracError::domain(alloc::format!("eps {eps} must lie in (0, 1)")));
    }
    let grid = *f.grid();
    let a = grid.t_start();
    let c = f_at_a * rgamma(eps);
    let values = grid
        .nodes()
        .enumerate()
        .map(|(j, t)| {
            if c == 0.0 {
                0.0
            } else if j == 0 {
                f64::NAN
            } else {
                c * libm::pow(t - a, eps - 1.0)
            }
        })
        .collect();
    Ok(SampleSeries::from_parts(grid, values))
}

/// Measured defect `D^1 J^eps f - J^eps f'` from samples of `f` and `f'`.
/// Slot 0 holds `NaN`.
pub fn measured_commutation_defect(
    f: &SampleSeries,
    f_dot: &SampleSeries,
    eps: f64,
) -> Result<SampleSeries> {
    f.check_same_grid(f_dot)?;
    check_eps(eps)?;
    let h = f.grid().step();
    let outer = differentiate(&fractional_integral_slice(f.values(), h, eps), h)?;
    let inner = fractional_integral_slice(f_dot.values(), h, eps);
    let mut d: Vec<f64> = outer.iter().zip(&inner).map(|(a, b)| a - b).collect();
    d[0] = f64::NAN;
    Ok(SampleSeries::from_parts(*f.grid(), d))
}

/// Correction in `d/dt D^α f = D^{α+1} f + (t-a)^{m-α-1} f^{(m)}(a) / Γ(m-α)`.
pub fn prop1_shift(order: FracOrder, f_m_at_a: f64, elapsed: f64) -> Result<f64> {
    order.require_fractional()?;
    if f_m_at_a == 0.0 {
        return Ok(0.0);
    }
    let p = order.epsilon() - 1.0;
    if elapsed < 0.0 || (elapsed == 0.0 && p < 0.0) {
        return Err(FracError::SingularPoint { t: elapsed });
    }
    Ok(f_m_at_a * libm::pow(elapsed, p) * rgamma(order.epsilon()))
}

/// L1 approximation of the Caputo derivative of order `0 < alpha < 1` at the
/// last sample of `values`. `window` limits the memory to the most recent
/// `window` increments.
pub fn l1_caputo(values: &[f64], h: f64, alpha: f64, window: Option<usize>) -> f64 {
    let n = values.len().saturating_sub(1);
    if n == 0 {
        return 0.0;
    }
    let span = window.map_or(n, |w| w.min(n));
    let b = l1_weights(alpha, span);
    let mut acc = 0.0;
    for (k, bk) in b.iter().enumerate() {
        acc += bk * (values[n - k] - values[n - k - 1]);
    }
    acc * libm::pow(h, -alpha) / gamma(2.0 - alpha)
}

/// Caputo derivative of order `1 < alpha < 2` at the last sample: the second
/// derivative is taken per interval from differences of first differences and
/// integrated against the kernel exactly. On the first interval it uses the
/// initial rate when given, otherwise the three leading samples.
pub fn l1_caputo_second(
    values: &[f64],
    h: f64,
    alpha: f64,
    initial_rate: Option<f64>,
    window: Option<usize>,
) -> Result<f64> {
    let n = values.len().saturating_sub(1);
    if n == 0 {
        return Ok(0.0);
    }
    let curvature = |k: usize| -> Result<f64> {
        if k == 0 {
            match initial_rate {
                Some(v0) => Ok(2.0 * ((values[1] - values[0]) / h - v0) / h),
                None if values.len() >= 3 => Ok((values[2] - 2.0 * values[1] + values[0]) / (h * h)),
                None => Err(FracError::domain(
                    "order in (1,2) needs an initial rate or three samples",
                )),
            }
        } else {
            Ok((values[k + 1] - 2.0 * values[k] + values[k - 1]) / (h * h))
        }
    };
    let span = window.map_or(n, |w| w.min(n));
    let c = power_increments(2.0 - alpha, span);
    let mut acc = 0.0;
    for (i, ci) in c.iter().enumerate() {
        acc += ci * curvature(n - 1 - i)?;
    }
    Ok(acc * libm::pow(h, 2.0 - alpha) / gamma(3.0 - alpha))
}

/// Causal Caputo derivative at node `j` using samples `0..=j` only.
pub fn caputo_left_history(q: &SampleSeries, j: usize, order: FracOrder) -> Result<f64> {
    order.require_fractional()?;
    let alpha = order.alpha();
    if j >= q.values().len() {
        return Err(FracError::domain("history index beyond series"));
    }
    let h = q.grid().step();
    let prefix = &q.values()[..=j];
    if alpha < 1.0 {
        Ok(l1_caputo(prefix, h, alpha, None))
    } else if alpha < 2.0 {
        l1_caputo_second(prefix, h, alpha, None, None)
    } else {
        Err(FracError::UnsupportedOrder {
            alpha,
            reason: "causal history needs order below 2",
        })
    }
}
