//! Two-parameter Mittag-Leffler function for real arguments and the
//! monotone/oscillatory split of `E_α(-t^α)` for `1 < α < 2`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{FracError, Result};
use crate::quadrature::{adaptive, GaussLegendre};
use crate::special::{ln_gamma, rgamma};

/// Largest |z| evaluated by the power series.
pub const SERIES_RADIUS: f64 = 5.0;

/// Largest tolerated series term; beyond this, cancellation costs more than
/// the target accuracy and the contour method takes over.
const SERIES_TERM_LIMIT: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MLParams {
    alpha: f64,
    beta: f64,
}

impl MLParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
            return Err(FracError::domain(alloc::format!(
                "Mittag-Leffler parameters ({alpha}, {beta}) must be positive"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// `E_{α,β}(z)` for real `z`.
pub fn ml(params: MLParams, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(FracError::domain("Mittag-Leffler argument must be finite"));
    }
    let v = if libm::fabs(z) <= SERIES_RADIUS {
        match series(params, z) {
            Some(v) => v,
            None => contour(params, z),
        }
    } else {
        contour(params, z)
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(FracError::AccuracyLoss { achieved: f64::INFINITY })
    }
}

fn series_term(params: MLParams, z: f64, k: usize) -> f64 {
    let arg = params.alpha * k as f64 + params.beta;
    if arg < 170.0 {
        libm::pow(z, k as f64) * rgamma(arg)
    } else {
        let mag = libm::exp(k as f64 * libm::log(libm::fabs(z)) - ln_gamma(arg));
        if z < 0.0 && k % 2 == 1 { -mag } else { mag }
    }
}

/// Power series with compensated summation. Returns `None` when the terms
/// grow large enough to spoil the absolute accuracy.
fn series(params: MLParams, z: f64) -> Option<f64> {
    if z == 0.0 {
        return Some(rgamma(params.beta));
    }
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut prev = f64::INFINITY;
    for k in 0..10_000 {
        let t = series_term(params, z, k);
        if libm::fabs(t) > SERIES_TERM_LIMIT {
            return None;
        }
        // Neumaier step
        let s = sum + t;
        if libm::fabs(sum) >= libm::fabs(t) {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
        let at = libm::fabs(t);
        if k > 2 && at <= prev && at < 1e-18 * libm::fmax(1.0, libm::fabs(sum)) {
            return Some(sum + comp);
        }
        prev = at;
    }
    None
}

/// Arguments `θ_j = (arg z + 2πj)/α` of the roots of `s^α = z` lying on the
/// principal sheet.
fn pole_angles(alpha: f64, z: f64) -> Vec<f64> {
    let arg = if z < 0.0 { PI } else { 0.0 };
    let span = libm::ceil(alpha) as i64 + 1;
    (-span..=span)
        .map(|j| (arg + 2.0 * PI * j as f64) / alpha)
        .filter(|th| *th > -PI && *th <= PI)
        .collect()
}

/// Ray angle: the steepest one (closest to π, fastest decay) that keeps a
/// safe angular distance from every pole, else the one with the widest gap.
fn ray_angle(poles: &[f64]) -> f64 {
    const SAFE_GAP: f64 = 0.15 * PI;
    let gap = |phi: f64| {
        poles
            .iter()
            .map(|th| libm::fabs(phi - libm::fabs(*th)))
            .fold(f64::INFINITY, f64::min)
    };
    let candidates = (0..=80).rev().map(|i| PI * (0.55 + 0.4 * i as f64 / 80.0));
    let mut widest = (0.75 * PI, -1.0);
    for phi in candidates {
        let g = gap(phi);
        if g >= SAFE_GAP {
            return phi;
        }
        if g > widest.1 {
            widest = (phi, g);
        }
    }
    widest.0
}

/// Hankel-contour evaluation: residues of poles to the right of the contour
/// plus the integral over an arc of radius `ε` and two rays at `±φ`.
fn contour(params: MLParams, z: f64) -> f64 {
    let MLParams { alpha, beta } = params;
    let radius = libm::pow(libm::fabs(z), 1.0 / alpha);
    let poles = pole_angles(alpha, z);
    let phi = ray_angle(&poles);

    let mut residues = 0.0;
    for &th in poles.iter().filter(|th| libm::fabs(**th) < phi) {
        // (1/α) s^{1-β} e^s in polar form
        let mag = libm::exp((1.0 - beta) * libm::log(radius) + radius * libm::cos(th)) / alpha;
        residues += mag * libm::cos((1.0 - beta) * th + radius * libm::sin(th));
    }

    // integrand e^s s^{α-β} / (s^α - z) at s = r e^{iθ}
    let integrand = |r: f64, th: f64| -> Complex64 {
        let lr = libm::log(r);
        let num = Complex64::from_polar(
            libm::exp(r * libm::cos(th) + (alpha - beta) * lr),
            r * libm::sin(th) + (alpha - beta) * th,
        );
        let den = Complex64::from_polar(libm::exp(alpha * lr), alpha * th) - z;
        num / den
    };

    let rule = GaussLegendre::new(15);
    let eps = libm::fmin(1.0, 0.5 * radius);
    let tol = 1e-14;

    let mut arc = |th: f64| integrand(eps, th) * Complex64::new(0.0, eps) * Complex64::from_polar(1.0, th);
    let arc_part: Complex64 = adaptive(&rule, 0.0, phi, tol, 30, &mut arc);

    let dir = Complex64::from_polar(1.0, phi);
    let mut ray = |r: f64| integrand(r, phi) * dir;
    let reach = 80.0 / libm::fabs(libm::cos(phi));
    let end = eps + reach + 2.0 * libm::fmin(radius, reach);
    let ray_part: Complex64 = if radius > eps && radius < end {
        adaptive(&rule, eps, radius, tol, 40, &mut ray) + adaptive(&rule, radius, end, tol, 40, &mut ray)
    } else {
        adaptive(&rule, eps, end, tol, 40, &mut ray)
    };

    residues + (arc_part + ray_part).im / PI
}

fn check_decomp(alpha: f64, t: f64, strict_t: bool) -> Result<()> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(FracError::domain(alloc::format!(
            "decomposition needs 1 < alpha < 2, got {alpha}"
        )));
    }
    if !t.is_finite() || t < 0.0 || (strict_t && t == 0.0) {
        return Err(FracError::domain(alloc::format!("decomposition time {t} out of range")));
    }
    Ok(())
}

/// `(1/π) ∫_0^∞ e^{-rt} r^{p} sin(πα) / (r^{2α} + 2 r^α cos(πα) + 1) dr`, `p > -1`.
///
/// On `[0, r_s]` the integrand is expanded in powers of `r` and `r^α`
/// (exponential series times the Chebyshev generating function) and
/// integrated term by term. Beyond `r_s` the substitution `r = e^u` gives a
/// smooth integrand, cut where it falls below 1e-16 of its peak.
fn decomp_integral(alpha: f64, p: f64, t: f64) -> f64 {
    // coarse enough to be cheap; the peak only sets the truncation point
    const SCAN_STEP: f64 = 0.05;
    let s = libm::sin(PI * alpha);
    let c = libm::cos(PI * alpha);
    let den = |r: f64| {
        let x = libm::pow(r, alpha);
        x * x + 2.0 * x * c + 1.0
    };
    let gamma = p + 1.0;
    let split = 0.25 * libm::fmin(1.0, 1.0 / t);

    let near = near_origin_series(alpha, c, gamma, t, split);

    let log_integrand = |u: f64| -libm::exp(u) * t + gamma * u - libm::log(den(libm::exp(u)));
    let u_lo = libm::log(split);
    let mut peak = f64::NEG_INFINITY;
    let mut u = u_lo;
    let mut u_peak = u_lo;
    while u < u_lo + 400.0 {
        let l = log_integrand(u);
        if l > peak {
            peak = l;
            u_peak = u;
        }
        if u > u_peak + 1.0 && l < peak - 40.0 {
            break;
        }
        u += SCAN_STEP;
    }
    let mut u_hi = u_peak + SCAN_STEP;
    while log_integrand(u_hi) > peak - 36.9 {
        u_hi += SCAN_STEP;
    }

    let far = |u: f64| {
        let r = libm::exp(u);
        libm::exp(-r * t + gamma * u) / den(r)
    };
    let rule = GaussLegendre::new(20);
    let mut panels = 8;
    let mut prev = rule.composite(u_lo, u_hi, panels, far);
    while panels < 1 << 14 {
        panels *= 2;
        let next = rule.composite(u_lo, u_hi, panels, far);
        let done = libm::fabs(next - prev) < 1e-11;
        prev = next;
        if done {
            break;
        }
    }
    (near + prev) * s / PI
}

/// `∫_0^{r_s} r^{γ-1} e^{-rt} / (1 + 2c r^α + r^{2α}) dr` for `r_s t <= 1/4`,
/// `r_s <= 1/4`, using `1/(1 - 2xy + y²) = Σ U_k(x) y^k` with `x = -c`.
fn near_origin_series(alpha: f64, c: f64, gamma: f64, t: f64, rs: f64) -> f64 {
    let ln_rs = libm::log(rs);
    let mut total = 0.0;
    // U_0 = 1, U_1 = 2x, U_{k+1} = 2x U_k - U_{k-1}
    let x = -c;
    let (mut u_prev, mut u_k) = (0.0, 1.0);
    for k in 0..80 {
        let mut row = 0.0;
        let mut coef = 1.0; // (-t)^j / j!
        for j in 0..60 {
            let e = gamma + j as f64 + alpha * k as f64;
            let term = coef * libm::exp(e * ln_rs) / e;
            row += term;
            if libm::fabs(term) < 1e-19 * libm::fabs(row) {
                break;
            }
            coef *= -t / (j as f64 + 1.0);
        }
        let contrib = u_k * row;
        total += contrib;
        if k > 2 && libm::fabs(row) * (k as f64 + 2.0) < 1e-18 * libm::fabs(total) {
            break;
        }
        let next = 2.0 * x * u_k - u_prev;
        u_prev = u_k;
        u_k = next;
    }
    total
}

/// Monotone part `f_{α,k}(t) = ((-1)^k/π) ∫ e^{-rt} r^{α-1-k} sin(πα) / (r^{2α} + 2r^α cos(πα) + 1) dr`.
pub fn ml_decomp_f(alpha: f64, k: u8, t: f64) -> Result<f64> {
    check_decomp(alpha, t, true)?;
    let v = match k {
        0 => decomp_integral(alpha, alpha - 1.0, t),
        1 => -decomp_integral(alpha, alpha - 2.0, t),
        _ => return Err(FracError::domain("decomposition index k must be 0 or 1")),
    };
    Ok(v)
}

/// Oscillatory part `g_{α,k}(t) = (2/α) e^{t cos(π/α)} cos(t sin(π/α) - πk/α)`.
pub fn ml_decomp_g(alpha: f64, k: u8, t: f64) -> Result<f64> {
    check_decomp(alpha, t, false)?;
    if k > 1 {
        return Err(FracError::domain("decomposition index k must be 0 or 1"));
    }
    let w = PI / alpha;
    Ok(2.0 / alpha * libm::exp(t * libm::cos(w)) * libm::cos(t * libm::sin(w) - k as f64 * w))
}

/// Time derivatives of `f_{α,0}` and `g_{α,0}`.
pub fn ml_decomp_rates(alpha: f64, t: f64) -> Result<(f64, f64)> {
    check_decomp(alpha, t, true)?;
    let w = PI / alpha;
    let f_dot = -decomp_integral(alpha, alpha, t);
    let g_dot = 2.0 / alpha * libm::exp(t * libm::cos(w)) * libm::cos(t * libm::sin(w) + w);
    Ok((f_dot, g_dot))
}
