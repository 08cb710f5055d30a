//! Linear fractional oscillator `D^{α-1} q + ω² q = Q(t)` in closed form.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{FracError, Result};
use crate::frac_ops::{first_node_weight, product_trapezoid_weights};
use crate::grid::{Grid, SampleSeries};
use crate::mittag_leffler::{ml, ml_decomp_f, ml_decomp_g, ml_decomp_rates, MLParams};
use crate::special::{gamma, rgamma};

/// Largest step of the internal grid used for the forcing convolution.
pub const CONVOLUTION_STEP: f64 = 1.0 / 2048.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorSpec {
    /// Order of the originating equation; the oscillator itself has order `alpha - 1`.
    pub alpha: f64,
    pub omega2: f64,
    pub q0: f64,
    pub qp0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl OscillatorSpec {
    /// Spec with the integration constants fixed by the initial data:
    /// `C2 = ω² q0`, `C1 = ω² q̇0`.
    pub fn new(alpha: f64, omega2: f64, q0: f64, qp0: f64) -> Result<Self> {
        Self::with_constants(alpha, omega2, q0, qp0, omega2 * qp0, omega2 * q0)
    }

    pub fn with_constants(alpha: f64, omega2: f64, q0: f64, qp0: f64, c1: f64, c2: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(FracError::domain(alloc::format!("order {alpha} must be positive")));
        }
        if !(omega2 > 0.0 && omega2.is_finite()) {
            return Err(FracError::domain(alloc::format!("omega2 = {omega2} must be positive")));
        }
        Ok(Self { alpha, omega2, q0, qp0, c1, c2 })
    }

    pub fn m(&self) -> usize {
        libm::floor(self.alpha) as usize + 1
    }

    /// Power of the `q0` forcing term, `m - α + 1`.
    fn forcing_power(&self) -> f64 {
        self.m() as f64 - self.alpha + 1.0
    }

    fn beta(&self) -> f64 {
        self.alpha - 1.0
    }

    fn require_exact_range(&self) -> Result<()> {
        if !(self.alpha > 2.0 && self.alpha < 3.0) {
            return Err(FracError::domain(alloc::format!(
                "closed-form solution needs 2 < alpha < 3, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// `Q(t) = t^{m-α+1}/Γ(m-α+2) q0 + C1 t + C2`.
pub fn forcing(spec: &OscillatorSpec, t: f64) -> f64 {
    let p = spec.forcing_power();
    libm::pow(t, p) * rgamma(p + 1.0) * spec.q0 + spec.c1 * t + spec.c2
}

/// `∫_0^t Q(t-τ) τ^{β-1} ψ(τ) dτ` at every output node, with `ψ` sampled on a
/// grid `refine` times finer than the output grid.
fn forcing_convolution(spec: &OscillatorSpec, grid: &Grid, refine: usize, psi: &[f64]) -> Vec<f64> {
    let beta = spec.beta();
    let n_fine = psi.len() - 1;
    let hf = grid.step() / refine as f64;
    let interior = {
        let w = product_trapezoid_weights(beta, n_fine.max(2));
        // w[j] for j in 1..n is the weight at distance n - j
        let n = w.len() - 1;
        let mut by_distance = vec![0.0; n];
        for (j, wj) in w.iter().enumerate().take(n).skip(1) {
            by_distance[n - j] = *wj;
        }
        by_distance
    };
    let scale = libm::pow(hf, beta) / (beta * (beta + 1.0));
    let mut out = vec![0.0; grid.len()];
    for (k, slot) in out.iter_mut().enumerate().skip(1) {
        let n = k * refine;
        let t = n as f64 * hf;
        let first = first_node_weight(beta, n);
        let mut acc = first * forcing(spec, 0.0) * psi[n] + forcing(spec, t) * psi[0];
        for (d, w) in interior.iter().enumerate().take(n).skip(1) {
            acc += w * forcing(spec, t - d as f64 * hf) * psi[d];
        }
        *slot = scale * acc;
    }
    out
}

fn check_grid(grid: &Grid) -> Result<usize> {
    if grid.t_start() != 0.0 {
        return Err(FracError::domain("oscillator solution needs a grid starting at 0"));
    }
    Ok(libm::ceil(grid.step() / CONVOLUTION_STEP).max(1.0) as usize)
}

/// `q(t) = q0 E_{β,1}(-ω²t^β) + t q̇0 E_{β,2}(-ω²t^β) + ∫ Q(t-τ) G(τ) dτ` with
/// `β = α-1` and Green's function `G(τ) = τ^{β-1} E_{β,β}(-ω²τ^β)`.
pub fn exact_solution(spec: &OscillatorSpec, grid: &Grid) -> Result<SampleSeries> {
    spec.require_exact_range()?;
    let refine = check_grid(grid)?;
    let beta = spec.beta();
    let w2 = spec.omega2;
    let e1 = MLParams::new(beta, 1.0)?;
    let e2 = MLParams::new(beta, 2.0)?;
    let eb = MLParams::new(beta, beta)?;

    let hf = grid.step() / refine as f64;
    let n_fine = grid.n_steps() * refine;
    let mut psi = Vec::with_capacity(n_fine + 1);
    psi.push(rgamma(beta));
    for i in 1..=n_fine {
        let tau = i as f64 * hf;
        psi.push(ml(eb, -w2 * libm::pow(tau, beta))?);
    }
    let conv = forcing_convolution(spec, grid, refine, &psi);

    let mut values = Vec::with_capacity(grid.len());
    for (j, t) in grid.nodes().enumerate() {
        if j == 0 {
            values.push(spec.q0);
            continue;
        }
        let z = -w2 * libm::pow(t, beta);
        values.push(spec.q0 * ml(e1, z)? + t * spec.qp0 * ml(e2, z)? + conv[j]);
    }
    SampleSeries::new(*grid, values)
}

/// Same trajectory as [`exact_solution`], assembled from the monotone and
/// oscillatory parts of the Mittag-Leffler functions. Needs `ω² = 1`.
pub fn decomposed_solution(spec: &OscillatorSpec, grid: &Grid) -> Result<SampleSeries> {
    spec.require_exact_range()?;
    if spec.omega2 != 1.0 {
        return Err(FracError::domain("decomposed solution needs omega2 = 1"));
    }
    let refine = check_grid(grid)?;
    let beta = spec.beta();

    let hf = grid.step() / refine as f64;
    let n_fine = grid.n_steps() * refine;
    let mut psi = Vec::with_capacity(n_fine + 1);
    psi.push(rgamma(beta));
    for i in 1..=n_fine {
        let tau = i as f64 * hf;
        let (fd, gd) = ml_decomp_rates(beta, tau)?;
        // G = -d/dτ E_β(-τ^β)
        psi.push(-(fd + gd) * libm::pow(tau, 1.0 - beta));
    }
    let conv = forcing_convolution(spec, grid, refine, &psi);

    let mut values = Vec::with_capacity(grid.len());
    for (j, t) in grid.nodes().enumerate() {
        if j == 0 {
            values.push(spec.q0);
            continue;
        }
        let mut v = conv[j];
        if spec.q0 != 0.0 {
            v += spec.q0 * (ml_decomp_f(beta, 0, t)? + ml_decomp_g(beta, 0, t)?);
        }
        if spec.qp0 != 0.0 {
            v += spec.qp0 * (ml_decomp_f(beta, 1, t)? + ml_decomp_g(beta, 1, t)?);
        }
        values.push(v);
    }
    SampleSeries::new(*grid, values)
}

/// `Γ(p+1)` helper kept beside the forcing for callers building oracles.
pub fn forcing_power_gamma(spec: &OscillatorSpec) -> f64 {
    gamma(spec.forcing_power() + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forcing_examples() {
        let s = OscillatorSpec::with_constants(2.5, 1.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(forcing(&s, 3.0), 0.0);
        let s = OscillatorSpec::with_constants(2.5, 1.0, 1.0, 0.0, 0.0, 0.0).unwrap();
        assert!((forcing(&s, 1.0) - 1.0 / gamma(2.5)).abs() < 1e-15);
        let s = OscillatorSpec::with_constants(2.5, 1.0, 0.0, 0.0, 2.0, 3.0).unwrap();
        assert_eq!(forcing(&s, 2.0), 7.0);
    }

    #[test]
    fn constants_follow_initial_data() {
        let s = OscillatorSpec::new(2.5, 4.0, 1.5, -2.0).unwrap();
        assert_eq!(s.c2, 6.0);
        assert_eq!(s.c1, -8.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(OscillatorSpec::new(2.5, 0.0, 1.0, 0.0).is_err());
        let s = OscillatorSpec::new(1.5, 1.0, 1.0, 0.0).unwrap();
        let g = Grid::new(0.0, 1.0, 4).unwrap();
        assert!(exact_solution(&s, &g).is_err());
        let s = OscillatorSpec::new(2.5, 1.0, 1.0, 0.0).unwrap();
        assert!(exact_solution(&s, &Grid::new(1.0, 2.0, 4).unwrap()).is_err());
        let s = OscillatorSpec::new(2.5, 2.0, 1.0, 0.0).unwrap();
        assert!(decomposed_solution(&s, &g).is_err());
    }

    #[test]
    fn initial_value_is_exact() {
        let s = OscillatorSpec::new(2.5, 1.0, 0.7, 0.3).unwrap();
        let q = exact_solution(&s, &Grid::new(0.0, 1.0, 8).unwrap()).unwrap();
        assert_eq!(q.at(0), 0.7);
    }
}
