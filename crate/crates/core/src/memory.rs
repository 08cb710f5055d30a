//! Causal memory operators on a growing sample history.
//!
//! Each operator evaluates its value at the node after the history as
//! `kappa * v_next + rest`, which lets time steppers treat the newest sample
//! implicitly while the rest of the history stays explicit.

use alloc::vec::Vec;

use crate::frac_ops::{first_node_weight, l1_weights, second_difference_pow};
use crate::special::gamma;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MemoryKind {
    /// `J^eps v` by product-trapezoid quadrature, `0 < eps <= 1`.
    Integral { eps: f64 },
    /// Caputo `D^gamma v` by the L1 scheme, `0 < gamma < 1`.
    L1 { gamma: f64 },
    /// Caputo `D^gamma v`, `1 < gamma < 2`, with the second derivative taken
    /// per interval; the first interval uses the initial rate.
    Second { gamma: f64 },
    /// `J^{3-gamma} v''`, `1 < gamma < 2`, with `v''` piecewise constant on
    /// cells centred at the nodes (half cells at both ends). Cell values are
    /// differences of interval slopes, so their sum telescopes exactly.
    Staggered { gamma: f64 },
}

#[derive(Debug, Clone)]
pub struct MemoryOperator {
    kind: MemoryKind,
    h: f64,
    scale: f64,
    /// Interior weights indexed by distance (Integral) or lag (L1, Second).
    weights: Vec<f64>,
    window: Option<usize>,
}

impl MemoryOperator {
    /// Operator for histories of up to `n_max + 1` samples with step `h`.
    /// `window` keeps only the most recent `window` intervals.
    pub fn new(kind: MemoryKind, h: f64, n_max: usize, window: Option<usize>) -> Self {
        let (scale, weights) = match kind {
            MemoryKind::Integral { eps } => {
                let p = eps + 1.0;
                let w = (0..=n_max).map(|d| if d == 0 { 0.0 } else { second_difference_pow(p, d) }).collect();
                (libm::pow(h, eps) / gamma(eps + 2.0), w)
            }
            MemoryKind::L1 { gamma: g } => (libm::pow(h, -g) / gamma(2.0 - g), l1_weights(g, n_max + 1)),
            MemoryKind::Second { gamma: g } => (
                libm::pow(h, 2.0 - g) / gamma(3.0 - g),
                l1_weights(g - 1.0, n_max + 1),
            ),
            MemoryKind::Staggered { gamma: g } => {
                let p = 3.0 - g;
                (libm::pow(h, p) / gamma(p + 1.0), (0..=n_max).map(|d| cell_weight(p, d)).collect())
            }
        };
        Self { kind, h, scale, weights, window }
    }

    pub fn kind(&self) -> MemoryKind {
        self.kind
    }

    /// Number of history samples a sum at node `n` touches.
    pub fn span(&self, n: usize) -> usize {
        self.window.map_or(n, |w| w.min(n))
    }

    /// Value at node `hist.len()` as `(kappa, rest)`; `rate` is the initial
    /// derivative used by [`MemoryKind::Second`] and ignored otherwise.
    pub fn split_next(&self, hist: &[f64], rate: f64) -> (f64, f64) {
        let n = hist.len() - 1;
        let next = n + 1;
        match self.kind {
            MemoryKind::Integral { eps } => {
                let lo = self.window.map_or(0, |w| next.saturating_sub(w));
                let mut acc = 0.0;
                if lo == 0 {
                    acc += first_node_weight(eps, next) * hist[0];
                }
                for (j, v) in hist.iter().enumerate().skip(lo.max(1)) {
                    acc += self.weights[next - j] * v;
                }
                (self.scale, self.scale * acc)
            }
            MemoryKind::L1 { .. } => {
                // Σ_k b_k (v_{next-k} - v_{next-k-1})
                let span = self.span(next);
                let mut acc = -hist[n];
                for k in 1..span {
                    acc += self.weights[k] * (hist[next - k] - hist[next - k - 1]);
                }
                (self.scale, self.scale * acc)
            }
            MemoryKind::Staggered { gamma: g } => {
                let v = |i: usize| if i == next { 0.0 } else { hist[i] };
                let rest = self.staggered(next, 3.0 - g, rate, &v);
                let h2 = self.h * self.h;
                let kappa = if next == 1 {
                    2.0 * self.scale / h2
                } else {
                    self.scale * (self.weights[1] + libm::pow(0.5, 3.0 - g)) / h2
                };
                (kappa, rest)
            }
            MemoryKind::Second { .. } => {
                let h2 = self.h * self.h;
                let curvature = |k: usize| {
                    if k == 0 {
                        2.0 * ((hist[1] - hist[0]) / self.h - rate) / self.h
                    } else {
                        (hist[k + 1] - 2.0 * hist[k] + hist[k - 1]) / h2
                    }
                };
                let span = self.span(next);
                let mut acc = 0.0;
                for i in 1..span {
                    acc += self.weights[i] * curvature(n - i);
                }
                let c = self.scale * self.weights[0];
                if n == 0 {
                    let kappa = 2.0 * c / h2;
                    (kappa, self.scale * acc + 2.0 * c * (-hist[0] / self.h - rate) / self.h)
                } else {
                    (c / h2, self.scale * acc + c * (-2.0 * hist[n] + hist[n - 1]) / h2)
                }
            }
        }
    }

    /// Staggered sum at node `big_n` with samples from `v`.
    fn staggered(&self, big_n: usize, p: f64, rate: f64, v: &dyn Fn(usize) -> f64) -> f64 {
        let h = self.h;
        let slope = |i: usize| (v(i + 1) - v(i)) / h;
        let first = (slope(0) - rate) / (0.5 * h);
        let nf = big_n as f64;
        let mut acc = first * (libm::pow(nf, p) - libm::pow(nf - 0.5, p));
        let lo = self.window.map_or(1, |w| big_n.saturating_sub(w).max(1));
        let mut last = first;
        for i in lo..big_n {
            last = (slope(i) - slope(i - 1)) / h;
            acc += self.weights[big_n - i] * last;
        }
        if lo > 1 {
            // truncated memory drops the early cells
            acc -= first * (libm::pow(nf, p) - libm::pow(nf - 0.5, p));
        }
        acc += libm::pow(0.5, p) * last;
        self.scale * acc
    }

    /// Value at the last node of `hist`.
    pub fn value(&self, hist: &[f64], rate: f64) -> f64 {
        let n = hist.len() - 1;
        if n == 0 {
            return 0.0;
        }
        let (kappa, rest) = self.split_next(&hist[..n], rate);
        kappa * hist[n] + rest
    }
}

/// `(d + 1/2)^p - (d - 1/2)^p`, the weight of a full cell at distance `d`.
fn cell_weight(p: f64, d: usize) -> f64 {
    if d == 0 {
        return 0.0;
    }
    let df = d as f64;
    if d < 64 {
        return libm::pow(df + 0.5, p) - libm::pow(df - 0.5, p);
    }
    // d^p ((1+x)^p - (1-x)^p) with x = 1/(2d): odd terms only
    let x = 0.5 / df;
    let mut xk = x;
    let mut acc = 0.0;
    let mut k = 1;
    while k < 40 {
        let term = 2.0 * crate::special::binomial(p, k) * xk;
        acc += term;
        if libm::fabs(term) < 1e-18 * libm::fabs(acc) {
            break;
        }
        xk *= x * x;
        k += 2;
    }
    libm::pow(df, p) * acc
}
