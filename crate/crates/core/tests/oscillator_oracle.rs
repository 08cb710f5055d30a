//! Closed-form oscillator solutions against independent Mittag-Leffler expressions.

use fracdyn_core::mittag_leffler::{ml, MLParams};
use fracdyn_core::oscillator::{decomposed_solution, exact_solution, OscillatorSpec};
use fracdyn_core::Grid;

fn e(a: f64, b: f64, z: f64) -> f64 {
    ml(MLParams::new(a, b).unwrap(), z).unwrap()
}

/// Convolution of the Green's function with each forcing monomial, evaluated
/// through the Laplace-transform identity for `t^p * τ^{β-1}E_{β,β}`.
fn closed_form(s: &OscillatorSpec, t: f64) -> f64 {
    let b = s.alpha - 1.0;
    let p = (s.alpha.floor() + 1.0) - s.alpha + 1.0;
    let z = -s.omega2 * t.powf(b);
    s.q0 * e(b, 1.0, z)
        + t * s.qp0 * e(b, 2.0, z)
        + s.q0 * t.powf(b + p) * e(b, b + p + 1.0, z)
        + s.c1 * t.powf(b + 1.0) * e(b, b + 2.0, z)
        + s.c2 * t.powf(b) * e(b, b + 1.0, z)
}

#[test]
fn quadrature_solution_matches_closed_form() {
    for &(alpha, w2, q0, qp0) in &[(2.5, 1.0, 1.0, 0.0), (2.3, 2.0, 0.5, -1.0), (2.8, 0.5, -1.0, 0.7)] {
        let s = OscillatorSpec::new(alpha, w2, q0, qp0).unwrap();
        let g = Grid::new(0.0, 10.0, 200).unwrap();
        let q = exact_solution(&s, &g).unwrap();
        let worst = g
            .nodes()
            .zip(q.values())
            .map(|(t, v)| (v - closed_form(&s, t)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "alpha {alpha}: {worst:e}");
    }
}

#[test]
fn unforced_cases_reduce_to_mittag_leffler() {
    let s = OscillatorSpec::with_constants(2.5, 1.0, 1.0, 0.0, 0.0, 0.0).unwrap();
    // q0 forcing is present whenever q0 != 0, so compare against the closed form
    let g = Grid::new(0.0, 5.0, 50).unwrap();
    let q = exact_solution(&s, &g).unwrap();
    for (t, v) in g.nodes().zip(q.values()) {
        assert!((v - closed_form(&s, t)).abs() < 1e-6);
    }
    // q0 = 0 and no constants: pure velocity response
    let s = OscillatorSpec::with_constants(2.5, 1.0, 0.0, 1.0, 0.0, 0.0).unwrap();
    let q = exact_solution(&s, &g).unwrap();
    for (t, v) in g.nodes().zip(q.values()) {
        assert!((v - t * e(1.5, 2.0, -t.powf(1.5))).abs() < 1e-12);
    }
}

#[test]
fn harmonic_limit() {
    let s = OscillatorSpec::with_constants(2.999_999_9, 1.0, 0.0, 1.0, 0.0, 0.0).unwrap();
    let g = Grid::new(0.0, 10.0, 100).unwrap();
    let q = exact_solution(&s, &g).unwrap();
    for (t, v) in g.nodes().zip(q.values()) {
        assert!((v - t.sin()).abs() < 1e-5, "{t}: {v}");
    }
}

#[test]
fn decomposition_path_agrees() {
    let s = OscillatorSpec::new(2.5, 1.0, 1.0, 0.5).unwrap();
    let g = Grid::new(0.0, 10.0, 100).unwrap();
    let a = exact_solution(&s, &g).unwrap();
    let b = decomposed_solution(&s, &g).unwrap();
    for ((t, x), y) in g.nodes().zip(a.values()).zip(b.values()) {
        if t >= 0.1 {
            assert!((x - y).abs() < 1e-5, "{t}: {x} vs {y}");
        }
    }
}
