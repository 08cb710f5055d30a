use approx::assert_abs_diff_eq;
use fracdyn_core::convergence::convergence_study;
use fracdyn_core::frac_ops::{caputo_left, caputo_left_history, caputo_right, differentiate, fractional_integral, prop1_shift};
use fracdyn_core::special::gamma;
use fracdyn_core::{FracOrder, Grid, SampleSeries};
use proptest::prelude::*;

const LADDER: [f64; 5] = [1.0 / 256.0, 1.0 / 512.0, 1.0 / 1024.0, 1.0 / 2048.0, 1.0 / 4096.0];

fn unit_grid(h: f64) -> Grid {
    Grid::with_step(0.0, 1.0, h).unwrap()
}

fn power_rule(p: f64, alpha: f64, t: f64) -> f64 {
    gamma(p + 1.0) / gamma(p + 1.0 - alpha) * t.powf(p - alpha)
}

#[test]
fn product_trapezoid_power_rule_is_second_order() {
    for &(p, alpha) in &[(4.0, 0.5), (4.0, 1.5), (3.5, 0.3)] {
        let order = FracOrder::new(alpha).unwrap();
        let m = order.m() as i32;
        let table = convergence_study(&LADDER, |h| {
            let g = unit_grid(h);
            let dm = gamma(p + 1.0) / gamma(p + 1.0 - m as f64);
            let f_m = SampleSeries::from_fn(g, |t| dm * t.powf(p - m as f64))?;
            let d = caputo_left(&f_m, order)?;
            Ok(g.nodes().zip(d.values()).map(|(t, v)| (v - power_rule(p, alpha, t)).abs()).fold(0.0, f64::max))
        })
        .unwrap();
        assert!(table.fitted_order.unwrap() >= 1.8, "p {p} alpha {alpha}: {table:?}");
    }
}

#[test]
fn history_power_rule_order() {
    for &(p, alpha) in &[(2.0, 0.5), (2.0, 0.25), (3.0, 1.5)] {
        let order = FracOrder::new(alpha).unwrap();
        let table = convergence_study(&LADDER, |h| {
            let g = unit_grid(h);
            let q = SampleSeries::from_fn(g, |t| t.powf(p))?;
            Ok((caputo_left_history(&q, g.n_steps(), order)? - power_rule(p, alpha, 1.0)).abs())
        })
        .unwrap();
        // L1 for α < 1; the curvature scheme above 1 is first order
        let want = if alpha < 1.0 { 2.0 - alpha } else { 1.0 };
        assert!(table.fitted_order.unwrap() >= want - 0.1, "alpha {alpha}: {table:?}");
    }
}

#[test]
fn integrals_compose() {
    let g = Grid::new(0.0, 2.0, 2000).unwrap();
    let f = SampleSeries::from_fn(g, |t| (1.0 + t).cos()).unwrap();
    let twice = fractional_integral(&fractional_integral(&f, 0.3).unwrap(), 0.4).unwrap();
    let once = fractional_integral(&f, 0.7).unwrap();
    // the t^0.4 start of the inner integral spoils the first few nodes only
    for (a, b) in twice.values().iter().zip(once.values()).skip(g.index_of(0.5)) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-4);
    }
}

/// Centred difference in time of `D^α f` against `D^{α+1} f` plus the shift.
fn shift_residual(alpha: f64, h: f64) -> f64 {
    let order = FracOrder::new(alpha).unwrap();
    let up = order.plus_one();
    let g = Grid::with_step(0.0, 1.0 + 2.0 * h, h).unwrap();
    // f = t³ + t² + t
    let derivs = [
        |t: f64| 3.0 * t * t + 2.0 * t + 1.0,
        |t: f64| 6.0 * t + 2.0,
        |_: f64| 6.0,
    ];
    let m = order.m();
    let low = caputo_left(&SampleSeries::from_fn(g, derivs[m - 1]).unwrap(), order).unwrap();
    let high = caputo_left(&SampleSeries::from_fn(g, derivs[m]).unwrap(), up).unwrap();
    let j = g.index_of(1.0);
    let lhs = differentiate(low.values(), h).unwrap()[j];
    let f_m0 = derivs[m - 1](0.0);
    let rhs = high.at(j) + prop1_shift(order, f_m0, 1.0).unwrap();
    (lhs - rhs).abs()
}

#[test]
fn derivative_shift_identity() {
    for &alpha in &[0.5, 1.5] {
        let errs: Vec<f64> = LADDER.iter().map(|&h| shift_residual(alpha, h)).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "alpha {alpha}: {errs:?}");
        assert!(*errs.last().unwrap() < 1e-2, "alpha {alpha}: {errs:?}");
    }
}

#[test]
fn right_derivative_of_mirrored_power() {
    // (1-t)³ with α = 0.5: Γ(4)/Γ(3.5) (1-t)^2.5
    let g = Grid::new(0.0, 1.0, 1024).unwrap();
    let f1 = SampleSeries::from_fn(g, |t| -3.0 * (1.0 - t).powi(2)).unwrap();
    let d = caputo_right(&f1, FracOrder::new(0.5).unwrap()).unwrap();
    for (t, v) in g.nodes().zip(d.values()) {
        assert_abs_diff_eq!(*v, gamma(4.0) / gamma(3.5) * (1.0 - t).powf(2.5), epsilon = 1e-5);
    }
}

proptest! {
    #[test]
    fn integral_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, eps in 0.05..0.95f64, w in 0.5..4.0f64) {
        let g = Grid::new(0.0, 1.0, 64).unwrap();
        let f = SampleSeries::from_fn(g, |t| (w * t).sin()).unwrap();
        let k = SampleSeries::from_fn(g, |t| t * t - w).unwrap();
        let lhs = fractional_integral(&f.combine(a, &k, b).unwrap(), eps).unwrap();
        let rhs = fractional_integral(&f, eps).unwrap().combine(a, &fractional_integral(&k, eps).unwrap(), b).unwrap();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn integral_is_causal(cut in 1usize..63, bump in -5.0..5.0f64, eps in 0.05..0.95f64) {
        let g = Grid::new(0.0, 1.0, 64).unwrap();
        let f = SampleSeries::from_fn(g, |t| (3.0 * t).cos()).unwrap();
        let mut changed = f.values().to_vec();
        changed[cut + 1..].iter_mut().for_each(|v| *v += bump);
        let changed = SampleSeries::new(g, changed).unwrap();
        let a = fractional_integral(&f, eps).unwrap();
        let b = fractional_integral(&changed, eps).unwrap();
        prop_assert_eq!(&a.values()[..=cut], &b.values()[..=cut]);
    }
}
