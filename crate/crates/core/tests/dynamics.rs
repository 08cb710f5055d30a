use fracdyn_core::constrained::{FluxPath, LinearConstraint, Potential, QuadraticConstraint, SystemSpec};
use fracdyn_core::mittag_leffler::{ml, MLParams};
use fracdyn_core::solver::{integrate_second_order, IntegratorConfig};
use fracdyn_core::{integrate_hamilton, rhs_general, rhs_linear, AffineField, FracOrder, HamiltonSpec};

fn half() -> FracOrder {
    FracOrder::new(0.5).unwrap()
}

#[test]
fn free_motion_conserves_energy() {
    let k = vec![1.0, 2.0];
    let energy = |q: &[f64], v: &[f64]| 0.5 * (v[0] * v[0] + v[1] * v[1] + k[0] * q[0] * q[0] + k[1] * q[1] * q[1]);
    let spec = SystemSpec::new(Potential::quadratic(k.clone()), vec![1.0, 0.0], vec![0.0, 0.5]);
    let mut sys = rhs_general(spec, FluxPath::Shifted).unwrap();
    let r = integrate_second_order(&mut sys, &IntegratorConfig::new(1e-3, 10.0).unwrap()).unwrap();
    let e0 = energy(&r.q[0], &r.qdot[0]);
    let drift = r.q.iter().zip(&r.qdot).map(|(q, v)| (energy(q, v) - e0).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-6, "{drift:e}");
}

#[test]
fn hamilton_matches_lagrange_for_constant_field() {
    let a = vec![1.0, 1.0];
    let k = vec![1.0, 2.0];
    let cfg = IntegratorConfig::new(1e-3, 5.0).unwrap();
    let spec = SystemSpec::new(Potential::quadratic(k.clone()), vec![1.0, 0.0], vec![0.5, -0.5])
        .with_constraint(LinearConstraint::new(a.clone(), vec![0.0, 0.0], half()).unwrap());
    let lag = integrate_second_order(&mut rhs_linear(spec, FluxPath::Shifted).unwrap(), &cfg).unwrap();
    let ham = integrate_hamilton(
        &HamiltonSpec {
            potential: Potential::quadratic(k),
            field: Box::new(AffineField::constant(a, half())),
            q_init: vec![1.0, 0.0],
            p_init: vec![0.5, -0.5],
        },
        &cfg,
    )
    .unwrap();
    let gap = lag
        .q
        .iter()
        .zip(&ham.sim.q)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    assert!(gap < 5.0 * cfg.tolerance, "{gap:e}");
}

#[test]
fn offset_constraint_follows_mittag_leffler() {
    // q̇ + D^½ q = c  ⇒  q = q0 + c t E_{½,2}(-√t)
    let (q0, c) = (0.3, 0.8);
    let e = MLParams::new(0.5, 2.0).unwrap();
    for path in [FluxPath::Direct, FluxPath::Shifted] {
        let spec = SystemSpec::new(Potential::quadratic(vec![1.0]), vec![q0], vec![c]).with_constraint(QuadraticConstraint {
            linear: LinearConstraint::new(vec![1.0], vec![1.0], half()).unwrap(),
            c: vec![0.0],
            offset: c,
        });
        let mut sys = rhs_general(spec, path).unwrap();
        let r = integrate_second_order(&mut sys, &IntegratorConfig::new(1.0 / 1024.0, 2.0).unwrap()).unwrap();
        let worst = r
            .grid
            .nodes()
            .zip(&r.q)
            .map(|(t, q)| (q[0] - q0 - c * t * ml(e, -t.sqrt()).unwrap()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 2e-3, "{path:?}: {worst:e}");
    }
}

#[test]
fn uncoupled_coordinate_stays_classical() {
    // a = (0, 1), b = (1, 0): q̈₁ carries no constraint force
    let spec = SystemSpec::new(Potential::quadratic(vec![1.0, 0.0]), vec![1.0, 0.0], vec![0.0, 0.0])
        .with_constraint(LinearConstraint::new(vec![0.0, 1.0], vec![1.0, 0.0], FracOrder::new(1.5).unwrap()).unwrap());
    let r = integrate_second_order(&mut rhs_linear(spec, FluxPath::Shifted).unwrap(), &IntegratorConfig::new(1e-3, 5.0).unwrap()).unwrap();
    for (t, q) in r.grid.nodes().zip(&r.q) {
        assert!((q[0] - t.cos()).abs() < 1e-5);
    }
    assert!(r.q.last().unwrap()[1].abs() > 1e-3);
}
