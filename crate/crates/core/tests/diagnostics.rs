use approx::assert_abs_diff_eq;
use plasma_charge::boundary::{BoundaryDensity, BoundaryPotential};
use plasma_charge::charges::{ChargeModel, ChargeState};
use plasma_charge::diagnostics::{
    beta, moment_hk, pointwise_h, pointwise_q, singular_moment_lk_increment, BetaMonitor, Recorder,
};
use plasma_charge::geometry::{ConvexDomain, LocalFrame};
use plasma_charge::greens::{disk_green, disk_green_grad, Flavor, GreenEvaluator};
use plasma_charge::plasma::{BoundaryRule, ParticleEnsemble, PhaseBox, PlasmaField};
use plasma_charge::system::CoupledModel;
use plasma_charge::{pt, Point};
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

fn ensemble(xs: &[Point], vs: &[Point], ws: &[f64]) -> ParticleEnsemble {
    ParticleEnsemble::new(xs.to_vec(), vs.to_vec(), ws.to_vec()).unwrap()
}

fn model(flavor: Flavor, m: usize, h_n: &BoundaryDensity, rule: BoundaryRule) -> CoupledModel {
    let ev = Arc::new(GreenEvaluator::exact_disk(flavor));
    let h_cha = match (flavor, m) {
        (Flavor::Neumann, m) if m > 0 => BoundaryDensity::Uniform { total: m as f64 },
        _ => BoundaryDensity::Zero,
    };
    CoupledModel {
        domain: Arc::new(ConvexDomain::unit_disk()),
        plasma: PlasmaField::new(ev.clone(), BoundaryPotential::new(&ev, h_n).unwrap()),
        charges: ChargeModel::new(ev, &h_cha, m).unwrap(),
        rule,
    }
}

#[test]
fn hk_examples() {
    let ens = ensemble(&[pt(0.1, 0.0), pt(-0.3, 0.2)], &[pt(1.0, 2.0), pt(0.0, -1.0)], &[0.3, 0.9]);
    assert_abs_diff_eq!(moment_hk(&ens, &[pt(0.5, 0.5)], 0.0, 1.0).unwrap(), 1.2, epsilon = 1e-15);

    let rest = ensemble(&[pt(0.1, 0.0), pt(-0.3, 0.2)], &[Point::zeros(); 2], &[0.3, 0.9]);
    assert_abs_diff_eq!(moment_hk(&rest, &[], 2.0, 1.0).unwrap(), 1.2, epsilon = 1e-15);
    assert_abs_diff_eq!(moment_hk(&rest, &[], 4.0, 1.0).unwrap(), 1.2, epsilon = 1e-15);

    let one = ensemble(&[pt(1.0 / (4.0 * PI), 0.0)], &[Point::zeros()], &[1.0]);
    assert_abs_diff_eq!(pointwise_h(&one.positions[0], &Point::zeros(), &[Point::zeros()], 1.0), 2.0, epsilon = 1e-14);
    assert_abs_diff_eq!(moment_hk(&one, &[Point::zeros()], 2.0, 1.0).unwrap(), 2.0, epsilon = 1e-14);
    assert_abs_diff_eq!(moment_hk(&one, &[Point::zeros()], 4.0, 1.0).unwrap(), 4.0, epsilon = 1e-13);

    let on_charge = ensemble(&[pt(0.2, 0.0)], &[Point::zeros()], &[1.0]);
    assert!(moment_hk(&on_charge, &[pt(0.2, 0.0)], 2.0, 1.0).is_err());
}

#[test]
fn lk_examples() {
    let ens = ensemble(&[pt(0.5, 0.0)], &[Point::zeros()], &[1.0]);
    assert_eq!(singular_moment_lk_increment(&ens, &[], 2.0, 1.0, 0.1), 0.0);
    // h^0 = 1, 1 / 0.5^2 = 4
    assert_abs_diff_eq!(singular_moment_lk_increment(&ens, &[Point::zeros()], 0.0, 1.0, 0.1), 0.4, epsilon = 1e-15);
    let heavy = ensemble(&[pt(0.5, 0.0)], &[Point::zeros()], &[3.5]);
    assert_abs_diff_eq!(
        singular_moment_lk_increment(&heavy, &[Point::zeros()], 2.0, 1.0, 0.1),
        3.5 * singular_moment_lk_increment(&ens, &[Point::zeros()], 2.0, 1.0, 0.1),
        epsilon = 1e-14
    );
}

#[test]
fn beta_examples() {
    let wall = LocalFrame { mu: 0.0, x_perp: 0.0, v_perp: 0.7, v_tan: 0.3 };
    assert_abs_diff_eq!(beta(&wall, 1.0, 1.0), 0.245, epsilon = 1e-15);
    let flat = LocalFrame { mu: 0.0, x_perp: 0.1, v_perp: 0.0, v_tan: 0.0 };
    assert_abs_diff_eq!(beta(&flat, 1.0, 1.0), 0.1, epsilon = 1e-15);
}

#[test]
fn frozen_particle_has_unit_beta_ratio() {
    let disk = ConvexDomain::unit_disk();
    let h = BoundaryDensity::Uniform { total: 1.0 };
    let ens = ensemble(&[pt(0.9, 0.0)], &[pt(0.1, 0.2)], &[1.0]);
    let mut mon = BetaMonitor::new(1);
    assert_eq!(mon.update(&ens, &disk, &h), 1.0);
    assert_eq!(mon.update(&ens, &disk, &h), 1.0);
    assert_eq!(mon.episodes, 1);
    assert_eq!(mon.flagged, 0);
    assert_eq!((mon.min_ratio, mon.max_ratio), (1.0, 1.0));
}

#[test]
fn q_examples() {
    let ens = ensemble(&[pt(0.5, 0.0)], &[Point::zeros()], &[1.0]);
    let charge = ChargeState::at_rest(vec![pt(-0.5, 0.0)]);
    assert_abs_diff_eq!(pointwise_q(&ens, &charge, 1.0), 2f64.sqrt(), epsilon = 1e-15);
    let moving = ensemble(&[pt(0.5, 0.0)], &[pt(2.0, 0.0)], &[1.0]);
    assert_abs_diff_eq!(pointwise_q(&moving, &ChargeState::default(), 1.0), 3f64.sqrt(), epsilon = 1e-15);
}

#[test]
fn energy_examples() {
    let m = model(Flavor::Dirichlet, 1, &BoundaryDensity::Zero, BoundaryRule::Reflection);
    let s = m.initialize(ParticleEnsemble::default(), ChargeState::at_rest(vec![Point::zeros()])).unwrap();
    assert_abs_diff_eq!(m.energy(&s).unwrap().total, 0.0, epsilon = 1e-15);

    let m = model(Flavor::Dirichlet, 0, &BoundaryDensity::Zero, BoundaryRule::Reflection);
    let one = ensemble(&[Point::zeros()], &[Point::zeros()], &[1.0]);
    let s = m.initialize(one, ChargeState::default()).unwrap();
    assert_abs_diff_eq!(m.energy(&s).unwrap().total, 0.0, epsilon = 1e-15);
}

#[test]
fn energy_parts_add_up() {
    let h = BoundaryDensity::Uniform { total: 1.0 };
    let m = model(Flavor::Neumann, 1, &h, BoundaryRule::Absorption);
    let ens = ParticleEnsemble::from_boxes(
        &[PhaseBox { x: [-0.6, -0.1], y: [-0.3, 0.3], vx: [-1.0, 1.0], vy: [-1.0, 1.0], weight: 1.0, count: 50 }],
        0,
    )
    .unwrap();
    let mut s = m.initialize(ens, ChargeState::at_rest(vec![pt(0.5, 0.0)])).unwrap();
    for _ in 0..50 {
        m.step(&mut s, 1e-2).unwrap();
    }
    let e = m.energy(&s).unwrap();
    assert!((e.kinetic + e.interaction + e.flux - e.total).abs() <= 1e-12);
}

// Two unit particles in the Dirichlet disk, no charges: E = sum |v|^2 / 2 - G_D(x1, x2),
// integrated with classical RK4 at a small step as the reference flow.
fn pair_energy(x: &[Point; 2], v: &[Point; 2]) -> f64 {
    0.5 * (v[0].norm_squared() + v[1].norm_squared()) - disk_green(Flavor::Dirichlet, &x[0], &x[1]).unwrap()
}

fn pair_rhs(x: &[Point; 2]) -> [Point; 2] {
    [
        disk_green_grad(Flavor::Dirichlet, &x[0], &x[1]).unwrap(),
        disk_green_grad(Flavor::Dirichlet, &x[1], &x[0]).unwrap(),
    ]
}

#[test]
fn pair_energy_is_conserved_by_the_exact_flow() {
    let m = model(Flavor::Dirichlet, 0, &BoundaryDensity::Zero, BoundaryRule::Reflection);
    let mut x = [pt(0.3, 0.0), pt(-0.3, 0.0)];
    let mut v = [pt(0.0, 0.4), pt(0.1, -0.3)];
    let ens = ensemble(&x, &v, &[1.0, 1.0]);
    let s = m.initialize(ens, ChargeState::default()).unwrap();
    let e0 = m.energy(&s).unwrap().total;
    assert_abs_diff_eq!(e0, pair_energy(&x, &v), epsilon = 1e-14);
    let free = -(0.6f64).ln() / (2.0 * PI);
    assert_abs_diff_eq!(free, 0.0813, epsilon = 1e-4);

    let h = 1e-4;
    for _ in 0..2000 {
        let k1v = pair_rhs(&x);
        let k1x = v;
        let x2 = [x[0] + k1x[0] * (h / 2.0), x[1] + k1x[1] * (h / 2.0)];
        let k2v = pair_rhs(&x2);
        let k2x = [v[0] + k1v[0] * (h / 2.0), v[1] + k1v[1] * (h / 2.0)];
        let x3 = [x[0] + k2x[0] * (h / 2.0), x[1] + k2x[1] * (h / 2.0)];
        let k3v = pair_rhs(&x3);
        let k3x = [v[0] + k2v[0] * (h / 2.0), v[1] + k2v[1] * (h / 2.0)];
        let x4 = [x[0] + k3x[0] * h, x[1] + k3x[1] * h];
        let k4v = pair_rhs(&x4);
        let k4x = [v[0] + k3v[0] * h, v[1] + k3v[1] * h];
        for i in 0..2 {
            x[i] += (k1x[i] + k2x[i] * 2.0 + k3x[i] * 2.0 + k4x[i]) * (h / 6.0);
            v[i] += (k1v[i] + k2v[i] * 2.0 + k3v[i] * 2.0 + k4v[i]) * (h / 6.0);
        }
    }
    let s = m.initialize(ensemble(&x, &v, &[1.0, 1.0]), ChargeState::default()).unwrap();
    assert!((m.energy(&s).unwrap().total - e0).abs() <= 1e-8);
}

#[test]
fn recorder_quantities_are_monotone() {
    let h = BoundaryDensity::Uniform { total: 1.0 };
    let m = model(Flavor::Neumann, 1, &h, BoundaryRule::Reflection);
    let ens = ParticleEnsemble::from_boxes(
        &[PhaseBox { x: [-0.7, -0.1], y: [-0.3, 0.3], vx: [-1.0, 1.0], vy: [-1.0, 1.0], weight: 1.0, count: 40 }],
        1,
    )
    .unwrap();
    let mut s = m.initialize(ens, ChargeState::at_rest(vec![pt(0.5, 0.0)])).unwrap();
    let disk = ConvexDomain::unit_disk();
    let mut rec = Recorder::new(40, 1.0, true);
    rec.observe(&s, &disk, &h, 0.0).unwrap();
    let mut prev = (rec.h2, rec.h4, rec.l0, rec.l2, rec.q);
    for _ in 0..100 {
        m.step(&mut s, 5e-3).unwrap();
        rec.observe(&s, &disk, &h, 5e-3).unwrap();
        let now = (rec.h2, rec.h4, rec.l0, rec.l2, rec.q);
        assert!(now.0 >= prev.0 && now.1 >= prev.1 && now.2 >= prev.2 && now.3 >= prev.3 && now.4 >= prev.4);
        prev = now;
    }
    assert!(rec.l0 > 0.0);
    let row = rec.record(&s, &m.energy(&s).unwrap());
    assert_abs_diff_eq!(row.l1, 1.0, epsilon = 1e-14);
    assert!(row.min_dist_boundary > 0.0 && row.min_dist_boundary <= 0.5);
}

proptest! {
    #[test]
    fn hk_scales_with_weights(c in 0.1..10.0f64, k in 0.0..6.0f64) {
        let xs = [pt(0.1, 0.2), pt(-0.4, 0.1)];
        let vs = [pt(0.3, -0.2), pt(1.0, 0.5)];
        let a = moment_hk(&ensemble(&xs, &vs, &[0.4, 0.6]), &[pt(0.5, 0.5)], k, 1.0).unwrap();
        let b = moment_hk(&ensemble(&xs, &vs, &[0.4 * c, 0.6 * c]), &[pt(0.5, 0.5)], k, 1.0).unwrap();
        prop_assert!((b - c * a).abs() <= 1e-12 * b.abs().max(1.0));
    }

    #[test]
    fn beta_on_the_wall_is_half_normal_speed_squared(vp in -5.0..5.0f64, vt in -5.0..5.0f64, h in 0.0..3.0f64, kappa in 0.0..4.0f64) {
        let f = LocalFrame { mu: 0.0, x_perp: 0.0, v_perp: vp, v_tan: vt };
        prop_assert!((beta(&f, h, kappa) - 0.5 * vp * vp).abs() <= 1e-15 * vp * vp + 1e-300);
    }
}
