//! Categorical laws of open systems and their lens semantics, checked
//! pointwise on library systems.

mod common;

use common::*;
use openerg::lens::{semantics, Lens, LensInterface};
use openerg::openerg::OpenSystem;
use openerg::simulate::{integrate, IntegratorConfig, Method};
use openerg::space::{Covector, Point};
use openerg::stdlib::{self, planar_tangent};

const TOL: f64 = 1e-12;

fn eval_all(sys: &OpenSystem, a: &Point, x: &Point) -> (Vec<f64>, f64, Vec<f64>) {
    let ax = a.concat(x);
    let w = sys.output().eval_raw(ax.coords()).unwrap();
    let e = sys.energy().eval_raw(ax.coords()).unwrap()[0];
    let beta = vec![0.0; sys.cod().dim()];
    let v = sys.velocity(a.coords(), &beta, x.coords()).unwrap();
    (w, e, v)
}

fn assert_same_system(lhs: &OpenSystem, rhs: &OpenSystem, seed: u64) {
    assert_eq!(lhs.dom(), rhs.dom());
    assert_eq!(lhs.cod(), rhs.cod());
    assert_eq!(lhs.state(), rhs.state());
    let mut r = rng(seed);
    for _ in 0..50 {
        let (a, x) = sample_ax(lhs, &mut r);
        let (w1, e1, v1) = eval_all(lhs, &a, &x);
        let (w2, e2, v2) = eval_all(rhs, &a, &x);
        assert!(max_abs_diff(&w1, &w2) <= TOL);
        assert!((e1 - e2).abs() <= TOL * e1.abs().max(1.0), "{e1} vs {e2}");
        assert!(max_abs_diff(&v1, &v2) <= TOL * 100.0);
        assert_eq!(
            lhs.reaction().matrix_at(x.coords()).unwrap(),
            rhs.reaction().matrix_at(x.coords()).unwrap()
        );
    }
}

#[test]
fn unit_laws_for_library_systems() {
    for (name, s) in catalogue() {
        let left = OpenSystem::identity(s.dom().clone()).compose(&s).unwrap();
        let right = s.compose(&OpenSystem::identity(s.cod().clone())).unwrap();
        assert_same_system(&left, &s, 1);
        assert_same_system(&right, &s, 2);
        let unit = OpenSystem::identity(openerg::Space::unit());
        assert_same_system(&s.tensor(&unit).unwrap(), &s, 3);
        assert_same_system(&unit.tensor(&s).unwrap(), &s, 4);
        let _ = name;
    }
}

#[test]
fn sequential_composition_is_associative() {
    let p = unit_pendulum();
    let s1 = stdlib::pendulum_with(p).unwrap();
    let s2 = stdlib::pendulum(2.0, 0.5, 3.7).unwrap();
    let s3 = stdlib::chain(2, p).unwrap();
    let left = s1.compose(&s2).unwrap().compose(&s3).unwrap();
    let right = s1.compose(&s2.compose(&s3).unwrap()).unwrap();
    assert_same_system(&left, &right, 10);

    let a = stdlib::anchor(0.3, 0.1);
    let d = stdlib::discard();
    let left = a.compose(&s1).unwrap().compose(&d).unwrap();
    let right = a.compose(&s1.compose(&d).unwrap()).unwrap();
    assert_same_system(&left, &right, 11);
}

#[test]
fn interchange_law() {
    let p = unit_pendulum();
    let s1 = stdlib::pendulum_with(p).unwrap();
    let s2 = stdlib::pendulum(1.5, 0.7, 9.81).unwrap();
    let s3 = stdlib::anchor(0.0, 1.0);
    let s4 = stdlib::pendulum(0.5, 2.0, 9.81).unwrap();
    let lhs = s1
        .compose(&s2)
        .unwrap()
        .tensor(&s3.compose(&s4).unwrap())
        .unwrap();
    let rhs = s1
        .tensor(&s3)
        .unwrap()
        .compose(&s2.tensor(&s4).unwrap())
        .unwrap();
    assert_same_system(&lhs, &rhs, 20);
}

#[test]
fn composite_energy_threads_outputs() {
    let s1 = stdlib::pendulum(1.0, 1.0, 9.81).unwrap();
    let s2 = stdlib::pendulum(2.0, 0.5, 9.81).unwrap();
    let both = s1.compose(&s2).unwrap();
    let mut r = rng(30);
    for _ in 0..50 {
        let (a, x) = sample_ax(&both, &mut r);
        let (x1, x2) = x.split_at(2);
        let w1 = s1.output().eval_raw(a.concat(&x1).coords()).unwrap();
        let mid = Point::from_raw(w1);
        let e = s1.energy().eval_raw(a.concat(&x1).coords()).unwrap()[0]
            + s2.energy().eval_raw(mid.concat(&x2).coords()).unwrap()[0];
        let got = both.energy().eval_raw(a.concat(&x).coords()).unwrap()[0];
        assert!((got - e).abs() <= TOL * e.abs().max(1.0));
        let w = s2.output().eval_raw(mid.concat(&x2).coords()).unwrap();
        assert!(max_abs_diff(&w, &both.output().eval_raw(a.concat(&x).coords()).unwrap()) <= TOL);
    }
}

#[test]
fn closing_commutes_with_composition() {
    let p = unit_pendulum();
    let pivot = Point::from_raw(vec![0.2, -0.4, 0.0, 0.0]);
    let chain = stdlib::chain(2, p).unwrap();
    let by_close = chain.close(&pivot).unwrap();
    let by_anchor = stdlib::anchor(0.2, -0.4)
        .compose(&chain)
        .unwrap()
        .close(&Point::unit())
        .unwrap();
    let mut r = rng(40);
    for _ in 0..50 {
        let x = chain.state().sample(&mut r, 3.0);
        let (e1, e2) = (
            by_close.energy_at(x.coords()).unwrap(),
            by_anchor.energy_at(x.coords()).unwrap(),
        );
        assert!((e1 - e2).abs() <= TOL * e1.abs().max(1.0));
    }
}

#[test]
fn tensor_then_close_runs_factors_independently() {
    let p = stdlib::pendulum(1.0, 1.0, 9.81).unwrap();
    let osc = stdlib::harmonic_oscillator(1.0, 3.0).unwrap();
    let pair = p.tensor(&osc.clone().into_open()).unwrap();
    let pivot = vec![0.0, 0.0, 0.0, 0.0];
    let joint = pair.close(&Point::from_raw(pivot.clone())).unwrap();
    let alone = p.close(&Point::from_raw(pivot)).unwrap();
    let cfg = IntegratorConfig::new(Method::Rk4, 1e-3, 2000).unwrap();
    let tj = integrate(&joint, &Point::from_raw(vec![4.0, 0.5, 1.0, -1.0]), &cfg).unwrap();
    let tp = integrate(&alone, &Point::from_raw(vec![4.0, 0.5]), &cfg).unwrap();
    let to = integrate(&osc, &Point::from_raw(vec![1.0, -1.0]), &cfg).unwrap();
    for i in 0..tj.len() {
        let s = tj.states[i].coords();
        assert!(max_abs_diff(&s[..2], tp.states[i].coords()) <= TOL);
        assert!(max_abs_diff(&s[2..], to.states[i].coords()) <= TOL);
    }
}

#[test]
fn conservation_and_monotonicity_at_the_differential_level() {
    for (name, s) in catalogue() {
        let mut r = rng(50);
        for _ in 0..30 {
            let (a, x) = sample_ax(&s, &mut r);
            let closed = s.close(&a).unwrap();
            let de = closed.energy().differential_components(x.coords()).unwrap();
            let v = closed.velocity(x.coords()).unwrap();
            let power: f64 = de.iter().zip(&v).map(|(d, u)| d * u).sum();
            if closed.reaction().is_antisymmetric(x.coords(), 1e-15) {
                assert!(power.abs() <= TOL, "{name}: {power}");
            }
            if closed.reaction().is_psd(x.coords(), 1e-15) {
                assert!(power >= -TOL, "{name}: {power}");
            }
        }
    }
}

// ---------------------------------------------------------------- lenses

fn check_lens_eq(lhs: &Lens, rhs: &Lens, seed: u64) {
    assert_eq!(lhs.dom(), rhs.dom());
    assert_eq!(lhs.cod(), rhs.cod());
    let mut r = rng(seed);
    for _ in 0..100 {
        let x = lhs.dom().base.sample(&mut r, 2.0);
        let beta = uniform(&mut r, lhs.cod().fiber_dim, 2.0);
        let (f1, f2) = (
            lhs.forward(x.coords()).unwrap(),
            rhs.forward(x.coords()).unwrap(),
        );
        assert!(max_abs_diff(&f1, &f2) <= TOL);
        let (b1, b2) = (
            lhs.backward(x.coords(), &beta).unwrap(),
            rhs.backward(x.coords(), &beta).unwrap(),
        );
        assert!(max_abs_diff(&b1, &b2) <= TOL * 10.0, "{b1:?} vs {b2:?}");
    }
}

#[test]
fn semantics_preserves_composition() {
    let pairs = [
        (
            stdlib::pendulum(1.0, 1.0, 9.81).unwrap(),
            stdlib::pendulum(2.0, 0.5, 3.7).unwrap(),
        ),
        (
            stdlib::anchor(1.0, 2.0),
            stdlib::chain(2, unit_pendulum()).unwrap(),
        ),
        (
            stdlib::chain(2, unit_pendulum()).unwrap(),
            stdlib::discard(),
        ),
    ];
    for (i, (s1, s2)) in pairs.iter().enumerate() {
        let whole = semantics(&s1.compose(s2).unwrap());
        let parts = semantics(s1).compose(&semantics(s2)).unwrap();
        assert_eq!(whole.param, parts.param);
        check_lens_eq(&whole.wiring, &parts.wiring, 60 + i as u64);
        check_lens_eq(&whole.ode, &parts.ode, 70 + i as u64);
    }
}

#[test]
fn semantics_preserves_tensor() {
    let s1 = stdlib::pendulum(1.0, 1.0, 9.81).unwrap();
    let s2 = common::warped_gradient().into_open();
    let s3 = stdlib::anchor(0.0, 0.5);
    for (a, b) in [(&s1, &s2), (&s2, &s1), (&s1, &s3)] {
        let whole = semantics(&a.tensor(b).unwrap());
        let parts = semantics(a).tensor(&semantics(b)).unwrap();
        assert_eq!(whole.dom, parts.dom);
        check_lens_eq(&whole.wiring, &parts.wiring, 80);
        check_lens_eq(&whole.ode, &parts.ode, 81);
    }
}

#[test]
fn semantic_backward_matches_composite_formula() {
    // T*(w ⨟ w')(β) + d(E + w*E'), assembled from the parts by hand
    let s1 = stdlib::pendulum(1.0, 1.0, 9.81).unwrap();
    let s2 = stdlib::pendulum(1.2, 0.8, 9.81).unwrap();
    let both = s1.compose(&s2).unwrap();
    let wiring = semantics(&both).wiring;
    let mut r = rng(90);
    for _ in 0..100 {
        let (a, x) = sample_ax(&both, &mut r);
        let (x1, x2) = x.split_at(2);
        let beta = uniform(&mut r, 4, 2.0);
        let ax1 = a.concat(&x1);
        let mid = Point::from_raw(s1.output().eval_raw(ax1.coords()).unwrap());
        let bx2 = mid.concat(&x2);
        // downstream: covector on (B, X₂)
        let down = s2.backward_components(bx2.coords(), &beta).unwrap();
        // upstream: pull the B part back through w and add dE
        let up = s1.backward_components(ax1.coords(), &down[..4]).unwrap();
        let mut expected = up;
        expected.extend_from_slice(&down[4..]);
        let got = wiring.backward(a.concat(&x).coords(), &beta).unwrap();
        assert!(max_abs_diff(&got, &expected) <= TOL * 10.0);
    }
}

#[test]
fn collapse_commutes_with_composition() {
    let s1 = stdlib::pendulum(1.0, 1.0, 9.81).unwrap();
    let s2 = stdlib::pendulum(2.0, 0.5, 9.81).unwrap();
    let (m1, m2) = (semantics(&s1), semantics(&s2));
    let whole = m1.compose(&m2).unwrap().collapse().unwrap();
    let tx2 = LensInterface::tangent(s2.state().clone());
    let parts = m1
        .collapse()
        .unwrap()
        .tensor(&Lens::identity(tx2))
        .compose(&m2.collapse().unwrap())
        .unwrap();
    check_lens_eq(&whole, &parts, 100);
}

#[test]
fn collapse_reproduces_the_vector_field() {
    for (name, s) in catalogue() {
        let lens = semantics(&s).collapse().unwrap();
        let mut r = rng(110);
        for _ in 0..20 {
            let (a, x) = sample_ax(&s, &mut r);
            let ax = a.concat(&x);
            let zero = vec![0.0; s.cod().dim()];
            let back = lens.backward(ax.coords(), &zero).unwrap();
            let base = s.output().eval(&ax).unwrap();
            let v = s.vector_field(&a, &Covector::zero(base), &x).unwrap();
            let slot = &back[s.dom().dim()..];
            assert!(
                slot.iter()
                    .zip(&v.components)
                    .all(|(p, q)| p.to_bits() == q.to_bits()),
                "{name}"
            );
        }
    }
}

#[test]
fn planar_interface_shapes() {
    let m = semantics(&stdlib::pendulum(1.0, 1.0, 9.81).unwrap());
    assert_eq!(m.dom, LensInterface::cotangent(planar_tangent()));
    assert_eq!(m.param.fiber_dim, 2);
    assert_eq!(m.wiring.dom().fiber_dim, 6);
}
