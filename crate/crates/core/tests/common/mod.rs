#![allow(dead_code)]

use nalgebra::{dmatrix, DMatrix};
use openerg::maps::SmoothMap;
use openerg::openerg::OpenSystem;
use openerg::reaction::Flow;
use openerg::scalar::Scalar;
use openerg::space::{Point, Space};
use openerg::stdlib::{self, PendulumParams};
use openerg::{smooth_map, ClosedSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-r..r)).collect()
}

/// Parameter and state sample for `sys`.
pub fn sample_ax(sys: &OpenSystem, rng: &mut ChaCha8Rng) -> (Point, Point) {
    (sys.dom().sample(rng, 2.0), sys.state().sample(rng, 3.0))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn unit_pendulum() -> PendulumParams {
    PendulumParams::new(1.0, 1.0, 9.81).unwrap()
}

fn warped_metric(x: &[f64]) -> DMatrix<f64> {
    dmatrix![1.0 + x[0] * x[0], 0.2; 0.2, 2.0]
}

pub fn warped_gradient() -> ClosedSystem {
    stdlib::gradient_system(
        Space::euclidean(2),
        smooth_map!(Space::euclidean(2) => Space::line(), |x: [S]| {
            Ok(vec![x[0].sin() * x[1] + x[1].abs2() * 0.5])
        }),
        warped_metric,
        Flow::Ascent,
    )
    .unwrap()
}

/// Every library system, under a descriptive name.
pub fn catalogue() -> Vec<(&'static str, OpenSystem)> {
    let p = unit_pendulum();
    let q = PendulumParams::new(2.0, 0.5, 3.7).unwrap();
    vec![
        ("pendulum", stdlib::pendulum_with(p).unwrap()),
        ("pendulum(2,0.5,3.7)", stdlib::pendulum_with(q).unwrap()),
        ("anchor", stdlib::anchor(0.5, -1.0)),
        ("discard", stdlib::discard()),
        ("identity", OpenSystem::identity(stdlib::planar_tangent())),
        ("chain(2)", stdlib::chain(2, p).unwrap()),
        ("chain(3) mixed", stdlib::chain_from(&[p, q, p]).unwrap()),
        (
            "anchored double pendulum",
            stdlib::anchor(0.0, 0.0)
                .compose(&stdlib::chain(2, p).unwrap())
                .unwrap()
                .compose(&stdlib::discard())
                .unwrap(),
        ),
        (
            "oscillator",
            stdlib::harmonic_oscillator(1.5, 2.0).unwrap().into_open(),
        ),
        (
            "gradient descent",
            stdlib::quadratic_gradient(2, 1.0, 1.0, Flow::Descent)
                .unwrap()
                .into_open(),
        ),
        (
            "gradient ascent",
            stdlib::quadratic_gradient(3, -0.5, 2.0, Flow::Ascent)
                .unwrap()
                .into_open(),
        ),
        ("warped gradient", warped_gradient().into_open()),
        (
            "pendulum | oscillator",
            stdlib::pendulum_with(p)
                .unwrap()
                .tensor(&stdlib::harmonic_oscillator(1.0, 1.0).unwrap().into_open())
                .unwrap(),
        ),
    ]
}

/// Central-difference Jacobian with step `h`.
pub fn fd_jacobian(f: &SmoothMap, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let m = f.cod().dim();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let (yp, ym) = (f.eval_raw(&xp).unwrap(), f.eval_raw(&xm).unwrap());
        for i in 0..m {
            jac[(i, j)] = (yp[i] - ym[i]) / (2.0 * h);
        }
    }
    jac
}

/// Double-pendulum energy written out coordinate by coordinate:
/// `z = (x₀, v₀, θ₁, L₁, θ₂, L₂)`.
pub fn hand_double_energy<S: Scalar>(p: PendulumParams, z: &[S]) -> S {
    let PendulumParams { m, l, g } = p;
    let inertia = m * l * l;
    let (w1, w2) = (z[5] * (1.0 / inertia), z[7] * (1.0 / inertia));
    let x1 = [z[0] + z[4].cos() * l, z[1] + z[4].sin() * l];
    let v1 = [z[2] - w1 * z[4].sin() * l, z[3] + w1 * z[4].cos() * l];
    let x2 = [x1[0] + z[6].cos() * l, x1[1] + z[6].sin() * l];
    let v2 = [v1[0] - w2 * z[6].sin() * l, v1[1] + w2 * z[6].cos() * l];
    (v1[0].abs2() + v1[1].abs2()) * (0.5 * m)
        + (v2[0].abs2() + v2[1].abs2()) * (0.5 * m)
        + x1[1] * (m * g)
        + x2[1] * (m * g)
}

/// Field of the hand-written energy: `(∂E/∂L₁, −∂E/∂θ₁, ∂E/∂L₂, −∂E/∂θ₂)`.
pub fn hand_double_field(p: PendulumParams, a: &[f64], x: &[f64]) -> Vec<f64> {
    let energy = SmoothMap::from_fns(
        Space::euclidean(8),
        Space::line(),
        move |z: &[f64]| Ok(vec![hand_double_energy(p, z)]),
        move |z: &[openerg::scalar::Dual]| Ok(vec![hand_double_energy(p, z)]),
    );
    let mut z = a.to_vec();
    z.extend_from_slice(x);
    let de = energy.differential_components(&z).unwrap();
    vec![de[5], -de[4], de[7], -de[6]]
}
