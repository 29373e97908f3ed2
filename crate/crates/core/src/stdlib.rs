//! Library of ready-made systems: the open pendulum and its chains, the
//! anchor and discard closure devices, gradient systems and an oscillator.
//!
//! Pivot and bob interfaces are `Tℝ²` laid out as `(x, y, vx, vy)`; a
//! pendulum's state is `(θ, L)` with `θ` measured from the horizontal.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{Program, SmoothMap};
use crate::openerg::{ClosedSystem, OpenSystem};
use crate::reaction::{Flow, Reaction};
use crate::scalar::{Scalar, ScalarError};
use crate::space::{Factor, Point, Space};

/// Mass, rod length and gravitational acceleration of one pendulum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    pub m: f64,
    pub l: f64,
    pub g: f64,
}

impl PendulumParams {
    pub fn new(m: f64, l: f64, g: f64) -> Result<Self> {
        for (name, v) in [("m", m), ("l", l), ("g", g)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(PendulumParams { m, l, g })
    }

    /// Moment of inertia about the pivot.
    pub fn inertia(&self) -> f64 {
        self.m * self.l * self.l
    }
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams {
            m: 1.0,
            l: 1.0,
            g: 9.81,
        }
    }
}

/// `Tℝ²`, the pivot/bob interface.
pub fn planar_tangent() -> Space {
    Space::euclidean(4)
}

/// Pendulum state `T*S¹`.
pub fn pendulum_state() -> Space {
    Space::new(vec![Factor::Circle, Factor::Line])
}

/// `(x₀, v₀, θ, L) ↦ (x, v, E)` with bob position `x`, bob velocity `v`.
struct PendulumJoint(PendulumParams);

impl Program for PendulumJoint {
    fn apply<S: Scalar>(&self, z: &[S]) -> Result<Vec<S>, ScalarError> {
        let PendulumParams { m, l, g } = self.0;
        let omega = 1.0 / self.0.inertia();
        let (s, c) = (z[4].sin(), z[4].cos());
        let speed = z[5] * (l * omega);
        let y = z[1] + s * l;
        let vx = z[2] - speed * s;
        let vy = z[3] + speed * c;
        let kinetic = (vx.abs2() + vy.abs2()) * (m / 2.0);
        let potential = y * (m * g);
        Ok(vec![z[0] + c * l, y, vx, vy, kinetic + potential])
    }
}

/// Open pendulum `Tℝ² → Tℝ²` hanging from a moving pivot.
pub fn pendulum(m: f64, l: f64, g: f64) -> Result<OpenSystem> {
    pendulum_with(PendulumParams::new(m, l, g)?)
}

pub fn pendulum_with(p: PendulumParams) -> Result<OpenSystem> {
    let p = PendulumParams::new(p.m, p.l, p.g)?;
    let total = planar_tangent().product(&pendulum_state());
    OpenSystem::from_joint(
        planar_tangent(),
        planar_tangent(),
        pendulum_state(),
        Reaction::canonical_symplectic(&Space::circle()),
        SmoothMap::new(total, Space::euclidean(5), PendulumJoint(p)),
    )
}

/// Pins a pendulum chain's pivot at `(x, y)` at rest.
pub fn anchor(x: f64, y: f64) -> OpenSystem {
    let total = Space::unit();
    OpenSystem::new(
        Space::unit(),
        planar_tangent(),
        Space::unit(),
        Reaction::empty(),
        SmoothMap::constant(total.clone(), planar_tangent(), vec![x, y, 0.0, 0.0])
            .expect("four coordinates"),
        SmoothMap::zero_energy(total),
    )
    .expect("anchor is well-typed")
}

/// Terminates a chain's free end.
pub fn discard() -> OpenSystem {
    let total = planar_tangent();
    OpenSystem::new(
        planar_tangent(),
        Space::unit(),
        Space::unit(),
        Reaction::empty(),
        SmoothMap::constant(total.clone(), Space::unit(), vec![]).expect("empty point"),
        SmoothMap::zero_energy(total),
    )
    .expect("discard is well-typed")
}

/// `n` identical pendula hung end to end.
pub fn chain(n: usize, p: PendulumParams) -> Result<OpenSystem> {
    chain_from(&vec![p; n])
}

/// One pendulum per entry, the first attached to the pivot.
pub fn chain_from(params: &[PendulumParams]) -> Result<OpenSystem> {
    let (first, rest) = params
        .split_first()
        .ok_or_else(|| Error::Parameter("a chain needs at least one pendulum".into()))?;
    rest.iter().try_fold(pendulum_with(*first)?, |acc, p| {
        acc.compose(&pendulum_with(*p)?)
    })
}

/// `anchor(pivot) ⨟ chain ⨟ discard`, closed.
pub fn closed_chain(params: &[PendulumParams], pivot: (f64, f64)) -> Result<ClosedSystem> {
    anchor(pivot.0, pivot.1)
        .compose(&chain_from(params)?)?
        .compose(&discard())?
        .close(&Point::unit())
}

/// Flow of `objective` under the inverse of `metric`, ascending or descending.
pub fn gradient_system<G>(
    space: Space,
    objective: SmoothMap,
    metric: G,
    flow: Flow,
) -> Result<ClosedSystem>
where
    G: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
{
    if !space.is_euclidean() {
        return Err(Error::Parameter(format!(
            "gradient systems need a vector chart, got {space}"
        )));
    }
    ClosedSystem::new(
        space.clone(),
        Reaction::from_metric(space, metric, flow),
        objective,
    )
}

struct ScaledSquareNorm(f64);

impl Program for ScaledSquareNorm {
    fn apply<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, ScalarError> {
        Ok(vec![crate::scalar::norm2(x) * self.0])
    }
}

/// `S(x) = c‖x‖²` on `ℝⁿ` under the metric `k·I`.
pub fn quadratic_gradient(dim: usize, c: f64, k: f64, flow: Flow) -> Result<ClosedSystem> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Parameter(format!(
            "metric scale must be positive, got {k}"
        )));
    }
    if !c.is_finite() {
        return Err(Error::Parameter(format!(
            "coefficient must be finite, got {c}"
        )));
    }
    let space = Space::euclidean(dim);
    let objective = SmoothMap::new(space.clone(), Space::line(), ScaledSquareNorm(c));
    gradient_system(
        space,
        objective,
        move |_| DMatrix::identity(dim, dim) * k,
        flow,
    )
}

struct OscillatorEnergy {
    m: f64,
    k: f64,
}

impl Program for OscillatorEnergy {
    fn apply<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, ScalarError> {
        Ok(vec![
            x[1].abs2() * (0.5 / self.m) + x[0].abs2() * (0.5 * self.k),
        ])
    }
}

/// `H = p²/(2m) + kq²/2` on `T*ℝ`.
pub fn harmonic_oscillator(m: f64, k: f64) -> Result<ClosedSystem> {
    for (name, v) in [("m", m), ("k", k)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Parameter(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    let space = Space::euclidean(2);
    ClosedSystem::new(
        space.clone(),
        Reaction::canonical_symplectic(&Space::line()),
        SmoothMap::new(space, Space::line(), OscillatorEnergy { m, k }),
    )
}
