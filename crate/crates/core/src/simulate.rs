//! Fixed-step integration of energy-driven systems.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::batch;
use crate::error::{Error, Result};
use crate::openerg::{ClosedSystem, OpenSystem};
use crate::reaction::canonical_layout;
use crate::space::{Point, Space};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Euler,
    Rk4,
    /// Explicit symplectic Euler; needs a block sum of canonical reactions.
    SymplecticEuler,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Euler => "euler",
            Method::Rk4 => "rk4",
            Method::SymplecticEuler => "symplectic",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Method::Euler),
            "rk4" => Ok(Method::Rk4),
            "symplectic" | "symplectic_euler" => Ok(Method::SymplecticEuler),
            other => Err(Error::Config(format!(
                "unknown method `{other}` (expected euler, rk4 or symplectic)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub dt: f64,
    pub steps: usize,
}

impl IntegratorConfig {
    pub fn new(method: Method, dt: f64, steps: usize) -> Result<Self> {
        let cfg = IntegratorConfig { method, dt, steps };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be positive".into()));
        }
        Ok(())
    }
}

/// Sampled solution: `steps + 1` times, states and energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Point>,
    pub energies: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<&Point> {
        self.states.last()
    }
}

/// `max_i |E_i − E_0|`.
pub fn energy_drift(tr: &Trajectory) -> f64 {
    let Some(&e0) = tr.energies.first() else {
        return 0.0;
    };
    tr.energies.iter().fold(0.0, |m, e| m.max((e - e0).abs()))
}

/// Solves `ẋ = R(x) · dE(x)` from `x0`.
pub fn integrate(sys: &ClosedSystem, x0: &Point, cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let pairs = match cfg.method {
        Method::SymplecticEuler => Some(canonical_layout(sys.reaction()).ok_or_else(|| {
            Error::Config(
                "symplectic integration needs a block sum of canonical symplectic reactions".into(),
            )
        })?),
        _ => None,
    };
    run(
        sys.state(),
        x0,
        cfg,
        |_, x| sys.velocity(x),
        |_, x| sys.energy_at(x),
        pairs,
    )
}

/// Integrates an open system under time-varying parameters `a(t)` and
/// output covectors `α_B(t)` (raw components over `w(a, x)`).
pub fn integrate_open<A, B>(
    sys: &OpenSystem,
    a: A,
    alpha_b: B,
    x0: &Point,
    cfg: &IntegratorConfig,
) -> Result<Trajectory>
where
    A: Fn(f64) -> Point,
    B: Fn(f64) -> Vec<f64>,
{
    cfg.validate()?;
    if cfg.method == Method::SymplecticEuler {
        return Err(Error::Config(
            "symplectic integration is not available for time-dependent inputs".into(),
        ));
    }
    run(
        sys.state(),
        x0,
        cfg,
        |t, x| sys.velocity(a(t).coords(), &alpha_b(t), x),
        |t, x| {
            let mut ax = a(t).into_coords();
            ax.extend_from_slice(x);
            Ok(sys.energy().eval_raw(&ax)?[0])
        },
        None,
    )
}

/// Integrates from each initial state; runs on the rayon pool when the
/// `parallel` feature is on.
pub fn integrate_batch(
    sys: &ClosedSystem,
    x0s: &[Point],
    cfg: &IntegratorConfig,
) -> Vec<Result<Trajectory>> {
    batch::map(x0s, |x0| integrate(sys, x0, cfg))
}

pub fn integrate_batch_sequential(
    sys: &ClosedSystem,
    x0s: &[Point],
    cfg: &IntegratorConfig,
) -> Vec<Result<Trajectory>> {
    batch::map_sequential(x0s, |x0| integrate(sys, x0, cfg))
}

fn at_step(step: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite { .. } if step > 0 => Error::Divergence { step },
        e => Error::AtStep {
            step,
            source: Box::new(e),
        },
    }
}

fn run<F, E>(
    space: &Space,
    x0: &Point,
    cfg: &IntegratorConfig,
    field: F,
    energy: E,
    canonical: Option<&[(usize, usize)]>,
) -> Result<Trajectory>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
    E: Fn(f64, &[f64]) -> Result<f64>,
{
    let mut x = space.normalize(x0.coords())?.into_coords();
    let dt = cfg.dt;
    let mut tr = Trajectory {
        times: Vec::with_capacity(cfg.steps + 1),
        states: Vec::with_capacity(cfg.steps + 1),
        energies: Vec::with_capacity(cfg.steps + 1),
    };
    tr.times.push(0.0);
    tr.energies.push(energy(0.0, &x).map_err(at_step(0))?);
    tr.states.push(Point::from_raw(x.clone()));

    for step in 1..=cfg.steps {
        let t = (step - 1) as f64 * dt;
        let stepped = || -> Result<Vec<f64>> {
            Ok(match (cfg.method, canonical) {
                (Method::Euler, _) => {
                    let k = field(t, &x)?;
                    axpy(&x, dt, &k)
                }
                (Method::Rk4, _) => {
                    let k1 = field(t, &x)?;
                    let k2 = field(t + dt / 2.0, &axpy(&x, dt / 2.0, &k1))?;
                    let k3 = field(t + dt / 2.0, &axpy(&x, dt / 2.0, &k2))?;
                    let k4 = field(t + dt, &axpy(&x, dt, &k3))?;
                    x.iter()
                        .enumerate()
                        .map(|(i, xi)| xi + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                        .collect()
                }
                (Method::SymplecticEuler, Some(pairs)) => {
                    // positions advance with ∂E/∂p at (q_n, p_n); momenta with −∂E/∂q at (q_{n+1}, p_n)
                    let v = field(t, &x)?;
                    let mut mid = x.clone();
                    for &(q, _) in pairs {
                        mid[q] += dt * v[q];
                    }
                    let w = field(t, &mid)?;
                    for &(_, p) in pairs {
                        mid[p] += dt * w[p];
                    }
                    mid
                }
                (Method::SymplecticEuler, None) => unreachable!("checked by the caller"),
            })
        };
        let next = stepped().map_err(at_step(step))?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step });
        }
        x = space.wrap(next);
        let t_next = step as f64 * dt;
        tr.energies.push(energy(t_next, &x).map_err(at_step(step))?);
        tr.times.push(t_next);
        tr.states.push(Point::from_raw(x.clone()));
    }
    Ok(tr)
}

fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| xi + a * yi).collect()
}
