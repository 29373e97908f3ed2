//! Compositional simulation of open energy-driven systems.
//!
//! Systems are built from a state space, a reaction turning covectors into
//! velocities, an energy and an output map; they compose in sequence and in
//! parallel, and compile to ODE vector fields `ẋ = R(x) · (T*w(β) + dE)`
//! through cotangent lenses.
//!
//! Module map:
//! - [`scalar`]: dual numbers and the generic differentiable scalar
//! - [`space`]: products of lines and circles, points and fibers
//! - [`maps`]: smooth maps with Jacobians, pullbacks and pushforwards
//! - [`reaction`]: reactions as matrix fields
//! - [`openerg`]: open systems, composition and closure
//! - [`lens`]: lenses, the cotangent functor, semantics and collapse
//! - [`simulate`]: fixed-step integrators and trajectories
//! - [`stdlib`]: pendulum, anchor, discard, chains and gradient systems
//! - [`descriptor`]: the wiring-descriptor language and the run driver

pub mod batch;
pub mod descriptor;
pub mod error;
pub mod lens;
pub mod maps;
pub mod openerg;
pub mod reaction;
pub mod scalar;
pub mod simulate;
pub mod space;
pub mod stdlib;

pub use error::{Error, Result};
pub use maps::SmoothMap;
pub use openerg::{ClosedSystem, OpenSystem};
pub use reaction::{Flow, Reaction};
pub use space::{Covector, Factor, Point, Space, Tangent};
