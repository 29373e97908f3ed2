//! Open energy-driven systems and their algebra.
//!
//! An [`OpenSystem`] `A → B` carries a state space `X`, a reaction on `X`,
//! an output map `w : A × X → B` and an energy `E : A × X → ℝ`. Sequential
//! composition takes the product of states, the block sum of reactions,
//! threads outputs (`w ⨟ w'`) and adds energies (`E + w*E'`). Nested state
//! products are always stored flat, so composition is strictly associative
//! on spaces.

use crate::batch;
use crate::error::{Error, Result};
use crate::maps::{Program, SmoothMap, BASE_TOL};
use crate::reaction::Reaction;
use crate::scalar::{Scalar, ScalarError};
use crate::space::{Covector, Point, Space, Tangent};

#[derive(Debug, Clone)]
pub struct OpenSystem {
    dom: Space,
    cod: Space,
    state: Space,
    reaction: Reaction,
    output: SmoothMap,
    energy: SmoothMap,
    /// `⟨w, E⟩ : A × X → B × ℝ`, evaluated as one pass.
    joint: SmoothMap,
}

impl OpenSystem {
    pub fn new(
        dom: Space,
        cod: Space,
        state: Space,
        reaction: Reaction,
        output: SmoothMap,
        energy: SmoothMap,
    ) -> Result<Self> {
        let total = dom.product(&state);
        if reaction.space() != &state {
            return Err(Error::space_mismatch(&state, reaction.space()));
        }
        for map in [&output, &energy] {
            if map.dom() != &total {
                return Err(Error::space_mismatch(&total, map.dom()));
            }
        }
        if output.cod() != &cod {
            return Err(Error::space_mismatch(&cod, output.cod()));
        }
        if energy.cod() != &Space::line() {
            return Err(Error::space_mismatch(&Space::line(), energy.cod()));
        }
        let joint = SmoothMap::pair(&output, &energy)?;
        Ok(OpenSystem {
            dom,
            cod,
            state,
            reaction,
            output,
            energy,
            joint,
        })
    }

    /// Builds a system from `⟨w, E⟩ : A × X → B × ℝ` given as one map,
    /// the energy in the last coordinate.
    pub fn from_joint(
        dom: Space,
        cod: Space,
        state: Space,
        reaction: Reaction,
        joint: SmoothMap,
    ) -> Result<Self> {
        if reaction.space() != &state {
            return Err(Error::space_mismatch(&state, reaction.space()));
        }
        let total = dom.product(&state);
        if joint.dom() != &total {
            return Err(Error::space_mismatch(&total, joint.dom()));
        }
        let expected = cod.product(&Space::line());
        if joint.cod() != &expected {
            return Err(Error::space_mismatch(&expected, joint.cod()));
        }
        let b = cod.dim();
        let output = joint.compose(&SmoothMap::projection(joint.cod().clone(), 0..b))?;
        let energy = joint.compose(&SmoothMap::projection(joint.cod().clone(), b..b + 1))?;
        Ok(OpenSystem {
            dom,
            cod,
            state,
            reaction,
            output,
            energy,
            joint,
        })
    }

    pub fn dom(&self) -> &Space {
        &self.dom
    }
    pub fn cod(&self) -> &Space {
        &self.cod
    }
    pub fn state(&self) -> &Space {
        &self.state
    }
    pub fn reaction(&self) -> &Reaction {
        &self.reaction
    }
    pub fn output(&self) -> &SmoothMap {
        &self.output
    }
    pub fn energy(&self) -> &SmoothMap {
        &self.energy
    }

    /// Stateless, energy-free pass-through `A → A`.
    pub fn identity(a: Space) -> Self {
        OpenSystem::new(
            a.clone(),
            a.clone(),
            Space::unit(),
            Reaction::empty(),
            SmoothMap::identity(a.clone()),
            SmoothMap::zero_energy(a),
        )
        .expect("identity is well-typed")
    }

    /// `self ⨟ next`.
    pub fn compose(&self, next: &OpenSystem) -> Result<OpenSystem> {
        if self.cod != next.dom {
            return Err(Error::space_mismatch(&next.dom, &self.cod));
        }
        let split = self.dom.dim() + self.state.dim();
        let joint = SmoothMap::new(
            self.dom.product(&self.state).product(&next.state),
            next.cod.product(&Space::line()),
            SerialJoint {
                first: self.joint.clone(),
                second: next.joint.clone(),
                split,
                mid: self.cod.dim(),
            },
        );
        OpenSystem::from_joint(
            self.dom.clone(),
            next.cod.clone(),
            self.state.product(&next.state),
            self.reaction.oplus(&next.reaction),
            joint,
        )
    }

    /// Parallel composition `A₁ × A₂ → B₁ × B₂`.
    pub fn tensor(&self, other: &OpenSystem) -> Result<OpenSystem> {
        let dom = self.dom.product(&other.dom);
        let state = self.state.product(&other.state);
        let cod = self.cod.product(&other.cod);
        let joint = SmoothMap::new(
            dom.product(&state),
            cod.product(&Space::line()),
            ParallelJoint {
                left: self.joint.clone(),
                right: other.joint.clone(),
                a1: self.dom.dim(),
                a2: other.dom.dim(),
                x1: self.state.dim(),
                b1: self.cod.dim(),
            },
        );
        OpenSystem::from_joint(dom, cod, state, self.reaction.oplus(&other.reaction), joint)
    }

    /// Fixes the parameter `a`; the outgoing covector is taken to be zero.
    pub fn close(&self, a: &Point) -> Result<ClosedSystem> {
        self.dom.check_dim(a.dim())?;
        let fix = SmoothMap::pair(
            &SmoothMap::constant(self.state.clone(), self.dom.clone(), a.coords().to_vec())?,
            &SmoothMap::identity(self.state.clone()),
        )?;
        ClosedSystem::new(
            self.state.clone(),
            self.reaction.clone(),
            fix.compose(&self.energy)?,
        )
    }

    /// The backward covector on `A × X`: `T*w(β) + dE` at `(a, x)`.
    pub fn backward_components(&self, ax: &[f64], beta: &[f64]) -> Result<Vec<f64>> {
        let pulled = self.output.pullback_components(ax, beta)?;
        let de = self.energy.differential_components(ax)?;
        Ok(pulled.iter().zip(&de).map(|(p, d)| p + d).collect())
    }

    /// State velocity `R(x) · π_X(T*w(α_B) + dE)` at parameter `a`.
    pub fn vector_field(&self, a: &Point, alpha_b: &Covector, x: &Point) -> Result<Tangent> {
        self.dom.check_dim(a.dim())?;
        self.state.check_dim(x.dim())?;
        let ax = a.concat(x);
        let wx = self.output.eval(&ax)?;
        if !self
            .cod
            .approx_eq(alpha_b.base.coords(), wx.coords(), BASE_TOL)
        {
            return Err(Error::Fiber(format!(
                "output covector based at {:?}, expected w(a, x) = {:?}",
                alpha_b.base.coords(),
                wx.coords()
            )));
        }
        let back = self.backward_components(ax.coords(), &alpha_b.components)?;
        let v = self.reaction.apply(x.coords(), &back[self.dom.dim()..])?;
        Tangent::new(x.clone(), v)
    }

    /// [`Self::vector_field`] with raw inputs and a raw output covector.
    pub fn velocity(&self, a: &[f64], alpha_b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.dom.check_dim(a.len())?;
        self.state.check_dim(x.len())?;
        let mut ax = a.to_vec();
        ax.extend_from_slice(x);
        let back = self.backward_components(&ax, alpha_b)?;
        self.reaction.apply(x, &back[self.dom.dim()..])
    }
}

/// `(A₁ × A₂) × (X₁ × X₂) → (A₁ × X₁) × (A₂ × X₂)`.
pub(crate) fn interleave(a1: &Space, a2: &Space, x1: &Space, x2: &Space) -> Result<SmoothMap> {
    let (n_a1, n_a2, n_x1, n_x2) = (a1.dim(), a2.dim(), x1.dim(), x2.dim());
    let perm: Vec<usize> = (0..n_a1)
        .chain(n_a1 + n_a2..n_a1 + n_a2 + n_x1)
        .chain(n_a1..n_a1 + n_a2)
        .chain(n_a1 + n_a2 + n_x1..n_a1 + n_a2 + n_x1 + n_x2)
        .collect();
    SmoothMap::permutation(a1.product(a2).product(x1).product(x2), perm)
}

/// `(a, x, x') ↦ (w'(w(a, x), x'), E(a, x) + E'(w(a, x), x'))`, running
/// each factor's joint map once.
struct SerialJoint {
    first: SmoothMap,
    second: SmoothMap,
    split: usize,
    mid: usize,
}

impl Program for SerialJoint {
    fn apply<S: Scalar>(&self, z: &[S]) -> Result<Vec<S>, ScalarError> {
        let (ax, x2) = z.split_at(self.split);
        let r1 = self.first.apply(ax)?;
        let mut input = Vec::with_capacity(self.mid + x2.len());
        input.extend_from_slice(&r1[..self.mid]);
        input.extend_from_slice(x2);
        let mut out = self.second.apply(&input)?;
        let downstream = out.pop().expect("joint output ends in the energy");
        out.push(r1[self.mid] + downstream);
        Ok(out)
    }
}

/// `(a₁, a₂, x₁, x₂) ↦ (w₁(a₁, x₁), w₂(a₂, x₂), E₁ + E₂)`.
struct ParallelJoint {
    left: SmoothMap,
    right: SmoothMap,
    a1: usize,
    a2: usize,
    x1: usize,
    b1: usize,
}

impl Program for ParallelJoint {
    fn apply<S: Scalar>(&self, z: &[S]) -> Result<Vec<S>, ScalarError> {
        let (a, x) = z.split_at(self.a1 + self.a2);
        let left: Vec<S> = a[..self.a1].iter().chain(&x[..self.x1]).copied().collect();
        let right: Vec<S> = a[self.a1..].iter().chain(&x[self.x1..]).copied().collect();
        let r1 = self.left.apply(&left)?;
        let r2 = self.right.apply(&right)?;
        let mut out = Vec::with_capacity(r1.len() + r2.len() - 1);
        out.extend_from_slice(&r1[..self.b1]);
        out.extend_from_slice(&r2[..r2.len() - 1]);
        out.push(r1[self.b1] + r2[r2.len() - 1]);
        Ok(out)
    }
}

/// An energy-driven system with no parameters or outputs.
#[derive(Debug, Clone)]
pub struct ClosedSystem {
    state: Space,
    reaction: Reaction,
    energy: SmoothMap,
}

impl ClosedSystem {
    pub fn new(state: Space, reaction: Reaction, energy: SmoothMap) -> Result<Self> {
        if reaction.space() != &state {
            return Err(Error::space_mismatch(&state, reaction.space()));
        }
        if energy.dom() != &state {
            return Err(Error::space_mismatch(&state, energy.dom()));
        }
        if energy.cod() != &Space::line() {
            return Err(Error::space_mismatch(&Space::line(), energy.cod()));
        }
        Ok(ClosedSystem {
            state,
            reaction,
            energy,
        })
    }

    pub fn state(&self) -> &Space {
        &self.state
    }
    pub fn reaction(&self) -> &Reaction {
        &self.reaction
    }
    pub fn energy(&self) -> &SmoothMap {
        &self.energy
    }

    pub fn energy_at(&self, x: &[f64]) -> Result<f64> {
        Ok(self.energy.eval_raw(x)?[0])
    }

    /// `R(x) · dE(x)` on raw coordinates.
    pub fn velocity(&self, x: &[f64]) -> Result<Vec<f64>> {
        let de = self.energy.differential_components(x)?;
        self.reaction.apply(x, &de)
    }

    pub fn vector_field(&self, x: &Point) -> Result<Tangent> {
        Tangent::new(x.clone(), self.velocity(x.coords())?)
    }

    /// Evaluates the vector field at many points; parallel when the
    /// `parallel` feature is on.
    pub fn vector_fields(&self, points: &[Vec<f64>]) -> Vec<Result<Vec<f64>>> {
        batch::map(points, |x| self.velocity(x))
    }

    /// The same system as an open system `ℝ⁰ → ℝ⁰`.
    pub fn into_open(self) -> OpenSystem {
        OpenSystem::new(
            Space::unit(),
            Space::unit(),
            self.state.clone(),
            self.reaction,
            SmoothMap::constant(self.state, Space::unit(), Vec::new())
                .expect("empty output matches ℝ⁰"),
            self.energy,
        )
        .expect("a closed system is an open system ℝ⁰ → ℝ⁰")
    }
}
