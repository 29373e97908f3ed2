//! Lenses over trivialized bundles and the semantics of open systems.
//!
//! A bundle `base × ℝᵏ` is a [`LensInterface`]. A [`Lens`] runs a smooth
//! map forward on bases and a fiberwise-linear map backward on fibers.
//! [`semantics`] sends an open system to an [`OpenOdeMorphism`]: the
//! reaction decorates the state as an ODE lens `⟨TX, X⟩ → ⟨T*X, X⟩`, and
//! the wiring lens runs `w` forward and `T*w + dE` backward. [`OpenOdeMorphism::collapse`]
//! folds the ODE into the wiring, so the state slot of its backward output
//! is the state velocity.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::maps::SmoothMap;
use crate::openerg::{interleave, OpenSystem};
use crate::reaction::Reaction;
use crate::space::Space;

/// A trivial bundle `base × ℝ^fiber_dim`. Tangent and cotangent bundles
/// over `X` both have `fiber_dim = dim(X)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LensInterface {
    pub base: Space,
    pub fiber_dim: usize,
}

impl LensInterface {
    pub fn new(base: Space, fiber_dim: usize) -> Self {
        LensInterface { base, fiber_dim }
    }

    /// `⟨T*X, X⟩`.
    pub fn cotangent(base: Space) -> Self {
        let n = base.dim();
        LensInterface::new(base, n)
    }

    /// `⟨TX, X⟩`.
    pub fn tangent(base: Space) -> Self {
        LensInterface::cotangent(base)
    }

    /// Fibrewise product.
    pub fn tensor(&self, other: &LensInterface) -> Self {
        LensInterface::new(
            self.base.product(&other.base),
            self.fiber_dim + other.fiber_dim,
        )
    }
}

impl fmt::Display for LensInterface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨ℝ^{} over {}⟩", self.fiber_dim, self.base)
    }
}

type Backward = Arc<dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync>;

#[derive(Clone)]
pub struct Lens {
    dom: LensInterface,
    cod: LensInterface,
    forward: SmoothMap,
    backward: Backward,
}

impl fmt::Debug for Lens {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Lens({} ⇄ {})", self.dom, self.cod)
    }
}

impl Lens {
    /// `backward(x, β)` takes a base point of `dom` and a fiber vector over
    /// `forward(x)`, and must be linear in `β`.
    pub fn new<B>(
        dom: LensInterface,
        cod: LensInterface,
        forward: SmoothMap,
        backward: B,
    ) -> Result<Self>
    where
        B: Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        if forward.dom() != &dom.base {
            return Err(Error::space_mismatch(&dom.base, forward.dom()));
        }
        if forward.cod() != &cod.base {
            return Err(Error::space_mismatch(&cod.base, forward.cod()));
        }
        Ok(Lens {
            dom,
            cod,
            forward,
            backward: Arc::new(backward),
        })
    }

    pub fn identity(iface: LensInterface) -> Self {
        Lens {
            forward: SmoothMap::identity(iface.base.clone()),
            dom: iface.clone(),
            cod: iface,
            backward: Arc::new(|_, beta| Ok(beta.to_vec())),
        }
    }

    /// The cotangent lens `⟨T*f, f⟩ : ⟨T*A, A⟩ → ⟨T*B, B⟩`.
    pub fn cotangent(f: &SmoothMap) -> Self {
        let g = f.clone();
        Lens {
            dom: LensInterface::cotangent(f.dom().clone()),
            cod: LensInterface::cotangent(f.cod().clone()),
            forward: f.clone(),
            backward: Arc::new(move |x, beta| g.pullback_components(x, beta)),
        }
    }

    pub fn dom(&self) -> &LensInterface {
        &self.dom
    }
    pub fn cod(&self) -> &LensInterface {
        &self.cod
    }
    pub fn forward_map(&self) -> &SmoothMap {
        &self.forward
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward.eval_raw(x)
    }

    pub fn backward(&self, x: &[f64], beta: &[f64]) -> Result<Vec<f64>> {
        self.dom.base.check_dim(x.len())?;
        if beta.len() != self.cod.fiber_dim {
            return Err(Error::Dimension {
                expected: self.cod.fiber_dim,
                got: beta.len(),
            });
        }
        let out = (self.backward)(x, beta)?;
        if out.len() != self.dom.fiber_dim {
            return Err(Error::Dimension {
                expected: self.dom.fiber_dim,
                got: out.len(),
            });
        }
        Ok(out)
    }

    /// `self ⨟ next`: forward maps compose, backward maps run in reverse.
    pub fn compose(&self, next: &Lens) -> Result<Lens> {
        if self.cod != next.dom {
            return Err(Error::Fiber(format!(
                "cannot compose lens into {} with lens from {}",
                self.cod, next.dom
            )));
        }
        let (first, second) = (self.clone(), next.clone());
        Ok(Lens {
            dom: self.dom.clone(),
            cod: next.cod.clone(),
            forward: self.forward.compose(&next.forward)?,
            backward: Arc::new(move |x, gamma| {
                let y = first.forward(x)?;
                first.backward(x, &second.backward(&y, gamma)?)
            }),
        })
    }

    /// Componentwise product of lenses.
    pub fn tensor(&self, other: &Lens) -> Lens {
        let (l, r) = (self.clone(), other.clone());
        Lens {
            dom: self.dom.tensor(&other.dom),
            cod: self.cod.tensor(&other.cod),
            forward: SmoothMap::product(&self.forward, &other.forward),
            backward: Arc::new(move |x, gamma| {
                let (x1, x2) = x.split_at(l.dom.base.dim());
                let (g1, g2) = gamma.split_at(l.cod.fiber_dim);
                let mut out = l.backward(x1, g1)?;
                out.extend(r.backward(x2, g2)?);
                Ok(out)
            }),
        }
    }
}

/// The reaction as an ODE lens `⟨TX, X⟩ → ⟨T*X, X⟩` with identity forward.
pub fn ode_lens(reaction: &Reaction) -> Lens {
    let r = reaction.clone();
    let x = reaction.space().clone();
    Lens {
        dom: LensInterface::tangent(x.clone()),
        cod: LensInterface::cotangent(x.clone()),
        forward: SmoothMap::identity(x),
        backward: Arc::new(move |x, alpha| r.apply(x, alpha)),
    }
}

/// An open ODE: a parametric lens whose parameter carries an ODE.
#[derive(Debug, Clone)]
pub struct OpenOdeMorphism {
    pub dom: LensInterface,
    pub cod: LensInterface,
    /// `⟨T*X, X⟩`.
    pub param: LensInterface,
    /// `⟨TX, X⟩ → ⟨T*X, X⟩`.
    pub ode: Lens,
    /// `dom ⊗ param → cod`.
    pub wiring: Lens,
}

/// The cotangent semantics of an open energy-driven system.
pub fn semantics(sys: &OpenSystem) -> OpenOdeMorphism {
    let dom = LensInterface::cotangent(sys.dom().clone());
    let param = LensInterface::cotangent(sys.state().clone());
    let s = sys.clone();
    let wiring = Lens {
        dom: dom.tensor(&param),
        cod: LensInterface::cotangent(sys.cod().clone()),
        forward: sys.output().clone(),
        backward: Arc::new(move |ax, beta| s.backward_components(ax, beta)),
    };
    OpenOdeMorphism {
        cod: wiring.cod.clone(),
        dom,
        param,
        ode: ode_lens(sys.reaction()),
        wiring,
    }
}

impl OpenOdeMorphism {
    /// Sequential composition: parameters sit side by side.
    pub fn compose(&self, next: &OpenOdeMorphism) -> Result<OpenOdeMorphism> {
        if self.cod != next.dom {
            return Err(Error::Fiber(format!(
                "cannot compose open ODE into {} with one from {}",
                self.cod, next.dom
            )));
        }
        let wiring = self
            .wiring
            .tensor(&Lens::identity(next.param.clone()))
            .compose(&next.wiring)?;
        Ok(OpenOdeMorphism {
            dom: self.dom.clone(),
            cod: next.cod.clone(),
            param: self.param.tensor(&next.param),
            ode: self.ode.tensor(&next.ode),
            wiring,
        })
    }

    pub fn tensor(&self, other: &OpenOdeMorphism) -> Result<OpenOdeMorphism> {
        let shuffle = interleave(
            &self.dom.base,
            &other.dom.base,
            &self.param.base,
            &other.param.base,
        )?;
        let wiring = Lens::cotangent(&shuffle).compose(&self.wiring.tensor(&other.wiring))?;
        Ok(OpenOdeMorphism {
            dom: self.dom.tensor(&other.dom),
            cod: self.cod.tensor(&other.cod),
            param: self.param.tensor(&other.param),
            ode: self.ode.tensor(&other.ode),
            wiring,
        })
    }

    /// Folds the ODE into the wiring: a lens `dom ⊗ ⟨TX, X⟩ → cod` whose
    /// backward output in the state slot is the state velocity.
    pub fn collapse(&self) -> Result<Lens> {
        Lens::identity(self.dom.clone())
            .tensor(&self.ode)
            .compose(&self.wiring)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth_map;
    use crate::space::Factor::{Circle, Line};
    use nalgebra::dmatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bob() -> SmoothMap {
        smooth_map!(Space::new(vec![Circle, Line]) => Space::euclidean(2), |x: [S]| {
            Ok(vec![x[0].cos() * x[1], x[0].sin() * x[1]])
        })
    }

    fn squash() -> SmoothMap {
        smooth_map!(Space::euclidean(2) => Space::line(), |x: [S]| Ok(vec![(x[0] * x[1]).sin() + x[0].exp()]))
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol * (1.0 + y.abs()), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn identity_lens_is_a_unit() {
        let l = Lens::cotangent(&bob());
        let left = Lens::identity(l.dom().clone()).compose(&l).unwrap();
        let right = l.compose(&Lens::identity(l.cod().clone())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x = l.dom().base.sample(&mut rng, 2.0);
            let beta = random_vec(&mut rng, 2);
            let expected = l.backward(x.coords(), &beta).unwrap();
            assert_eq!(left.backward(x.coords(), &beta).unwrap(), expected);
            assert_eq!(right.backward(x.coords(), &beta).unwrap(), expected);
            assert_eq!(
                left.forward(x.coords()).unwrap(),
                l.forward(x.coords()).unwrap()
            );
        }
    }

    #[test]
    fn linear_lenses_compose_by_reversed_transposes() {
        let a = dmatrix![1.0, 2.0; 3.0, -1.0];
        let b = dmatrix![0.5, 0.0; 1.0, 4.0];
        let fa = SmoothMap::linear(Space::euclidean(2), Space::euclidean(2), a.clone()).unwrap();
        let fb = SmoothMap::linear(Space::euclidean(2), Space::euclidean(2), b.clone()).unwrap();
        let l = Lens::cotangent(&fa).compose(&Lens::cotangent(&fb)).unwrap();
        let gamma = [1.0, -2.0];
        let expected = a.transpose() * b.transpose() * nalgebra::DVector::from_row_slice(&gamma);
        assert_close(
            &l.backward(&[0.3, 0.1], &gamma).unwrap(),
            expected.as_slice(),
            1e-15,
        );
        // linear f: backward is the constant transpose
        let b1 = Lens::cotangent(&fa).backward(&[5.0, 5.0], &gamma).unwrap();
        let b2 = Lens::cotangent(&fa).backward(&[-1.0, 0.0], &gamma).unwrap();
        assert_eq!(b1, b2);
    }

    #[test]
    fn cotangent_of_identity_is_identity() {
        let s = Space::new(vec![Circle, Line]);
        let l = Lens::cotangent(&SmoothMap::identity(s.clone()));
        assert_eq!(
            l.backward(&[1.0, 2.0], &[3.0, 4.0]).unwrap(),
            vec![3.0, 4.0]
        );
        assert_eq!(l.dom(), &LensInterface::cotangent(s));
    }

    #[test]
    fn cotangent_is_functorial() {
        let f = bob();
        let g = squash();
        let direct = Lens::cotangent(&f.compose(&g).unwrap());
        let staged = Lens::cotangent(&f).compose(&Lens::cotangent(&g)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x = f.dom().sample(&mut rng, 2.0);
            let beta = random_vec(&mut rng, 1);
            assert_close(
                &direct.backward(x.coords(), &beta).unwrap(),
                &staged.backward(x.coords(), &beta).unwrap(),
                1e-12,
            );
        }
    }

    #[test]
    fn lens_composition_is_associative() {
        let h = smooth_map!(Space::line() => Space::euclidean(2), |x: [S]| Ok(vec![x[0].abs2(), x[0].cos()]));
        let (f, g, k) = (
            Lens::cotangent(&bob()),
            Lens::cotangent(&squash()),
            Lens::cotangent(&h),
        );
        let left = f.compose(&g).unwrap().compose(&k).unwrap();
        let right = f.compose(&g.compose(&k).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = f.dom().base.sample(&mut rng, 2.0);
            let beta = random_vec(&mut rng, 2);
            assert_close(
                &left.backward(x.coords(), &beta).unwrap(),
                &right.backward(x.coords(), &beta).unwrap(),
                1e-12,
            );
            assert_eq!(
                left.forward(x.coords()).unwrap(),
                right.forward(x.coords()).unwrap()
            );
        }
    }

    #[test]
    fn interface_mismatch_is_rejected() {
        let err = Lens::cotangent(&bob())
            .compose(&Lens::cotangent(&bob()))
            .unwrap_err();
        assert!(matches!(err, Error::Fiber(_)));
        let err = Lens::new(
            LensInterface::cotangent(Space::line()),
            LensInterface::cotangent(Space::line()),
            squash(),
            |_, b| Ok(b.to_vec()),
        )
        .unwrap_err();
        assert!(matches!(err, Error::SpaceMismatch { .. }));
        assert!(matches!(
            Lens::cotangent(&bob()).backward(&[0.0, 1.0], &[1.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn tensor_acts_componentwise() {
        let t = Lens::cotangent(&bob()).tensor(&Lens::cotangent(&squash()));
        assert_eq!(t.dom().base.factors(), &[Circle, Line, Line, Line]);
        let x = [0.4, 1.5, 0.2, -0.3];
        let beta = [1.0, 2.0, 3.0];
        let out = t.backward(&x, &beta).unwrap();
        let first = Lens::cotangent(&bob())
            .backward(&x[..2], &beta[..2])
            .unwrap();
        let second = Lens::cotangent(&squash())
            .backward(&x[2..], &beta[2..])
            .unwrap();
        assert_eq!(out, [first, second].concat());
    }

    #[test]
    fn ode_lens_carries_the_reaction() {
        let j = Reaction::canonical_symplectic(&Space::circle());
        let ode = ode_lens(&j);
        assert_eq!(ode.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(
            ode.backward(&[1.0, 2.0], &[3.0, 4.0]).unwrap(),
            vec![4.0, -3.0]
        );
    }

    proptest! {
        #[test]
        fn backward_is_linear(
            x in prop::array::uniform2(-2.0..2.0f64),
            b1 in prop::array::uniform2(-2.0..2.0f64),
            b2 in prop::array::uniform2(-2.0..2.0f64),
            s in -3.0..3.0f64,
            t in -3.0..3.0f64,
        ) {
            let l = Lens::cotangent(&bob()).compose(&Lens::cotangent(&squash())).unwrap();
            let l = Lens::cotangent(&bob()).tensor(&l);
            let xx = [x[0], x[1], x[0] + 0.5, x[1] - 0.25];
            let bb1 = [b1[0], b1[1], b2[0]];
            let bb2 = [b2[1], b1[0] * 0.5, -b2[0]];
            let mixed: Vec<f64> = bb1.iter().zip(&bb2).map(|(p, q)| s * p + t * q).collect();
            let lhs = l.backward(&xx, &mixed).unwrap();
            let r1 = l.backward(&xx, &bb1).unwrap();
            let r2 = l.backward(&xx, &bb2).unwrap();
            for i in 0..lhs.len() {
                let rhs = s * r1[i] + t * r2[i];
                prop_assert!((lhs[i] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            }
        }
    }
}
