//! Smooth maps between spaces.
//!
//! A map body is a program over the generic [`Scalar`], so the same
//! definition yields values (on `f64`) and exact directional derivatives
//! (on [`Dual`]). Jacobians are assembled one forward pass per input
//! dimension.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{derivative, Dual, Scalar, ScalarError};
use crate::space::{Covector, Factor, Point, Space, Tangent};

/// Object-safe form of a map body, instantiated at both scalar types.
pub trait Body: Send + Sync {
    fn eval_real(&self, x: &[f64]) -> Result<Vec<f64>, ScalarError>;
    fn eval_dual(&self, x: &[Dual]) -> Result<Vec<Dual>, ScalarError>;
}

/// A map body written once, generically over the scalar type.
pub trait Program: Send + Sync + 'static {
    fn apply<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, ScalarError>;
}

impl<P: Program> Body for P {
    fn eval_real(&self, x: &[f64]) -> Result<Vec<f64>, ScalarError> {
        self.apply(x)
    }
    fn eval_dual(&self, x: &[Dual]) -> Result<Vec<Dual>, ScalarError> {
        self.apply(x)
    }
}

/// Two monomorphic copies of the same closure; built by [`smooth_map!`].
#[doc(hidden)]
pub struct FnPair<F, G> {
    real: F,
    dual: G,
}

impl<F, G> Body for FnPair<F, G>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, ScalarError> + Send + Sync,
    G: Fn(&[Dual]) -> Result<Vec<Dual>, ScalarError> + Send + Sync,
{
    fn eval_real(&self, x: &[f64]) -> Result<Vec<f64>, ScalarError> {
        (self.real)(x)
    }
    fn eval_dual(&self, x: &[Dual]) -> Result<Vec<Dual>, ScalarError> {
        (self.dual)(x)
    }
}

/// Builds a [`SmoothMap`] from a closure body written against a scalar
/// type name of the caller's choosing:
///
/// ```
/// use openerg::{smooth_map, space::Space, scalar::Scalar};
/// let f = smooth_map!(Space::euclidean(2) => Space::line(), |x: [S]| {
///     Ok(vec![x[0].sin() * x[1] + S::cst(1.0)])
/// });
/// assert_eq!(f.eval_raw(&[0.0, 3.0]).unwrap(), vec![1.0]);
/// ```
///
/// Captured variables must be `Copy`: the body is instantiated twice.
#[macro_export]
macro_rules! smooth_map {
    ($dom:expr => $cod:expr, |$x:ident : [$s:ident]| $body:expr) => {
        $crate::maps::SmoothMap::from_fns(
            $dom,
            $cod,
            move |$x: &[f64]| -> ::std::result::Result<Vec<f64>, $crate::scalar::ScalarError> {
                #[allow(unused_imports)]
                use $crate::scalar::Scalar as _;
                #[allow(dead_code)]
                type $s = f64;
                $body
            },
            move |$x: &[$crate::scalar::Dual]| -> ::std::result::Result<
                Vec<$crate::scalar::Dual>,
                $crate::scalar::ScalarError,
            > {
                #[allow(unused_imports)]
                use $crate::scalar::Scalar as _;
                #[allow(dead_code)]
                type $s = $crate::scalar::Dual;
                $body
            },
        )
    };
}

#[derive(Clone)]
pub struct SmoothMap {
    dom: Space,
    cod: Space,
    body: Arc<dyn Body>,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmoothMap({} → {})", self.dom, self.cod)
    }
}

impl SmoothMap {
    pub fn new<P: Program>(dom: Space, cod: Space, program: P) -> Self {
        SmoothMap {
            dom,
            cod,
            body: Arc::new(program),
        }
    }

    #[doc(hidden)]
    pub fn from_fns<F, G>(dom: Space, cod: Space, real: F, dual: G) -> Self
    where
        F: Fn(&[f64]) -> Result<Vec<f64>, ScalarError> + Send + Sync + 'static,
        G: Fn(&[Dual]) -> Result<Vec<Dual>, ScalarError> + Send + Sync + 'static,
    {
        SmoothMap {
            dom,
            cod,
            body: Arc::new(FnPair { real, dual }),
        }
    }

    pub fn dom(&self) -> &Space {
        &self.dom
    }

    pub fn cod(&self) -> &Space {
        &self.cod
    }

    /// Runs the body on raw coordinates at either scalar type.
    pub fn apply<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, ScalarError> {
        if x.len() != self.dom.dim() {
            return Err(ScalarError::Length {
                expected: self.dom.dim(),
                got: x.len(),
            });
        }
        let y = S::run(self.body.as_ref(), x)?;
        if y.len() != self.cod.dim() {
            return Err(ScalarError::Length {
                expected: self.cod.dim(),
                got: y.len(),
            });
        }
        Ok(y)
    }

    /// Evaluates without normalizing the result.
    pub fn eval_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.dom.check_dim(x.len())?;
        let y = self.apply(x)?;
        if let Some(coord) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { coord });
        }
        Ok(y)
    }

    pub fn eval(&self, x: &Point) -> Result<Point> {
        let y = self.eval_raw(x.coords())?;
        Ok(Point::from_raw(self.cod.wrap(y)))
    }

    /// `J_f(x) · v` along one direction.
    pub fn directional(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.dom.check_dim(x.len())?;
        Ok(derivative(|d| self.apply(d), x, v)?)
    }

    /// The Jacobian restricted to the input columns in `cols`.
    pub fn jacobian_columns(&self, x: &[f64], cols: Range<usize>) -> Result<DMatrix<f64>> {
        self.dom.check_dim(x.len())?;
        let n = self.dom.dim();
        let m = self.cod.dim();
        let mut jac = DMatrix::zeros(m, cols.len());
        let mut seed = vec![0.0; n];
        for (k, j) in cols.enumerate() {
            seed[j] = 1.0;
            let col = derivative(|d| self.apply(d), x, &seed)?;
            seed[j] = 0.0;
            for (i, v) in col.into_iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { coord: i });
                }
                jac[(i, k)] = v;
            }
        }
        Ok(jac)
    }

    pub fn jacobian(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.jacobian_columns(x.coords(), 0..self.dom.dim())
    }

    /// `Jᵀ(x) · β` on raw fiber components, without base-point checks.
    pub fn pullback_components(&self, x: &[f64], beta: &[f64]) -> Result<Vec<f64>> {
        self.cod.check_dim(beta.len())?;
        let jac = self.jacobian_columns(x, 0..self.dom.dim())?;
        Ok(transpose_apply(&jac, beta))
    }

    pub fn pullback(&self, x: &Point, beta: &Covector) -> Result<Covector> {
        let fx = self.eval(x)?;
        if !self
            .cod
            .approx_eq(beta.base.coords(), fx.coords(), BASE_TOL)
        {
            return Err(Error::Fiber(format!(
                "covector based at {:?}, expected f(x) = {:?}",
                beta.base.coords(),
                fx.coords()
            )));
        }
        let components = self.pullback_components(x.coords(), &beta.components)?;
        Covector::new(x.clone(), components)
    }

    pub fn pushforward(&self, x: &Point, v: &Tangent) -> Result<Tangent> {
        if !self.dom.approx_eq(v.base.coords(), x.coords(), BASE_TOL) {
            return Err(Error::Fiber(format!(
                "tangent vector based at {:?}, expected {:?}",
                v.base.coords(),
                x.coords()
            )));
        }
        self.dom.check_dim(v.components.len())?;
        let components = self.directional(x.coords(), &v.components)?;
        Tangent::new(self.eval(x)?, components)
    }

    /// `dE(x)` for a real-valued map.
    pub fn differential(&self, x: &Point) -> Result<Covector> {
        let components = self.differential_components(x.coords())?;
        Covector::new(x.clone(), components)
    }

    pub fn differential_components(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.require_scalar_valued()?;
        let jac = self.jacobian_columns(x, 0..self.dom.dim())?;
        Ok(jac.row(0).iter().copied().collect())
    }

    fn require_scalar_valued(&self) -> Result<()> {
        if self.cod != Space::line() {
            return Err(Error::Shape(format!(
                "differential needs a map into ℝ, codomain is {}",
                self.cod
            )));
        }
        Ok(())
    }

    /// Checks on random samples that shifting any circle coordinate by 2π
    /// leaves the output unchanged (mod 2π on circle outputs).
    pub fn is_well_defined(&self, samples: usize, seed: u64, tol: f64) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let circles: Vec<usize> = (0..self.dom.dim())
            .filter(|&i| self.dom.factors()[i] == Factor::Circle)
            .collect();
        (0..samples).all(|_| {
            let x = self.dom.sample(&mut rng, 2.0);
            let Ok(y) = self.eval_raw(x.coords()) else {
                return true;
            };
            circles.iter().all(|&i| {
                let mut shifted = x.coords().to_vec();
                shifted[i] += std::f64::consts::TAU;
                match self.eval_raw(&shifted) {
                    Ok(ys) => self.cod.approx_eq(&y, &ys, tol * (1.0 + norm_inf(&y))),
                    Err(_) => false,
                }
            })
        })
    }

    // ---- combinators ----

    pub fn identity(space: Space) -> Self {
        SmoothMap::new(space.clone(), space, Identity)
    }

    /// Projection onto the coordinates in `range`.
    pub fn projection(dom: Space, range: Range<usize>) -> Self {
        let cod = dom.slice(range.clone());
        SmoothMap::new(dom, cod, Select(range.collect()))
    }

    /// `out[i] = in[perm[i]]`; `perm` must be a permutation of `0..dim`.
    pub fn permutation(dom: Space, perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; dom.dim()];
        if perm.len() != dom.dim()
            || perm
                .iter()
                .any(|&p| p >= dom.dim() || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::Parameter(format!(
                "{perm:?} is not a permutation of {} coordinates",
                dom.dim()
            )));
        }
        let cod = Space::new(perm.iter().map(|&p| dom.factors()[p]).collect());
        Ok(SmoothMap::new(dom, cod, Select(perm)))
    }

    pub fn constant(dom: Space, cod: Space, value: Vec<f64>) -> Result<Self> {
        cod.check_dim(value.len())?;
        Ok(SmoothMap::new(dom, cod, Constant(value)))
    }

    /// The map `x ↦ M x`; `matrix` is `dim(cod) × dim(dom)`.
    pub fn linear(dom: Space, cod: Space, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != cod.dim() || matrix.ncols() != dom.dim() {
            return Err(Error::Shape(format!(
                "{}×{} matrix for a map {} → {}",
                matrix.nrows(),
                matrix.ncols(),
                dom,
                cod
            )));
        }
        Ok(SmoothMap::new(dom, cod, Linear(matrix)))
    }

    pub fn zero_energy(dom: Space) -> Self {
        SmoothMap::new(dom, Space::line(), Constant(vec![0.0]))
    }

    /// `self ⨟ next`: first `self`, then `next`.
    pub fn compose(&self, next: &SmoothMap) -> Result<Self> {
        if self.cod != next.dom {
            return Err(Error::space_mismatch(&next.dom, &self.cod));
        }
        Ok(SmoothMap::new(
            self.dom.clone(),
            next.cod.clone(),
            Compose(self.clone(), next.clone()),
        ))
    }

    /// `⟨f, g⟩ : X → Y × Z`.
    pub fn pair(f: &SmoothMap, g: &SmoothMap) -> Result<Self> {
        if f.dom != g.dom {
            return Err(Error::space_mismatch(&f.dom, &g.dom));
        }
        Ok(SmoothMap::new(
            f.dom.clone(),
            f.cod.product(&g.cod),
            Pair(f.clone(), g.clone()),
        ))
    }

    /// `f × g : X × X' → Y × Y'`.
    pub fn product(f: &SmoothMap, g: &SmoothMap) -> Self {
        SmoothMap::new(
            f.dom.product(&g.dom),
            f.cod.product(&g.cod),
            Product(f.clone(), g.clone()),
        )
    }

    /// Pointwise sum of two real-valued maps on the same domain.
    pub fn sum(f: &SmoothMap, g: &SmoothMap) -> Result<Self> {
        f.require_scalar_valued()?;
        g.require_scalar_valued()?;
        if f.dom != g.dom {
            return Err(Error::space_mismatch(&f.dom, &g.dom));
        }
        Ok(SmoothMap::new(
            f.dom.clone(),
            Space::line(),
            Sum(f.clone(), g.clone()),
        ))
    }
}

pub(crate) const BASE_TOL: f64 = 1e-9;

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `Mᵀ β`, summing in row order.
pub(crate) fn transpose_apply(m: &DMatrix<f64>, beta: &[f64]) -> Vec<f64> {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).fold(0.0, |acc, i| acc + m[(i, j)] * beta[i]))
        .collect()
}

struct Identity;

impl Program for Identity {
    fn apply<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, ScalarError> {
        Ok(x.to_vec())
    }
}

struct Select(Vec<usize>);

impl Program for Select {
    fn apply<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, ScalarError> {
        Ok(self.0.iter().map(|&i| x[i]).collect())
    }
}

struct Constant(Vec<f64>);

impl Program for Constant {
    fn apply<S: Scalar>(&self, _x: &[S]) -> Result<Vec<S>, ScalarError> {
        Ok(self.0.iter().map(|&v| S::cst(v)).collect())
    }
}

struct Linear(DMatrix<f64>);

impl Program for Linear {
    fn apply<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, ScalarError> {
        Ok((0..self.0.nrows())
            .map(|i| {
                x.iter()
                    .enumerate()
                    .fold(S::cst(0.0), |acc, (j, &xj)| acc + xj * self.0[(i, j)])
            })
            .collect())
    }
}

struct Compose(SmoothMap, SmoothMap);

impl Program for Compose {
    fn apply<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, ScalarError> {
        self.1.apply(&self.0.apply(x)?)
    }
}

struct Pair(SmoothMap, SmoothMap);

impl Program for Pair {
    fn apply<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, ScalarError> {
        let mut y = self.0.apply(x)?;
        y.extend(self.1.apply(x)?);
        Ok(y)
    }
}

struct Product(SmoothMap, SmoothMap);

impl Program for Product {
    fn apply<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, ScalarError> {
        let (a, b) = x.split_at(self.0.dom.dim());
        let mut y = self.0.apply(a)?;
        y.extend(self.1.apply(b)?);
        Ok(y)
    }
}

struct Sum(SmoothMap, SmoothMap);

impl Program for Sum {
    fn apply<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, ScalarError> {
        Ok(vec![self.0.apply(x)?[0] + self.1.apply(x)?[0]])
    }
}
