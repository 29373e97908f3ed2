//! Reactions `R : T*X → TX` as matrix fields over a space.
//!
//! `R(x)` maps covector components to tangent components in the coordinate
//! basis, `v = R(x) · α`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::maps::{SmoothMap, BASE_TOL};
use crate::space::{Covector, Factor, Space, Tangent};

type MatrixField = Arc<dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync>;

/// Largest accepted condition number of a metric.
pub const MAX_METRIC_CONDITION: f64 = 1e12;

/// Direction of a metric-induced gradient flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Flow {
    Ascent,
    Descent,
}

impl Flow {
    fn sign(self) -> f64 {
        match self {
            Flow::Ascent => 1.0,
            Flow::Descent => -1.0,
        }
    }
}

#[derive(Clone)]
pub struct Reaction {
    space: Space,
    field: MatrixField,
    /// `(position, momentum)` index pairs when the reaction is a block sum
    /// of canonical symplectic reactions.
    canonical: Option<Vec<(usize, usize)>>,
}

impl fmt::Debug for Reaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Reaction")
            .field("space", &self.space)
            .field("canonical", &self.canonical)
            .finish_non_exhaustive()
    }
}

impl Reaction {
    /// An arbitrary matrix field. No structure (antisymmetry, Jacobi
    /// identity, definiteness) is imposed.
    pub fn new<F>(space: Space, field: F) -> Self
    where
        F: Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    {
        Reaction {
            space,
            field: Arc::new(field),
            canonical: None,
        }
    }

    pub fn constant(space: Space, matrix: DMatrix<f64>) -> Result<Self> {
        let n = space.dim();
        if matrix.shape() != (n, n) {
            return Err(Error::Shape(format!(
                "{}×{} reaction matrix on a {n}-dimensional space",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Reaction::new(space, move |_| Ok(matrix.clone())))
    }

    /// The unique reaction on `ℝ⁰`.
    pub fn empty() -> Self {
        Reaction {
            space: Space::unit(),
            field: Arc::new(|_| Ok(DMatrix::zeros(0, 0))),
            canonical: Some(Vec::new()),
        }
    }

    pub fn zero(space: Space) -> Self {
        let n = space.dim();
        Reaction::new(space, move |_| Ok(DMatrix::zeros(n, n)))
    }

    /// `[[0, Iₙ], [−Iₙ, 0]]` on `T*M`, base coordinates first.
    pub fn canonical_symplectic(base: &Space) -> Self {
        let n = base.dim();
        let mut j = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            j[(i, n + i)] = 1.0;
            j[(n + i, i)] = -1.0;
        }
        Reaction {
            space: base.cotangent_space(),
            field: Arc::new(move |_| Ok(j.clone())),
            canonical: Some((0..n).map(|i| (i, n + i)).collect()),
        }
    }

    /// `±g(x)⁻¹` for a Riemannian metric `g`.
    pub fn from_metric<G>(space: Space, metric: G, flow: Flow) -> Self
    where
        G: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        let n = space.dim();
        Reaction::new(space, move |x| {
            let g = metric(x);
            if g.shape() != (n, n) {
                return Err(Error::Metric(format!(
                    "{}×{} metric on a {n}-dimensional space",
                    g.nrows(),
                    g.ncols()
                )));
            }
            let scale = g.amax().max(f64::MIN_POSITIVE);
            if (&g - g.transpose()).amax() > 1e-12 * scale {
                return Err(Error::Metric(format!("metric is not symmetric at {x:?}")));
            }
            if n > 0 {
                let eig = SymmetricEigen::new(g.clone()).eigenvalues;
                let lo = eig.min();
                let hi = eig.max();
                if lo <= 0.0 {
                    return Err(Error::Metric(format!(
                        "metric is not positive-definite at {x:?} (eigenvalue {lo})"
                    )));
                }
                if hi / lo > MAX_METRIC_CONDITION {
                    return Err(Error::Metric(format!(
                        "metric condition number {:e} exceeds {MAX_METRIC_CONDITION:e}",
                        hi / lo
                    )));
                }
            }
            let inv = g
                .lu()
                .try_inverse()
                .ok_or_else(|| Error::Metric(format!("singular metric at {x:?}")))?;
            Ok(inv * flow.sign())
        })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn canonical_pairs(&self) -> Option<&[(usize, usize)]> {
        self.canonical.as_deref()
    }

    pub fn matrix_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.space.check_dim(x.len())?;
        (self.field)(x)
    }

    /// `R(x) · α` on raw components.
    pub fn apply(&self, x: &[f64], alpha: &[f64]) -> Result<Vec<f64>> {
        self.space.check_dim(alpha.len())?;
        let r = self.matrix_at(x)?;
        Ok((0..r.nrows())
            .map(|i| (0..r.ncols()).fold(0.0, |acc, j| acc + r[(i, j)] * alpha[j]))
            .collect())
    }

    pub fn react(&self, alpha: &Covector) -> Result<Tangent> {
        let v = self.apply(alpha.base.coords(), &alpha.components)?;
        Tangent::new(alpha.base.clone(), v)
    }

    /// Block sum on `X₁ × X₂`.
    pub fn oplus(&self, other: &Reaction) -> Reaction {
        let (a, b) = (self.clone(), other.clone());
        let n1 = a.space.dim();
        let canonical = match (&self.canonical, &other.canonical) {
            (Some(p), Some(q)) => Some(
                p.iter()
                    .copied()
                    .chain(q.iter().map(|&(i, j)| (i + n1, j + n1)))
                    .collect(),
            ),
            _ => None,
        };
        Reaction {
            space: self.space.product(&other.space),
            field: Arc::new(move |x| {
                let (x1, x2) = x.split_at(n1);
                let r1 = a.matrix_at(x1)?;
                let r2 = b.matrix_at(x2)?;
                let n = n1 + r2.nrows();
                let mut m = DMatrix::zeros(n, n);
                m.view_mut((0, 0), (n1, n1)).copy_from(&r1);
                m.view_mut((n1, n1), (r2.nrows(), r2.ncols()))
                    .copy_from(&r2);
                Ok(m)
            }),
            canonical,
        }
    }

    /// Moves the reaction along a diffeomorphism `f` with inverse `f_inv`:
    /// `R'(y) = J_f(x) R(x) J_f(x)ᵀ` where `x = f_inv(y)`.
    pub fn transport(&self, f: &SmoothMap, f_inv: &SmoothMap) -> Result<Reaction> {
        if f.dom() != &self.space {
            return Err(Error::space_mismatch(&self.space, f.dom()));
        }
        if f_inv.dom() != f.cod() || f_inv.cod() != f.dom() {
            return Err(Error::Diffeomorphism(format!(
                "inverse has type {} → {}, expected {} → {}",
                f_inv.dom(),
                f_inv.cod(),
                f.cod(),
                f.dom()
            )));
        }
        validate_inverse(f, f_inv)?;
        let (r, f, f_inv) = (self.clone(), f.clone(), f_inv.clone());
        Ok(Reaction::new(f.cod().clone(), move |y| {
            let x = f_inv.eval(&f.cod().normalize(y)?)?;
            let j = f.jacobian(&x)?;
            Ok(&j * r.matrix_at(x.coords())? * j.transpose())
        }))
    }

    pub fn is_antisymmetric(&self, x: &[f64], tol: f64) -> bool {
        self.matrix_at(x)
            .map(|r| (&r + r.transpose()).amax() <= tol)
            .unwrap_or(false)
    }

    /// Symmetric with all eigenvalues `≥ −tol`.
    pub fn is_psd(&self, x: &[f64], tol: f64) -> bool {
        let Ok(r) = self.matrix_at(x) else {
            return false;
        };
        if (&r - r.transpose()).amax() > tol {
            return false;
        }
        r.nrows() == 0 || SymmetricEigen::new(r).eigenvalues.min() >= -tol
    }
}

const INVERSE_SAMPLES: usize = 16;

fn validate_inverse(f: &SmoothMap, f_inv: &SmoothMap) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..INVERSE_SAMPLES {
        for (g, h) in [(f, f_inv), (f_inv, f)] {
            let x = g.dom().sample(&mut rng, 2.0);
            let back = h.eval(&g.eval(&x)?)?;
            if !g.dom().approx_eq(x.coords(), back.coords(), BASE_TOL) {
                return Err(Error::Diffeomorphism(format!(
                    "round trip moved {:?} to {:?}",
                    x.coords(),
                    back.coords()
                )));
            }
        }
    }
    Ok(())
}

/// Checks the canonical `(position, momentum)` layout a symplectic
/// integrator needs: position slots may be circles, momenta are lines.
pub(crate) fn canonical_layout(r: &Reaction) -> Option<&[(usize, usize)]> {
    let pairs = r.canonical_pairs()?;
    let ok = pairs.len() * 2 == r.space.dim()
        && pairs
            .iter()
            .all(|&(_, p)| r.space.factors()[p] == Factor::Line);
    ok.then_some(pairs)
}
