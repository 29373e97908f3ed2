//! Cylinder spaces: finite products of lines and circles.
//!
//! Both factor kinds have trivial tangent and cotangent bundles, so every
//! fiber over a point is plain `ℝ^dim` in the coordinate basis.

use std::f64::consts::TAU;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Factor {
    Line,
    Circle,
}

/// An ordered product of [`Factor`]s. The empty product is `ℝ⁰`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Space {
    factors: Vec<Factor>,
}

impl Space {
    pub fn new(factors: Vec<Factor>) -> Self {
        Space { factors }
    }

    /// The terminal space `ℝ⁰`.
    pub fn unit() -> Self {
        Space::default()
    }

    pub fn line() -> Self {
        Space::new(vec![Factor::Line])
    }

    pub fn circle() -> Self {
        Space::new(vec![Factor::Circle])
    }

    /// `ℝⁿ` as `n` line factors.
    pub fn euclidean(n: usize) -> Self {
        Space::new(vec![Factor::Line; n])
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn is_unit(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn is_euclidean(&self) -> bool {
        self.factors.iter().all(|f| *f == Factor::Line)
    }

    pub fn product(&self, other: &Space) -> Space {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        Space { factors }
    }

    /// `T*M`: the base factors followed by one line per base dimension
    /// (base coordinates first, then momenta).
    pub fn cotangent_space(&self) -> Space {
        self.product(&Space::euclidean(self.dim()))
    }

    /// The factors in `range`, as a space of their own.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Space {
        Space::new(self.factors[range].to_vec())
    }

    pub fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// Reduces circle coordinates into `[0, 2π)`.
    pub fn normalize(&self, raw: &[f64]) -> Result<Point> {
        self.check_dim(raw.len())?;
        Ok(Point(self.wrap(raw.to_vec())))
    }

    pub(crate) fn wrap(&self, mut coords: Vec<f64>) -> Vec<f64> {
        for (c, f) in coords.iter_mut().zip(&self.factors) {
            if *f == Factor::Circle {
                *c = wrap_angle(*c);
            }
        }
        coords
    }

    /// Coordinate-wise comparison, circle coordinates taken mod 2π.
    pub fn approx_eq(&self, a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == self.dim()
            && b.len() == self.dim()
            && self
                .factors
                .iter()
                .zip(a.iter().zip(b))
                .all(|(f, (x, y))| match f {
                    Factor::Line => (x - y).abs() <= tol,
                    Factor::Circle => angle_distance(*x, *y) <= tol,
                })
    }

    /// A random point: circles uniform on `[0, 2π)`, lines uniform on
    /// `[-radius, radius]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, radius: f64) -> Point {
        Point(
            self.factors
                .iter()
                .map(|f| match f {
                    Factor::Line => rng.gen_range(-radius..=radius),
                    Factor::Circle => rng.gen_range(0.0..TAU),
                })
                .collect(),
        )
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "ℝ⁰");
        }
        let mut parts: Vec<String> = Vec::new();
        let mut run = 0usize;
        let flush = |run: &mut usize, parts: &mut Vec<String>| {
            match *run {
                0 => {}
                1 => parts.push("ℝ".into()),
                n => parts.push(format!("ℝ{}", superscript(n))),
            }
            *run = 0;
        };
        for factor in &self.factors {
            match factor {
                Factor::Line => run += 1,
                Factor::Circle => {
                    flush(&mut run, &mut parts);
                    parts.push("S¹".into());
                }
            }
        }
        flush(&mut run, &mut parts);
        write!(f, "{}", parts.join("×"))
    }
}

fn superscript(n: usize) -> String {
    const DIGITS: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
    n.to_string()
        .bytes()
        .map(|b| DIGITS[(b - b'0') as usize])
        .collect()
}

pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// A point of a [`Space`], with circle coordinates in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    /// The unique point of `ℝ⁰`.
    pub fn unit() -> Self {
        Point(Vec::new())
    }

    /// Wraps coordinates without normalizing; only for all-line spaces or
    /// already-normalized data.
    pub fn from_raw(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Concatenates coordinates: a point of `S₁ × S₂` from points of each.
    pub fn concat(&self, other: &Point) -> Point {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Point(v)
    }

    pub fn split_at(&self, mid: usize) -> (Point, Point) {
        let (a, b) = self.0.split_at(mid);
        (Point(a.to_vec()), Point(b.to_vec()))
    }
}

/// A cotangent vector at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct Covector {
    pub base: Point,
    pub components: Vec<f64>,
}

/// A tangent vector at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    pub base: Point,
    pub components: Vec<f64>,
}

impl Covector {
    pub fn new(base: Point, components: Vec<f64>) -> Result<Self> {
        if base.dim() != components.len() {
            return Err(Error::Dimension {
                expected: base.dim(),
                got: components.len(),
            });
        }
        Ok(Covector { base, components })
    }

    pub fn zero(base: Point) -> Self {
        let n = base.dim();
        Covector {
            base,
            components: vec![0.0; n],
        }
    }

    /// Pairing with a tangent vector at the same base point.
    pub fn pair(&self, v: &Tangent) -> f64 {
        self.components
            .iter()
            .zip(&v.components)
            .map(|(a, b)| a * b)
            .sum()
    }
}

impl Tangent {
    pub fn new(base: Point, components: Vec<f64>) -> Result<Self> {
        if base.dim() != components.len() {
            return Err(Error::Dimension {
                expected: base.dim(),
                got: components.len(),
            });
        }
        Ok(Tangent { base, components })
    }

    pub fn zero(base: Point) -> Self {
        let n = base.dim();
        Tangent {
            base,
            components: vec![0.0; n],
        }
    }
}
