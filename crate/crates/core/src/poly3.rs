//! Exact polynomial algebra in three variables.
//!
//! Coefficients are stored sparsely keyed by the exponent triple, so
//! construction, differentiation, and evaluation of moderate-degree
//! polynomials (solid harmonics, ambient flows) stay exact in f64 as long as
//! the coefficients themselves are exactly representable.

use crate::Vec3;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

/// Sparse polynomial in (x, y, z) with f64 coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Poly3 {
    terms: BTreeMap<(u8, u8, u8), f64>,
}

impl Poly3 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, 0, 0, 0)
    }

    /// c · x^i y^j z^k
    pub fn monomial(c: f64, i: u8, j: u8, k: u8) -> Self {
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert((i, j, k), c);
        }
        Self { terms }
    }

    /// The coordinate polynomial x, y, or z for axis 0, 1, or 2.
    pub fn coord(axis: usize) -> Self {
        match axis {
            0 => Self::monomial(1.0, 1, 0, 0),
            1 => Self::monomial(1.0, 0, 1, 0),
            2 => Self::monomial(1.0, 0, 0, 1),
            _ => panic!("axis out of range"),
        }
    }

    /// x² + y² + z²
    pub fn r_squared() -> Self {
        Self::monomial(1.0, 2, 0, 0) + Self::monomial(1.0, 0, 2, 0) + Self::monomial(1.0, 0, 0, 2)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms
            .keys()
            .map(|(i, j, k)| *i as u32 + *j as u32 + *k as u32)
            .max()
    }

    pub fn scale(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(k, v)| (*k, c * v)).collect(),
        }
    }

    pub fn eval(&self, p: &Vec3) -> f64 {
        let mut acc = crate::util::KahanSum::new();
        for (&(i, j, k), &c) in &self.terms {
            acc.add(c * p.x.powi(i as i32) * p.y.powi(j as i32) * p.z.powi(k as i32));
        }
        acc.value()
    }

    /// ∂/∂axis
    pub fn diff(&self, axis: usize) -> Self {
        let mut terms = BTreeMap::new();
        for (&(i, j, k), &c) in &self.terms {
            let (e, key) = match axis {
                0 if i > 0 => (i, (i - 1, j, k)),
                1 if j > 0 => (j, (i, j - 1, k)),
                2 if k > 0 => (k, (i, j, k - 1)),
                0 | 1 | 2 => continue,
                _ => panic!("axis out of range"),
            };
            *terms.entry(key).or_insert(0.0) += c * e as f64;
        }
        let mut out = Self { terms };
        out.prune();
        out
    }

    pub fn gradient(&self) -> [Self; 3] {
        [self.diff(0), self.diff(1), self.diff(2)]
    }

    pub fn laplacian(&self) -> Self {
        self.diff(0).diff(0) + self.diff(1).diff(1) + self.diff(2).diff(2)
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| *c != 0.0);
    }
}

/// Divergence of a polynomial vector field.
pub fn divergence(v: &[Poly3; 3]) -> Poly3 {
    v[0].diff(0) + v[1].diff(1) + v[2].diff(2)
}

impl Add for Poly3 {
    type Output = Poly3;
    fn add(self, rhs: Poly3) -> Poly3 {
        let mut terms = self.terms;
        for (k, c) in rhs.terms {
            *terms.entry(k).or_insert(0.0) += c;
        }
        let mut out = Poly3 { terms };
        out.prune();
        out
    }
}

impl Sub for Poly3 {
    type Output = Poly3;
    fn sub(self, rhs: Poly3) -> Poly3 {
        self + rhs.neg()
    }
}

impl Neg for Poly3 {
    type Output = Poly3;
    fn neg(self) -> Poly3 {
        self.scale(-1.0)
    }
}

impl Mul for Poly3 {
    type Output = Poly3;
    fn mul(self, rhs: Poly3) -> Poly3 {
        &self * &rhs
    }
}

impl Mul for &Poly3 {
    type Output = Poly3;
    fn mul(self, rhs: &Poly3) -> Poly3 {
        let mut terms = BTreeMap::new();
        for (&(i1, j1, k1), &c1) in &self.terms {
            for (&(i2, j2, k2), &c2) in &rhs.terms {
                *terms.entry((i1 + i2, j1 + j2, k1 + k2)).or_insert(0.0) += c1 * c2;
            }
        }
        let mut out = Poly3 { terms };
        out.prune();
        out
    }
}
