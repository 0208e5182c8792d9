//! Arithmetic in the associative normed division algebras R, C and H.
//!
//! Every [`Scalar`] carries its field tag and four real components in the
//! fixed basis order `(1, i, j, k)`. Reals use only the first slot, complex
//! numbers the first two. Since C sits inside H as `span{1, i}`, one
//! quaternion product serves all three fields.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("field mismatch: {0} vs {1}")]
    FieldMismatch(Field, Field),
    #[error("inverse of zero")]
    ZeroInverse,
    #[error("unknown field token `{0}` (expected R, C or H)")]
    UnknownField(String),
}

/// One of the coefficient algebras.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum Field {
    R,
    C,
    H,
}

impl Field {
    pub const ALL: [Field; 3] = [Field::R, Field::C, Field::H];

    /// Real dimension `d`.
    pub const fn dim(self) -> usize {
        match self {
            Field::R => 1,
            Field::C => 2,
            Field::H => 4,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Field::R => "R",
            Field::C => "C",
            Field::H => "H",
        };
        f.write_str(s)
    }
}

impl FromStr for Field {
    type Err = AlgebraError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "R" | "r" => Ok(Field::R),
            "C" | "c" => Ok(Field::C),
            "H" | "h" => Ok(Field::H),
            other => Err(AlgebraError::UnknownField(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scalar {
    field: Field,
    c: [f64; 4],
}

impl Scalar {
    /// Builds a scalar, dropping components the field does not carry.
    pub fn new(field: Field, comps: [f64; 4]) -> Self {
        let mut c = [0.0; 4];
        c[..field.dim()].copy_from_slice(&comps[..field.dim()]);
        Scalar { field, c }
    }

    pub fn from_slice(field: Field, comps: &[f64]) -> Self {
        assert_eq!(comps.len(), field.dim(), "component count must equal dim_R F");
        let mut c = [0.0; 4];
        c[..comps.len()].copy_from_slice(comps);
        Scalar { field, c }
    }

    pub fn real(field: Field, x: f64) -> Self {
        Scalar { field, c: [x, 0.0, 0.0, 0.0] }
    }

    pub fn zero(field: Field) -> Self {
        Self::real(field, 0.0)
    }

    pub fn one(field: Field) -> Self {
        Self::real(field, 1.0)
    }

    /// The `n`-th imaginary unit (`1 = i`, `2 = j`, `3 = k`); `0` is the unit.
    pub fn basis(field: Field, n: usize) -> Self {
        assert!(n < field.dim(), "basis index {n} out of range for {field}");
        let mut c = [0.0; 4];
        c[n] = 1.0;
        Scalar { field, c }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn components(&self) -> &[f64] {
        &self.c[..self.field.dim()]
    }

    pub fn re(&self) -> f64 {
        self.c[0]
    }

    /// Imaginary part `(a - conj a) / 2`.
    pub fn im(&self) -> Scalar {
        Scalar { field: self.field, c: [0.0, self.c[1], self.c[2], self.c[3]] }
    }

    pub fn conj(&self) -> Scalar {
        Scalar { field: self.field, c: [self.c[0], -self.c[1], -self.c[2], -self.c[3]] }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c.iter().map(|x| x * x).sum()
    }

    pub fn abs(&self) -> f64 {
        let [a, b, c, d] = self.c;
        a.hypot(b).hypot(c.hypot(d))
    }

    pub fn scale(&self, s: f64) -> Scalar {
        Scalar { field: self.field, c: self.c.map(|x| x * s) }
    }

    pub fn try_mul(&self, other: &Scalar) -> Result<Scalar, AlgebraError> {
        if self.field != other.field {
            return Err(AlgebraError::FieldMismatch(self.field, other.field));
        }
        Ok(self.mul_unchecked(other))
    }

    #[inline]
    fn mul_unchecked(&self, other: &Scalar) -> Scalar {
        let [a0, a1, a2, a3] = self.c;
        let [b0, b1, b2, b3] = other.c;
        Scalar {
            field: self.field,
            c: [
                a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
                a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
                a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
                a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
            ],
        }
    }

    pub fn inv(&self) -> Result<Scalar, AlgebraError> {
        let n = self.norm_sqr();
        if n == 0.0 {
            return Err(AlgebraError::ZeroInverse);
        }
        Ok(self.conj().scale(1.0 / n))
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&x| x == 0.0)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const UNITS: [&str; 4] = ["", "i", "j", "k"];
        write!(f, "{}", self.c[0])?;
        for n in 1..self.field.dim() {
            let x = self.c[n];
            if x < 0.0 {
                write!(f, "-{}{}", -x, UNITS[n])?;
            } else {
                write!(f, "+{}{}", x, UNITS[n])?;
            }
        }
        Ok(())
    }
}

// Operator forms are used on vectors whose entries share a field by
// construction; mixing fields there is a programming error.
impl Mul for Scalar {
    type Output = Scalar;

    #[inline]
    fn mul(self, rhs: Scalar) -> Scalar {
        debug_assert_eq!(self.field, rhs.field);
        self.mul_unchecked(&rhs)
    }
}

impl Add for Scalar {
    type Output = Scalar;

    #[inline]
    fn add(self, rhs: Scalar) -> Scalar {
        debug_assert_eq!(self.field, rhs.field);
        let mut c = self.c;
        for (x, y) in c.iter_mut().zip(rhs.c) {
            *x += y;
        }
        Scalar { field: self.field, c }
    }
}

impl Sub for Scalar {
    type Output = Scalar;

    #[inline]
    fn sub(self, rhs: Scalar) -> Scalar {
        debug_assert_eq!(self.field, rhs.field);
        let mut c = self.c;
        for (x, y) in c.iter_mut().zip(rhs.c) {
            *x -= y;
        }
        Scalar { field: self.field, c }
    }
}

impl Neg for Scalar {
    type Output = Scalar;

    fn neg(self) -> Scalar {
        self.scale(-1.0)
    }
}
