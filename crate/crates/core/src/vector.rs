//! Small fixed-capacity vectors and matrices for `N ∈ {1, 2}`.

use core::fmt;
use core::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use alloc::vec::Vec;
use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::math;

pub const MAX_DIM: usize = 2;

/// A vector of `R^N` with `N ∈ {1, 2}`.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct Vector {
    dim: usize,
    c: [f64; MAX_DIM],
}

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension must be 1 or 2");
        Vector { dim, c: [0.0; MAX_DIM] }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        let mut v = Vector::zeros(s.len());
        v.c[..s.len()].copy_from_slice(s);
        v
    }

    pub fn scalar(x: f64) -> Self {
        Vector { dim: 1, c: [x, 0.0] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c[..self.dim]
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.as_slice().to_vec()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for i in 0..self.dim {
            s += self.c[i] * other.c[i];
        }
        s
    }

    pub fn norm2(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        if self.dim == 1 {
            self.c[0].abs()
        } else {
            math::sqrt(self.norm2())
        }
    }

    pub fn scale(&self, s: f64) -> Vector {
        let mut r = *self;
        for i in 0..self.dim {
            r.c[i] *= s;
        }
        r
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.as_slice().iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.c[..self.dim][i]
    }
}

impl Add for Vector {
    type Output = Vector;
    fn add(mut self, o: Vector) -> Vector {
        debug_assert_eq!(self.dim, o.dim);
        for i in 0..self.dim {
            self.c[i] += o.c[i];
        }
        self
    }
}

impl Sub for Vector {
    type Output = Vector;
    fn sub(mut self, o: Vector) -> Vector {
        debug_assert_eq!(self.dim, o.dim);
        for i in 0..self.dim {
            self.c[i] -= o.c[i];
        }
        self
    }
}

impl Neg for Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self.scale(-1.0)
    }
}

impl Mul<Vector> for f64 {
    type Output = Vector;
    fn mul(self, v: Vector) -> Vector {
        v.scale(self)
    }
}

impl Serialize for Vector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.dim))?;
        for x in self.as_slice() {
            seq.serialize_element(x)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Vector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Vector;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an array of 1 or 2 numbers")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Vector, A::Error> {
                let mut c = [0.0; MAX_DIM];
                let mut n = 0;
                while let Some(x) = seq.next_element::<f64>()? {
                    if n == MAX_DIM {
                        return Err(de::Error::invalid_length(n + 1, &self));
                    }
                    c[n] = x;
                    n += 1;
                }
                if n == 0 {
                    return Err(de::Error::invalid_length(0, &self));
                }
                Ok(Vector { dim: n, c })
            }
        }
        deserializer.deserialize_seq(V)
    }
}

/// An `N × N` matrix, row-major, `N ∈ {1, 2}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix {
    dim: usize,
    m: [[f64; MAX_DIM]; MAX_DIM],
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix { dim, m: [[0.0; MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m.m[i][i] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.m[i][j] = v;
    }

    pub fn scale(mut self, s: f64) -> Matrix {
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.m[i][j] *= s;
            }
        }
        self
    }

    /// `I + k ξ ξᵀ / |ξ|²`-style rank-one update: `self + k · u uᵀ`.
    pub fn add_outer(mut self, u: &Vector, k: f64) -> Matrix {
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.m[i][j] += k * u[i] * u[j];
            }
        }
        self
    }

    pub fn mul_vec(&self, v: &Vector) -> Vector {
        let mut r = Vector::zeros(self.dim);
        for i in 0..self.dim {
            let mut s = 0.0;
            for j in 0..self.dim {
                s += self.m[i][j] * v[j];
            }
            r[i] = s;
        }
        r
    }
}
