//! Joint primal-dual vectors.
//!
//! A [`Point`] is a flat vector `z = (x, y)` whose first `n` coordinates are
//! the primal block and whose last `m` coordinates are the dual block.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
    n: usize,
}

impl Point {
    pub fn new(coords: Vec<f64>, n: usize) -> Result<Self> {
        if n == 0 || n >= coords.len() {
            return Err(Error::config(format!(
                "point needs n >= 1 primal and m >= 1 dual coordinates (len {}, n {n})",
                coords.len()
            )));
        }
        Ok(Point { coords, n })
    }

    /// Builds a point from separate primal and dual blocks.
    pub fn from_blocks(x: &[f64], y: &[f64]) -> Result<Self> {
        let mut coords = Vec::with_capacity(x.len() + y.len());
        coords.extend_from_slice(x);
        coords.extend_from_slice(y);
        Point::new(coords, x.len())
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        assert!(n >= 1 && m >= 1, "point blocks must be nonempty");
        Point {
            coords: vec![0.0; n + m],
            n,
        }
    }

    /// A zero vector with the same block layout as `self`.
    pub fn zeros_like(&self) -> Self {
        Point {
            coords: vec![0.0; self.coords.len()],
            n: self.n,
        }
    }

    pub fn dim_primal(&self) -> usize {
        self.n
    }

    pub fn dim_dual(&self) -> usize {
        self.coords.len() - self.n
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }

    pub fn primal(&self) -> &[f64] {
        &self.coords[..self.n]
    }

    pub fn dual(&self) -> &[f64] {
        &self.coords[self.n..]
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    pub fn same_layout(&self, other: &Point) -> bool {
        self.n == other.n && self.coords.len() == other.coords.len()
    }

    pub fn dot(&self, other: &Point) -> f64 {
        dot(&self.coords, &other.coords)
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn sub(&self, other: &Point) -> Point {
        self.map2(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Point) -> Point {
        self.map2(other, |a, b| a + b)
    }

    pub fn scale(&self, s: f64) -> Point {
        Point {
            coords: self.coords.iter().map(|c| s * c).collect(),
            n: self.n,
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Point) {
        for (a, b) in self.coords.iter_mut().zip(&other.coords) {
            *a += s * b;
        }
    }

    fn map2(&self, other: &Point, f: impl Fn(f64, f64) -> f64) -> Point {
        debug_assert!(self.same_layout(other));
        Point {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            n: self.n,
        }
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

impl IndexMut<usize> for Point {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.coords[i]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sum of squared coordinates of an operator value, `||G(z)||^2`.
pub fn operator_norm_sq(g: &Point) -> f64 {
    g.norm_sq()
}
