//! Uniform nodal grids on the square `Q = [−1, 1]²` for shear maps `u_σ(x) = x + σ(x)e₂`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Strips of `Q` cut by the weak-constraint boundary data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Region {
    /// `x₁ ≤ 0`
    M,
    /// `0 < x₁ < 1/2`
    N,
    /// `x₁ ≥ 1/2`
    P,
}

impl Region {
    pub fn of(x1: f64) -> Self {
        if x1 <= 0.0 {
            Self::M
        } else if x1 < 0.5 {
            Self::N
        } else {
            Self::P
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::M => "M",
            Self::N => "N",
            Self::P => "P",
        }
    }
}

/// Nodes `x = (−1 + ih, −1 + jh)`, `0 ≤ i, j ≤ 2n`, with `h = 1/n`.
///
/// `n` must be even so that the interface `x₁ = 1/2` is a grid column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ShearGrid {
    n: usize,
}

impl ShearGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("grid resolution must be even and at least 2, got {n}")));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Nodes per side, `2n + 1`.
    pub fn side(&self) -> usize {
        2 * self.n + 1
    }

    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Last index along either axis.
    pub fn last(&self) -> usize {
        2 * self.n
    }

    pub fn coord(&self, i: usize) -> f64 {
        -1.0 + i as f64 / self.n as f64
    }

    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (self.coord(i), self.coord(j))
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.side() + i
    }

    /// Column of `x₁ = 0`.
    pub fn i_zero(&self) -> usize {
        self.n
    }

    /// Column of the interface `K = {x₁ = 1/2}`.
    pub fn i_k(&self) -> usize {
        3 * self.n / 2
    }

    pub fn region(&self, i: usize) -> Region {
        if i <= self.i_zero() {
            Region::M
        } else if i < self.i_k() {
            Region::N
        } else {
            Region::P
        }
    }

    pub fn on_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.last() || j == self.last()
    }
}

/// Nodal values of `σ` on a [`ShearGrid`], stored row by row (`x₂` outer).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShearGridField {
    pub grid: ShearGrid,
    pub values: Vec<f64>,
}

impl ShearGridField {
    pub fn zeros(grid: ShearGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: ShearGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.side() {
            for i in 0..grid.side() {
                let (x1, x2) = grid.point(i, j);
                values.push(f(x1, x2));
            }
        }
        Self { grid, values }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.values[k] = v;
    }

    pub fn region(&self, i: usize) -> Region {
        self.grid.region(i)
    }

    /// `D₂σ`: forward difference, backward on the top row.
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        let j = if j == self.grid.last() { j - 1 } else { j };
        (self.get(i, j + 1) - self.get(i, j)) * self.grid.n as f64
    }

    /// Second-order one-sided `D₁σ` at the left trace of column `i` (uses `i, i−1, i−2`).
    pub fn d1_left(&self, i: usize, j: usize) -> f64 {
        (3.0 * self.get(i, j) - 4.0 * self.get(i - 1, j) + self.get(i - 2, j)) * self.grid.n as f64 / 2.0
    }

    /// Second-order one-sided `D₁σ` at the right trace of column `i` (uses `i, i+1, i+2`).
    pub fn d1_right(&self, i: usize, j: usize) -> f64 {
        (-3.0 * self.get(i, j) + 4.0 * self.get(i + 1, j) - self.get(i + 2, j)) * self.grid.n as f64 / 2.0
    }

    /// Nodal `det ∇u_σ = 1 + D₂σ`.
    pub fn jacobian(&self) -> Vec<f64> {
        let g = self.grid;
        let mut out = Vec::with_capacity(g.len());
        for j in 0..g.side() {
            for i in 0..g.side() {
                out.push(1.0 + self.d2(i, j));
            }
        }
        out
    }

    pub fn min_jacobian(&self) -> f64 {
        self.jacobian().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `λ self + (1 − λ) other`.
    pub fn lerp(&self, other: &Self, lambda: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| b + lambda * (a - b)).collect(),
        }
    }

    /// `self + s·other`
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        Self { grid: self.grid, values: self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect() }
    }

    /// Image `u_σ(x) = (x₁, x₂ + σ(x))` of node `(i, j)`.
    pub fn deformed(&self, i: usize, j: usize) -> (f64, f64) {
        let (x1, x2) = self.grid.point(i, j);
        (x1, x2 + self.get(i, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout() {
        let g = ShearGrid::new(8).unwrap();
        assert_eq!(g.side(), 17);
        assert_eq!(g.coord(g.i_zero()), 0.0);
        assert_eq!(g.coord(g.i_k()), 0.5);
        assert_eq!(g.coord(g.last()), 1.0);
        assert_eq!(g.region(g.i_zero()), Region::M);
        assert_eq!(g.region(g.i_zero() + 1), Region::N);
        assert_eq!(g.region(g.i_k()), Region::P);
        assert!(ShearGrid::new(7).is_err());
        for i in 0..g.side() {
            assert_eq!(g.region(i), Region::of(g.coord(i)));
        }
    }

    #[test]
    fn differences_exact_on_affine() {
        let g = ShearGrid::new(8).unwrap();
        let f = ShearGridField::from_fn(g, |x1, x2| 3.0 * x1 - 2.0 * x2 + 1.0);
        for j in 0..g.side() {
            assert!((f.d2(4, j) + 2.0).abs() < 1e-12);
        }
        assert!((f.d1_left(10, 3) - 3.0).abs() < 1e-12);
        assert!((f.d1_right(10, 3) - 3.0).abs() < 1e-12);
        let minus = ShearGridField::from_fn(g, |_, x2| -x2);
        assert!(minus.jacobian().iter().all(|d| d.abs() < 1e-12));
    }
}
