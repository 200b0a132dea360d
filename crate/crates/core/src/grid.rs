//! Rectangular parameter grids.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VossError};

/// Uniform grid `x0 + i·dx, y0 + j·dy` with `nx × ny` nodes, stored row-major
/// (`x` fastest).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(x0: f64, y0: f64, dx: f64, dy: f64, nx: usize, ny: usize) -> Result<Self> {
        let g = GridSpec { x0, y0, dx, dy, nx, ny };
        g.validate()?;
        Ok(g)
    }

    /// Grid covering `[xa, xb] × [ya, yb]` with the given node counts.
    pub fn spanning(xa: f64, xb: f64, ya: f64, yb: f64, nx: usize, ny: usize) -> Result<Self> {
        let dx = if nx > 1 { (xb - xa) / (nx - 1) as f64 } else { 1.0 };
        let dy = if ny > 1 { (yb - ya) / (ny - 1) as f64 } else { 1.0 };
        Self::new(xa, ya, dx, dy, nx, ny)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(VossError::Config("grid needs nx, ny >= 1".into()));
        }
        let ok = [self.x0, self.y0, self.dx, self.dy].iter().all(|v| v.is_finite());
        if !ok || self.dx <= 0.0 || self.dy <= 0.0 {
            return Err(VossError::Config("grid spacing must be finite and positive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.dy
    }

    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x(i), self.y(j))
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Inverse of [`GridSpec::index`].
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        (0..self.len()).map(|k| {
            let (i, j) = self.ij(k);
            self.point(i, j)
        }).collect()
    }

    /// Node indices of `(x, y)` when it coincides with a node.
    pub fn node_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fi = ((x - self.x0) / self.dx).round();
        let fj = ((y - self.y0) / self.dy).round();
        if fi < 0.0 || fj < 0.0 || fi as usize >= self.nx || fj as usize >= self.ny {
            return None;
        }
        let (i, j) = (fi as usize, fj as usize);
        let tol = 1e-9;
        let close = (self.x(i) - x).abs() <= tol * self.dx && (self.y(j) - y).abs() <= tol * self.dy;
        close.then_some((i, j))
    }

    /// Nearest node, clamped to the grid.
    pub fn nearest(&self, x: f64, y: f64) -> (usize, usize) {
        let fi = ((x - self.x0) / self.dx).round().clamp(0.0, (self.nx - 1) as f64);
        let fj = ((y - self.y0) / self.dy).round().clamp(0.0, (self.ny - 1) as f64);
        (fi as usize, fj as usize)
    }

    /// The same nodes with `x` and `y` exchanged.
    pub fn transpose(&self) -> Self {
        GridSpec { x0: self.y0, y0: self.x0, dx: self.dy, dy: self.dx, nx: self.ny, ny: self.nx }
    }

    pub fn far_corner(&self) -> (f64, f64) {
        self.point(self.nx - 1, self.ny - 1)
    }
}
