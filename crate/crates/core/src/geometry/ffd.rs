//! Free-form deformation over a rectangular Bernstein control lattice.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::airfoil::{AirfoilShape, BoundingBox};
use crate::error::{Error, Result};

/// Lattice of `cols x rows` control points, column-major: `P^{l,m}` lives at `l * rows + m`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlGrid {
    cols: usize,
    rows: usize,
    points: Vec<[f64; 2]>,
}

impl ControlGrid {
    /// Uniform axis-aligned lattice spanning `[x0, x1] x [y0, y1]`.
    pub fn uniform(x0: f64, x1: f64, y0: f64, y1: f64, cols: usize, rows: usize) -> Result<Self> {
        if cols < 2 || rows < 2 {
            return Err(Error::contract(format!(
                "control grid needs at least 2x2 points, got {cols}x{rows}"
            )));
        }
        let mut points = Vec::with_capacity(cols * rows);
        for l in 0..cols {
            for m in 0..rows {
                points.push([
                    x0 + l as f64 / (cols - 1) as f64 * (x1 - x0),
                    y0 + m as f64 / (rows - 1) as f64 * (y1 - y0),
                ]);
            }
        }
        Ok(Self { cols, rows, points })
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn point(&self, l: usize, m: usize) -> [f64; 2] {
        self.points[l * self.rows + m]
    }

    pub fn point_mut(&mut self, l: usize, m: usize) -> &mut [f64; 2] {
        &mut self.points[l * self.rows + m]
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            cols: self.cols,
            rows: self.rows,
            points: self.points.iter().map(|&[x, y]| [x + dx, y + dy]).collect(),
        }
    }

    /// Tensor-product Bernstein evaluation at parametric `(u, v)`.
    pub fn evaluate(&self, u: f64, v: f64) -> [f64; 2] {
        let bu = bernstein_row(self.cols - 1, u);
        let bv = bernstein_row(self.rows - 1, v);
        let mut out = [0.0, 0.0];
        for (l, wu) in bu.iter().enumerate() {
            for (m, wv) in bv.iter().enumerate() {
                let w = wu * wv;
                let [px, py] = self.point(l, m);
                out[0] += w * px;
                out[1] += w * py;
            }
        }
        out
    }
}

fn binomial(n: usize, i: usize) -> f64 {
    let i = i.min(n - i);
    (0..i).fold(1.0, |acc, k| acc * (n - k) as f64 / (k + 1) as f64)
}

/// `C(n, i) t^i (1 - t)^(n - i)`.
pub fn bernstein(i: usize, n: usize, t: f64) -> Result<f64> {
    if i > n {
        return Err(Error::contract(format!("bernstein index {i} exceeds degree {n}")));
    }
    Ok(binomial(n, i) * t.powi(i as i32) * (1.0 - t).powi((n - i) as i32))
}

/// All `n + 1` basis values of degree `n` at `t`.
pub fn bernstein_row(n: usize, t: f64) -> Vec<f64> {
    (0..=n)
        .map(|i| binomial(n, i) * t.powi(i as i32) * (1.0 - t).powi((n - i) as i32))
        .collect()
}

fn nondegenerate(b: &BoundingBox) -> Result<()> {
    if !(b.width() > 0.0 && b.height() > 0.0) {
        return Err(Error::geometry(format!(
            "degenerate bounding box {:.3e} x {:.3e}",
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Uniform lattice over the shape's bounding box (8 x 3 for the airfoil benchmark).
pub fn make_control_grid(shape: &AirfoilShape, cols: usize, rows: usize) -> Result<ControlGrid> {
    let b = shape.bbox();
    nondegenerate(&b)?;
    ControlGrid::uniform(b.x_min, b.x_max, b.y_min, b.y_max, cols, rows)
}

/// Per-point `(u, v)` in the unit square relative to the bounding box.
#[derive(Clone, Debug, PartialEq)]
pub struct ParametricCoords {
    pub uv: Vec<[f64; 2]>,
}

pub fn parametric_coords(shape: &AirfoilShape) -> Result<ParametricCoords> {
    let b = shape.bbox();
    nondegenerate(&b)?;
    let uv = shape
        .points()
        .iter()
        .map(|&[x, y]| [(x - b.x_min) / b.width(), (y - b.y_min) / b.height()])
        .collect();
    Ok(ParametricCoords { uv })
}

/// Adds `N(0, sigma_y^2)` to the y-coordinate of every control point except
/// the first and last columns, which stay pinned.
pub fn perturb_control_grid<R: Rng + ?Sized>(
    grid: &ControlGrid,
    sigma_y: f64,
    rng: &mut R,
) -> Result<ControlGrid> {
    let normal = Normal::new(0.0, sigma_y)
        .map_err(|_| Error::contract(format!("invalid noise scale {sigma_y}")))?;
    let mut out = grid.clone();
    for l in 1..grid.cols - 1 {
        for m in 0..grid.rows {
            out.point_mut(l, m)[1] += normal.sample(rng);
        }
    }
    Ok(out)
}

/// Adds independent `N(0, sigma^2)` noise to both coordinates of every control point.
pub fn perturb_control_grid_xy<R: Rng + ?Sized>(
    grid: &ControlGrid,
    sigma: f64,
    rng: &mut R,
) -> Result<ControlGrid> {
    let normal = Normal::new(0.0, sigma)
        .map_err(|_| Error::contract(format!("invalid noise scale {sigma}")))?;
    let mut out = grid.clone();
    for p in &mut out.points {
        p[0] += normal.sample(rng);
        p[1] += normal.sample(rng);
    }
    Ok(out)
}

pub fn ffd_deform(coords: &ParametricCoords, grid: &ControlGrid) -> AirfoilShape {
    let points = coords.uv.iter().map(|&[u, v]| grid.evaluate(u, v)).collect();
    AirfoilShape::from_points_unchecked(points)
}
