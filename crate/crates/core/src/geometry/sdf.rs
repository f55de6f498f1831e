//! Level-set fields for the metasurface benchmark.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ffd::{perturb_control_grid_xy, ControlGrid};
use crate::error::{Error, Result};

pub const MIN_FIELD_SIZE: usize = 8;

/// Row-major `height x width` grid of signed distances in pixel units,
/// negative inside material.
#[derive(Clone, Debug, PartialEq)]
pub struct SdfField {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl SdfField {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height < MIN_FIELD_SIZE || width < MIN_FIELD_SIZE {
            return Err(Error::geometry(format!(
                "field must be at least {MIN_FIELD_SIZE}x{MIN_FIELD_SIZE}, got {height}x{width}"
            )));
        }
        if values.len() != height * width {
            return Err(Error::Dimension {
                op: "sdf_field",
                detail: format!("{height}x{width} from {} values", values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::geometry("field has non-finite values"));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Bilinear sample at continuous index coordinates `(x = col, y = row)`,
    /// clamped to the edge.
    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let j0 = (x.floor() as usize).min(self.width - 2);
        let i0 = (y.floor() as usize).min(self.height - 2);
        let fx = x - j0 as f64;
        let fy = y - i0 as f64;
        let v00 = self.get(i0, j0);
        let v01 = self.get(i0, j0 + 1);
        let v10 = self.get(i0 + 1, j0);
        let v11 = self.get(i0 + 1, j0 + 1);
        (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotifKind {
    IBeam,
    Cross,
    SquareRing,
}

impl MotifKind {
    pub const ALL: [MotifKind; 3] = [MotifKind::IBeam, MotifKind::Cross, MotifKind::SquareRing];
}

/// Motif size as fractions of the unit cell.
///
/// `extent` is the outer side length; `width` is the bar width (web and
/// flange thickness for the I-beam, arm width for the cross, wall
/// thickness for the ring). The dataset generator draws extent from
/// 0.5..0.9 and width from 0.1..0.3.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotifParams {
    pub extent: f64,
    pub width: f64,
}

#[derive(Clone, Copy, Debug)]
struct Rect {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Rect {
    fn centered(half_w: f64, half_h: f64, cx: f64, cy: f64) -> Self {
        Rect {
            x0: cx - half_w,
            x1: cx + half_w,
            y0: cy - half_h,
            y1: cy + half_h,
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    fn contains_strict(&self, x: f64, y: f64) -> bool {
        x > self.x0 && x < self.x1 && y > self.y0 && y < self.y1
    }

    fn edges(&self) -> [[[f64; 2]; 2]; 4] {
        let (a, b, c, d) = ([self.x0, self.y0], [self.x1, self.y0], [self.x1, self.y1], [self.x0, self.y1]);
        [[a, b], [b, c], [c, d], [d, a]]
    }
}

/// Exact motif description: material = union of `solids` minus the open `hole`;
/// `boundary` lists every boundary segment.
struct Motif {
    solids: Vec<Rect>,
    hole: Option<Rect>,
    boundary: Vec<[[f64; 2]; 2]>,
}

impl Motif {
    fn build(kind: MotifKind, p: MotifParams, res: usize) -> Result<Self> {
        let MotifParams { extent, width } = p;
        if !(extent > 0.0 && extent <= 1.0 && width > 0.0 && width <= extent) {
            return Err(Error::geometry(format!(
                "motif params need 0 < width <= extent <= 1, got extent {extent}, width {width}"
            )));
        }
        let s = res as f64;
        let c = s / 2.0;
        let e = extent * s / 2.0;
        let w = width * s;
        let hw = w / 2.0;
        let poly = |v: &[[f64; 2]]| -> Vec<[[f64; 2]; 2]> {
            (0..v.len()).map(|i| [v[i], v[(i + 1) % v.len()]]).collect()
        };
        let shift = |pts: &[[f64; 2]]| -> Vec<[f64; 2]> { pts.iter().map(|&[x, y]| [c + x, c + y]).collect() };
        match kind {
            MotifKind::Cross => {
                let v = shift(&[
                    [hw, -e],
                    [hw, -hw],
                    [e, -hw],
                    [e, hw],
                    [hw, hw],
                    [hw, e],
                    [-hw, e],
                    [-hw, hw],
                    [-e, hw],
                    [-e, -hw],
                    [-hw, -hw],
                    [-hw, -e],
                ]);
                Ok(Motif {
                    solids: vec![Rect::centered(hw, e, c, c), Rect::centered(e, hw, c, c)],
                    hole: None,
                    boundary: poly(&v),
                })
            }
            MotifKind::IBeam => {
                if 2.0 * width >= extent {
                    return Err(Error::geometry(format!(
                        "I-beam needs 2 * width < extent, got extent {extent}, width {width}"
                    )));
                }
                let v = shift(&[
                    [-e, -e],
                    [e, -e],
                    [e, -e + w],
                    [hw, -e + w],
                    [hw, e - w],
                    [e, e - w],
                    [e, e],
                    [-e, e],
                    [-e, e - w],
                    [-hw, e - w],
                    [-hw, -e + w],
                    [-e, -e + w],
                ]);
                Ok(Motif {
                    solids: vec![
                        Rect::centered(e, w / 2.0, c, c - e + w / 2.0),
                        Rect::centered(e, w / 2.0, c, c + e - w / 2.0),
                        Rect::centered(hw, e, c, c),
                    ],
                    hole: None,
                    boundary: poly(&v),
                })
            }
            MotifKind::SquareRing => {
                if 2.0 * width >= extent {
                    return Err(Error::geometry(format!(
                        "square ring needs 2 * width < extent, got extent {extent}, width {width}"
                    )));
                }
                let outer = Rect::centered(e, e, c, c);
                let inner = Rect::centered(e - w, e - w, c, c);
                let mut boundary = outer.edges().to_vec();
                boundary.extend(inner.edges());
                Ok(Motif {
                    solids: vec![outer],
                    hole: Some(inner),
                    boundary,
                })
            }
        }
    }

    fn inside(&self, x: f64, y: f64) -> bool {
        self.solids.iter().any(|r| r.contains(x, y)) && !self.hole.is_some_and(|h| h.contains_strict(x, y))
    }

    fn signed_distance(&self, x: f64, y: f64) -> f64 {
        let d = self
            .boundary
            .iter()
            .map(|&[a, b]| segment_distance([x, y], a, b))
            .fold(f64::INFINITY, f64::min);
        if self.inside(x, y) {
            -d
        } else {
            d
        }
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a[0] + t * dx, a[1] + t * dy);
    ((p[0] - qx).powi(2) + (p[1] - qy).powi(2)).sqrt()
}

/// Exact signed distance to a centered motif, sampled at pixel centers of a
/// `res x res` cell (pixel `(i, j)` sits at `(j + 0.5, i + 0.5)`).
pub fn sdf_motif(kind: MotifKind, params: MotifParams, res: usize) -> Result<SdfField> {
    if res < MIN_FIELD_SIZE {
        return Err(Error::geometry(format!("resolution {res} below {MIN_FIELD_SIZE}")));
    }
    let motif = Motif::build(kind, params, res)?;
    let mut values = Vec::with_capacity(res * res);
    for i in 0..res {
        for j in 0..res {
            values.push(motif.signed_distance(j as f64 + 0.5, i as f64 + 0.5));
        }
    }
    SdfField::new(res, res, values)
}

/// Point-in-motif test at pixel centers, independent of the distance computation.
pub fn rasterize_motif(kind: MotifKind, params: MotifParams, res: usize) -> Result<Mask> {
    let motif = Motif::build(kind, params, res)?;
    let mut cells = Vec::with_capacity(res * res);
    for i in 0..res {
        for j in 0..res {
            cells.push(motif.inside(j as f64 + 0.5, i as f64 + 0.5));
        }
    }
    Ok(Mask {
        height: res,
        width: res,
        cells,
    })
}

/// Pointwise convex combination of equally sized fields.
pub fn sdf_interpolate(fields: &[SdfField], weights: &[f64]) -> Result<SdfField> {
    let first = fields.first().ok_or_else(|| Error::contract("no fields to interpolate"))?;
    if fields.len() != weights.len() {
        return Err(Error::contract(format!(
            "{} fields but {} weights",
            fields.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::contract(format!("weights {weights:?} are not on the simplex")));
    }
    if fields.iter().any(|f| f.height != first.height || f.width != first.width) {
        return Err(Error::geometry("fields have different resolutions"));
    }
    let mut values = vec![0.0; first.values.len()];
    for (f, &w) in fields.iter().zip(weights) {
        for (acc, v) in values.iter_mut().zip(&f.values) {
            *acc += w * v;
        }
    }
    SdfField::new(first.height, first.width, values)
}

/// Uniform lattice spanning the pixel index box `[0, W-1] x [0, H-1]`.
pub fn field_control_grid(field: &SdfField, cols: usize, rows: usize) -> Result<ControlGrid> {
    ControlGrid::uniform(
        0.0,
        (field.width - 1) as f64,
        0.0,
        (field.height - 1) as f64,
        cols,
        rows,
    )
}

/// Image of every pixel index `(col, row)` under the lattice, row-major.
pub fn warp_coordinates(grid: &ControlGrid, height: usize, width: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(height * width);
    for i in 0..height {
        let v = i as f64 / (height - 1) as f64;
        for j in 0..width {
            let u = j as f64 / (width - 1) as f64;
            out.push(grid.evaluate(u, v));
        }
    }
    out
}

/// Resamples `field` at the lattice-warped pixel positions.
pub fn distort_field_with_grid(field: &SdfField, grid: &ControlGrid) -> Result<SdfField> {
    let values = warp_coordinates(grid, field.height, field.width)
        .into_iter()
        .map(|[x, y]| field.bilinear(x, y))
        .collect();
    SdfField::new(field.height, field.width, values)
}

/// Random FFD distortion: every lattice point moves by `N(0, sigma_px^2)` in x and y.
pub fn distort_field<R: Rng + ?Sized>(
    field: &SdfField,
    grid_cols: usize,
    grid_rows: usize,
    sigma_px: f64,
    rng: &mut R,
) -> Result<SdfField> {
    let grid = field_control_grid(field, grid_cols, grid_rows)?;
    let grid = perturb_control_grid_xy(&grid, sigma_px, rng)?;
    distort_field_with_grid(field, &grid)
}

/// Normalized 1-D Gaussian taps for offsets `-r..=r`, `r = ceil(4 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (4.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-r..=r)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Half-sample symmetric reflection, `d c b a | a b c d | d c b a`.
fn reflect(i: i64, n: usize) -> usize {
    let p = 2 * n as i64;
    let i = i.rem_euclid(p);
    if i >= n as i64 {
        (p - 1 - i) as usize
    } else {
        i as usize
    }
}

/// Separable Gaussian blur with reflected borders; `sigma = 0` is the identity.
pub fn gaussian_smooth(field: &SdfField, sigma: f64) -> Result<SdfField> {
    if !(sigma >= 0.0) {
        return Err(Error::contract(format!("smoothing sigma {sigma} must be >= 0")));
    }
    if sigma == 0.0 {
        return Ok(field.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as i64;
    let (h, w) = (field.height, field.width);
    let mut tmp = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            tmp[i * w + j] = kernel
                .iter()
                .enumerate()
                .map(|(k, t)| t * field.values[i * w + reflect(j as i64 + k as i64 - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            out[i * w + j] = kernel
                .iter()
                .enumerate()
                .map(|(k, t)| t * tmp[reflect(i as i64 + k as i64 - r, h) * w + j])
                .sum();
        }
    }
    SdfField::new(h, w, out)
}

/// Binary material mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub height: usize,
    pub width: usize,
    pub cells: Vec<bool>,
}

impl Mask {
    pub fn filled(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Number of 4-neighbour pixel pairs with different material state.
    pub fn boundary_edges(&self) -> usize {
        let mut n = 0;
        for i in 0..self.height {
            for j in 0..self.width {
                let c = self.cells[i * self.width + j];
                if j + 1 < self.width && c != self.cells[i * self.width + j + 1] {
                    n += 1;
                }
                if i + 1 < self.height && c != self.cells[(i + 1) * self.width + j] {
                    n += 1;
                }
            }
        }
        n
    }
}

/// Material wherever the signed distance is non-positive.
pub fn threshold_field(field: &SdfField) -> Mask {
    Mask {
        height: field.height,
        width: field.width,
        cells: field.values.iter().map(|&v| v <= 0.0).collect(),
    }
}
