use std::path::Path;

use crate::error::{Error, Result};

/// Axis-aligned bounding box `(x_min, x_max, y_min, y_max)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn of(points: &[[f64; 2]]) -> Self {
        let mut b = BoundingBox {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for &[x, y] in points {
            b.x_min = b.x_min.min(x);
            b.x_max = b.x_max.max(x);
            b.y_min = b.y_min.min(y);
            b.y_max = b.y_max.max(y);
        }
        b
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
}

/// Ordered surface point loop in chord units.
#[derive(Clone, Debug, PartialEq)]
pub struct AirfoilShape {
    points: Vec<[f64; 2]>,
}

pub const MIN_AIRFOIL_POINTS: usize = 8;

impl AirfoilShape {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < MIN_AIRFOIL_POINTS {
            return Err(Error::geometry(format!(
                "airfoil needs at least {MIN_AIRFOIL_POINTS} points, got {}",
                points.len()
            )));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::geometry("airfoil has non-finite coordinates"));
        }
        let bbox = BoundingBox::of(&points);
        if bbox.width() <= 0.0 {
            return Err(Error::geometry("airfoil bounding box has zero width"));
        }
        Ok(Self { points })
    }

    pub(crate) fn from_points_unchecked(points: Vec<[f64; 2]>) -> Self {
        Self { points }
    }

    /// Inverse of [`AirfoilShape::to_design_vector`].
    pub fn from_design_vector(v: &[f64]) -> Result<Self> {
        if !v.len().is_multiple_of(2) {
            return Err(Error::Dimension {
                op: "airfoil",
                detail: format!("design vector of odd length {}", v.len()),
            });
        }
        Self::new(v.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::of(&self.points)
    }

    /// Flattened `[x0, y0, x1, y1, ...]`.
    pub fn to_design_vector(&self) -> Vec<f64> {
        self.points.iter().flatten().copied().collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            points: self.points.iter().map(|&[x, y]| [x * s, y * s]).collect(),
        }
    }

    /// Shoelace area; positive for counter-clockwise loops.
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let [x0, y0] = self.points[i];
                let [x1, y1] = self.points[(i + 1) % n];
                x0 * y1 - x1 * y0
            })
            .sum::<f64>()
            * 0.5
    }

    /// Resamples to `n` points spaced uniformly in arc length along the open polyline.
    pub fn resample(&self, n: usize) -> Result<Self> {
        if n < MIN_AIRFOIL_POINTS {
            return Err(Error::geometry(format!("cannot resample to {n} points")));
        }
        let mut cum = Vec::with_capacity(self.points.len());
        cum.push(0.0);
        for w in self.points.windows(2) {
            let d = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
            cum.push(cum.last().unwrap() + d);
        }
        let total = *cum.last().unwrap();
        if total <= 0.0 {
            return Err(Error::geometry("airfoil has zero arc length"));
        }
        let mut out = Vec::with_capacity(n);
        let mut seg = 0;
        for k in 0..n {
            let s = total * k as f64 / (n - 1) as f64;
            while seg + 2 < cum.len() && cum[seg + 1] < s {
                seg += 1;
            }
            let len = cum[seg + 1] - cum[seg];
            let t = if len > 0.0 { ((s - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
            let [x0, y0] = self.points[seg];
            let [x1, y1] = self.points[seg + 1];
            out.push([x0 + t * (x1 - x0), y0 + t * (y1 - y0)]);
        }
        Self::new(out)
    }
}

fn parse_pair(line: &str) -> Option<(f64, f64)> {
    let mut it = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty());
    let x = it.next()?.parse().ok()?;
    let y = it.next()?.parse().ok()?;
    if it.next().is_some() {
        return None;
    }
    Some((x, y))
}

/// Parses an airfoil coordinate file.
///
/// Accepts the two common database layouts: Selig (trailing edge over the
/// upper surface to the leading edge and back along the lower surface) and
/// Lednicer (a point-count line, then upper and lower surfaces each from the
/// leading edge). Either way the result runs counter-clockwise starting at
/// the trailing edge on the upper surface.
pub fn parse_airfoil_coords(text: &str) -> Result<AirfoilShape> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty()).peekable();
    if let Some(first) = lines.peek() {
        if parse_pair(first).is_none() {
            lines.next();
        }
    }
    let rows: Vec<&str> = lines.collect();
    let mut pairs = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let (x, y) = parse_pair(row)
            .ok_or_else(|| Error::geometry(format!("line {}: expected \"x y\", got {row:?}", i + 1)))?;
        pairs.push([x, y]);
    }

    // Lednicer: the first numeric line holds point counts, not coordinates.
    let points = match pairs.first() {
        Some(&[nu, nl])
            if nu >= 2.0
                && nl >= 2.0
                && nu.fract() == 0.0
                && nl.fract() == 0.0
                && (nu + nl) as usize == pairs.len() - 1 =>
        {
            let nu = nu as usize;
            let upper = &pairs[1..1 + nu];
            let lower = &pairs[1 + nu..];
            let mut pts: Vec<[f64; 2]> = upper.iter().rev().copied().collect();
            let skip = usize::from(lower.first() == upper.first());
            pts.extend(lower.iter().skip(skip).copied());
            pts
        }
        _ => pairs,
    };

    let mut shape = AirfoilShape::new(points)?;
    if shape.signed_area() < 0.0 {
        shape.points.reverse();
    }
    // start at the trailing-edge point with the largest y among max-x ties
    let mut start = 0;
    for (i, p) in shape.points.iter().enumerate() {
        let best = shape.points[start];
        if p[0] > best[0] || (p[0] == best[0] && p[1] > best[1]) {
            start = i;
        }
    }
    shape.points.rotate_left(start);
    Ok(shape)
}

pub fn load_airfoil_file(path: &Path) -> Result<AirfoilShape> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_airfoil_coords(&text).map_err(|e| match e {
        Error::Geometry(msg) => Error::Geometry(format!("{}: {msg}", path.display())),
        other => other,
    })
}
