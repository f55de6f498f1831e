//! Cheap analytic stand-ins for the flow and electromagnetic solvers.

use serde::{Deserialize, Serialize};

use super::QoiFunction;
use crate::error::{Error, Result};
use crate::geometry::{threshold_field, AirfoilShape, SdfField};
use crate::hgan::{DesignGenerator, LatentConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticQoi {
    AirfoilProxy,
    MetasurfaceProxy,
    TwoPeakTest,
}

pub fn synthetic_qoi(kind: SyntheticQoi) -> QoiFunction {
    match kind {
        SyntheticQoi::AirfoilProxy => QoiFunction::new("airfoil_proxy", airfoil_proxy),
        SyntheticQoi::MetasurfaceProxy => QoiFunction::new("metasurface_proxy", metasurface_proxy),
        SyntheticQoi::TwoPeakTest => {
            let tp = TwoPeak::default();
            QoiFunction::new("two_peak_test", move |x| tp.eval(x))
        }
    }
}

/// Coefficients of the lift-to-drag proxy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AirfoilProxyParams {
    /// Angle of attack in radians.
    pub alpha: f64,
    pub cd0: f64,
    pub k_thickness: f64,
    pub k_rough: f64,
    pub k_induced: f64,
}

pub const AIRFOIL_PROXY: AirfoilProxyParams = AirfoilProxyParams {
    alpha: 0.05,
    cd0: 0.006,
    k_thickness: 0.08,
    k_rough: 0.002,
    k_induced: 0.01,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AirfoilProxyTerms {
    /// Mean camber over the chord, chord-normalized.
    pub camber: f64,
    /// Largest thickness, chord-normalized.
    pub thickness: f64,
    /// Mean squared curvature of both surfaces.
    pub roughness: f64,
    pub cl: f64,
    pub cd: f64,
    pub value: f64,
}

/// `CL / CD` of a flat plate: zero camber, thickness and roughness.
pub fn flat_plate_baseline() -> f64 {
    let p = AIRFOIL_PROXY;
    let cl = 2.0 * std::f64::consts::PI * p.alpha;
    cl / (p.cd0 + p.k_induced * cl * cl)
}

/// Linear interpolation on `(x, y)` points sorted by x, clamped at the ends.
fn interp(pts: &[[f64; 2]], x: f64) -> f64 {
    let k = pts.partition_point(|p| p[0] < x);
    if k == 0 {
        return pts[0][1];
    }
    if k == pts.len() {
        return pts[k - 1][1];
    }
    let [x0, y0] = pts[k - 1];
    let [x1, y1] = pts[k];
    if x1 - x0 <= 0.0 {
        return y1;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

pub fn airfoil_proxy_terms(design: &[f64]) -> Result<AirfoilProxyTerms> {
    let shape = AirfoilShape::from_design_vector(design).map_err(|e| Error::Qoi(e.to_string()))?;
    let pts = shape.points();
    let bb = shape.bbox();
    let chord = bb.width();
    let le = pts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1[0].total_cmp(&b.1[0]))
        .map(|(i, _)| i)
        .expect("nonempty");
    let norm = |p: &[f64; 2]| [(p[0] - bb.x_min) / chord, p[1] / chord];
    let mut upper: Vec<[f64; 2]> = pts[..=le].iter().map(norm).collect();
    let mut lower: Vec<[f64; 2]> = pts[le..].iter().chain(std::iter::once(&pts[0])).map(norm).collect();
    upper.sort_by(|a, b| a[0].total_cmp(&b[0]));
    lower.sort_by(|a, b| a[0].total_cmp(&b[0]));

    let stations: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
    let (mut camber, mut thickness) = (0.0, f64::NEG_INFINITY);
    for &x in &stations {
        let (yu, yl) = (interp(&upper, x), interp(&lower, x));
        camber += 0.5 * (yu + yl);
        thickness = thickness.max(yu - yl);
    }
    camber /= stations.len() as f64;

    let h = 0.1;
    let mut roughness = 0.0;
    let mut count = 0;
    for surf in [&upper, &lower] {
        let y: Vec<f64> = (1..10).map(|i| interp(surf, i as f64 * h)).collect();
        for w in y.windows(3) {
            roughness += ((w[2] - 2.0 * w[1] + w[0]) / (h * h)).powi(2);
            count += 1;
        }
    }
    roughness /= count as f64;

    let p = AIRFOIL_PROXY;
    let cl = 2.0 * std::f64::consts::PI * (p.alpha + 2.0 * camber);
    let cd = p.cd0 + p.k_thickness * thickness * thickness + p.k_rough * roughness + p.k_induced * cl * cl;
    let value = cl / cd;
    if !value.is_finite() {
        return Err(Error::Qoi(format!("airfoil proxy produced {value}")));
    }
    Ok(AirfoilProxyTerms {
        camber,
        thickness,
        roughness,
        cl,
        cd,
        value,
    })
}

/// Lift-to-drag proxy: thin-airfoil lift from mean camber, drag from
/// thickness, surface curvature and induced lift.
pub fn airfoil_proxy(design: &[f64]) -> Result<f64> {
    airfoil_proxy_terms(design).map(|t| t.value)
}

/// Absorbance proxy on a square SDF: peaks at half filling and grows with boundary length.
pub fn metasurface_proxy(design: &[f64]) -> Result<f64> {
    let res = (design.len() as f64).sqrt().round() as usize;
    if res * res != design.len() {
        return Err(Error::Qoi(format!("{} values do not form a square field", design.len())));
    }
    let field = SdfField::new(res, res, design.to_vec()).map_err(|e| Error::Qoi(e.to_string()))?;
    let mask = threshold_field(&field);
    let fill = mask.filled() as f64 / design.len() as f64;
    let perimeter = mask.boundary_edges() as f64 / res as f64;
    Ok(4.0 * fill * (1.0 - fill) * perimeter / (perimeter + 2.0))
}

/// Isotropic Gaussian bump.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub center: [f64; 2],
    pub height: f64,
    pub width: f64,
}

impl Peak {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let d2 = (x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2);
        self.height * (-d2 / (2.0 * self.width * self.width)).exp()
    }

    /// `E[eval(x + d)]` for `d ~ N(0, sigma^2 I)`.
    pub fn expected(&self, x: &[f64], sigma: f64) -> f64 {
        let s2 = self.width * self.width + sigma * sigma;
        let d2 = (x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2);
        self.height * self.width * self.width / s2 * (-d2 / (2.0 * s2)).exp()
    }
}

/// Tall narrow peak plus lower broad peak on a 2-D design.
///
/// The narrow peak wins at its exact optimum, the broad one once the design
/// is perturbed: the standard and robust optima differ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPeak {
    pub narrow: Peak,
    pub broad: Peak,
}

impl Default for TwoPeak {
    fn default() -> Self {
        Self {
            narrow: Peak {
                center: [0.25, 0.7],
                height: 1.0,
                width: 0.1,
            },
            broad: Peak {
                center: [0.72, 0.3],
                height: 0.75,
                width: 0.3,
            },
        }
    }
}

impl TwoPeak {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != 2 {
            return Err(Error::Qoi(format!("two-peak test takes 2 values, got {}", x.len())));
        }
        Ok(self.narrow.eval(x) + self.broad.eval(x))
    }

    pub fn expected(&self, x: &[f64], sigma: f64) -> f64 {
        self.narrow.expected(x, sigma) + self.broad.expected(x, sigma)
    }
}

pub fn two_peak_test(x: &[f64]) -> Result<f64> {
    TwoPeak::default().eval(x)
}

/// Analytic generator for the two-peak test: `design = c_p + scale * c_c`, no noise code.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoPeakEmbedding {
    latent: LatentConfig,
    pub scale: f64,
}

impl TwoPeakEmbedding {
    /// `scale` chosen so each design coordinate moves with standard deviation `sigma`.
    pub fn with_sigma(sigma: f64) -> Self {
        let latent = LatentConfig::new(2, 2, 0);
        let scale = sigma / latent.child_var.sqrt();
        Self { latent, scale }
    }

    /// Design-space standard deviation of a fabricated coordinate.
    pub fn sigma(&self) -> f64 {
        self.scale * self.latent.child_var.sqrt()
    }
}

impl Default for TwoPeakEmbedding {
    fn default() -> Self {
        Self::with_sigma(0.1)
    }
}

impl DesignGenerator for TwoPeakEmbedding {
    fn latent(&self) -> &LatentConfig {
        &self.latent
    }

    fn design_dims(&self) -> usize {
        2
    }

    fn generate(&self, c_p: &[f64], c_c: &[f64], _z: &[f64]) -> Result<Vec<f64>> {
        if c_p.len() != 2 || c_c.len() != 2 {
            return Err(Error::Dimension {
                op: "two_peak_embedding",
                detail: format!("c_p {} and c_c {} values, expected 2 each", c_p.len(), c_c.len()),
            });
        }
        Ok(vec![c_p[0] + self.scale * c_c[0], c_p[1] + self.scale * c_c[1]])
    }
}
