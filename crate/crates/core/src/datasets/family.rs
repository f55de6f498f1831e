use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AirfoilShape, MIN_AIRFOIL_POINTS};

/// How many independent shape parameters the family exposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyDof {
    /// One scalar drives camber, camber position and thickness together.
    One,
    /// Camber, camber position and thickness vary independently.
    Three,
}

/// Smooth four-digit-style airfoil family, standing in for an external database.
///
/// Thickness follows the closed-trailing-edge polynomial
/// `5t (0.2969 sqrt(x) - 0.1260 x - 0.3516 x^2 + 0.2843 x^3 - 0.1036 x^4)`;
/// the mean line is the usual two-arc parabola with maximum `m` at `p`.
/// Points are cosine-spaced, starting at the trailing edge and running over
/// the upper surface to the leading edge and back along the lower surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AirfoilFamily {
    pub max_camber: (f64, f64),
    pub camber_position: (f64, f64),
    pub thickness: (f64, f64),
    pub n_points: usize,
    pub dof: FamilyDof,
}

impl Default for AirfoilFamily {
    fn default() -> Self {
        Self {
            max_camber: (0.0, 0.06),
            camber_position: (0.3, 0.5),
            thickness: (0.08, 0.16),
            n_points: 64,
            dof: FamilyDof::Three,
        }
    }
}

fn lerp((lo, hi): (f64, f64), t: f64) -> f64 {
    lo + t * (hi - lo)
}

pub fn thickness_half(t: f64, x: f64) -> f64 {
    5.0 * t * (0.2969 * x.sqrt() - 0.1260 * x - 0.3516 * x * x + 0.2843 * x.powi(3) - 0.1036 * x.powi(4))
}

pub fn camber_line(m: f64, p: f64, x: f64) -> f64 {
    if m == 0.0 {
        0.0
    } else if x < p {
        m / (p * p) * (2.0 * p * x - x * x)
    } else {
        m / ((1.0 - p) * (1.0 - p)) * ((1.0 - 2.0 * p) + 2.0 * p * x - x * x)
    }
}

impl AirfoilFamily {
    pub fn one_parameter(n_points: usize) -> Self {
        Self {
            max_camber: (0.0, 0.05),
            camber_position: (0.4, 0.4),
            thickness: (0.10, 0.14),
            n_points,
            dof: FamilyDof::One,
        }
    }

    pub fn n_params(&self) -> usize {
        match self.dof {
            FamilyDof::One => 1,
            FamilyDof::Three => 3,
        }
    }

    /// Shape at explicit `(camber, position, thickness)`.
    pub fn shape_from(&self, m: f64, p: f64, t: f64) -> Result<AirfoilShape> {
        if self.n_points < MIN_AIRFOIL_POINTS || !self.n_points.is_multiple_of(2) {
            return Err(Error::contract(format!(
                "airfoil family needs an even point count >= {MIN_AIRFOIL_POINTS}, got {}",
                self.n_points
            )));
        }
        if !(t > 0.0) || !(0.0 < p && p < 1.0) {
            return Err(Error::geometry(format!("invalid airfoil parameters m={m} p={p} t={t}")));
        }
        let n = self.n_points;
        let points = (0..n)
            .map(|k| {
                let s = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                let x = 0.5 * (1.0 + s.cos());
                let yc = camber_line(m, p, x);
                let yt = thickness_half(t, x);
                let y = if 2 * k <= n { yc + yt } else { yc - yt };
                [x, y]
            })
            .collect();
        AirfoilShape::new(points)
    }

    /// Shape at unit-cube coordinates; only the first [`AirfoilFamily::n_params`] are read.
    pub fn shape(&self, unit: &[f64]) -> Result<AirfoilShape> {
        if unit.len() < self.n_params() {
            return Err(Error::contract(format!(
                "family takes {} parameters, got {}",
                self.n_params(),
                unit.len()
            )));
        }
        let (a, b, c) = match self.dof {
            FamilyDof::One => (unit[0], unit[0], unit[0]),
            FamilyDof::Three => (unit[0], unit[1], unit[2]),
        };
        self.shape_from(
            lerp(self.max_camber, a),
            lerp(self.camber_position, b),
            lerp(self.thickness, c),
        )
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec<f64>, AirfoilShape)> {
        let unit: Vec<f64> = (0..self.n_params()).map(|_| rng.random()).collect();
        let shape = self.shape(&unit)?;
        Ok((unit, shape))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_is_deterministic_and_valid() {
        let fam = AirfoilFamily::default();
        let a = fam.shape(&[0.3, 0.2, 0.9]).unwrap();
        let b = fam.shape(&[0.3, 0.2, 0.9]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
        assert!(a.signed_area() > 0.0);
        let bb = a.bbox();
        assert!((bb.x_max - 1.0).abs() < 1e-12 && bb.x_min.abs() < 1e-12);
        assert!(bb.height() > 0.05);
    }

    #[test]
    fn symmetric_member_has_zero_camber() {
        let fam = AirfoilFamily::default();
        let s = fam.shape_from(0.0, 0.4, 0.12).unwrap();
        let n = s.len();
        for k in 1..n / 2 {
            let up = s.points()[k];
            let lo = s.points()[n - k];
            assert!((up[0] - lo[0]).abs() < 1e-12);
            assert!((up[1] + lo[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn one_parameter_family_moves_all_features() {
        let fam = AirfoilFamily::one_parameter(32);
        assert_eq!(fam.n_params(), 1);
        let thin = fam.shape(&[0.0]).unwrap();
        let thick = fam.shape(&[1.0]).unwrap();
        assert!(thick.bbox().height() > thin.bbox().height());
    }

    #[test]
    fn odd_point_counts_rejected() {
        let fam = AirfoilFamily {
            n_points: 33,
            ..AirfoilFamily::default()
        };
        assert!(fam.shape(&[0.5, 0.5, 0.5]).is_err());
    }
}
