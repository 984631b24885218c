//! Magnetic susceptibility of the ground state.
//!
//! With the field along `z` and the molecule in the x-z plane, the energy
//! expands as `E(B) = E(0) - chi B^2 / 2 + ...` (the linear coefficient
//! vanishes without spin). The diamagnetic part is the zero-field
//! expectation value `-<x^2 + y^2>/4`; the total susceptibility comes from
//! the curvature of the equilibrium energy in `B`, and the paramagnetic part
//! is their difference.

use alloc::format;
use alloc::vec::Vec;

use crate::electronic::{ElectronicIntegrator, Equilibrium, Geometry, Moments, QuadratureSettings, TrialParameters};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, Matrix};
use crate::math;

/// Second moments with a refined-rule error check.
pub fn position_moments(params: &TrialParameters, geometry: &Geometry, b: f64, settings: &QuadratureSettings) -> Result<Moments> {
    let mut integ = ElectronicIntegrator::new(*geometry, b, settings)?;
    let coarse = integ.moments(params)?;
    let mut fine = ElectronicIntegrator::with_order(*geometry, b, integ.order().refined(), settings.tail)?;
    let m = fine.moments(params)?;
    let err = [(m.x2, coarse.x2), (m.y2, coarse.y2), (m.z2, coarse.z2)].iter().map(|(a, c)| ((a - c) / a).abs()).fold(0.0, f64::max);
    if err > settings.target {
        return Err(Error::QuadratureNotConverged { achieved: err, target: settings.target });
    }
    Ok(m)
}

/// Diamagnetic susceptibility at inclination `theta` from the zero-field,
/// zero-inclination moments (rotation about `y` maps `x^2` into
/// `x^2 cos^2 + z^2 sin^2`).
pub fn diamagnetic_chi(theta: f64, x2_0: f64, z2_0: f64) -> Result<f64> {
    if !(x2_0.is_finite() && z2_0.is_finite() && x2_0 > 0.0 && z2_0 > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidParameters(format!("moments must be positive: x2 = {x2_0}, z2 = {z2_0}")));
    }
    let c2 = math::cos(theta) * math::cos(theta);
    let s2 = 1.0 - c2;
    Ok(-0.25 * (x2_0 * (1.0 + c2) + z2_0 * s2))
}

/// `X = -<rho^2>/4` for moments taken with the field-dependent wavefunction.
pub fn x_value(m: &Moments) -> f64 {
    -0.25 * (m.x2 + m.y2)
}

/// One sample of `X(B, theta)` at the field-dependent equilibrium.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct XSample {
    pub b: f64,
    pub theta: f64,
    pub r_eq: f64,
    pub energy: f64,
    pub x: f64,
    pub moments: Moments,
}

/// Evaluates `X` at an already located equilibrium.
pub fn x_of_b(theta: f64, b: f64, eq: &Equilibrium, settings: &QuadratureSettings) -> Result<XSample> {
    let geometry = Geometry::new(eq.r_eq, theta)?;
    let moments = position_moments(&eq.params, &geometry, b, settings)?;
    Ok(XSample { b, theta: geometry.theta, r_eq: eq.r_eq, energy: eq.energy, x: x_value(&moments), moments })
}

/// Which closed form a [`FitModel`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FitKind {
    /// `c0 + c1 B + c2 B^2 + (d0 + d1 B + d2 B^2) cos^2 theta`, coefficients
    /// ordered `[c0, c1, c2, d0, d1, d2]`.
    XSurface,
    /// `c0 + d0 cos^2 theta`.
    Diamagnetic,
    /// `c0 + c1 cos^2 theta + c2 cos^2 2 theta`.
    TotalAngular,
    /// `E0 + E2 B^2 + E4 B^4`.
    EvenQuartic,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitModel {
    pub kind: FitKind,
    pub coefficients: Vec<f64>,
    pub rms: f64,
    pub condition: f64,
    pub samples: usize,
}

impl FitModel {
    fn basis(kind: FitKind, b: f64, theta: f64) -> Vec<f64> {
        let c2 = math::cos(theta) * math::cos(theta);
        match kind {
            FitKind::XSurface => alloc::vec![1.0, b, b * b, c2, b * c2, b * b * c2],
            FitKind::Diamagnetic => alloc::vec![1.0, c2],
            FitKind::TotalAngular => {
                let c22 = math::cos(2.0 * theta) * math::cos(2.0 * theta);
                alloc::vec![1.0, c2, c22]
            }
            FitKind::EvenQuartic => alloc::vec![1.0, b * b, b * b * b * b],
        }
    }

    pub fn evaluate(&self, b: f64, theta: f64) -> f64 {
        Self::basis(self.kind, b, theta).iter().zip(&self.coefficients).map(|(f, c)| f * c).sum()
    }

    fn fit(kind: FitKind, points: &[(f64, f64, f64)]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = points.iter().map(|&(b, t, _)| Self::basis(kind, b, t)).collect();
        let n = rows.first().map_or(0, Vec::len);
        let a = Matrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        let rhs: Vec<f64> = points.iter().map(|p| p.2).collect();
        let ls = least_squares(&a, &rhs)?;
        Ok(Self { kind, coefficients: ls.coefficients, rms: ls.rms, condition: ls.condition, samples: points.len() })
    }
}

fn max_gap(values: &mut Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

/// Least-squares fit of `X(B, theta)` samples `(b, theta, x)` to the
/// quadratic-in-`B`, `cos^2 theta` surface. The sample set must be at least as
/// dense as a 0.01 `B0` by 15 degree grid.
pub fn fit_x_surface(samples: &[(f64, f64, f64)]) -> Result<FitModel> {
    let mut bs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let mut ts: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (gb, gt) = (max_gap(&mut bs), max_gap(&mut ts));
    if bs.len() < 3 || ts.len() < 2 {
        return Err(Error::RankDeficient(format!("{} field values x {} angles", bs.len(), ts.len())));
    }
    if gb > 0.01 + 1e-9 {
        return Err(Error::InsufficientResolution { step: gb, max: 0.01 });
    }
    if gt > 15f64.to_radians() + 1e-9 {
        return Err(Error::InsufficientResolution { step: gt.to_degrees(), max: 15.0 });
    }
    FitModel::fit(FitKind::XSurface, samples)
}

/// Fit of zero-field diamagnetic susceptibilities `(theta, chi_d)`.
pub fn fit_diamagnetic_angular(samples: &[(f64, f64)]) -> Result<FitModel> {
    let pts: Vec<(f64, f64, f64)> = samples.iter().map(|&(t, c)| (0.0, t, c)).collect();
    FitModel::fit(FitKind::Diamagnetic, &pts)
}

/// Fit of total susceptibilities `(theta, chi)` to
/// `c0 + c1 cos^2 theta + c2 cos^2 2theta`.
pub fn fit_total_angular(samples: &[(f64, f64)]) -> Result<FitModel> {
    let pts: Vec<(f64, f64, f64)> = samples.iter().map(|&(t, c)| (0.0, t, c)).collect();
    FitModel::fit(FitKind::TotalAngular, &pts)
}

/// Total susceptibility at one inclination with its fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TotalChi {
    pub theta: f64,
    pub chi: f64,
    pub fit: FitModel,
}

/// Largest acceptable condition number of the even-quartic design matrix.
pub const TOTAL_CHI_CONDITION_LIMIT: f64 = 1e6;
/// Field strengths used for the total susceptibility.
pub const TOTAL_CHI_FIELDS: [f64; 5] = [0.0, 0.01, 0.02, 0.03, 0.04];

/// Fits equilibrium energies `(b, E_min)` by `E0 + E2 B^2 + E4 B^4` and
/// returns `chi = -2 E2`.
pub fn total_chi(theta: f64, samples: &[(f64, f64)]) -> Result<TotalChi> {
    if samples.len() < 5 {
        return Err(Error::RankDeficient(format!("{} field samples, need at least 5", samples.len())));
    }
    if !samples.iter().any(|s| s.0 == 0.0) {
        return Err(Error::InvalidParameters("field samples must include B = 0".into()));
    }
    if samples.iter().any(|s| !(0.0..=0.04 + 1e-12).contains(&s.0)) {
        return Err(Error::InvalidParameters("field samples must lie in [0, 0.04] B0".into()));
    }
    let pts: Vec<(f64, f64, f64)> = samples.iter().map(|&(b, e)| (b, theta, e)).collect();
    let fit = FitModel::fit(FitKind::EvenQuartic, &pts)?;
    if fit.condition > TOTAL_CHI_CONDITION_LIMIT {
        return Err(Error::IllConditioned { condition: fit.condition, limit: TOTAL_CHI_CONDITION_LIMIT });
    }
    Ok(TotalChi { theta, chi: -2.0 * fit.coefficients[1], fit })
}

pub fn paramagnetic_chi(chi_total: f64, chi_d: f64) -> f64 {
    chi_total - chi_d
}

/// One row of the susceptibility table.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SusceptibilityRecord {
    pub theta: f64,
    pub x2: f64,
    pub y2: f64,
    pub z2: f64,
    pub chi_d: f64,
    pub chi_p: f64,
    pub chi_total: f64,
}

impl SusceptibilityRecord {
    /// Builds a row from the zero-field moments at this inclination, the
    /// zero-inclination reference moments and the total susceptibility.
    pub fn new(theta: f64, moments: &Moments, x2_0: f64, z2_0: f64, chi_total: f64) -> Result<Self> {
        let chi_d = diamagnetic_chi(theta, x2_0, z2_0)?;
        Ok(Self { theta, x2: moments.x2, y2: moments.y2, z2: moments.z2, chi_d, chi_p: paramagnetic_chi(chi_total, chi_d), chi_total })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;

    #[test]
    fn diamagnetic_rotation_formula() {
        let (x2, z2) = (0.64036, 1.11131);
        assert!((diamagnetic_chi(0.0, x2, z2).unwrap() - (-0.32018)).abs() < 1e-5);
        assert!((diamagnetic_chi(FRAC_PI_2, x2, z2).unwrap() - (-0.43792)).abs() < 1e-5);
        // Isotropic moments: -x2/2 for every angle.
        for t in [0.0, 0.3, 0.8, 1.2, FRAC_PI_2] {
            assert!((diamagnetic_chi(t, 0.8, 0.8).unwrap() + 0.4).abs() < 1e-15);
        }
        assert!(diamagnetic_chi(0.1, -1.0, 1.0).is_err());
    }

    #[test]
    fn paramagnetic_difference() {
        assert!((paramagnetic_chi(-0.40345, -0.43792) - 0.03447).abs() < 1e-12);
        assert_eq!(paramagnetic_chi(-0.32018, -0.32018), 0.0);
        assert!((paramagnetic_chi(-0.36914, -0.37906) - 0.00992).abs() < 1e-12);
    }

    fn sample_grid() -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for ib in 0..=20 {
            for it in 0..=6 {
                out.push((0.01 * ib as f64, (15.0 * it as f64).to_radians()));
            }
        }
        out
    }

    #[test]
    fn x_surface_recovers_synthetic_coefficients() {
        let truth = [-0.43795, 0.013498, 0.37103, 0.11774, -0.01577, -0.141];
        let model = FitModel { kind: FitKind::XSurface, coefficients: truth.to_vec(), rms: 0.0, condition: 1.0, samples: 0 };
        let samples: Vec<(f64, f64, f64)> = sample_grid().into_iter().map(|(b, t)| (b, t, model.evaluate(b, t))).collect();
        let fit = fit_x_surface(&samples).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!(fit.rms < 1e-14);
        // Model at B = 0.2, theta = 90 deg.
        assert!((model.evaluate(0.2, FRAC_PI_2) - (-0.4204084)).abs() < 1e-6);
        assert!((model.evaluate(0.0, 0.0) - (-0.32021)).abs() < 1e-12);
    }

    #[test]
    fn x_surface_rejects_sparse_or_degenerate_samples() {
        let sparse: Vec<(f64, f64, f64)> =
            sample_grid().into_iter().filter(|(b, _)| *b < 0.05 || *b > 0.15).map(|(b, t)| (b, t, 0.0)).collect();
        assert!(matches!(fit_x_surface(&sparse), Err(Error::InsufficientResolution { .. })));
        let single_angle: Vec<(f64, f64, f64)> = (0..=20).map(|i| (0.01 * i as f64, 0.0, 1.0)).collect();
        assert!(fit_x_surface(&single_angle).is_err());
    }

    #[test]
    fn even_quartic_curvature() {
        let chi = -0.35;
        let samples: Vec<(f64, f64)> = TOTAL_CHI_FIELDS.iter().map(|&b| (b, -0.6 - 0.5 * chi * b * b + 0.7 * b * b * b * b)).collect();
        let t = total_chi(0.3, &samples).unwrap();
        assert!((t.chi - chi).abs() < 1e-9);
        assert!(t.fit.condition < TOTAL_CHI_CONDITION_LIMIT);
        assert!(total_chi(0.3, &samples[1..]).is_err());
        let mut shifted = samples.clone();
        shifted[4].0 = 0.08;
        assert!(total_chi(0.3, &shifted).is_err());
        let no_zero: Vec<(f64, f64)> = (1..=5).map(|i| (0.008 * i as f64, -0.6)).collect();
        assert!(total_chi(0.3, &no_zero).is_err());
    }

    #[test]
    fn angular_fit_of_total_chi() {
        let f = |t: f64| -0.41067 + 0.08260 * math::cos(t).powi(2) + 0.007620 * math::cos(2.0 * t).powi(2);
        let samples: Vec<(f64, f64)> = (0..=6).map(|i| (15f64 * i as f64).to_radians()).map(|t| (t, f(t))).collect();
        let fit = fit_total_angular(&samples).unwrap();
        assert!((fit.coefficients[0] + 0.41067).abs() < 1e-12);
        assert!((fit.coefficients[1] - 0.08260).abs() < 1e-12);
        assert!((fit.coefficients[2] - 0.007620).abs() < 1e-12);
    }
}
