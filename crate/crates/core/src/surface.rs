//! Two-dimensional potential surfaces `V(R, theta)` at fixed field strength,
//! their interpolation and the hindered-rotor decomposition
//! `V(R, 0) + V90(R) sin^2 theta (+ V90_2(R) sin^2 2theta)`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use crate::electronic::{scan_curve, EnergyPoint, OptimizerBudget};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, Matrix};
use crate::math;
use crate::spline::CubicSpline;
use crate::units::GridSpec;

/// Default production distances: `(r_min, r_max, n_r)`, geometric spacing.
pub const DEFAULT_R_GRID: (f64, f64, usize) = (0.3, 10.0, 66);
/// Default production inclinations, degrees.
pub const DEFAULT_THETA_STEP_DEG: f64 = 15.0;
/// Distances (bohr) where node failures make a surface unusable.
pub const WELL_REGION: (f64, f64) = (1.2, 4.0);
/// Coarsest inclination spacing accepted by the rotor decomposition.
pub const MAX_THETA_STEP_DEG: f64 = 15.0;

/// How a surface was generated.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Provenance {
    pub quadrature_target: f64,
    pub max_evals: usize,
    pub f_tol: f64,
    pub seed: u64,
    pub code_version: String,
    /// `(i_r, j_theta)` of nodes whose optimizer stopped on its budget.
    pub flagged: Vec<[usize; 2]>,
}

impl Provenance {
    pub fn from_budget(budget: &OptimizerBudget) -> Self {
        Self {
            quadrature_target: budget.quadrature.target,
            max_evals: budget.max_evals,
            f_tol: budget.f_tol,
            seed: budget.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            flagged: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PotentialSurface {
    pub b: f64,
    pub r_grid: Vec<f64>,
    /// Radians.
    pub theta_grid: Vec<f64>,
    /// `energies[i][j]` at `(r_grid[i], theta_grid[j])`, hartree.
    pub energies: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[1] > w[0])
}

impl PotentialSurface {
    pub fn new(b: f64, r_grid: Vec<f64>, theta_grid: Vec<f64>, energies: Vec<Vec<f64>>, provenance: Provenance) -> Result<Self> {
        let s = Self { b, r_grid, theta_grid, energies, provenance };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b >= 0.0) {
            return Err(Error::NegativeField(self.b));
        }
        if self.r_grid.is_empty() || !strictly_increasing(&self.r_grid) || self.r_grid[0] <= 0.0 {
            return Err(Error::InvalidGrid("r_grid must be positive and strictly increasing".into()));
        }
        if self.theta_grid.is_empty()
            || !strictly_increasing(&self.theta_grid)
            || self.theta_grid[0] < -1e-12
            || self.theta_grid[self.theta_grid.len() - 1] > FRAC_PI_2 + 1e-12
        {
            return Err(Error::InvalidGrid("theta_grid must be strictly increasing within [0, pi/2]".into()));
        }
        if self.energies.len() != self.r_grid.len() || self.energies.iter().any(|row| row.len() != self.theta_grid.len()) {
            return Err(Error::Mismatch(format!("energy matrix must be {} x {}", self.r_grid.len(), self.theta_grid.len())));
        }
        if self.energies.iter().flatten().any(|e| !e.is_finite()) {
            return Err(Error::InvalidGrid("energies must be finite".into()));
        }
        Ok(())
    }

    /// Energies along R at inclination index `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.energies.iter().map(|row| row[j]).collect()
    }

    /// Index of an inclination on the grid, within 1e-9 rad.
    pub fn theta_index(&self, theta: f64) -> Option<usize> {
        self.theta_grid.iter().position(|&t| (t - theta).abs() < 1e-9)
    }

    /// Lowest tabulated node as `(i_r, j_theta, energy)`.
    pub fn minimum(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::INFINITY);
        for (i, row) in self.energies.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                if e < best.2 {
                    best = (i, j, e);
                }
            }
        }
        best
    }

    /// Largest spread across inclinations at fixed R.
    pub fn theta_spread(&self) -> f64 {
        self.energies
            .iter()
            .map(|row| {
                let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    pub fn interpolator(&self) -> Result<SurfaceInterpolator> {
        if self.r_grid.len() < 2 {
            return Err(Error::InvalidGrid("interpolation needs at least two R nodes".into()));
        }
        let columns =
            (0..self.theta_grid.len()).map(|j| CubicSpline::new(self.r_grid.clone(), self.column(j))).collect::<Result<Vec<_>>>()?;
        Ok(SurfaceInterpolator { theta: self.theta_grid.clone(), columns })
    }
}

/// Natural splines in R per tabulated inclination, combined by a natural
/// spline across inclinations at query time.
#[derive(Debug, Clone)]
pub struct SurfaceInterpolator {
    theta: Vec<f64>,
    columns: Vec<CubicSpline>,
}

impl SurfaceInterpolator {
    pub fn eval(&self, r: f64, theta: f64) -> Result<f64> {
        let outside = Error::Extrapolation { r, theta };
        let (t0, t1) = (self.theta[0], self.theta[self.theta.len() - 1]);
        if !(theta >= t0 - 1e-12 && theta <= t1 + 1e-12) {
            return Err(outside);
        }
        let mut values = Vec::with_capacity(self.columns.len());
        for c in &self.columns {
            values.push(c.eval(r).ok_or(Error::Extrapolation { r, theta })?);
        }
        if let Some(j) = self.theta.iter().position(|&t| (t - theta).abs() < 1e-12) {
            return Ok(values[j]);
        }
        CubicSpline::new(self.theta.clone(), values)?.eval(theta).ok_or(outside)
    }
}

/// Records from one column of optimized points, warm-started along R.
pub fn build_column(theta: f64, b: f64, r_grid: &[f64], budget: &OptimizerBudget) -> Result<Vec<Result<EnergyPoint>>> {
    scan_curve(theta, b, r_grid, None, budget)
}

/// Assembles per-column optimization results into a surface. Nodes whose
/// optimizer ran out of budget are flagged in the provenance; an error at
/// any node is fatal, reported as [`Error::SurfaceUnusable`] when it lies in
/// the well region.
pub fn assemble_surface(
    b: f64,
    r_grid: &[f64],
    theta_grid: &[f64],
    columns: Vec<Vec<Result<EnergyPoint>>>,
    budget: &OptimizerBudget,
) -> Result<PotentialSurface> {
    if columns.len() != theta_grid.len() || columns.iter().any(|c| c.len() != r_grid.len()) {
        return Err(Error::Mismatch("column results do not match the grid".into()));
    }
    let mut provenance = Provenance::from_budget(budget);
    let mut energies = alloc::vec![alloc::vec![0.0; theta_grid.len()]; r_grid.len()];
    let in_well = |r: f64| r >= WELL_REGION.0 && r <= WELL_REGION.1;
    let mut well_failures: Vec<(f64, f64)> = Vec::new();
    let mut other_failure: Option<Error> = None;
    for (j, col) in columns.into_iter().enumerate() {
        for (i, node) in col.into_iter().enumerate() {
            let (r, theta) = (r_grid[i], theta_grid[j]);
            match node {
                Ok(p) => {
                    energies[i][j] = p.energy;
                    if !p.converged {
                        provenance.flagged.push([i, j]);
                    }
                }
                Err(_) if in_well(r) => well_failures.push((r, theta)),
                Err(e) => {
                    other_failure.get_or_insert(Error::NodeFailed { r, theta, reason: e.to_string() });
                }
            }
        }
    }
    if let Some(&(r, theta)) = well_failures.first() {
        return Err(Error::SurfaceUnusable { count: well_failures.len(), r, theta });
    }
    if let Some(e) = other_failure {
        return Err(e);
    }
    PotentialSurface::new(b, r_grid.to_vec(), theta_grid.to_vec(), energies, provenance)
}

/// Sequential surface build on the geometric R grid of `grid`; each
/// inclination column is warm-started along ascending R.
pub fn build_surface(grid: &GridSpec, b: f64, budget: &OptimizerBudget) -> Result<PotentialSurface> {
    grid.validate()?;
    let r_grid = grid.geometric_r();
    let columns = grid.theta_values.iter().map(|&t| build_column(t, b, &r_grid, budget)).collect::<Result<Vec<_>>>()?;
    assemble_surface(b, &r_grid, &grid.theta_values, columns, budget)
}

/// Rotor fit of one fixed-R slice.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SliceFit {
    pub v0: f64,
    /// Barrier height `V(90) - V(0)`.
    pub v90: f64,
    /// Fitted `sin^2 2theta` amplitude (two-term model only).
    pub v90_2: Option<f64>,
    pub rms: f64,
}

impl SliceFit {
    pub fn eval(&self, theta: f64) -> f64 {
        let s = math::sin(theta);
        let s2 = math::sin(2.0 * theta);
        self.v0 + self.v90 * s * s + self.v90_2.map_or(0.0, |a| a * s2 * s2)
    }
}

fn check_theta_resolution(thetas: &[f64]) -> Result<()> {
    if !strictly_increasing(thetas) {
        return Err(Error::InvalidGrid("inclinations must be strictly increasing".into()));
    }
    let first = thetas.first().copied().unwrap_or(1.0);
    let last = thetas.last().copied().unwrap_or(0.0);
    if first.abs() > 1e-9 || (last - FRAC_PI_2).abs() > 1e-9 {
        return Err(Error::InvalidGrid("rotor decomposition needs theta = 0 and 90 deg nodes".into()));
    }
    let step = thetas.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max).to_degrees();
    if step > MAX_THETA_STEP_DEG + 1e-6 {
        return Err(Error::InsufficientResolution { step, max: MAX_THETA_STEP_DEG });
    }
    Ok(())
}

/// Fits one slice `V(theta)` sampled on `thetas` (radians, from 0 to 90 deg).
///
/// Both models pass through the end points: the one-term model is
/// `V(0) + V90 sin^2 theta` with `V90 = V(90) - V(0)`; the two-term model adds
/// `V90_2 sin^2 2theta = V90_2 (1 - cos 4theta)/2`, whose amplitude is a
/// least-squares fit to the remaining residual.
pub fn fit_rotor_slice(thetas: &[f64], energies: &[f64], n_terms: usize) -> Result<SliceFit> {
    if !(n_terms == 1 || n_terms == 2) {
        return Err(Error::InvalidParameters(format!("n_terms must be 1 or 2, got {n_terms}")));
    }
    if thetas.len() != energies.len() {
        return Err(Error::Mismatch(format!("{} angles but {} energies", thetas.len(), energies.len())));
    }
    check_theta_resolution(thetas)?;
    let v0 = energies[0];
    let v90 = energies[energies.len() - 1] - v0;
    let mut fit = SliceFit { v0, v90, v90_2: None, rms: 0.0 };
    if n_terms == 2 {
        let resid: Vec<f64> = thetas.iter().zip(energies).map(|(&t, &e)| e - fit.eval(t)).collect();
        let a = Matrix::from_fn(thetas.len(), 1, |i, _| {
            let s = math::sin(2.0 * thetas[i]);
            s * s
        });
        fit.v90_2 = Some(least_squares(&a, &resid)?.coefficients[0]);
    }
    let ss: f64 = thetas
        .iter()
        .zip(energies)
        .map(|(&t, &e)| {
            let d = e - fit.eval(t);
            d * d
        })
        .sum();
    fit.rms = math::sqrt(ss / thetas.len() as f64);
    Ok(fit)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HinderedRotorPotential {
    pub b: f64,
    pub n_terms: usize,
    /// `V(R, 0)`.
    pub v0: CubicSpline,
    /// `V90(R) = V(R, 90) - V(R, 0)`.
    pub v90: CubicSpline,
    pub v90_2: Option<CubicSpline>,
    pub slice_rms: Vec<f64>,
    pub global_rms: f64,
}

impl HinderedRotorPotential {
    /// Builds a rotor potential directly from `V(R, 0)` and `V90(R)` curves.
    pub fn from_curves(b: f64, r: Vec<f64>, v0: Vec<f64>, v90: Vec<f64>) -> Result<Self> {
        let n = r.len();
        Ok(Self {
            b,
            n_terms: 1,
            v0: CubicSpline::new(r.clone(), v0)?,
            v90: CubicSpline::new(r, v90)?,
            v90_2: None,
            slice_rms: alloc::vec![0.0; n],
            global_rms: 0.0,
        })
    }

    pub fn r_domain(&self) -> (f64, f64) {
        self.v0.domain()
    }

    pub fn eval(&self, r: f64, theta: f64) -> Result<f64> {
        let outside = Error::Extrapolation { r, theta };
        let v0 = self.v0.eval(r).ok_or(outside)?;
        let v90 = self.v90.eval(r).ok_or(Error::Extrapolation { r, theta })?;
        let s = math::sin(theta);
        let mut v = v0 + v90 * s * s;
        if let Some(sp) = &self.v90_2 {
            let s2 = math::sin(2.0 * theta);
            v += sp.eval(r).ok_or(Error::Extrapolation { r, theta })? * s2 * s2;
        }
        Ok(v)
    }
}

/// Per-R rotor decomposition of a surface with natural splines in R.
pub fn decompose_hindered_rotor(surface: &PotentialSurface, n_terms: usize) -> Result<HinderedRotorPotential> {
    surface.validate()?;
    check_theta_resolution(&surface.theta_grid)?;
    let fits = surface.energies.iter().map(|row| fit_rotor_slice(&surface.theta_grid, row, n_terms)).collect::<Result<Vec<_>>>()?;
    let n_theta = surface.theta_grid.len() as f64;
    let ss: f64 = fits.iter().map(|f| f.rms * f.rms * n_theta).sum();
    let global_rms = math::sqrt(ss / (n_theta * fits.len() as f64));
    let r = surface.r_grid.clone();
    let v90_2 = if n_terms == 2 { Some(CubicSpline::new(r.clone(), fits.iter().map(|f| f.v90_2.unwrap_or(0.0)).collect())?) } else { None };
    Ok(HinderedRotorPotential {
        b: surface.b,
        n_terms,
        v0: CubicSpline::new(r.clone(), fits.iter().map(|f| f.v0).collect())?,
        v90: CubicSpline::new(r, fits.iter().map(|f| f.v90).collect())?,
        v90_2,
        slice_rms: fits.iter().map(|f| f.rms).collect(),
        global_rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn degrees(step: usize) -> Vec<f64> {
        (0..=90).step_by(step).map(|d| (d as f64).to_radians()).collect()
    }

    fn synthetic(b: f64, thetas: &[f64]) -> PotentialSurface {
        let r: Vec<f64> = (0..25).map(|i| 0.8 + 0.3 * i as f64).collect();
        let e = r
            .iter()
            .map(|&r| {
                thetas
                    .iter()
                    .map(|&t| {
                        let base = -0.6 + 0.1 * (r - 2.0).powi(2) / (1.0 + 0.2 * r * r);
                        let s = math::sin(t);
                        let s2 = math::sin(2.0 * t);
                        base + 1e-3 * r * s * s + 2e-5 * s2 * s2
                    })
                    .collect()
            })
            .collect();
        PotentialSurface::new(b, r, thetas.to_vec(), e, Provenance::default()).unwrap()
    }

    #[test]
    fn validation_rejects_bad_surfaces() {
        let s = synthetic(0.2, &degrees(15));
        let mut bad = s.clone();
        bad.r_grid.swap(2, 3);
        assert!(bad.validate().is_err());
        let mut bad = s.clone();
        bad.energies[1][1] = f64::NAN;
        assert!(bad.validate().is_err());
        let mut bad = s.clone();
        bad.energies[0].pop();
        assert!(matches!(bad.validate(), Err(Error::Mismatch(_))));
        let mut bad = s;
        bad.theta_grid[6] = 2.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn two_term_model_is_recovered_exactly() {
        let s = synthetic(0.2, &degrees(5));
        let rotor = decompose_hindered_rotor(&s, 2).unwrap();
        assert!(rotor.global_rms < 1e-15);
        let one = decompose_hindered_rotor(&s, 1).unwrap();
        assert!(one.global_rms > 1e-6);
        let sp = rotor.v90_2.as_ref().unwrap();
        assert!((sp.eval(2.0).unwrap() - 2e-5).abs() < 1e-15);
        assert!((rotor.v90.eval(2.3).unwrap() - 2.3e-3).abs() < 1e-15);
    }

    #[test]
    fn rotor_reconstruction_and_theta_zero() {
        let s = synthetic(0.1, &degrees(15));
        let rotor = decompose_hindered_rotor(&s, 1).unwrap();
        for &r in &[1.1, 2.0, 5.55] {
            assert_eq!(rotor.eval(r, 0.0).unwrap(), rotor.v0.eval(r).unwrap());
        }
        for (i, &r) in s.r_grid.iter().enumerate() {
            for (j, &t) in s.theta_grid.iter().enumerate() {
                assert!((rotor.eval(r, t).unwrap() - s.energies[i][j]).abs() <= 4.0 * rotor.slice_rms[i] + 1e-15);
            }
        }
        assert!(rotor.eval(0.5, 0.2).is_err());
    }

    #[test]
    fn coarse_theta_grid_is_rejected() {
        let s = synthetic(0.2, &[0.0, 0.5, FRAC_PI_2]);
        assert!(matches!(decompose_hindered_rotor(&s, 1), Err(Error::InsufficientResolution { .. })));
        let s = synthetic(0.2, &degrees(15)[..6]);
        assert!(decompose_hindered_rotor(&s, 1).is_err());
        assert!(decompose_hindered_rotor(&synthetic(0.2, &degrees(15)), 3).is_err());
    }

    #[test]
    fn interpolator_hits_nodes_and_rejects_extrapolation() {
        let s = synthetic(0.2, &degrees(15));
        let it = s.interpolator().unwrap();
        for (i, &r) in s.r_grid.iter().enumerate() {
            for (j, &t) in s.theta_grid.iter().enumerate() {
                assert_eq!(it.eval(r, t).unwrap(), s.energies[i][j]);
            }
        }
        assert!(matches!(it.eval(0.7, 0.1), Err(Error::Extrapolation { .. })));
        assert!(it.eval(2.0, 1.6).is_err());
        let dense = synthetic(0.2, &degrees(5));
        let v = it.eval(2.05, 0.4).unwrap();
        let w = dense.interpolator().unwrap().eval(2.05, 0.4).unwrap();
        assert!((v - w).abs() < 1e-5);
    }
}
