//! Variational electronic energy of a one-electron two-centre ion in a
//! uniform field along `z`, using a three-term trial function: a
//! Heitler-London, a Hund-Mulliken and a Guillemin-Zener product, each
//! dressed with a lowest-Landau-orbital Gaussian in a gauge-dependent form.
//!
//! The electronic Hamiltonian with vector potential `A = B((xi-1) y, xi x, 0)` is
//!
//! ```text
//! H = -1/2 lap - iB[(xi-1) y d_x + xi x d_y] + B^2/2 [xi^2 x^2 + (1-xi)^2 y^2] + 1/R - 1/r1 - 1/r2
//! ```
//!
//! For a real trial function the linear term has zero expectation value, so
//! only the kinetic (in gradient form), diamagnetic and Coulomb parts enter.
//! The three linear coefficients are always solved exactly from the 3x3
//! generalized eigenproblem; only the nonlinear parameters are searched.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{lowest_generalized, Matrix};
use crate::math;
use crate::quadrature::{RuleOrder, SpheroidalGrid};
use crate::simplex::{self, SimplexOptions};
use crate::units::{canonical_theta, check_field, FieldConfig};

/// Nonlinear and linear parameters of the trial function.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialParameters {
    /// Exponents: `alpha[0]` Heitler-London, `alpha[1]` Hund-Mulliken,
    /// `alpha[2]`, `alpha[3]` Guillemin-Zener (1/bohr).
    pub alpha: [f64; 4],
    /// Landau-orbital factors `[beta_x, beta_y]` for each of the three terms.
    pub beta: [[f64; 2]; 3],
    /// Linear coefficients, normalized so that `a[0] = 1` when possible.
    pub a: [f64; 3],
    /// Gauge parameter: 0 Landau, 1/2 symmetric.
    pub xi: f64,
}

impl Default for TrialParameters {
    fn default() -> Self {
        Self::initial_guess()
    }
}

impl TrialParameters {
    /// Field-free starting point for the search.
    pub fn initial_guess() -> Self {
        Self { alpha: [0.7, 1.25, 1.15, 0.25], beta: [[0.5, 0.5]; 3], a: [1.0, 0.3, 0.3], xi: 0.5 }
    }

    /// Starting points for a search without a warm start. The energy
    /// landscape has several shallow basins a few 1e-5 hartree apart, so
    /// cold searches run from each of these and keep the best.
    pub fn cold_starts() -> [Self; 3] {
        let base = Self::initial_guess();
        [
            Self { alpha: [1.2, 1.0, 1.4, 1.1], ..base },
            Self { alpha: [0.7, 1.25, 1.15, 0.25], ..base },
            Self { alpha: [1.0, 1.4, 1.2, 1.0], ..base },
        ]
    }

    /// A pure Heitler-London function `exp(-alpha (r1 + r2))`.
    pub fn heitler_london(alpha: f64) -> Self {
        Self { alpha: [alpha, 1.0, 1.0, 1.0], beta: [[0.0; 2]; 3], a: [1.0, 0.0, 0.0], xi: 0.5 }
    }

    /// A pure Hund-Mulliken function `exp(-alpha r1) + exp(-alpha r2)`.
    pub fn hund_mulliken(alpha: f64) -> Self {
        Self { alpha: [1.0, alpha, 1.0, 1.0], beta: [[0.0; 2]; 3], a: [0.0, 1.0, 0.0], xi: 0.5 }
    }

    pub fn validate(&self, b: f64) -> Result<()> {
        let finite = self.alpha.iter().chain(self.beta.iter().flatten()).chain(self.a.iter()).all(|v| v.is_finite()) && self.xi.is_finite();
        if !finite {
            return Err(Error::InvalidParameters("non-finite parameter".into()));
        }
        if self.alpha.iter().any(|&a| a <= 0.0) {
            return Err(Error::InvalidParameters(format!("exponents must be positive: {:?}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.xi) {
            return Err(Error::InvalidParameters(format!("gauge parameter {} outside [0, 1]", self.xi)));
        }
        for pair in &self.beta {
            if b * pair[0] * self.xi < 0.0 || b * pair[1] * (1.0 - self.xi) < 0.0 {
                return Err(Error::InvalidParameters(format!("Landau factor {pair:?} makes the Gaussian grow")));
            }
        }
        if self.a.iter().all(|&a| a == 0.0) {
            return Err(Error::InvalidParameters("all linear coefficients vanish".into()));
        }
        Ok(())
    }

    /// The same trial function described at field `to` instead of `from`:
    /// the Gaussian exponents `B beta` are kept fixed.
    pub fn redress(&self, from: f64, to: f64) -> Self {
        let k = from / to;
        let mut p = *self;
        p.beta.iter_mut().flatten().for_each(|v| *v *= k);
        p
    }

    /// Imposes `beta_x = beta_y` for each term (required at zero inclination).
    pub fn symmetrize_beta(&mut self) {
        for pair in &mut self.beta {
            let m = 0.5 * (pair[0] + pair[1]);
            *pair = [m, m];
        }
    }
}

/// Internuclear distance and inclination of the molecular axis.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Geometry {
    pub r: f64,
    pub theta: f64,
}

impl Geometry {
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParameters(format!("internuclear distance {r} must be positive")));
        }
        Ok(Self { r, theta: canonical_theta(theta) })
    }

    /// Nuclear positions in the field frame.
    pub fn nuclei(&self) -> [[f64; 3]; 2] {
        let h = 0.5 * self.r;
        let (s, c) = (math::sin(self.theta), math::cos(self.theta));
        [[h * s, 0.0, h * c], [-h * s, 0.0, -h * c]]
    }
}

/// An optimized energy at one geometry and field.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnergyPoint {
    pub geometry: Geometry,
    pub field: FieldConfig,
    /// Total energy including nuclear repulsion, hartree.
    pub energy: f64,
    pub params: TrialParameters,
    /// Relative difference between the working and a refined quadrature rule.
    pub quadrature_error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Quadrature control.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuadratureSettings {
    /// Working rule when the field is on.
    pub order: RuleOrder,
    /// Amplitude decay exponent at which the radial domain is truncated
    /// (the density is then below `exp(-2 tail)` of its scale).
    pub tail: f64,
    /// Target relative accuracy; rules are refined until two successive
    /// orders agree to this level.
    pub target: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self { order: RuleOrder::new(18, 18, 10), tail: 22.0, target: 1e-6 }
    }
}

/// Overlap, kinetic-plus-potential Hamiltonian and moment matrices in the
/// three-function basis.
#[derive(Debug, Clone)]
pub struct BasisMatrices {
    pub overlap: Matrix,
    pub hamiltonian: Matrix,
}

/// Electronic position moments of a normalized trial function, bohr^2.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Moments {
    pub x2: f64,
    pub y2: f64,
    pub z2: f64,
    pub xz: f64,
}

struct TermValues {
    psi: [f64; 3],
    grad: [[f64; 3]; 3],
}

#[inline(always)]
fn gaussian_factors(p: &TrialParameters, b: f64, x: f64, y: f64) -> ([f64; 3], [[f64; 2]; 3]) {
    let mut g = [1.0; 3];
    let mut d = [[0.0; 2]; 3];
    if b != 0.0 {
        let (x2, y2) = (x * x, y * y);
        for i in 0..3 {
            let cx = b * p.beta[i][0] * p.xi;
            let cy = b * p.beta[i][1] * (1.0 - p.xi);
            g[i] = math::exp(-(cx * x2 + cy * y2));
            d[i] = [-2.0 * cx * x, -2.0 * cy * y];
        }
    }
    (g, d)
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn terms(p: &TrialParameters, b: f64, x: f64, y: f64, r1: f64, r2: f64, e1: &[f64; 3], e2: &[f64; 3]) -> TermValues {
    let [a1, a2, a3, a4] = p.alpha;
    let (g, d) = gaussian_factors(p, b, x, y);
    // Radial parts and their derivatives with respect to r1, r2.
    let hl = math::exp(-a1 * (r1 + r2));
    let (m1, m2) = (math::exp(-a2 * r1), math::exp(-a2 * r2));
    let (u, w) = (math::exp(-a3 * r1 - a4 * r2), math::exp(-a3 * r2 - a4 * r1));
    let f = [hl, m1 + m2, u + w];
    let df1 = [-a1 * hl, -a2 * m1, -a3 * u - a4 * w];
    let df2 = [-a1 * hl, -a2 * m2, -a4 * u - a3 * w];
    let mut psi = [0.0; 3];
    let mut grad = [[0.0; 3]; 3];
    for i in 0..3 {
        psi[i] = f[i] * g[i];
        grad[i] = [
            g[i] * (df1[i] * e1[0] + df2[i] * e2[0] + f[i] * d[i][0]),
            g[i] * (df1[i] * e1[1] + df2[i] * e2[1] + f[i] * d[i][1]),
            g[i] * (df1[i] * e1[2] + df2[i] * e2[2]),
        ];
    }
    TermValues { psi, grad }
}

/// Value of the trial function at a field-frame position.
pub fn trial_value(params: &TrialParameters, geometry: &Geometry, b: f64, position: [f64; 3]) -> Result<f64> {
    check_field(b)?;
    params.validate(b)?;
    if position.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameters("non-finite position".into()));
    }
    let [n1, n2] = geometry.nuclei();
    let dist = |n: &[f64; 3]| {
        let d = [position[0] - n[0], position[1] - n[1], position[2] - n[2]];
        math::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
    };
    let (r1, r2) = (dist(&n1), dist(&n2));
    let (g, _) = gaussian_factors(params, b, position[0], position[1]);
    let [a1, a2, a3, a4] = params.alpha;
    let f = [
        math::exp(-a1 * (r1 + r2)),
        math::exp(-a2 * r1) + math::exp(-a2 * r2),
        math::exp(-a3 * r1 - a4 * r2) + math::exp(-a3 * r2 - a4 * r1),
    ];
    Ok((0..3).map(|i| params.a[i] * f[i] * g[i]).sum())
}

/// Evaluates integrals of the trial function at one geometry and field.
///
/// The grid is rebuilt lazily whenever the exponents require a longer (or
/// allow a much shorter) radial domain, so a single integrator can follow an
/// optimization run.
#[derive(Debug, Clone)]
pub struct ElectronicIntegrator {
    geometry: Geometry,
    b: f64,
    /// Field strength that scales the Gaussian factors of the trial
    /// function; equal to `b` except in the dressed zero-field limit.
    dressing: f64,
    order: RuleOrder,
    tail: f64,
    grid: Option<SpheroidalGrid>,
}

impl ElectronicIntegrator {
    pub fn new(geometry: Geometry, b: f64, settings: &QuadratureSettings) -> Result<Self> {
        check_field(b)?;
        let mut order = settings.order;
        if b == 0.0 {
            // Axial symmetry; three phi nodes still integrate the quadratic
            // moments of a tilted molecule exactly.
            order.n_phi = 3;
        }
        Ok(Self { geometry, b, dressing: b, order, tail: settings.tail, grid: None })
    }

    pub fn with_order(geometry: Geometry, b: f64, order: RuleOrder, tail: f64) -> Result<Self> {
        check_field(b)?;
        Ok(Self { geometry, b, dressing: b, order, tail, grid: None })
    }

    /// Field-free Hamiltonian with the Gaussian factors evaluated at unit
    /// field, so `beta` holds the Gaussian exponents themselves. For
    /// `B > 0` the trial family is the same set of functions at every field
    /// strength; this integrator gives its `B -> 0+` limit, which is lower
    /// than the plain exponential family at `B = 0`.
    pub fn dressed(geometry: Geometry, settings: &QuadratureSettings) -> Self {
        Self { geometry, b: 0.0, dressing: 1.0, order: settings.order, tail: settings.tail, grid: None }
    }

    /// Same Hamiltonian and trial family on another rule.
    fn with_rule(&self, order: RuleOrder) -> Self {
        Self { geometry: self.geometry, b: self.b, dressing: self.dressing, order, tail: self.tail, grid: None }
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn field_strength(&self) -> f64 {
        self.b
    }

    pub fn order(&self) -> RuleOrder {
        self.order
    }

    /// Radial extent `(s_max, s_split)` needed by these exponents.
    fn extent(&self, p: &TrialParameters) -> (f64, f64) {
        let half = 0.5 * self.geometry.r;
        let [a1, a2, a3, a4] = p.alpha;
        // Amplitude of each term is bounded by exp(-(kappa q - c)) with
        // q = (R/2) cosh s.
        let bounds = [(2.0 * a1, 0.0), (a2, a2 * half), (a3 + a4, (a3 - a4).abs() * half)];
        let q_for = |level: f64| bounds.iter().map(|&(k, c)| (level + c) / k).fold(0.0, f64::max);
        let q_max = q_for(self.tail).max(half * 1.0001);
        let q_split = q_for(0.25 * self.tail).max(half * 1.0001);
        (math::acosh(q_max / half), math::acosh(q_split / half))
    }

    fn grid_for(&mut self, p: &TrialParameters) -> &SpheroidalGrid {
        let (need, split) = self.extent(p);
        let rebuild = match &self.grid {
            None => true,
            Some(g) => need > g.s_max || need < 0.7 * g.s_max,
        };
        if rebuild {
            let s_max = need * 1.1;
            self.grid = Some(SpheroidalGrid::new(self.geometry.r, self.geometry.theta, s_max, split, self.order));
        }
        self.grid.as_ref().expect("grid built above")
    }

    /// Overlap and Hamiltonian matrices (without nuclear repulsion).
    pub fn matrices(&mut self, p: &TrialParameters) -> Result<BasisMatrices> {
        let b = self.b;
        let dressing = self.dressing;
        let (cx, cy) = (0.5 * b * b * p.xi * p.xi, 0.5 * b * b * (1.0 - p.xi) * (1.0 - p.xi));
        let grid = self.grid_for(p);
        let mut s = [0.0; 6];
        let mut h = [0.0; 6];
        const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
        for k in 0..grid.len() {
            let (x, y, r1, r2) = (grid.x[k], grid.y[k], grid.r1[k], grid.r2[k]);
            let t = terms(p, dressing, x, y, r1, r2, &grid.e1[k], &grid.e2[k]);
            let v = cx * x * x + cy * y * y - 1.0 / r1 - 1.0 / r2;
            let w = grid.weight[k];
            for (n, &(i, j)) in PAIRS.iter().enumerate() {
                let pp = t.psi[i] * t.psi[j];
                let gg = t.grad[i][0] * t.grad[j][0] + t.grad[i][1] * t.grad[j][1] + t.grad[i][2] * t.grad[j][2];
                s[n] += w * pp;
                h[n] += w * (0.5 * gg + v * pp);
            }
        }
        let mut overlap = Matrix::zeros(3, 3);
        let mut hamiltonian = Matrix::zeros(3, 3);
        for (n, &(i, j)) in PAIRS.iter().enumerate() {
            overlap[(i, j)] = s[n];
            overlap[(j, i)] = s[n];
            hamiltonian[(i, j)] = h[n];
            hamiltonian[(j, i)] = h[n];
        }
        if !(0..3).all(|i| overlap[(i, i)].is_finite() && hamiltonian[(i, i)].is_finite()) {
            return Err(Error::NotNormalizable { norm: overlap[(0, 0)] });
        }
        Ok(BasisMatrices { overlap, hamiltonian })
    }

    /// Rayleigh quotient for the linear coefficients in `p.a`, plus `1/R`.
    /// Returns `(energy, norm)`.
    pub fn rayleigh_quotient(&mut self, p: &TrialParameters) -> Result<(f64, f64)> {
        p.validate(self.dressing)?;
        let m = self.matrices(p)?;
        let c = p.a;
        let quad = |a: &Matrix| -> f64 {
            let mut acc = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    acc += c[i] * a[(i, j)] * c[j];
                }
            }
            acc
        };
        let norm = quad(&m.overlap);
        if !(norm.is_finite() && norm > 1e-250) {
            return Err(Error::NotNormalizable { norm });
        }
        Ok((quad(&m.hamiltonian) / norm + 1.0 / self.geometry.r, norm))
    }

    /// Lowest energy over the linear coefficients for fixed nonlinear
    /// parameters; returns the energy and the parameters with the optimal
    /// coefficients filled in.
    pub fn optimal_linear(&mut self, p: &TrialParameters) -> Result<(f64, TrialParameters)> {
        let m = self.matrices(p)?;
        let smax = (0..3).map(|i| m.overlap[(i, i)]).fold(0.0, f64::max);
        if !(smax > 1e-250) {
            return Err(Error::NotNormalizable { norm: smax });
        }
        let (e, c) = lowest_generalized(&m.hamiltonian, &m.overlap, 1e-11)?;
        let mut out = *p;
        out.a = normalize_coefficients(&c);
        Ok((e + 1.0 / self.geometry.r, out))
    }

    /// Normalized second moments of the electron position.
    pub fn moments(&mut self, p: &TrialParameters) -> Result<Moments> {
        p.validate(self.dressing)?;
        let dressing = self.dressing;
        let grid = self.grid_for(p);
        let mut acc = [0.0; 5];
        for k in 0..grid.len() {
            let (x, y, z) = (grid.x[k], grid.y[k], grid.z[k]);
            let t = terms(p, dressing, x, y, grid.r1[k], grid.r2[k], &grid.e1[k], &grid.e2[k]);
            let psi: f64 = (0..3).map(|i| p.a[i] * t.psi[i]).sum();
            let d = grid.weight[k] * psi * psi;
            acc[0] += d;
            acc[1] += d * x * x;
            acc[2] += d * y * y;
            acc[3] += d * z * z;
            acc[4] += d * x * z;
        }
        if !(acc[0] > 1e-250) {
            return Err(Error::NotNormalizable { norm: acc[0] });
        }
        Ok(Moments { x2: acc[1] / acc[0], y2: acc[2] / acc[0], z2: acc[3] / acc[0], xz: acc[4] / acc[0] })
    }
}

fn normalize_coefficients(c: &[f64]) -> [f64; 3] {
    // Keep a1 = 1 unless the Heitler-London term has (numerically) dropped out.
    let biggest = c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let pivot = if c[0].abs() > 1e-8 * biggest { c[0] } else { c.iter().copied().find(|v| v.abs() == biggest).unwrap_or(1.0) };
    [c[0] / pivot, c[1] / pivot, c[2] / pivot]
}

/// `<H>/<1> + 1/R` for the coefficients in `params`, with a quadrature error
/// estimate obtained from a refined rule. Returns `(energy, norm)`.
pub fn rayleigh_quotient(params: &TrialParameters, geometry: &Geometry, b: f64, settings: &QuadratureSettings) -> Result<(f64, f64)> {
    let (e, norm, err) = rayleigh_quotient_checked(params, geometry, b, settings)?;
    if err > settings.target {
        return Err(Error::QuadratureNotConverged { achieved: err, target: settings.target });
    }
    Ok((e, norm))
}

/// As [`rayleigh_quotient`] but also returns the achieved relative error
/// after adaptive refinement, instead of failing on it.
pub fn rayleigh_quotient_checked(
    params: &TrialParameters,
    geometry: &Geometry,
    b: f64,
    settings: &QuadratureSettings,
) -> Result<(f64, f64, f64)> {
    params.validate(b)?;
    let mut integ = ElectronicIntegrator::new(*geometry, b, settings)?;
    let (mut e, mut norm) = integ.rayleigh_quotient(params)?;
    let mut order = integ.order();
    let mut err = f64::INFINITY;
    for _ in 0..4 {
        order = order.refined();
        let mut fine = integ.with_rule(order);
        let (ef, nf) = fine.rayleigh_quotient(params)?;
        err = ((ef - e) / ef).abs();
        e = ef;
        norm = nf;
        if err <= 0.1 * settings.target {
            break;
        }
    }
    Ok((e, norm, err))
}

/// Imaginary-part coefficient of the linear (paramagnetic) field term,
/// `<psi|(xi-1) y d_x + xi x d_y|psi> / <psi|psi>`, evaluated on a grid with
/// no symmetry folding. The energy contribution is `-i B` times this and
/// vanishes for real trial functions.
pub fn linear_field_term(params: &TrialParameters, geometry: &Geometry, b: f64, order: RuleOrder) -> Result<f64> {
    params.validate(b)?;
    let integ = ElectronicIntegrator::with_order(*geometry, b, order, 22.0)?;
    let (s_max, split) = integ.extent(params);
    // Unfold: rebuild on the full angular ranges by integrating the four
    // images of each folded node.
    let grid = SpheroidalGrid::new(geometry.r, geometry.theta, s_max * 1.1, split, order);
    let [n1, _] = geometry.nuclei();
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..grid.len() {
        let w = 0.25 * grid.weight[k];
        let (x0, y0, z0) = (grid.x[k], grid.y[k], grid.z[k]);
        for (sx, sy) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            // Images: y -> -y and inversion through the midpoint.
            let (x, y, z) = if sx > 0.0 { (x0, sy * y0, z0) } else { (-x0, sy * y0, -z0) };
            let d1 = [x - n1[0], y, z - n1[2]];
            let d2 = [x + n1[0], y, z + n1[2]];
            let r1 = math::sqrt(d1[0] * d1[0] + d1[1] * d1[1] + d1[2] * d1[2]);
            let r2 = math::sqrt(d2[0] * d2[0] + d2[1] * d2[1] + d2[2] * d2[2]);
            let e1 = [d1[0] / r1, d1[1] / r1, d1[2] / r1];
            let e2 = [d2[0] / r2, d2[1] / r2, d2[2] / r2];
            let t = terms(params, b, x, y, r1, r2, &e1, &e2);
            let psi: f64 = (0..3).map(|i| params.a[i] * t.psi[i]).sum();
            let gx: f64 = (0..3).map(|i| params.a[i] * t.grad[i][0]).sum();
            let gy: f64 = (0..3).map(|i| params.a[i] * t.grad[i][1]).sum();
            num += w * psi * ((params.xi - 1.0) * y * gx + params.xi * x * gy);
            den += w * psi * psi;
        }
    }
    Ok(num / den)
}

/// Evaluation budget and search controls for [`optimize_energy`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizerBudget {
    pub max_evals: usize,
    /// Simplex spread at which a run is declared converged, hartree.
    pub f_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub quadrature: QuadratureSettings,
    /// Initial simplex edge, as a fraction of the nominal parameter scale.
    pub step_scale: f64,
}

impl Default for OptimizerBudget {
    fn default() -> Self {
        Self { max_evals: 20_000, f_tol: 1e-9, restarts: 3, seed: 0x5eed, quadrature: QuadratureSettings::default(), step_scale: 1.0 }
    }
}

impl OptimizerBudget {
    /// A budget suited to warm starts: small initial simplex.
    pub fn warm(&self) -> Self {
        Self { step_scale: 0.25, ..self.clone() }
    }
}

/// Which nonlinear parameters are free at a given field/inclination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    /// B = 0: only the exponents matter.
    FieldFree,
    /// theta = 0: beta_x = beta_y per term.
    Parallel,
    General,
}

impl Layout {
    fn of(b: f64, theta: f64) -> Self {
        if b == 0.0 {
            Layout::FieldFree
        } else if theta.abs() < 1e-12 {
            Layout::Parallel
        } else {
            Layout::General
        }
    }

    fn pack(self, p: &TrialParameters) -> Vec<f64> {
        let mut v = p.alpha.to_vec();
        match self {
            Layout::FieldFree => {}
            Layout::Parallel => {
                v.extend(p.beta.iter().map(|b| 0.5 * (b[0] + b[1])));
                v.push(p.xi);
            }
            Layout::General => {
                v.extend(p.beta.iter().flatten());
                v.push(p.xi);
            }
        }
        v
    }

    fn unpack(self, v: &[f64], template: &TrialParameters) -> TrialParameters {
        let mut p = *template;
        p.alpha.copy_from_slice(&v[..4]);
        match self {
            Layout::FieldFree => {}
            Layout::Parallel => {
                for i in 0..3 {
                    p.beta[i] = [v[4 + i], v[4 + i]];
                }
                p.xi = v[7];
            }
            Layout::General => {
                for i in 0..3 {
                    p.beta[i] = [v[4 + 2 * i], v[5 + 2 * i]];
                }
                p.xi = v[10];
            }
        }
        p
    }

    /// Box bounds and nominal steps. The Landau factors may reach a
    /// Gaussian exponent `dressing * beta` of at least one at any field
    /// strength, so the trial family does not shrink as `B -> 0`.
    fn bounds(self, dressing: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut lo = vec![0.02; 4];
        let mut hi = vec![6.0; 4];
        let mut step = vec![0.15; 4];
        let nb = match self {
            Layout::FieldFree => 0,
            Layout::Parallel => 3,
            Layout::General => 6,
        };
        if nb > 0 {
            let beta_max = f64::max(6.0, 1.0 / dressing);
            lo.extend(core::iter::repeat_n(0.0, nb));
            hi.extend(core::iter::repeat_n(beta_max, nb));
            step.extend(core::iter::repeat_n(0.025 * beta_max, nb));
            lo.push(0.0);
            hi.push(1.0);
            step.push(0.1);
        }
        (lo, hi, step)
    }
}

/// Minimizes the energy over all trial parameters at a fixed geometry.
///
/// The gauge parameter is optimized together with the wavefunction
/// parameters; at zero inclination the Landau factors are constrained to
/// `beta_x = beta_y`. If the budget runs out the best point found is returned
/// with `converged = false`.
pub fn optimize_energy(geometry: &Geometry, b: f64, init: &TrialParameters, budget: &OptimizerBudget) -> Result<EnergyPoint> {
    check_field(b)?;
    minimize_over_family(ElectronicIntegrator::new(*geometry, b, &budget.quadrature)?, init, budget)
}

/// As [`optimize_energy`] for the `B -> 0+` limit of the field-dependent
/// trial family (see [`ElectronicIntegrator::dressed`]). The returned
/// `beta` are Gaussian exponents at unit field and the point reports
/// `b = 0`.
pub fn optimize_dressed_energy(geometry: &Geometry, init: &TrialParameters, budget: &OptimizerBudget) -> Result<EnergyPoint> {
    minimize_over_family(ElectronicIntegrator::dressed(*geometry, &budget.quadrature), init, budget)
}

fn minimize_over_family(mut integ: ElectronicIntegrator, init: &TrialParameters, budget: &OptimizerBudget) -> Result<EnergyPoint> {
    let (geometry, b, dressing) = (integ.geometry, integ.b, integ.dressing);
    init.validate(dressing)?;
    let layout = Layout::of(dressing, geometry.theta);
    let mut start = *init;
    if layout == Layout::Parallel {
        start.symmetrize_beta();
    }
    let x0 = layout.pack(&start);
    let (lo, hi, mut step) = layout.bounds(dressing);
    step.iter_mut().for_each(|s| *s *= budget.step_scale);
    let template = integ.with_rule(integ.order);
    let objective = |v: &[f64]| -> f64 {
        let p = layout.unpack(v, &start);
        match integ.optimal_linear(&p) {
            Ok((e, _)) if e.is_finite() => e,
            _ => f64::MAX,
        }
    };
    let opts = SimplexOptions { max_evals: budget.max_evals, f_tol: budget.f_tol, step, restarts: budget.restarts, seed: budget.seed };
    let result = simplex::minimize(objective, &x0, &lo, &hi, &opts);
    let best = layout.unpack(&result.x, &start);
    let (energy, params, quadrature_error) = refine_energy(template, &best, &budget.quadrature)?;
    Ok(EnergyPoint {
        geometry,
        field: FieldConfig { b, theta: geometry.theta },
        energy,
        params,
        quadrature_error,
        evaluations: result.evals,
        converged: result.converged,
    })
}

/// Runs [`optimize_energy`] from each start and keeps the lowest result.
pub fn optimize_energy_multistart(
    geometry: &Geometry,
    b: f64,
    starts: &[TrialParameters],
    budget: &OptimizerBudget,
) -> Result<EnergyPoint> {
    let mut best: Option<EnergyPoint> = None;
    let mut last_err = None;
    for start in starts {
        match optimize_energy(geometry, b, start, budget) {
            Ok(p) => {
                if best.as_ref().is_none_or(|q| p.energy < q.energy) {
                    best = Some(p);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::InvalidParameters("no starting points".into())))
}

/// Optimizes from `init` when given (small warm-start simplex), otherwise
/// from every cold start. A warm start that fails to converge (it can stall
/// where two exponents exchange roles) is retried cold and the lower
/// result kept.
pub fn optimize_from(geometry: &Geometry, b: f64, init: Option<&TrialParameters>, budget: &OptimizerBudget) -> Result<EnergyPoint> {
    optimize_family_from(geometry, Family::Field(b), init, budget)
}

/// [`optimize_from`] for the dressed zero-field limit; `init` carries
/// Gaussian exponents at unit field (see [`TrialParameters::redress`]).
pub fn optimize_dressed_from(geometry: &Geometry, init: Option<&TrialParameters>, budget: &OptimizerBudget) -> Result<EnergyPoint> {
    optimize_family_from(geometry, Family::Dressed, init, budget)
}

/// Hamiltonian and trial family of an optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    Field(f64),
    Dressed,
}

impl Family {
    fn optimize(self, geometry: &Geometry, init: &TrialParameters, budget: &OptimizerBudget) -> Result<EnergyPoint> {
        match self {
            Family::Field(b) => optimize_energy(geometry, b, init, budget),
            Family::Dressed => optimize_dressed_energy(geometry, init, budget),
        }
    }
}

fn optimize_family_from(
    geometry: &Geometry,
    family: Family,
    init: Option<&TrialParameters>,
    budget: &OptimizerBudget,
) -> Result<EnergyPoint> {
    let cold = || {
        let mut best: Option<EnergyPoint> = None;
        let mut last_err = None;
        for start in TrialParameters::cold_starts() {
            match family.optimize(geometry, &start, budget) {
                Ok(p) if best.as_ref().is_none_or(|q| p.energy < q.energy) => best = Some(p),
                Ok(_) => {}
                Err(e) => last_err = Some(e),
            }
        }
        best.ok_or_else(|| last_err.unwrap_or(Error::InvalidParameters("no starting points".into())))
    };
    match init {
        Some(p) => match family.optimize(geometry, p, &budget.warm()) {
            Ok(warm) if warm.converged => Ok(warm),
            Ok(warm) => match cold() {
                Ok(c) if c.energy < warm.energy => Ok(c),
                _ => Ok(warm),
            },
            Err(_) => cold(),
        },
        None => cold(),
    }
}

/// Re-evaluates optimized nonlinear parameters on successively finer rules
/// until two orders agree to the target; returns the fine-rule energy.
fn refine_energy(
    mut integ: ElectronicIntegrator,
    p: &TrialParameters,
    settings: &QuadratureSettings,
) -> Result<(f64, TrialParameters, f64)> {
    let (mut e, mut params) = integ.optimal_linear(p)?;
    let mut order = integ.order();
    let mut err = f64::INFINITY;
    for _ in 0..4 {
        order = order.refined();
        let mut fine = integ.with_rule(order);
        let (ef, pf) = fine.optimal_linear(p)?;
        err = ((ef - e) / ef).abs();
        e = ef;
        params = pf;
        if err <= 0.1 * settings.target {
            break;
        }
    }
    Ok((e, params, err))
}

/// Optimized energies along `r_values`, warm-starting each point from the
/// previous optimum (`init = None` starts the first point cold). Failed
/// points are reported in place without aborting the scan.
pub fn scan_curve(
    theta: f64,
    b: f64,
    r_values: &[f64],
    init: Option<&TrialParameters>,
    budget: &OptimizerBudget,
) -> Result<Vec<Result<EnergyPoint>>> {
    check_field(b)?;
    if r_values.iter().any(|&r| !(r > 0.0)) || r_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("R values must be positive and strictly increasing".into()));
    }
    let mut out = Vec::with_capacity(r_values.len());
    let mut seed = init.copied();
    for &r in r_values {
        let point = Geometry::new(r, theta).and_then(|g| optimize_from(&g, b, seed.as_ref(), budget));
        if let Ok(p) = &point {
            seed = Some(p.params);
        }
        out.push(point);
    }
    Ok(out)
}

/// Equilibrium distance, energy and parameters at one inclination and field.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Equilibrium {
    pub r_eq: f64,
    pub energy: f64,
    pub params: TrialParameters,
    /// Optimized point at (the nearest sampled neighbour of) `r_eq`.
    pub point: EnergyPoint,
    pub converged: bool,
}

/// Memo of optimized points along R at one (theta, B), warm-starting each
/// new distance from the lowest point found so far.
struct RadialSearch<'a> {
    theta: f64,
    family: Family,
    budget: &'a OptimizerBudget,
    seed: Option<TrialParameters>,
    cold_check: bool,
    samples: Vec<EnergyPoint>,
}

impl RadialSearch<'_> {
    fn energy(&mut self, r: f64) -> Result<f64> {
        if let Some(p) = self.samples.iter().find(|p| (p.geometry.r - r).abs() < 1e-9) {
            return Ok(p.energy);
        }
        let geometry = Geometry::new(r, self.theta)?;
        let mut p = optimize_family_from(&geometry, self.family, self.seed.as_ref(), self.budget)?;
        if self.cold_check && self.samples.is_empty() && self.seed.is_some() {
            // Continuation can follow a basin that stops being the lowest;
            // check the first point against a cold search.
            if let Ok(cold) = optimize_family_from(&geometry, self.family, None, self.budget) {
                if cold.energy < p.energy {
                    p = cold;
                }
            }
        }
        if self.samples.iter().all(|q| p.energy <= q.energy) {
            self.seed = Some(p.params);
        }
        let e = p.energy;
        self.samples.push(p);
        Ok(e)
    }

    /// Quartic fit through five points spaced `h` around `center`,
    /// re-centred (at most a few times) until the minimum is inside.
    fn local_fit(&mut self, mut center: f64, h: f64, lo: f64, hi: f64) -> Result<f64> {
        for _ in 0..6 {
            if center - 2.0 * h < lo || center + 2.0 * h > hi {
                return Err(Error::NoInteriorMinimum { lo, hi });
            }
            let rs: Vec<f64> = (-2..=2).map(|k| center + h * k as f64).collect();
            let mut es = Vec::with_capacity(5);
            for &r in &rs {
                es.push(self.energy(r)?);
            }
            match polynomial_minimum(&rs, &es, center, h) {
                Ok(r) if (r - center).abs() <= 1.0 * h => return Ok(r),
                Ok(r) => center = r.clamp(center - 2.0 * h, center + 2.0 * h),
                Err(_) => {
                    let (imin, _) = es.iter().enumerate().fold((0, f64::INFINITY), |m, (i, &e)| if e < m.1 { (i, e) } else { m });
                    if imin == 2 {
                        return Err(Error::NoInteriorMinimum { lo, hi });
                    }
                    center = rs[imin];
                }
            }
        }
        Err(Error::NoInteriorMinimum { lo, hi })
    }

    fn finish(mut self, r_eq: f64) -> Result<Equilibrium> {
        let geometry = Geometry::new(r_eq, self.theta)?;
        let point = optimize_family_from(&geometry, self.family, self.seed.as_ref(), self.budget)?;
        let converged = point.converged && self.samples.iter().all(|p| p.converged);
        self.samples.clear();
        Ok(Equilibrium { r_eq, energy: point.energy, params: point.params, point, converged })
    }
}

/// Locates the minimum of `E(R)` in `bracket` with the parameters
/// re-optimized at every trial distance, each warm-started from the best
/// point so far. A golden-section search narrows the bracket, then a local
/// quartic fit through five optimized points pins `R_eq` to well below
/// 1e-3 bohr.
pub fn find_equilibrium(
    theta: f64,
    b: f64,
    bracket: (f64, f64),
    init: Option<&TrialParameters>,
    budget: &OptimizerBudget,
) -> Result<Equilibrium> {
    check_field(b)?;
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidGrid(format!("bad bracket [{lo}, {hi}]")));
    }
    let mut search = RadialSearch { theta, family: Family::Field(b), budget, seed: init.copied(), cold_check: false, samples: Vec::new() };
    let golden = 0.5 * (math::sqrt(5.0) - 1.0);
    let (mut a, mut d) = (lo, hi);
    let mut c1 = d - golden * (d - a);
    let mut c2 = a + golden * (d - a);
    let mut f1 = search.energy(c1)?;
    let mut f2 = search.energy(c2)?;
    while d - a > 0.2 {
        if f1 <= f2 {
            d = c2;
            c2 = c1;
            f2 = f1;
            c1 = d - golden * (d - a);
            f1 = search.energy(c1)?;
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + golden * (d - a);
            f2 = search.energy(c2)?;
        }
    }
    let center = if f1 <= f2 { c1 } else { c2 };
    let r_eq = search.local_fit(center, 0.04, lo, hi)?;
    search.finish(r_eq)
}

/// Refines an equilibrium near a good guess (e.g. extrapolated from a
/// neighbouring field strength) with a five-point quartic fit of spacing `h`.
pub fn refine_equilibrium(
    theta: f64,
    b: f64,
    r_guess: f64,
    h: f64,
    init: Option<&TrialParameters>,
    budget: &OptimizerBudget,
) -> Result<Equilibrium> {
    refine_field_equilibrium(theta, b, r_guess, h, init, Continuation::Follow, budget)
}

fn refine_field_equilibrium(
    theta: f64,
    b: f64,
    r_guess: f64,
    h: f64,
    init: Option<&TrialParameters>,
    continuation: Continuation,
    budget: &OptimizerBudget,
) -> Result<Equilibrium> {
    check_field(b)?;
    let (lo, hi) = (r_guess - 8.0 * h, r_guess + 8.0 * h);
    let cold_check = continuation == Continuation::LowestBasin;
    let mut search = RadialSearch { theta, family: Family::Field(b), budget, seed: init.copied(), cold_check, samples: Vec::new() };
    let r_eq = search.local_fit(r_guess, h, lo.max(1e-3), hi)?;
    search.finish(r_eq)
}

/// [`refine_equilibrium`] for the dressed zero-field limit of the trial
/// family: the `B -> 0+` end point of an equilibrium series.
pub fn refine_dressed_equilibrium(
    theta: f64,
    r_guess: f64,
    h: f64,
    init: Option<&TrialParameters>,
    budget: &OptimizerBudget,
) -> Result<Equilibrium> {
    let (lo, hi) = (r_guess - 8.0 * h, r_guess + 8.0 * h);
    let mut search = RadialSearch { theta, family: Family::Dressed, budget, seed: init.copied(), cold_check: false, samples: Vec::new() };
    let r_eq = search.local_fit(r_guess, h, lo.max(1e-3), hi)?;
    search.finish(r_eq)
}

/// How an equilibrium series treats its warm starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Continuation {
    /// Stay in the basin of the previous optimum. Keeps E(B) smooth.
    Follow,
    /// Compare each warm start with a cold multistart and keep the lower.
    LowestBasin,
}

/// Equilibria along increasing field strengths at fixed inclination.
///
/// Each field strength starts from the previous optimum, and the distance
/// guess is extrapolated linearly from the last two equilibria.
pub fn equilibrium_series(
    theta: f64,
    b_values: &[f64],
    r_guess: f64,
    init: Option<&TrialParameters>,
    continuation: Continuation,
    budget: &OptimizerBudget,
) -> Result<Vec<Equilibrium>> {
    if b_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("field strengths must be strictly increasing".into()));
    }
    let mut out: Vec<Equilibrium> = Vec::with_capacity(b_values.len());
    let mut seed = init.copied();
    for (k, &b) in b_values.iter().enumerate() {
        let guess = match k {
            0 => r_guess,
            1 => out[0].r_eq,
            _ => {
                let (p, q) = (&out[k - 2], &out[k - 1]);
                let slope = (q.r_eq - p.r_eq) / (b_values[k - 1] - b_values[k - 2]);
                q.r_eq + slope * (b - b_values[k - 1])
            }
        };
        let eq = refine_field_equilibrium(theta, b, guess, 0.04, seed.as_ref(), continuation, budget)?;
        seed = Some(eq.params);
        out.push(eq);
    }
    Ok(out)
}

/// Minimum of the quartic through five equally spaced samples.
fn polynomial_minimum(rs: &[f64], es: &[f64], center: f64, h: f64) -> Result<f64> {
    let n = rs.len();
    let a = Matrix::from_fn(n, 5, |i, j| math::powi((rs[i] - center) / h, j as i32));
    let fit = crate::linalg::least_squares(&a, es)?;
    let c = &fit.coefficients;
    let deriv = |u: f64| c[1] + 2.0 * c[2] * u + 3.0 * c[3] * u * u + 4.0 * c[4] * u * u * u;
    let second = |u: f64| 2.0 * c[2] + 6.0 * c[3] * u + 12.0 * c[4] * u * u;
    // Newton from the sample minimum.
    let (imin, _) = es.iter().enumerate().fold((0, f64::INFINITY), |m, (i, &e)| if e < m.1 { (i, e) } else { m });
    let mut u = (rs[imin] - center) / h;
    for _ in 0..50 {
        let s = second(u);
        if !(s > 0.0) {
            return Err(Error::NoInteriorMinimum { lo: rs[0], hi: rs[n - 1] });
        }
        let du = deriv(u) / s;
        u -= du;
        if du.abs() < 1e-12 {
            break;
        }
    }
    if !(-2.5..=2.5).contains(&u) {
        return Err(Error::NoInteriorMinimum { lo: rs[0], hi: rs[n - 1] });
    }
    Ok(center + h * u)
}
