//! Rovibrational levels of the nuclei on a hindered-rotor potential.
//!
//! The radial functions solve
//! `-(2/M_s) chi'' + V(R, 0) chi = E_v chi` (reference orientation
//! `theta' = 0`), and the full nuclear Hamiltonian is diagonalized in the
//! product basis `chi_v(R) Y_LM` within blocks of fixed `M` and z-parity
//! `(-1)^(L+M)`. The angular coupling uses
//! `<L'M| sin^2 theta |LM> = (2/3) [delta - (-1)^M sqrt((2L'+1)(2L+1))
//! (L 2 L'; 0 0 0)(L 2 L'; M 0 -M)]`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::math;
use crate::surface::HinderedRotorPotential;
use crate::units::{NuclearSpecies, Statistics};

/// Uniform radial mesh including both end points.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RadialGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub n: usize,
}

/// Default radial extent, bohr. The inner edge sits far enough up the
/// repulsive wall that the ground vibrational function of the lightest
/// isotopologue decays below the tail tolerance.
pub const DEFAULT_RADIAL_RANGE: (f64, f64) = (0.3, 12.0);
pub const DEFAULT_RADIAL_POINTS: usize = 4001;

impl RadialGrid {
    pub fn new(r_min: f64, r_max: f64, n: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) || n < 5 {
            return Err(Error::InvalidGrid(format!("radial grid [{r_min}, {r_max}] with {n} points")));
        }
        Ok(Self { r_min, r_max, n })
    }

    /// [`DEFAULT_RADIAL_POINTS`] points on [`DEFAULT_RADIAL_RANGE`] clipped
    /// to `domain`.
    pub fn default_within(domain: (f64, f64)) -> Result<Self> {
        Self::new(domain.0.max(DEFAULT_RADIAL_RANGE.0), domain.1.min(DEFAULT_RADIAL_RANGE.1), DEFAULT_RADIAL_POINTS)
    }

    pub fn step(&self) -> f64 {
        (self.r_max - self.r_min) / (self.n - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.n).map(|i| self.r_min + h * i as f64).collect()
    }

    /// Same interval with half the step.
    pub fn halved(&self) -> Self {
        Self { n: 2 * self.n - 1, ..*self }
    }
}

pub type PotentialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Radial equation for one species and field strength.
#[derive(Clone)]
pub struct RadialProblem {
    pub species: NuclearSpecies,
    pub b: f64,
    pub grid: RadialGrid,
    /// Effective potential `U(R)`, hartree.
    pub potential: PotentialFn,
}

impl core::fmt::Debug for RadialProblem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("RadialProblem").field("species", &self.species).field("b", &self.b).field("grid", &self.grid).finish()
    }
}

impl RadialProblem {
    pub fn new(species: NuclearSpecies, b: f64, grid: RadialGrid, potential: PotentialFn) -> Self {
        Self { species, b, grid, potential }
    }

    /// `U(R) = V(R, 0)`; the field term `B^2 R^2 sin^2 theta' / 8 M_s`
    /// vanishes at the reference orientation.
    pub fn from_rotor(species: NuclearSpecies, rotor: &HinderedRotorPotential, grid: RadialGrid) -> Result<Self> {
        let (lo, hi) = rotor.r_domain();
        if grid.r_min < lo - 1e-12 || grid.r_max > hi + 1e-12 {
            return Err(Error::Extrapolation { r: if grid.r_min < lo { grid.r_min } else { grid.r_max }, theta: 0.0 });
        }
        let v0 = rotor.v0.clone();
        let potential: PotentialFn = Arc::new(move |r: f64| {
            let r = r.clamp(lo, hi);
            v0.eval(r).unwrap_or(f64::NAN)
        });
        Ok(Self::new(species, rotor.b, grid, potential))
    }

    fn kinetic(&self) -> f64 {
        2.0 / self.species.total_mass()
    }
}

/// Vibrational eigenpairs on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RadialBasis {
    pub grid: RadialGrid,
    pub r: Vec<f64>,
    pub energies: Vec<f64>,
    /// `functions[v][i]`, normalized to `int chi^2 dR = 1`.
    pub functions: Vec<Vec<f64>>,
    /// Largest eigenvalue change when the step is halved.
    pub halving_change: f64,
}

impl RadialBasis {
    pub fn v_max(&self) -> usize {
        self.energies.len() - 1
    }
}

/// Composite Simpson weights (trapezoid on the last panel for even counts).
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    let m = if n % 2 == 1 { n } else { n - 1 };
    for (i, wi) in w.iter_mut().enumerate().take(m) {
        *wi = if i == 0 || i == m - 1 {
            h / 3.0
        } else if i % 2 == 1 {
            4.0 * h / 3.0
        } else {
            2.0 * h / 3.0
        };
    }
    if m < n {
        w[n - 2] += 0.5 * h;
        w[n - 1] += 0.5 * h;
    }
    w
}

/// Numerov propagation data at a trial energy.
struct Numerov {
    /// `1 - T_i` with `T_i = h^2 (U_i - E) / (12 c)`.
    one_minus_t: Vec<f64>,
    /// Three-term recurrence coefficient `(2 + 10 T_i) / (1 - T_i)`.
    u: Vec<f64>,
}

impl Numerov {
    fn new(pot: &[f64], e: f64, h: f64, kinetic: f64) -> Self {
        let n = pot.len();
        let mut one_minus_t = Vec::with_capacity(n);
        let mut u = Vec::with_capacity(n);
        let f = h * h / (12.0 * kinetic);
        for &p in pot {
            let t = f * (p - e);
            one_minus_t.push(1.0 - t);
            u.push((2.0 + 10.0 * t) / (1.0 - t));
        }
        Self { one_minus_t, u }
    }

    /// Number of discrete eigenvalues below the trial energy: the count of
    /// negative ratios `F_{i+1}/F_i` in the outward renormalized sweep,
    /// which equals the number of positive pivots of the tridiagonal
    /// Numerov matrix.
    fn count(&self) -> usize {
        let n = self.u.len();
        let mut nodes = 0;
        let mut ratio = f64::INFINITY;
        for i in 1..n - 1 {
            let inv = if ratio.is_infinite() { 0.0 } else { 1.0 / ratio };
            ratio = self.u[i] - inv;
            if ratio == 0.0 {
                ratio = f64::MIN_POSITIVE;
            }
            if ratio < 0.0 {
                nodes += 1;
            }
        }
        nodes
    }

    /// Eigenfunction at an (converged) eigenvalue, matched at index `m`.
    fn function(&self, m: usize) -> Vec<f64> {
        let n = self.u.len();
        let mut f = vec![0.0; n];
        f[1] = 1.0;
        for i in 1..m {
            f[i + 1] = self.u[i] * f[i] - f[i - 1];
            if f[i + 1].abs() > 1e150 {
                for x in &mut f[..=i + 1] {
                    *x *= 1e-150;
                }
            }
        }
        let mut g = vec![0.0; n];
        g[n - 2] = 1.0;
        for i in (m + 1..n - 1).rev() {
            g[i - 1] = self.u[i] * g[i] - g[i + 1];
            if g[i - 1].abs() > 1e150 {
                for x in &mut g[i - 1..] {
                    *x *= 1e-150;
                }
            }
        }
        let scale = f[m] / g[m];
        for i in m + 1..n {
            f[i] = g[i] * scale;
        }
        f.iter().zip(&self.one_minus_t).map(|(a, d)| a / d).collect()
    }
}

fn solve_on_grid(problem: &RadialProblem, grid: RadialGrid, v_max: usize) -> Result<RadialBasis> {
    let r = grid.points();
    let pot: Vec<f64> = r.iter().map(|&x| (problem.potential)(x)).collect();
    if pot.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameters("potential is not finite on the radial grid".into()));
    }
    let h = grid.step();
    let c = problem.kinetic();
    let count = |e: f64| Numerov::new(&pot, e, h, c).count();
    let e_floor = pot.iter().copied().fold(f64::INFINITY, f64::min);
    let e_ceil = pot[0].min(pot[pot.len() - 1]);
    if count(e_ceil) <= v_max {
        return Err(Error::Bracketing { level: v_max, reason: "fewer bound levels than requested below the boundary potential" });
    }
    if count(e_floor) != 0 {
        return Err(Error::Bracketing { level: 0, reason: "levels below the potential minimum" });
    }
    let weights = simpson_weights(r.len(), h);
    let mut energies = Vec::with_capacity(v_max + 1);
    let mut functions = Vec::with_capacity(v_max + 1);
    for v in 0..=v_max {
        let (mut lo, mut hi) = (e_floor, e_ceil);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if count(mid) > v {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let e = 0.5 * (lo + hi);
        let num = Numerov::new(&pot, e, h, c);
        // Match at the outer classical turning point, where the function
        // is near its outermost maximum.
        let m = pot.iter().rposition(|&u| u < e).unwrap_or(r.len() / 2).clamp(2, r.len() - 3);
        let mut psi = num.function(m);
        let norm = math::sqrt(psi.iter().zip(&weights).map(|(p, w)| p * p * w).sum::<f64>());
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Bracketing { level: v, reason: "eigenfunction could not be normalized" });
        }
        let peak = psi.iter().fold(0.0f64, |a, p| a.max(p.abs()));
        let first = psi.iter().find(|p| p.abs() > 1e-3 * peak).copied().unwrap_or(1.0);
        let sign = if first < 0.0 { -1.0 } else { 1.0 };
        for p in &mut psi {
            *p *= sign / norm;
        }
        let peak = peak / norm;
        let k = 10.min(r.len() / 4);
        let tail = psi[k].abs().max(psi[r.len() - 1 - k].abs()) / peak;
        if tail > 1e-10 {
            return Err(Error::GridTooShort { level: v, tail });
        }
        energies.push(e);
        functions.push(psi);
    }
    Ok(RadialBasis { grid, r, energies, functions, halving_change: f64::NAN })
}

/// Eigenvalue change between successive step halvings required to accept.
pub const HALVING_TOLERANCE: f64 = 1e-8;

/// Lowest `v_max + 1` vibrational eigenpairs. The step is halved until the
/// eigenvalues move by less than [`HALVING_TOLERANCE`] (at most three
/// times); the returned basis lives on the coarser grid of the accepted
/// pair.
pub fn numerov_solve(problem: &RadialProblem, v_max: usize) -> Result<RadialBasis> {
    let mut grid = problem.grid;
    let mut coarse = solve_on_grid(problem, grid, v_max)?;
    for _ in 0..3 {
        grid = grid.halved();
        let fine = solve_on_grid(problem, grid, v_max)?;
        let change = coarse.energies.iter().zip(&fine.energies).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change < HALVING_TOLERANCE {
            coarse.halving_change = change;
            return Ok(coarse);
        }
        coarse = fine;
    }
    Err(Error::Bracketing { level: v_max, reason: "eigenvalues not converged under step halving" })
}

/// Sign changes of a sampled function, ignoring values below `1e-8` of
/// its peak.
pub fn count_nodes(f: &[f64]) -> usize {
    let peak = f.iter().fold(0.0f64, |a, p| a.max(p.abs()));
    let mut last = 0.0;
    let mut nodes = 0;
    for &x in f {
        if x.abs() <= 1e-8 * peak {
            continue;
        }
        if last != 0.0 && (x > 0.0) != (last > 0.0) {
            nodes += 1;
        }
        last = x;
    }
    nodes
}

fn ln_factorial(n: i32) -> f64 {
    (2..=n).map(|k| math::ln(k as f64)).sum()
}

/// Wigner 3j symbol for integer arguments by the Racah sum, accumulated
/// from log-factorials. Returns zero whenever a selection rule fails.
pub fn wigner3j(l1: i32, l2: i32, l3: i32, m1: i32, m2: i32, m3: i32) -> f64 {
    if l1 < 0 || l2 < 0 || l3 < 0 || m1 + m2 + m3 != 0 {
        return 0.0;
    }
    if m1.abs() > l1 || m2.abs() > l2 || m3.abs() > l3 {
        return 0.0;
    }
    if l3 < (l1 - l2).abs() || l3 > l1 + l2 {
        return 0.0;
    }
    if m1 == 0 && m2 == 0 && (l1 + l2 + l3) % 2 == 1 {
        return 0.0;
    }
    let ln_delta = ln_factorial(l1 + l2 - l3) + ln_factorial(l1 - l2 + l3) + ln_factorial(-l1 + l2 + l3) - ln_factorial(l1 + l2 + l3 + 1);
    let ln_pre = 0.5
        * (ln_delta
            + ln_factorial(l1 + m1)
            + ln_factorial(l1 - m1)
            + ln_factorial(l2 + m2)
            + ln_factorial(l2 - m2)
            + ln_factorial(l3 + m3)
            + ln_factorial(l3 - m3));
    let k_min = 0.max(l2 - l3 - m1).max(l1 - l3 + m2);
    let k_max = (l1 + l2 - l3).min(l1 - m1).min(l2 + m2);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let ln_den = ln_factorial(k)
            + ln_factorial(l3 - l2 + k + m1)
            + ln_factorial(l3 - l1 + k - m2)
            + ln_factorial(l1 + l2 - l3 - k)
            + ln_factorial(l1 - k - m1)
            + ln_factorial(l2 - k + m2);
        let term = math::exp(ln_pre - ln_den);
        sum += if k % 2 == 0 { term } else { -term };
    }
    if (l1 - l2 - m3).rem_euclid(2) == 1 {
        -sum
    } else {
        sum
    }
}

/// Integrand weight for [`radial_matrix_elements`].
pub enum Weight<'a> {
    InvR2,
    R2,
    /// Values on the basis grid.
    Tabulated(&'a [f64]),
}

/// `<v'| w(R) |v>` by Simpson quadrature on the basis grid.
pub fn radial_matrix_elements(basis: &RadialBasis, weight: Weight<'_>) -> Result<Matrix> {
    let n = basis.r.len();
    let w: Vec<f64> = match weight {
        Weight::InvR2 => basis.r.iter().map(|r| 1.0 / (r * r)).collect(),
        Weight::R2 => basis.r.iter().map(|r| r * r).collect(),
        Weight::Tabulated(v) => {
            if v.len() != n {
                return Err(Error::Mismatch(format!("weight has {} values, basis grid has {}", v.len(), n)));
            }
            v.to_vec()
        }
    };
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameters("weight is not finite on the grid".into()));
    }
    let q = simpson_weights(n, basis.grid.step());
    let k = basis.functions.len();
    let mut m = Matrix::zeros(k, k);
    for a in 0..k {
        for b in 0..=a {
            let s: f64 = (0..n).map(|i| basis.functions[a][i] * basis.functions[b][i] * w[i] * q[i]).sum();
            m[(a, b)] = s;
            m[(b, a)] = s;
        }
    }
    Ok(m)
}

/// Barrier `V90(R)` sampled on the basis grid.
pub fn barrier_on_grid(rotor: &HinderedRotorPotential, basis: &RadialBasis) -> Result<Vec<f64>> {
    basis.r.iter().map(|&r| rotor.v90.eval(r).ok_or(Error::Extrapolation { r, theta: core::f64::consts::FRAC_PI_2 })).collect()
}

/// Radial integrals shared by every block.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMatrices {
    pub energies: Vec<f64>,
    pub inv_r2: Matrix,
    pub r2: Matrix,
    pub v90: Matrix,
}

impl RadialMatrices {
    pub fn new(basis: &RadialBasis, v90_on_grid: &[f64]) -> Result<Self> {
        Ok(Self {
            energies: basis.energies.clone(),
            inv_r2: radial_matrix_elements(basis, Weight::InvR2)?,
            r2: radial_matrix_elements(basis, Weight::R2)?,
            v90: radial_matrix_elements(basis, Weight::Tabulated(v90_on_grid))?,
        })
    }
}

/// Model 1 keeps only vibrationally diagonal terms; model 2 the full matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Model {
    VibrationallyDiagonal = 1,
    Full = 2,
}

impl Model {
    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Model::VibrationallyDiagonal),
            2 => Ok(Model::Full),
            _ => Err(Error::InvalidParameters(format!("model must be 1 or 2, got {n}"))),
        }
    }
}

/// One basis function `chi_v Y_LM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BasisLabel {
    pub v: usize,
    pub l: i32,
    pub m: i32,
}

impl BasisLabel {
    pub fn z_parity(&self) -> i32 {
        sign_of_power(self.l + self.m)
    }
}

fn sign_of_power(n: i32) -> i32 {
    if n.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// z-parity a level of vibrational label `v` and projection `m` must carry
/// under the species' exchange statistics.
pub fn allowed_z_parity(statistics: Statistics, m: i32, v: usize) -> i32 {
    match statistics {
        Statistics::Fermionic => sign_of_power(m + v as i32 + 1),
        Statistics::Bosonic => sign_of_power(m + v as i32),
    }
}

/// `H[bra, ket]` for arbitrary labels; vanishes identically between
/// different `M` or different z-parity.
pub fn hamiltonian_element(radial: &RadialMatrices, total_mass: f64, b: f64, model: Model, bra: BasisLabel, ket: BasisLabel) -> f64 {
    if bra.m != ket.m {
        return 0.0;
    }
    if model == Model::VibrationallyDiagonal && bra.v != ket.v {
        return 0.0;
    }
    let (vp, v, lp, l, m) = (bra.v, ket.v, bra.l, ket.l, ket.m);
    let mut h = 0.0;
    if lp == l {
        if vp == v {
            h += radial.energies[v] - b * m as f64 / total_mass;
        }
        h += 2.0 / total_mass * radial.inv_r2[(vp, v)] * (l * (l + 1)) as f64;
    }
    let diff = (lp - l).abs();
    if diff == 0 || diff == 2 {
        let coupling = b * b / (12.0 * total_mass) * radial.r2[(vp, v)] + 2.0 / 3.0 * radial.v90[(vp, v)];
        let mut angular = sign_of_power(m) as f64
            * math::sqrt(((2 * lp + 1) * (2 * l + 1)) as f64)
            * wigner3j(l, 2, lp, 0, 0, 0)
            * wigner3j(l, 2, lp, m, 0, -m);
        angular = if lp == l { 1.0 - angular } else { -angular };
        h += coupling * angular;
    }
    h
}

/// Basis of one `(M, pi)` block for a given exchange class.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CouplingBlock {
    pub m: i32,
    pub parity: i32,
    /// Basis functions violating the exchange statistics (annotated output).
    pub forbidden: bool,
    pub labels: Vec<BasisLabel>,
}

impl CouplingBlock {
    /// `L` runs over `|M| ..= l_int_max` with `(-1)^L = pi (-1)^M`; `v` over
    /// the vibrational labels whose parity the statistics tie to that `L`
    /// parity (or the opposite ones when `forbidden`).
    pub fn new(statistics: Statistics, m: i32, parity: i32, v_max: usize, l_int_max: i32, forbidden: bool) -> Result<Self> {
        if parity != 1 && parity != -1 {
            return Err(Error::InvalidParameters(format!("parity must be +1 or -1, got {parity}")));
        }
        let l_sign = parity * sign_of_power(m);
        let mut labels = Vec::new();
        for v in 0..=v_max {
            for l in m.abs()..=l_int_max {
                if sign_of_power(l) != l_sign {
                    continue;
                }
                let allowed = allowed_z_parity(statistics, m, v) == parity;
                if allowed != forbidden {
                    labels.push(BasisLabel { v, l, m });
                }
            }
        }
        Ok(Self { m, parity, forbidden, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn assemble_hamiltonian(
    block: &CouplingBlock,
    radial: &RadialMatrices,
    species: &NuclearSpecies,
    b: f64,
    model: Model,
) -> Result<Matrix> {
    let vmax = radial.energies.len();
    for lab in &block.labels {
        if lab.v >= vmax || lab.m != block.m || lab.z_parity() != block.parity || lab.l < lab.m.abs() {
            return Err(Error::Mismatch(format!(
                "basis function (v = {}, L = {}, M = {}) does not belong to block (M = {}, parity = {})",
                lab.v, lab.l, lab.m, block.m, block.parity
            )));
        }
    }
    let ms = species.total_mass();
    let n = block.len();
    let mut h = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let x = hamiltonian_element(radial, ms, b, model, block.labels[i], block.labels[j]);
            h[(i, j)] = x;
            h[(j, i)] = x;
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RovibLevel {
    pub energy: f64,
    pub m: i32,
    pub z_parity: i32,
    pub dominant_v: usize,
    pub dominant_l: i32,
    /// The two largest weights were within 1% of each other.
    pub mixed: bool,
    pub forbidden: bool,
    pub model: Model,
    /// `(v, L, coefficient)` over the block basis.
    pub coefficients: Vec<(usize, i32, f64)>,
}

/// Truncation and model choice for [`solve_levels`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RovibOptions {
    pub v_max: usize,
    pub l_max: i32,
    /// Extra `L` kept internally beyond `l_max`.
    pub l_extra: i32,
    pub model: Model,
    pub include_forbidden: bool,
}

impl Default for RovibOptions {
    fn default() -> Self {
        Self { v_max: 3, l_max: 5, l_extra: 4, model: Model::Full, include_forbidden: false }
    }
}

/// Diagonalizes one block and labels its eigenvectors; levels whose
/// dominant `L` exceeds `l_max` are dropped.
pub fn solve_block(
    block: &CouplingBlock,
    radial: &RadialMatrices,
    species: &NuclearSpecies,
    b: f64,
    model: Model,
    l_max: i32,
) -> Result<Vec<RovibLevel>> {
    if block.is_empty() {
        return Ok(Vec::new());
    }
    let h = assemble_hamiltonian(block, radial, species, b, model)?;
    let eig = symmetric_eigen(&h).map_err(|_| Error::Eigensolver { m: block.m, parity: block.parity })?;
    let mut out = Vec::new();
    for k in 0..block.len() {
        let coeffs: Vec<f64> = (0..block.len()).map(|i| eig.vectors[(i, k)]).collect();
        let mut order: Vec<usize> = (0..coeffs.len()).collect();
        order.sort_by(|&a, &b| (coeffs[b] * coeffs[b]).total_cmp(&(coeffs[a] * coeffs[a])));
        let mut top = block.labels[order[0]];
        let mut mixed = false;
        if order.len() > 1 {
            let (w0, w1) = (coeffs[order[0]] * coeffs[order[0]], coeffs[order[1]] * coeffs[order[1]]);
            if w0 - w1 <= 0.01 * w0 {
                mixed = true;
                let other = block.labels[order[1]];
                if other.l < top.l {
                    top = other;
                }
            }
        }
        if top.l > l_max {
            continue;
        }
        out.push(RovibLevel {
            energy: eig.values[k],
            m: block.m,
            z_parity: block.parity,
            dominant_v: top.v,
            dominant_l: top.l,
            mixed,
            forbidden: block.forbidden,
            model,
            coefficients: block.labels.iter().zip(&coeffs).map(|(l, &c)| (l.v, l.l, c)).collect(),
        });
    }
    Ok(out)
}

/// Blocks `(M, pi)` for `|M| <= l_max`, both parities, allowed classes (and
/// forbidden ones on request).
pub fn blocks(species: &NuclearSpecies, opts: &RovibOptions) -> Result<Vec<CouplingBlock>> {
    let mut out = Vec::new();
    let classes: &[bool] = if opts.include_forbidden { &[false, true] } else { &[false] };
    for m in -opts.l_max..=opts.l_max {
        for parity in [1, -1] {
            for &forbidden in classes {
                let blk = CouplingBlock::new(species.statistics, m, parity, opts.v_max, opts.l_max + opts.l_extra, forbidden)?;
                if !blk.is_empty() {
                    out.push(blk);
                }
            }
        }
    }
    Ok(out)
}

/// Vibrational basis and radial integrals for a rotor potential on `grid`.
pub fn prepare_radial(
    species: &NuclearSpecies,
    rotor: &HinderedRotorPotential,
    grid: RadialGrid,
    v_max: usize,
) -> Result<(RadialBasis, RadialMatrices)> {
    let problem = RadialProblem::from_rotor(*species, rotor, grid)?;
    let basis = numerov_solve(&problem, v_max)?;
    let v90 = barrier_on_grid(rotor, &basis)?;
    let radial = RadialMatrices::new(&basis, &v90)?;
    Ok((basis, radial))
}

/// All levels for one species and model, sorted by energy.
pub fn solve_levels(
    species: &NuclearSpecies,
    rotor: &HinderedRotorPotential,
    grid: RadialGrid,
    opts: &RovibOptions,
) -> Result<Vec<RovibLevel>> {
    let (_, radial) = prepare_radial(species, rotor, grid, opts.v_max)?;
    levels_from_radial(species, rotor.b, &radial, opts)
}

pub fn levels_from_radial(species: &NuclearSpecies, b: f64, radial: &RadialMatrices, opts: &RovibOptions) -> Result<Vec<RovibLevel>> {
    if opts.l_max < 0 || opts.l_extra < 0 {
        return Err(Error::InvalidParameters("l_max and l_extra must be non-negative".into()));
    }
    if radial.energies.len() != opts.v_max + 1 {
        return Err(Error::Mismatch(format!("{} radial functions for v_max = {}", radial.energies.len(), opts.v_max)));
    }
    let mut levels = Vec::new();
    for blk in blocks(species, opts)? {
        levels.extend(solve_block(&blk, radial, species, b, opts.model, opts.l_max)?);
    }
    sort_levels(&mut levels);
    Ok(levels)
}

pub fn sort_levels(levels: &mut [RovibLevel]) {
    levels.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.m.cmp(&b.m)).then(b.z_parity.cmp(&a.z_parity)));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(k: f64, r0: f64, grid: RadialGrid) -> RadialProblem {
        RadialProblem::new(NuclearSpecies::h2_plus(), 0.0, grid, Arc::new(move |r: f64| 0.5 * k * (r - r0) * (r - r0)))
    }

    #[test]
    fn harmonic_oscillator_levels() {
        let (k, r0) = (0.1, 3.0);
        let p = harmonic(k, r0, RadialGrid::new(0.5, 6.0, 4001).unwrap());
        let basis = numerov_solve(&p, 3).unwrap();
        let mass = p.species.total_mass() / 4.0;
        let omega = math::sqrt(k / mass);
        for (v, e) in basis.energies.iter().enumerate() {
            let exact = (v as f64 + 0.5) * omega;
            assert!(((e - exact) / exact).abs() < 1e-8, "v = {v}: {e} vs {exact}");
            assert_eq!(count_nodes(&basis.functions[v]), v);
        }
        assert!(basis.halving_change < HALVING_TOLERANCE);
    }

    #[test]
    fn eigenfunctions_are_orthonormal() {
        let p = harmonic(0.8, 2.0, RadialGrid::new(0.2, 3.8, 4001).unwrap());
        let basis = numerov_solve(&p, 3).unwrap();
        let q = simpson_weights(basis.r.len(), basis.grid.step());
        for a in 0..4 {
            for b in 0..4 {
                let s: f64 = (0..q.len()).map(|i| basis.functions[a][i] * basis.functions[b][i] * q[i]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-8, "<{a}|{b}> = {s}");
            }
        }
    }

    #[test]
    fn short_grid_is_reported() {
        let p = harmonic(0.1, 3.0, RadialGrid::new(2.8, 3.4, 801).unwrap());
        assert!(matches!(numerov_solve(&p, 0), Err(Error::GridTooShort { .. }) | Err(Error::Bracketing { .. })));
    }

    #[test]
    fn wigner_special_values() {
        assert_eq!(wigner3j(0, 0, 0, 0, 0, 0), 1.0);
        assert!((wigner3j(1, 1, 2, 0, 0, 0) - math::sqrt(2.0 / 15.0)).abs() < 1e-15);
        assert!((wigner3j(1, 1, 0, 0, 0, 0) + 1.0 / math::sqrt(3.0)).abs() < 1e-15);
        assert_eq!(wigner3j(2, 2, 2, 3, 0, -3), 0.0);
        assert_eq!(wigner3j(1, 1, 3, 0, 0, 0), 0.0);
        assert_eq!(wigner3j(1, 2, 2, 0, 0, 0), 0.0);
        assert_eq!(wigner3j(1, 1, 1, 1, 0, 0), 0.0);
    }

    #[test]
    fn parity_rules() {
        assert_eq!(allowed_z_parity(Statistics::Fermionic, 0, 0), -1);
        assert_eq!(allowed_z_parity(Statistics::Fermionic, 1, 0), 1);
        assert_eq!(allowed_z_parity(Statistics::Bosonic, 0, 0), 1);
        assert_eq!(allowed_z_parity(Statistics::Bosonic, -1, 2), -1);
        let blk = CouplingBlock::new(Statistics::Fermionic, 0, -1, 3, 9, false).unwrap();
        for l in &blk.labels {
            assert_eq!(l.v % 2, 0);
            assert_eq!(l.l % 2, 1);
        }
        let blk = CouplingBlock::new(Statistics::Bosonic, 0, 1, 3, 9, false).unwrap();
        for l in &blk.labels {
            assert_eq!(l.v % 2, 0);
            assert_eq!(l.l % 2, 0);
        }
    }

    #[test]
    fn sin2_matrix_elements() {
        // <00|sin^2|00> = 2/3 and <10|sin^2|10> = 2/5 follow from the
        // element with zero radial terms except a unit barrier.
        let radial = RadialMatrices { energies: vec![0.0], inv_r2: Matrix::zeros(1, 1), r2: Matrix::zeros(1, 1), v90: Matrix::identity(1) };
        let el = |l, lp, m| hamiltonian_element(&radial, 1.0, 0.0, Model::Full, BasisLabel { v: 0, l: lp, m }, BasisLabel { v: 0, l, m });
        assert!((el(0, 0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((el(1, 1, 0) - 0.4).abs() < 1e-15);
        assert!((el(1, 1, 1) - 0.8).abs() < 1e-15);
        // <20|sin^2|00> = -2/(3 sqrt 5).
        assert!((el(0, 2, 0) + 2.0 / (3.0 * math::sqrt(5.0))).abs() < 1e-15);
        assert_eq!(el(0, 4, 0), 0.0);
        assert_eq!(el(0, 1, 0), 0.0);
    }
}
