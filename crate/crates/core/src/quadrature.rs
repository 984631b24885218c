//! Gauss-Legendre rules and the two-centre product grid used for every
//! electronic integral.
//!
//! Integrals over all space are taken in prolate spheroidal coordinates
//! `(s, t, phi)` with the nuclei at the foci:
//!
//! ```text
//! z' = (R/2) cosh s cos t,   rho' = (R/2) sinh s sin t
//! r1 = (R/2)(cosh s - cos t), r2 = (R/2)(cosh s + cos t)
//! dV = (R/2)^3 (cosh^2 s - cos^2 t) sinh s sin t ds dt dphi
//! ```
//!
//! The volume element is proportional to `r1 r2`, so the Coulomb
//! singularities and the direction discontinuities of `grad r1`, `grad r2`
//! are cancelled and every integrand used here is analytic in `(s, t, phi)`.
//! Product Gauss rules then converge exponentially, and the error is
//! estimated by comparing two rule orders.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::math;

/// Nodes and weights of an `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, refined by Newton on P_n.
        let mut z = math::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_interval(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    (x.iter().map(|&xi| mid + half * xi).collect(), w.iter().map(|&wi| half * wi).collect())
}

/// Number of nodes of the spheroidal product rule along each coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RuleOrder {
    /// Nodes in `s` on each of the two radial panels.
    pub n_s: usize,
    /// Nodes in `t` on `[0, pi/2]`.
    pub n_t: usize,
    /// Nodes in `phi` on `[0, pi]`; 1 means the integrand is axially symmetric.
    pub n_phi: usize,
}

impl RuleOrder {
    pub const fn new(n_s: usize, n_t: usize, n_phi: usize) -> Self {
        Self { n_s, n_t, n_phi }
    }

    /// A rule roughly 1.5 times finer in every resolved direction.
    pub fn refined(&self) -> Self {
        Self {
            n_s: self.n_s + self.n_s / 2 + 2,
            n_t: self.n_t + self.n_t / 2 + 2,
            n_phi: if self.n_phi > 1 { self.n_phi + self.n_phi / 2 + 2 } else { 1 },
        }
    }

    pub fn points(&self) -> usize {
        2 * self.n_s * self.n_t * self.n_phi
    }
}

/// Precomputed geometry at every node of a spheroidal product rule for a
/// fixed internuclear distance and inclination.
///
/// Coordinates are in the field frame: the field is along `z`, the molecule
/// lies in the x-z plane with the nuclei at `+-(R/2)(sin theta, 0, cos theta)`.
/// The weights include the volume element and the factor 4 from the two
/// symmetry reductions used: `phi -> -phi` (reflection `y -> -y`) and
/// inversion through the midpoint (exchange of nuclei), under which every
/// integrand built from the gerade trial function is invariant.
#[derive(Debug, Clone)]
pub struct SpheroidalGrid {
    pub r: f64,
    pub theta: f64,
    pub s_max: f64,
    pub order: RuleOrder,
    pub weight: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    /// Unit vectors from each nucleus to the node, field frame.
    pub e1: Vec<[f64; 3]>,
    pub e2: Vec<[f64; 3]>,
}

impl SpheroidalGrid {
    /// Builds the grid. `s_max` bounds the radial coordinate; `[0, s_max]` is
    /// split at `s_split` (clamped into the interval) into two Gauss panels,
    /// so the inner panel resolves the density near the nuclei.
    pub fn new(r: f64, theta: f64, s_max: f64, s_split: f64, order: RuleOrder) -> Self {
        let half = 0.5 * r;
        let split = s_split.clamp(0.1 * s_max, 0.9 * s_max);
        let (s_in, ws_in) = gauss_legendre_interval(order.n_s, 0.0, split);
        let (s_out, ws_out) = gauss_legendre_interval(order.n_s, split, s_max);
        let s_nodes: Vec<(f64, f64)> = s_in.into_iter().zip(ws_in).chain(s_out.into_iter().zip(ws_out)).collect();
        let (t_nodes, t_w) = gauss_legendre_interval(order.n_t, 0.0, 0.5 * PI);
        let (phi_nodes, phi_w): (Vec<f64>, Vec<f64>) = if order.n_phi <= 1 {
            (vec![0.0], vec![PI])
        } else {
            // Trapezoid on the full period, folded onto [0, pi] with phi -> -phi.
            let n_full = 2 * (order.n_phi - 1);
            let h = 2.0 * PI / n_full as f64;
            (0..order.n_phi)
                .map(|k| {
                    let w = if k == 0 || k == order.n_phi - 1 { h } else { 2.0 * h };
                    (k as f64 * h, 0.5 * w)
                })
                .unzip()
        };

        let (st, ct) = (math::sin(theta), math::cos(theta));
        let n1 = [half * st, 0.0, half * ct];
        let cap = order.points() / 2;
        let mut grid = Self {
            r,
            theta,
            s_max,
            order,
            weight: Vec::with_capacity(cap),
            x: Vec::with_capacity(cap),
            y: Vec::with_capacity(cap),
            z: Vec::with_capacity(cap),
            r1: Vec::with_capacity(cap),
            r2: Vec::with_capacity(cap),
            e1: Vec::with_capacity(cap),
            e2: Vec::with_capacity(cap),
        };
        let sym = 4.0;
        for &(s, ws) in &s_nodes {
            let (ch, sh) = (math::cosh(s), math::sinh(s));
            for (&t, &wt) in t_nodes.iter().zip(&t_w) {
                let (c, sn) = (math::cos(t), math::sin(t));
                let jac = half * half * half * (ch * ch - c * c) * sh * sn;
                let zp = half * ch * c;
                let rho = half * sh * sn;
                let r1 = half * (ch - c);
                let r2 = half * (ch + c);
                for (&phi, &wp) in phi_nodes.iter().zip(&phi_w) {
                    let xp = rho * math::cos(phi);
                    let yp = rho * math::sin(phi);
                    let x = xp * ct + zp * st;
                    let z = -xp * st + zp * ct;
                    let p = [x, yp, z];
                    let inv1 = 1.0 / r1;
                    let inv2 = 1.0 / r2;
                    grid.weight.push(sym * ws * wt * wp * jac);
                    grid.x.push(x);
                    grid.y.push(yp);
                    grid.z.push(z);
                    grid.r1.push(r1);
                    grid.r2.push(r2);
                    grid.e1.push([(p[0] - n1[0]) * inv1, p[1] * inv1, (p[2] - n1[2]) * inv1]);
                    grid.e2.push([(p[0] + n1[0]) * inv2, p[1] * inv2, (p[2] + n1[2]) * inv2]);
                }
            }
        }
        grid
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    /// Integrates `f(x, y, z, r1, r2)` over all space (assuming the
    /// integrand has the symmetries the grid folds out).
    pub fn integrate(&self, mut f: impl FnMut(f64, f64, f64, f64, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.len() {
            acc += self.weight[i] * f(self.x[i], self.y[i], self.z[i], self.r1[i], self.r2[i]);
        }
        acc
    }
}
