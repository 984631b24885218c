//! Natural cubic splines on strictly increasing knots.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n != y.len() {
            return Err(Error::Mismatch(format!("{} knots but {} values", n, y.len())));
        }
        if n < 2 {
            return Err(Error::InvalidGrid("a spline needs at least two knots".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("spline knots must be finite and strictly increasing".into()));
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm for the interior second derivatives.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            let mut upper = vec![0.0; k];
            for i in 1..n - 1 {
                let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for i in 1..k {
                let lower = x[i + 1] - x[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self { x, y, m })
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn contains(&self, t: f64) -> bool {
        let (a, b) = self.domain();
        t >= a && t <= b
    }

    fn interval(&self, t: f64) -> usize {
        let i = self.x.partition_point(|&v| v <= t);
        i.clamp(1, self.x.len() - 1) - 1
    }

    /// Value at `t`; `None` outside the knot range.
    pub fn eval(&self, t: f64) -> Option<f64> {
        if !self.contains(t) {
            return None;
        }
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        if b == 0.0 {
            return Some(self.y[i]);
        }
        if a == 0.0 {
            return Some(self.y[i + 1]);
        }
        Some(a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0)
    }

    /// First derivative at `t`; `None` outside the knot range.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        if !self.contains(t) {
            return None;
        }
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        Some((self.y[i + 1] - self.y[i]) / h + ((1.0 - 3.0 * a * a) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * h / 6.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;

    #[test]
    fn reproduces_knots_and_lines() {
        let x = vec![0.0, 0.5, 1.7, 2.0, 3.5];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let s = CubicSpline::new(x.clone(), y.clone()).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert_eq!(s.eval(*a).unwrap(), *b);
        }
        assert!((s.eval(2.7).unwrap() - 4.4).abs() < 1e-13);
        assert!((s.derivative(1.1).unwrap() - 2.0).abs() < 1e-13);
        assert!(s.eval(3.6).is_none() && s.eval(-0.1).is_none());
    }

    #[test]
    fn converges_on_smooth_function() {
        let n = 81;
        let x: Vec<f64> = (0..n).map(|i| 0.8 + 9.2 * i as f64 / (n - 1) as f64).collect();
        let f = |r: f64| math::exp(-r) * math::sin(r);
        let s = CubicSpline::new(x.clone(), x.iter().map(|&r| f(r)).collect()).unwrap();
        for k in 0..200 {
            let t = 1.5 + 7.0 * k as f64 / 199.0;
            assert!((s.eval(t).unwrap() - f(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn derivative_is_continuous_at_knots() {
        let x = vec![0.0, 1.0, 2.5, 3.0, 4.0];
        let s = CubicSpline::new(x, vec![1.0, -0.5, 0.25, 2.0, 0.0]).unwrap();
        for k in [1.0, 2.5, 3.0] {
            let l = s.derivative(k - 1e-9).unwrap();
            let r = s.derivative(k + 1e-9).unwrap();
            assert!((l - r).abs() < 1e-6);
        }
        // Natural end conditions: zero curvature at both ends.
        let d2 = |t: f64| (s.derivative(t + 1e-5).unwrap() - s.derivative(t).unwrap()) / 1e-5;
        assert!(d2(0.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(CubicSpline::new(vec![0.0, 0.0, 1.0], vec![1.0, 2.0, 3.0]).is_err());
        assert!(CubicSpline::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(CubicSpline::new(vec![0.0], vec![1.0]).is_err());
    }
}
