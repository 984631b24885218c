//! Float intrinsics that work with and without `std`.
//!
//! With the `std` feature the platform implementations are used (they are
//! noticeably faster for `exp` in the quadrature hot loop); otherwise the
//! pure-Rust `libm` port is used.

#[cfg(feature = "std")]
mod imp {
    #[inline(always)]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline(always)]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    #[inline(always)]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    #[inline(always)]
    pub fn sin(x: f64) -> f64 {
        x.sin()
    }
    #[inline(always)]
    pub fn cos(x: f64) -> f64 {
        x.cos()
    }
    #[inline(always)]
    pub fn sinh(x: f64) -> f64 {
        x.sinh()
    }
    #[inline(always)]
    pub fn cosh(x: f64) -> f64 {
        x.cosh()
    }
    #[inline(always)]
    pub fn acosh(x: f64) -> f64 {
        x.acosh()
    }
    #[inline(always)]
    pub fn powi(x: f64, n: i32) -> f64 {
        x.powi(n)
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    #[inline(always)]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline(always)]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline(always)]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline(always)]
    pub fn sin(x: f64) -> f64 {
        libm::sin(x)
    }
    #[inline(always)]
    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }
    #[inline(always)]
    pub fn sinh(x: f64) -> f64 {
        libm::sinh(x)
    }
    #[inline(always)]
    pub fn cosh(x: f64) -> f64 {
        libm::cosh(x)
    }
    #[inline(always)]
    pub fn acosh(x: f64) -> f64 {
        libm::acosh(x)
    }
    #[inline(always)]
    pub fn powi(x: f64, n: i32) -> f64 {
        libm::pow(x, n as f64)
    }
}

pub use imp::*;
