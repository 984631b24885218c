//! Physical constants, unit conventions and the small value types shared by
//! every other module. Everything is in atomic units: hartree, bohr, electron
//! masses, and field strengths in units of `B0`.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// Atomic unit of magnetic field strength, in tesla.
pub const B0_TESLA: f64 = 2.35e5;
/// Bohr radius in atomic units.
pub const BOHR: f64 = 1.0;
/// Hartree in atomic units.
pub const HARTREE: f64 = 1.0;
/// Electron mass in atomic units.
pub const ELECTRON_MASS: f64 = 1.0;

/// CODATA 2018 proton mass in electron masses.
pub const PROTON_MASS: f64 = 1_836.152_673_43;
/// CODATA 2018 deuteron mass in electron masses.
pub const DEUTERON_MASS: f64 = 3_670.482_967_88;

/// Convert a field strength in units of `B0` to tesla.
pub fn field_to_si(b: f64) -> Result<f64> {
    check_field(b)?;
    Ok(b * B0_TESLA)
}

/// Inverse of [`field_to_si`].
pub fn field_from_si(tesla: f64) -> Result<f64> {
    check_field(tesla)?;
    Ok(tesla / B0_TESLA)
}

pub(crate) fn check_field(b: f64) -> Result<()> {
    if b.is_finite() && b >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeField(b))
    }
}

/// Field strength together with the inclination of the internuclear axis.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FieldConfig {
    /// Field strength in units of `B0`.
    pub b: f64,
    /// Angle between the molecular axis and the field, radians.
    pub theta: f64,
}

impl FieldConfig {
    /// Builds a configuration, folding `theta` into the canonical `[0, pi/2]`.
    pub fn new(b: f64, theta: f64) -> Result<Self> {
        check_field(b)?;
        if !theta.is_finite() {
            return Err(Error::InvalidParameters("theta must be finite".to_string()));
        }
        Ok(Self { b, theta: canonical_theta(theta) })
    }

    pub fn from_degrees(b: f64, theta_deg: f64) -> Result<Self> {
        Self::new(b, theta_deg.to_radians())
    }

    pub fn theta_degrees(&self) -> f64 {
        self.theta.to_degrees()
    }
}

/// Maps any inclination onto `[0, pi/2]`.
///
/// The Hamiltonian is invariant under `theta -> -theta` (reflection through
/// the x-z plane) and `theta -> pi - theta` (nuclear exchange), which
/// together generate the full reduction.
pub fn canonical_theta(theta: f64) -> f64 {
    let pi = core::f64::consts::PI;
    let mut t = theta % pi;
    if t < 0.0 {
        t += pi;
    }
    if t > FRAC_PI_2 {
        t = pi - t;
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Statistics {
    Fermionic,
    Bosonic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SpeciesName {
    #[cfg_attr(feature = "serde", serde(rename = "H2+"))]
    H2Plus,
    #[cfg_attr(feature = "serde", serde(rename = "D2+"))]
    D2Plus,
}

impl fmt::Display for SpeciesName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpeciesName::H2Plus => "H2+",
            SpeciesName::D2Plus => "D2+",
        })
    }
}

impl FromStr for SpeciesName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H2+" | "h2+" | "H2" | "h2" | "H2plus" | "h2plus" => Ok(SpeciesName::H2Plus),
            "D2+" | "d2+" | "D2" | "d2" | "D2plus" | "d2plus" => Ok(SpeciesName::D2Plus),
            other => Err(Error::UnknownSpecies(other.to_string())),
        }
    }
}

/// A homonuclear isotopologue: name, single-nucleus mass, exchange statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NuclearSpecies {
    pub name: SpeciesName,
    /// Mass of one nucleus in electron masses.
    pub nuclear_mass: f64,
    pub statistics: Statistics,
}

impl NuclearSpecies {
    /// The species with CODATA masses.
    pub fn new(name: SpeciesName) -> Self {
        match name {
            SpeciesName::H2Plus => Self { name, nuclear_mass: PROTON_MASS, statistics: Statistics::Fermionic },
            SpeciesName::D2Plus => Self { name, nuclear_mass: DEUTERON_MASS, statistics: Statistics::Bosonic },
        }
    }

    /// Same species with a user-chosen nuclear mass, for matching other mass
    /// conventions.
    pub fn with_nuclear_mass(name: SpeciesName, nuclear_mass: f64) -> Result<Self> {
        if !(nuclear_mass.is_finite() && nuclear_mass > 0.0) {
            return Err(Error::InvalidParameters("nuclear mass must be positive".to_string()));
        }
        Ok(Self { nuclear_mass, ..Self::new(name) })
    }

    pub fn h2_plus() -> Self {
        Self::new(SpeciesName::H2Plus)
    }

    pub fn d2_plus() -> Self {
        Self::new(SpeciesName::D2Plus)
    }

    /// Total nuclear mass `M_s`.
    pub fn total_mass(&self) -> f64 {
        2.0 * self.nuclear_mass
    }
}

/// Looks a species up by name and returns `(nuclear_mass, M_s)`.
pub fn species_masses(name: &str) -> Result<(f64, f64)> {
    let species = NuclearSpecies::new(name.parse()?);
    Ok((species.nuclear_mass, species.total_mass()))
}

/// Radial extent and angular sampling of a potential surface.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub n_r: usize,
    /// Inclinations in radians, strictly increasing within `[0, pi/2]`.
    pub theta_values: Vec<f64>,
}

impl GridSpec {
    pub fn new(r_min: f64, r_max: f64, n_r: usize, theta_values: Vec<f64>) -> Result<Self> {
        let grid = Self { r_min, r_max, n_r, theta_values };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min.is_finite() && self.r_min > 0.0) {
            return Err(Error::InvalidGrid("r_min must be > 0".to_string()));
        }
        if !(self.r_max.is_finite() && self.r_max > self.r_min) {
            return Err(Error::InvalidGrid("r_max must exceed r_min".to_string()));
        }
        if self.n_r < 2 {
            return Err(Error::InvalidGrid("n_r must be at least 2".to_string()));
        }
        if self.theta_values.is_empty() {
            return Err(Error::InvalidGrid("no theta values".to_string()));
        }
        let eps = 1e-12;
        for (i, &t) in self.theta_values.iter().enumerate() {
            if !(t >= -eps && t <= FRAC_PI_2 + eps) {
                return Err(Error::InvalidGrid("theta values must lie in [0, pi/2]".to_string()));
            }
            if i > 0 && t <= self.theta_values[i - 1] {
                return Err(Error::InvalidGrid("theta values must be strictly increasing".to_string()));
            }
        }
        Ok(())
    }

    /// Uniformly spaced radial nodes.
    pub fn uniform_r(&self) -> Vec<f64> {
        let h = (self.r_max - self.r_min) / (self.n_r - 1) as f64;
        (0..self.n_r).map(|i| self.r_min + h * i as f64).collect()
    }

    /// Geometrically spaced radial nodes, denser at small R where the well is.
    pub fn geometric_r(&self) -> Vec<f64> {
        let ratio = self.r_max / self.r_min;
        (0..self.n_r).map(|i| self.r_min * crate::math::exp(crate::math::ln(ratio) * i as f64 / (self.n_r - 1) as f64)).collect()
    }
}
