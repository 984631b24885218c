//! Run configuration shared by the CLI flags and `--config` JSON files.

use std::path::{Path, PathBuf};

use h2plus_core::electronic::OptimizerBudget;
use serde::{Deserialize, Serialize};

use crate::error::{io_at, Error, Result};

/// Every field mirrors a CLI flag; flags given on the command line override
/// the file. Angles are in degrees, fields in units of `B0`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub b: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    /// `start:stop:step` for scans, `start:stop:count` for surfaces.
    pub r: Option<String>,
    pub species: Option<Vec<String>>,
    pub vmax: Option<usize>,
    pub lmax: Option<i32>,
    pub model: Option<Vec<u8>>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Optimizer convergence (simplex spread), hartree.
    pub tol: Option<f64>,
    pub max_evals: Option<usize>,
    pub threads: Option<usize>,
    pub surface: Option<PathBuf>,
    pub equilibria: Option<PathBuf>,
    pub include_forbidden: Option<bool>,
    pub x_grid: Option<bool>,
}

impl RunConfig {
    /// Reads a config file, or the `config` block of a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_at(path))?;
        let bad = |e: serde_json::Error| Error::Config(format!("{}: {e}", path.display()));
        let mut value: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
        if value.get("command").is_some() {
            if let Some(cfg) = value.get_mut("config") {
                value = cfg.take();
            }
        }
        serde_json::from_value(value).map_err(bad)
    }

    /// Fields of `over` replace those of `self`.
    pub fn merged(self, over: RunConfig) -> Self {
        macro_rules! pick {
            ($($f:ident),*) => { Self { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(b, theta, r, species, vmax, lmax, model, out, seed, tol, max_evals, threads, surface, equilibria, include_forbidden, x_grid)
    }

    pub fn budget(&self) -> OptimizerBudget {
        let mut b = OptimizerBudget::default();
        if let Some(s) = self.seed {
            b.seed = s;
        }
        if let Some(t) = self.tol {
            b.f_tol = t;
        }
        if let Some(m) = self.max_evals {
            b.max_evals = m;
        }
        b
    }
}

/// Parses `a,b,c` or `start:stop:step` (inclusive of `stop` within 1e-9).
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.contains(':') {
        let (start, stop, step) = parse_triple(text)?;
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(Error::Config(format!("bad range `{text}`")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|k| start + step * k as f64).collect());
    }
    text.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| Error::Config(format!("not a number: `{s}`")))).collect()
}

pub fn parse_triple(text: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("expected start:stop:step, got `{text}`")));
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Config(format!("not a number: `{s}`")));
    Ok((num(parts[0])?, num(parts[1])?, num(parts[2])?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_lists() {
        assert_eq!(parse_values("0,45,90").unwrap(), vec![0.0, 45.0, 90.0]);
        let r = parse_values("1.0:4.0:0.05").unwrap();
        assert_eq!(r.len(), 61);
        assert!((r[60] - 4.0).abs() < 1e-12);
        assert_eq!(parse_values("0:90:15").unwrap().len(), 7);
        assert!(parse_values("1:0:0.1").is_err());
        assert!(parse_values("a,b").is_err());
        assert!(parse_triple("1:2").is_err());
    }

    #[test]
    fn merge_prefers_overrides() {
        let file = RunConfig { b: Some(vec![0.1]), seed: Some(3), ..Default::default() };
        let flags = RunConfig { b: Some(vec![0.2]), ..Default::default() };
        let m = file.merged(flags);
        assert_eq!(m.b, Some(vec![0.2]));
        assert_eq!(m.seed, Some(3));
        assert_eq!(m.budget().seed, 3);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), m);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
