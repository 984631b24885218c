//! Parallel drivers over independent curves, inclinations, columns and
//! blocks. Results are collected in input order so outputs stay
//! deterministic for any thread count.

use std::fmt::Display;

use h2plus_core::electronic::{
    equilibrium_series, find_equilibrium, optimize_from, refine_dressed_equilibrium, refine_equilibrium, scan_curve, Continuation,
    Equilibrium, Geometry, OptimizerBudget, TrialParameters,
};
use h2plus_core::magnetics::{
    fit_diamagnetic_angular, fit_total_angular, fit_x_surface, position_moments, total_chi, x_of_b, FitModel, SusceptibilityRecord,
    TotalChi, XSample, TOTAL_CHI_FIELDS,
};
use h2plus_core::rovib::{self, RadialGrid, RovibLevel, RovibOptions};
use h2plus_core::surface::{self, HinderedRotorPotential, PotentialSurface};
use h2plus_core::units::{GridSpec, NuclearSpecies};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{EquilibriumRow, ScanRow};

/// Progress sink; lines go to standard error unless quiet.
#[derive(Debug, Clone, Copy, Default)]
pub struct Log {
    pub quiet: bool,
}

impl Log {
    pub fn note(&self, msg: impl Display) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

/// Distance bracket searched for the field-free and first equilibria.
pub const DEFAULT_BRACKET: (f64, f64) = (1.4, 2.6);

/// One curve per `(b, theta)` pair, each warm-started along R.
pub fn scan(bs: &[f64], thetas: &[f64], r: &[f64], budget: &OptimizerBudget, log: Log) -> Result<Vec<ScanRow>> {
    let tasks: Vec<(f64, f64)> = bs.iter().flat_map(|&b| thetas.iter().map(move |&t| (b, t))).collect();
    let curves = tasks
        .par_iter()
        .map(|&(b, t)| {
            let out = scan_curve(t, b, r, None, budget);
            log.note(format_args!("scan: B = {b}, theta = {:.1} deg done", t.to_degrees()));
            out.map(|pts| (b, t, pts))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for (b, t, pts) in curves {
        for (&ri, p) in r.iter().zip(pts) {
            rows.push(ScanRow { b, theta: t, r: ri, point: p.map_err(|e| e.to_string()) });
        }
    }
    Ok(rows)
}

/// Equilibria at one inclination for ascending field strengths: a bracketed
/// search at the first, then continuation.
pub fn equilibria_at(theta: f64, bs: &[f64], budget: &OptimizerBudget) -> Result<Vec<Equilibrium>> {
    let Some((&first, rest)) = bs.split_first() else { return Ok(Vec::new()) };
    let eq = find_equilibrium(theta, first, DEFAULT_BRACKET, None, budget)?;
    let mut out = vec![eq.clone()];
    if !rest.is_empty() {
        out.extend(equilibrium_series(theta, rest, eq.r_eq, Some(&eq.params), Continuation::LowestBasin, budget)?);
    }
    Ok(out)
}

/// Table of equilibria, inclinations in parallel. `bs` must be ascending.
pub fn equilibria(bs: &[f64], thetas: &[f64], budget: &OptimizerBudget, log: Log) -> Result<Vec<EquilibriumRow>> {
    let per_theta = thetas
        .par_iter()
        .map(|&t| {
            let eqs = equilibria_at(t, bs, budget);
            log.note(format_args!("equilibrium: theta = {:.1} deg done", t.to_degrees()));
            eqs
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for (bi, &b) in bs.iter().enumerate() {
        for (ti, &t) in thetas.iter().enumerate() {
            let e = &per_theta[ti][bi];
            rows.push(EquilibriumRow { b, theta_deg: t.to_degrees(), r_eq: e.r_eq, energy: e.energy, converged: e.converged });
        }
    }
    Ok(rows)
}

/// Everything the susceptibility command reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SusceptibilityReport {
    pub r_eq: f64,
    pub energy: f64,
    pub records: Vec<SusceptibilityRecord>,
    pub total: Vec<TotalChi>,
    /// Energies at the total-susceptibility field strengths, per inclination.
    pub field_energies: Vec<Vec<(f64, f64)>>,
    /// Angular fits; present when at least three inclinations were sampled.
    pub diamagnetic_fit: Option<FitModel>,
    pub total_fit: Option<FitModel>,
    pub x_samples: Vec<XSample>,
    pub x_fit: Option<FitModel>,
}

impl SusceptibilityReport {
    /// `(c0, d0)` of the X surface, the zero-field limit of its fit.
    pub fn diamagnetic_from_x(&self) -> Option<(f64, f64)> {
        self.x_fit.as_ref().map(|f| (f.coefficients[0], f.coefficients[3]))
    }
}

/// Field strengths of the X(B, theta) grid.
pub fn x_grid_fields() -> Vec<f64> {
    (0..=20).map(|k| 0.01 * k as f64).collect()
}

/// Zero-field moments, total susceptibilities and optionally the
/// X(B, theta) grid. With `x_grid` each inclination follows the equilibrium
/// up to B = 0.2; the first four steps double as the curvature samples.
pub fn susceptibility(
    thetas: &[f64],
    r_guess: Option<f64>,
    x_grid: bool,
    budget: &OptimizerBudget,
    log: Log,
) -> Result<SusceptibilityReport> {
    let eq0 = match r_guess {
        Some(r) => refine_equilibrium(0.0, 0.0, r, 0.04, None, budget)?,
        None => find_equilibrium(0.0, 0.0, DEFAULT_BRACKET, None, budget)?,
    };
    log.note(format_args!("susceptibility: R_eq(B = 0) = {:.5}, E = {:.9}", eq0.r_eq, eq0.energy));
    let q = budget.quadrature;
    let m0 = position_moments(&eq0.params, &Geometry::new(eq0.r_eq, 0.0)?, 0.0, &q)?;
    let fields: Vec<f64> = if x_grid { x_grid_fields()[1..].to_vec() } else { TOTAL_CHI_FIELDS[1..].to_vec() };
    let per_theta = thetas
        .par_iter()
        .map(|&t| -> Result<_> {
            let m = position_moments(&eq0.params, &Geometry::new(eq0.r_eq, t)?, 0.0, &q)?;
            let series = equilibrium_series(t, &fields, eq0.r_eq, Some(&eq0.params), Continuation::Follow, budget)?;
            // The field-on trial family is richer than the B = 0 one, so the
            // curvature fit starts from its own zero-field limit.
            let first = &series[0];
            let limit = refine_dressed_equilibrium(t, first.r_eq, 0.04, Some(&first.params.redress(fields[0], 1.0)), budget)?;
            let mut samples = vec![(0.0, limit.energy)];
            samples.extend(fields.iter().zip(&series).filter(|(b, _)| **b <= 0.04 + 1e-12).map(|(&b, e)| (b, e.energy)));
            let chi = total_chi(t, &samples)?;
            let mut xs = Vec::new();
            if x_grid {
                xs.push(x_of_b(t, 0.0, &eq0, &q)?);
                for (&b, e) in fields.iter().zip(&series) {
                    xs.push(x_of_b(t, b, e, &q)?);
                }
            }
            let record = SusceptibilityRecord::new(t, &m, m0.x2, m0.z2, chi.chi)?;
            log.note(format_args!("susceptibility: theta = {:.1} deg, chi = {:.6}", t.to_degrees(), chi.chi));
            Ok((record, chi, samples, xs))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    let mut total = Vec::new();
    let mut field_energies = Vec::new();
    let mut x_samples = Vec::new();
    for (r, c, s, xs) in per_theta {
        records.push(r);
        total.push(c);
        field_energies.push(s);
        x_samples.extend(xs);
    }
    let angular = records.len() >= 3;
    let diamagnetic_fit =
        angular.then(|| fit_diamagnetic_angular(&records.iter().map(|r| (r.theta, r.chi_d)).collect::<Vec<_>>())).transpose()?;
    let total_fit = angular.then(|| fit_total_angular(&records.iter().map(|r| (r.theta, r.chi_total)).collect::<Vec<_>>())).transpose()?;
    let x_fit = if x_grid { Some(fit_x_surface(&x_samples.iter().map(|s| (s.b, s.theta, s.x)).collect::<Vec<_>>())?) } else { None };
    Ok(SusceptibilityReport {
        r_eq: eq0.r_eq,
        energy: eq0.energy,
        records,
        total,
        field_energies,
        diamagnetic_fit,
        total_fit,
        x_samples,
        x_fit,
    })
}

/// Surface build with inclination columns in parallel.
pub fn build_surface(grid: &GridSpec, b: f64, budget: &OptimizerBudget, log: Log) -> Result<PotentialSurface> {
    grid.validate()?;
    let r = grid.geometric_r();
    let columns = grid
        .theta_values
        .par_iter()
        .map(|&t| {
            let col = surface::build_column(t, b, &r, budget);
            log.note(format_args!("surface: B = {b}, theta = {:.1} deg column done", t.to_degrees()));
            col
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(surface::assemble_surface(b, &r, &grid.theta_values, columns, budget)?)
}

/// Optimized energies along inclinations at fixed `r`, warm-started in
/// theta from a cold start at the first angle.
pub fn theta_slice(b: f64, r: f64, thetas: &[f64], budget: &OptimizerBudget) -> Result<Vec<f64>> {
    let mut seed: Option<TrialParameters> = None;
    let mut out = Vec::with_capacity(thetas.len());
    for &t in thetas {
        // A converged warm start can still sit in a shallower basin, which
        // shows up as noise in the angular fits; keep the better of warm
        // and cold.
        let g = Geometry::new(r, t)?;
        let cold = optimize_from(&g, b, None, budget)?;
        let p = match seed.as_ref().map(|s| optimize_from(&g, b, Some(s), budget)) {
            Some(Ok(warm)) if warm.energy < cold.energy => warm,
            _ => cold,
        };
        seed = Some(p.params);
        out.push(p.energy);
    }
    Ok(out)
}

/// Rovibrational levels with `(M, pi)` blocks solved in parallel.
pub fn levels(species: &NuclearSpecies, rotor: &HinderedRotorPotential, grid: RadialGrid, opts: &RovibOptions) -> Result<Vec<RovibLevel>> {
    let (_, radial) = rovib::prepare_radial(species, rotor, grid, opts.v_max)?;
    let blocks = rovib::blocks(species, opts)?;
    let per_block = blocks
        .par_iter()
        .map(|blk| rovib::solve_block(blk, &radial, species, rotor.b, opts.model, opts.l_max))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut all: Vec<RovibLevel> = per_block.into_iter().flatten().collect();
    rovib::sort_levels(&mut all);
    Ok(all)
}
