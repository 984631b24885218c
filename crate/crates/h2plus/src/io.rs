//! Surface files, CSV tables and run manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use h2plus_core::electronic::EnergyPoint;
use h2plus_core::magnetics::SusceptibilityRecord;
use h2plus_core::rovib::RovibLevel;
use h2plus_core::surface::{PotentialSurface, Provenance};
use h2plus_core::units::SpeciesName;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_at, Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Fixed-decimal rendering used for every numeric CSV field.
pub fn fixed(x: f64) -> String {
    format!("{x:.12}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(io_at(path))?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Units {
    pub energy: String,
    pub length: String,
    pub field: String,
    pub angle: String,
}

impl Default for Units {
    fn default() -> Self {
        Self { energy: "hartree".into(), length: "bohr".into(), field: "B0".into(), angle: "radian".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SurfaceBody {
    schema_version: u32,
    units: Units,
    b: f64,
    r_grid: Vec<f64>,
    theta_grid: Vec<f64>,
    energies: Vec<Vec<f64>>,
    provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SurfaceFile {
    #[serde(flatten)]
    body: SurfaceBody,
    checksum: String,
}

fn body_checksum(body: &SurfaceBody) -> Result<String> {
    Ok(format!("sha256:{}", sha256_hex(serde_json::to_string(body)?.as_bytes())))
}

/// Checksum stored with a surface: SHA-256 of the compact JSON of every
/// field except the checksum itself.
pub fn surface_checksum(surface: &PotentialSurface) -> Result<String> {
    body_checksum(&body_of(surface))
}

fn body_of(s: &PotentialSurface) -> SurfaceBody {
    SurfaceBody {
        schema_version: SCHEMA_VERSION,
        units: Units::default(),
        b: s.b,
        r_grid: s.r_grid.clone(),
        theta_grid: s.theta_grid.clone(),
        energies: s.energies.clone(),
        provenance: s.provenance.clone(),
    }
}

pub fn surface_to_json(surface: &PotentialSurface) -> Result<String> {
    surface.validate()?;
    let body = body_of(surface);
    let checksum = body_checksum(&body)?;
    let mut text = serde_json::to_string_pretty(&SurfaceFile { body, checksum })?;
    text.push('\n');
    Ok(text)
}

/// Parses and validates a surface document; returns it with its checksum.
pub fn surface_from_json(text: &str) -> Result<(PotentialSurface, String)> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    let found =
        value.get("schema_version").and_then(serde_json::Value::as_u64).ok_or_else(|| Error::Malformed("missing schema_version".into()))?;
    if found != u64::from(SCHEMA_VERSION) {
        return Err(Error::Schema { found: found as u32, expected: SCHEMA_VERSION });
    }
    let file: SurfaceFile = serde_json::from_value(value).map_err(|e| Error::Malformed(e.to_string()))?;
    let expected = Units::default();
    if file.body.units != expected {
        return Err(Error::Units { found: format!("{:?}", file.body.units), expected: format!("{expected:?}") });
    }
    let b = &file.body;
    let surface = PotentialSurface::new(b.b, b.r_grid.clone(), b.theta_grid.clone(), b.energies.clone(), b.provenance.clone())?;
    let computed = body_checksum(&file.body)?;
    if computed != file.checksum {
        return Err(Error::Checksum { stored: file.checksum, computed });
    }
    Ok((surface, computed))
}

pub fn save_surface(surface: &PotentialSurface, path: &Path) -> Result<()> {
    fs::write(path, surface_to_json(surface)?).map_err(io_at(path))
}

pub fn load_surface(path: &Path) -> Result<PotentialSurface> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    Ok(surface_from_json(&text)?.0)
}

/// One optimized point of a scan, or its failure.
pub struct ScanRow {
    pub b: f64,
    pub theta: f64,
    pub r: f64,
    pub point: std::result::Result<EnergyPoint, String>,
}

pub fn write_scan_csv<W: Write>(out: W, rows: &[ScanRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["b", "theta_deg", "r", "energy", "converged", "evaluations", "quadrature_error", "error"])?;
    for row in rows {
        let head = [fixed(row.b), fixed(row.theta.to_degrees()), fixed(row.r)];
        match &row.point {
            Ok(p) => w.write_record(head.iter().cloned().chain([
                fixed(p.energy),
                p.converged.to_string(),
                p.evaluations.to_string(),
                format!("{:.3e}", p.quadrature_error),
                String::new(),
            ]))?,
            Err(e) => w.write_record(head.iter().cloned().chain([String::new(), "false".into(), "0".into(), String::new(), e.clone()]))?,
        }
    }
    w.flush()?;
    Ok(())
}

/// One row of an equilibrium table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumRow {
    pub b: f64,
    pub theta_deg: f64,
    pub r_eq: f64,
    pub energy: f64,
    pub converged: bool,
}

pub fn write_equilibria_csv<W: Write>(out: W, rows: &[EquilibriumRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["b", "theta_deg", "r_eq", "energy", "converged"])?;
    for r in rows {
        w.write_record([fixed(r.b), fixed(r.theta_deg), fixed(r.r_eq), fixed(r.energy), r.converged.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_equilibria_csv(path: &Path) -> Result<Vec<EquilibriumRow>> {
    let mut rd = csv::Reader::from_path(path)?;
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_table2_csv<W: Write>(out: W, records: &[SusceptibilityRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theta_deg", "x2", "y2", "z2", "chi_d", "chi_p", "chi"])?;
    for r in records {
        w.write_record([
            fixed(r.theta.to_degrees()),
            fixed(r.x2),
            fixed(r.y2),
            fixed(r.z2),
            fixed(r.chi_d),
            fixed(r.chi_p),
            fixed(r.chi_total),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_levels_csv<W: Write>(out: W, species: SpeciesName, b: f64, levels: &[RovibLevel]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["species", "B", "model", "M", "parity", "v_label", "L_label", "energy_hartree", "mixed", "forbidden"])?;
    for l in levels {
        w.write_record([
            species.to_string(),
            fixed(b),
            l.model.number().to_string(),
            l.m.to_string(),
            if l.z_parity > 0 { "+".to_string() } else { "-".to_string() },
            l.dominant_v.to_string(),
            l.dominant_l.to_string(),
            fixed(l.energy),
            l.mixed.to_string(),
            l.forbidden.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Surface nodes as `(R, theta_deg, E)` rows.
pub fn write_slice_csv<W: Write>(out: W, surface: &PotentialSurface) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["R", "theta_deg", "E"])?;
    for (j, t) in surface.theta_grid.iter().enumerate() {
        for (i, r) in surface.r_grid.iter().enumerate() {
            w.write_record([fixed(*r), fixed(t.to_degrees()), fixed(surface.energies[i][j])])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: PathBuf,
    pub sha256: String,
}

/// Configuration, versions and output checksums of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: crate::config::RunConfig,
    pub version: String,
    pub core_version: String,
    pub outputs: Vec<OutputEntry>,
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// Writes `<first output>.manifest.json` listing every output with its hash.
pub fn write_manifest(command: &str, config: &crate::config::RunConfig, outputs: &[&Path]) -> Result<PathBuf> {
    let first = outputs.first().ok_or_else(|| Error::Config("manifest without outputs".into()))?;
    let entries = outputs
        .iter()
        .map(|p| Ok(OutputEntry { path: p.file_name().map(PathBuf::from).unwrap_or_default(), sha256: file_sha256(p)? }))
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        command: command.into(),
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        core_version: h2plus_core::VERSION.into(),
        outputs: entries,
    };
    let path = manifest_path(first);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(io_at(&path))?;
    Ok(path)
}
