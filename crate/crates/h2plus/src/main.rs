use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use h2plus::config::{parse_triple, parse_values, RunConfig};
use h2plus::drivers::{self, Log};
use h2plus::error::{Error, Result};
use h2plus::io;
use h2plus_core::rovib::{Model, RadialGrid, RovibOptions};
use h2plus_core::surface::decompose_hindered_rotor;
use h2plus_core::units::{field_from_si, field_to_si, GridSpec, NuclearSpecies, SpeciesName};

#[derive(Parser)]
#[command(name = "h2plus", version, about = "H2+/D2+ in a weak uniform magnetic field")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Optimized E(R) curves for every (B, theta) pair.
    Scan,
    /// Equilibrium distance and energy for every (B, theta) pair.
    Equilibrium,
    /// Zero-field moments and diamagnetic, paramagnetic and total susceptibility.
    Susceptibility,
    /// Two-dimensional potential surface V(R, theta) at one field strength.
    Surface,
    /// Rovibrational levels on a stored surface.
    Rovib,
    /// Field strength conversion between B0 and tesla.
    Units,
}

#[derive(Args, Default)]
struct Flags {
    /// Field strengths in B0: `a,b,c` or `start:stop:step`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    b: Option<String>,
    /// Inclinations in degrees: `a,b,c` or `start:stop:step`.
    #[arg(long, global = true)]
    theta: Option<String>,
    /// Distances in bohr: `start:stop:step` (scan) or `start:stop:count` (surface).
    #[arg(long, global = true)]
    r: Option<String>,
    /// Comma-separated species (H2+, D2+).
    #[arg(long, global = true)]
    species: Option<String>,
    /// Highest vibrational quantum number in the basis (default 3).
    #[arg(long, global = true)]
    vmax: Option<usize>,
    /// Highest reported rotational quantum number (default 5).
    #[arg(long, global = true)]
    lmax: Option<i32>,
    /// 1, 2 or `1,2`.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Output file; a manifest is written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the optimizer restarts.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Optimizer convergence tolerance, hartree.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Energy evaluations per optimization.
    #[arg(long, global = true)]
    max_evals: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON file with any of the above settings, or a run manifest; flags
    /// take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Surface file for `rovib`.
    #[arg(long, global = true)]
    surface: Option<PathBuf>,
    /// Equilibrium table whose B = 0 row seeds `susceptibility`.
    #[arg(long, global = true)]
    equilibria: Option<PathBuf>,
    /// Also report levels whose symmetry the nuclear statistics forbid.
    #[arg(long, global = true)]
    forbidden: bool,
    /// Also sample X(B, theta) for B = 0..0.2 and fit it.
    #[arg(long, global = true)]
    x_grid: bool,
    /// Tesla values for `units`.
    #[arg(long, global = true)]
    tesla: Option<String>,
    /// Suppress progress messages.
    #[arg(long, short, global = true)]
    quiet: bool,
}

impl Flags {
    fn to_config(&self) -> Result<RunConfig> {
        let list = |s: &Option<String>| s.as_deref().map(parse_values).transpose();
        let model = self
            .model
            .as_deref()
            .map(|m| {
                m.split(',')
                    .map(|x| x.trim().parse::<u8>().map_err(|_| Error::Config(format!("bad model `{x}`"))))
                    .collect::<Result<Vec<u8>>>()
            })
            .transpose()?;
        Ok(RunConfig {
            b: list(&self.b)?,
            theta: list(&self.theta)?,
            r: self.r.clone(),
            species: self.species.as_ref().map(|s| s.split(',').map(|x| x.trim().to_string()).collect()),
            vmax: self.vmax,
            lmax: self.lmax,
            model,
            out: self.out.clone(),
            seed: self.seed,
            tol: self.tol,
            max_evals: self.max_evals,
            threads: self.threads,
            surface: self.surface.clone(),
            equilibria: self.equilibria.clone(),
            include_forbidden: self.forbidden.then_some(true),
            x_grid: self.x_grid.then_some(true),
        })
    }
}

fn radians(degrees: &[f64]) -> Vec<f64> {
    degrees.iter().map(|d| d.to_radians()).collect()
}

/// Data destination: the `--out` file or standard output.
fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::Io { path: p.clone(), source: e })?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn finish(command: &str, cfg: &RunConfig, outputs: &[&Path], log: Log) -> Result<()> {
    if !outputs.is_empty() {
        let m = io::write_manifest(command, cfg, outputs)?;
        log.note(format_args!("manifest: {}", m.display()));
    }
    Ok(())
}

fn ascending(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn run(command: Command, cfg: &RunConfig, flags: &Flags) -> Result<bool> {
    let log = Log { quiet: flags.quiet };
    let budget = cfg.budget();
    let thetas_deg = cfg.theta.clone().unwrap_or_else(|| vec![0.0]);
    let outputs: Vec<&Path> = cfg.out.iter().map(|p| p.as_path()).collect();
    match command {
        Command::Scan => {
            let bs = cfg.b.clone().unwrap_or_else(|| vec![0.0]);
            let r = parse_values(cfg.r.as_deref().ok_or_else(|| Error::Config("scan needs --r start:stop:step".into()))?)?;
            let rows = drivers::scan(&bs, &radians(&thetas_deg), &r, &budget, log)?;
            io::write_scan_csv(sink(&cfg.out)?, &rows)?;
            let mut ok = true;
            for row in &rows {
                match &row.point {
                    Err(e) => {
                        ok = false;
                        eprintln!("failed: B = {}, theta = {:.1}, R = {}: {e}", row.b, row.theta.to_degrees(), row.r);
                    }
                    Ok(p) if !p.converged => {
                        ok = false;
                        eprintln!("not converged: B = {}, theta = {:.1}, R = {}", row.b, row.theta.to_degrees(), row.r);
                    }
                    Ok(_) => {}
                }
            }
            finish("scan", cfg, &outputs, log)?;
            Ok(ok)
        }
        Command::Equilibrium => {
            let bs = ascending(cfg.b.clone().unwrap_or_else(|| vec![0.0]));
            let rows = drivers::equilibria(&bs, &radians(&thetas_deg), &budget, log)?;
            io::write_equilibria_csv(sink(&cfg.out)?, &rows)?;
            finish("equilibrium", cfg, &outputs, log)?;
            Ok(rows.iter().all(|r| r.converged))
        }
        Command::Susceptibility => {
            let thetas_deg = cfg.theta.clone().unwrap_or_else(|| parse_values("0:90:15").unwrap_or_default());
            let r_guess = match &cfg.equilibria {
                Some(p) => Some(
                    io::read_equilibria_csv(p)?
                        .into_iter()
                        .find(|row| row.b == 0.0)
                        .map(|row| row.r_eq)
                        .ok_or_else(|| Error::Config(format!("{} has no B = 0 row", p.display())))?,
                ),
                None => None,
            };
            let report = drivers::susceptibility(&radians(&thetas_deg), r_guess, cfg.x_grid.unwrap_or(false), &budget, log)?;
            io::write_table2_csv(sink(&cfg.out)?, &report.records)?;
            let fits = serde_json::json!({
                "r_eq": report.r_eq,
                "energy": report.energy,
                "diamagnetic_fit": report.diamagnetic_fit,
                "diamagnetic_from_x_fit": report.diamagnetic_from_x(),
                "total_fit": report.total_fit,
                "x_fit": report.x_fit,
                "total": report.total,
            });
            let fits_text = serde_json::to_string_pretty(&fits)? + "\n";
            match &cfg.out {
                Some(p) => {
                    let fp = p.with_extension("fits.json");
                    std::fs::write(&fp, fits_text).map_err(|e| Error::Io { path: fp.clone(), source: e })?;
                    finish("susceptibility", cfg, &[p.as_path(), fp.as_path()], log)?;
                }
                None => log.note(fits_text),
            }
            Ok(true)
        }
        Command::Surface => {
            let b = match cfg.b.as_deref() {
                Some([b]) => *b,
                _ => return Err(Error::Config("surface needs exactly one --b value".into())),
            };
            let thetas_deg = cfg.theta.clone().unwrap_or_else(|| parse_values("0:90:15").unwrap_or_default());
            let (r0, r1, n) = match cfg.r.as_deref() {
                Some(spec) => parse_triple(spec)?,
                None => {
                    let (r0, r1, n) = h2plus::core::surface::DEFAULT_R_GRID;
                    (r0, r1, n as f64)
                }
            };
            if n.fract() != 0.0 || n < 2.0 {
                return Err(Error::Config("surface --r takes start:stop:count".into()));
            }
            let out = cfg.out.clone().ok_or_else(|| Error::Config("surface needs --out FILE.json".into()))?;
            let grid = GridSpec::new(r0, r1, n as usize, radians(&thetas_deg))?;
            let surface = drivers::build_surface(&grid, b, &budget, log)?;
            io::save_surface(&surface, &out)?;
            io::write_slice_csv(std::io::stdout().lock(), &surface)?;
            log.note(format_args!("checksum: {}", io::surface_checksum(&surface)?));
            if !surface.provenance.flagged.is_empty() {
                log.note(format_args!("{} node(s) stopped on the evaluation budget", surface.provenance.flagged.len()));
            }
            finish("surface", cfg, &[out.as_path()], log)?;
            Ok(surface.provenance.flagged.is_empty())
        }
        Command::Rovib => {
            let path = cfg.surface.clone().ok_or_else(|| Error::Config("rovib needs --surface FILE".into()))?;
            let surface = io::load_surface(&path)?;
            let rotor = decompose_hindered_rotor(&surface, 1)?;
            let grid = RadialGrid::default_within(rotor.r_domain())?;
            let species = cfg.species.clone().unwrap_or_else(|| vec!["H2+".into()]);
            let models = cfg.model.clone().unwrap_or_else(|| vec![1, 2]);
            let mut w = sink(&cfg.out)?;
            let mut first = true;
            for s in &species {
                let name: SpeciesName = s.parse()?;
                let sp = NuclearSpecies::new(name);
                for &m in &models {
                    let opts = RovibOptions {
                        v_max: cfg.vmax.unwrap_or(3),
                        l_max: cfg.lmax.unwrap_or(5),
                        model: Model::from_number(m)?,
                        include_forbidden: cfg.include_forbidden.unwrap_or(false),
                        ..RovibOptions::default()
                    };
                    let levels = drivers::levels(&sp, &rotor, grid, &opts)?;
                    let mut buf = Vec::new();
                    io::write_levels_csv(&mut buf, name, surface.b, &levels)?;
                    let text = String::from_utf8_lossy(&buf);
                    // One header for the concatenated table.
                    let body = if first { &text[..] } else { text.split_once('\n').map_or("", |x| x.1) };
                    w.write_all(body.as_bytes())?;
                    first = false;
                    log.note(format_args!("rovib: {name}, model {m}: {} levels", levels.len()));
                }
            }
            w.flush()?;
            drop(w);
            finish("rovib", cfg, &outputs, log)?;
            Ok(true)
        }
        Command::Units => {
            let mut w = sink(&cfg.out)?;
            writeln!(w, "b_B0,tesla")?;
            for b in cfg.b.clone().unwrap_or_default() {
                writeln!(w, "{},{}", io::fixed(b), io::fixed(field_to_si(b)?))?;
            }
            if let Some(t) = &flags.tesla {
                for t in parse_values(t)? {
                    writeln!(w, "{},{}", io::fixed(field_from_si(t)?), io::fixed(t))?;
                }
            }
            w.flush()?;
            drop(w);
            finish("units", cfg, &outputs, log)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = (|| -> Result<RunConfig> {
        let flags = cli.flags.to_config()?;
        Ok(match &cli.flags.config {
            Some(p) => RunConfig::load(p)?.merged(flags),
            None => flags,
        })
    })();
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command, &cfg, &cli.flags) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
