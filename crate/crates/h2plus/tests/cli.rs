use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn h2plus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_h2plus")).args(args).output().unwrap()
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

#[test]
fn units_converts_both_ways() {
    let o = h2plus(&["units", "--b", "1,0.1", "--tesla", "23500"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("1.000000000000,235000.000000000000"), "{text}");
    assert!(text.contains("0.100000000000,23500.000000000000"), "{text}");
}

#[test]
fn invalid_input_exits_with_two() {
    let o = h2plus(&["scan", "--b=-0.1", "--r", "1.0:2.0:0.5", "-q"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let o = h2plus(&["surface", "--b", "0", "-q"]);
    assert_eq!(o.status.code(), Some(2), "surface without --out");
}

#[test]
fn zero_field_scan_is_isotropic_and_deterministic() {
    let args = ["scan", "--b", "0", "--theta", "0,60", "--r", "1.8:2.2:0.2", "--seed", "7", "-q"];
    let a = h2plus(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = h2plus(&args);
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let theta = column(&text, "theta_deg");
    let energy: Vec<f64> = column(&text, "energy").iter().map(|e| e.parse().unwrap()).collect();
    let (zero, sixty): (Vec<_>, Vec<_>) = theta.iter().zip(&energy).partition(|(t, _)| t.parse::<f64>().unwrap() == 0.0);
    assert_eq!(zero.len(), 3);
    for (p, q) in zero.iter().zip(&sixty) {
        assert!((p.1 - q.1).abs() < 1e-9, "{} vs {}", p.1, q.1);
    }
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn rovib_writes_a_manifest_that_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("levels.csv");
    let surface = fixture("surface_b0.json");
    let o = h2plus(&["rovib", "--surface", &surface, "--species", "H2+,D2+", "--lmax", "3", "--out", out.to_str().unwrap(), "-q"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = dir.path().join("levels.csv.manifest.json");
    let m: serde_json::Value = serde_json::from_str(&read(&manifest)).unwrap();
    assert_eq!(m["command"], "rovib");
    assert_eq!(m["outputs"][0]["sha256"].as_str().unwrap(), h2plus::io::file_sha256(&out).unwrap());

    let first = read(&out);
    let again = dir.path().join("again.csv");
    let o = h2plus(&["rovib", "--config", manifest.to_str().unwrap(), "--out", again.to_str().unwrap(), "-q"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&again), first);

    let species = column(&first, "species");
    assert!(species.iter().any(|s| s == "H2+") && species.iter().any(|s| s == "D2+"));
    assert!(column(&first, "model").iter().any(|m| m == "1") && column(&first, "model").iter().any(|m| m == "2"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{ "b": [2.0], "theta": [15.0] }"#).unwrap();
    let o = h2plus(&["units", "--config", cfg.to_str().unwrap()]);
    assert!(stdout(&o).contains("2.000000000000,470000.000000000000"));
    let o = h2plus(&["units", "--config", cfg.to_str().unwrap(), "--b", "0.5"]);
    let text = stdout(&o);
    assert!(text.contains("0.500000000000,117500.000000000000") && !text.contains("470000"));
    std::fs::write(&cfg, r#"{ "bogus": 1 }"#).unwrap();
    assert_eq!(h2plus(&["units", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn equilibrium_table_feeds_susceptibility() {
    let dir = tempfile::tempdir().unwrap();
    let eq = dir.path().join("eq.csv");
    let o = h2plus(&["equilibrium", "--b", "0", "--theta", "0", "--out", eq.to_str().unwrap(), "-q"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r_eq: f64 = column(&read(&eq), "r_eq")[0].parse().unwrap();
    assert!((r_eq - 1.9971).abs() < 5e-3, "{r_eq}");

    let table = dir.path().join("chi.csv");
    let o = h2plus(&["susceptibility", "--theta", "0", "--equilibria", eq.to_str().unwrap(), "--out", table.to_str().unwrap(), "-q"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&table);
    let x2: f64 = column(&text, "x2")[0].parse().unwrap();
    let chi_p: f64 = column(&text, "chi_p")[0].parse().unwrap();
    assert!((x2 - 0.64036).abs() < 2e-3, "{x2}");
    assert!(chi_p.abs() < 5e-3, "{chi_p}");
    let fits: serde_json::Value = serde_json::from_str(&read(&dir.path().join("chi.fits.json"))).unwrap();
    assert!((fits["r_eq"].as_f64().unwrap() - r_eq).abs() < 5e-3);
}
