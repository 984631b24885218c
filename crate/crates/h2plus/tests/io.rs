use std::path::PathBuf;

use h2plus::error::Error;
use h2plus::io::*;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn fixture_text() -> String {
    std::fs::read_to_string(fixture("surface_b0.json")).unwrap()
}

fn edited(f: impl FnOnce(&mut Value)) -> String {
    let mut v: Value = serde_json::from_str(&fixture_text()).unwrap();
    f(&mut v);
    serde_json::to_string_pretty(&v).unwrap()
}

#[test]
fn surface_round_trip_is_byte_identical() {
    let text = fixture_text();
    let (surface, checksum) = surface_from_json(&text).unwrap();
    assert_eq!(surface_to_json(&surface).unwrap(), text);
    assert_eq!(surface_checksum(&surface).unwrap(), checksum);
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["checksum"].as_str().unwrap(), checksum);
    assert!(checksum.starts_with("sha256:"));
}

#[test]
fn save_and_load_preserve_every_bit() {
    let surface = load_surface(&fixture("surface_b0.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("copy.json");
    save_surface(&surface, &path).unwrap();
    let back = load_surface(&path).unwrap();
    assert_eq!(back, surface);
    assert_eq!(file_sha256(&path).unwrap(), file_sha256(&fixture("surface_b0.json")).unwrap());
}

#[test]
fn shuffled_grid_is_rejected() {
    let text = edited(|v| v["r_grid"].as_array_mut().unwrap().swap(3, 4));
    let err = surface_from_json(&text).unwrap_err();
    assert!(matches!(err, Error::Core(h2plus_core::Error::InvalidGrid(_))), "{err}");
}

#[test]
fn tampered_energy_fails_the_checksum() {
    let text = edited(|v| {
        let e = &mut v["energies"][10][2];
        *e = Value::from(e.as_f64().unwrap() + 1e-9);
    });
    assert!(matches!(surface_from_json(&text).unwrap_err(), Error::Checksum { .. }));
}

#[test]
fn schema_and_units_are_checked() {
    let text = edited(|v| v["schema_version"] = Value::from(2));
    assert!(matches!(surface_from_json(&text).unwrap_err(), Error::Schema { found: 2, expected: 1 }));
    let text = edited(|v| v["units"]["length"] = Value::from("angstrom"));
    assert!(matches!(surface_from_json(&text).unwrap_err(), Error::Units { .. }));
    let text = edited(|v| {
        v.as_object_mut().unwrap().remove("energies");
    });
    assert!(matches!(surface_from_json(&text).unwrap_err(), Error::Malformed(_)));
}

#[test]
fn equilibrium_table_round_trips() {
    let rows = vec![
        EquilibriumRow { b: 0.0, theta_deg: 0.0, r_eq: 1.997_123_456_789, energy: -0.602_634_123_456, converged: true },
        EquilibriumRow { b: 0.1, theta_deg: 45.0, r_eq: 1.989_7, energy: -0.600_785, converged: false },
    ];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eq.csv");
    write_equilibria_csv(std::fs::File::create(&path).unwrap(), &rows).unwrap();
    let back = read_equilibria_csv(&path).unwrap();
    assert_eq!(back.len(), 2);
    for (a, b) in rows.iter().zip(&back) {
        assert_eq!(a.converged, b.converged);
        assert!((a.r_eq - b.r_eq).abs() < 1e-12 && (a.energy - b.energy).abs() < 1e-12);
        assert_eq!((a.b, a.theta_deg), (b.b, b.theta_deg));
    }
}

#[test]
fn fixed_formatting_is_locale_free() {
    assert_eq!(fixed(-0.5), "-0.500000000000");
    assert_eq!(fixed(1234.5678901234567), "1234.567890123457");
}
