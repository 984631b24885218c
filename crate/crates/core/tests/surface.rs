use h2plus_core::electronic::OptimizerBudget;
use h2plus_core::surface::*;
use h2plus_core::units::GridSpec;

fn degrees(step: f64) -> Vec<f64> {
    (0..=(90.0 / step) as usize).map(|k| (k as f64 * step).to_radians()).collect()
}

#[test]
fn zero_field_surface_is_isotropic_and_barrier_free() {
    let grid = GridSpec::new(1.2, 3.6, 9, degrees(15.0)).unwrap();
    let s = build_surface(&grid, 0.0, &OptimizerBudget::default()).unwrap();
    assert!(s.provenance.flagged.is_empty());
    let noise = s.theta_spread();
    assert!(noise < 1e-9, "{noise}");
    for n_terms in [1, 2] {
        let rotor = decompose_hindered_rotor(&s, n_terms).unwrap();
        for r in grid.geometric_r() {
            assert!(rotor.v90.eval(r).unwrap().abs() <= 2.0 * noise + 1e-12);
        }
    }
    // The interpolant reproduces nodes and is flat in theta.
    let it = s.interpolator().unwrap();
    let r = s.r_grid[4];
    assert!((it.eval(r, 0.0).unwrap() - s.energies[4][0]).abs() < 1e-12);
    assert!((it.eval(2.0, 0.3).unwrap() - it.eval(2.0, 1.1).unwrap()).abs() < 1e-9);
}

#[test]
fn decomposition_reproduces_a_synthetic_rotor() {
    let r: Vec<f64> = (0..20).map(|i| 1.0 + 0.2 * i as f64).collect();
    let thetas = degrees(15.0);
    let v0 = |r: f64| 0.1 * (1.0 - (-0.7 * (r - 2.0)).exp()).powi(2) - 0.6;
    let v90 = |r: f64| 0.002 + 0.0005 * r;
    let energies: Vec<Vec<f64>> = r.iter().map(|&x| thetas.iter().map(|t| v0(x) + v90(x) * t.sin().powi(2)).collect()).collect();
    let surface = PotentialSurface::new(0.2, r.clone(), thetas, energies, Provenance::from_budget(&OptimizerBudget::default())).unwrap();
    let rotor = decompose_hindered_rotor(&surface, 1).unwrap();
    assert!(rotor.global_rms < 1e-14);
    for &x in &r {
        assert!((rotor.v90.eval(x).unwrap() - v90(x)).abs() < 1e-14);
        assert!((rotor.eval(x, 0.4).unwrap() - (v0(x) + v90(x) * 0.4f64.sin().powi(2))).abs() < 1e-13);
    }
}
