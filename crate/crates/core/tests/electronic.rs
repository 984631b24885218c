use h2plus_core::electronic::*;
use h2plus_core::quadrature::gauss_legendre_interval;
use proptest::prelude::*;
use std::f64::consts::PI;

/// `int_1^inf lambda^n exp(-p lambda) d lambda` for n = 0, 1, 2.
fn a_n(n: usize, p: f64) -> f64 {
    let e = (-p).exp();
    match n {
        0 => e / p,
        1 => e * (1.0 / p + 1.0 / (p * p)),
        2 => e * (1.0 / p + 2.0 / (p * p) + 2.0 / (p * p * p)),
        _ => unreachable!(),
    }
}

/// Closed-form field-free energy of `exp(-alpha (r1 + r2))` in prolate
/// spheroidal coordinates, including nuclear repulsion.
fn heitler_london_energy(alpha: f64, r: f64) -> f64 {
    let p = 2.0 * alpha * r;
    let norm = r.powi(3) / 8.0 * 2.0 * PI * (2.0 * a_n(2, p) - 2.0 / 3.0 * a_n(0, p));
    let kinetic = 0.5 * alpha * alpha * 2.0 * PI * r.powi(3) * (a_n(2, p) - a_n(0, p));
    let attraction = 2.0 * PI * r * r * a_n(1, p);
    (kinetic - attraction) / norm + 1.0 / r
}

#[test]
fn heitler_london_matches_closed_form() {
    let settings = QuadratureSettings::default();
    for &(alpha, r) in &[(0.6, 1.0), (0.75, 2.0), (1.1, 2.5), (0.5, 4.0)] {
        for theta in [0.0, 0.7] {
            let g = Geometry::new(r, theta).unwrap();
            let (e, _) = rayleigh_quotient(&TrialParameters::heitler_london(alpha), &g, 0.0, &settings).unwrap();
            let exact = heitler_london_energy(alpha, r);
            assert!(((e - exact) / exact).abs() < 1e-6, "alpha={alpha} R={r}: {e} vs {exact}");
        }
    }
}

#[test]
fn separated_atoms_approach_hydrogen() {
    let settings = QuadratureSettings::default();
    let g = Geometry::new(50.0, 0.0).unwrap();
    let (e, _) = rayleigh_quotient(&TrialParameters::hund_mulliken(1.0), &g, 0.0, &settings).unwrap();
    assert!((e + 0.5).abs() < 1e-3, "{e}");
}

#[test]
fn field_free_energy_is_isotropic() {
    let settings = QuadratureSettings::default();
    let p = TrialParameters::initial_guess();
    let e0 = rayleigh_quotient(&p, &Geometry::new(2.0, 0.0).unwrap(), 0.0, &settings).unwrap().0;
    for theta in [0.3, 0.9, 1.5] {
        let e = rayleigh_quotient(&p, &Geometry::new(2.0, theta).unwrap(), 0.0, &settings).unwrap().0;
        assert!((e - e0).abs() < 1e-10, "theta={theta}: {e} vs {e0}");
    }
}

#[test]
fn optimized_energy_is_a_variational_bound() {
    // Exact Born-Oppenheimer total energy at R = 2 bohr.
    let exact = -0.602_634_2;
    let g = Geometry::new(2.0, 0.0).unwrap();
    let p = optimize_from(&g, 0.0, None, &OptimizerBudget::default()).unwrap();
    assert!(p.converged);
    assert!(p.energy >= exact, "{} below exact {exact}", p.energy);
    assert!(p.energy - exact < 2e-4, "{} too far above exact {exact}", p.energy);
}

#[test]
fn linear_coefficients_are_optimal() {
    let settings = QuadratureSettings::default();
    let g = Geometry::new(2.0, 0.5).unwrap();
    let mut p = TrialParameters::initial_guess();
    p.beta = [[0.4, 0.3], [0.5, 0.5], [0.2, 0.6]];
    let mut integ = ElectronicIntegrator::new(g, 0.2, &settings).unwrap();
    let (best, q) = integ.optimal_linear(&p).unwrap();
    for a in [[1.0, 0.0, 0.0], [1.0, 0.5, -0.2], [0.3, 1.0, 0.7]] {
        let (e, _) = integ.rayleigh_quotient(&TrialParameters { a, ..q }).unwrap();
        assert!(e >= best - 1e-12, "{e} < {best}");
    }
}

#[test]
fn paramagnetic_term_vanishes_for_real_functions() {
    let g = Geometry::new(2.0, 0.8).unwrap();
    let mut p = TrialParameters::initial_guess();
    p.beta = [[0.4, 0.3], [0.5, 0.5], [0.2, 0.6]];
    for xi in [0.0, 0.3, 0.5, 1.0] {
        p.xi = xi;
        let t = linear_field_term(&p, &g, 0.2, QuadratureSettings::default().order.refined()).unwrap();
        assert!(t.abs() < 1e-8, "xi={xi}: {t}");
    }
}

#[test]
fn moments_follow_rigid_rotation_at_zero_field() {
    let settings = QuadratureSettings::default();
    let p = TrialParameters::initial_guess();
    let m0 = ElectronicIntegrator::new(Geometry::new(2.0, 0.0).unwrap(), 0.0, &settings).unwrap().moments(&p).unwrap();
    for theta in [0.4_f64, 1.0] {
        let m = ElectronicIntegrator::new(Geometry::new(2.0, theta).unwrap(), 0.0, &settings).unwrap().moments(&p).unwrap();
        let (c2, s2) = (theta.cos().powi(2), theta.sin().powi(2));
        assert!((m.x2 - (m0.x2 * c2 + m0.z2 * s2)).abs() < 1e-8);
        assert!((m.z2 - (m0.z2 * c2 + m0.x2 * s2)).abs() < 1e-8);
        assert!((m.y2 - m0.y2).abs() < 1e-8);
    }
}

/// Becke cell weight of the first centre, with three smoothing iterations.
fn becke_weight(r1: f64, r2: f64, r: f64) -> f64 {
    let mut mu = (r1 - r2) / r;
    for _ in 0..3 {
        mu = 1.5 * mu - 0.5 * mu * mu * mu;
    }
    0.5 * (1.0 - mu)
}

/// Energy of a trial function from point values alone: two atom-centred
/// spherical product rules glued by Becke partitioning, gradients by
/// central differences.
fn two_centre_energy(p: &TrialParameters, g: &Geometry, b: f64) -> f64 {
    let nuclei = g.nuclei();
    let (t, wt) = gauss_legendre_interval(90, 0.0, 1.0);
    let (u, wu) = gauss_legendre_interval(36, -1.0, 1.0);
    let n_phi = 36;
    let psi = |q: [f64; 3]| trial_value(p, g, b, q).unwrap();
    let dist = |q: [f64; 3], c: [f64; 3]| ((q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2) + (q[2] - c[2]).powi(2)).sqrt();
    let (mut norm, mut energy) = (0.0, 0.0);
    for (k, centre) in nuclei.iter().enumerate() {
        for (ti, wti) in t.iter().zip(&wt) {
            let rad = ti / (1.0 - ti);
            let w_r = wti / (1.0 - ti).powi(2) * rad * rad;
            for (ui, wui) in u.iter().zip(&wu) {
                let s = (1.0 - ui * ui).sqrt();
                for j in 0..n_phi {
                    let phi = 2.0 * PI * (j as f64 + 0.5) / n_phi as f64;
                    let q = [centre[0] + rad * s * phi.cos(), centre[1] + rad * s * phi.sin(), centre[2] + rad * ui];
                    let (r1, r2) = (dist(q, nuclei[0]), dist(q, nuclei[1]));
                    let cell = if k == 0 { becke_weight(r1, r2, g.r) } else { 1.0 - becke_weight(r1, r2, g.r) };
                    let w = w_r * wui * 2.0 * PI / n_phi as f64 * cell;
                    if w == 0.0 {
                        continue;
                    }
                    let f = psi(q);
                    let h = 1e-5;
                    let mut grad2 = 0.0;
                    for d in 0..3 {
                        let (mut a, mut c) = (q, q);
                        a[d] += h;
                        c[d] -= h;
                        grad2 += ((psi(a) - psi(c)) / (2.0 * h)).powi(2);
                    }
                    let dia = 0.5 * b * b * (p.xi * p.xi * q[0] * q[0] + (1.0 - p.xi).powi(2) * q[1] * q[1]);
                    norm += w * f * f;
                    energy += w * (0.5 * grad2 + (dia - 1.0 / r1 - 1.0 / r2) * f * f);
                }
            }
        }
    }
    energy / norm + 1.0 / g.r
}

#[test]
fn independent_two_centre_quadrature_agrees() {
    let settings = QuadratureSettings::default();
    let mut p = TrialParameters::initial_guess();
    p.beta = [[0.4, 0.3], [0.5, 0.5], [0.2, 0.6]];
    p.xi = 0.4;
    for &(b, theta) in &[(0.0, 0.0), (0.2, 0.6), (0.5, 1.2)] {
        let g = Geometry::new(2.0, theta).unwrap();
        let (e, _) = rayleigh_quotient(&p, &g, b, &settings).unwrap();
        let oracle = two_centre_energy(&p, &g, b);
        assert!(((e - oracle) / oracle).abs() < 1e-5, "B={b} theta={theta}: {e} vs {oracle}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trial_function_is_exchange_symmetric(
        alpha in prop::array::uniform4(0.2f64..2.0),
        bx in 0.0f64..1.0, by in 0.0f64..1.0,
        xi in 0.0f64..1.0,
        theta in 0.0f64..std::f64::consts::FRAC_PI_2,
        q in prop::array::uniform3(-3.0f64..3.0),
    ) {
        let p = TrialParameters { alpha, beta: [[bx, by]; 3], a: [1.0, -0.3, 0.6], xi };
        let g = Geometry::new(2.0, theta).unwrap();
        let f = trial_value(&p, &g, 0.3, q).unwrap();
        let f_swapped = trial_value(&p, &g, 0.3, [-q[0], -q[1], -q[2]]).unwrap();
        prop_assert!((f - f_swapped).abs() <= 1e-14 * f.abs().max(1e-300));
    }
}

#[test]
fn dressed_family_is_the_small_field_limit() {
    let q = QuadratureSettings::default();
    let g = Geometry::new(2.0, 0.6).unwrap();
    let mut p = TrialParameters::cold_starts()[0];
    p.xi = 0.4;
    // Without Gaussians the dressed family reduces to the plain one.
    p.beta = [[0.0; 2]; 3];
    let (plain, _) = ElectronicIntegrator::new(g, 0.0, &q).unwrap().optimal_linear(&p).unwrap();
    let (bare, _) = ElectronicIntegrator::dressed(g, &q).optimal_linear(&p).unwrap();
    assert!((plain - bare).abs() < 1e-12, "{plain} vs {bare}");
    // Redressing keeps the function itself.
    p.beta = [[1.5, 0.7], [0.3, 2.0], [0.9, 0.9]];
    let b = 0.05;
    let at_field = ElectronicIntegrator::new(g, b, &q).unwrap().moments(&p).unwrap();
    let limit = ElectronicIntegrator::dressed(g, &q).moments(&p.redress(b, 1.0)).unwrap();
    for (u, v) in [(at_field.x2, limit.x2), (at_field.y2, limit.y2), (at_field.z2, limit.z2), (at_field.xz, limit.xz)] {
        assert!((u - v).abs() < 1e-12, "{u} vs {v}");
    }
    let back = p.redress(b, 1.0).redress(1.0, b);
    for (u, v) in back.beta.iter().flatten().zip(p.beta.iter().flatten()) {
        assert!((u - v).abs() < 1e-14 * v.abs().max(1.0));
    }
}

#[test]
fn dressed_limit_is_no_higher_than_the_plain_optimum() {
    let budget = OptimizerBudget::default();
    let g = Geometry::new(2.0, 0.0).unwrap();
    let plain = optimize_from(&g, 0.0, None, &budget).unwrap();
    let mut start = plain.params;
    start.beta = [[0.0; 2]; 3];
    let dressed = optimize_dressed_from(&g, Some(&start), &budget).unwrap();
    assert!(dressed.energy <= plain.energy + 1e-9, "{} vs {}", dressed.energy, plain.energy);
    assert!(dressed.energy >= -0.6026342, "{}", dressed.energy);
    assert_eq!(dressed.field.b, 0.0);
}
