//! Derivative-free minimization: bounded Nelder-Mead with dimension-adaptive
//! coefficients and seeded random restarts.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Upper bound on objective evaluations over all restarts.
    pub max_evals: usize,
    /// Convergence when `f_max - f_min` over the simplex falls below this.
    pub f_tol: f64,
    /// Initial simplex edge along each coordinate.
    pub step: Vec<f64>,
    /// Number of restarts from the incumbent with a freshly drawn simplex.
    pub restarts: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    /// True when the last run met `f_tol` before the budget ran out.
    pub converged: bool,
}

/// Minimizes `f` over the box `[lower, upper]`. Trial points are clamped
/// into the box, so the objective is never evaluated outside it.
pub fn minimize<F>(mut f: F, x0: &[f64], lower: &[f64], upper: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(lower.len(), n);
    assert_eq!(upper.len(), n);
    assert_eq!(opts.step.len(), n);
    let clamp = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best = x0.to_vec();
    clamp(&mut best);
    let mut evals = 0usize;
    let mut best_f = f(&best);
    evals += 1;
    if n == 0 {
        return SimplexResult { x: best, f: best_f, evals, converged: true };
    }
    let mut converged = false;
    for attempt in 0..=opts.restarts {
        if evals >= opts.max_evals {
            break;
        }
        // First run uses the nominal steps; restarts shrink them randomly so
        // the simplex re-explores the neighbourhood of the incumbent.
        let scale: Vec<f64> = if attempt == 0 {
            opts.step.clone()
        } else {
            opts.step.iter().map(|s| s * rng.random_range(0.05..0.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect()
        };
        let before = best_f;
        let run = nelder_mead(&mut f, &best, best_f, &scale, &clamp, opts.f_tol, opts.max_evals - evals);
        evals += run.evals;
        converged = run.converged;
        if run.f < best_f {
            best_f = run.f;
            best = run.x;
        }
        if attempt > 0 && before - best_f < opts.f_tol {
            break;
        }
    }
    SimplexResult { x: best, f: best_f, evals, converged }
}

struct Run {
    x: Vec<f64>,
    f: f64,
    evals: usize,
    converged: bool,
}

fn nelder_mead<F, C>(f: &mut F, x0: &[f64], f0: f64, step: &[f64], clamp: &C, f_tol: f64, budget: usize) -> Run
where
    F: FnMut(&[f64]) -> f64,
    C: Fn(&mut [f64]),
{
    let n = x0.len();
    let nf = n as f64;
    // Gao-Han coefficients keep the method effective beyond a handful of dimensions.
    let (rho, chi, gamma, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut evals = 0usize;
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut vals: Vec<f64> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    vals.push(f0);
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step[i];
        clamp(&mut p);
        if p[i] == x0[i] {
            p[i] -= step[i];
            clamp(&mut p);
        }
        vals.push(f(&p));
        evals += 1;
        pts.push(p);
    }
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut converged = false;
    while evals < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if (vals[n] - vals[0]).abs() < f_tol {
            converged = true;
            break;
        }
        centroid.iter_mut().for_each(|c| *c = 0.0);
        for p in &pts[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / nf;
            }
        }
        let along = |t: &mut Vec<f64>, coef: f64| {
            for i in 0..n {
                t[i] = centroid[i] + coef * (pts[n][i] - centroid[i]);
            }
            clamp(t);
        };
        along(&mut trial, -rho);
        let fr = f(&trial);
        evals += 1;
        if fr < vals[0] {
            let mut exp = vec![0.0; n];
            along(&mut exp, -rho * chi);
            let fe = f(&exp);
            evals += 1;
            if fe < fr {
                pts[n] = exp;
                vals[n] = fe;
            } else {
                pts[n] = trial.clone();
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = trial.clone();
            vals[n] = fr;
            continue;
        }
        let (coef, threshold) = if fr < vals[n] { (-rho * gamma, fr) } else { (gamma, vals[n]) };
        along(&mut trial, coef);
        let fc = f(&trial);
        evals += 1;
        if fc < threshold {
            pts[n] = trial.clone();
            vals[n] = fc;
            continue;
        }
        // Shrink towards the best vertex.
        #[allow(clippy::needless_range_loop)]
        for k in 1..=n {
            for i in 0..n {
                pts[k][i] = pts[0][i] + sigma * (pts[k][i] - pts[0][i]);
            }
            clamp(&mut pts[k]);
            vals[k] = f(&pts[k]);
            evals += 1;
        }
    }
    let (ib, _) = vals.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    Run { x: pts[ib].clone(), f: vals[ib], evals, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(n: usize) -> SimplexOptions {
        SimplexOptions { max_evals: 20_000, f_tol: 1e-14, step: vec![0.5; n], restarts: 3, seed: 7 }
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = minimize(f, &[-1.2, 1.0], &[-5.0; 2], &[5.0; 2], &opts(2));
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
        assert!(r.converged);
    }

    #[test]
    fn respects_bounds() {
        let f = |x: &[f64]| (x[0] + 3.0).powi(2) + (x[1] - 0.5).powi(2);
        let r = minimize(f, &[0.5, 0.5], &[0.0, 0.0], &[1.0, 1.0], &opts(2));
        assert!(r.x[0].abs() < 1e-7 && (r.x[1] - 0.5).abs() < 1e-5);
    }

    #[test]
    fn ten_dimensional_quadratic() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (1.0 + i as f64) * (v - 0.1 * i as f64).powi(2)).sum::<f64>();
        let r = minimize(f, &[1.0; 10], &[-10.0; 10], &[10.0; 10], &opts(10));
        for (i, v) in r.x.iter().enumerate() {
            assert!((v - 0.1 * i as f64).abs() < 1e-5, "{:?}", r.x);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + (x[1] * x[0] - 0.2).powi(2) + 0.01 * x[2].powi(4);
        let a = minimize(f, &[1.0, 1.0, 1.0], &[-2.0; 3], &[2.0; 3], &opts(3));
        let b = minimize(f, &[1.0, 1.0, 1.0], &[-2.0; 3], &[2.0; 3], &opts(3));
        assert_eq!(a.x, b.x);
        assert_eq!(a.evals, b.evals);
    }

    #[test]
    fn budget_is_respected() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2);
        let mut o = opts(2);
        o.max_evals = 12;
        let r = minimize(f, &[0.0, 0.0], &[-5.0; 2], &[5.0; 2], &o);
        assert!(r.evals <= 12 + 3);
        assert!(!r.converged);
    }
}
