//! Small-parameter least squares: Nelder-Mead simplex with restarts and a
//! Levenberg-Marquardt polish on a finite-difference Jacobian.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Inverse, Solve};

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_iter: usize,
    pub restarts: usize,
    /// Stop when the spread of simplex costs falls below `ftol·(|f|+tiny)`.
    pub ftol: f64,
    /// Also stop once every vertex lies within `xtol·(1+|x|)` of the best.
    pub xtol: f64,
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_iter: 4000, restarts: 3, ftol: 1e-14, xtol: 1e-10, initial_step: 0.1 }
    }
}

/// Nelder-Mead with standard coefficients, restarted around the incumbent.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: SimplexOptions) -> Minimum {
    let n = x0.len();
    let mut best = x0.to_vec();
    let mut best_cost = f(&best);
    let mut total_iter = 0;
    let mut converged = false;

    for restart in 0..=opts.restarts {
        let step = opts.initial_step / (1 << restart.min(4)) as f64;
        let mut simplex: Vec<Vec<f64>> = vec![best.clone()];
        for i in 0..n {
            let mut p = best.clone();
            p[i] += if p[i].abs() > 1e-12 { step * p[i].abs().max(1.0) } else { step };
            simplex.push(p);
        }
        let mut costs: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
        converged = false;

        for _ in 0..opts.max_iter {
            total_iter += 1;
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            costs = order.iter().map(|&i| costs[i]).collect();

            let spread = (costs[n] - costs[0]).abs();
            let size = simplex[1..]
                .iter()
                .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs() / (1.0 + b.abs())))
                .fold(0.0, f64::max);
            if spread <= opts.ftol * (costs[0].abs() + 1e-300) || size <= opts.xtol {
                converged = true;
                break;
            }

            let centroid: Vec<f64> =
                (0..n).map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
            let along =
                |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };

            let xr = along(-1.0);
            let fr = f(&xr);
            if fr < costs[0] {
                let xe = along(-2.0);
                let fe = f(&xe);
                if fe < fr {
                    simplex[n] = xe;
                    costs[n] = fe;
                } else {
                    simplex[n] = xr;
                    costs[n] = fr;
                }
            } else if fr < costs[n - 1] {
                simplex[n] = xr;
                costs[n] = fr;
            } else {
                let (xc, fc) = if fr < costs[n] {
                    let xc = along(-0.5);
                    let fc = f(&xc);
                    (xc, fc)
                } else {
                    let xc = along(0.5);
                    let fc = f(&xc);
                    (xc, fc)
                };
                if fc < costs[n].min(fr) {
                    simplex[n] = xc;
                    costs[n] = fc;
                } else {
                    let x0 = simplex[0].clone();
                    for i in 1..=n {
                        for j in 0..n {
                            simplex[i][j] = x0[j] + 0.5 * (simplex[i][j] - x0[j]);
                        }
                        costs[i] = f(&simplex[i]);
                    }
                }
            }
        }

        let (i, &c) = costs.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty simplex");
        let improved = c < best_cost * (1.0 - 1e-12);
        if c <= best_cost {
            best = simplex[i].clone();
            best_cost = c;
        }
        if converged && !improved && restart > 0 {
            break;
        }
    }

    Minimum { x: best, cost: best_cost, iterations: total_iter, converged }
}

/// Central-difference Jacobian of a residual vector.
pub fn jacobian<R: Fn(&[f64]) -> Vec<f64>>(residual: &R, x: &[f64]) -> Array2<f64> {
    let r0 = residual(x);
    let mut j = Array2::zeros((r0.len(), x.len()));
    for k in 0..x.len() {
        let h = 1e-6 * x[k].abs().max(1e-3);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        let (rp, rm) = (residual(&xp), residual(&xm));
        for i in 0..r0.len() {
            j[[i, k]] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    j
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Damped Gauss-Newton polish.
pub fn levenberg_marquardt<R: Fn(&[f64]) -> Vec<f64>>(residual: R, x0: &[f64], max_iter: usize) -> Minimum {
    let mut x = x0.to_vec();
    let mut cost = sum_sq(&residual(&x));
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..max_iter {
        iterations += 1;
        let j = jacobian(&residual, &x);
        let r = Array1::from(residual(&x));
        let jtj = j.t().dot(&j);
        let jtr = j.t().dot(&r);
        let mut accepted = false;
        for _ in 0..20 {
            let mut a = jtj.clone();
            for d in 0..x.len() {
                a[[d, d]] += lambda * jtj[[d, d]].max(1e-300);
            }
            let Ok(step) = a.solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let tc = sum_sq(&residual(&trial));
            if tc.is_finite() && tc < cost {
                let rel = (cost - tc) / cost.max(1e-300);
                x = trial;
                cost = tc;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel < 1e-12 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted || converged {
            converged = true;
            break;
        }
    }
    Minimum { x, cost, iterations, converged }
}

/// Covariance proxy s²·(JᵀJ)⁻¹ with s² = cost/(m − p), plus the reciprocal
/// condition estimate of JᵀJ (ratio of extreme diagonal-scaled pivots).
pub fn covariance(jac: &Array2<f64>, cost: f64) -> Option<(Array2<f64>, f64)> {
    let (m, p) = jac.dim();
    if m <= p {
        return None;
    }
    let jtj = jac.t().dot(jac);
    let scale: Vec<f64> = (0..p).map(|i| jtj[[i, i]].sqrt()).collect();
    if scale.iter().any(|s| !(*s > 0.0)) {
        return None;
    }
    let normed = Array2::from_shape_fn((p, p), |(i, j)| jtj[[i, j]] / (scale[i] * scale[j]));
    let eig = {
        use ndarray_linalg::{EigValsh, UPLO};
        normed.eigvalsh(UPLO::Upper).ok()?
    };
    let rcond = eig[0] / eig[p - 1];
    let inv = normed.inv().ok()?;
    let s2 = cost / (m - p) as f64;
    let cov = Array2::from_shape_fn((p, p), |(i, j)| s2 * inv[[i, j]] / (scale[i] * scale[j]));
    Some((cov, rcond))
}
