//! Small unconstrained maximiser: BFGS with Armijo backtracking, falling
//! back to Nelder-Mead when the line search keeps failing.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    pub max_iterations: usize,
    /// Stop when the largest gradient component falls below this.
    pub gradient_tolerance: f64,
    /// Stop when an accepted step changes the objective by less than this, relatively.
    pub relative_tolerance: f64,
    /// Line-search failures tolerated before switching to the simplex method.
    pub max_line_search_failures: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-8,
            relative_tolerance: 1e-12,
            max_line_search_failures: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimMethod {
    Bfgs,
    NelderMead,
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub method: OptimMethod,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximises `f`, which returns the value and gradient at a point.
pub fn maximize<F>(f: F, x0: &[f64], opts: &OptimOptions) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let k = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "objective not finite at the starting point ({fx})"
        )));
    }
    if k == 0 {
        return Ok(OptimResult {
            x,
            value: fx,
            gradient: g,
            iterations: 0,
            converged: true,
            method: OptimMethod::Bfgs,
        });
    }
    // Inverse Hessian approximation of -f.
    let identity = |scale: f64| -> Vec<Vec<f64>> {
        (0..k)
            .map(|i| (0..k).map(|j| if i == j { scale } else { 0.0 }).collect())
            .collect()
    };
    let mut h = identity(1.0);
    let mut failures = 0;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        if inf_norm(&g) < opts.gradient_tolerance {
            return Ok(OptimResult {
                x,
                value: fx,
                gradient: g,
                iterations,
                converged: true,
                method: OptimMethod::Bfgs,
            });
        }
        iterations += 1;
        // ascent direction p = H g
        let mut p: Vec<f64> = h.iter().map(|row| dot(row, &g)).collect();
        let mut slope = dot(&g, &p);
        if !(slope > 0.0) {
            h = identity(1.0);
            p = g.clone();
            slope = dot(&g, &p);
        }
        let mut t = 1.0;
        let mut accepted = None;
        let mut full_step_change = f64::INFINITY;
        for halving in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + t * b).collect();
            if let Ok((ft, gt)) = f(&trial) {
                if halving == 0 && ft.is_finite() {
                    full_step_change = (ft - fx).abs();
                }
                if ft.is_finite()
                    && gt.iter().all(|v| v.is_finite())
                    && ft > fx
                    && ft - fx >= 1e-4 * t * slope
                {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            // A full quasi-Newton step that no longer moves the objective
            // means we are at the resolution limit.
            if full_step_change <= opts.relative_tolerance * fx.abs().max(1.0) {
                return Ok(OptimResult {
                    x,
                    value: fx,
                    gradient: g,
                    iterations,
                    converged: true,
                    method: OptimMethod::Bfgs,
                });
            }
            failures += 1;
            if failures >= opts.max_line_search_failures {
                return nelder_mead(&f, &x, opts, iterations);
            }
            h = identity(1.0);
            continue;
        };
        let change = (fn_ - fx).abs();
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        // gradient of -f changes by y
        let y: Vec<f64> = g.iter().zip(&gn).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if iterations == 1 {
                h = identity(sy / dot(&y, &y));
            }
            let hy: Vec<f64> = h.iter().map(|row| dot(row, &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..k {
                for j in 0..k {
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        x = xn;
        fx = fn_;
        g = gn;
        if change <= opts.relative_tolerance * fx.abs().max(1.0) {
            let converged = true;
            return Ok(OptimResult {
                x,
                value: fx,
                gradient: g,
                iterations,
                converged,
                method: OptimMethod::Bfgs,
            });
        }
    }
    let converged = inf_norm(&g) < opts.gradient_tolerance;
    Ok(OptimResult {
        x,
        value: fx,
        gradient: g,
        iterations,
        converged,
        method: OptimMethod::Bfgs,
    })
}

fn nelder_mead<F>(f: &F, start: &[f64], opts: &OptimOptions, used: usize) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let k = start.len();
    let value = |x: &[f64]| -> f64 {
        match f(x) {
            Ok((v, _)) if v.is_finite() => -v,
            _ => f64::INFINITY,
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(start.to_vec(), value(start))];
    for i in 0..k {
        let mut v = start.to_vec();
        v[i] += if v[i].abs() > 1e-3 { 0.05 * v[i] } else { 0.1 };
        let fv = value(&v);
        simplex.push((v, fv));
    }
    let budget = opts.max_iterations.saturating_sub(used).max(1) * 20 * k.max(1);
    let mut iterations = used;
    let mut converged = false;
    for _ in 0..budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[k].1);
        if (worst - best).abs() <= opts.relative_tolerance * best.abs().max(1.0) {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..k)
            .map(|j| simplex[..k].iter().map(|p| p.0[j]).sum::<f64>() / k as f64)
            .collect();
        let along = |c: f64| -> Vec<f64> {
            (0..k)
                .map(|j| centroid[j] + c * (simplex[k].0[j] - centroid[j]))
                .collect()
        };
        let xr = along(-1.0);
        let fr = value(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = value(&xe);
            simplex[k] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[k - 1].1 {
            simplex[k] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[k].1 {
                let xc = along(-0.5);
                let fc = value(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = value(&xc);
                (xc, fc)
            };
            if fc < simplex[k].1.min(fr) {
                simplex[k] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    p.0 =
                        p.0.iter()
                            .zip(&x0)
                            .map(|(a, b)| b + 0.5 * (a - b))
                            .collect();
                    p.1 = value(&p.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let x = simplex.swap_remove(0).0;
    let (fx, g) = f(&x)?;
    Ok(OptimResult {
        converged: converged || inf_norm(&g) < opts.gradient_tolerance,
        x,
        value: fx,
        gradient: g,
        iterations,
        method: OptimMethod::NelderMead,
    })
}
