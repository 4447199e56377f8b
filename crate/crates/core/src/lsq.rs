//! Box-constrained Levenberg-Marquardt for small nonlinear least squares.
//!
//! Minimizes `½‖r(x)‖²` subject to `lower ≤ x ≤ upper`. Each trial step
//! solves the damped normal equations and is projected onto the box; the
//! damping grows on rejected steps and shrinks on accepted ones.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LsqOptions {
    pub max_iter: usize,
    /// Stop when an accepted step reduces the cost by less than this
    /// relative amount.
    pub ftol: f64,
    /// Stop when the projected step is shorter than `xtol · (1 + ‖x‖)`.
    pub xtol: f64,
    /// Stop when the projected gradient infinity norm is below this.
    pub gtol: f64,
    pub initial_damping: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            ftol: 1e-15,
            xtol: 1e-12,
            gtol: 1e-14,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LsqResult {
    pub x: DVector<f64>,
    /// `‖r(x)‖²`.
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn project(x: &mut DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lower[i], upper[i]);
    }
}

fn projected_gradient_norm(
    x: &DVector<f64>,
    g: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> f64 {
    (0..x.len())
        .map(|i| {
            let blocked = (x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0);
            if blocked {
                0.0
            } else {
                g[i].abs()
            }
        })
        .fold(0.0, f64::max)
}

/// `model(x)` returns the residual vector and its Jacobian.
pub fn minimize<F>(
    mut model: F,
    x0: DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    opts: &LsqOptions,
) -> LsqResult
where
    F: FnMut(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let n = x0.len();
    let mut x = x0;
    project(&mut x, lower, upper);
    let (mut r, mut jac) = model(&x);
    let mut cost = r.norm_squared();
    let mut mu = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        if !cost.is_finite() {
            break;
        }
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        if projected_gradient_norm(&x, &grad, lower, upper) <= opts.gtol {
            converged = true;
            break;
        }
        let mut accepted = false;
        while mu < 1e16 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += mu * jtj[(i, i)].max(1e-300);
            }
            let step = match a.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    mu *= 10.0;
                    continue;
                }
            };
            let mut trial = &x + step;
            project(&mut trial, lower, upper);
            let moved = (&trial - &x).norm();
            if moved <= opts.xtol * (1.0 + x.norm()) {
                converged = true;
                break;
            }
            let (rt, jt) = model(&trial);
            let trial_cost = rt.norm_squared();
            if trial_cost.is_finite() && trial_cost < cost {
                let rel = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                x = trial;
                r = rt;
                jac = jt;
                cost = trial_cost;
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                if rel <= opts.ftol {
                    converged = true;
                }
                break;
            }
            mu *= 4.0;
        }
        if converged || !accepted {
            // Damping blew up without progress: the iterate is stationary to
            // working precision only if the gradient is negligible.
            if !accepted && !converged {
                let g = jac.transpose() * &r;
                converged =
                    projected_gradient_norm(&x, &g, lower, upper) <= 1e-8 * (1.0 + cost.sqrt());
            }
            break;
        }
    }
    LsqResult {
        x,
        rss: cost,
        iterations,
        converged,
    }
}
