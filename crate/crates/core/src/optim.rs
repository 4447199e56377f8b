//! Projected quasi-Newton minimization over a box.
//!
//! Variables sitting on a bound with the gradient pointing outward are
//! frozen for the iteration; the remaining ones take a BFGS step followed
//! by a projected Armijo backtracking search.

#[derive(Debug, Clone, Copy)]
pub(crate) struct BoxOptions {
    pub max_iter: usize,
    /// Projected-gradient infinity norm tolerance, relative to `1 + |f|`.
    pub gtol: f64,
    /// Relative objective change below which the run is considered stalled.
    pub ftol: f64,
}

impl Default for BoxOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            gtol: 1e-9,
            ftol: 1e-15,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BoxResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
    #[allow(dead_code)]
    pub iterations: usize,
}

fn projected_gradient(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            if (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0) {
                0.0
            } else {
                g[i]
            }
        })
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `f(x)` returns the objective and its gradient. Non-finite objective
/// values are treated as infeasible and rejected by the line search.
pub(crate) fn minimize_box<F>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &BoxOptions,
) -> BoxResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let clamp = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let mut x = x0.to_vec();
    clamp(&mut x);
    let (mut fx, mut g) = f(&x);
    let identity = |scale: f64| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { scale } else { 0.0 }).collect())
            .collect()
    };
    let mut h = identity(1.0 / inf_norm(&g).max(1.0));
    let mut fresh = true;
    let mut converged = false;
    let mut stalls = 0;
    let mut iterations = 0;

    if !fx.is_finite() {
        return BoxResult {
            x,
            f: fx,
            converged: false,
            iterations,
        };
    }

    while iterations < opts.max_iter {
        iterations += 1;
        let pg = projected_gradient(&x, &g, lo, hi);
        if inf_norm(&pg) <= opts.gtol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        let free: Vec<bool> = pg.iter().map(|v| *v != 0.0).collect();
        let mut d = vec![0.0; n];
        for i in 0..n {
            if free[i] {
                d[i] = -(0..n)
                    .filter(|&j| free[j])
                    .map(|j| h[i][j] * g[j])
                    .sum::<f64>();
            }
        }
        let mut slope: f64 = (0..n).map(|i| d[i] * g[i]).sum();
        if slope >= 0.0 {
            h = identity(1.0 / inf_norm(&g).max(1.0));
            fresh = true;
            for i in 0..n {
                d[i] = -h[i][i] * pg[i];
            }
            slope = (0..n).map(|i| d[i] * g[i]).sum();
        }

        let mut t = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let mut xt: Vec<f64> = (0..n).map(|i| x[i] + t * d[i]).collect();
            clamp(&mut xt);
            let decrease: f64 = (0..n).map(|i| g[i] * (xt[i] - x[i])).sum();
            let (ft, gt) = f(&xt);
            if ft.is_finite() && ft <= fx + 1e-4 * decrease.min(0.0) && decrease < 0.0 {
                next = Some((xt, ft, gt));
                break;
            }
            t *= 0.5;
        }
        let _ = slope;

        let Some((xn, fn_, gn)) = next else {
            if fresh {
                // No descent even along the scaled gradient: stationary to
                // working precision.
                converged = inf_norm(&pg) <= 1e-5 * (1.0 + fx.abs());
                break;
            }
            h = identity(1.0 / inf_norm(&g).max(1.0));
            fresh = true;
            continue;
        };

        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
        let sy: f64 = (0..n).map(|i| s[i] * y[i]).sum();
        let rel_change = (fx - fn_).abs() / (1.0 + fx.abs());
        x = xn;
        fx = fn_;
        g = gn;

        if sy
            > 1e-12
                * (s.iter().map(|v| v * v).sum::<f64>() * y.iter().map(|v| v * v).sum::<f64>())
                    .sqrt()
        {
            if fresh {
                let yy: f64 = y.iter().map(|v| v * v).sum();
                h = identity(sy / yy);
            }
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| h[i][j] * y[j]).sum())
                .collect();
            let yhy: f64 = (0..n).map(|i| y[i] * hy[i]).sum();
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
            fresh = false;
        }

        if rel_change <= opts.ftol {
            stalls += 1;
            if stalls >= 3 {
                let pg = projected_gradient(&x, &g, lo, hi);
                converged = inf_norm(&pg) <= 1e-5 * (1.0 + fx.abs());
                break;
            }
        } else {
            stalls = 0;
        }
    }
    BoxResult {
        x,
        f: fx,
        converged,
        iterations,
    }
}
