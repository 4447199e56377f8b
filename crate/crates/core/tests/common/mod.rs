//! Reference implementations used as oracles by the integration tests.
//! They are written from the model definitions directly and share no code
//! with the library beyond its data types.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Triggering density, evaluated from the closed forms.
pub fn density(family: &str, theta: f64, t: f64) -> f64 {
    match family {
        "exp" => theta * (-theta * t).exp(),
        "powerlaw" => (theta - 1.0) * (1.0 + t).powf(-theta),
        _ => unreachable!(),
    }
}

/// Intensity just after the open history `T_i < t`.
pub fn intensity(eta: f64, k: f64, family: &str, theta: f64, times: &[f64], t: f64) -> f64 {
    eta + k * times
        .iter()
        .filter(|&&ti| ti < t)
        .map(|&ti| density(family, theta, t - ti))
        .sum::<f64>()
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

fn simpson(f: &dyn Fn(f64) -> f64, s: Panel, tol: f64, depth: u32) -> f64 {
    let Panel {
        a,
        b,
        fa,
        fm,
        fb,
        whole,
    } = s;
    let m = 0.5 * (a + b);
    let flm = f(0.5 * (a + m));
    let frm = f(0.5 * (m + b));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    let l = Panel {
        a,
        b: m,
        fa,
        fm: flm,
        fb: fm,
        whole: left,
    };
    let r = Panel {
        a: m,
        b,
        fa: fm,
        fm: frm,
        fb,
        whole: right,
    };
    simpson(f, l, tol / 2.0, depth - 1) + simpson(f, r, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of a smooth integrand on `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(
        f,
        Panel {
            a,
            b,
            fa,
            fm,
            fb,
            whole,
        },
        tol,
        50,
    )
}

/// `Λ(T_i)` for every event by piecewise quadrature between events, where
/// the intensity is smooth.
pub fn compensator_by_quadrature(
    eta: f64,
    k: f64,
    family: &str,
    theta: f64,
    times: &[f64],
) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let hist = &times[..i];
        let f = |s: f64| {
            eta + k * hist
                .iter()
                .map(|&ti| density(family, theta, s - ti))
                .sum::<f64>()
        };
        acc += integrate(&f, prev, t, 1e-13);
        out.push(acc);
        prev = t;
    }
    out
}

/// `Σ ln λ(T_i) − Λ(T)` by the double sum and closed-form kernel integrals.
pub fn loglik_bruteforce(
    eta: f64,
    k: f64,
    family: &str,
    theta: f64,
    times: &[f64],
    horizon: f64,
) -> f64 {
    let mut s = 0.0;
    for i in 0..times.len() {
        let mut lam = eta;
        for j in 0..i {
            lam += k * density(family, theta, times[i] - times[j]);
        }
        s += lam.ln();
    }
    let mut comp = eta * horizon;
    for &tj in times {
        let u = horizon - tj;
        comp += k * match family {
            "exp" => 1.0 - (-theta * u).exp(),
            "powerlaw" => 1.0 - (1.0 + u).powf(1.0 - theta),
            _ => unreachable!(),
        };
    }
    s - comp
}

/// Unit-rate exponential draws by inversion.
pub fn unit_exponentials(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect()
}

/// `sup |F_n − F|` on a dense grid plus the sample points themselves,
/// checking both one-sided limits at each jump.
pub fn ks_dense_grid(samples: &[f64], cdf: impl Fn(f64) -> f64, grid: usize) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let ecdf_right = |x: f64| s.partition_point(|&v| v <= x) as f64 / n;
    let ecdf_left = |x: f64| s.partition_point(|&v| v < x) as f64 / n;
    let hi = s.last().copied().unwrap_or(1.0) * 1.5 + 1.0;
    let mut d: f64 = 0.0;
    for i in 0..=grid {
        let x = hi * i as f64 / grid as f64;
        d = d.max((ecdf_right(x) - cdf(x)).abs());
    }
    for &x in &s {
        d = d
            .max((ecdf_right(x) - cdf(x)).abs())
            .max((ecdf_left(x) - cdf(x)).abs());
    }
    d
}
