//! Maximum likelihood for self-exciting processes observed on `[0, T]`.
//!
//! ```text
//! ℓ(θ) = −Λ(T) + Σ_i log λ(T_i)
//! ```
//!
//! For the exponential kernel the excitation at each event follows the
//! exact recursion `A_i = e^{−β(T_i − T_{i−1})}(1 + A_{i−1})`, so the
//! likelihood and its gradient cost O(n). The power-law kernel is summed
//! directly in O(n²) and is limited to [`POWER_LAW_MAX_EVENTS`] events.
//! Earlier events with the same timestamp count as history (index order).

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inar::kernel_bounds;
use crate::model::{EventTimes, KernelFamily, SeppParams, TriggeringKernel};
use crate::optim::{minimize_box, BoxOptions};

pub const POWER_LAW_MAX_EVENTS: usize = 20_000;
pub const MIN_MLE_EVENTS: usize = 10;
pub const DEFAULT_STARTS: usize = 8;

/// Log-likelihood and its gradient with respect to `(η, K, θ)`, where `θ`
/// is `β` or `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoglikEval {
    pub value: f64,
    pub gradient: [f64; 3],
    /// Some `λ(T_i) ≤ 0`; `value` is then `−∞`.
    pub domain_violation: bool,
}

fn check_inputs(params: &SeppParams, times: &EventTimes, horizon: f64) -> Result<()> {
    params.kernel.validate()?;
    if !(params.eta.is_finite() && params.k.is_finite()) {
        return Err(Error::ParameterDomain("eta and K must be finite".into()));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::ParameterDomain(format!(
            "horizon must be >= 0, got {horizon}"
        )));
    }
    if let Some(last) = times.last() {
        if last > horizon {
            return Err(Error::InvalidTimes(format!(
                "event at {last} lies beyond the horizon {horizon}"
            )));
        }
    }
    if matches!(params.kernel, TriggeringKernel::PowerLaw { .. })
        && times.len() > POWER_LAW_MAX_EVENTS
    {
        return Err(Error::TooLarge(format!(
            "power-law likelihood is limited to {POWER_LAW_MAX_EVENTS} events, got {}",
            times.len()
        )));
    }
    Ok(())
}

/// `ℓ(θ)`; returns `−∞` when the intensity is nonpositive at some event.
/// `η` and `K` are not range-checked, so negative values may be probed.
pub fn loglik(params: &SeppParams, times: &EventTimes, horizon: f64) -> Result<f64> {
    Ok(loglik_with_gradient(params, times, horizon)?.value)
}

pub fn loglik_with_gradient(
    params: &SeppParams,
    times: &EventTimes,
    horizon: f64,
) -> Result<LoglikEval> {
    check_inputs(params, times, horizon)?;
    let ts = times.as_slice();
    let (eta, k) = (params.eta, params.k);
    let mut sum_log = 0.0;
    let mut g_eta = -horizon;
    let mut g_k = 0.0;
    let mut g_theta = 0.0;
    let mut violation = false;

    match params.kernel {
        TriggeringKernel::Exponential { beta } => {
            // a = Σ_{j<i} e^{−β(T_i−T_j)}, b = Σ_{j<i} (T_i−T_j) e^{−β(T_i−T_j)}
            let (mut a, mut b) = (0.0f64, 0.0f64);
            for (i, &t) in ts.iter().enumerate() {
                if i > 0 {
                    let d = t - ts[i - 1];
                    let e = (-beta * d).exp();
                    b = e * (b + d * (1.0 + a));
                    a = e * (1.0 + a);
                }
                let lam = eta + k * beta * a;
                if lam <= 0.0 || !lam.is_finite() {
                    violation = true;
                    continue;
                }
                sum_log += lam.ln();
                g_eta += 1.0 / lam;
                g_k += beta * a / lam;
                g_theta += k * (a - beta * b) / lam;
            }
            let mut released = 0.0;
            let mut d_released = 0.0;
            for &t in ts {
                let d = horizon - t;
                let e = (-beta * d).exp();
                released += -(-beta * d).exp_m1();
                d_released += d * e;
            }
            g_k -= released;
            g_theta -= k * d_released;
            sum_log -= eta * horizon + k * released;
        }
        TriggeringKernel::PowerLaw { gamma } => {
            for (i, &t) in ts.iter().enumerate() {
                let (mut s, mut ds) = (0.0, 0.0);
                for &u in &ts[..i] {
                    let l = (t - u).ln_1p();
                    let base = (-gamma * l).exp();
                    s += (gamma - 1.0) * base;
                    ds += base * (1.0 - (gamma - 1.0) * l);
                }
                let lam = eta + k * s;
                if lam <= 0.0 || !lam.is_finite() {
                    violation = true;
                    continue;
                }
                sum_log += lam.ln();
                g_eta += 1.0 / lam;
                g_k += s / lam;
                g_theta += k * ds / lam;
            }
            let mut released = 0.0;
            let mut d_released = 0.0;
            for &t in ts {
                let l = (horizon - t).ln_1p();
                let tail = (-(gamma - 1.0) * l).exp();
                released += 1.0 - tail;
                d_released += tail * l;
            }
            g_k -= released;
            g_theta -= k * d_released;
            sum_log -= eta * horizon + k * released;
        }
    }
    if violation {
        return Ok(LoglikEval {
            value: f64::NEG_INFINITY,
            gradient: [f64::NAN; 3],
            domain_violation: true,
        });
    }
    Ok(LoglikEval {
        value: sum_log,
        gradient: [g_eta, g_k, g_theta],
        domain_violation: false,
    })
}

/// Box bounds for the likelihood search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleBounds {
    pub eta: (f64, f64),
    pub k: (f64, f64),
    pub kernel: (f64, f64),
}

impl MleBounds {
    pub fn for_family(family: KernelFamily) -> Self {
        Self {
            eta: (1e-8, 1e6),
            k: (0.0, 0.999),
            kernel: kernel_bounds(family),
        }
    }

    fn validate(&self, family: KernelFamily) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !(ok(self.eta) && ok(self.k) && ok(self.kernel)) {
            return Err(Error::Config(
                "bounds must be finite with lower <= upper".into(),
            ));
        }
        if self.eta.0 <= 0.0 {
            return Err(Error::Config("eta lower bound must be > 0".into()));
        }
        let floor = match family {
            KernelFamily::Exponential => 0.0,
            KernelFamily::PowerLaw => 1.0,
        };
        if self.kernel.0 <= floor {
            return Err(Error::Config(format!(
                "{} lower bound must exceed {floor}",
                family.param_name()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub params: SeppParams,
    pub loglik: f64,
    pub converged: bool,
    pub n_starts_used: usize,
    /// Parameter names (`eta`, `k`, `beta`/`gamma`) sitting on a bound.
    pub bounds_hit: BTreeSet<String>,
}

/// Optimizer coordinates: `(ln η, K, ln θ')` with `θ' = β` or `γ − 1`.
struct Coords {
    family: KernelFamily,
}

impl Coords {
    fn shape_offset(&self) -> f64 {
        match self.family {
            KernelFamily::Exponential => 0.0,
            KernelFamily::PowerLaw => 1.0,
        }
    }

    fn to_params(&self, x: &[f64]) -> SeppParams {
        SeppParams::new(
            x[0].exp(),
            x[1],
            self.family.with_param(self.shape_offset() + x[2].exp()),
        )
    }

    fn to_internal(&self, eta: f64, k: f64, theta: f64) -> [f64; 3] {
        [eta.ln(), k, (theta - self.shape_offset()).ln()]
    }
}

/// Multi-start maximum likelihood over box bounds.
///
/// Starts draw `η` log-uniformly in `[0.05, 1]·n/T`, `K` uniformly in
/// `[0.05, 0.9]` and the kernel parameter log-uniformly (`β` in
/// `[0.1, 100]/τ̄` with `τ̄ = T/n`, `γ − 1` in `[0.1, 100]`), each clamped
/// into the bounds. Start `i` uses ChaCha stream `i` of `seed`; starts run
/// in parallel and the best likelihood wins, ties going to the lower index.
pub fn fit_mle(
    times: &EventTimes,
    horizon: f64,
    family: KernelFamily,
    bounds: &MleBounds,
    n_starts: usize,
    seed: u64,
) -> Result<MleFit> {
    if times.len() < MIN_MLE_EVENTS {
        return Err(Error::InsufficientData(format!(
            "maximum likelihood needs at least {MIN_MLE_EVENTS} events, got {}",
            times.len()
        )));
    }
    if n_starts == 0 {
        return Err(Error::Config("at least one start is required".into()));
    }
    bounds.validate(family)?;
    let probe = SeppParams::new(1.0, 0.0, family.with_param(bounds.kernel.1));
    check_inputs(&probe, times, horizon)?;

    let coords = Coords { family };
    let lo = coords.to_internal(bounds.eta.0, bounds.k.0, bounds.kernel.0);
    let hi = coords.to_internal(bounds.eta.1, bounds.k.1, bounds.kernel.1);
    // γ lower bound of exactly 1 maps to −∞; keep it finite.
    let lo = [lo[0], lo[1], lo[2].max(-700.0)];

    let n = times.len() as f64;
    let base_rate = n / horizon.max(f64::MIN_POSITIVE);
    let mean_gap = 1.0 / base_rate;

    let objective = |x: &[f64]| -> (f64, Vec<f64>) {
        let p = coords.to_params(x);
        match loglik_with_gradient(&p, times, horizon) {
            Ok(ev) if !ev.domain_violation && ev.value.is_finite() => {
                let theta_scale = p.kernel.param() - coords.shape_offset();
                (
                    -ev.value,
                    vec![
                        -ev.gradient[0] * p.eta,
                        -ev.gradient[1],
                        -ev.gradient[2] * theta_scale,
                    ],
                )
            }
            _ => (f64::INFINITY, vec![0.0; 3]),
        }
    };

    let log_uniform = |rng: &mut ChaCha8Rng, a: f64, b: f64| -> f64 {
        (a.ln() + rng.random::<f64>() * (b / a).ln()).exp()
    };
    let runs: Vec<_> = (0..n_starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let eta0 = log_uniform(&mut rng, 0.05 * base_rate, base_rate);
            let k0 = 0.05 + 0.85 * rng.random::<f64>();
            let theta0 = match family {
                KernelFamily::Exponential => {
                    log_uniform(&mut rng, 0.1 / mean_gap, 100.0 / mean_gap)
                }
                KernelFamily::PowerLaw => 1.0 + log_uniform(&mut rng, 0.1, 100.0),
            };
            let x0 = coords.to_internal(
                eta0.clamp(bounds.eta.0, bounds.eta.1),
                k0.clamp(bounds.k.0, bounds.k.1),
                theta0.clamp(bounds.kernel.0, bounds.kernel.1),
            );
            minimize_box(objective, &x0, &lo, &hi, &BoxOptions::default())
        })
        .collect();

    let mut best_idx = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.f < runs[best_idx].f {
            best_idx = i;
        }
    }
    let best = &runs[best_idx];
    let mut params = coords.to_params(&best.x);
    params.k = params.k.clamp(bounds.k.0, bounds.k.1);
    let mut bounds_hit = BTreeSet::new();
    let near = |v: f64, b: f64| (v - b).abs() <= 1e-9 * (1.0 + b.abs());
    if near(best.x[0], lo[0]) || near(best.x[0], hi[0]) {
        bounds_hit.insert("eta".to_string());
    }
    if near(best.x[1], lo[1]) || near(best.x[1], hi[1]) {
        bounds_hit.insert("k".to_string());
    }
    if near(best.x[2], lo[2]) || near(best.x[2], hi[2]) {
        bounds_hit.insert(family.param_name().to_string());
    }
    let value = loglik(&params, times, horizon)?;
    Ok(MleFit {
        params,
        loglik: value,
        converged: runs.iter().any(|r| r.converged && r.f.is_finite()),
        n_starts_used: n_starts,
        bounds_hit,
    })
}
