//! Bin-count autoregression estimator for self-exciting processes.
//!
//! Events are counted in bins of width `Δ`; the counts are regressed on
//! their own `p` lags by conditional least squares,
//!
//! ```text
//! X_n ≈ α_0 + Σ_{k=1}^{p} α_k X_{n−k},     n = p+1, …, N
//! ```
//!
//! and the coefficients normalize to `η̂ = α_0/Δ`, `K̂ = Σ α_k` and the
//! kernel samples `ĝ_k = α_k/(K̂Δ)`. A parametric kernel is then fitted to
//! `ĝ_k` at the bin midpoints `(k − ½)Δ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{self, LsqOptions};
use crate::model::{EventTimes, KernelFamily, SeppParams, TriggeringKernel};

type Transform = fn(f64) -> f64;

/// Fewest events a window must hold before it is estimated.
pub const MIN_WINDOW_EVENTS: usize = 10;

/// Share of zero bins above which a window is flagged as zero-heavy.
pub const ZERO_HEAVY_SHARE: f64 = 0.99;

/// Branching-factor magnitude below which kernel fits carry no signal.
pub const LOW_SIGNAL_K: f64 = 0.05;

pub const EXP_BETA_BOUNDS: (f64, f64) = (1e-6, 1e4);
pub const POWER_LAW_GAMMA_BOUNDS: (f64, f64) = (1.0 + 1e-6, 1e3);

pub fn kernel_bounds(family: KernelFamily) -> (f64, f64) {
    match family {
        KernelFamily::Exponential => EXP_BETA_BOUNDS,
        KernelFamily::PowerLaw => POWER_LAW_GAMMA_BOUNDS,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinCountSeries {
    pub delta: f64,
    pub origin: f64,
    pub counts: Vec<u32>,
}

impl BinCountSeries {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn zero_share(&self) -> f64 {
        if self.counts.is_empty() {
            return 1.0;
        }
        self.counts.iter().filter(|&&c| c == 0).count() as f64 / self.counts.len() as f64
    }
}

/// `x / step` snapped to the nearest integer when within rounding noise.
fn snapped_ratio(x: f64, step: f64) -> f64 {
    let q = x / step;
    let r = q.round();
    if (q - r).abs() < 1e-9 {
        r
    } else {
        q
    }
}

/// Counts events in the bins `(start + (k−1)Δ, start + kΔ]`, `k = 1..=⌊L/Δ⌋`.
///
/// A trailing partial bin is dropped. An event exactly at `start` is
/// counted in the first bin so that every event of the closed covered span
/// `[start, start + ⌊L/Δ⌋Δ]` lands in exactly one bin.
pub fn discretize(times: &EventTimes, delta: f64, start: f64, end: f64) -> Result<BinCountSeries> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "bin width must be > 0, got {delta}"
        )));
    }
    if !(start.is_finite() && end.is_finite()) || end - start < delta * (1.0 - 1e-9) {
        return Err(Error::InsufficientData(format!(
            "span [{start}, {end}) is shorter than one bin of width {delta}"
        )));
    }
    let n_bins = snapped_ratio(end - start, delta).floor() as usize;
    let mut counts = vec![0u32; n_bins];
    for t in times.iter() {
        if t < start {
            continue;
        }
        let q = snapped_ratio(t - start, delta).ceil().max(1.0);
        if q > n_bins as f64 {
            if t >= end {
                break;
            }
            continue;
        }
        counts[q as usize - 1] += 1;
    }
    Ok(BinCountSeries {
        delta,
        origin: start,
        counts,
    })
}

/// Conditional least squares solution for the lag-`p` autoregression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InarFit {
    /// `α_0, α_1, …, α_p`.
    pub alpha: Vec<f64>,
    pub rss: f64,
    /// Number of regression rows, `N − p`.
    pub rows: usize,
    pub rank: usize,
    /// Description of the rank deficiency when the design is singular; the
    /// coefficients are then the minimum-norm lag solution.
    pub singular: Option<String>,
}

impl InarFit {
    pub fn p(&self) -> usize {
        self.alpha.len() - 1
    }

    /// Promotes a rank-deficient fit to an error.
    pub fn require_full_rank(self) -> Result<Self> {
        match self.singular {
            Some(msg) => Err(Error::SingularDesign(msg)),
            None => Ok(self),
        }
    }
}

/// The least-squares objective `Σ_n (X_n − α_0 − Σ_k α_k X_{n−k})²`.
pub fn inar_objective(bins: &BinCountSeries, alpha: &[f64]) -> f64 {
    let p = alpha.len() - 1;
    let x: Vec<f64> = bins.counts.iter().map(|&c| c as f64).collect();
    (p..x.len())
        .map(|i| {
            let pred = alpha[0] + (1..=p).map(|k| alpha[k] * x[i - k]).sum::<f64>();
            (x[i] - pred).powi(2)
        })
        .sum()
}

/// Solves a well-conditioned positive definite system; `None` when any
/// pivot is negligible relative to the largest diagonal entry.
fn solve_cholesky(cov: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let p = cov.nrows();
    let max_diag = cov.diagonal().iter().fold(0.0f64, |a, &b| a.max(b));
    let chol = cov.clone().cholesky()?;
    let tol = max_diag * 1e-10 * p as f64;
    let l = chol.l_dirty();
    if (0..p).any(|i| l[(i, i)].powi(2) <= tol) {
        return None;
    }
    Some(chol.solve(rhs))
}

/// Minimum-norm solution through the eigendecomposition, with the
/// numerical rank.
fn solve_min_norm(cov: DMatrix<f64>, rhs: &DVector<f64>) -> (DVector<f64>, usize) {
    let p = cov.nrows();
    let eig = SymmetricEigen::new(cov);
    let max_ev = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let tol = max_ev * 1e-10 * p as f64;
    let mut coef = DVector::<f64>::zeros(p);
    let mut rank = 0;
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > tol && ev > 0.0 {
            rank += 1;
            let v = eig.eigenvectors.column(i);
            coef.axpy(v.dot(rhs) / ev, &v, 1.0);
        }
    }
    (coef, rank)
}

pub fn fit_inar(bins: &BinCountSeries, p: usize) -> Result<InarFit> {
    if p == 0 {
        return Err(Error::ParameterDomain("lag order p must be >= 1".into()));
    }
    let n = bins.len();
    if n <= p + 1 {
        return Err(Error::InsufficientData(format!(
            "{n} bins cannot support lag order {p} (need more than {})",
            p + 1
        )));
    }
    let x: Vec<f64> = bins.counts.iter().map(|&c| c as f64).collect();
    let m = n - p;
    let mf = m as f64;

    // Column j (0-based lag j+1) holds x[p-1-j .. n-1-j]; column "y" is x[p..n].
    // Raw cross products are sums of integer products and therefore exact.
    let lag_sum = |j: usize| -> f64 { x[p - 1 - j..n - 1 - j].iter().sum() };
    let sums: Vec<f64> = (0..p).map(lag_sum).collect();
    let y_sum: f64 = x[p..].iter().sum();

    // S_{j,k} = Σ_{i=p}^{n-1} x[i-j] x[i-k] for lags j, k in 0..=p (lag 0 is
    // the response), filled from row 0 with the shift identity
    // S_{j+1,k+1} = S_{j,k} + x[p-1-j]x[p-1-k] − x[n-1-j]x[n-1-k].
    let mut full = DMatrix::<f64>::zeros(p + 1, p + 1);
    for k in 0..=p {
        full[(0, k)] = x[p..]
            .iter()
            .zip(&x[p - k..n - k])
            .map(|(a, b)| a * b)
            .sum();
        full[(k, 0)] = full[(0, k)];
    }
    for j in 0..p {
        for k in j..p {
            let v = full[(j, k)] + x[p - 1 - j] * x[p - 1 - k] - x[n - 1 - j] * x[n - 1 - k];
            full[(j + 1, k + 1)] = v;
            full[(k + 1, j + 1)] = v;
        }
    }

    let mut cov = DMatrix::<f64>::zeros(p, p);
    let mut cross = DVector::<f64>::zeros(p);
    for j in 0..p {
        cross[j] = full[(0, j + 1)] - sums[j] * y_sum / mf;
        for k in 0..p {
            cov[(j, k)] = full[(j + 1, k + 1)] - sums[j] * sums[k] / mf;
        }
    }

    let (coef, rank) = if m <= p {
        // Fewer rows than lags: the design is rank deficient for sure and
        // the row space is the smaller one to decompose.
        let means: Vec<f64> = sums.iter().map(|s| s / mf).collect();
        let design = DMatrix::from_fn(m, p, |i, j| x[p + i - 1 - j] - means[j]);
        let yc = DVector::from_iterator(m, x[p..].iter().map(|v| v - y_sum / mf));
        let (u, rank) = solve_min_norm(&design * design.transpose(), &yc);
        (design.transpose() * u, rank)
    } else {
        match solve_cholesky(&cov, &cross) {
            Some(c) => (c, p),
            None => solve_min_norm(cov, &cross),
        }
    };
    let singular = if rank < p {
        Some(format!(
            "lag design has rank {rank} of {p} over {m} rows; minimum-norm coefficients reported"
        ))
    } else {
        None
    };
    let mut alpha = Vec::with_capacity(p + 1);
    alpha.push((y_sum - (0..p).map(|j| coef[j] * sums[j]).sum::<f64>()) / mf);
    alpha.extend(coef.iter().copied());
    let rss = inar_objective(bins, &alpha);
    Ok(InarFit {
        alpha,
        rss,
        rows: m,
        rank: rank + 1,
        singular,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InarFlags {
    pub k_negative: bool,
    pub k_ge_one: bool,
    pub eta_negative: bool,
    pub solver_failed: bool,
    pub singular_design: bool,
    pub zero_heavy: bool,
    pub low_signal: bool,
    pub kernel_fit_skipped: bool,
    pub kernel_at_bound: bool,
}

impl InarFlags {
    /// Flags that mark the window as outside the stationary SEPP model.
    pub fn breaks_model(&self) -> bool {
        self.k_negative || self.k_ge_one || self.solver_failed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub eta_hat: f64,
    pub k_hat: f64,
    /// `ĝ_1..ĝ_p`; `None` when `K̂ = 0`.
    pub g_hat: Option<Vec<f64>>,
    pub flags: InarFlags,
}

pub fn normalize(alpha: &[f64], delta: f64) -> Result<Normalized> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "bin width must be > 0, got {delta}"
        )));
    }
    if alpha.is_empty() {
        return Err(Error::InsufficientData(
            "no coefficients to normalize".into(),
        ));
    }
    let eta_hat = alpha[0] / delta;
    let k_hat: f64 = alpha[1..].iter().sum();
    let mut flags = InarFlags {
        k_negative: k_hat <= 0.0,
        k_ge_one: k_hat >= 1.0,
        eta_negative: eta_hat < 0.0,
        low_signal: k_hat < LOW_SIGNAL_K,
        ..Default::default()
    };
    let g_hat = if k_hat == 0.0 {
        flags.kernel_fit_skipped = true;
        None
    } else {
        Some(alpha[1..].iter().map(|a| a / (k_hat * delta)).collect())
    };
    Ok(Normalized {
        eta_hat,
        k_hat,
        g_hat,
        flags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFit {
    pub kernel: TriggeringKernel,
    pub rss: f64,
    pub converged: bool,
    pub at_bound: bool,
    /// Start values tried, in the natural parameter.
    pub starts: Vec<f64>,
}

/// Multi-start values for the kernel shape parameter.
fn kernel_starts(family: KernelFamily, p: usize, delta: f64) -> Vec<f64> {
    let (lo, hi) = match family {
        // Decay times between one bin and the whole lag memory.
        KernelFamily::Exponential => (1.0 / (p as f64 * delta), 2.0 / delta),
        // Offsets γ − 1.
        KernelFamily::PowerLaw => (0.1, 100.0),
    };
    let (blo, bhi) = kernel_bounds(family);
    (0..5)
        .map(|i| {
            let v = (lo.ln() + (hi / lo).ln() * i as f64 / 4.0).exp();
            match family {
                KernelFamily::Exponential => v.clamp(blo, bhi),
                KernelFamily::PowerLaw => (1.0 + v).clamp(blo, bhi),
            }
        })
        .collect()
}

/// Least-squares fit of `g((k − ½)Δ; θ)` to `ĝ_k` within the family bounds.
///
/// The shape parameter is optimized on a log scale (`ln β`, or `ln(γ − 1)`)
/// from five log-spaced starts; the lowest residual wins.
pub fn fit_kernel_nls(g_hat: &[f64], delta: f64, family: KernelFamily) -> Result<KernelFit> {
    if g_hat.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "kernel fit needs at least 3 samples, got {}",
            g_hat.len()
        )));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "bin width must be > 0, got {delta}"
        )));
    }
    let p = g_hat.len();
    let mids: Vec<f64> = (1..=p).map(|k| (k as f64 - 0.5) * delta).collect();
    let (blo, bhi) = kernel_bounds(family);
    let (zlo, zhi, to_z, from_z): (f64, f64, Transform, Transform) = match family {
        KernelFamily::Exponential => (blo.ln(), bhi.ln(), f64::ln, f64::exp),
        KernelFamily::PowerLaw => (
            (blo - 1.0).ln(),
            (bhi - 1.0).ln(),
            |g| (g - 1.0).ln(),
            |z| 1.0 + z.exp(),
        ),
    };
    let model = |z: &DVector<f64>| {
        let theta = from_z(z[0]);
        let mut r = DVector::zeros(p);
        let mut j = DMatrix::zeros(p, 1);
        for (k, &u) in mids.iter().enumerate() {
            let (g, dg_dz) = match family {
                KernelFamily::Exponential => {
                    let e = (-theta * u).exp();
                    (theta * e, theta * e * (1.0 - theta * u))
                }
                KernelFamily::PowerLaw => {
                    let base = (1.0 + u).powf(-theta);
                    let lu = u.ln_1p();
                    let d = base * (1.0 - (theta - 1.0) * lu);
                    ((theta - 1.0) * base, d * (theta - 1.0))
                }
            };
            r[k] = g - g_hat[k];
            j[(k, 0)] = dg_dz;
        }
        (r, j)
    };
    let starts = kernel_starts(family, p, delta);
    let lower = DVector::from_element(1, zlo);
    let upper = DVector::from_element(1, zhi);
    let opts = LsqOptions::default();
    let mut best: Option<lsq::LsqResult> = None;
    for &s in &starts {
        let res = lsq::minimize(
            model,
            DVector::from_element(1, to_z(s)),
            &lower,
            &upper,
            &opts,
        );
        let better = match &best {
            None => true,
            Some(b) => res.rss < b.rss || (res.rss == b.rss && res.converged && !b.converged),
        };
        if better {
            best = Some(res);
        }
    }
    let best = best.expect("at least one start");
    let z = best.x[0];
    let at_bound = (z - zlo).abs() < 1e-9 || (z - zhi).abs() < 1e-9;
    let theta = from_z(z).clamp(blo, bhi);
    Ok(KernelFit {
        kernel: family.with_param(theta),
        rss: best.rss,
        converged: best.converged,
        at_bound,
        starts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InarConfig {
    pub p: usize,
    /// Bin width in days.
    pub delta: f64,
    pub family: KernelFamily,
}

impl Default for InarConfig {
    fn default() -> Self {
        Self {
            p: 150,
            delta: 1.0 / 288.0,
            family: KernelFamily::Exponential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InarEstimate {
    pub alpha: Vec<f64>,
    pub eta_hat: f64,
    pub k_hat: f64,
    pub g_hat: Option<Vec<f64>>,
    pub kernel_fit: Option<KernelFit>,
    pub inar_rss: f64,
    pub n_events: usize,
    pub n_bins: usize,
    pub zero_share: f64,
    pub flags: InarFlags,
}

impl InarEstimate {
    /// Parameters for rescaling; when the kernel fit was skipped the
    /// kernel is irrelevant (`K̂ = 0`) and a unit-rate placeholder is used.
    pub fn params(&self) -> SeppParams {
        let kernel = self
            .kernel_fit
            .as_ref()
            .map(|f| f.kernel)
            .unwrap_or(TriggeringKernel::Exponential { beta: 1.0 });
        SeppParams::new(self.eta_hat, self.k_hat, kernel)
    }
}

/// Full estimator on the events in the closed span `[start, end]`.
///
/// The span is extended to a whole number of bins; events outside it are
/// ignored.
pub fn estimate_span(
    times: &EventTimes,
    start: f64,
    end: f64,
    cfg: &InarConfig,
) -> Result<InarEstimate> {
    let inside = times.as_slice();
    let lo = inside.partition_point(|&t| t < start);
    let hi = inside.partition_point(|&t| t <= end);
    let n_events = hi.saturating_sub(lo);
    if n_events < MIN_WINDOW_EVENTS {
        return Err(Error::InsufficientData(format!(
            "window holds {n_events} events, at least {MIN_WINDOW_EVENTS} required"
        )));
    }
    let n_bins = snapped_ratio(end - start, cfg.delta).ceil().max(1.0);
    let bins = discretize(times, cfg.delta, start, start + n_bins * cfg.delta)?;
    let zero_share = bins.zero_share();
    let fit = fit_inar(&bins, cfg.p)?;
    let norm = normalize(&fit.alpha, cfg.delta)?;
    let mut flags = norm.flags;
    flags.singular_design = fit.singular.is_some();
    flags.zero_heavy = zero_share > ZERO_HEAVY_SHARE;
    if flags.zero_heavy {
        log::warn!(
            "{:.2}% of {} bins are empty; regression estimates are unreliable",
            100.0 * zero_share,
            bins.len()
        );
    }
    let kernel_fit = match &norm.g_hat {
        Some(g) => {
            let kf = fit_kernel_nls(g, cfg.delta, cfg.family)?;
            flags.solver_failed = !kf.converged;
            flags.kernel_at_bound = kf.at_bound;
            Some(kf)
        }
        None => None,
    };
    Ok(InarEstimate {
        alpha: fit.alpha,
        eta_hat: norm.eta_hat,
        k_hat: norm.k_hat,
        g_hat: norm.g_hat,
        kernel_fit,
        inar_rss: fit.rss,
        n_events,
        n_bins: bins.len(),
        zero_share,
        flags,
    })
}

/// Estimator over the span from the first to the last event of `times`.
pub fn estimate_window(times: &EventTimes, cfg: &InarConfig) -> Result<InarEstimate> {
    match (times.first(), times.last()) {
        (Some(a), Some(b)) => estimate_span(times, a, b, cfg),
        _ => Err(Error::InsufficientData("empty window".into())),
    }
}
