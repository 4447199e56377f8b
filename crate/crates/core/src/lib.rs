//! Point-process analysis of growing edge streams.
//!
//! The startup phase of a network is described by a self-exciting point
//! process (Hawkes process) fitted window by window with a bin-count
//! autoregression estimator (or by direct maximum likelihood). After the
//! startup phase ends, growth is described by a non-homogeneous Poisson
//! process whose rate is constant within a day, with a nightly inactive
//! window excluded. Fits are checked with time-rescaling residuals and
//! Kolmogorov-Smirnov tests.
//!
//! Module map:
//!
//! - [`model`]: event times, kernels, intensity, compensator, burstiness
//! - [`simulate`]: thinning sampler, piecewise Poisson, three-phase generator
//! - [`inar`]: binned conditional least squares estimator
//! - [`mle`]: log-likelihood and maximum likelihood fitting
//! - [`gof`]: time rescaling and KS tests
//! - [`nhpp`]: daily rates with an active-hours policy
//! - [`ingest`]: edge-list parsing and windowing
//! - [`pipeline`]: batch driver and report writer

pub mod error;
pub mod gof;
pub mod inar;
pub mod ingest;
pub mod lsq;
pub mod mle;
pub mod model;
pub mod nhpp;
mod optim;
pub mod pipeline;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{EventTimes, Iets, KernelFamily, SeppParams, TriggeringKernel};
