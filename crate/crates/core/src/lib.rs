//! Monte Carlo laboratory for the Riemann-sum discretization error of
//! stochastic integrals driven by fractional Brownian motion.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: Hurst index, grids, paths, the fBm correlation function and
//!   the rate functions `kappa_H` / `nu_H`.
//! - [`fbm`]: exact fBm sampling (circulant embedding, Cholesky oracle).
//! - [`constants`]: the series constants `q_H`, `r_H` of the Gaussian limit.
//! - [`integrators`]: reference integrals, Riemann sums, the error process
//!   `M^n` and the weighted power-variation statistics.
//! - [`integrands`]: the catalogue of `(u, P)` pairs and its spec-string parser.
//! - [`stats`]: replication engine, estimators and verdicts.
//! - [`config`] / [`report`]: flat config files, JSON/CSV outputs.
//!
//! Runnable walkthroughs live in `examples/`; the `fbm-riemann` binary is a
//! thin command-line wrapper over [`config`], [`stats`] and [`report`].

pub mod config;
pub mod constants;
pub mod error;
pub mod fbm;
pub mod integrands;
pub mod integrators;
pub mod model;
pub mod moments;
pub mod report;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use model::{cov_r, kappa, nu, FbmPath, HurstIndex, ProcessPair, Regime, SimGrid};
