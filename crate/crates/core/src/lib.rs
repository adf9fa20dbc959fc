//! Numerical library for the growth-fragmentation eigenproblem.
//!
//! The growth-fragmentation equation describes a population of particles
//! (cells, polymers, droplets) that grow at a size-dependent rate `tau(x)`
//! and break into smaller pieces at a total rate `B(x)`, the relative
//! fragment sizes being drawn from a measure `p` on `[0, 1]`. This crate
//! solves the principal eigenproblem of the associated operator and of its
//! dual on a truncated size interval `(0, L]`, and provides the machinery
//! to check, at desk scale, the first-order behavior of the eigenfunctions
//! near `0` and infinity, an entropy-dissipation (spectral gap) inequality,
//! and the Laplace-method integral asymptotics that the tail estimates
//! rest on.
//!
//! Module map:
//!
//! - [`coefficients`]: coefficient families `(tau, B, p)`, fragment
//!   moments, hypothesis validation.
//! - [`meshops`]: geometric grids, quadrature weights, the cumulative
//!   rate integral `Lambda` and the tail scalars `zeta`, `xi`.
//! - [`eigensolver`]: assembly and solution of the truncated, regularized
//!   primal/dual eigenproblem, constructive positivity bound `L0`, and
//!   extrapolation in the truncation size.
//! - [`asymptotics`]: compensated-ratio checks of the profile estimates,
//!   super/subsolution certificates, and Laplace-method oracles.
//! - [`entropy`]: relative entropy `H`, dissipation `D`, the auxiliary
//!   form `D2`, the discrete spectral gap and profile bound scans.
//! - [`evolve`]: explicit time integration sharing the eigensolver's
//!   spatial discretization, with conservation and entropy-decay audits.
//! - [`scenario`]: batch orchestration used by the CLI.

pub mod asymptotics;
pub mod coefficients;
pub mod config;
pub mod eigensolver;
pub mod entropy;
pub mod error;
pub mod evolve;
pub mod hessenberg;
pub mod meshops;
pub mod quad;
pub mod report;
pub mod scenario;

pub use coefficients::{CoefficientSet, FragmentMeasure, GrowthRate, TotalFragRate};
pub use eigensolver::{EigenTriple, TruncationConfig};
pub use error::Error;
pub use meshops::{GridFunction, Mesh, TailScalars};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
