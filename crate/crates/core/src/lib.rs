//! Numerical laboratory linking particle dispersal to SPDE random fields.
//!
//! The crate is organised in layers:
//!
//! * [`specialfn`] and [`quadrature`]: Bessel, Struve, trigonometric integrals,
//!   Gamma, and the integration rules every closed form is checked against.
//! * [`covariance`]: symbols, spectral densities, dispersal kernels and the
//!   closed-form covariances of the damped fractional Laplacian, the fractional
//!   Laplacian with linear reaction, and convolution-kernel operators.
//! * [`fields`]: explicit finite-difference / spectral integrator for
//!   dispersal + drift + reaction + additive space-time white noise.
//! * [`particles`]: Poisson-initialised α-stable particles with exponential
//!   deposition.
//! * [`pointprocess`]: thinning samplers, window counts, conditional sampler and
//!   the small-instance exact likelihood.
//! * [`estimation`]: location and count pseudo-likelihoods, Nelder–Mead fit and
//!   the Monte-Carlo estimation study.
//! * [`cli`]: JSON-config driven commands producing CSV artifacts.

pub mod cli;
pub mod covariance;
pub mod error;
pub mod estimation;
pub mod fields;
pub mod output;
pub mod particles;
pub mod pointprocess;
pub mod quadrature;
pub mod rng;
pub mod specialfn;

pub use error::{Error, Result};
