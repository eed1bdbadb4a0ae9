//! Variational solver for semiclassical spike solutions of
//! `-eps^2 Lap u + V(x) u = f(u)` concentrating at a saddle or maximum of `V`.
//!
//! The pipeline: radial ground states of the limit problem
//! ([`limit_problem`]), the truncated nonlinearity ([`nonlinearity`]) and
//! potential ([`potential`]), a uniform 2D discretisation of the truncated
//! functional ([`grid`]), the cone/barycenter min-max machinery ([`minmax`])
//! and post-processing of the computed spikes ([`diagnostics`]).

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod io;
pub mod limit_problem;
pub mod linsolve;
pub mod minmax;
pub mod nonlinearity;
pub mod pipeline;
pub mod potential;
pub mod quadrature;

pub use error::{Error, Result};
