//! Exact Gaussian law, sampling and first-passage times of the time integral of a
//! Gauss-Markov process `X(t) = m(t) + h2(t) B(rho(t))`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod export;
pub mod fpt;
pub mod generalized;
pub mod law;
pub mod process;
pub mod quadrature;
pub mod rng;
pub mod sampling;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use fpt::{Boundary, BoundarySpec, FptEstimate, FptResult};
pub use generalized::{GeneralizedSpec, VarianceBounds};
pub use law::{build_law, build_law_on, IntegralLaw, NormalLaw};
pub use process::{preset_bm_drift, preset_bridge, preset_ou, validate, Preset, ProcessSpec};
pub use quadrature::QuadratureConfig;
pub use rng::RngState;
pub use sampling::PathGrid;
