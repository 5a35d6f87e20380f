//! Near-field multiuser communications over sparse antenna arrays.
//!
//! Array geometries and steering vectors, exact and closed-form beam
//! analysis in the surrogate-distance / angle (SD-A) domain, antenna
//! position optimization by successive convex approximation, sparse channel
//! estimation, MMSE combining and seeded Monte Carlo link simulation.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beam;
pub mod channel;
pub mod error;
pub mod estimation;
pub mod fresnel;
pub mod geometry;
pub mod linalg;
pub mod link;
pub mod mc;
pub mod optimizer;
pub mod projection;
pub mod rng;

pub use beam::{LobeReport, MainlobeWidth};
pub use channel::{ChannelConfig, ChannelRealization, PathParam, SdaPoint};
pub use error::{Error, Result};
pub use estimation::{Dictionary, EstimateResult, EstimatedPath, IsrceParams};
pub use geometry::{ArrayKind, ArrayLayout, GeometrySummary, Positions};
pub use linalg::{CMatrix, CVector};
pub use mc::{Csi, EstimatorConfig, McReport, McRow, Method, Stat};
pub use optimizer::{DiffGrid, OptimizerState, ScaOptions};
pub use projection::SpacingPolytope;
