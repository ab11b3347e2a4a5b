//! Terrain-aware radio propagation and reconfigurable intelligent surface
//! (RIS) coverage simulation for planetary surfaces.

// Negated comparisons are deliberate: they reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod export;
pub mod geometry;
pub mod localization;
pub mod propagation;
pub mod ris;
pub mod scenario;
pub mod terrain;

pub use error::{Error, Result};
pub use geometry::{Position3, Ray, Vec3};
