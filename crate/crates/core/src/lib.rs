//! Nonparametric density-based clustering of point catalogs.
//!
//! The pipeline estimates a Gaussian product kernel density, links points
//! through a Delaunay triangulation, tracks connected high-density regions
//! across density levels and allocates the remaining points to the
//! resulting cluster cores.

pub mod agreement;
pub mod catalog;
pub mod cluster;
pub mod correlate;
pub mod diagnostics;
pub mod error;
pub mod kde;
pub mod scalar;
pub mod stats;
pub mod synth;
pub mod topology;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type DensityModel64 = kde::DensityModel<f64>;
pub type DensityModel32 = kde::DensityModel<f32>;
pub type ClusterResult64 = cluster::ClusterResult<f64>;
pub type ClusterResult32 = cluster::ClusterResult<f32>;
pub type SlipField64 = correlate::SlipField<f64>;
