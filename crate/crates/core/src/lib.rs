//! Rolling-window principal component analysis of multivariate time series.
//!
//! The pipeline: load a wide CSV ([`ingest`]), slide a window over the returns
//! and form correlation matrices incrementally ([`rolling`]), decompose each
//! one ([`eigen`]), check sampling adequacy ([`adequacy`]), pick how many
//! components to keep ([`retention`]), and follow loadings and eigenvector
//! angles through time ([`evolution`]) into heat maps and CSVs ([`render`]).

pub mod adequacy;
pub mod config;
pub mod eigen;
pub mod error;
pub mod evolution;
pub mod fixtures;
pub mod ingest;
pub mod matrix;
pub mod pipeline;
pub mod render;
pub mod retention;
pub mod rolling;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type SeriesMatrixF64 = ingest::SeriesMatrix<f64>;
pub type SeriesMatrixF32 = ingest::SeriesMatrix<f32>;
pub type CorrelationMatrixF64 = rolling::CorrelationMatrix<f64>;
pub type CorrelationMatrixF32 = rolling::CorrelationMatrix<f32>;
pub type EigenDecompositionF64 = eigen::EigenDecomposition<f64>;
pub type EigenDecompositionF32 = eigen::EigenDecomposition<f32>;
pub type SweepResultF64 = evolution::SweepResult<f64>;
pub type SweepResultF32 = evolution::SweepResult<f32>;
