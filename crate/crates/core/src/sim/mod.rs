//! Bivariate lead-lag path simulation on uniform grids.

pub mod batch;
pub mod generator;
pub mod grid;
pub mod model;
pub mod rng;

use thiserror::Error;

use crate::spectral::SpectralError;

pub use batch::{mean_and_stderr, BatchMetadata, ComponentPair, PathBatch};
pub use generator::{simulate_hry, simulate_spectral, EmbeddingStats, PathGenerator, SimPath};
pub use grid::TimeGrid;
pub use model::{DriftSpec, LagModelSpec, LagStructure, PiecewiseVolatility, Volatility};
pub use rng::{substream, Substream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("lag {theta} is not a multiple of grid step {step}")]
    GridMismatch { theta: f64, step: f64 },
    #[error("wrong model form: {0}")]
    WrongForm(&'static str),
    #[error("circulant embedding not positive semidefinite: min eigenvalue {min_eigenvalue:e}, max {max_eigenvalue:e}")]
    EmbeddingFailure { min_eigenvalue: f64, max_eigenvalue: f64 },
    #[error("price overflow on path {path} at grid index {index}")]
    PriceOverflow { path: usize, index: usize },
    #[error("time {0} is not on the grid")]
    OffGrid(f64),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}
