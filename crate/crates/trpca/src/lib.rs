//! Robust principal component analysis by trimmed-reconstruction-error
//! minimization over orthonormal frames.
//!
//! The estimator alternates a polar-decomposition basis update with a
//! trimmed-mean center update, so the mean of the `t` smallest squared
//! reconstruction errors decreases monotonically. The crate also ships the
//! standard-PCA baseline, synthetic contamination generators, evaluation
//! metrics, a background/foreground splitter for frame stacks, and CSV/PGM
//! ingestion behind a small experiment CLI.
//!
//! Multistart fits and sweep cells are embarrassingly parallel; with the
//! default `parallel` feature they run on rayon, and without it they run
//! sequentially with bit-identical results.

mod error;

pub mod datagen;
pub mod eval;
pub mod fit;
pub mod io;
pub mod matrix;
pub mod pca;
pub mod pgm;
pub mod stiefel;

pub use error::{Error, Result};
pub use fit::{
    residuals, trpca_fit, trpca_multistart, trpca_multistart_serial, FitOptions, Residuals,
    SubspaceModel, Termination, TrimmedFitReport, TrimmedSpec,
};
pub use matrix::DataMatrix;
pub use stiefel::{polar, random_frame, stiefel_min_linear, Frame};
