//! Bayesian linear SVM for classification from brain-network features.
//!
//! The classifier uses the data-augmented hinge-loss pseudo-likelihood with a
//! Dirichlet-process mixture of Laplace priors on the coefficients, so that
//! shrinkage levels are shared across automatically discovered groups of
//! edges. Everything here is allocation-only `no_std`; file formats, the CLI
//! and thread-level parallelism live in the `dplsvm` crate.
//!
//! Module map:
//!
//! * [`netestim`]: Pearson correlation, graphical lasso, density targeting,
//!   sliding-window correlation series.
//! * [`features`]: edge vectorization, screening, dynamic feature extraction,
//!   design assembly, multi-session union, extreme-group labels.
//! * [`rngkit`]: seedable per-chain random streams and all variate generators.
//! * [`svm_static`] / [`svm_dynamic`]: the Gibbs samplers.
//! * [`shrinkage`]: the coefficient-prior updates shared by both samplers.
//! * [`eval`]: metrics, credible-interval selection, split reproducibility,
//!   validation-driven grid selection.
//! * [`synth`]: synthetic data with known ground truth.
//! * [`geweke`] and [`diag`]: sampler correctness and convergence checks.

#![no_std]
// `num_traits::Float` imports go unused whenever std is linked into the build.

extern crate alloc;

pub mod diag;
pub mod draws;
mod error;
pub mod eval;
pub mod features;
pub mod geweke;
pub mod hyper;
pub mod linalg;
pub mod netestim;
pub mod rngkit;
pub mod shrinkage;
pub mod special;
pub mod svm_dynamic;
pub mod svm_static;
pub mod synth;

pub use draws::{Draw, PosteriorDraws};
pub use error::{Error, Result};
pub use features::{EdgeDescriptor, EdgeFeatureTable, Label};
pub use hyper::{Hyperparameters, PriorMode};
pub use rngkit::RandomStream;

/// Dense matrix type used throughout.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense column vector type used throughout.
pub type Vector = nalgebra::DVector<f64>;
