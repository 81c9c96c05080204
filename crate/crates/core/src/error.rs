use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("region {region} has zero variance")]
    ConstantColumn { region: usize },

    #[error("region {region} has zero variance in window {window}")]
    ConstantWindowColumn { window: usize, region: usize },

    #[error("matrix is not symmetric at ({row}, {col}): difference {diff:e}")]
    Asymmetric { row: usize, col: usize, diff: f64 },

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("graphical lasso lost positive definiteness at iteration {iteration}")]
    GlassoNotPositiveDefinite { iteration: usize },

    #[error("graphical lasso did not converge in {iterations} iterations (residual {residual:e})")]
    GlassoNoConvergence { iterations: usize, residual: f64 },

    #[error("penalty grid is empty")]
    EmptyGrid,

    #[error("every grid point failed: {0}")]
    AllGridPointsFailed(String),

    #[error("no column has standard deviation above {threshold}; lower the screening threshold")]
    NoRetainedColumns { threshold: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("labels contain a single class")]
    SingleClass,

    #[error("stick-breaking representation exceeded {cap} components")]
    StickCapExceeded { cap: usize },

    #[error("slice sampler interval still open after {doublings} doublings")]
    SliceStepOut { doublings: usize },

    #[error("operation requires prior mode {expected}")]
    WrongPriorMode { expected: &'static str },

    #[error("node-pair universes differ between sessions")]
    UniverseMismatch,

    #[error("split {split} leaves a single-class training set")]
    SplitSingleClass { split: usize },

    #[error("every candidate failed: {0}")]
    AllCandidatesFailed(String),
}
