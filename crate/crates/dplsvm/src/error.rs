use std::path::Path;

use serde::Serialize;

/// Exit-code classes. The numeric codes are part of the interface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// A diagnostic ran to completion but its check failed.
    CheckFailed,
    Usage,
    Io,
    Malformed,
    InvalidData,
    Numerical,
}

impl ErrorKind {
    pub fn code(self) -> i32 {
        match self {
            ErrorKind::CheckFailed => 1,
            ErrorKind::Usage => 2,
            ErrorKind::Io => 3,
            ErrorKind::Malformed => 4,
            ErrorKind::InvalidData => 5,
            ErrorKind::Numerical => 6,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Usage, message)
    }

    pub fn malformed(path: &Path, message: impl std::fmt::Display) -> Self {
        Self::new(ErrorKind::Malformed, format!("{}: {message}", path.display()))
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::new(ErrorKind::Io, format!("{}: {err}", path.display()))
    }

    /// One-line JSON record for stderr.
    pub fn record(&self) -> String {
        #[derive(Serialize)]
        struct Inner<'a> {
            code: i32,
            kind: ErrorKind,
            message: &'a str,
        }
        #[derive(Serialize)]
        struct Record<'a> {
            error: Inner<'a>,
        }
        let r = Record { error: Inner { code: self.kind.code(), kind: self.kind, message: &self.message } };
        serde_json::to_string(&r).expect("error record serializes")
    }
}

impl From<dplsvm_core::Error> for CliError {
    fn from(e: dplsvm_core::Error) -> Self {
        use dplsvm_core::Error as E;
        let kind = match &e {
            E::InvalidParameter { .. } | E::InvalidArgument(_) | E::WrongPriorMode { .. } => ErrorKind::Usage,
            E::NotPositiveDefinite { .. }
            | E::GlassoNotPositiveDefinite { .. }
            | E::GlassoNoConvergence { .. }
            | E::AllGridPointsFailed(_)
            | E::StickCapExceeded { .. }
            | E::SliceStepOut { .. }
            | E::AllCandidatesFailed(_) => ErrorKind::Numerical,
            _ => ErrorKind::InvalidData,
        };
        Self::new(kind, e.to_string())
    }
}
