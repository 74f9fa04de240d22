use std::fmt;

use poisson_stab::catalog::CatalogError;
use poisson_stab::dynamics::DynamicsError;
use poisson_stab::leafspace::LeafError;
use poisson_stab::poisson::PoissonError;
use poisson_stab::stability::StabilityError;
use poisson_stab::ExprError;
use serde::Serialize;

/// Error category; fixes the exit code and the `kind` field of the error JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Io,
    Json,
    Validation,
    Expression,
    NotFound,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Numerical => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            path: None,
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Validation, message)
    }

    pub fn io(path: &str, err: &std::io::Error) -> Self {
        Self {
            kind: ErrorKind::Io,
            message: err.to_string(),
            path: Some(path.to_string()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{{\"kind\":\"io\",\"message\":{:?}}}", self.message))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<ExprError> for CliError {
    fn from(e: ExprError) -> Self {
        Self::new(ErrorKind::Expression, e.to_string())
    }
}

impl From<PoissonError> for CliError {
    fn from(e: PoissonError) -> Self {
        match e {
            PoissonError::Expr(e) => e.into(),
            PoissonError::OddRank { .. } => Self::new(ErrorKind::Numerical, e.to_string()),
            other => Self::validation(other.to_string()),
        }
    }
}

impl From<LeafError> for CliError {
    fn from(e: LeafError) -> Self {
        match e {
            LeafError::Poisson(p) => p.into(),
            other => Self::validation(other.to_string()),
        }
    }
}

impl From<StabilityError> for CliError {
    fn from(e: StabilityError) -> Self {
        match e {
            StabilityError::Leaf(l) => l.into(),
            StabilityError::Poisson(p) => p.into(),
            StabilityError::Expr(x) => x.into(),
            StabilityError::NotEquilibrium { .. } | StabilityError::Algebra(_) | StabilityError::Unsupported(_) => {
                Self::validation(e.to_string())
            }
            StabilityError::WrongDimension { .. } => Self::new(ErrorKind::Numerical, e.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Poisson(p) => p.into(),
            DynamicsError::Expr(x) => x.into(),
            DynamicsError::Tolerance(_)
            | DynamicsError::DimensionMismatch { .. }
            | DynamicsError::InvalidProbe(_)
            | DynamicsError::UnsupportedCase(_) => Self::validation(e.to_string()),
            _ => Self::new(ErrorKind::Numerical, e.to_string()),
        }
    }
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> Self {
        match e {
            CatalogError::NotFound { .. } => Self::new(ErrorKind::NotFound, e.to_string()),
            _ => Self::validation(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::new(ErrorKind::Json, e.to_string())
    }
}
