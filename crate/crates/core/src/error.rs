use thiserror::Error;

/// Errors raised by the operators, solvers and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operator.
    #[error("domain error: {0}")]
    Domain(String),

    /// Level parameters violate one of the admissibility constraints.
    #[error("admissibility violated: {constraint}")]
    Admissibility { constraint: String },

    /// A numerical procedure could not reach the requested accuracy.
    #[error("numerical failure: {message} (achieved {achieved:e})")]
    NumericalFailure { message: String, achieved: f64 },

    /// The inverse problem cannot be solved for the given mode.
    #[error("ill-posed inverse problem: vanishing denominator for mode k = {k}")]
    IllPosed { k: usize },

    /// Inputs are inconsistent with each other (mismatched grids, bad indices).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn admissibility(constraint: impl Into<String>) -> Self {
        Error::Admissibility {
            constraint: constraint.into(),
        }
    }

    pub fn numerical(msg: impl Into<String>, achieved: f64) -> Self {
        Error::NumericalFailure {
            message: msg.into(),
            achieved,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// Process exit code used by the CLI: 2 for validation problems,
    /// 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Admissibility { .. }
            | Error::Usage(_)
            | Error::Parse(_)
            | Error::Json(_) => 2,
            Error::NumericalFailure { .. } | Error::IllPosed { .. } => 3,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// `fs::read_to_string` with the path in the error message.
pub fn read_text(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}
