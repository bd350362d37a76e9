//! Failure categories with stable process exit codes.

use gridflow_core::ModelError;
use std::fmt;

/// Everything the command line can fail with, bucketed by exit code:
/// 1 — the solve ran but did not reach a solution;
/// 2 — bad input (syntax, schema, semantics, arguments);
/// 3 — internal/environment failure (I/O, serialization).
#[derive(Debug)]
pub enum CliError {
    NoConvergence(String),
    Input(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::NoConvergence(_) => 1,
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::NoConvergence(_) => "no_convergence",
            CliError::Input(_) => "input",
            CliError::Internal(_) => "internal",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::NoConvergence(m) | CliError::Input(m) | CliError::Internal(m) => m,
        }
    }

    /// One-line machine-readable rendering for `--error-json`.
    pub fn to_json(&self) -> String {
        let body = serde_json::json!({
            "error": {
                "category": self.category(),
                "exit_code": self.exit_code(),
                "message": self.message(),
            }
        });
        body.to_string()
    }

    /// Classifies a solver/model failure: data problems are input errors,
    /// numeric failures count as failed solves.
    pub fn from_model(err: ModelError) -> Self {
        match err {
            ModelError::Invalid(_)
            | ModelError::UnknownBus { .. }
            | ModelError::AbsentPhase { .. }
            | ModelError::InitialStateRequired
            | ModelError::StateSize { .. }
            | ModelError::BadSynthSpec { .. }
            | ModelError::NotRadial { .. } => CliError::Input(err.to_string()),
            ModelError::SingularJacobian { .. }
            | ModelError::Linear { .. }
            | ModelError::NearZeroVoltage { .. } => CliError::NoConvergence(err.to_string()),
            ModelError::Sparse(inner) => CliError::Internal(inner.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.category(), self.message())
    }
}

impl std::error::Error for CliError {}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Internal(format!("serialization failed: {err}"))
    }
}
