//! Error and validation-report types shared by the network models and
//! power-flow solvers.

use gridflow_sparse::SparseError;
use thiserror::Error;

use crate::three::model::Phase;

/// One defect found while validating a network.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationIssue {
    #[error("expected exactly one slack bus, found {found}")]
    SlackCount { found: usize },
    #[error("duplicate bus id {id}")]
    DuplicateBusId { id: u64 },
    #[error("branch {branch} references unknown bus id {id}")]
    DanglingEndpoint { branch: usize, id: u64 },
    #[error("branch {branch} connects bus {id} to itself")]
    SelfLoop { branch: usize, id: u64 },
    #[error("branch {branch} has zero series impedance")]
    ZeroImpedance { branch: usize },
    #[error("network splits into {components} connected components")]
    Disconnected { components: usize },
    #[error("bus {id} needs a positive voltage setpoint")]
    BadSetpoint { id: u64 },
    #[error("source bus {id} must carry phases a, b, and c")]
    SourceMissingPhases { id: u64 },
    #[error("source bus id {id} not found")]
    MissingSource { id: u64 },
    #[error("branch {branch} uses phase {phase} absent at bus {id}")]
    PhaseNotAtEndpoint { branch: usize, phase: Phase, id: u64 },
    #[error("bus {id} defines a load on absent phase {phase}")]
    LoadOnAbsentPhase { id: u64, phase: Phase },
    #[error("branch {branch} has nonzero admittance outside its phase set")]
    AdmittanceOutsidePhases { branch: usize },
    #[error("branch {branch} series block is singular on its phase set")]
    SingularSeriesBlock { branch: usize },
    #[error("bus {id} has a non-finite numeric field")]
    NonFiniteValue { id: u64 },
    #[error("bus {id} carries no phases")]
    EmptyPhaseSet { id: u64 },
}

/// Errors raised by model construction, solvers, and synthesis.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid network: {}", summarize(.0))]
    Invalid(Vec<ValidationIssue>),
    #[error("unknown bus id {id}")]
    UnknownBus { id: u64 },
    #[error("phase {phase} is not present at bus {id}")]
    AbsentPhase { id: u64, phase: Phase },
    #[error("Jacobian is singular at iteration {iteration}: {source}")]
    SingularJacobian {
        iteration: usize,
        source: SparseError,
    },
    #[error("linear solve failed at iteration {iteration}: {source}")]
    Linear {
        iteration: usize,
        source: SparseError,
    },
    #[error(
        "voltage magnitude {vm:.3e} at bus {id} phase {phase} fell below 1e-6 p.u. \
         (iteration diverged)"
    )]
    NearZeroVoltage { id: u64, phase: Phase, vm: f64 },
    #[error("flat_start is disabled but no initial state was supplied")]
    InitialStateRequired,
    #[error("initial state has {got} entries, network needs {want}")]
    StateSize { got: usize, want: usize },
    #[error("synthesis spec rejected: {reason}")]
    BadSynthSpec { reason: String },
    #[error("feeder replication needs a radial network: {reason}")]
    NotRadial { reason: String },
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

fn summarize(issues: &[ValidationIssue]) -> String {
    let shown: Vec<String> = issues.iter().take(3).map(|i| i.to_string()).collect();
    if issues.len() > 3 {
        format!("{} (+{} more)", shown.join("; "), issues.len() - 3)
    } else {
        shown.join("; ")
    }
}

impl ModelError {
    /// Wraps a linear-solver failure, labeling singular pivots distinctly.
    pub fn from_linear(iteration: usize, source: SparseError) -> Self {
        match source {
            SparseError::SingularColumn { .. } => ModelError::SingularJacobian { iteration, source },
            other => ModelError::Linear {
                iteration,
                source: other,
            },
        }
    }
}
