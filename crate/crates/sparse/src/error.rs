use thiserror::Error;

/// Errors produced by matrix construction, orderings, and the linear solvers.
#[derive(Debug, Clone, Error)]
pub enum SparseError {
    #[error("triplet ({row}, {col}) lies outside a {n_rows}x{n_cols} matrix")]
    TripletOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("{context}: expected length {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix must be square for {op}, got {n_rows}x{n_cols}")]
    NotSquare {
        op: &'static str,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("invalid permutation: {reason}")]
    InvalidPermutation { reason: String },

    #[error("singular matrix: no acceptable pivot in column {column}")]
    SingularColumn { column: usize },

    #[error(
        "iterative solver breakdown at iteration {iteration}: |{quantity}| = {value:e} is below 1e-30"
    )]
    Breakdown {
        iteration: usize,
        quantity: &'static str,
        value: f64,
    },

    /// The Krylov solver ran out of iterations. Kept distinct so callers can
    /// fall back to the direct path.
    #[error(
        "iterative solver did not converge within {max_iter} iterations \
         (relative residual {residual:e})"
    )]
    NotConverged { max_iter: usize, residual: f64 },

    #[error("matrix market error at line {line}: {message}")]
    MatrixMarket { line: usize, message: String },
}
