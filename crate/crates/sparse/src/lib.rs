//! Sparse linear algebra kernels for power-grid computations.
//!
//! The crate provides a compressed sparse row matrix over real or complex
//! entries, fill-reducing and bandwidth-reducing orderings, a left-looking
//! sparse LU with threshold pivoting, a deterministic block-parallel
//! BiCGSTAB, and Matrix Market interchange.
//!
//! # Determinism contract
//!
//! Every parallel kernel partitions its index space into contiguous blocks
//! whose boundaries depend only on the problem size and the requested
//! thread count. Reductions combine per-block partial results in block
//! order. Consequently each kernel returns bit-identical results for
//! repeated runs at a fixed thread count, and the matrix-vector product is
//! bit-identical across *all* thread counts because each output row is
//! produced by exactly one task.

pub mod bicgstab;
pub mod error;
pub mod lu;
pub mod mm;
pub mod ordering;
pub mod par;
pub mod perm;
pub mod scalar;
pub mod solve;

mod matrix;

pub use bicgstab::{bicgstab, KrylovResult};
pub use error::SparseError;
pub use lu::{lu_factorize, lu_solve, LuFactors};
pub use matrix::{SparseMatrix, SparsityPattern};
pub use mm::{parse_matrix_market, write_matrix_market};
pub use ordering::{amd_order, bandwidth, rcm_order, symbolic_fill};
pub use perm::Permutation;
pub use scalar::Scalar;
pub use solve::{solve_linear, LinearSolverConfig, Preconditioner, SolverKind};
