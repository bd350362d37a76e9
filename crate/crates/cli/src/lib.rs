//! Case-file formats, solution serialization, and the benchmark harness
//! behind the `gridflow` command line tool.

pub mod bench;
pub mod bundles;
pub mod error;
pub mod schema;
pub mod solution_io;

pub use error::CliError;
pub use schema::{parse_case, write_case, CaseFile, CaseMeta, SynthRecord};
