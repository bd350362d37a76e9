//! Timing breakdown shared by both Newton solvers.

use std::time::Duration;

/// Wall-clock split of one power-flow solve.
///
/// `linear_solve` accumulates the inner linear-system time over all Newton
/// iterations ("solving" time); `jacobian_build` and `mismatch_eval`
/// together form the bookkeeping ("other") time: Jacobian assembly and
/// update, plus mismatch/current evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Timings {
    pub jacobian_build: Duration,
    pub linear_solve: Duration,
    pub mismatch_eval: Duration,
}

impl Timings {
    /// Jacobian and mismatch bookkeeping combined.
    pub fn other(&self) -> Duration {
        self.jacobian_build + self.mismatch_eval
    }

    /// Whole measured solve time.
    pub fn total(&self) -> Duration {
        self.jacobian_build + self.linear_solve + self.mismatch_eval
    }
}
