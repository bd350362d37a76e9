//! Steady-state power flow for transmission and distribution networks.
//!
//! Two solvers share one sparse linear algebra backend
//! ([`gridflow_sparse`]):
//!
//! * [`single`] — positive-sequence networks (slack/PV/PQ buses) solved by
//!   polar Newton-Raphson ([`single::newton::solve_nr`]);
//! * [`three`] — multiphase radial or meshed feeders with per-phase ZIP
//!   loads solved by rectangular current-injection Newton
//!   ([`three::cim::solve_cim`]).
//!
//! [`synth`] grows large deterministic study cases out of the bundled
//! [`fixtures`]; everything random flows through the seedable
//! [`rng::SplitMix64`] so outputs are reproducible bit for bit.

pub mod error;
pub mod fixtures;
pub mod rng;
pub mod single;
pub mod solution;
pub mod synth;
pub mod three;

pub use error::{ModelError, ValidationIssue};
pub use rng::SplitMix64;
pub use single::model::{
    build_ybus, validate_network, Branch, Bus, BusKind, SinglePhaseNetwork, VoltageState,
};
pub use single::newton::{solve_nr, solve_nr_from, NewtonOptions, PowerFlowSolution};
pub use solution::Timings;
pub use synth::{replicate_feeder, replicate_transmission, SynthSpec};
pub use three::cim::{solve_cim, CimOptions, CimSolution};
pub use three::model::{
    build_ybus3, validate_network3, Branch3, Bus3, Phase, PhaseBlock, PhaseSet, ThreePhaseNetwork,
    VoltageState3, ZipLoad,
};
