//! Positive-sequence (single-phase equivalent) network model and its
//! Newton-Raphson power flow.

pub mod model;
pub mod newton;
