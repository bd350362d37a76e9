//! Multiphase distribution network model and its current-injection power
//! flow.

pub mod cim;
pub mod model;
