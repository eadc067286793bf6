//! Random-instance studies and the two-atom Rydberg scenario.

pub mod instance;
pub mod rydberg;
pub mod sweep;
