//! Control of multilevel quantum systems through the rotating-wave approximation.
//!
//! A system is a set of levels with energies and a coupling matrix. Each drive
//! field is assigned to one coupled transition. When the level graph is a tree
//! (or every cycle has zero detuning sum), a rotating frame makes the effective
//! generator time-independent, which enables closed-form solutions for two-level
//! and star-shaped systems and cheap numerical optimization for general trees.

pub mod analytic;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod integrator;
pub mod io;
pub mod nelder_mead;
pub mod optimize;
pub mod rwa;

pub use error::{Error, Result};
pub use graph::{Coupling, LevelGraph, LevelSystem};
pub use rwa::{Drive, DriveSet, RwaModel};
