//! Simulation and certification toolkit for temporal quantum correlations:
//! sequential-measurement simulation, macrorealist (Leggett-Garg) model
//! certification, quantum bounds from moment-matrix semidefinite programs,
//! and memory witnesses based on finite-state machines.

pub mod diagnostics;
pub mod error;
pub mod expr;
pub mod linalg;
pub mod moment;
pub mod mr;
pub mod quantum;
pub mod scenario;
pub mod solver;
pub mod steering;
pub mod words;

pub use error::{Error, Result};
pub use linalg::{C64, CMat, CVec};
