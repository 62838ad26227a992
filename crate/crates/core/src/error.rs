//! Error taxonomy shared across the toolkit.
//!
//! `Structural` covers malformed inputs (wrong shapes, unknown labels),
//! `Invariant` covers numerical invariant violations of otherwise
//! well-formed data, `MissingData` is for behaviors that lack the entries
//! an operation needs (operations never impute), `SizeGuard` fires when an
//! enumeration would exceed its declared budget, and `Numerical` wraps
//! solver failures.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("missing data: {0}")]
    MissingData(String),
    #[error("size guard exceeded: {0}")]
    SizeGuard(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
