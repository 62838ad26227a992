//! Abstract optimization back ends: a standard-form LP solver and a dense
//! semidefinite solver for linear-matrix-inequality problems.

pub mod lp;
pub mod sdp;
