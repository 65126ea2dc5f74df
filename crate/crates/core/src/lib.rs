//! Distributed gradient-tracking (DGT) Nash equilibrium seeking for
//! multi-cluster games under partial-decision information.

pub mod engine;
pub mod error;
pub mod game;
pub mod linalg;
pub mod oracle;
pub mod simnet;
pub mod stepsize;
pub mod topology;

pub use error::{Error, Result};
