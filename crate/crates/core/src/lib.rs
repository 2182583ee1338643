//! Finite-dimensional simulator and verifier for quantum feedback-control
//! and erasure protocols.

pub mod channels;
pub mod io;
pub mod laws;
mod error;
pub mod operator;
pub mod protocol;
pub mod qinfo;
pub mod random;
pub mod report;
pub mod scenarios;
pub mod search;
pub mod state;
pub mod thermo;

pub use error::{Error, Result};
