//! File formats and batch tooling around `manna-core`.
//!
//! The `manna` binary wraps these together with the solver, verifier,
//! oracle and game reduction.

pub mod bench;
pub mod io;
