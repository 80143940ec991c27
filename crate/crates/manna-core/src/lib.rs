//! Exact competitive equilibria for mixed manna.
//!
//! A market of divisible goods and bads (chores) with additively separable
//! piecewise-linear concave (SPLC) utilities is compiled into an augmented
//! linear complementarity problem and solved with Lemke's complementary pivot
//! scheme over exact rationals. Around the solver sit an independent
//! equilibrium verifier, a brute-force configuration oracle for tiny markets,
//! a compiler from bimatrix games to chore-division markets, and a random
//! instance generator for iteration-count experiments.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the benchmark
//! runner and the command-line tool live in the companion `manna` crate.
//!
//! ```
//! use manna_core::{instance::Instance, ratio, solve, SolveOptions};
//!
//! // Two agents share one good and one bad.
//! let inst = Instance::exchange_linear(
//!     &[vec![ratio(1, 1), ratio(-2, 1)], vec![ratio(1, 1), ratio(-3, 1)]],
//!     vec![ratio(1, 2); 4],
//! )
//! .unwrap();
//! let out = solve(&inst, &SolveOptions::default()).unwrap();
//! let eq = out.equilibrium().unwrap();
//! assert!(eq.prices[0] > ratio(0, 1) && eq.prices[1] < ratio(0, 1));
//! ```

#![no_std]

extern crate alloc;


pub mod harness;
pub mod instance;
pub mod lcp;
pub mod lemke;
pub mod oracle;
mod linalg;
pub mod reduction;
pub mod solution;
pub mod verify;

mod pipeline;

pub use pipeline::{solve, SolveError, SolveOptions, SolveOutcome, SolveStatus};










use num_bigint::BigInt;
use num_rational::BigRational;

/// Exact rational number used everywhere in the crate.
pub type Rational = BigRational;

/// Builds the rational `num / den`. Panics if `den` is zero.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}
