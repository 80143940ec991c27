//! End-to-end solve: normalize, drop free items, pivot, map back.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Zero;
use thiserror::Error;

use crate::instance::{preprocess, Instance, Preprocessed};
use crate::lcp::{build_mixed_lcp, choose_constants, LcpError};
use crate::lemke::{run, LemkeError, RunOptions, TerminationStatus, TraceStep};
use crate::solution::{extract_equilibrium, Equilibrium, ExtractError};
use crate::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveOptions {
    /// Seed for the perturbation of the good spending rows.
    pub seed: u64,
    pub max_iters: Option<usize>,
    pub trace: bool,
    /// Fresh seeds to try after a degenerate run.
    pub reseeds: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { seed: 0, max_iters: None, trace: false, reseeds: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Solved(Equilibrium),
    SecondaryRay,
    IterationLimit,
    Degenerate(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Pivots of the last attempt.
    pub iterations: usize,
    pub trace: Vec<TraceStep>,
    /// Runs made, counting reseeded ones.
    pub attempts: usize,
    /// Rows of the last system solved.
    pub system_size: usize,
}

impl SolveOutcome {
    pub fn equilibrium(&self) -> Option<&Equilibrium> {
        match &self.status {
            SolveStatus::Solved(eq) => Some(eq),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error(transparent)]
    Lcp(#[from] LcpError),
    #[error(transparent)]
    Lemke(#[from] LemkeError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
}

/// Computes an equilibrium of `inst`. Prices are scaled so the largest
/// magnitude is one.
pub fn solve(inst: &Instance, opts: &SolveOptions) -> Result<SolveOutcome, SolveError> {
    let (unit, supplies) = inst.normalized();
    let pre = preprocess(&unit);
    let mut outcome = SolveOutcome {
        status: SolveStatus::Solved(lift(inst, &pre, &supplies, None)),
        iterations: 0,
        trace: Vec::new(),
        attempts: 0,
        system_size: 0,
    };
    if pre.active.is_empty() {
        return Ok(outcome);
    }
    let reduced = &pre.reduced;
    let (p, r) = choose_constants(reduced)?;
    let run_opts = RunOptions { max_iters: opts.max_iters, trace: opts.trace };
    for attempt in 0..=opts.reseeds {
        let lcp = build_mixed_lcp(reduced, &p, &r, opts.seed.wrapping_add(attempt as u64))?;
        let res = run(&lcp, &run_opts)?;
        outcome.attempts = attempt + 1;
        outcome.iterations = res.iterations;
        outcome.trace = res.trace;
        outcome.system_size = lcp.len();
        outcome.status = match res.status {
            TerminationStatus::Solution(v) => {
                let eq = extract_equilibrium(&v, &lcp, reduced)?;
                SolveStatus::Solved(lift(inst, &pre, &supplies, Some(&eq)))
            }
            TerminationStatus::SecondaryRay { .. } => SolveStatus::SecondaryRay,
            TerminationStatus::IterationLimit(_) => SolveStatus::IterationLimit,
            TerminationStatus::DegeneracyDetected(w) => SolveStatus::Degenerate(w),
        };
        if !matches!(outcome.status, SolveStatus::Degenerate(_)) {
            break;
        }
    }
    Ok(outcome)
}

/// Turns an equilibrium of the reduced unit-supply market into one of
/// `inst`: reinserts the items fixed at price zero, undoes the supply
/// normalization and rescales to the canonical form.
pub(crate) fn lift(inst: &Instance, pre: &Preprocessed, supplies: &[Rational], reduced: Option<&Equilibrium>) -> Equilibrium {
    let (n, m) = (inst.num_agents(), inst.num_items());
    let mut prices = vec![Rational::zero(); m];
    let mut allocation: Vec<Vec<Vec<Rational>>> = (0..n)
        .map(|i| (0..m).map(|j| vec![Rational::zero(); inst.utility(i, j).len()]).collect())
        .collect();
    for fixed in &pre.fixed {
        for (i, segs) in fixed.allocation.iter().enumerate() {
            allocation[i][fixed.item] = segs.clone();
        }
    }
    if let Some(eq) = reduced {
        for (k, &j) in pre.active.iter().enumerate() {
            prices[j] = eq.prices[k].clone();
            for i in 0..n {
                allocation[i][j] = eq.allocation[i][k].clone();
            }
        }
    }
    // One normalized unit of item `j` is `S_j` original units.
    for (p, s) in prices.iter_mut().zip(supplies) {
        *p = &*p / s;
    }
    for per_item in &mut allocation {
        for (segs, s) in per_item.iter_mut().zip(supplies) {
            for x in segs.iter_mut() {
                *x = &*x * s;
            }
        }
    }
    Equilibrium::new(inst, prices, allocation).canonical()
}
