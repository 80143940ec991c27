//! Random markets and iteration-count benchmarks.
//!
//! Every random number is a dyadic rational `k / 2^16`. Instances are a pure
//! function of `(seed, trial)`: each trial reads its own ChaCha stream.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{check_sufficiency, Instance, Segment, Setting};
use crate::pipeline::{solve, SolveOptions, SolveStatus};
use crate::verify::verify_equilibrium;
use crate::Rational;

/// Denominator of every random draw.
pub const SCALE: i64 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    AllBads,
    /// The first half of the items (rounded down) are goods.
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchConfig {
    pub n: usize,
    pub m: usize,
    pub segments: usize,
    pub trials: usize,
    pub seed: u64,
    pub mode: Mode,
    pub max_iters: Option<usize>,
}

impl BenchConfig {
    pub fn all_bads(n: usize, m: usize, segments: usize, trials: usize, seed: u64) -> Self {
        BenchConfig { n, m, segments, trials, seed, mode: Mode::AllBads, max_iters: None }
    }

    pub fn total_segments(&self) -> usize {
        self.n * self.m * self.segments
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrialStatus {
    Solved,
    /// Solved, but the verifier rejected the output.
    Rejected,
    SecondaryRay,
    IterationLimit,
    Degenerate,
    Error,
}

impl TrialStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TrialStatus::Solved => "solved",
            TrialStatus::Rejected => "rejected",
            TrialStatus::SecondaryRay => "secondary-ray",
            TrialStatus::IterationLimit => "iteration-limit",
            TrialStatus::Degenerate => "degenerate",
            TrialStatus::Error => "error",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialRecord {
    pub trial: usize,
    pub iterations: usize,
    pub status: TrialStatus,
    /// Runs used, more than one after a degenerate attempt.
    pub attempts: usize,
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchStats {
    pub trials: usize,
    pub solved: usize,
    pub min_iters: Option<usize>,
    pub mean_iters: Option<Rational>,
    pub max_iters: Option<usize>,
    pub failures: BTreeMap<TrialStatus, usize>,
}

fn dyadic(k: i64) -> Rational {
    crate::ratio(k, SCALE)
}

/// Draws `count` distinct values `k / 2^16` with `k` in `range`.
fn distinct(rng: &mut ChaCha8Rng, count: usize, lo: i64, hi: i64) -> Vec<i64> {
    loop {
        let mut ks: Vec<i64> = (0..count).map(|_| rng.gen_range(lo..=hi)).collect();
        ks.sort_unstable();
        if ks.windows(2).all(|w| w[0] != w[1]) {
            return ks;
        }
    }
}

fn draw(cfg: &BenchConfig, rng: &mut ChaCha8Rng) -> Instance {
    let (n, m, segs) = (cfg.n, cfg.m, cfg.segments);
    let goods = match cfg.mode {
        Mode::AllBads => 0,
        Mode::Mixed => m / 2,
    };
    let mut utility = Vec::with_capacity(n * m);
    for _ in 0..n {
        for j in 0..m {
            let slopes: Vec<Rational> = if j < goods {
                // Positive and decreasing.
                distinct(rng, segs, 1, SCALE).into_iter().rev().map(dyadic).collect()
            } else {
                // Non-positive and decreasing, so growing in magnitude.
                distinct(rng, segs, 0, SCALE).into_iter().map(|k| dyadic(-k)).collect()
            };
            let f = slopes
                .into_iter()
                .enumerate()
                .map(|(k, slope)| {
                    if k + 1 == segs {
                        Segment::unbounded(slope)
                    } else {
                        let l = rng.gen_range(1..=SCALE);
                        Segment::new(slope, crate::ratio(l, SCALE * segs as i64))
                    }
                })
                .collect();
            utility.push(f);
        }
    }
    let mut endowment = alloc::vec![Rational::zero(); n * m];
    for j in 0..m {
        let column: Vec<i64> = loop {
            let c: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=SCALE)).collect();
            if c.iter().any(|&k| k > 0) {
                break c;
            }
        };
        let total: i64 = column.iter().sum();
        for (i, k) in column.into_iter().enumerate() {
            endowment[i * m + j] = crate::ratio(k, total);
        }
    }
    Instance::new(n, m, utility, endowment, None, Setting::Exchange).expect("generated instance is well formed")
}

/// The random market of trial `trial`. Mixed markets are redrawn until the
/// existence conditions hold.
pub fn gen_random_instance(cfg: &BenchConfig, trial: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial as u64);
    loop {
        let inst = draw(cfg, &mut rng);
        if cfg.mode == Mode::AllBads || check_sufficiency(&inst).holds() {
            return inst;
        }
    }
}

/// Generates, solves and verifies one trial.
pub fn run_trial(cfg: &BenchConfig, trial: usize) -> TrialRecord {
    let inst = gen_random_instance(cfg, trial);
    let opts = SolveOptions { seed: cfg.seed ^ trial as u64, max_iters: cfg.max_iters, ..SolveOptions::default() };
    let record = |iterations, status, attempts, detail| TrialRecord { trial, iterations, status, attempts, detail };
    match solve(&inst, &opts) {
        Err(e) => record(0, TrialStatus::Error, 1, Some(alloc::format!("{e}"))),
        Ok(out) => {
            let status = match &out.status {
                SolveStatus::Solved(eq) => match verify_equilibrium(&inst, eq, &Rational::zero()) {
                    Ok(rep) if rep.overall => TrialStatus::Solved,
                    _ => TrialStatus::Rejected,
                },
                SolveStatus::SecondaryRay => TrialStatus::SecondaryRay,
                SolveStatus::IterationLimit => TrialStatus::IterationLimit,
                SolveStatus::Degenerate(_) => TrialStatus::Degenerate,
            };
            let detail = match out.status {
                SolveStatus::Degenerate(w) => Some(w),
                _ => None,
            };
            record(out.iterations, status, out.attempts, detail)
        }
    }
}

/// Summarizes records in the order given.
pub fn aggregate(records: &[TrialRecord]) -> BenchStats {
    let mut failures = BTreeMap::new();
    let mut iters = Vec::new();
    for r in records {
        if r.status == TrialStatus::Solved {
            iters.push(r.iterations);
        } else {
            *failures.entry(r.status).or_insert(0) += 1;
        }
    }
    let mean_iters = (!iters.is_empty())
        .then(|| crate::ratio(iters.iter().sum::<usize>() as i64, iters.len() as i64));
    BenchStats {
        trials: records.len(),
        solved: iters.len(),
        min_iters: iters.iter().min().copied(),
        mean_iters,
        max_iters: iters.iter().max().copied(),
        failures,
    }
}

/// Runs every trial in order. Failed trials are recorded, never fatal.
pub fn run_benchmark(cfg: &BenchConfig) -> (BenchStats, Vec<TrialRecord>) {
    let records: Vec<TrialRecord> = (0..cfg.trials).map(|t| run_trial(cfg, t)).collect();
    (aggregate(&records), records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{classify_items, ItemKind};
    use num_traits::{One, Signed};

    #[test]
    fn endowments_are_normalized() {
        let cfg = BenchConfig::all_bads(3, 4, 2, 5, 9);
        for t in 0..5 {
            let inst = gen_random_instance(&cfg, t);
            for j in 0..4 {
                assert!(inst.supply(j).is_one());
            }
        }
    }

    #[test]
    fn bad_slopes_grow_in_magnitude() {
        let inst = gen_random_instance(&BenchConfig::all_bads(2, 3, 4, 1, 1), 0);
        for f in inst.utilities() {
            assert!(f.windows(2).all(|w| w[0].magnitude() < w[1].magnitude()));
            assert!(f.iter().all(|s| !s.slope.is_positive()));
        }
    }

    #[test]
    fn same_trial_same_instance() {
        let cfg = BenchConfig::all_bads(3, 3, 3, 2, 42);
        assert_eq!(gen_random_instance(&cfg, 1), gen_random_instance(&cfg, 1));
        assert_ne!(gen_random_instance(&cfg, 0), gen_random_instance(&cfg, 1));
    }

    #[test]
    fn mixed_instances_have_goods_and_meet_the_conditions() {
        let cfg = BenchConfig { mode: Mode::Mixed, ..BenchConfig::all_bads(3, 4, 2, 3, 5) };
        let inst = gen_random_instance(&cfg, 2);
        let kinds: Vec<_> = classify_items(&inst).iter().map(|c| c.kind).collect();
        assert_eq!(kinds, [ItemKind::Good, ItemKind::Good, ItemKind::Bad, ItemKind::Bad]);
        assert!(check_sufficiency(&inst).holds());
    }

    #[test]
    fn empty_batch() {
        let (stats, records) = run_benchmark(&BenchConfig::all_bads(2, 2, 2, 0, 0));
        assert!(records.is_empty());
        assert_eq!(stats.trials, 0);
        assert_eq!(stats.mean_iters, None);
    }

    #[test]
    fn small_batch_solves() {
        let (stats, _) = run_benchmark(&BenchConfig::all_bads(2, 2, 2, 4, 3));
        assert_eq!(stats.solved, 4, "{stats:?}");
        assert!(stats.min_iters <= stats.max_iters);
    }
}
