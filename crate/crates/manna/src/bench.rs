//! Parallel benchmark batches and their CSV output.

use std::io;

use manna_core::harness::{aggregate, run_trial, BenchConfig, BenchStats, Mode, TrialRecord};
use rayon::prelude::*;

use crate::io::decimal;

/// Runs every trial of `cfg` on the rayon pool. Records come back in trial
/// order, so the output does not depend on scheduling.
pub fn run_parallel(cfg: &BenchConfig) -> (BenchStats, Vec<TrialRecord>) {
    let records: Vec<TrialRecord> = (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect();
    (aggregate(&records), records)
}

fn status_cell(r: &TrialRecord) -> String {
    match r.attempts {
        0 | 1 => r.status.as_str().to_string(),
        k => format!("{};attempts={k}", r.status.as_str()),
    }
}

/// Writes `n,m,segs,trial,iters,status` rows and a closing summary row whose
/// trial column reads `summary` and whose iteration column holds the mean.
pub fn write_csv<W: io::Write>(out: W, cfg: &BenchConfig, stats: &BenchStats, records: &[TrialRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "m", "segs", "trial", "iters", "status"])?;
    let dims = [cfg.n.to_string(), cfg.m.to_string(), cfg.segments.to_string()];
    for r in records {
        w.write_record(dims.iter().cloned().chain([r.trial.to_string(), r.iterations.to_string(), status_cell(r)]))?;
    }
    let mean = stats.mean_iters.as_ref().map_or_else(String::new, |m| decimal(m, 1));
    w.write_record(dims.iter().cloned().chain(["summary".into(), mean, summary_note(cfg, stats)]))?;
    w.flush()?;
    Ok(())
}

fn summary_note(cfg: &BenchConfig, stats: &BenchStats) -> String {
    let opt = |v: Option<usize>| v.map_or_else(|| "-".into(), |x| x.to_string());
    let mode = match cfg.mode {
        Mode::AllBads => "all-bads",
        Mode::Mixed => "mixed",
    };
    let mut note = format!(
        "mode={mode};solved={}/{};min={};max={}",
        stats.solved,
        stats.trials,
        opt(stats.min_iters),
        opt(stats.max_iters)
    );
    for (status, count) in &stats.failures {
        note.push_str(&format!(";{}={count}", status.as_str()));
    }
    note
}

/// One human-readable line per batch.
pub fn summary_line(cfg: &BenchConfig, stats: &BenchStats) -> String {
    let mean = stats.mean_iters.as_ref().map_or_else(|| "-".into(), |m| decimal(m, 1));
    format!("{}x{}x{}: mean {mean}; {}", cfg.n, cfg.m, cfg.segments, summary_note(cfg, stats))
}

/// `total_segments,max_iters` for plotting iteration growth.
pub fn plot_point(cfg: &BenchConfig, stats: &BenchStats) -> String {
    format!("{},{}", cfg.total_segments(), stats.max_iters.map_or_else(String::new, |x| x.to_string()))
}
