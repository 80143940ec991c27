//! Brute-force equilibrium enumeration for tiny markets.
//!
//! A configuration fixes, for every (agent, item) pair, how many leading
//! segments are full and whether the next one is flexible or untouched.
//! Each configuration pins prices down through a linear system: a flexible
//! segment ties its price to the agent's rate (`pi_j = |U| r_i`), and the
//! budgets, market clearing and a normalization supply the rest. Candidates
//! that come out feasible are confirmed with the verifier.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::instance::{classify_items, preprocess, Instance, ItemKind, ItemStatus};
use crate::linalg::{solve_dense, Solution};
use crate::pipeline::lift;
use crate::solution::Equilibrium;
use crate::verify::{verify_equilibrium, SegmentClass};
use crate::Rational;

/// Largest number of segments enumerated by default.
pub const DEFAULT_CAP: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("{segments} segments exceed the enumeration cap of {cap}")]
    CapExceeded { segments: usize, cap: usize },
}

/// Labels of every segment plus, per item, whether supply is left over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    /// Indexed by agent, item, segment.
    pub labels: Vec<Vec<Vec<SegmentClass>>>,
    pub undersold: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Found {
    pub equilibrium: Equilibrium,
    pub configuration: Configuration,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Enumeration {
    /// Distinct equilibria in canonical scale, in discovery order.
    pub equilibria: Vec<Found>,
    /// Verified points of underdetermined configurations; each stands for
    /// a family of equilibria.
    pub families: Vec<Equilibrium>,
    /// Set when some configuration had a consistent but underdetermined
    /// system. The count is then not meaningful.
    pub degenerate: bool,
    pub configurations: usize,
}

impl Enumeration {
    pub fn count(&self) -> usize {
        self.equilibria.len()
    }

    /// Whether `eq` (in any positive scale) is among the equilibria found.
    pub fn contains(&self, eq: &Equilibrium) -> bool {
        let c = eq.canonical();
        self.equilibria.iter().any(|f| f.equilibrium.prices == c.prices && f.equilibrium.allocation == c.allocation)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pattern {
    full: usize,
    flexible: bool,
}

fn patterns(inst: &Instance, kind: ItemKind, i: usize, j: usize) -> Vec<Pattern> {
    let f = inst.utility(i, j);
    if kind == ItemKind::Good && !f[0].slope.is_positive() {
        return vec![Pattern { full: 0, flexible: false }];
    }
    let mut out = Vec::with_capacity(2 * f.len());
    for (full, seg) in f.iter().enumerate() {
        out.push(Pattern { full, flexible: false });
        if !seg.slope.is_zero() {
            out.push(Pattern { full, flexible: true });
        }
    }
    out
}

/// Lists every equilibrium of a market with at most `cap` segments.
pub fn enumerate_equilibria(inst: &Instance, cap: usize) -> Result<Enumeration, OracleError> {
    let segments = inst.total_segments();
    if segments > cap {
        return Err(OracleError::CapExceeded { segments, cap });
    }
    let (unit, supplies) = inst.normalized();
    let pre = preprocess(&unit);
    let undersold: Vec<bool> = (0..inst.num_items())
        .map(|j| pre.fixed.iter().any(|f| f.item == j && f.status == ItemStatus::ZeroPriceGood && f.disposed.is_positive()))
        .collect();
    let mut out = Enumeration::default();
    if pre.active.is_empty() {
        let eq = lift(inst, &pre, &supplies, None);
        let labels = labels_of(inst, &eq);
        out.equilibria.push(Found { equilibrium: eq, configuration: Configuration { labels, undersold } });
        out.configurations = 1;
        return Ok(out);
    }
    let red = &pre.reduced;
    let (n, m) = (red.num_agents(), red.num_items());
    let kinds: Vec<ItemKind> = classify_items(red).iter().map(|c| c.kind).collect();
    let choices: Vec<Vec<Pattern>> =
        (0..n * m).map(|b| patterns(red, kinds[b % m], b / m, b % m)).collect();
    let mut digits = vec![0usize; n * m];
    loop {
        out.configurations += 1;
        let config: Vec<Pattern> = digits.iter().zip(&choices).map(|(&d, c)| c[d]).collect();
        if let Some((eq, family)) = solve_configuration(red, &kinds, &config) {
            if verify_equilibrium(red, &eq, &Rational::zero()).is_ok_and(|r| r.overall) {
                let lifted = lift(inst, &pre, &supplies, Some(&eq));
                if family {
                    if !out.families.contains(&lifted) {
                        out.families.push(lifted);
                    }
                } else if !out.contains(&lifted) {
                    let labels = labels_of(inst, &lifted);
                    out.equilibria.push(Found {
                        equilibrium: lifted,
                        configuration: Configuration { labels, undersold: undersold.clone() },
                    });
                }
            }
            out.degenerate |= family;
        }
        // Advance the mixed-radix counter.
        let mut b = 0;
        loop {
            if b == digits.len() {
                return Ok(out);
            }
            digits[b] += 1;
            if digits[b] < choices[b].len() {
                break;
            }
            digits[b] = 0;
            b += 1;
        }
    }
}

/// Solves the linear system of one configuration. Returns the candidate and
/// whether the system was underdetermined.
fn solve_configuration(red: &Instance, kinds: &[ItemKind], config: &[Pattern]) -> Option<(Equilibrium, bool)> {
    let (n, m) = (red.num_agents(), red.num_items());
    // Unknowns: prices, then rates of agents with a flexible segment, then
    // the money on each flexible segment.
    let mut rate_of = vec![None; n];
    let mut flex: Vec<(usize, usize, usize)> = Vec::new();
    for (b, pat) in config.iter().enumerate() {
        if pat.flexible {
            let (i, j) = (b / m, b % m);
            flex.push((i, j, pat.full));
            if rate_of[i].is_none() {
                rate_of[i] = Some(0);
            }
        }
    }
    let mut next = m;
    for r in rate_of.iter_mut().flatten() {
        *r = next;
        next += 1;
    }
    let f_col = |k: usize| next + k;
    let cols = next + flex.len();
    let sign = |j: usize| if kinds[j] == ItemKind::Good { Rational::one() } else { -Rational::one() };
    let full_length = |i: usize, j: usize| -> Rational {
        let pat = config[i * m + j];
        red.utility(i, j)[..pat.full].iter().map(|s| s.length.clone().expect("full segments are bounded")).sum()
    };

    let mut rows: Vec<Vec<Rational>> = Vec::new();
    let mut rhs: Vec<Rational> = Vec::new();
    let blank = || vec![Rational::zero(); cols];
    for (k, &(i, j, s)) in flex.iter().enumerate() {
        let mut row = blank();
        row[j] = Rational::one();
        row[rate_of[i].unwrap()] = -red.utility(i, j)[s].magnitude();
        rows.push(row);
        rhs.push(Rational::zero());
        let _ = k;
    }
    for i in 0..n {
        let mut row = blank();
        for j in 0..m {
            row[j] = sign(j) * (full_length(i, j) - red.endowment(i, j));
        }
        for (k, &(a, j, _)) in flex.iter().enumerate() {
            if a == i {
                row[f_col(k)] = sign(j);
            }
        }
        rows.push(row);
        rhs.push(Rational::zero());
    }
    for j in 0..m {
        let mut row = blank();
        row[j] = (0..n).map(|i| full_length(i, j)).sum::<Rational>() - Rational::one();
        for (k, &(_, item, _)) in flex.iter().enumerate() {
            if item == j {
                row[f_col(k)] = Rational::one();
            }
        }
        rows.push(row);
        rhs.push(Rational::zero());
    }
    let mut row = blank();
    for v in row.iter_mut().take(m) {
        *v = Rational::one();
    }
    rows.push(row);
    rhs.push(Rational::one());

    let (x, family) = match solve_dense(rows, rhs, cols) {
        Solution::Unique(x) => (x, false),
        Solution::Underdetermined(x) => (x, true),
        Solution::Inconsistent => return None,
    };
    if x[..next].iter().any(|v| !v.is_positive()) {
        return None;
    }
    let mut allocation: Vec<Vec<Vec<Rational>>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let f = red.utility(i, j);
                    let mut segs = vec![Rational::zero(); f.len()];
                    for (k, seg) in f.iter().enumerate().take(config[i * m + j].full) {
                        segs[k] = seg.length.clone().expect("full segments are bounded");
                    }
                    segs
                })
                .collect()
        })
        .collect();
    for (k, &(i, j, s)) in flex.iter().enumerate() {
        let amount = &x[f_col(k)] / &x[j];
        let seg = &red.utility(i, j)[s];
        if amount.is_negative() || seg.length.as_ref().is_some_and(|l| amount > *l) {
            return None;
        }
        allocation[i][j][s] = amount;
    }
    let prices = (0..m).map(|j| sign(j) * &x[j]).collect();
    Some((Equilibrium::new(red, prices, allocation), family))
}

/// Labels segments by how full they are: full ones as forced, partly used
/// ones as flexible, the rest as undesirable.
fn labels_of(inst: &Instance, eq: &Equilibrium) -> Vec<Vec<Vec<SegmentClass>>> {
    (0..inst.num_agents())
        .map(|i| {
            (0..inst.num_items())
                .map(|j| {
                    eq.allocation[i][j]
                        .iter()
                        .zip(inst.utility(i, j))
                        .map(|(x, seg)| match &seg.length {
                            _ if x.is_zero() => SegmentClass::Undesirable,
                            Some(l) if x == l => SegmentClass::Forced,
                            _ => SegmentClass::Flexible,
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}
