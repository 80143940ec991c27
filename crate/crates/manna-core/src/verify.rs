//! Independent equilibrium checks.
//!
//! Optimality is decided from first-order conditions. An agent's bundle is
//! optimal iff some money rate `lambda >= 0` exists such that every good
//! segment with `U / p > lambda` is full, every one with `U / p < lambda`
//! is empty, and the reverse holds for bads, with the budget spent exactly.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::instance::{Instance, Segment};
use crate::solution::Equilibrium;
use crate::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegmentClass {
    Forced,
    Flexible,
    Undesirable,
}

/// Segments of one side sharing a bang per buck (goods) or pain per buck
/// (bads).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatioClass {
    pub ratio: Rational,
    /// `(item, segment)` pairs.
    pub segments: Vec<(usize, usize)>,
    pub label: SegmentClass,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionReport {
    pub agent: usize,
    /// Money rate that balances the budget at these prices.
    pub lambda: Rational,
    /// Good classes by decreasing bang per buck.
    pub goods: Vec<RatioClass>,
    /// Bad classes by increasing pain per buck.
    pub bads: Vec<RatioClass>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error("item {0} has price zero")]
    ZeroPrice(usize),
    #[error("expected {expected} {what}, found {found}")]
    Shape { what: &'static str, expected: usize, found: usize },
    #[error("agent {agent}, item {item}, segment {segment}: amount outside the segment")]
    OutOfRange { agent: usize, item: usize, segment: usize },
    #[error("agent {agent}, item {item}: segment {segment} used before the previous one is full")]
    OutOfOrder { agent: usize, item: usize, segment: usize },
    #[error("epsilon must be non-negative")]
    Epsilon,
    #[error("fairness needs budget weights")]
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    /// Per agent: the bundle is optimal and the budget is spent exactly.
    pub optimal_bundles: Vec<bool>,
    pub budget_balanced: Vec<bool>,
    pub clearing: Vec<bool>,
    pub overall: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FairnessReport {
    pub envy_free: bool,
    pub proportional: bool,
}

/// Groups agent `agent`'s segments by ratio and labels them at the money
/// rate that balances the budget.
pub fn partition_segments(inst: &Instance, prices: &[Rational], agent: usize) -> Result<PartitionReport, VerifyError> {
    check_prices(inst, prices)?;
    if let Some(j) = prices.iter().position(Zero::is_zero) {
        return Err(VerifyError::ZeroPrice(j));
    }
    let lambda = balancing_rate(inst, prices, agent);
    let mut goods: Vec<RatioClass> = Vec::new();
    let mut bads: Vec<RatioClass> = Vec::new();
    for (j, p) in prices.iter().enumerate() {
        for (k, seg) in inst.utility(agent, j).iter().enumerate() {
            let ratio = &seg.slope / p;
            let side = if p.is_positive() { &mut goods } else { &mut bads };
            match side.iter_mut().find(|c| c.ratio == ratio) {
                Some(c) => c.segments.push((j, k)),
                None => side.push(RatioClass { ratio, segments: vec![(j, k)], label: SegmentClass::Flexible }),
            }
        }
    }
    goods.sort_by(|a, b| b.ratio.cmp(&a.ratio));
    bads.sort_by(|a, b| a.ratio.cmp(&b.ratio));
    for c in &mut goods {
        c.label = label(c.ratio.cmp(&lambda));
    }
    for c in &mut bads {
        c.label = label(lambda.cmp(&c.ratio));
    }
    Ok(PartitionReport { agent, lambda, goods, bads })
}

fn label(ord: Ordering) -> SegmentClass {
    match ord {
        Ordering::Greater => SegmentClass::Forced,
        Ordering::Equal => SegmentClass::Flexible,
        Ordering::Less => SegmentClass::Undesirable,
    }
}

/// Net spending range `[lo, hi]` of an agent at rate `lambda`; `None` on
/// the low end stands for minus infinity and on the high end for plus
/// infinity. Returns `None` when demand is unbounded in the wrong direction.
fn spending_range(
    inst: &Instance,
    prices: &[Rational],
    agent: usize,
    lambda: &Rational,
) -> Option<(Option<Rational>, Option<Rational>)> {
    let mut lo = Some(Rational::zero());
    let mut hi = Some(Rational::zero());
    for (j, p) in prices.iter().enumerate() {
        for seg in inst.utility(agent, j) {
            let ord = (&seg.slope / p).cmp(lambda);
            let ord = if p.is_positive() { ord } else { ord.reverse() };
            let (to_lo, to_hi) = match ord {
                Ordering::Less => continue,
                Ordering::Greater => (true, true),
                Ordering::Equal => (!p.is_positive(), p.is_positive()),
            };
            let Some(l) = &seg.length else {
                // An unbounded segment pushes its ends to infinity in the
                // direction of its price sign.
                if (to_lo && p.is_positive()) || (to_hi && p.is_negative()) {
                    return None;
                }
                if to_lo {
                    lo = None;
                }
                if to_hi {
                    hi = None;
                }
                continue;
            };
            let money = l * p;
            if to_lo {
                lo = lo.map(|v| v + &money);
            }
            if to_hi {
                hi = hi.map(|v| v + &money);
            }
        }
    }
    Some((lo, hi))
}

/// Finds a rate at which the budget lies in the spending range, preferring
/// the interior of an interval between breakpoints.
fn balancing_rate(inst: &Instance, prices: &[Rational], agent: usize) -> Rational {
    let budget: Rational = prices.iter().enumerate().map(|(j, p)| p * inst.endowment(agent, j)).sum();
    let mut points: Vec<Rational> = prices
        .iter()
        .enumerate()
        .flat_map(|(j, p)| inst.utility(agent, j).iter().map(move |s| &s.slope / p))
        .filter(|r| r.is_positive())
        .collect();
    points.sort();
    points.dedup();
    let two = Rational::from_integer(2.into());
    let mut candidates = Vec::with_capacity(2 * points.len() + 2);
    let mut prev = Rational::zero();
    for b in &points {
        candidates.push((&prev + b) / &two);
        candidates.push(b.clone());
        prev = b.clone();
    }
    candidates.push(prev + Rational::one());
    candidates.insert(0, Rational::zero());
    let fits = |lambda: &Rational| {
        spending_range(inst, prices, agent, lambda)
            .is_some_and(|(lo, hi)| lo.is_none_or(|lo| lo <= budget) && hi.is_none_or(|hi| budget <= hi))
    };
    candidates.into_iter().find(|l| fits(l)).unwrap_or_else(Rational::zero)
}

fn check_prices(inst: &Instance, prices: &[Rational]) -> Result<(), VerifyError> {
    if prices.len() != inst.num_items() {
        return Err(VerifyError::Shape { what: "prices", expected: inst.num_items(), found: prices.len() });
    }
    Ok(())
}

/// Checks the allocation is well formed: non-negative, within segments and
/// filled in order.
pub fn check_allocation(inst: &Instance, eq: &Equilibrium) -> Result<(), VerifyError> {
    check_prices(inst, &eq.prices)?;
    let n = inst.num_agents();
    if eq.allocation.len() != n {
        return Err(VerifyError::Shape { what: "agents", expected: n, found: eq.allocation.len() });
    }
    for (i, per_item) in eq.allocation.iter().enumerate() {
        if per_item.len() != inst.num_items() {
            return Err(VerifyError::Shape { what: "items", expected: inst.num_items(), found: per_item.len() });
        }
        for (j, segs) in per_item.iter().enumerate() {
            let f = inst.utility(i, j);
            if segs.len() != f.len() {
                return Err(VerifyError::Shape { what: "segments", expected: f.len(), found: segs.len() });
            }
            for (k, (x, seg)) in segs.iter().zip(f).enumerate() {
                if x.is_negative() || seg.length.as_ref().is_some_and(|l| x > l) {
                    return Err(VerifyError::OutOfRange { agent: i, item: j, segment: k });
                }
                if k > 0 && x.is_positive() && !is_full(&segs[k - 1], &f[k - 1]) {
                    return Err(VerifyError::OutOfOrder { agent: i, item: j, segment: k });
                }
            }
        }
    }
    Ok(())
}

fn is_full(x: &Rational, seg: &Segment) -> bool {
    seg.length.as_ref().is_some_and(|l| x == l)
}

/// Whether some rate `lambda >= 0` supports agent `i`'s bundle.
fn optimal(inst: &Instance, eq: &Equilibrium, i: usize) -> bool {
    let mut lo = Rational::zero();
    let mut hi: Option<Rational> = None;
    let lower = |lo: &mut Rational, v: Rational| {
        if v > *lo {
            *lo = v;
        }
    };
    let upper = |hi: &mut Option<Rational>, v: Rational| {
        if hi.as_ref().is_none_or(|h| v < *h) {
            *hi = Some(v);
        }
    };
    for (j, p) in eq.prices.iter().enumerate() {
        for (x, seg) in eq.allocation[i][j].iter().zip(inst.utility(i, j)) {
            let full = is_full(x, seg);
            let empty = x.is_zero();
            if p.is_zero() {
                let ok = match (full, empty) {
                    (true, _) => !seg.slope.is_negative(),
                    (_, true) => !seg.slope.is_positive(),
                    _ => seg.slope.is_zero(),
                };
                if !ok {
                    return false;
                }
                continue;
            }
            let ratio = &seg.slope / p;
            // A full good segment caps lambda and an empty one floors it;
            // a negative price swaps the roles.
            if !full && !empty {
                lower(&mut lo, ratio.clone());
                upper(&mut hi, ratio);
            } else if full == p.is_positive() {
                upper(&mut hi, ratio);
            } else {
                lower(&mut lo, ratio);
            }
        }
    }
    hi.is_none_or(|h| lo <= h)
}

/// Checks prices and allocation form an equilibrium. With `epsilon > 0`
/// only market clearing is relaxed, to within `epsilon` times supply.
pub fn verify_equilibrium(inst: &Instance, eq: &Equilibrium, epsilon: &Rational) -> Result<VerifyReport, VerifyError> {
    if epsilon.is_negative() {
        return Err(VerifyError::Epsilon);
    }
    check_allocation(inst, eq)?;
    let (n, m) = (inst.num_agents(), inst.num_items());
    let mut budget_balanced = Vec::with_capacity(n);
    let mut optimal_bundles = Vec::with_capacity(n);
    for i in 0..n {
        let budget: Rational = (0..m).map(|j| &eq.prices[j] * inst.endowment(i, j)).sum();
        let spent: Rational =
            (0..m).map(|j| &eq.prices[j] * eq.allocation[i][j].iter().sum::<Rational>()).sum();
        let balanced = budget == spent;
        budget_balanced.push(balanced);
        optimal_bundles.push(balanced && optimal(inst, eq, i));
    }
    let allocated = eq.allocated();
    let clearing: Vec<bool> = (0..m)
        .map(|j| {
            let supply = inst.supply(j);
            let free_disposal = eq.prices[j].is_zero() && (0..n).any(|i| inst.utility(i, j)[0].slope.is_positive());
            if free_disposal && allocated[j] <= supply {
                return true;
            }
            (&allocated[j] - &supply).abs() <= epsilon * &supply
        })
        .collect();
    let overall = optimal_bundles.iter().chain(&clearing).all(|b| *b);
    Ok(VerifyReport { optimal_bundles, budget_balanced, clearing, overall })
}

/// Weighted envy-freeness and proportionality of an allocation.
pub fn check_fairness(inst: &Instance, eq: &Equilibrium) -> Result<FairnessReport, VerifyError> {
    let weights = inst.fairness_weights().ok_or(VerifyError::NotApplicable)?;
    check_allocation(inst, eq)?;
    let (n, m) = (inst.num_agents(), inst.num_items());
    let bundles = eq.bundles();
    let worth = |i: usize, bundle: &[Rational]| -> Rational { (0..m).map(|j| inst.value(i, j, &bundle[j])).sum() };
    let total: Rational = weights.iter().sum();
    let mut envy_free = true;
    let mut proportional = true;
    for i in 0..n {
        let own = worth(i, &bundles[i]);
        for k in (0..n).filter(|&k| k != i) {
            if &own / &weights[i] < worth(i, &bundles[k]) / &weights[k] {
                envy_free = false;
            }
        }
        let supply: Vec<Rational> = (0..m).map(|j| inst.supply(j)).collect();
        if own < worth(i, &supply) * &weights[i] / &total {
            proportional = false;
        }
    }
    Ok(FairnessReport { envy_free, proportional })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Segment, Setting};
    use crate::ratio;

    fn good_and_bad() -> Instance {
        Instance::exchange_linear(
            &[vec![ratio(1, 1), ratio(-2, 1)], vec![ratio(1, 1), ratio(-3, 1)]],
            vec![ratio(1, 2); 4],
        )
        .unwrap()
    }

    fn three_chores() -> Instance {
        let u = [[-10, -2, -1], [-1, -100, -100]];
        let utility = u.iter().flatten().map(|&s| vec![Segment::unbounded(ratio(s, 1))]).collect();
        Instance::ceei(2, 3, utility).unwrap()
    }

    fn bundles(rows: &[&[(i64, i64)]]) -> Vec<Vec<Rational>> {
        rows.iter().map(|r| r.iter().map(|&(a, b)| ratio(a, b)).collect()).collect()
    }

    #[test]
    fn good_and_bad_equilibrium_is_accepted() {
        let inst = good_and_bad();
        let eq = Equilibrium::from_bundles(
            &inst,
            vec![ratio(2, 1), ratio(-4, 1)],
            &bundles(&[&[(1, 1), (3, 4)], &[(0, 1), (1, 4)]]),
        );
        assert!(verify_equilibrium(&inst, &eq, &ratio(0, 1)).unwrap().overall);
    }

    #[test]
    fn three_chores_pairs() {
        let inst = three_chores();
        let good = Equilibrium::from_bundles(
            &inst,
            vec![ratio(-20, 13), ratio(-4, 13), ratio(-2, 13)],
            &bundles(&[&[(7, 20), (1, 1), (1, 1)], &[(13, 20), (0, 1), (0, 1)]]),
        );
        assert!(verify_equilibrium(&inst, &good, &ratio(0, 1)).unwrap().overall);
        let bad = Equilibrium::from_bundles(
            &inst,
            vec![ratio(-4, 3), ratio(-1, 3), ratio(-1, 3)],
            &bundles(&[&[(1, 4), (1, 1), (1, 1)], &[(3, 4), (0, 1), (0, 1)]]),
        );
        let report = verify_equilibrium(&inst, &bad, &ratio(0, 1)).unwrap();
        assert_eq!(report.optimal_bundles, [false, true]);
        assert!(report.budget_balanced[0]);
    }

    #[test]
    fn three_chores_partitions() {
        let inst = three_chores();
        let p = [ratio(-20, 13), ratio(-4, 13), ratio(-2, 13)];
        let rep = partition_segments(&inst, &p, 0).unwrap();
        assert_eq!(rep.bads.len(), 1);
        assert_eq!(rep.bads[0].ratio, ratio(13, 2));
        let p = [ratio(-4, 3), ratio(-1, 3), ratio(-1, 3)];
        let rep = partition_segments(&inst, &p, 0).unwrap();
        let ratios: Vec<_> = rep.bads.iter().map(|c| c.ratio.clone()).collect();
        assert_eq!(ratios, [ratio(3, 1), ratio(6, 1), ratio(15, 2)]);
    }

    #[test]
    fn uniform_goods_form_one_flexible_class() {
        let utility = vec![vec![Segment::unbounded(ratio(2, 1))], vec![Segment::unbounded(ratio(4, 1))]];
        let inst = Instance::new(1, 2, utility, vec![ratio(1, 1); 2], None, Setting::Exchange).unwrap();
        let rep = partition_segments(&inst, &[ratio(1, 1), ratio(2, 1)], 0).unwrap();
        assert_eq!(rep.goods.len(), 1);
        assert_eq!(rep.goods[0].label, SegmentClass::Flexible);
        assert_eq!(rep.lambda, ratio(2, 1));
        assert_eq!(partition_segments(&inst, &[ratio(0, 1), ratio(1, 1)], 0), Err(VerifyError::ZeroPrice(0)));
    }

    #[test]
    fn single_agent_absorbs_the_bad() {
        let inst = Instance::exchange_linear(&[vec![ratio(-3, 1)]], vec![ratio(1, 1)]).unwrap();
        let eq = Equilibrium::from_bundles(&inst, vec![ratio(-7, 5)], &bundles(&[&[(1, 1)]]));
        assert!(verify_equilibrium(&inst, &eq, &ratio(0, 1)).unwrap().overall);
    }

    #[test]
    fn malformed_allocations_are_errors() {
        let f = vec![Segment::new(ratio(-1, 1), ratio(1, 2)), Segment::unbounded(ratio(-2, 1))];
        let inst = Instance::new(1, 1, vec![f], vec![ratio(1, 1)], None, Setting::Exchange).unwrap();
        let eq = Equilibrium::new(&inst, vec![ratio(-1, 1)], vec![vec![vec![ratio(1, 4), ratio(3, 4)]]]);
        assert!(matches!(verify_equilibrium(&inst, &eq, &ratio(0, 1)), Err(VerifyError::OutOfOrder { .. })));
        let eq = Equilibrium::new(&inst, vec![ratio(-1, 1)], vec![vec![vec![ratio(-1, 4), ratio(0, 1)]]]);
        assert!(matches!(verify_equilibrium(&inst, &eq, &ratio(0, 1)), Err(VerifyError::OutOfRange { .. })));
    }

    #[test]
    fn clearing_tolerance() {
        let inst = good_and_bad();
        let eq = Equilibrium::from_bundles(
            &inst,
            vec![ratio(2, 1), ratio(-4, 1)],
            &bundles(&[&[(1, 1), (3, 4)], &[(0, 1), (1, 4)]]),
        );
        let mut short = eq.clone();
        short.allocation[1][1][0] = ratio(1, 5);
        assert!(!verify_equilibrium(&inst, &short, &ratio(0, 1)).unwrap().overall);
        // Optimality stays exact, so relaxing clearing does not help an
        // agent whose budget no longer balances.
        let rep = verify_equilibrium(&inst, &short, &ratio(1, 10)).unwrap();
        assert!(rep.clearing.iter().all(|c| *c));
        assert!(!rep.optimal_bundles[1]);
    }

    #[test]
    fn fairness_of_symmetric_and_swapped_allocations() {
        let inst = three_chores();
        let eq = Equilibrium::from_bundles(
            &inst,
            vec![ratio(-20, 13), ratio(-4, 13), ratio(-2, 13)],
            &bundles(&[&[(7, 20), (1, 1), (1, 1)], &[(13, 20), (0, 1), (0, 1)]]),
        );
        assert_eq!(check_fairness(&inst, &eq).unwrap(), FairnessReport { envy_free: true, proportional: true });
        let swapped = Equilibrium::from_bundles(
            &inst,
            eq.prices.clone(),
            &bundles(&[&[(13, 20), (0, 1), (0, 1)], &[(7, 20), (1, 1), (1, 1)]]),
        );
        assert!(!check_fairness(&inst, &swapped).unwrap().envy_free);
        assert_eq!(check_fairness(&good_and_bad(), &eq), Err(VerifyError::NotApplicable));
    }
}
