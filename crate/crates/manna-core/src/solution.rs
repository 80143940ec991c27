//! Market equilibria and their extraction from complementary solutions.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::instance::{Instance, ItemKind};
use crate::lcp::{LcpSystem, VarLabel};
use crate::lemke::Vertex;
use crate::Rational;

/// Signed prices with a per-segment allocation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Equilibrium {
    /// Positive for goods, negative for bads, zero for items nobody pays for.
    pub prices: Vec<Rational>,
    /// Indexed by agent, item, segment.
    pub allocation: Vec<Vec<Vec<Rational>>>,
    /// Value of each agent's endowment.
    pub budgets: Vec<Rational>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtractError {
    #[error("z is {0}, not zero")]
    Augmented(Rational),
    #[error("item {0} has shifted price at the bound, so it is free")]
    AtBound(usize),
    #[error("the system was not built from a market")]
    NotMarket,
    #[error("vertex has {found} entries, system has {expected}")]
    Shape { expected: usize, found: usize },
    #[error("rescale factor must be positive")]
    Factor,
}

impl Equilibrium {
    /// Assembles an equilibrium and computes budgets from the endowments.
    pub fn new(inst: &Instance, prices: Vec<Rational>, allocation: Vec<Vec<Vec<Rational>>>) -> Self {
        let budgets = budgets(inst, &prices);
        Equilibrium { prices, allocation, budgets }
    }

    /// Builds an equilibrium from per-(agent, item) amounts by filling
    /// segments in order.
    pub fn from_bundles(inst: &Instance, prices: Vec<Rational>, bundles: &[Vec<Rational>]) -> Self {
        let allocation = (0..inst.num_agents())
            .map(|i| (0..inst.num_items()).map(|j| fill(inst, i, j, &bundles[i][j])).collect())
            .collect();
        Equilibrium::new(inst, prices, allocation)
    }

    /// Amount of each item held by each agent.
    pub fn bundles(&self) -> Vec<Vec<Rational>> {
        self.allocation.iter().map(|a| a.iter().map(|segs| segs.iter().sum()).collect()).collect()
    }

    /// Total allocated amount of each item.
    pub fn allocated(&self) -> Vec<Rational> {
        let m = self.prices.len();
        let mut out = vec![Rational::zero(); m];
        for agent in &self.allocation {
            for (j, segs) in agent.iter().enumerate() {
                out[j] += segs.iter().sum::<Rational>();
            }
        }
        out
    }

    /// Supply left unallocated, which only zero-price goods may have.
    pub fn unallocated(&self, inst: &Instance) -> Vec<Rational> {
        self.allocated().iter().enumerate().map(|(j, a)| inst.supply(j) - a).collect()
    }

    /// Scales prices so the largest magnitude is one.
    pub fn canonical(&self) -> Equilibrium {
        match self.prices.iter().map(|p| p.abs()).max() {
            Some(top) if top.is_positive() => rescale(self, &top.recip()).expect("positive factor"),
            _ => self.clone(),
        }
    }
}

fn budgets(inst: &Instance, prices: &[Rational]) -> Vec<Rational> {
    (0..inst.num_agents())
        .map(|i| prices.iter().enumerate().map(|(j, p)| p * inst.endowment(i, j)).sum())
        .collect()
}

/// Splits `amount` of item `j` over agent `i`'s segments in order.
pub(crate) fn fill(inst: &Instance, i: usize, j: usize, amount: &Rational) -> Vec<Rational> {
    let mut left = amount.clone();
    inst.utility(i, j)
        .iter()
        .map(|seg| {
            let take = match &seg.length {
                Some(l) if *l < left => l.clone(),
                _ => left.clone(),
            };
            left -= &take;
            take
        })
        .collect()
}

/// Reads prices and the allocation off a solution of the system built for
/// `inst`. Prices come out in the units of `inst`.
pub fn extract_equilibrium(vertex: &Vertex, lcp: &LcpSystem, inst: &Instance) -> Result<Equilibrium, ExtractError> {
    let consts = lcp.constants.as_ref().ok_or(ExtractError::NotMarket)?;
    if vertex.y.len() != lcp.len() {
        return Err(ExtractError::Shape { expected: lcp.len(), found: vertex.y.len() });
    }
    if !vertex.z.is_zero() {
        return Err(ExtractError::Augmented(vertex.z.clone()));
    }
    let (n, m) = (inst.num_agents(), inst.num_items());
    let mut magnitude = vec![Rational::zero(); m];
    for (k, label) in lcp.labels.iter().enumerate() {
        if let VarLabel::Price(j) = *label {
            magnitude[j] = &consts.p - &vertex.y[k];
        }
    }
    if let Some(j) = magnitude.iter().position(|p| !p.is_positive()) {
        return Err(ExtractError::AtBound(j));
    }
    let mut allocation: Vec<Vec<Vec<Rational>>> = (0..n)
        .map(|i| (0..m).map(|j| vec![Rational::zero(); inst.utility(i, j).len()]).collect())
        .collect();
    for (k, label) in lcp.labels.iter().enumerate() {
        if let VarLabel::Spending { agent, item, segment } = *label {
            allocation[agent][item][segment] = &vertex.y[k] / &magnitude[item];
        }
    }
    for fs in &lcp.forced {
        allocation[fs.agent][fs.item][fs.segment] = fs.length.clone();
    }
    let prices = magnitude
        .into_iter()
        .enumerate()
        .map(|(j, p)| if lcp.kinds[j] == ItemKind::Good { p } else { -p })
        .collect();
    Ok(Equilibrium::new(inst, prices, allocation))
}

/// Multiplies prices and budgets by a positive factor.
pub fn rescale(eq: &Equilibrium, factor: &Rational) -> Result<Equilibrium, ExtractError> {
    if !factor.is_positive() {
        return Err(ExtractError::Factor);
    }
    Ok(Equilibrium {
        prices: eq.prices.iter().map(|p| p * factor).collect(),
        allocation: eq.allocation.clone(),
        budgets: eq.budgets.iter().map(|b| b * factor).collect(),
    })
}
