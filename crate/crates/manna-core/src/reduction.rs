//! Bimatrix games as chore-division markets.
//!
//! `reduce_game_to_exchange` builds an exchange market of `2n + 2` bads in
//! which the prices of the first `2n` bads encode an approximate
//! well-supported Nash equilibrium of an `n x n` game. Bads `0..n` carry the
//! row player's strategy, bads `n..2n` the column player's, bad `2n` funds the
//! deficit agents and bad `2n + 1` absorbs left-over money.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::instance::{Instance, InstanceError, Segment, Setting};
use crate::solution::Equilibrium;
use crate::{ratio, Rational};

/// Disutility of the segments an agent should never reach.
pub const H: i64 = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReductionError {
    #[error("payoff {which}[{row}][{col}] lies outside [0, 1]")]
    Payoff { which: char, row: usize, col: usize },
    #[error("payoff matrices must be square and nonempty")]
    Shape,
    #[error("expected {expected} prices, found {found}")]
    Prices { expected: usize, found: usize },
    #[error("bad {item} has a nonnegative price")]
    NotBad { item: usize },
    #[error("the prices of the {player} player's bads are all twice the minimum")]
    ZeroStrategy { player: &'static str },
    #[error("agent {agent} owns more than the common share of item {item}")]
    Share { agent: usize, item: usize },
    #[error("item {item} is not a bad")]
    NotAllBads { item: usize },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BimatrixGame {
    n: usize,
    row: Vec<Vec<Rational>>,
    col: Vec<Vec<Rational>>,
}

impl BimatrixGame {
    pub fn new(row: Vec<Vec<Rational>>, col: Vec<Vec<Rational>>) -> Result<Self, ReductionError> {
        let n = row.len();
        if n == 0 || col.len() != n || row.iter().chain(&col).any(|r| r.len() != n) {
            return Err(ReductionError::Shape);
        }
        for (which, mat) in [('R', &row), ('C', &col)] {
            for (r, line) in mat.iter().enumerate() {
                if let Some(c) = line.iter().position(|x| x.is_negative() || *x > Rational::one()) {
                    return Err(ReductionError::Payoff { which, row: r, col: c });
                }
            }
        }
        Ok(BimatrixGame { n, row, col })
    }

    pub fn matching_pennies() -> Self {
        let one = || ratio(1, 1);
        let zero = || ratio(0, 1);
        BimatrixGame::new(vec![vec![one(), zero()], vec![zero(), one()]], vec![vec![zero(), one()], vec![one(), zero()]])
            .expect("valid payoffs")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row_payoffs(&self) -> &[Vec<Rational>] {
        &self.row
    }

    pub fn col_payoffs(&self) -> &[Vec<Rational>] {
        &self.col
    }

    /// Expected row payoff of each pure strategy against `beta`.
    pub fn row_values(&self, beta: &MixedStrategy) -> Vec<Rational> {
        self.row.iter().map(|line| line.iter().zip(&beta.0).map(|(a, b)| a * b).sum()).collect()
    }

    /// Expected column payoff of each pure strategy against `alpha`.
    pub fn col_values(&self, alpha: &MixedStrategy) -> Vec<Rational> {
        (0..self.n).map(|s| (0..self.n).map(|k| &alpha.0[k] * &self.col[k][s]).sum()).collect()
    }
}

/// A probability vector over pure strategies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixedStrategy(Vec<Rational>);

impl MixedStrategy {
    /// Returns `None` unless the entries are nonnegative and sum to one.
    pub fn new(probs: Vec<Rational>) -> Option<Self> {
        let ok = !probs.is_empty() && probs.iter().all(|p| !p.is_negative()) && probs.iter().sum::<Rational>().is_one();
        ok.then_some(MixedStrategy(probs))
    }

    pub fn uniform(n: usize) -> Self {
        MixedStrategy(vec![ratio(1, n as i64); n])
    }

    pub fn probs(&self) -> &[Rational] {
        &self.0
    }

    fn normalize(weights: Vec<Rational>) -> Option<Self> {
        let total: Rational = weights.iter().sum();
        (!total.is_zero()).then(|| MixedStrategy(weights.into_iter().map(|w| w / &total).collect()))
    }
}

fn pos(x: &Rational) -> Rational {
    if x.is_positive() {
        x.clone()
    } else {
        Rational::zero()
    }
}

fn pow(n: usize, e: u32) -> Rational {
    ratio((n as i64).pow(e), 1)
}

/// A cheap first segment of the given length followed by disutility `H`.
/// Zero-length first segments are left out.
fn kinked(slope: Rational, length: Rational) -> Vec<Segment> {
    let tail = Segment::unbounded(ratio(-H, 1));
    if length.is_zero() {
        vec![tail]
    } else {
        vec![Segment::new(-slope, length), tail]
    }
}

struct Agent {
    utility: Vec<Vec<Segment>>,
    endowment: Vec<Rational>,
}

impl Agent {
    fn new(m: usize) -> Self {
        Agent { utility: vec![vec![Segment::unbounded(ratio(-H, 1))]; m], endowment: vec![Rational::zero(); m] }
    }

    fn linear(&mut self, item: usize, disutility: i64) {
        self.utility[item] = vec![Segment::unbounded(ratio(-disutility, 1))];
    }
}

/// One player's pair agent for the ordered strategy pair `(s, t)`. `own`
/// maps a strategy to the player's own bad, `other` to the opponent's, and
/// `gain[k]` is the payoff difference of `t` over `s` against `k`.
fn player_agent(m: usize, n: usize, own: usize, other: impl Fn(usize) -> usize, gain: &[Rational]) -> Agent {
    let (n4, n6) = (pow(n, 4), pow(n, 6));
    let third = ratio(1, 3);
    let total: Rational = gain.iter().sum();
    let mut a = Agent::new(m);
    a.endowment[own] = n4.recip();
    a.utility[own] = kinked(Rational::one(), n4.recip());
    for (k, g) in gain.iter().enumerate() {
        a.endowment[other(k)] = pos(g) / &n6;
        a.utility[other(k)] = kinked(third.clone(), pos(&-g) / &n6);
    }
    a.endowment[m - 2] = pos(&-&total) / &n6;
    a.utility[m - 2] = kinked(third, pos(&total) / &n6);
    a.linear(m - 1, 3);
    a
}

/// Compiles `game` into an all-bads exchange market with `2n + 2` bads and
/// `6n^2 + 6n + 2` agents.
pub fn reduce_game_to_exchange(game: &BimatrixGame) -> Instance {
    let n = game.n;
    let m = 2 * n + 2;
    let mut agents = Vec::new();
    // Price regulators keep every price ratio within two.
    for j in 0..m {
        for jj in (0..m).filter(|&jj| jj != j) {
            let mut a = Agent::new(m);
            a.endowment[j] = ratio(1, n as i64);
            a.linear(j, 1);
            a.linear(jj, 2);
            agents.push(a);
        }
    }
    // Deficit agents.
    for j in 0..2 * n {
        let mut a = Agent::new(m);
        a.endowment[m - 2] = pow(n, 8).recip();
        a.linear(j, 1);
        agents.push(a);
    }
    for s in 0..n {
        for t in (0..n).filter(|&t| t != s) {
            let gain: Vec<Rational> = (0..n).map(|k| &game.row[t][k] - &game.row[s][k]).collect();
            agents.push(player_agent(m, n, s, |k| n + k, &gain));
        }
    }
    for s in 0..n {
        for t in (0..n).filter(|&t| t != s) {
            let gain: Vec<Rational> = (0..n).map(|k| &game.col[k][t] - &game.col[k][s]).collect();
            agents.push(player_agent(m, n, n + s, |k| k, &gain));
        }
    }
    let count = agents.len();
    let (utility, endowment) = agents.into_iter().map(|a| (a.utility, a.endowment)).unzip::<_, _, Vec<_>, Vec<_>>();
    Instance::new(count, m, utility.concat(), endowment.concat(), None, Setting::Exchange)
        .expect("reduction output is well formed")
}

/// Reads strategies off equilibrium prices of a reduced market. Prices are
/// scaled so the cheapest bad costs one; a bad at price `p` then gets weight
/// `2 - |p|`.
pub fn extract_strategies(prices: &[Rational], n: usize) -> Result<(MixedStrategy, MixedStrategy), ReductionError> {
    if prices.len() != 2 * n + 2 {
        return Err(ReductionError::Prices { expected: 2 * n + 2, found: prices.len() });
    }
    if let Some(item) = prices.iter().position(|p| !p.is_negative()) {
        return Err(ReductionError::NotBad { item });
    }
    let min = prices.iter().map(Signed::abs).min().expect("nonempty");
    let weight = |p: &Rational| pos(&(ratio(2, 1) - p.abs() / &min));
    let u = prices[..n].iter().map(weight).collect();
    let v = prices[n..2 * n].iter().map(weight).collect();
    let alpha = MixedStrategy::normalize(u).ok_or(ReductionError::ZeroStrategy { player: "row" })?;
    let beta = MixedStrategy::normalize(v).ok_or(ReductionError::ZeroStrategy { player: "column" })?;
    Ok((alpha, beta))
}

/// Whether every strategy played with positive probability is within `eps`
/// of a best response, for both players.
pub fn check_well_supported(game: &BimatrixGame, alpha: &MixedStrategy, beta: &MixedStrategy, eps: &Rational) -> bool {
    let ok = |values: Vec<Rational>, probs: &[Rational]| {
        let best = values.iter().max().expect("nonempty").clone();
        values.iter().zip(probs).all(|(v, p)| p.is_zero() || *v >= &best - eps)
    };
    ok(game.row_values(beta), &alpha.0) && ok(game.col_values(alpha), &beta.0)
}

/// Gives every agent `share` of every bad. The extra amount an agent
/// receives is absorbed by a new zero-disutility first segment, so
/// equilibria correspond one to one.
pub fn exchange_to_fisher(inst: &Instance, share: &Rational) -> Result<Instance, ReductionError> {
    let (n, m) = (inst.num_agents(), inst.num_items());
    let mut utility = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            let f = inst.utility(i, j);
            if f[0].slope.is_positive() {
                return Err(ReductionError::NotAllBads { item: j });
            }
            let extra = share - inst.endowment(i, j);
            if extra.is_negative() {
                return Err(ReductionError::Share { agent: i, item: j });
            }
            let mut g = Vec::with_capacity(f.len() + 1);
            if extra.is_positive() {
                g.push(Segment::new(Rational::zero(), extra));
            }
            g.extend(f.iter().cloned());
            utility.push(g);
        }
    }
    Ok(Instance::new(n, m, utility, vec![share.clone(); n * m], None, Setting::Ceei)?)
}

/// Maps an equilibrium of `exchange_to_fisher(exchange, _)` back to
/// `exchange` by dropping the added first segments.
pub fn fisher_to_exchange(exchange: &Instance, fisher: &Equilibrium) -> Equilibrium {
    let allocation = fisher
        .allocation
        .iter()
        .enumerate()
        .map(|(i, per_item)| {
            per_item
                .iter()
                .enumerate()
                .map(|(j, segs)| {
                    let added = segs.len() - exchange.utility(i, j).len();
                    segs[added..].to_vec()
                })
                .collect()
        })
        .collect();
    Equilibrium::new(exchange, fisher.prices.clone(), allocation)
}
