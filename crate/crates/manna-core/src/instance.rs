//! Market instances: agents, items, SPLC utilities and endowments.
//!
//! Utilities are stored per (agent, item) as an ordered list of segments.
//! Every segment but the last has a finite positive length; the last one is
//! unbounded. Slopes are signed utilities per unit: positive for liked
//! items, non-positive for chores.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::Rational;

/// One linear piece of an SPLC utility function.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Segment {
    /// Utility per unit on this piece. Negative for chores.
    pub slope: Rational,
    /// Length of the piece, `None` for the final unbounded piece.
    pub length: Option<Rational>,
}

impl Segment {
    pub fn new(slope: Rational, length: Rational) -> Self {
        Segment { slope, length: Some(length) }
    }

    pub fn unbounded(slope: Rational) -> Self {
        Segment { slope, length: None }
    }

    /// Disutility magnitude `|slope|`.
    pub fn magnitude(&self) -> Rational {
        self.slope.abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Setting {
    Exchange,
    Fisher,
    Ceei,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ItemKind {
    Good,
    Bad,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ItemStatus {
    Active,
    ZeroPriceGood,
    ZeroPriceBad,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ItemClass {
    pub kind: ItemKind,
    pub status: ItemStatus,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InstanceError {
    #[error("instance needs at least one agent and one item")]
    Empty,
    #[error("expected {expected} entries in {what}, found {found}")]
    Shape { what: &'static str, expected: usize, found: usize },
    #[error("agent {agent} has an empty utility function for item {item}")]
    EmptyUtility { agent: usize, item: usize },
    #[error("agent {agent}, item {item}: only the last segment may be unbounded")]
    Unbounded { agent: usize, item: usize },
    #[error("agent {agent}, item {item}: the last segment must be unbounded")]
    Bounded { agent: usize, item: usize },
    #[error("agent {agent}, item {item}: segment lengths must be positive")]
    Length { agent: usize, item: usize },
    #[error("agent {agent}, item {item}: slopes must be strictly decreasing")]
    NotConcave { agent: usize, item: usize },
    #[error("agent {agent}, item {item}: slopes change sign inside one function")]
    MixedSigns { agent: usize, item: usize },
    #[error("negative endowment for agent {agent}, item {item}")]
    NegativeEndowment { agent: usize, item: usize },
    #[error("item {item} has zero total supply")]
    NoSupply { item: usize },
    #[error("weights must be positive")]
    Weights,
}

/// A mixed-manna market.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Instance {
    n: usize,
    m: usize,
    utility: Vec<Vec<Segment>>,
    endowment: Vec<Rational>,
    weights: Option<Vec<Rational>>,
    setting: Setting,
}

impl Instance {
    /// Builds and validates an instance. `utility` and `endowment` are
    /// agent-major: entry `i * m + j` belongs to agent `i` and item `j`.
    pub fn new(
        n: usize,
        m: usize,
        utility: Vec<Vec<Segment>>,
        endowment: Vec<Rational>,
        weights: Option<Vec<Rational>>,
        setting: Setting,
    ) -> Result<Self, InstanceError> {
        if n == 0 || m == 0 {
            return Err(InstanceError::Empty);
        }
        if utility.len() != n * m {
            return Err(InstanceError::Shape { what: "utility", expected: n * m, found: utility.len() });
        }
        if endowment.len() != n * m {
            return Err(InstanceError::Shape { what: "endowment", expected: n * m, found: endowment.len() });
        }
        if let Some(w) = &weights {
            if w.len() != n {
                return Err(InstanceError::Shape { what: "weights", expected: n, found: w.len() });
            }
            if w.iter().any(|x| !x.is_positive()) {
                return Err(InstanceError::Weights);
            }
        }
        for i in 0..n {
            for j in 0..m {
                check_function(&utility[i * m + j], i, j)?;
                if endowment[i * m + j].is_negative() {
                    return Err(InstanceError::NegativeEndowment { agent: i, item: j });
                }
            }
        }
        for j in 0..m {
            if (0..n).all(|i| endowment[i * m + j].is_zero()) {
                return Err(InstanceError::NoSupply { item: j });
            }
        }
        Ok(Instance { n, m, utility, endowment, weights, setting })
    }

    /// Exchange market with linear utilities, one slope per (agent, item).
    pub fn exchange_linear(slopes: &[Vec<Rational>], endowment: Vec<Rational>) -> Result<Self, InstanceError> {
        let n = slopes.len();
        let m = slopes.first().map_or(0, |r| r.len());
        let utility = slopes
            .iter()
            .flat_map(|row| row.iter().map(|u| vec![Segment::unbounded(u.clone())]))
            .collect();
        Instance::new(n, m, utility, endowment, None, Setting::Exchange)
    }

    /// Fisher market: every item is split among agents in proportion to
    /// their weights.
    pub fn fisher(n: usize, m: usize, utility: Vec<Vec<Segment>>, weights: Vec<Rational>) -> Result<Self, InstanceError> {
        if weights.len() != n {
            return Err(InstanceError::Shape { what: "weights", expected: n, found: weights.len() });
        }
        if weights.iter().any(|x| !x.is_positive()) {
            return Err(InstanceError::Weights);
        }
        let total: Rational = weights.iter().sum();
        let endowment = (0..n * m).map(|k| &weights[k / m] / &total).collect();
        Instance::new(n, m, utility, endowment, Some(weights), Setting::Fisher)
    }

    /// Equal-income market: every agent owns `1/n` of every item.
    pub fn ceei(n: usize, m: usize, utility: Vec<Vec<Segment>>) -> Result<Self, InstanceError> {
        let share = Rational::new(1.into(), (n as i64).into());
        Instance::new(n, m, utility, vec![share; n * m], None, Setting::Ceei)
    }

    pub fn num_agents(&self) -> usize {
        self.n
    }

    pub fn num_items(&self) -> usize {
        self.m
    }

    pub fn setting(&self) -> Setting {
        self.setting
    }

    pub fn weights(&self) -> Option<&[Rational]> {
        self.weights.as_deref()
    }

    /// Budget weights used for fairness checks: explicit weights, or equal
    /// weights in the equal-income setting.
    pub fn fairness_weights(&self) -> Option<Vec<Rational>> {
        match (&self.weights, self.setting) {
            (Some(w), _) => Some(w.clone()),
            (None, Setting::Ceei) => Some(vec![Rational::one(); self.n]),
            _ => None,
        }
    }

    pub fn utility(&self, agent: usize, item: usize) -> &[Segment] {
        &self.utility[agent * self.m + item]
    }

    pub fn endowment(&self, agent: usize, item: usize) -> &Rational {
        &self.endowment[agent * self.m + item]
    }

    pub fn utilities(&self) -> &[Vec<Segment>] {
        &self.utility
    }

    pub fn endowments(&self) -> &[Rational] {
        &self.endowment
    }

    /// Total amount of item `j` brought to the market.
    pub fn supply(&self, item: usize) -> Rational {
        (0..self.n).map(|i| self.endowment(i, item)).sum()
    }

    pub fn total_segments(&self) -> usize {
        self.utility.iter().map(Vec::len).sum()
    }

    /// Utility agent `i` derives from `amount` units of item `j`, filling
    /// segments in order.
    pub fn value(&self, agent: usize, item: usize, amount: &Rational) -> Rational {
        let mut left = amount.clone();
        let mut total = Rational::zero();
        for seg in self.utility(agent, item) {
            if !left.is_positive() {
                break;
            }
            let take = match &seg.length {
                Some(l) if *l < left => l.clone(),
                _ => left.clone(),
            };
            total += &seg.slope * &take;
            left -= take;
        }
        total
    }

    /// Rescales every item to unit supply. Returns the rescaled instance and
    /// the original supplies. One new unit of item `j` is `S_j` old units, so
    /// lengths shrink by `S_j` and slopes grow by `S_j`.
    pub fn normalized(&self) -> (Instance, Vec<Rational>) {
        let supplies: Vec<Rational> = (0..self.m).map(|j| self.supply(j)).collect();
        let mut out = self.clone();
        for i in 0..self.n {
            for j in 0..self.m {
                let s = &supplies[j];
                out.endowment[i * self.m + j] = &self.endowment[i * self.m + j] / s;
                for seg in &mut out.utility[i * self.m + j] {
                    seg.slope = &seg.slope * s;
                    if let Some(l) = &mut seg.length {
                        *l = &*l / s;
                    }
                }
            }
        }
        (out, supplies)
    }

    /// Keeps only the listed items, in the given order.
    pub fn restrict_items(&self, items: &[usize]) -> Instance {
        let m = items.len();
        let mut utility = Vec::with_capacity(self.n * m);
        let mut endowment = Vec::with_capacity(self.n * m);
        for i in 0..self.n {
            for &j in items {
                utility.push(self.utility(i, j).to_vec());
                endowment.push(self.endowment(i, j).clone());
            }
        }
        Instance { n: self.n, m, utility, endowment, weights: self.weights.clone(), setting: self.setting }
    }
}

fn check_function(f: &[Segment], agent: usize, item: usize) -> Result<(), InstanceError> {
    let last = f.len().checked_sub(1).ok_or(InstanceError::EmptyUtility { agent, item })?;
    for (k, seg) in f.iter().enumerate() {
        match (&seg.length, k == last) {
            (None, false) => return Err(InstanceError::Unbounded { agent, item }),
            (Some(_), true) => return Err(InstanceError::Bounded { agent, item }),
            (Some(l), false) if !l.is_positive() => return Err(InstanceError::Length { agent, item }),
            _ => {}
        }
        if k > 0 && seg.slope >= f[k - 1].slope {
            return Err(InstanceError::NotConcave { agent, item });
        }
    }
    if f[0].slope.is_positive() && f[last].slope.is_negative() {
        return Err(InstanceError::MixedSigns { agent, item });
    }
    Ok(())
}

/// Labels each item a good or a bad from the first-segment slopes: a good
/// iff some agent has a positive first slope.
pub fn classify_items(inst: &Instance) -> Vec<ItemClass> {
    (0..inst.num_items())
        .map(|j| {
            let good = (0..inst.num_agents()).any(|i| inst.utility(i, j)[0].slope.is_positive());
            ItemClass { kind: if good { ItemKind::Good } else { ItemKind::Bad }, status: ItemStatus::Active }
        })
        .collect()
}

/// Allocation fixed at price zero for an item removed by preprocessing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedItem {
    pub item: usize,
    pub status: ItemStatus,
    /// Per agent, per segment amounts.
    pub allocation: Vec<Vec<Rational>>,
    /// Amount left unallocated under free disposal (goods only).
    pub disposed: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Preprocessed {
    /// The instance restricted to the active items.
    pub reduced: Instance,
    /// Original index of each item of `reduced`.
    pub active: Vec<usize>,
    pub classes: Vec<ItemClass>,
    pub fixed: Vec<FixedItem>,
}

/// Removes items that clear at price zero: goods whose total desire does not
/// exceed supply, and bads whose zero-disutility capacity covers supply.
///
/// A good whose desire equals supply exactly is also priced at zero; every
/// unit is then absorbed by positive segments and nothing is disposed.
pub fn preprocess(inst: &Instance) -> Preprocessed {
    let mut classes = classify_items(inst);
    let mut active = Vec::new();
    let mut fixed = Vec::new();
    for (j, class) in classes.iter_mut().enumerate() {
        let supply = inst.supply(j);
        let (kind, capacity) = match class.kind {
            ItemKind::Good => (ItemStatus::ZeroPriceGood, capacity(inst, j, |u| u.is_positive())),
            ItemKind::Bad => (ItemStatus::ZeroPriceBad, capacity(inst, j, |u| u.is_zero())),
        };
        let removed = match (class.kind, &capacity) {
            (_, None) => class.kind == ItemKind::Bad,
            (ItemKind::Good, Some(c)) => *c <= supply,
            (ItemKind::Bad, Some(c)) => *c >= supply,
        };
        if !removed {
            active.push(j);
            continue;
        }
        class.status = kind;
        let keep: fn(&Rational) -> bool = match class.kind {
            ItemKind::Good => |u| u.is_positive(),
            ItemKind::Bad => |u| u.is_zero(),
        };
        let mut left = supply;
        let mut allocation = Vec::with_capacity(inst.num_agents());
        for i in 0..inst.num_agents() {
            let mut row = Vec::new();
            for seg in inst.utility(i, j) {
                if !keep(&seg.slope) || !left.is_positive() {
                    row.push(Rational::zero());
                    continue;
                }
                let take = match &seg.length {
                    Some(l) if *l < left => l.clone(),
                    _ => left.clone(),
                };
                left -= &take;
                row.push(take);
            }
            allocation.push(row);
        }
        fixed.push(FixedItem { item: j, status: kind, allocation, disposed: left });
    }
    Preprocessed { reduced: inst.restrict_items(&active), active, classes, fixed }
}

/// Total length of segments whose slope satisfies `pick`; `None` if an
/// unbounded segment qualifies.
fn capacity(inst: &Instance, item: usize, pick: impl Fn(&Rational) -> bool) -> Option<Rational> {
    let mut total = Rational::zero();
    for i in 0..inst.num_agents() {
        for seg in inst.utility(i, item).iter().filter(|s| pick(&s.slope)) {
            total += seg.length.as_ref()?;
        }
    }
    Some(total)
}

/// Directed graph on agents: `i -> k` iff `i` is non-satiated for some good
/// that `k` brings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EconomyGraph {
    pub adjacency: Vec<Vec<usize>>,
}

impl EconomyGraph {
    pub fn new(inst: &Instance) -> Self {
        let classes = classify_items(inst);
        let n = inst.num_agents();
        let mut adjacency = vec![Vec::new(); n];
        for (i, out) in adjacency.iter_mut().enumerate() {
            for k in 0..n {
                let edge = (0..inst.num_items()).any(|j| {
                    classes[j].kind == ItemKind::Good
                        && inst.utility(i, j).last().is_some_and(|s| s.slope.is_positive())
                        && inst.endowment(k, j).is_positive()
                });
                if edge {
                    out.push(k);
                }
            }
        }
        EconomyGraph { adjacency }
    }

    pub fn is_strongly_connected(&self) -> bool {
        let n = self.adjacency.len();
        let mut reverse = vec![Vec::new(); n];
        for (i, out) in self.adjacency.iter().enumerate() {
            for &k in out {
                reverse[k].push(i);
            }
        }
        n == 0 || (reach_all(&self.adjacency) && reach_all(&reverse))
    }
}

fn reach_all(adj: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SufficiencyReport {
    /// No goods: both conditions are vacuous.
    pub all_bads: bool,
    /// Every agent brings some good and some bad.
    pub condition1: bool,
    pub strongly_connected: bool,
}

impl SufficiencyReport {
    pub fn holds(&self) -> bool {
        self.condition1 && self.strongly_connected
    }
}

/// Checks the existence conditions for mixed markets.
pub fn check_sufficiency(inst: &Instance) -> SufficiencyReport {
    let classes = classify_items(inst);
    if classes.iter().all(|c| c.kind == ItemKind::Bad) {
        return SufficiencyReport { all_bads: true, condition1: true, strongly_connected: true };
    }
    let brings = |i: usize, kind: ItemKind| {
        (0..inst.num_items()).any(|j| classes[j].kind == kind && inst.endowment(i, j).is_positive())
    };
    let condition1 = (0..inst.num_agents()).all(|i| brings(i, ItemKind::Good) && brings(i, ItemKind::Bad));
    SufficiencyReport {
        all_bads: false,
        condition1,
        strongly_connected: EconomyGraph::new(inst).is_strongly_connected(),
    }
}
