//! The augmented complementarity system of a market.
//!
//! Variables, in column order: one `r_i` per agent, one `p_j` per item, then
//! one spending variable `f` and one supplement `s` per segment. Row `k` is
//! the constraint complementary to column `k`. With slacks `v` the system
//! reads `A y + v - c z = q`.
//!
//! Prices enter shifted: a good costs `P - p_j` and a bad pays
//! `P - p_j`. Likewise `1 / (R - r_i)` is agent `i`'s bang per buck.
//!
//! Zero-disutility segments of bads are always fully consumed at any
//! equilibrium (they pay without hurting), so their spending is substituted
//! as `L (P - p_j)` instead of getting variables. Without this the system
//! has a negative right-hand side that `z` does not cover.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::instance::{classify_items, preprocess, Instance, ItemKind};
use crate::Rational;

/// Length used for the final unbounded segment once supply is one unit.
pub fn last_segment_length() -> Rational {
    crate::ratio(11, 10)
}

/// Denominator scale of the random offsets `eps_j = k / (m * 2^16)`.
pub const EPSILON_STEPS: i64 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarLabel {
    InverseBpb(usize),
    Price(usize),
    Spending { agent: usize, item: usize, segment: usize },
    Supplement { agent: usize, item: usize, segment: usize },
    /// Column of a system not built from a market.
    Generic(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constants {
    pub p: Rational,
    pub r: Rational,
    /// Coefficient of `z` in each good's spending row; one for bads.
    pub delta: Vec<Rational>,
}

/// A segment whose spending is fixed at `length * (P - p_item)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForcedSegment {
    pub agent: usize,
    pub item: usize,
    pub segment: usize,
    pub length: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LcpSystem {
    /// Sparse rows of `A`, entries sorted by column.
    pub rows: Vec<Vec<(usize, Rational)>>,
    pub q: Vec<Rational>,
    pub c: Vec<Rational>,
    pub labels: Vec<VarLabel>,
    pub constants: Option<Constants>,
    pub kinds: Vec<ItemKind>,
    pub forced: Vec<ForcedSegment>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LcpError {
    #[error("every slope is zero")]
    AllSlopesZero,
    #[error("item {0} does not have unit supply")]
    NotNormalized(usize),
    #[error("item {0} clears at price zero and must be removed first")]
    NotPreprocessed(usize),
    #[error("matrix must be square and match q and c")]
    Shape,
}

impl LcpSystem {
    /// A plain LCP `A y + v - c z = q` with unlabeled columns.
    pub fn from_dense(a: &[Vec<Rational>], q: Vec<Rational>, c: Vec<Rational>) -> Result<Self, LcpError> {
        let n = q.len();
        if a.len() != n || c.len() != n || a.iter().any(|r| r.len() != n) {
            return Err(LcpError::Shape);
        }
        let rows = a
            .iter()
            .map(|r| r.iter().cloned().enumerate().filter(|(_, v)| !v.is_zero()).collect())
            .collect();
        Ok(LcpSystem {
            rows,
            q,
            c,
            labels: (0..n).map(VarLabel::Generic).collect(),
            constants: None,
            kinds: Vec::new(),
            forced: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn entry(&self, row: usize, col: usize) -> Rational {
        match self.rows[row].binary_search_by_key(&col, |e| e.0) {
            Ok(k) => self.rows[row][k].1.clone(),
            Err(_) => Rational::zero(),
        }
    }

    pub fn dense(&self) -> Vec<Vec<Rational>> {
        let n = self.len();
        self.rows
            .iter()
            .map(|r| {
                let mut out = vec![Rational::zero(); n];
                for (k, v) in r {
                    out[*k] = v.clone();
                }
                out
            })
            .collect()
    }

    /// Upper bound that column `k` must stay strictly below along the path.
    pub fn strict_bound(&self, k: usize) -> Option<&Rational> {
        let c = self.constants.as_ref()?;
        match self.labels[k] {
            VarLabel::Price(_) => Some(&c.p),
            VarLabel::InverseBpb(_) => Some(&c.r),
            _ => None,
        }
    }

    /// Smallest `z` making `y = 0` feasible: `max(-q_a / c_a)` over rows
    /// with `c_a > 0`, or zero.
    pub fn primary_ray_z(&self) -> Rational {
        self.q
            .iter()
            .zip(&self.c)
            .filter(|(_, c)| c.is_positive())
            .map(|(q, c)| -q / c)
            .fold(Rational::zero(), |a, b| if b > a { b } else { a })
    }

    /// Residual `q + c z - A y` for a point; all entries are the slacks.
    pub fn slacks(&self, y: &[Rational], z: &Rational) -> Vec<Rational> {
        (0..self.len())
            .map(|a| {
                let ay: Rational = self.rows[a].iter().map(|(k, v)| v * &y[*k]).sum();
                &self.q[a] + &self.c[a] * z - ay
            })
            .collect()
    }
}

/// Picks `P = 1` and `R = (P / U_min) (2 + B_max)` where `U_min` is the
/// smallest nonzero slope magnitude and `B_max` the largest total endowment
/// of an agent.
pub fn choose_constants(inst: &Instance) -> Result<(Rational, Rational), LcpError> {
    let p = Rational::one();
    let u_min = inst
        .utilities()
        .iter()
        .flatten()
        .map(|s| s.magnitude())
        .filter(|u| !u.is_zero())
        .min()
        .ok_or(LcpError::AllSlopesZero)?;
    let b_max = (0..inst.num_agents())
        .map(|i| (0..inst.num_items()).map(|j| inst.endowment(i, j)).sum::<Rational>())
        .max()
        .unwrap_or_else(Rational::zero);
    let r = &p / u_min * (Rational::from_integer(2.into()) + b_max);
    Ok((p, r))
}

/// The offsets `delta_j = 1 + eps_j` drawn from `seed`, one per item.
pub fn draw_deltas(m: usize, seed: u64) -> Vec<Rational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let den = Rational::from_integer((m as i64 * EPSILON_STEPS).into());
    (0..m)
        .map(|_| {
            let k: i64 = rng.gen_range(1..EPSILON_STEPS);
            Rational::one() + Rational::from_integer(k.into()) / &den
        })
        .collect()
}

/// Builds the augmented system of a normalized, preprocessed market.
pub fn build_mixed_lcp(inst: &Instance, p: &Rational, r: &Rational, seed: u64) -> Result<LcpSystem, LcpError> {
    let (n, m) = (inst.num_agents(), inst.num_items());
    for j in 0..m {
        if !inst.supply(j).is_one() {
            return Err(LcpError::NotNormalized(j));
        }
    }
    let pre = preprocess(inst);
    if let Some(f) = pre.fixed.first() {
        return Err(LcpError::NotPreprocessed(f.item));
    }
    let kinds: Vec<ItemKind> = classify_items(inst).iter().map(|c| c.kind).collect();
    let raw = draw_deltas(m, seed);
    let delta: Vec<Rational> =
        (0..m).map(|j| if kinds[j] == ItemKind::Good { raw[j].clone() } else { Rational::one() }).collect();

    // Segments that get variables, and forced zero-disutility ones.
    let mut segs: Vec<(usize, usize, usize)> = Vec::new();
    let mut forced = Vec::new();
    for i in 0..n {
        for j in 0..m {
            let f = inst.utility(i, j);
            if kinds[j] == ItemKind::Good && !f[0].slope.is_positive() {
                continue;
            }
            for (k, seg) in f.iter().enumerate() {
                if kinds[j] == ItemKind::Bad && seg.slope.is_zero() {
                    let length = seg.length.clone().expect("unbounded zero segment survived preprocessing");
                    forced.push(ForcedSegment { agent: i, item: j, segment: k, length });
                } else {
                    segs.push((i, j, k));
                }
            }
        }
    }
    let s_count = segs.len();
    let size = n + m + 2 * s_count;
    let r_col = |i: usize| i;
    let p_col = |j: usize| n + j;
    let f_col = |s: usize| n + m + s;
    let s_col = |s: usize| n + m + s_count + s;

    let mut rows: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); size];
    let mut q = vec![Rational::zero(); size];
    let mut c = vec![Rational::zero(); size];
    let mut labels = Vec::with_capacity(size);
    labels.extend((0..n).map(VarLabel::InverseBpb));
    labels.extend((0..m).map(VarLabel::Price));
    labels.extend(segs.iter().map(|&(agent, item, segment)| VarLabel::Spending { agent, item, segment }));
    labels.extend(segs.iter().map(|&(agent, item, segment)| VarLabel::Supplement { agent, item, segment }));

    let sign = |j: usize| if kinds[j] == ItemKind::Good { Rational::one() } else { -Rational::one() };

    // Budget rows.
    for i in 0..n {
        let mut price_coef: Vec<Rational> = (0..m).map(|j| sign(j) * inst.endowment(i, j)).collect();
        let mut rhs: Rational = price_coef.iter().sum::<Rational>() * p;
        for fs in forced.iter().filter(|fs| fs.agent == i) {
            price_coef[fs.item] += &fs.length;
            rhs += &fs.length * p;
        }
        for (j, v) in price_coef.into_iter().enumerate() {
            rows[i].push((p_col(j), v));
        }
        for (s, &(a, j, _)) in segs.iter().enumerate() {
            if a == i {
                rows[i].push((f_col(s), sign(j)));
            }
        }
        q[i] = rhs;
        c[i] = Rational::one();
    }

    // Spending rows.
    for j in 0..m {
        let a = n + j;
        let spent: Vec<usize> = (0..s_count).filter(|&s| segs[s].1 == j).collect();
        match kinds[j] {
            ItemKind::Bad => {
                let held: Rational = forced.iter().filter(|fs| fs.item == j).map(|fs| &fs.length).sum();
                let free = Rational::one() - held;
                rows[a].push((p_col(j), free.clone()));
                rows[a].extend(spent.iter().map(|&s| (f_col(s), Rational::one())));
                q[a] = free * p;
            }
            ItemKind::Good => {
                rows[a].push((p_col(j), -Rational::one()));
                rows[a].extend(spent.iter().map(|&s| (f_col(s), -Rational::one())));
                q[a] = -p.clone();
                c[a] = delta[j].clone();
            }
        }
    }

    // Bang-per-buck and capacity rows.
    for (s, &(i, j, k)) in segs.iter().enumerate() {
        let seg = &inst.utility(i, j)[k];
        let a = n + m + s;
        match kinds[j] {
            ItemKind::Bad => {
                let d = seg.magnitude();
                rows[a].push((r_col(i), d.clone()));
                rows[a].push((p_col(j), -Rational::one()));
                rows[a].push((s_col(s), -Rational::one()));
                q[a] = d * r - p;
            }
            ItemKind::Good => {
                let u = seg.slope.clone();
                rows[a].push((r_col(i), -u.clone()));
                rows[a].push((p_col(j), Rational::one()));
                rows[a].push((s_col(s), -Rational::one()));
                q[a] = p - u * r;
                c[a] = Rational::one();
            }
        }
        let b = n + m + s_count + s;
        let len = seg.length.clone().unwrap_or_else(last_segment_length);
        rows[b].push((f_col(s), Rational::one()));
        rows[b].push((p_col(j), len.clone()));
        q[b] = len * p;
    }

    for row in &mut rows {
        row.retain(|(_, v)| !v.is_zero());
        row.sort_by_key(|e| e.0);
    }
    Ok(LcpSystem {
        rows,
        q,
        c,
        labels,
        constants: Some(Constants { p: p.clone(), r: r.clone(), delta }),
        kinds,
        forced,
    })
}
