//! Lemke's complementary pivot scheme over exact rationals.
//!
//! The tableau is kept as a sparse dictionary: each basic variable is an
//! affine function of the nonbasic ones. Variable ids: `y_k` is `k`, the
//! slack `v_k` is `n + k`, and `z` is `2n`.
//!
//! Ties in the ratio test are broken lexicographically against the rows of
//! the basis inverse, which is equivalent to perturbing `q` by
//! `(eps, eps^2, ...)`. Along a market path the run also asserts that every
//! shifted price stays below `P` and every `r_i` below `R`.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::lcp::{LcpSystem, VarLabel};
use crate::linalg::{Column, SparseLu};
use crate::Rational;

/// A variable of the augmented system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Y(usize),
    V(usize),
    Z,
}

impl Var {
    fn id(self, n: usize) -> usize {
        match self {
            Var::Y(k) => k,
            Var::V(k) => n + k,
            Var::Z => 2 * n,
        }
    }

    fn from_id(id: usize, n: usize) -> Var {
        match id {
            k if k < n => Var::Y(k),
            k if k < 2 * n => Var::V(k - n),
            _ => Var::Z,
        }
    }

    /// The complementary partner, `None` for `z`.
    pub fn complement(self) -> Option<Var> {
        match self {
            Var::Y(k) => Some(Var::V(k)),
            Var::V(k) => Some(Var::Y(k)),
            Var::Z => None,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Y(k) => write!(f, "y{k}"),
            Var::V(k) => write!(f, "v{k}"),
            Var::Z => f.write_str("z"),
        }
    }
}

/// A point of the system: values of `y` and `z`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub y: Vec<Rational>,
    pub z: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TerminationStatus {
    /// A vertex with `z = 0`.
    Solution(Vertex),
    /// The entering variable is unbounded from this vertex.
    SecondaryRay { vertex: Vertex, entering: Var },
    IterationLimit(usize),
    DegeneracyDetected(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub iteration: usize,
    pub entering: Var,
    pub leaving: Var,
    pub z: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunResult {
    pub status: TerminationStatus,
    pub iterations: usize,
    pub trace: Vec<TraceStep>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Pivot budget; defaults to 50 times the number of rows.
    pub max_iters: Option<usize>,
    pub trace: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LemkeError {
    #[error("row {0} has a negative right-hand side that z does not cover")]
    Uncovered(usize),
    #[error("{0}")]
    BoundViolated(Box<BoundViolation>),
    #[error("{0}")]
    Degenerate(String),
    #[error("no pivot pending")]
    Finished,
}

/// A price or rate that reached its bound along the path.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{label:?} reached {value}, not below its bound {bound}, at pivot {iteration}")]
pub struct BoundViolation {
    pub iteration: usize,
    pub label: VarLabel,
    pub value: Rational,
    pub bound: Rational,
}

/// Event produced by one [`Tableau::step`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Vertex { entering: Var, leaving: Var },
    /// `z` left the basis: the current vertex solves the LCP.
    Solved { entering: Var },
    Ray { entering: Var },
}

/// Lemke's working state: the basis and the values of its variables. Each
/// pivot solves the basis system afresh instead of carrying the full
/// dictionary, which would fill in.
#[derive(Clone, Debug)]
pub struct Tableau {
    n: usize,
    /// Column of each variable in `A y + v - c z = q`.
    columns: Vec<Vec<(u32, Rational)>>,
    /// Variable id held by each basis slot.
    basis: Vec<u32>,
    slot_of: Vec<Option<u32>>,
    values: Vec<Rational>,
    entering: Option<Var>,
    pivots: usize,
}

impl Tableau {
    fn slack_basis(lcp: &LcpSystem) -> Result<Tableau, LemkeError> {
        let n = lcp.len();
        for a in 0..n {
            if lcp.q[a].is_negative() && !lcp.c[a].is_positive() {
                return Err(LemkeError::Uncovered(a));
            }
        }
        let mut columns: Vec<Vec<(u32, Rational)>> = vec![Vec::new(); 2 * n + 1];
        for (a, row) in lcp.rows.iter().enumerate() {
            for (k, v) in row {
                columns[*k].push((a as u32, v.clone()));
            }
        }
        for a in 0..n {
            columns[n + a].push((a as u32, Rational::one()));
            if !lcp.c[a].is_zero() {
                columns[2 * n].push((a as u32, -&lcp.c[a]));
            }
        }
        let mut slot_of = vec![None; 2 * n + 1];
        for a in 0..n {
            slot_of[n + a] = Some(a as u32);
        }
        Ok(Tableau {
            n,
            columns,
            basis: (n..2 * n).map(|v| v as u32).collect(),
            slot_of,
            values: lcp.q.clone(),
            entering: None,
            pivots: 0,
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn pivots(&self) -> usize {
        self.pivots
    }

    /// Variable that enters at the next step.
    pub fn entering(&self) -> Option<Var> {
        self.entering
    }

    pub fn value(&self, var: Var) -> Rational {
        match self.slot_of[var.id(self.n)] {
            Some(r) => self.values[r as usize].clone(),
            None => Rational::zero(),
        }
    }

    pub fn is_basic(&self, var: Var) -> bool {
        self.slot_of[var.id(self.n)].is_some()
    }

    pub fn basis(&self) -> Vec<Var> {
        let mut b: Vec<Var> = self.basis.iter().map(|&v| Var::from_id(v as usize, self.n)).collect();
        b.sort();
        b
    }

    pub fn vertex(&self) -> Vertex {
        Vertex { y: (0..self.n).map(|k| self.value(Var::Y(k))).collect(), z: self.value(Var::Z) }
    }

    fn basis_key(&self) -> Vec<u64> {
        let mut key = vec![0u64; (2 * self.n + 1).div_ceil(64)];
        for &v in &self.basis {
            key[v as usize / 64] |= 1 << (v % 64);
        }
        key
    }

    fn factor(&self) -> Result<SparseLu, LemkeError> {
        let cols: Vec<Column<'_>> = self.basis.iter().map(|&v| self.columns[v as usize].as_slice()).collect();
        SparseLu::new(self.n, &cols).map_err(|_| LemkeError::Degenerate("basis matrix is singular".to_string()))
    }

    /// Rows `slots` of the basis inverse.
    fn inverse_rows(&self, slots: &[usize]) -> Result<Vec<Vec<Rational>>, LemkeError> {
        let mut rows: Vec<Vec<(u32, Rational)>> = vec![Vec::new(); self.n];
        for (slot, &v) in self.basis.iter().enumerate() {
            for (a, x) in &self.columns[v as usize] {
                rows[*a as usize].push((slot as u32, x.clone()));
            }
        }
        let cols: Vec<Column<'_>> = rows.iter().map(Vec::as_slice).collect();
        let lu = SparseLu::new(self.n, &cols)
            .map_err(|_| LemkeError::Degenerate("basis matrix is singular".to_string()))?;
        Ok(slots
            .iter()
            .map(|&k| {
                let mut e = vec![Rational::zero(); self.n];
                e[k] = Rational::one();
                lu.solve(&e)
            })
            .collect())
    }

    /// Among tied slots, keeps the lexicographically smallest
    /// `B^-1 row / d`.
    fn lex_choose(&self, cands: Vec<(usize, Rational)>) -> Result<usize, LemkeError> {
        if let [(k, _)] = cands.as_slice() {
            return Ok(*k);
        }
        let slots: Vec<usize> = cands.iter().map(|c| c.0).collect();
        let inv = self.inverse_rows(&slots)?;
        let mut live: Vec<usize> = (0..cands.len()).collect();
        for col in 0..self.n {
            if live.len() == 1 {
                break;
            }
            let vals: Vec<Rational> = live.iter().map(|&i| &inv[i][col] / &cands[i].1).collect();
            let best = vals.iter().min().cloned().unwrap();
            live = live.into_iter().zip(vals).filter(|(_, v)| *v == best).map(|(i, _)| i).collect();
        }
        match live.as_slice() {
            [i] => Ok(cands[*i].0),
            _ => Err(LemkeError::Degenerate("lexicographic ratio test tied".to_string())),
        }
    }

    /// Brings `entering` into slot `r` along direction `d = B^-1 column`.
    fn pivot(&mut self, r: usize, entering: u32, d: &[Rational]) {
        let t = &self.values[r] / &d[r];
        for (v, dk) in self.values.iter_mut().zip(d) {
            if !dk.is_zero() {
                *v -= &t * dk;
            }
        }
        self.values[r] = t;
        let leaving = self.basis[r];
        self.basis[r] = entering;
        self.slot_of[leaving as usize] = None;
        self.slot_of[entering as usize] = Some(r as u32);
        self.pivots += 1;
    }

    /// Performs the pending complementary pivot.
    pub fn step(&mut self) -> Result<Event, LemkeError> {
        let entering = self.entering.ok_or(LemkeError::Finished)?;
        let e = entering.id(self.n) as u32;
        let z_id = (2 * self.n) as u32;
        let mut col = vec![Rational::zero(); self.n];
        for (a, v) in &self.columns[e as usize] {
            col[*a as usize] = v.clone();
        }
        let d = self.factor()?.solve(&col);
        let mut best: Option<Rational> = None;
        let mut cands: Vec<(usize, Rational)> = Vec::new();
        for (k, dk) in d.iter().enumerate() {
            if !dk.is_positive() {
                continue;
            }
            let t = &self.values[k] / dk;
            match best.as_ref().map(|b| t.cmp(b)) {
                Some(Ordering::Greater) => {}
                Some(Ordering::Equal) => cands.push((k, dk.clone())),
                _ => {
                    best = Some(t);
                    cands.clear();
                    cands.push((k, dk.clone()));
                }
            }
        }
        if cands.is_empty() {
            self.entering = None;
            return Ok(Event::Ray { entering });
        }
        let r = match cands.iter().find(|(k, _)| self.basis[*k] == z_id) {
            Some((k, _)) => *k,
            None => self.lex_choose(cands)?,
        };
        let leaving = Var::from_id(self.basis[r] as usize, self.n);
        self.pivot(r, e, &d);
        if leaving == Var::Z {
            self.entering = None;
            return Ok(Event::Solved { entering });
        }
        self.entering = leaving.complement();
        Ok(Event::Vertex { entering, leaving })
    }
}

/// Rows achieving `max(-q_a / c_a)`, the candidates to leave when `z` first
/// enters.
fn initial_candidates(lcp: &LcpSystem) -> (Rational, Vec<usize>) {
    let mut best = Rational::zero();
    let mut rows = Vec::new();
    for a in 0..lcp.len() {
        if !lcp.c[a].is_positive() || !lcp.q[a].is_negative() {
            continue;
        }
        let t = -&lcp.q[a] / &lcp.c[a];
        match t.cmp(&best) {
            Ordering::Greater => {
                best = t;
                rows = vec![a];
            }
            Ordering::Equal => rows.push(a),
            Ordering::Less => {}
        }
    }
    (best, rows)
}

/// Moves onto the primary ray: `y = 0` and the smallest feasible `z`. Fails
/// with a degeneracy report when several rows tie for the initial double
/// label. Returns a finished tableau when `q >= 0`.
pub fn init_primary_ray(lcp: &LcpSystem) -> Result<Tableau, LemkeError> {
    let (_, rows) = initial_candidates(lcp);
    if rows.len() > 1 {
        return Err(LemkeError::Degenerate(alloc::format!("initial double label tied between rows {rows:?}")));
    }
    start(lcp, rows.first().copied())
}

/// Like [`init_primary_ray`] but resolves ties lexicographically.
fn init_lexicographic(lcp: &LcpSystem) -> Result<Tableau, LemkeError> {
    // With B = I the lexicographic rule prefers the largest tied index.
    let (_, rows) = initial_candidates(lcp);
    start(lcp, rows.last().copied())
}

fn start(lcp: &LcpSystem, row: Option<usize>) -> Result<Tableau, LemkeError> {
    let mut t = Tableau::slack_basis(lcp)?;
    if let Some(r) = row {
        let d: Vec<Rational> = lcp.c.iter().map(|c| -c).collect();
        t.pivot(r, (2 * t.n) as u32, &d);
        t.entering = Some(Var::Y(r));
    }
    Ok(t)
}

fn check_bounds(lcp: &LcpSystem, t: &Tableau) -> Result<(), LemkeError> {
    if lcp.constants.is_none() {
        return Ok(());
    }
    for (r, &var) in t.basis.iter().enumerate() {
        let var = var as usize;
        if var >= t.n {
            continue;
        }
        if let Some(bound) = lcp.strict_bound(var) {
            let value = &t.values[r];
            if value >= bound {
                return Err(LemkeError::BoundViolated(Box::new(BoundViolation {
                    iteration: t.pivots,
                    label: lcp.labels[var],
                    value: value.clone(),
                    bound: bound.clone(),
                })));
            }
        }
    }
    Ok(())
}

/// Runs the scheme from the primary ray until `z` leaves the basis, a ray
/// is found, or the pivot budget runs out.
pub fn run(lcp: &LcpSystem, opts: &RunOptions) -> Result<RunResult, LemkeError> {
    let max_iters = opts.max_iters.unwrap_or(50 * lcp.len());
    let mut t = init_lexicographic(lcp)?;
    let mut trace = Vec::new();
    let mut seen = BTreeSet::new();
    if t.entering.is_none() {
        let status = TerminationStatus::Solution(t.vertex());
        return Ok(RunResult { status, iterations: 0, trace });
    }
    if opts.trace {
        trace.push(TraceStep { iteration: 1, entering: Var::Z, leaving: Var::V(t.basis_row_of_z()), z: t.value(Var::Z) });
    }
    seen.insert(t.basis_key());
    check_bounds(lcp, &t)?;
    loop {
        if t.pivots >= max_iters {
            return Ok(RunResult { status: TerminationStatus::IterationLimit(t.pivots), iterations: t.pivots, trace });
        }
        let event = match t.step() {
            Ok(ev) => ev,
            Err(LemkeError::Degenerate(w)) => {
                let status = TerminationStatus::DegeneracyDetected(w);
                return Ok(RunResult { status, iterations: t.pivots, trace });
            }
            Err(e) => return Err(e),
        };
        let (entering, leaving) = match event {
            Event::Ray { entering } => {
                let status = TerminationStatus::SecondaryRay { vertex: t.vertex(), entering };
                return Ok(RunResult { status, iterations: t.pivots, trace });
            }
            Event::Solved { entering } => (entering, Var::Z),
            Event::Vertex { entering, leaving } => (entering, leaving),
        };
        if opts.trace {
            trace.push(TraceStep { iteration: t.pivots, entering, leaving, z: t.value(Var::Z) });
        }
        check_bounds(lcp, &t)?;
        if leaving == Var::Z {
            return Ok(RunResult { status: TerminationStatus::Solution(t.vertex()), iterations: t.pivots, trace });
        }
        if !seen.insert(t.basis_key()) {
            let status = TerminationStatus::DegeneracyDetected(alloc::format!("basis revisited at pivot {}", t.pivots));
            return Ok(RunResult { status, iterations: t.pivots, trace });
        }
    }
}

impl Tableau {
    fn basis_row_of_z(&self) -> usize {
        self.slot_of[2 * self.n].map_or(0, |r| r as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio;

    fn sys(a: &[&[i64]], q: &[i64], c: &[i64]) -> LcpSystem {
        let a: Vec<Vec<Rational>> = a.iter().map(|r| r.iter().map(|&v| ratio(v, 1)).collect()).collect();
        LcpSystem::from_dense(&a, q.iter().map(|&v| ratio(v, 1)).collect(), c.iter().map(|&v| ratio(v, 1)).collect())
            .unwrap()
    }

    fn solution(res: &RunResult) -> &Vertex {
        match &res.status {
            TerminationStatus::Solution(v) => v,
            other => panic!("expected a solution, got {other:?}"),
        }
    }

    #[test]
    fn one_by_one_primary_ray() {
        // -y <= -1 + z: the ray starts at z = 1 with y = 0.
        let lcp = sys(&[&[-1]], &[-1], &[1]);
        let t = init_primary_ray(&lcp).unwrap();
        assert_eq!(t.value(Var::Z), ratio(1, 1));
        assert_eq!(t.value(Var::Y(0)), ratio(0, 1));
        assert_eq!(t.entering(), Some(Var::Y(0)));
    }

    #[test]
    fn one_by_one_solves_in_one_step() {
        let lcp = sys(&[&[-1]], &[-1], &[1]);
        let mut t = init_primary_ray(&lcp).unwrap();
        assert_eq!(t.step().unwrap(), Event::Solved { entering: Var::Y(0) });
        assert_eq!(t.vertex(), Vertex { y: vec![ratio(1, 1)], z: ratio(0, 1) });
    }

    #[test]
    fn infeasible_system_ends_on_a_ray() {
        let lcp = sys(&[&[1]], &[-1], &[1]);
        let res = run(&lcp, &RunOptions::default()).unwrap();
        assert!(matches!(res.status, TerminationStatus::SecondaryRay { entering: Var::Y(0), .. }));
    }

    #[test]
    fn nonnegative_q_needs_no_pivots() {
        let lcp = sys(&[&[1, 0], &[0, 1]], &[2, 3], &[1, 1]);
        let res = run(&lcp, &RunOptions::default()).unwrap();
        assert_eq!(res.iterations, 0);
        assert_eq!(solution(&res).y, [ratio(0, 1), ratio(0, 1)]);
    }

    #[test]
    fn tied_start_is_reported_in_strict_mode() {
        let lcp = sys(&[&[-1, 0], &[0, -1]], &[-1, -1], &[1, 1]);
        assert!(matches!(init_primary_ray(&lcp), Err(LemkeError::Degenerate(_))));
        let res = run(&lcp, &RunOptions::default()).unwrap();
        assert_eq!(solution(&res).y, [ratio(1, 1), ratio(1, 1)]);
    }

    #[test]
    fn positive_definite_system() {
        // M = [[2,1],[1,3]], q = (-1,-1) in the form M w + q >= 0 is
        // A = -M, q' = -q: the solution is (2/5, 1/5).
        let lcp = sys(&[&[-2, -1], &[-1, -3]], &[-1, -1], &[1, 1]);
        let res = run(&lcp, &RunOptions { trace: true, ..Default::default() }).unwrap();
        assert_eq!(solution(&res).y, [ratio(2, 5), ratio(1, 5)]);
        assert_eq!(res.trace.last().unwrap().leaving, Var::Z);
    }

    #[test]
    fn iteration_limit() {
        let lcp = sys(&[&[-2, -1], &[-1, -3]], &[-1, -1], &[1, 1]);
        let res = run(&lcp, &RunOptions { max_iters: Some(1), trace: false }).unwrap();
        assert_eq!(res.status, TerminationStatus::IterationLimit(1));
    }
}
