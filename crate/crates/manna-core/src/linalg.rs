//! Exact linear algebra over rationals.
//!
//! `SparseLu` factors a square sparse matrix by peeling off row and column
//! singletons and running dense elimination on whatever core remains. The
//! complementarity systems here are mostly small local blocks around a few
//! coupling rows, so the core stays small.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Zero;

use crate::Rational;

/// A sparse column: `(row, value)` pairs with nonzero values.
pub(crate) type Column<'a> = &'a [(u32, Rational)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Singular;

#[derive(Debug, Clone, Copy)]
enum Step {
    /// A row with one live entry: it determines that column.
    Row(u32),
    /// A column with one live entry: solved last from that row.
    Col(u32),
}

#[derive(Debug, Clone)]
pub(crate) struct SparseLu {
    n: usize,
    /// Row-major copy: `rows[i]` holds `(col, value)`.
    rows: Vec<Vec<(u32, Rational)>>,
    forward: Vec<(u32, u32)>,
    backward: Vec<(u32, u32)>,
    core_rows: Vec<u32>,
    core_cols: Vec<u32>,
    /// Dense LU of the core with row permutation folded into `core_perm`.
    core_lu: Vec<Vec<Rational>>,
    core_perm: Vec<usize>,
}

impl SparseLu {
    /// Factors the matrix whose `k`-th column is `cols[k]`.
    pub(crate) fn new(n: usize, cols: &[Column<'_>]) -> Result<SparseLu, Singular> {
        let mut rows: Vec<Vec<(u32, Rational)>> = vec![Vec::new(); n];
        for (c, col) in cols.iter().enumerate() {
            for (r, v) in col.iter() {
                rows[*r as usize].push((c as u32, v.clone()));
            }
        }
        let mut row_cnt: Vec<usize> = rows.iter().map(Vec::len).collect();
        let mut col_cnt: Vec<usize> = cols.iter().map(|c| c.len()).collect();
        let mut row_on = vec![true; n];
        let mut col_on = vec![true; n];
        let mut queue: Vec<Step> = Vec::new();
        for i in 0..n {
            if row_cnt[i] == 0 || col_cnt[i] == 0 {
                return Err(Singular);
            }
            if row_cnt[i] == 1 {
                queue.push(Step::Row(i as u32));
            }
            if col_cnt[i] == 1 {
                queue.push(Step::Col(i as u32));
            }
        }
        let mut forward = Vec::new();
        let mut backward = Vec::new();
        while let Some(step) = queue.pop() {
            match step {
                Step::Row(row) => {
                    let i = row as usize;
                    if !row_on[i] || row_cnt[i] != 1 {
                        continue;
                    }
                    let j = rows[i].iter().find(|(c, _)| col_on[*c as usize]).ok_or(Singular)?.0 as usize;
                    row_on[i] = false;
                    col_on[j] = false;
                    forward.push((i as u32, j as u32));
                    for (r, _) in cols[j].iter() {
                        let r = *r as usize;
                        if row_on[r] {
                            row_cnt[r] -= 1;
                            match row_cnt[r] {
                                0 => return Err(Singular),
                                1 => queue.push(Step::Row(r as u32)),
                                _ => {}
                            }
                        }
                    }
                }
                Step::Col(col) => {
                    let j = col as usize;
                    if !col_on[j] || col_cnt[j] != 1 {
                        continue;
                    }
                    let i = cols[j].iter().find(|(r, _)| row_on[*r as usize]).ok_or(Singular)?.0 as usize;
                    row_on[i] = false;
                    col_on[j] = false;
                    backward.push((i as u32, j as u32));
                    for (c, _) in rows[i].iter() {
                        let c = *c as usize;
                        if col_on[c] {
                            col_cnt[c] -= 1;
                            match col_cnt[c] {
                                0 => return Err(Singular),
                                1 => queue.push(Step::Col(c as u32)),
                                _ => {}
                            }
                        }
                    }
                }
            }
        }
        let core_rows: Vec<u32> = (0..n as u32).filter(|&i| row_on[i as usize]).collect();
        let core_cols: Vec<u32> = (0..n as u32).filter(|&j| col_on[j as usize]).collect();
        if core_rows.len() != core_cols.len() {
            return Err(Singular);
        }
        let k = core_cols.len();
        let mut pos = vec![usize::MAX; n];
        for (p, &c) in core_cols.iter().enumerate() {
            pos[c as usize] = p;
        }
        let mut dense: Vec<Vec<Rational>> = core_rows
            .iter()
            .map(|&i| {
                let mut row = vec![Rational::zero(); k];
                for (c, v) in &rows[i as usize] {
                    if pos[*c as usize] != usize::MAX {
                        row[pos[*c as usize]] = v.clone();
                    }
                }
                row
            })
            .collect();
        let mut perm: Vec<usize> = (0..k).collect();
        for col in 0..k {
            let piv = (col..k).find(|&r| !dense[r][col].is_zero()).ok_or(Singular)?;
            dense.swap(col, piv);
            perm.swap(col, piv);
            let (top, rest) = dense.split_at_mut(col + 1);
            let prow = &top[col];
            for row in rest.iter_mut() {
                if row[col].is_zero() {
                    continue;
                }
                let f = &row[col] / &prow[col];
                for c in col + 1..k {
                    if !prow[c].is_zero() {
                        let d = &f * &prow[c];
                        row[c] -= d;
                    }
                }
                row[col] = f;
            }
        }
        Ok(SparseLu { n, rows, forward, backward, core_rows, core_cols, core_lu: dense, core_perm: perm })
    }

    /// Solves `M x = b`.
    pub(crate) fn solve(&self, b: &[Rational]) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); self.n];
        let residual = |i: u32, skip: u32, x: &[Rational]| -> Rational {
            let mut s = b[i as usize].clone();
            for (c, v) in &self.rows[i as usize] {
                if *c != skip && !x[*c as usize].is_zero() {
                    s -= v * &x[*c as usize];
                }
            }
            s
        };
        let pivot = |i: u32, j: u32| -> &Rational {
            &self.rows[i as usize].iter().find(|(c, _)| *c == j).expect("pivot entry").1
        };
        for &(i, j) in &self.forward {
            let s = residual(i, j, &x);
            if !s.is_zero() {
                x[j as usize] = s / pivot(i, j);
            }
        }
        let k = self.core_cols.len();
        if k > 0 {
            // Core columns are still zero in `x`, so the residual only
            // subtracts known columns.
            let rhs: Vec<Rational> = self.core_rows.iter().map(|&i| residual(i, u32::MAX, &x)).collect();
            let mut y: Vec<Rational> = self.core_perm.iter().map(|&p| rhs[p].clone()).collect();
            for r in 0..k {
                for c in 0..r {
                    if !self.core_lu[r][c].is_zero() && !y[c].is_zero() {
                        let d = &self.core_lu[r][c] * &y[c];
                        y[r] -= d;
                    }
                }
            }
            for r in (0..k).rev() {
                for c in r + 1..k {
                    if !self.core_lu[r][c].is_zero() && !y[c].is_zero() {
                        let d = &self.core_lu[r][c] * &y[c];
                        y[r] -= d;
                    }
                }
                y[r] = &y[r] / &self.core_lu[r][r];
            }
            for (p, &c) in self.core_cols.iter().enumerate() {
                x[c as usize] = y[p].clone();
            }
        }
        for &(i, j) in self.backward.iter().rev() {
            let s = residual(i, j, &x);
            x[j as usize] = if s.is_zero() { s } else { s / pivot(i, j) };
        }
        x
    }
}

/// Result of dense elimination on `M x = b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Solution {
    Unique(Vec<Rational>),
    /// Consistent with free variables; the returned point sets them to zero.
    Underdetermined(Vec<Rational>),
    Inconsistent,
}

/// Gauss-Jordan elimination on a dense system with `cols` unknowns.
pub(crate) fn solve_dense(mut m: Vec<Vec<Rational>>, mut b: Vec<Rational>, cols: usize) -> Solution {
    let rows = m.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        b.swap(r, p);
        let inv = m[r][c].clone();
        for k in c..cols {
            m[r][k] = &m[r][k] / &inv;
        }
        b[r] = &b[r] / &inv;
        for i in 0..rows {
            if i == r || m[i][c].is_zero() {
                continue;
            }
            let f = m[i][c].clone();
            for k in c..cols {
                if !m[r][k].is_zero() {
                    let d = &f * &m[r][k];
                    m[i][k] -= d;
                }
            }
            let d = &f * &b[r];
            b[i] -= d;
        }
        pivots.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    if b[r..].iter().any(|v| !v.is_zero()) {
        return Solution::Inconsistent;
    }
    let mut x = vec![Rational::zero(); cols];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = b[i].clone();
    }
    if pivots.len() < cols {
        Solution::Underdetermined(x)
    } else {
        Solution::Unique(x)
    }
}
