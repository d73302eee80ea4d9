//! Dense exact simplex for `max w.x  s.t.  A x <= b, x >= 0` with `b >= 0`.
//!
//! The slack basis is feasible from the start, so no phase one is needed.
//! Pivoting follows Bland's rule (lowest-index entering column, lowest-index
//! leaving basic variable on ratio ties), which rules out cycling.

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpSolution {
    pub x: Vec<Rational>,
    pub objective: Rational,
    pub pivots: usize,
}

pub fn maximize(weights: &[Rational], a: &[Vec<Rational>], b: &[Rational]) -> Result<LpSolution> {
    let n = weights.len();
    let m = a.len();
    if b.len() != m {
        return Err(Error::DimensionMismatch { what: "lp right-hand side", expected: m, found: b.len() });
    }
    if let Some(row) = a.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { what: "lp constraint row", expected: n, found: row.len() });
    }
    if b.iter().any(|v| v.is_negative()) {
        return Err(Error::InvalidParameter("lp right-hand side must be nonnegative".into()));
    }

    let width = n + m + 1;
    let rhs = n + m;
    let mut tableau: Vec<Vec<Rational>> = a
        .iter()
        .zip(b)
        .enumerate()
        .map(|(i, (row, bi))| {
            let mut t = vec![Rational::zero(); width];
            t[..n].clone_from_slice(row);
            t[n + i] = Rational::from_integer(1.into());
            t[rhs] = bi.clone();
            t
        })
        .collect();
    // Objective row holds -w, so optimality means no negative entry.
    let mut obj = vec![Rational::zero(); width];
    for (o, w) in obj.iter_mut().zip(weights) {
        *o = -w.clone();
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut pivots = 0;

    loop {
        let Some(enter) = (0..n + m).find(|&j| obj[j].is_negative()) else {
            break;
        };
        let mut leave: Option<(usize, Rational)> = None;
        for (i, row) in tableau.iter().enumerate() {
            if !row[enter].is_positive() {
                continue;
            }
            let ratio = &row[rhs] / &row[enter];
            let better = match &leave {
                None => true,
                Some((li, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*li]),
            };
            if better {
                leave = Some((i, ratio));
            }
        }
        let Some((r, _)) = leave else {
            return Err(Error::InvalidParameter("linear program is unbounded".into()));
        };

        let inv = tableau[r][enter].recip();
        for v in tableau[r].iter_mut() {
            *v = &*v * &inv;
        }
        let pivot_row = tableau[r].clone();
        for (i, row) in tableau.iter_mut().enumerate() {
            if i == r || row[enter].is_zero() {
                continue;
            }
            let factor = row[enter].clone();
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v -= &factor * p;
                }
            }
        }
        if !obj[enter].is_zero() {
            let factor = obj[enter].clone();
            for (v, p) in obj.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v -= &factor * p;
                }
            }
        }
        basis[r] = enter;
        pivots += 1;
    }

    let mut x = vec![Rational::zero(); n];
    for (i, &var) in basis.iter().enumerate() {
        if var < n {
            x[var] = tableau[i][rhs].clone();
        }
    }
    Ok(LpSolution { x, objective: obj[rhs].clone(), pivots })
}
