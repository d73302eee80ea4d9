//! Product kernels: pick a coordinate uniformly and resample it.

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::markov::{FiniteMarkovModel, SparseRow, StateLabel};
use crate::rational::{self, Rational};

pub const MAX_PRODUCT_STATES: usize = 50_000;

/// States are tuples in lexicographic order. From `x`, a coordinate `j` is
/// chosen with probability `1/d` and replaced by a draw from `measures[j]`.
/// The invariant measure is the product measure.
pub fn product_model(measures: &[Vec<Rational>]) -> Result<FiniteMarkovModel> {
    if measures.is_empty() {
        return Err(Error::InvalidParameter("product needs at least one component".into()));
    }
    for (j, nu) in measures.iter().enumerate() {
        if nu.is_empty() || rational::sum(nu) != rational::one() {
            return Err(Error::InvalidMeasure(format!("component {} is not a probability", j + 1)));
        }
        if nu.iter().any(|p| p.is_zero() || p.is_negative()) {
            return Err(Error::InvalidMeasure(format!("component {} has a nonpositive atom", j + 1)));
        }
    }
    let sizes: Vec<usize> = measures.iter().map(Vec::len).collect();
    let total = sizes.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s).filter(|&v| v <= MAX_PRODUCT_STATES));
    let Some(total) = total else {
        return Err(Error::TooLarge { what: "product", size: usize::MAX, cap: MAX_PRODUCT_STATES });
    };
    let d = sizes.len();
    // Mixed-radix strides, last coordinate fastest.
    let mut strides = vec![1usize; d];
    for j in (0..d.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * sizes[j + 1];
    }
    let digits = |x: usize| -> Vec<usize> { (0..d).map(|j| x / strides[j] % sizes[j]).collect() };
    let share = rational::rat(1, d as i64);

    let mut labels = Vec::with_capacity(total);
    let mut rows: Vec<SparseRow> = Vec::with_capacity(total);
    let mut mu = Vec::with_capacity(total);
    for x in 0..total {
        let dx = digits(x);
        labels.push(StateLabel::Tuple(dx.iter().map(|&v| v as i64).collect()));
        mu.push(dx.iter().zip(measures).fold(rational::one(), |acc, (&v, nu)| acc * &nu[v]));
        let mut row = Vec::with_capacity(sizes.iter().sum());
        for j in 0..d {
            let base = x - dx[j] * strides[j];
            for (v, p) in measures[j].iter().enumerate() {
                row.push((base + v * strides[j], &share * p));
            }
        }
        rows.push(row);
    }
    FiniteMarkovModel::new(labels, rows, Some(mu))
}

/// Uniform probability on `size` points.
pub fn uniform(size: usize) -> Vec<Rational> {
    vec![rational::rat(1, size as i64); size]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn two_by_three() {
        let m = product_model(&[uniform(2), vec![rat(1, 2), rat(1, 3), rat(1, 6)]]).unwrap();
        assert_eq!(m.n_states(), 6);
        assert_eq!(m.mu()[1], rat(1, 6));
        // From (0,0): stay with prob 1/2*1/2 + 1/2*1/2.
        assert_eq!(m.kernel_entry(0, 0), rat(1, 2));
        assert_eq!(m.kernel_entry(0, 3), rat(1, 4));
        assert_eq!(m.kernel_entry(0, 2), rat(1, 12));
        assert_eq!(m.kernel_entry(0, 4), rat(0, 1));
        assert!(m.reversible());
    }

    #[test]
    fn zero_atom_rejected() {
        assert!(product_model(&[vec![rat(1, 1), rat(0, 1)]]).is_err());
        assert!(product_model(&[vec![rat(1, 2)]]).is_err());
        assert!(product_model(&[]).is_err());
    }
}
