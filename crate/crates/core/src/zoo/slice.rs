//! Bernoulli-Laplace walk on the slice `{x in {0,1}^n : sum x = k}`.

use crate::bl::binomial;
use crate::error::{Error, Result};
use crate::markov::{FiniteMarkovModel, SparseRow, StateLabel};
use crate::quotient::FactorMap;
use crate::rational::rat;

pub const MAX_SLICE_STATES: u128 = 50_000;

fn slice_states(n: usize, k: usize) -> Vec<Vec<u8>> {
    fn rec(n: usize, k: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        let ones = prefix.iter().filter(|&&b| b == 1).count();
        let left = n - prefix.len();
        if left == 0 {
            out.push(prefix.clone());
            return;
        }
        for bit in [0u8, 1] {
            let ones_after = ones + bit as usize;
            if ones_after <= k && k - ones_after < left {
                prefix.push(bit);
                rec(n, k, prefix, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(n, k, &mut Vec::with_capacity(n), &mut out);
    out
}

/// States are bit strings in lexicographic order. Each state has `k(n-k)`
/// neighbors (swap a one with a zero), each reached with probability
/// `1/(k(n-k))`.
pub fn slice_model(n: usize, k: usize) -> Result<FiniteMarkovModel> {
    if n < 2 || k < 1 || k >= n {
        return Err(Error::InvalidParameter(format!("slice needs 1 <= k <= n-1, got n={n}, k={k}")));
    }
    let size = binomial(n as u64, k as u64);
    if size > MAX_SLICE_STATES {
        return Err(Error::TooLarge { what: "slice", size: size as usize, cap: MAX_SLICE_STATES as usize });
    }
    let states = slice_states(n, k);
    let index: std::collections::HashMap<&[u8], usize> =
        states.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
    let w = rat(1, (k * (n - k)) as i64);
    let rows: Vec<SparseRow> = states
        .iter()
        .map(|x| {
            let mut row = Vec::with_capacity(k * (n - k));
            for i in (0..n).filter(|&i| x[i] == 1) {
                for j in (0..n).filter(|&j| x[j] == 0) {
                    let mut y = x.clone();
                    y.swap(i, j);
                    row.push((index[y.as_slice()], w.clone()));
                }
            }
            row
        })
        .collect();
    let labels = states.iter().map(|s| StateLabel::Tuple(s.iter().map(|&b| b as i64).collect())).collect();
    let mu = vec![rat(1, states.len() as i64); states.len()];
    FiniteMarkovModel::new(labels, rows, Some(mu))
}

fn tuple_labels(model: &FiniteMarkovModel) -> Result<(usize, Vec<&[i64]>)> {
    let mut n = None;
    let mut out = Vec::with_capacity(model.n_states());
    for label in model.labels() {
        match label {
            StateLabel::Tuple(t) if *n.get_or_insert(t.len()) == t.len() => out.push(t.as_slice()),
            _ => return Err(Error::InvalidParameter(format!("label {label} is not a tuple of the common length"))),
        }
    }
    Ok((n.unwrap_or(0), out))
}

/// `x -> (x_j)_{j in S}` for a 1-based coordinate set `S`, on any model with
/// tuple labels of a common length.
pub fn projection_map(model: &FiniteMarkovModel, subset: &[usize], prefix: &str) -> Result<FactorMap> {
    let (n, labels) = tuple_labels(model)?;
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    if let Some(&i) = subset.iter().find(|&&i| i == 0 || i > n) {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    let keys: Vec<Vec<i64>> = labels.iter().map(|x| subset.iter().map(|&i| x[i - 1]).collect()).collect();
    FactorMap::from_keys(model, crate::zoo::symmetric::subset_name(prefix, subset), keys)
}

/// The maps `x -> x_i` for every coordinate.
pub fn coordinate_maps(model: &FiniteMarkovModel) -> Result<Vec<FactorMap>> {
    let (n, _) = tuple_labels(model)?;
    (1..=n).map(|i| projection_map(model, &[i], "coord")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quotient::check_commutation;

    #[test]
    fn small_slices() {
        let m = slice_model(2, 1).unwrap();
        assert_eq!(m.n_states(), 2);
        assert_eq!(m.kernel_entry(0, 1), rat(1, 1));
        let m = slice_model(4, 2).unwrap();
        assert_eq!(m.n_states(), 6);
        assert!(m.kernel_rows().iter().all(|r| r.len() == 4));
        assert!(m.reversible());
    }

    #[test]
    fn coordinates_commute() {
        let m = slice_model(5, 2).unwrap();
        for t in coordinate_maps(&m).unwrap() {
            assert!(check_commutation(&m, &t).unwrap().commutes);
        }
    }

    #[test]
    fn range_errors() {
        assert!(slice_model(4, 0).is_err());
        assert!(slice_model(4, 4).is_err());
        assert!(matches!(slice_model(40, 20), Err(Error::TooLarge { .. })));
    }
}
