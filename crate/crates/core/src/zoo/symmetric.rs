//! Random transposition walk on `S_n` and maps read off a permutation.

use crate::error::{Error, Result};
use crate::markov::{FiniteMarkovModel, SparseRow, StateLabel};
use crate::quotient::FactorMap;
use crate::rational::{rat, Rational};
use crate::zoo::perm;

pub const MAX_SYMMETRIC_N: usize = 8;

/// `K(x, tau x) = 2/(n(n-1))` for every transposition `tau`, acting on
/// values. States are permutations in lexicographic order, `mu` uniform.
pub fn symmetric_group_model(n: usize) -> Result<FiniteMarkovModel> {
    if !(2..=MAX_SYMMETRIC_N).contains(&n) {
        return Err(Error::InvalidParameter(format!("symmetric group needs 2 <= n <= {MAX_SYMMETRIC_N}, got {n}")));
    }
    let perms = perm::permutations(n);
    let w = rat(2, (n * (n - 1)) as i64);
    let rows: Vec<SparseRow> = perms
        .iter()
        .map(|x| {
            let mut row = Vec::with_capacity(n * (n - 1) / 2);
            for a in 1..=n as u8 {
                for b in a + 1..=n as u8 {
                    row.push((perm::rank(&perm::swap_values(x, a, b)), w.clone()));
                }
            }
            row
        })
        .collect();
    let labels = perms.iter().map(|p| StateLabel::Tuple(p.iter().map(|&v| v as i64).collect())).collect();
    let mu = vec![rat(1, perms.len() as i64); perms.len()];
    FiniteMarkovModel::new(labels, rows, Some(mu))
}

/// Tuple labels of a permutation model, checked to be permutations of a
/// common `n`.
pub(crate) fn permutation_labels(model: &FiniteMarkovModel) -> Result<(usize, Vec<&[i64]>)> {
    let mut n = None;
    let mut out = Vec::with_capacity(model.n_states());
    for label in model.labels() {
        let StateLabel::Tuple(t) = label else {
            return Err(Error::InvalidParameter("permutation model expected tuple labels".into()));
        };
        let mut sorted = t.clone();
        sorted.sort_unstable();
        if sorted.iter().enumerate().any(|(i, &v)| v != i as i64 + 1) || *n.get_or_insert(t.len()) != t.len() {
            return Err(Error::InvalidParameter(format!("label {label} is not a permutation")));
        }
        out.push(t.as_slice());
    }
    Ok((n.unwrap_or(0), out))
}

fn check_subset(n: usize, subset: &[usize]) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    if let Some(&i) = subset.iter().find(|&&i| i == 0 || i > n) {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    Ok(())
}

pub(crate) fn subset_name(prefix: &str, subset: &[usize]) -> String {
    let parts: Vec<String> = subset.iter().map(|i| i.to_string()).collect();
    format!("{prefix}:{}", parts.join(","))
}

/// `T_I(x) = x|_I` for a 1-based index set `I`.
pub fn restriction_map(model: &FiniteMarkovModel, subset: &[usize]) -> Result<FactorMap> {
    let (n, perms) = permutation_labels(model)?;
    check_subset(n, subset)?;
    let keys: Vec<Vec<i64>> = perms.iter().map(|x| subset.iter().map(|&i| x[i - 1]).collect()).collect();
    FactorMap::from_keys(model, subset_name("restrict", subset), keys)
}

/// `R_I(x) = x(I)`, the image set, for a 1-based index set `I`.
pub fn image_map(model: &FiniteMarkovModel, subset: &[usize]) -> Result<FactorMap> {
    let (n, perms) = permutation_labels(model)?;
    check_subset(n, subset)?;
    let keys: Vec<Vec<i64>> = perms
        .iter()
        .map(|x| {
            let mut v: Vec<i64> = subset.iter().map(|&i| x[i - 1]).collect();
            v.sort_unstable();
            v
        })
        .collect();
    FactorMap::from_keys(model, subset_name("image", subset), keys)
}

/// The maps `x -> x(i)` for `i = 1..n`.
pub fn coordinate_maps(model: &FiniteMarkovModel) -> Result<Vec<FactorMap>> {
    let (n, _) = permutation_labels(model)?;
    (1..=n).map(|i| restriction_map(model, &[i])).collect()
}

/// `x -> (1{x(i) <= k})_i`, which sends the uniform measure on `S_n` to the
/// uniform measure on the slice of weight `k`.
pub fn slice_indicator_map(model: &FiniteMarkovModel, k: usize) -> Result<FactorMap> {
    let (n, perms) = permutation_labels(model)?;
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds n = {n}")));
    }
    let keys: Vec<Vec<i64>> =
        perms.iter().map(|x| x.iter().map(|&v| i64::from(v <= k as i64)).collect()).collect();
    FactorMap::from_keys(model, format!("slice:{k}"), keys)
}

fn color_intervals(colors: &[usize]) -> Vec<std::ops::Range<usize>> {
    let mut start = 0;
    colors
        .iter()
        .map(|&m| {
            let r = start..start + m;
            start += m;
            r
        })
        .collect()
}

fn check_colors(n: usize, colors: &[usize], draw: usize) -> Result<()> {
    let total: usize = colors.iter().sum();
    if colors.is_empty() || total != n {
        return Err(Error::InvalidParameter(format!("color counts sum to {total}, expected {n}")));
    }
    if draw > n {
        return Err(Error::InvalidParameter(format!("draw size {draw} exceeds {n}")));
    }
    Ok(())
}

fn color_counts(x: &[i64], intervals: &[std::ops::Range<usize>], draw: usize) -> Vec<i64> {
    intervals.iter().map(|r| x[r.clone()].iter().filter(|&&v| v <= draw as i64).count() as i64).collect()
}

/// Positions are split into consecutive color intervals of sizes `colors`;
/// `T(x)_i` counts positions of color `i` holding a value `<= draw`. Under
/// the uniform measure the block masses are multivariate hypergeometric.
pub fn hypergeometric_map(model: &FiniteMarkovModel, colors: &[usize], draw: usize) -> Result<FactorMap> {
    let (n, perms) = permutation_labels(model)?;
    check_colors(n, colors, draw)?;
    let intervals = color_intervals(colors);
    let keys: Vec<Vec<i64>> = perms.iter().map(|x| color_counts(x, &intervals, draw)).collect();
    let sizes: Vec<String> = colors.iter().map(|m| m.to_string()).collect();
    FactorMap::from_keys(model, format!("hypergeo:{}/{draw}", sizes.join(",")), keys)
}

/// One count map per color. An edge changes the counts of either no color or
/// exactly two distinct colors, so the active sets are the pairs `{i, j}`.
pub fn color_count_maps(model: &FiniteMarkovModel, colors: &[usize], draw: usize) -> Result<Vec<FactorMap>> {
    let (n, perms) = permutation_labels(model)?;
    check_colors(n, colors, draw)?;
    let intervals = color_intervals(colors);
    let counts: Vec<Vec<i64>> = perms.iter().map(|x| color_counts(x, &intervals, draw)).collect();
    (0..colors.len())
        .map(|i| {
            let keys: Vec<i64> = counts.iter().map(|c| c[i]).collect();
            FactorMap::from_keys(model, format!("color:{}", i + 1), keys)
        })
        .collect()
}

/// `prod C(m_i, k_i) / C(M, K)`.
pub fn hypergeometric_pmf(colors: &[usize], counts: &[usize]) -> Rational {
    let total: usize = colors.iter().sum();
    let draw: usize = counts.iter().sum();
    let num: u128 = colors.iter().zip(counts).map(|(&m, &k)| crate::bl::binomial(m as u64, k as u64)).product();
    let den = crate::bl::binomial(total as u64, draw as u64);
    Rational::new(num.into(), den.into())
}
