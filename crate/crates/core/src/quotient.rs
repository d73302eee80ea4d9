//! Factor maps, lumpability and quotient kernels.
//!
//! A factor map `T: E -> E_i` is stored as a partition of the state indices.
//! It commutes with the kernel exactly when every state of a block sends the
//! same total mass into each block, which is also what makes the quotient
//! kernel well defined.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{FiniteMarkovModel, SparseRow, StateLabel};
use crate::rational::{self, Rational};

#[derive(Clone, Debug)]
pub struct FactorMap {
    name: String,
    labeling: Vec<usize>,
    n_blocks: usize,
    block_measure: Vec<Rational>,
    block_measure_f64: Vec<f64>,
    block_labels: Vec<StateLabel>,
}

impl FactorMap {
    /// Builds a map from explicit block indices, which must cover `0..m` for
    /// some `m`.
    pub fn new(model: &FiniteMarkovModel, name: impl Into<String>, labeling: Vec<usize>) -> Result<Self> {
        let name = name.into();
        let n_blocks = labeling.iter().max().map_or(0, |m| m + 1);
        let block_labels = (0..n_blocks as i64).map(|b| StateLabel::Tuple(vec![b])).collect();
        Self::with_labels(model, name, labeling, block_labels)
    }

    /// Builds a map from arbitrary per-state keys; blocks are numbered in the
    /// sorted order of the distinct keys.
    pub fn from_keys<K: Ord + Clone + Into<StateLabel>>(
        model: &FiniteMarkovModel,
        name: impl Into<String>,
        keys: Vec<K>,
    ) -> Result<Self> {
        let mut index: BTreeMap<K, usize> = keys.iter().cloned().map(|k| (k, 0)).collect();
        for (i, v) in index.values_mut().enumerate() {
            *v = i;
        }
        let labeling = keys.iter().map(|k| index[k]).collect();
        let block_labels = index.into_keys().map(Into::into).collect();
        Self::with_labels(model, name.into(), labeling, block_labels)
    }

    fn with_labels(
        model: &FiniteMarkovModel,
        name: String,
        labeling: Vec<usize>,
        block_labels: Vec<StateLabel>,
    ) -> Result<Self> {
        let n = model.n_states();
        if labeling.len() != n {
            return Err(Error::DimensionMismatch { what: "map labeling", expected: n, found: labeling.len() });
        }
        let n_blocks = block_labels.len();
        let mut block_measure = vec![Rational::zero(); n_blocks];
        let mut hit = vec![false; n_blocks];
        for (x, &b) in labeling.iter().enumerate() {
            if b >= n_blocks {
                return Err(Error::InvalidMap { name, reason: format!("block index {b} out of range") });
            }
            hit[b] = true;
            block_measure[b] += &model.mu()[x];
        }
        if let Some(b) = hit.iter().position(|h| !h) {
            return Err(Error::InvalidMap { name, reason: format!("labeling is not surjective (block {b} is empty)") });
        }
        if let Some(block) = block_measure.iter().position(|m| m.is_zero()) {
            return Err(Error::ZeroMassBlock { name, block });
        }
        let block_measure_f64 = block_measure.iter().map(rational::to_f64).collect();
        Ok(FactorMap { name, labeling, n_blocks, block_measure, block_measure_f64, block_labels })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labeling(&self) -> &[usize] {
        &self.labeling
    }

    pub fn block_of(&self, x: usize) -> usize {
        self.labeling[x]
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn n_states(&self) -> usize {
        self.labeling.len()
    }

    /// Pushforward of `mu`.
    pub fn block_measure(&self) -> &[Rational] {
        &self.block_measure
    }

    pub fn block_measure_f64(&self) -> &[f64] {
        &self.block_measure_f64
    }

    pub fn block_labels(&self) -> &[StateLabel] {
        &self.block_labels
    }

    /// `g o T` for a function `g` on the blocks.
    pub fn lift(&self, block_values: &[f64]) -> Result<Vec<f64>> {
        if block_values.len() != self.n_blocks {
            return Err(Error::DimensionMismatch {
                what: "block function",
                expected: self.n_blocks,
                found: block_values.len(),
            });
        }
        Ok(self.labeling.iter().map(|&b| block_values[b]).collect())
    }

    /// Reads a block-measurable state function back as a block function;
    /// `None` if it is not constant on some block.
    pub fn restrict(&self, f: &[f64]) -> Option<Vec<f64>> {
        if f.len() != self.labeling.len() {
            return None;
        }
        let mut out: Vec<Option<f64>> = vec![None; self.n_blocks];
        for (x, &b) in self.labeling.iter().enumerate() {
            match out[b] {
                None => out[b] = Some(f[x]),
                Some(v) if v == f[x] => {}
                Some(_) => return None,
            }
        }
        out.into_iter().collect()
    }

    fn check_model(&self, model: &FiniteMarkovModel) -> Result<()> {
        if self.labeling.len() != model.n_states() {
            return Err(Error::DimensionMismatch {
                what: "map domain",
                expected: model.n_states(),
                found: self.labeling.len(),
            });
        }
        Ok(())
    }
}

/// A block-sum mismatch: `x` and `y` lie in the same block but send different
/// mass into `block`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommutationWitness {
    pub x: usize,
    pub y: usize,
    pub block: usize,
    #[serde(with = "rational::serde_rational")]
    pub mass_x: Rational,
    #[serde(with = "rational::serde_rational")]
    pub mass_y: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommutationReport {
    pub map: String,
    pub commutes: bool,
    pub witness: Option<CommutationWitness>,
}

fn block_sums(row: &SparseRow, map: &FactorMap) -> BTreeMap<usize, Rational> {
    let mut sums: BTreeMap<usize, Rational> = BTreeMap::new();
    for (z, k) in row {
        *sums.entry(map.labeling[*z]).or_insert_with(Rational::zero) += k;
    }
    sums
}

/// Exact lumpability test.
pub fn check_commutation(model: &FiniteMarkovModel, map: &FactorMap) -> Result<CommutationReport> {
    map.check_model(model)?;
    let mut representative: Vec<Option<(usize, BTreeMap<usize, Rational>)>> = vec![None; map.n_blocks];
    for (x, row) in model.kernel_rows().iter().enumerate() {
        let sums = block_sums(row, map);
        let b = map.labeling[x];
        match &representative[b] {
            None => representative[b] = Some((x, sums)),
            Some((rep, rep_sums)) => {
                if *rep_sums != sums {
                    let block = rep_sums
                        .keys()
                        .chain(sums.keys())
                        .copied()
                        .find(|blk| rep_sums.get(blk) != sums.get(blk))
                        .expect("differing maps have a differing key");
                    let zero = Rational::zero();
                    return Ok(CommutationReport {
                        map: map.name.clone(),
                        commutes: false,
                        witness: Some(CommutationWitness {
                            x: *rep,
                            y: x,
                            block,
                            mass_x: rep_sums.get(&block).unwrap_or(&zero).clone(),
                            mass_y: sums.get(&block).unwrap_or(&zero).clone(),
                        }),
                    });
                }
            }
        }
    }
    Ok(CommutationReport { map: map.name.clone(), commutes: true, witness: None })
}

/// Fails with [`Error::NotCommuting`] unless the map is lumpable.
pub fn require_commutation(model: &FiniteMarkovModel, map: &FactorMap) -> Result<()> {
    let report = check_commutation(model, map)?;
    match report.witness {
        None => Ok(()),
        Some(w) => Err(Error::NotCommuting { name: map.name.clone(), x: w.x, y: w.y, block: w.block }),
    }
}

/// The lumped chain on the blocks of `map`, with the pushforward of `mu` as
/// its invariant measure.
pub fn quotient_model(model: &FiniteMarkovModel, map: &FactorMap) -> Result<FiniteMarkovModel> {
    require_commutation(model, map)?;
    let mut rows: Vec<Option<SparseRow>> = vec![None; map.n_blocks];
    for (x, row) in model.kernel_rows().iter().enumerate() {
        let b = map.labeling[x];
        if rows[b].is_none() {
            rows[b] = Some(block_sums(row, map).into_iter().collect());
        }
    }
    let rows = rows.into_iter().map(|r| r.expect("surjective labeling")).collect();
    FiniteMarkovModel::new(map.block_labels.clone(), rows, Some(map.block_measure.clone()))
}

/// `E_mu[f | T]` as a state function: block averages of `f` under `mu`.
pub fn conditional_expectation(model: &FiniteMarkovModel, map: &FactorMap, f: &[f64]) -> Result<Vec<f64>> {
    map.check_model(model)?;
    model.check_len(f, "state function")?;
    let mut sums = vec![0.0; map.n_blocks];
    for (x, &b) in map.labeling.iter().enumerate() {
        sums[b] += model.mu_f64()[x] * f[x];
    }
    for (s, m) in sums.iter_mut().zip(&map.block_measure_f64) {
        *s /= m;
    }
    Ok(map.labeling.iter().map(|&b| sums[b]).collect())
}

/// Tolerance on `sum mu f = 1` when validating floating-point densities.
pub const DENSITY_TOL: f64 = 1e-12;

pub(crate) fn validate_density(model: &FiniteMarkovModel, f: &[f64]) -> Result<()> {
    model.check_len(f, "density")?;
    if let Some(i) = f.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::NotDensity(format!("entry {i} = {} is negative or non-finite", f[i])));
    }
    let mass = model.expectation(f)?;
    if (mass - 1.0).abs() > DENSITY_TOL * f.len().max(1) as f64 {
        return Err(Error::NotDensity(format!("mu-mass is {mass}, not 1")));
    }
    Ok(())
}

/// Conditional density `f_i` of a probability density `f` given the map.
pub fn conditional_density(model: &FiniteMarkovModel, map: &FactorMap, f: &[f64]) -> Result<Vec<f64>> {
    validate_density(model, f)?;
    conditional_expectation(model, map, f)
}

/// Exact conditional density for a rational density.
pub fn conditional_density_exact(model: &FiniteMarkovModel, map: &FactorMap, f: &[Rational]) -> Result<Vec<Rational>> {
    map.check_model(model)?;
    let n = model.n_states();
    if f.len() != n {
        return Err(Error::DimensionMismatch { what: "density", expected: n, found: f.len() });
    }
    if f.iter().any(|v| v < &Rational::zero()) {
        return Err(Error::NotDensity("negative entry".into()));
    }
    let mass = model.mu().iter().zip(f).fold(Rational::zero(), |acc, (m, v)| acc + m * v);
    if mass != rational::one() {
        return Err(Error::NotDensity(format!("mu-mass is {mass}, not 1")));
    }
    let mut sums = vec![Rational::zero(); map.n_blocks];
    for (x, &b) in map.labeling.iter().enumerate() {
        sums[b] += &model.mu()[x] * &f[x];
    }
    for (s, m) in sums.iter_mut().zip(&map.block_measure) {
        *s = &*s / m;
    }
    Ok(map.labeling.iter().map(|&b| sums[b].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn four_cycle() -> FiniteMarkovModel {
        // Simple random walk on the 4-cycle 0-1-2-3-0.
        let h = rat(1, 2);
        let z = int(0);
        FiniteMarkovModel::from_dense(
            FiniteMarkovModel::indexed_labels(4),
            vec![
                vec![z.clone(), h.clone(), z.clone(), h.clone()],
                vec![h.clone(), z.clone(), h.clone(), z.clone()],
                vec![z.clone(), h.clone(), z.clone(), h.clone()],
                vec![h.clone(), z.clone(), h.clone(), z.clone()],
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn parity_map_commutes_and_lumps_to_flip() {
        let m = four_cycle();
        let parity = FactorMap::new(&m, "parity", vec![0, 1, 0, 1]).unwrap();
        assert!(check_commutation(&m, &parity).unwrap().commutes);
        let q = quotient_model(&m, &parity).unwrap();
        assert_eq!(q.kernel_entry(0, 1), int(1));
        assert_eq!(q.mu(), &[rat(1, 2), rat(1, 2)]);
    }

    #[test]
    fn non_lumpable_map_has_witness() {
        let m = four_cycle();
        let t = FactorMap::new(&m, "t", vec![0, 0, 1, 2]).unwrap();
        let report = check_commutation(&m, &t).unwrap();
        assert!(!report.commutes);
        let w = report.witness.unwrap();
        assert_eq!(t.block_of(w.x), t.block_of(w.y));
        assert_ne!(w.mass_x, w.mass_y);
        assert!(matches!(quotient_model(&m, &t), Err(Error::NotCommuting { .. })));
    }

    #[test]
    fn constant_and_identity_maps() {
        let m = four_cycle();
        let constant = FactorMap::new(&m, "const", vec![0; 4]).unwrap();
        let q = quotient_model(&m, &constant).unwrap();
        assert_eq!(q.n_states(), 1);
        assert_eq!(q.kernel_entry(0, 0), int(1));
        let id = FactorMap::new(&m, "id", vec![0, 1, 2, 3]).unwrap();
        let q = quotient_model(&m, &id).unwrap();
        for x in 0..4 {
            for y in 0..4 {
                assert_eq!(q.kernel_entry(x, y), m.kernel_entry(x, y));
            }
        }
    }

    #[test]
    fn rejects_non_surjective_labeling() {
        let m = four_cycle();
        assert!(matches!(FactorMap::new(&m, "gap", vec![0, 2, 0, 2]), Err(Error::InvalidMap { .. })));
        assert!(matches!(FactorMap::new(&m, "short", vec![0, 1]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_mass_block_rejected() {
        // State 2 is transient, so mu(2) = 0.
        let m = FiniteMarkovModel::from_dense(
            FiniteMarkovModel::indexed_labels(3),
            vec![
                vec![int(0), int(1), int(0)],
                vec![int(1), int(0), int(0)],
                vec![rat(1, 2), rat(1, 2), int(0)],
            ],
            None,
        )
        .unwrap();
        assert!(matches!(FactorMap::new(&m, "z", vec![0, 0, 1]), Err(Error::ZeroMassBlock { block: 1, .. })));
    }

    #[test]
    fn conditional_density_basic() {
        let m = four_cycle();
        let parity = FactorMap::new(&m, "parity", vec![0, 1, 0, 1]).unwrap();
        let ones = vec![1.0; 4];
        assert_eq!(conditional_density(&m, &parity, &ones).unwrap(), ones);
        let f = vec![4.0, 0.0, 0.0, 0.0];
        assert_eq!(conditional_density(&m, &parity, &f).unwrap(), vec![2.0, 0.0, 2.0, 0.0]);
        assert!(conditional_density(&m, &parity, &[1.0, 1.0, 1.0, 2.0]).is_err());
        assert!(conditional_density(&m, &parity, &[2.0, -1.0, 2.0, 1.0]).is_err());
        let exact = conditional_density_exact(&m, &parity, &[int(4), int(0), int(0), int(0)]).unwrap();
        assert_eq!(exact, vec![int(2), int(0), int(2), int(0)]);
    }
}
