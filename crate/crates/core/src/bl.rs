//! The BL-condition for discrete kernels.
//!
//! For a kernel `K` and commuting maps `T_1..T_m`, every edge `x -> y` with
//! `K(x,y) > 0` has an active set `I = { i : T_i(x) != T_i(y) }`. The
//! condition `e^{-H} L(e^H) <= sum c_i e^{-F_i} L(e^{F_i})` holds for all
//! block functions exactly when `sum_{i in I} c_i <= 1` for every edge. This
//! module enumerates the active sets, checks and optimizes exponents against
//! them in exact arithmetic, and evaluates the pointwise inequality directly
//! as an independent float check.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp;
use crate::markov::FiniteMarkovModel;
use crate::quotient::{require_commutation, FactorMap};
use crate::rational::{self, Rational};
use crate::rng;

/// Float residual tolerance for the pointwise inequality.
pub const POINTWISE_TOL: f64 = 1e-12;

/// A subset of `0..m` stored as a bitmask.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexMask {
    words: Vec<u64>,
}

impl IndexMask {
    pub fn empty(m: usize) -> Self {
        IndexMask { words: vec![0; m.div_ceil(64).max(1)] }
    }

    pub fn from_indices(m: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut mask = Self::empty(m);
        for i in indices {
            mask.insert(i);
        }
        mask
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words.get(i / 64).is_some_and(|w| w >> (i % 64) & 1 == 1)
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (k, w) in self.words.iter().enumerate() {
            let mut w = *w;
            while w != 0 {
                let b = w.trailing_zeros() as usize;
                out.push(k * 64 + b);
                w &= w - 1;
            }
        }
        out
    }
}

/// Exponents `c_i` in `[0, 1]`, exact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExponentVector(#[serde(with = "rational::serde_rational_vec")] Vec<Rational>);

impl ExponentVector {
    pub fn new(c: Vec<Rational>) -> Result<Self> {
        for (index, v) in c.iter().enumerate() {
            if v.is_negative() || *v > rational::one() {
                return Err(Error::ExponentOutOfRange { index, value: v.to_string() });
            }
        }
        Ok(ExponentVector(c))
    }

    pub fn uniform(m: usize, value: Rational) -> Result<Self> {
        Self::new(vec![value; m])
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::new(rational::parse_rational_list(s)?)
    }

    pub fn values(&self) -> &[Rational] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(rational::to_f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActiveEdge {
    pub x: usize,
    pub y: usize,
    pub active: IndexMask,
}

/// Edges of the kernel with their active sets, plus the distinct sets.
#[derive(Clone, Debug)]
pub struct EdgeConstraintSystem {
    m: usize,
    map_names: Vec<String>,
    edges: Vec<ActiveEdge>,
    /// Distinct active sets with the index of the first edge producing each.
    distinct: Vec<(IndexMask, usize)>,
}

impl EdgeConstraintSystem {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn map_names(&self) -> &[String] {
        &self.map_names
    }

    pub fn edges(&self) -> &[ActiveEdge] {
        &self.edges
    }

    pub fn distinct_sets(&self) -> impl Iterator<Item = &IndexMask> {
        self.distinct.iter().map(|(m, _)| m)
    }

    /// Distinct active sets as sorted index lists (empty sets omitted).
    pub fn constraint_sets(&self) -> Vec<Vec<usize>> {
        self.distinct.iter().filter(|(m, _)| !m.is_empty()).map(|(m, _)| m.indices()).collect()
    }
}

/// Enumerates `I_{x,y}` for every edge `x != y` with `K(x,y) > 0`. All maps
/// must commute with the kernel.
pub fn edge_active_sets(model: &FiniteMarkovModel, maps: &[FactorMap]) -> Result<EdgeConstraintSystem> {
    for map in maps {
        require_commutation(model, map)?;
    }
    let m = maps.len();
    let mut edges = Vec::new();
    let mut seen: BTreeMap<IndexMask, usize> = BTreeMap::new();
    for (x, row) in model.kernel_rows().iter().enumerate() {
        for (y, k) in row {
            if *y == x || k.is_zero() {
                continue;
            }
            let active = IndexMask::from_indices(m, (0..m).filter(|&i| maps[i].block_of(x) != maps[i].block_of(*y)));
            seen.entry(active.clone()).or_insert(edges.len());
            edges.push(ActiveEdge { x, y: *y, active });
        }
    }
    let mut distinct: Vec<(IndexMask, usize)> = seen.into_iter().collect();
    distinct.sort_by_key(|(_, e)| *e);
    Ok(EdgeConstraintSystem { m, map_names: maps.iter().map(|t| t.name().to_string()).collect(), edges, distinct })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetSlack {
    pub active: Vec<usize>,
    /// A representative edge `(x, y)` producing this set.
    pub edge: (usize, usize),
    #[serde(with = "rational::serde_rational")]
    pub sum: Rational,
    #[serde(with = "rational::serde_rational")]
    pub slack: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeViolation {
    pub x: usize,
    pub y: usize,
    pub active: Vec<usize>,
    #[serde(with = "rational::serde_rational")]
    pub sum: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeVerdict {
    pub pass: bool,
    #[serde(with = "rational::serde_rational")]
    pub max_sum: Rational,
    pub witness: Option<EdgeViolation>,
    pub sets: Vec<SetSlack>,
}

/// Exact check of `sum_{i in I} c_i <= 1` over the distinct active sets.
pub fn check_edge_criterion(system: &EdgeConstraintSystem, c: &ExponentVector) -> Result<EdgeVerdict> {
    if c.len() != system.m {
        return Err(Error::DimensionMismatch { what: "exponent vector", expected: system.m, found: c.len() });
    }
    let one = rational::one();
    let mut max_sum = Rational::zero();
    let mut witness = None;
    let mut sets = Vec::with_capacity(system.distinct.len());
    for (mask, edge_idx) in &system.distinct {
        let active = mask.indices();
        let sum = active.iter().fold(Rational::zero(), |acc, &i| acc + &c.values()[i]);
        let edge = &system.edges[*edge_idx];
        if sum > one && witness.as_ref().is_none_or(|w: &EdgeViolation| sum > w.sum) {
            witness = Some(EdgeViolation { x: edge.x, y: edge.y, active: active.clone(), sum: sum.clone() });
        }
        if sum > max_sum {
            max_sum = sum.clone();
        }
        sets.push(SetSlack { active, edge: (edge.x, edge.y), slack: &one - &sum, sum });
    }
    Ok(EdgeVerdict { pass: witness.is_none(), max_sum, witness, sets })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimizedExponents {
    pub c: ExponentVector,
    #[serde(with = "rational::serde_rational")]
    pub objective: Rational,
    pub verdict: EdgeVerdict,
}

/// Maximizes `sum w_i c_i` over the exponent polytope `{0 <= c <= 1,
/// sum_{i in I} c_i <= 1}` by exact simplex; the optimum is re-checked with
/// [`check_edge_criterion`].
pub fn optimize_exponents(system: &EdgeConstraintSystem, weights: &[Rational]) -> Result<OptimizedExponents> {
    let m = system.m;
    if weights.len() != m {
        return Err(Error::DimensionMismatch { what: "weights", expected: m, found: weights.len() });
    }
    if weights.iter().any(|w| w.is_negative()) {
        return Err(Error::InvalidParameter("weights must be nonnegative".into()));
    }
    let one = rational::one();
    let mut a: Vec<Vec<Rational>> = Vec::new();
    for set in system.constraint_sets() {
        let mut row = vec![Rational::zero(); m];
        for i in set {
            row[i] = one.clone();
        }
        a.push(row);
    }
    for i in 0..m {
        let mut row = vec![Rational::zero(); m];
        row[i] = one.clone();
        a.push(row);
    }
    let b = vec![one; a.len()];
    let sol = lp::maximize(weights, &a, &b)?;
    let c = ExponentVector::new(sol.x)?;
    let verdict = check_edge_criterion(system, &c)?;
    debug_assert!(verdict.pass);
    if !verdict.pass {
        return Err(Error::InvalidParameter("simplex returned an infeasible point".into()));
    }
    Ok(OptimizedExponents { c, objective: sol.objective, verdict })
}

fn check_functions(model: &FiniteMarkovModel, maps: &[FactorMap], c: &[f64], functions: &[Vec<f64>]) -> Result<()> {
    if c.len() != maps.len() {
        return Err(Error::DimensionMismatch { what: "exponent vector", expected: maps.len(), found: c.len() });
    }
    if functions.len() != maps.len() {
        return Err(Error::DimensionMismatch { what: "function list", expected: maps.len(), found: functions.len() });
    }
    for (index, (map, f)) in maps.iter().zip(functions).enumerate() {
        model.check_len(f, "state function")?;
        let mut first: Vec<Option<usize>> = vec![None; map.n_blocks()];
        for (x, &b) in map.labeling().iter().enumerate() {
            match first[b] {
                None => first[b] = Some(x),
                Some(y) if f[y] != f[x] => return Err(Error::NotBlockMeasurable { index, x: y, y: x }),
                Some(_) => {}
            }
        }
    }
    Ok(())
}

/// Per-state `LHS - RHS` of `e^{-H} L(e^H) <= sum c_i e^{-F_i} L(e^{F_i})`
/// with `H = sum c_i F_i`. Each `F_i` is a state function constant on the
/// blocks of `maps[i]`.
pub fn pointwise_residuals(
    model: &FiniteMarkovModel,
    maps: &[FactorMap],
    c: &[f64],
    functions: &[Vec<f64>],
) -> Result<Vec<f64>> {
    check_functions(model, maps, c, functions)?;
    let n = model.n_states();
    let h: Vec<f64> = (0..n).map(|x| c.iter().zip(functions).map(|(ci, f)| ci * f[x]).sum()).collect();
    Ok(model
        .kernel_rows_f64()
        .iter()
        .enumerate()
        .map(|(x, row)| {
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for (y, k) in row {
                if *y == x {
                    continue;
                }
                lhs += k * (h[*y] - h[x]).exp_m1();
                rhs += k * c
                    .iter()
                    .zip(functions)
                    .map(|(ci, f)| if *ci == 0.0 { 0.0 } else { ci * (f[*y] - f[x]).exp_m1() })
                    .sum::<f64>();
            }
            lhs - rhs
        })
        .collect())
}

/// Max over states of the pointwise residual; the inequality holds when this
/// is at most [`POINTWISE_TOL`].
pub fn check_bl_pointwise(model: &FiniteMarkovModel, maps: &[FactorMap], c: &[f64], functions: &[Vec<f64>]) -> Result<f64> {
    let r = pointwise_residuals(model, maps, c, functions)?;
    Ok(r.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Max pointwise residual over `draws` random families with standard normal
/// block values. Deterministic in `seed`.
pub fn random_pointwise_check(
    model: &FiniteMarkovModel,
    maps: &[FactorMap],
    c: &[f64],
    draws: usize,
    seed: u64,
) -> Result<f64> {
    (0..draws)
        .into_par_iter()
        .map(|d| {
            let mut rng = rng::stream_rng(seed, d as u64);
            let functions = maps
                .iter()
                .map(|t| t.lift(&rng::normals(&mut rng, t.n_blocks())))
                .collect::<Result<Vec<_>>>()?;
            check_bl_pointwise(model, maps, c, &functions)
        })
        .try_reduce(|| f64::NEG_INFINITY, |a, b| Ok(a.max(b)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampWitness {
    pub x: usize,
    pub y: usize,
    pub theta: f64,
    pub residual: f64,
}

/// Converse construction: for an edge `x -> y` whose active sum exceeds one,
/// take `F_i(z) = theta * 1{T_i(z) != T_i(x)}` and evaluate the pointwise
/// residual at `x`. Returns the most positive residual over violating edges,
/// or `None` if no edge violates the criterion.
pub fn ramp_falsifier(
    model: &FiniteMarkovModel,
    maps: &[FactorMap],
    system: &EdgeConstraintSystem,
    c: &ExponentVector,
    theta: f64,
) -> Result<Option<RampWitness>> {
    let c_f64 = c.to_f64();
    let one = rational::one();
    let mut sources: Vec<(usize, usize)> = Vec::new();
    for edge in system.edges() {
        let sum = edge.active.indices().iter().fold(Rational::zero(), |acc, &i| acc + &c.values()[i]);
        if sum > one && !sources.iter().any(|(x, _)| *x == edge.x) {
            sources.push((edge.x, edge.y));
        }
    }
    let mut best: Option<RampWitness> = None;
    for (x, y) in sources {
        let functions: Vec<Vec<f64>> = maps
            .iter()
            .map(|t| {
                let bx = t.block_of(x);
                t.labeling().iter().map(|&b| if b == bx { 0.0 } else { theta }).collect()
            })
            .collect();
        let residual = pointwise_residuals(model, maps, &c_f64, &functions)?[x];
        if best.as_ref().is_none_or(|b| residual > b.residual) {
            best = Some(RampWitness { x, y, theta, residual });
        }
    }
    Ok(best)
}

/// How a subset-indexed map reads a permutation or rotation: through the
/// values on the subset (`Restriction`, `x|_I`) or through the image set
/// (`Image`, `x(I)`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetKind {
    Restriction,
    Image,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetTerm {
    /// 1-based indices.
    pub set: Vec<usize>,
    pub kind: SubsetKind,
    #[serde(with = "rational::serde_rational")]
    pub c: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub pass: bool,
    #[serde(with = "rational::serde_rational")]
    pub max_sum: Rational,
    /// 1-based pair attaining `max_sum`.
    pub worst_pair: Option<(usize, usize)>,
    /// Some pair attains exactly 1.
    pub tight: bool,
}

/// Weight a single term contributes to the pair `{i, j}`.
pub fn pair_hits(term: &SubsetTerm, i: usize, j: usize) -> bool {
    let hits = term.set.contains(&i) as usize + term.set.contains(&j) as usize;
    match term.kind {
        SubsetKind::Restriction => hits >= 1,
        SubsetKind::Image => hits == 1,
    }
}

/// For every pair `i != j` in `1..=n`, sums `c_I` over restriction sets
/// meeting `{i,j}` and image sets meeting it in exactly one point, and checks
/// the sum is at most 1.
pub fn pair_condition_check(n: usize, family: &[SubsetTerm]) -> Result<PairVerdict> {
    if n < 2 {
        return Err(Error::InvalidParameter("pair condition needs n >= 2".into()));
    }
    for term in family {
        if term.set.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(&bad) = term.set.iter().find(|&&i| i == 0 || i > n) {
            return Err(Error::IndexOutOfRange { index: bad, n });
        }
        if term.c.is_negative() {
            return Err(Error::InvalidParameter("c_I must be nonnegative".into()));
        }
    }
    let one = rational::one();
    let mut max_sum: Option<(Rational, (usize, usize))> = None;
    let mut tight = false;
    for i in 1..=n {
        for j in i + 1..=n {
            let sum = family
                .iter()
                .filter(|t| pair_hits(t, i, j))
                .fold(Rational::zero(), |acc, t| acc + &t.c);
            tight |= sum == one;
            if max_sum.as_ref().is_none_or(|(s, _)| sum > *s) {
                max_sum = Some((sum, (i, j)));
            }
        }
    }
    let (max_sum, pair) = max_sum.expect("n >= 2 gives a pair");
    Ok(PairVerdict { pass: max_sum <= one, max_sum, worst_pair: Some(pair), tight })
}

pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoomisWhitneyExponents {
    /// Restriction-type exponent `C(n,k) - C(n-2,k)`.
    pub p: u128,
    /// Image-type exponent `2 C(n-2,k-1)`.
    pub q: u128,
    /// Exponent from the plain decomposition-of-identity lift, `2 C(n-1,k-1)`.
    pub naive: u128,
}

/// Exponents for the family of all `k`-subsets of `{1..n}`.
pub fn exponent_formulas(n: u64, k: u64) -> Result<LoomisWhitneyExponents> {
    if n < 2 || k < 1 || k > n - 1 {
        return Err(Error::InvalidParameter(format!("need n >= 2 and 1 <= k <= n-1, got n={n}, k={k}")));
    }
    Ok(LoomisWhitneyExponents {
        p: binomial(n, k) - binomial(n - 2, k),
        q: 2 * binomial(n - 2, k - 1),
        naive: 2 * binomial(n - 1, k - 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    #[test]
    fn mask_basics() {
        let mut m = IndexMask::empty(70);
        assert!(m.is_empty());
        m.insert(3);
        m.insert(66);
        assert_eq!(m.indices(), vec![3, 66]);
        assert_eq!(m.len(), 2);
        assert!(m.contains(66) && !m.contains(65));
    }

    #[test]
    fn exponent_vector_range() {
        assert!(ExponentVector::parse("1/2,1,0").is_ok());
        assert!(matches!(ExponentVector::parse("1/2,3/2"), Err(Error::ExponentOutOfRange { index: 1, .. })));
        assert!(ExponentVector::parse("-1/3").is_err());
    }

    #[test]
    fn formulas_small_cases() {
        let e = exponent_formulas(4, 2).unwrap();
        assert_eq!((e.p, e.q), (5, 4));
        let e = exponent_formulas(3, 2).unwrap();
        assert_eq!((e.p, e.q), (3, 2));
        for n in 2..12 {
            let e = exponent_formulas(n, 1).unwrap();
            assert_eq!((e.p, e.q, e.naive), (2, 2, 2));
        }
        assert!(exponent_formulas(4, 0).is_err());
        assert!(exponent_formulas(4, 4).is_err());
        assert!(exponent_formulas(1, 1).is_err());
    }

    #[test]
    fn pair_condition_examples() {
        // Partition {1,2},{3},{4,5} with restriction maps at c = 1/2.
        let family: Vec<SubsetTerm> = [vec![1, 2], vec![3], vec![4, 5]]
            .into_iter()
            .map(|set| SubsetTerm { set, kind: SubsetKind::Restriction, c: rat(1, 2) })
            .collect();
        let v = pair_condition_check(5, &family).unwrap();
        assert!(v.pass && v.tight);

        let singletons: Vec<SubsetTerm> =
            (1..=4).map(|i| SubsetTerm { set: vec![i], kind: SubsetKind::Image, c: rat(1, 2) }).collect();
        let v = pair_condition_check(4, &singletons).unwrap();
        assert!(v.pass);
        assert_eq!(v.max_sum, int(1));

        let whole = vec![SubsetTerm { set: vec![1, 2, 3], kind: SubsetKind::Image, c: int(1) }];
        let v = pair_condition_check(3, &whole).unwrap();
        assert!(v.pass);
        assert_eq!(v.max_sum, int(0));

        let empty = vec![SubsetTerm { set: vec![], kind: SubsetKind::Image, c: int(1) }];
        assert!(matches!(pair_condition_check(3, &empty), Err(Error::EmptySubset)));
    }
}
