//! Left-invariant random walks on finite groups given by a multiplication
//! table, with factor maps from group homomorphisms.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{FiniteMarkovModel, SparseRow};
use crate::quotient::FactorMap;
use crate::rational::rat;

/// Cap on the order of a group checked for associativity (cubic cost).
pub const MAX_GROUP_ORDER: usize = 2048;

/// `table[a][b] = a * b` on elements `0..order`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct GroupTable {
    table: Vec<Vec<usize>>,
    identity: usize,
    inverse: Vec<usize>,
}

impl TryFrom<Vec<Vec<usize>>> for GroupTable {
    type Error = Error;

    fn try_from(table: Vec<Vec<usize>>) -> Result<Self> {
        GroupTable::new(table)
    }
}

impl From<GroupTable> for Vec<Vec<usize>> {
    fn from(g: GroupTable) -> Self {
        g.table
    }
}

impl GroupTable {
    pub fn new(table: Vec<Vec<usize>>) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::NotAGroup("empty table".into()));
        }
        if n > MAX_GROUP_ORDER {
            return Err(Error::TooLarge { what: "group order", size: n, cap: MAX_GROUP_ORDER });
        }
        if table.iter().any(|r| r.len() != n || r.iter().any(|&v| v >= n)) {
            return Err(Error::NotAGroup("table is not square over 0..n".into()));
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|a| table[e][a] == a && table[a][e] == a))
            .ok_or_else(|| Error::NotAGroup("no identity element".into()))?;
        let inverse = (0..n)
            .map(|a| {
                (0..n)
                    .find(|&b| table[a][b] == identity && table[b][a] == identity)
                    .ok_or_else(|| Error::NotAGroup(format!("element {a} has no inverse")))
            })
            .collect::<Result<Vec<_>>>()?;
        for a in 0..n {
            for b in 0..n {
                let ab = table[a][b];
                for c in 0..n {
                    if table[ab][c] != table[a][table[b][c]] {
                        return Err(Error::NotAGroup(format!("({a}*{b})*{c} != {a}*({b}*{c})")));
                    }
                }
            }
        }
        Ok(GroupTable { table, identity, inverse })
    }

    /// `Z_n` under addition.
    pub fn cyclic(n: usize) -> Result<Self> {
        Self::new((0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect())
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverse[a]
    }
}

/// A homomorphism `T: G -> H` given by the images of the elements of `G`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Homomorphism {
    pub name: String,
    pub target: GroupTable,
    pub images: Vec<usize>,
}

impl Homomorphism {
    /// Reduction `Z_n -> Z_d`, requires `d | n`.
    pub fn reduction_mod(n: usize, d: usize) -> Result<Self> {
        if d == 0 || !n.is_multiple_of(d) {
            return Err(Error::InvalidParameter(format!("{d} does not divide {n}")));
        }
        Ok(Homomorphism { name: format!("mod{d}"), target: GroupTable::cyclic(d)?, images: (0..n).map(|a| a % d).collect() })
    }

    pub fn trivial(order: usize) -> Result<Self> {
        Ok(Homomorphism { name: "trivial".into(), target: GroupTable::cyclic(1)?, images: vec![0; order] })
    }

    pub fn check(&self, group: &GroupTable) -> Result<()> {
        let n = group.order();
        if self.images.len() != n {
            return Err(Error::DimensionMismatch { what: "homomorphism images", expected: n, found: self.images.len() });
        }
        if let Some(&v) = self.images.iter().find(|&&v| v >= self.target.order()) {
            return Err(Error::IndexOutOfRange { index: v, n: self.target.order() });
        }
        for a in 0..n {
            for b in 0..n {
                if self.images[group.mul(a, b)] != self.target.mul(self.images[a], self.images[b]) {
                    return Err(Error::NotHomomorphism { name: self.name.clone(), a, b });
                }
            }
        }
        Ok(())
    }

    pub fn in_kernel(&self, a: usize) -> bool {
        self.images[a] == self.target.identity()
    }
}

/// `K(x, y) = 1/|S|` when `y^{-1} x` lies in `S`, i.e. `y = x s^{-1}`.
/// `S` must generate the group; repeated generators are merged.
pub fn cayley_model(group: &GroupTable, generators: &[usize]) -> Result<FiniteMarkovModel> {
    let n = group.order();
    let mut gens: Vec<usize> = generators.to_vec();
    gens.sort_unstable();
    gens.dedup();
    if gens.is_empty() {
        return Err(Error::NotGenerating);
    }
    if let Some(&s) = gens.iter().find(|&&s| s >= n) {
        return Err(Error::IndexOutOfRange { index: s, n });
    }
    let mut seen = vec![false; n];
    seen[group.identity()] = true;
    let mut queue = VecDeque::from([group.identity()]);
    while let Some(x) = queue.pop_front() {
        for &s in &gens {
            let y = group.mul(x, s);
            if !seen[y] {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::NotGenerating);
    }
    let w = rat(1, gens.len() as i64);
    let rows: Vec<SparseRow> =
        (0..n).map(|x| gens.iter().map(|&s| (group.mul(x, group.inverse(s)), w.clone())).collect()).collect();
    let mu = vec![rat(1, n as i64); n];
    FiniteMarkovModel::new(FiniteMarkovModel::indexed_labels(n), rows, Some(mu))
}

/// Factor map `x -> T(x)` after checking the homomorphism property.
pub fn homomorphism_map(model: &FiniteMarkovModel, group: &GroupTable, hom: &Homomorphism) -> Result<FactorMap> {
    hom.check(group)?;
    if model.n_states() != group.order() {
        return Err(Error::DimensionMismatch { what: "group order", expected: model.n_states(), found: group.order() });
    }
    let keys: Vec<i64> = hom.images.iter().map(|&v| v as i64).collect();
    FactorMap::from_keys(model, hom.name.clone(), keys)
}

/// `I_s = { i : s not in Ker T_i }` for each generator `s`.
pub fn generator_active_sets(homs: &[Homomorphism], generators: &[usize]) -> Vec<(usize, Vec<usize>)> {
    generators.iter().map(|&s| (s, (0..homs.len()).filter(|&i| !homs[i].in_kernel(s)).collect())).collect()
}
