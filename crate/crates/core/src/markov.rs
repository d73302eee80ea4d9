//! Finite Markov models with exact kernels.
//!
//! A model stores a row-stochastic kernel `K` in sparse rational form together
//! with an invariant probability `mu`. The generator is `L = K - Id` and the
//! semigroup `P_t = exp(tL)` is evaluated by uniformization, which for a
//! stochastic `K` is a convex combination of the powers `K^k f`.

use std::collections::VecDeque;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Poisson tail below which the uniformization series is truncated.
pub const UNIFORMIZATION_TAIL: f64 = 1e-14;

/// Largest state space for which an exact invariant solve is attempted.
pub const EXACT_SOLVE_CAP: usize = 1000;

/// Canonical state label: an integer tuple (permutations, bit strings,
/// product coordinates) or an opaque string.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged, from = "RawLabel")]
pub enum StateLabel {
    Tuple(Vec<i64>),
    Text(String),
}

/// Accepted input forms; a bare integer is a one-element tuple.
#[derive(Deserialize)]
#[serde(untagged)]
enum RawLabel {
    Tuple(Vec<i64>),
    Int(i64),
    Text(String),
}

impl From<RawLabel> for StateLabel {
    fn from(r: RawLabel) -> Self {
        match r {
            RawLabel::Tuple(t) => StateLabel::Tuple(t),
            RawLabel::Int(v) => StateLabel::Tuple(vec![v]),
            RawLabel::Text(s) => StateLabel::Text(s),
        }
    }
}

impl std::fmt::Display for StateLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StateLabel::Tuple(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "({})", parts.join(","))
            }
            StateLabel::Text(s) => f.write_str(s),
        }
    }
}

impl From<Vec<i64>> for StateLabel {
    fn from(v: Vec<i64>) -> Self {
        StateLabel::Tuple(v)
    }
}

impl From<i64> for StateLabel {
    fn from(v: i64) -> Self {
        StateLabel::Tuple(vec![v])
    }
}

impl From<String> for StateLabel {
    fn from(v: String) -> Self {
        StateLabel::Text(v)
    }
}

/// One sparse kernel row: `(column, probability)` pairs sorted by column.
pub type SparseRow = Vec<(usize, Rational)>;

#[derive(Clone, Debug)]
pub struct FiniteMarkovModel {
    labels: Vec<StateLabel>,
    kernel: Vec<SparseRow>,
    kernel_f64: Vec<Vec<(usize, f64)>>,
    mu: Vec<Rational>,
    mu_f64: Vec<f64>,
    reversible: bool,
}

impl FiniteMarkovModel {
    /// Validates a sparse kernel and either validates `mu` or solves for the
    /// unique invariant probability.
    pub fn new(labels: Vec<StateLabel>, rows: Vec<SparseRow>, mu: Option<Vec<Rational>>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidParameter("a model needs at least one state".into()));
        }
        if rows.len() != n {
            return Err(Error::DimensionMismatch { what: "kernel rows", expected: n, found: rows.len() });
        }
        let kernel = rows
            .into_iter()
            .enumerate()
            .map(|(x, row)| normalize_row(x, row, n))
            .collect::<Result<Vec<_>>>()?;

        let mu = match mu {
            Some(mu) => {
                validate_measure(&mu, n)?;
                check_invariant(&kernel, &mu)?;
                mu
            }
            None => solve_invariant(&kernel)?,
        };

        let kernel_f64 = kernel
            .iter()
            .map(|row| row.iter().map(|(y, k)| (*y, rational::to_f64(k))).collect())
            .collect();
        let mu_f64 = mu.iter().map(rational::to_f64).collect();
        let mut model = FiniteMarkovModel { labels, kernel, kernel_f64, mu, mu_f64, reversible: false };
        model.reversible = model.detailed_balance_holds();
        Ok(model)
    }

    /// Dense-matrix convenience constructor.
    pub fn from_dense(labels: Vec<StateLabel>, kernel: Vec<Vec<Rational>>, mu: Option<Vec<Rational>>) -> Result<Self> {
        let n = labels.len();
        let rows = kernel
            .into_iter()
            .map(|row| {
                if row.len() != n {
                    return Err(Error::DimensionMismatch { what: "kernel row", expected: n, found: row.len() });
                }
                Ok(row.into_iter().enumerate().filter(|(_, v)| !v.is_zero()).collect())
            })
            .collect::<Result<Vec<SparseRow>>>()?;
        Self::new(labels, rows, mu)
    }

    /// Labels `0..n` as one-element tuples.
    pub fn indexed_labels(n: usize) -> Vec<StateLabel> {
        (0..n as i64).map(|i| StateLabel::Tuple(vec![i])).collect()
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[StateLabel] {
        &self.labels
    }

    pub fn kernel_rows(&self) -> &[SparseRow] {
        &self.kernel
    }

    pub fn kernel_rows_f64(&self) -> &[Vec<(usize, f64)>] {
        &self.kernel_f64
    }

    pub fn mu(&self) -> &[Rational] {
        &self.mu
    }

    pub fn mu_f64(&self) -> &[f64] {
        &self.mu_f64
    }

    pub fn reversible(&self) -> bool {
        self.reversible
    }

    pub fn kernel_entry(&self, x: usize, y: usize) -> Rational {
        let row = &self.kernel[x];
        match row.binary_search_by_key(&y, |(c, _)| *c) {
            Ok(pos) => row[pos].1.clone(),
            Err(_) => Rational::zero(),
        }
    }

    fn detailed_balance_holds(&self) -> bool {
        self.kernel.iter().enumerate().all(|(x, row)| {
            row.iter().all(|(y, k)| &self.mu[x] * k == &self.mu[*y] * self.kernel_entry(*y, x))
        })
    }

    /// Strong connectivity of the kernel's support graph.
    pub fn is_irreducible(&self) -> bool {
        let n = self.n_states();
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (x, row) in self.kernel.iter().enumerate() {
            for (y, _) in row {
                reverse[*y].push(x);
            }
        }
        let forward: Vec<Vec<usize>> = self.kernel.iter().map(|r| r.iter().map(|(y, _)| *y).collect()).collect();
        reaches_all(&forward) && reaches_all(&reverse)
    }

    pub(crate) fn check_len(&self, f: &[f64], what: &'static str) -> Result<()> {
        if f.len() != self.n_states() {
            return Err(Error::DimensionMismatch { what, expected: self.n_states(), found: f.len() });
        }
        Ok(())
    }

    /// `(Kf)(x) = sum_y K(x,y) f(y)`.
    pub fn apply_kernel(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f, "state function")?;
        Ok(self.apply_kernel_unchecked(f))
    }

    pub(crate) fn apply_kernel_unchecked(&self, f: &[f64]) -> Vec<f64> {
        self.kernel_f64.iter().map(|row| row.iter().map(|(y, k)| k * f[*y]).sum()).collect()
    }

    /// `(Lf)(x) = sum_y K(x,y) (f(y) - f(x))`.
    pub fn generator(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f, "state function")?;
        Ok(self
            .kernel_f64
            .iter()
            .enumerate()
            .map(|(x, row)| row.iter().map(|(y, k)| k * (f[*y] - f[x])).sum())
            .collect())
    }

    /// `sum_x mu(x) f(x)`.
    pub fn expectation(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f, "state function")?;
        Ok(self.mu_f64.iter().zip(f).map(|(m, v)| m * v).sum())
    }

    /// `P_t f` by uniformization: `exp(-t) sum_k t^k/k! K^k f`, truncated once
    /// the Poisson tail drops below [`UNIFORMIZATION_TAIL`], so the result is
    /// within `1e-14 * max|f|` of the exact value.
    pub fn semigroup_apply(&self, t: f64, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f, "state function")?;
        if t.is_nan() || t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        if t == 0.0 {
            return Ok(f.to_vec());
        }
        let terms = uniformization_terms(t);
        let ln_t = t.ln();
        let mut log_w = -t;
        let mut power = f.to_vec();
        let mut acc = vec![0.0; f.len()];
        for k in 0..=terms {
            if k > 0 {
                log_w += ln_t - (k as f64).ln();
                power = self.apply_kernel_unchecked(&power);
            }
            let w = log_w.exp();
            if w > 0.0 {
                for (a, p) in acc.iter_mut().zip(&power) {
                    *a += w * p;
                }
            }
        }
        Ok(acc)
    }

    /// Carré du champ `Gamma(f,g)(x) = 1/2 sum_y K(x,y)(f(y)-f(x))(g(y)-g(x))`.
    pub fn carre_du_champ(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f, "state function")?;
        self.check_len(g, "state function")?;
        Ok(self
            .kernel_f64
            .iter()
            .enumerate()
            .map(|(x, row)| 0.5 * row.iter().map(|(y, k)| k * (f[*y] - f[x]) * (g[*y] - g[x])).sum::<f64>())
            .collect())
    }

    /// `E(f,g) = sum_x mu(x) Gamma(f,g)(x)`.
    pub fn dirichlet_form(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        let gamma = self.carre_du_champ(f, g)?;
        Ok(self.mu_f64.iter().zip(&gamma).map(|(m, v)| m * v).sum())
    }

    /// `-sum_x mu(x) f(x) (Lg)(x)`; equals [`Self::dirichlet_form`] when the
    /// model is reversible.
    pub fn dirichlet_form_generator(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_len(f, "state function")?;
        let lg = self.generator(g)?;
        Ok(-self.mu_f64.iter().zip(f).zip(&lg).map(|((m, a), b)| m * a * b).sum::<f64>())
    }

    /// Exact carré du champ for rational functions.
    pub fn carre_du_champ_exact(&self, f: &[Rational], g: &[Rational]) -> Result<Vec<Rational>> {
        let n = self.n_states();
        for v in [f, g] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { what: "state function", expected: n, found: v.len() });
            }
        }
        let half = rational::rat(1, 2);
        Ok(self
            .kernel
            .iter()
            .enumerate()
            .map(|(x, row)| {
                let s = row.iter().fold(Rational::zero(), |acc, (y, k)| {
                    acc + k * (&f[*y] - &f[x]) * (&g[*y] - &g[x])
                });
                s * &half
            })
            .collect())
    }

    pub fn dirichlet_form_exact(&self, f: &[Rational], g: &[Rational]) -> Result<Rational> {
        let gamma = self.carre_du_champ_exact(f, g)?;
        Ok(self.mu.iter().zip(&gamma).fold(Rational::zero(), |acc, (m, v)| acc + m * v))
    }
}

fn normalize_row(x: usize, mut row: SparseRow, n: usize) -> Result<SparseRow> {
    row.sort_by_key(|(y, _)| *y);
    let mut merged: SparseRow = Vec::with_capacity(row.len());
    for (y, v) in row {
        if y >= n {
            return Err(Error::IndexOutOfRange { index: y, n });
        }
        if v.is_negative() {
            return Err(Error::NegativeEntry { row: x, col: y });
        }
        match merged.last_mut() {
            Some((last, acc)) if *last == y => *acc += v,
            _ => merged.push((y, v)),
        }
    }
    merged.retain(|(_, v)| !v.is_zero());
    let total = merged.iter().fold(Rational::zero(), |acc, (_, v)| acc + v);
    if total != rational::one() {
        return Err(Error::NotStochastic { row: x, sum: total.to_string() });
    }
    Ok(merged)
}

fn validate_measure(mu: &[Rational], n: usize) -> Result<()> {
    if mu.len() != n {
        return Err(Error::DimensionMismatch { what: "mu", expected: n, found: mu.len() });
    }
    if let Some(i) = mu.iter().position(|m| m.is_negative()) {
        return Err(Error::InvalidMeasure(format!("mu({i}) is negative")));
    }
    let total = rational::sum(mu);
    if total != rational::one() {
        return Err(Error::InvalidMeasure(format!("mu sums to {total}")));
    }
    Ok(())
}

fn check_invariant(kernel: &[SparseRow], mu: &[Rational]) -> Result<()> {
    let mut pushed = vec![Rational::zero(); mu.len()];
    for (x, row) in kernel.iter().enumerate() {
        if mu[x].is_zero() {
            continue;
        }
        for (y, k) in row {
            pushed[*y] += &mu[x] * k;
        }
    }
    match pushed.iter().zip(mu).position(|(a, b)| a != b) {
        Some(state) => Err(Error::NotInvariant { state }),
        None => Ok(()),
    }
}

/// Exact Gaussian elimination on `[K^T - I ; 1^T] mu = [0 ; 1]`; the system
/// has full column rank exactly when the invariant probability is unique.
fn solve_invariant(kernel: &[SparseRow]) -> Result<Vec<Rational>> {
    let n = kernel.len();
    if n > EXACT_SOLVE_CAP {
        return Err(Error::TooLarge { what: "exact invariant solve", size: n, cap: EXACT_SOLVE_CAP });
    }
    let cols = n + 1;
    let mut a: Vec<Vec<Rational>> = vec![vec![Rational::zero(); cols]; n + 1];
    for (x, row) in kernel.iter().enumerate() {
        for (y, k) in row {
            a[*y][x] += k;
        }
        a[x][x] -= rational::one();
    }
    for x in 0..n {
        a[n][x] = rational::one();
    }
    a[n][n] = rational::one();

    let mut pivot_row = 0;
    let mut pivot_cols = Vec::with_capacity(n);
    for col in 0..n {
        let Some(p) = (pivot_row..=n).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(pivot_row, p);
        let inv = a[pivot_row][col].recip();
        for j in col..cols {
            a[pivot_row][j] = &a[pivot_row][j] * &inv;
        }
        for r in 0..=n {
            if r != pivot_row && !a[r][col].is_zero() {
                let factor = a[r][col].clone();
                for j in col..cols {
                    let delta = &factor * &a[pivot_row][j];
                    a[r][j] -= delta;
                }
            }
        }
        pivot_cols.push(col);
        pivot_row += 1;
    }
    if pivot_cols.len() < n {
        return Err(Error::InvariantNotUnique);
    }
    Ok((0..n).map(|i| a[i][n].clone()).collect())
}

/// Number of uniformization terms `N` such that the Poisson tail
/// `sum_{k>N} exp(-t) t^k / k!` is below [`UNIFORMIZATION_TAIL`].
pub fn uniformization_terms(t: f64) -> usize {
    if t <= 0.0 {
        return 0;
    }
    let ln_t = t.ln();
    let mut log_w = -t;
    let mut n = 0usize;
    loop {
        // log_w holds log w_n; the tail is bounded by w_{n+1} / (1 - t/(n+2)).
        let log_next = log_w + ln_t - ((n + 1) as f64).ln();
        let ratio = t / (n + 2) as f64;
        if ratio < 1.0 {
            let bound = log_next.exp() / (1.0 - ratio);
            if bound < UNIFORMIZATION_TAIL {
                return n;
            }
        }
        log_w = log_next;
        n += 1;
    }
}

fn reaches_all(adj: &[Vec<usize>]) -> bool {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                count += 1;
                queue.push_back(y);
            }
        }
    }
    count == n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn flip() -> FiniteMarkovModel {
        FiniteMarkovModel::from_dense(
            FiniteMarkovModel::indexed_labels(2),
            vec![vec![int(0), int(1)], vec![int(1), int(0)]],
            None,
        )
        .unwrap()
    }

    #[test]
    fn flip_chain_has_uniform_measure() {
        let m = flip();
        assert_eq!(m.mu(), &[rat(1, 2), rat(1, 2)]);
        assert!(m.reversible());
        assert!(m.is_irreducible());
    }

    #[test]
    fn identity_kernel_has_no_unique_measure() {
        let err = FiniteMarkovModel::from_dense(
            FiniteMarkovModel::indexed_labels(2),
            vec![vec![int(1), int(0)], vec![int(0), int(1)]],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvariantNotUnique));
    }

    #[test]
    fn rejects_bad_rows_and_measures() {
        let labels = FiniteMarkovModel::indexed_labels(2);
        let err = FiniteMarkovModel::from_dense(labels.clone(), vec![vec![rat(1, 2), int(0)], vec![int(1), int(0)]], None)
            .unwrap_err();
        assert!(matches!(err, Error::NotStochastic { row: 0, .. }));
        let err = FiniteMarkovModel::from_dense(labels.clone(), vec![vec![int(2), int(-1)], vec![int(1), int(0)]], None)
            .unwrap_err();
        assert!(matches!(err, Error::NegativeEntry { .. }));
        let err = FiniteMarkovModel::from_dense(
            labels,
            vec![vec![int(0), int(1)], vec![int(1), int(0)]],
            Some(vec![rat(1, 3), rat(2, 3)]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotInvariant { .. }));
    }

    #[test]
    fn non_reversible_cycle() {
        // Deterministic-ish 3-cycle with laziness: invariant is uniform, flow is one-directional.
        let m = FiniteMarkovModel::from_dense(
            FiniteMarkovModel::indexed_labels(3),
            vec![
                vec![rat(1, 2), rat(1, 2), int(0)],
                vec![int(0), rat(1, 2), rat(1, 2)],
                vec![rat(1, 2), int(0), rat(1, 2)],
            ],
            None,
        )
        .unwrap();
        assert_eq!(m.mu(), &[rat(1, 3), rat(1, 3), rat(1, 3)]);
        assert!(!m.reversible());
    }

    #[test]
    fn semigroup_at_zero_and_on_constants() {
        let m = flip();
        let f = [0.3, -1.7];
        assert_eq!(m.semigroup_apply(0.0, &f).unwrap(), f.to_vec());
        for t in [0.1, 1.0, 7.5] {
            let c = m.semigroup_apply(t, &[2.5, 2.5]).unwrap();
            assert!(c.iter().all(|v| (v - 2.5).abs() < 1e-14));
        }
        assert!(matches!(m.semigroup_apply(-1.0, &f), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn flip_semigroup_closed_form() {
        // For the flip chain, P_t f = mean + exp(-2t) (f - mean).
        let m = flip();
        let f = [1.0, 0.0];
        for t in [0.01, 0.5, 3.0, 20.0] {
            let p = m.semigroup_apply(t, &f).unwrap();
            let expect = 0.5 + 0.5 * (-2.0 * t).exp();
            assert!((p[0] - expect).abs() < 1e-13, "t={t}");
        }
    }

    #[test]
    fn truncation_terms_grow_with_t() {
        assert!(uniformization_terms(0.1) >= 1);
        let n200 = uniformization_terms(200.0);
        assert!(n200 > 200 && n200 < 400);
    }

    #[test]
    fn flip_carre_du_champ() {
        let m = flip();
        let g = m.carre_du_champ(&[0.0, 1.0], &[0.0, 1.0]).unwrap();
        assert_eq!(g, vec![0.5, 0.5]);
        assert_eq!(m.dirichlet_form(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.5);
        let exact = m.dirichlet_form_exact(&[int(0), int(1)], &[int(0), int(1)]).unwrap();
        assert_eq!(exact, rat(1, 2));
        let consts = m.carre_du_champ(&[3.0, 3.0], &[0.2, 9.0]).unwrap();
        assert!(consts.iter().all(|v| *v == 0.0));
    }
}
