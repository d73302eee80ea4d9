//! Entropy and Fisher information of densities, their behaviour under
//! conditioning on factor maps, and the de Bruijn identity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bl::ExponentVector;
use crate::error::{Error, Result};
use crate::markov::FiniteMarkovModel;
use crate::quotient::{conditional_density, validate_density, FactorMap};
use crate::verify::{self, TestFamily};
use crate::{bl, rng};

/// Absolute tolerance of the adaptive Simpson rule.
pub const SIMPSON_TOL: f64 = 1e-8;
const SIMPSON_MAX_DEPTH: usize = 40;

/// A nonnegative function with unit `mu`-mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Density(Vec<f64>);

impl Density {
    pub fn new(model: &FiniteMarkovModel, values: Vec<f64>) -> Result<Self> {
        validate_density(model, &values)?;
        Ok(Density(values))
    }

    /// Rescales a nonnegative, not identically zero function to unit mean.
    pub fn normalize(model: &FiniteMarkovModel, values: Vec<f64>) -> Result<Self> {
        model.check_len(&values, "density")?;
        if let Some(index) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::NotPositive { index, value: values[index] });
        }
        let mean = model.expectation(&values)?;
        if mean <= 0.0 {
            return Err(Error::NotDensity("function has zero mean".into()));
        }
        Ok(Density(values.into_iter().map(|v| v / mean).collect()))
    }

    pub fn uniform(model: &FiniteMarkovModel) -> Self {
        Density(vec![1.0; model.n_states()])
    }

    /// `1_x / mu(x)`.
    pub fn point_mass(model: &FiniteMarkovModel, x: usize) -> Result<Self> {
        let n = model.n_states();
        if x >= n {
            return Err(Error::IndexOutOfRange { index: x, n });
        }
        let m = model.mu_f64()[x];
        if m <= 0.0 {
            return Err(Error::NotDensity(format!("state {x} has zero mass")));
        }
        Ok(Density((0..n).map(|y| if y == x { 1.0 / m } else { 0.0 }).collect()))
    }

    pub fn random_log_normal(model: &FiniteMarkovModel, seed: u64, stream: u64) -> Self {
        let mut rng = rng::stream_rng(seed, stream);
        Self::normalize(model, rng::log_normals(&mut rng, model.n_states())).expect("positive draws")
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    fn require_positive(&self) -> Result<()> {
        match self.0.iter().position(|v| *v <= 0.0) {
            Some(index) => Err(Error::NotPositive { index, value: self.0[index] }),
            None => Ok(()),
        }
    }
}

fn xlogx(v: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

/// `sum mu f log f`, with `0 log 0 = 0`.
pub fn entropy(model: &FiniteMarkovModel, f: &Density) -> Result<f64> {
    model.check_len(f.values(), "density")?;
    Ok(model.mu_f64().iter().zip(f.values()).map(|(m, v)| m * xlogx(*v)).sum())
}

fn ln_all(f: &[f64]) -> Vec<f64> {
    f.iter().map(|v| v.ln()).collect()
}

/// `J(f) = E(f, log f)` through the carre du champ.
pub fn fisher(model: &FiniteMarkovModel, f: &Density) -> Result<f64> {
    f.require_positive()?;
    model.dirichlet_form(f.values(), &ln_all(f.values()))
}

/// `J(f)` through the carre du champ and through `-sum mu f L(log f)`. The
/// two agree for reversible models.
pub fn fisher_routes(model: &FiniteMarkovModel, f: &Density) -> Result<(f64, f64)> {
    f.require_positive()?;
    let log_f = ln_all(f.values());
    Ok((model.dirichlet_form(f.values(), &log_f)?, model.dirichlet_form_generator(f.values(), &log_f)?))
}

fn marginals(model: &FiniteMarkovModel, maps: &[FactorMap], f: &Density) -> Result<Vec<Density>> {
    maps.iter().map(|t| Ok(Density(conditional_density(model, t, f.values())?))).collect()
}

fn check_c(c: &[f64], m: usize) -> Result<()> {
    if c.len() != m {
        return Err(Error::DimensionMismatch { what: "exponent vector", expected: m, found: c.len() });
    }
    Ok(())
}

/// `Ent(f) - sum c_i Ent(f_i)` with `f_i` the conditional density along
/// `T_i`.
pub fn entropy_gap(model: &FiniteMarkovModel, maps: &[FactorMap], c: &[f64], f: &Density) -> Result<f64> {
    check_c(c, maps.len())?;
    let total = entropy(model, f)?;
    let parts = marginals(model, maps, f)?
        .iter()
        .zip(c)
        .map(|(fi, ci)| Ok(ci * entropy(model, fi)?))
        .sum::<Result<f64>>()?;
    Ok(total - parts)
}

/// `J(f) - sum c_i J(f_i)`.
pub fn fisher_gap(model: &FiniteMarkovModel, maps: &[FactorMap], c: &[f64], f: &Density) -> Result<f64> {
    check_c(c, maps.len())?;
    let total = fisher(model, f)?;
    let parts = marginals(model, maps, f)?
        .iter()
        .zip(c)
        .map(|(fi, ci)| Ok(ci * fisher(model, fi)?))
        .sum::<Result<f64>>()?;
    Ok(total - parts)
}

/// `|E(f_i, log f_i) - E(f, log f_i)|` for the conditional density `f_i`.
pub fn marginal_identity_residual(model: &FiniteMarkovModel, map: &FactorMap, f: &Density) -> Result<f64> {
    f.require_positive()?;
    let fi = conditional_density(model, map, f.values())?;
    let log_fi = ln_all(&fi);
    Ok((model.dirichlet_form(&fi, &log_fi)? - model.dirichlet_form(f.values(), &log_fi)?).abs())
}

/// `E(f, log f) + sum mu f e^{-H} L(e^H) - E(f, H)`, nonnegative for
/// reversible models and zero at `H = log f`.
pub fn dual_fisher_gap(model: &FiniteMarkovModel, f: &Density, h: &[f64]) -> Result<f64> {
    if !model.reversible() {
        return Err(Error::NotReversible);
    }
    f.require_positive()?;
    model.check_len(h, "H")?;
    let mu = model.mu_f64();
    let tilt: f64 = model
        .kernel_rows_f64()
        .iter()
        .enumerate()
        .map(|(x, row)| {
            mu[x] * f.values()[x] * row.iter().map(|(y, k)| k * (h[*y] - h[x]).exp_m1()).sum::<f64>()
        })
        .sum();
    Ok(fisher(model, f)? + tilt - model.dirichlet_form(f.values(), h)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeBruijnReport {
    pub entropy: f64,
    pub integral: f64,
    pub tail_entropy: f64,
    pub residual: f64,
    pub evaluations: usize,
}

struct Simpson<'a, F: FnMut(f64) -> Result<f64>> {
    f: &'a mut F,
    evaluations: usize,
}

impl<F: FnMut(f64) -> Result<f64>> Simpson<'_, F> {
    fn eval(&mut self, t: f64) -> Result<f64> {
        self.evaluations += 1;
        (self.f)(t)
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(&mut self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: usize) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (self.eval(lm)?, self.eval(rm)?);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(self.refine(a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
            + self.refine(m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
    }
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance
/// `tol`. Returns the integral and the number of evaluations.
pub fn adaptive_simpson<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, tol: f64) -> Result<(f64, usize)> {
    let mut s = Simpson { f: &mut f, evaluations: 0 };
    let (fa, fm, fb) = (s.eval(a)?, s.eval(0.5 * (a + b))?, s.eval(b)?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let v = s.refine(a, b, fa, fm, fb, whole, tol, SIMPSON_MAX_DEPTH)?;
    Ok((v, s.evaluations))
}

/// `Ent(f) - int_0^T J(P_t f) dt - Ent(P_T f)`, which vanishes exactly.
/// Requires an irreducible reversible model and a positive density.
pub fn debruijn_check(model: &FiniteMarkovModel, f: &Density, t_max: f64) -> Result<DeBruijnReport> {
    if !model.reversible() {
        return Err(Error::NotReversible);
    }
    if !model.is_irreducible() {
        return Err(Error::NotErgodic);
    }
    if t_max < 0.0 {
        return Err(Error::NegativeTime(t_max));
    }
    f.require_positive()?;
    let j_at = |t: f64| -> Result<f64> {
        let ft = Density(model.semigroup_apply(t, f.values())?);
        fisher(model, &ft)
    };
    let (integral, evaluations) = adaptive_simpson(j_at, 0.0, t_max, SIMPSON_TOL)?;
    let ent = entropy(model, f)?;
    let tail_entropy = entropy(model, &Density(model.semigroup_apply(t_max, f.values())?))?;
    Ok(DeBruijnReport { entropy: ent, integral, tail_entropy, residual: ent - integral - tail_entropy, evaluations })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyTrial {
    pub trial: usize,
    pub entropy_gap: f64,
    pub fisher_gap: f64,
}

/// Entropy and Fisher gaps on `trials` random log-normal densities.
pub fn entropy_trials(
    model: &FiniteMarkovModel,
    maps: &[FactorMap],
    c: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<EntropyTrial>> {
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let f = Density::random_log_normal(model, seed, trial as u64);
            Ok(EntropyTrial {
                trial,
                entropy_gap: entropy_gap(model, maps, c, &f)?,
                fisher_gap: fisher_gap(model, maps, c, &f)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideSummary {
    pub min_gap: f64,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub criterion_pass: bool,
    pub correlation: SideSummary,
    pub entropy: SideSummary,
    pub consistent: bool,
}

/// Runs the correlation side (random families plus adversarial ascent) and
/// the entropy side (random densities plus normalized point masses) and
/// compares both verdicts with the edge criterion.
pub fn duality_consistency(
    model: &FiniteMarkovModel,
    maps: &[FactorMap],
    c: &ExponentVector,
    trials: usize,
    seed: u64,
    tolerance: f64,
) -> Result<DualityReport> {
    let system = bl::edge_active_sets(model, maps)?;
    let criterion_pass = bl::check_edge_criterion(&system, c)?.pass;
    let cf = c.to_f64();

    let mut gaps: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|k| verify::global_gap(model, maps, &cf, &TestFamily::log_normal(maps, seed, k as u64)))
        .collect::<Result<_>>()?;
    if trials > 0 {
        gaps.push(verify::adversarial_search(model, maps, &cf, trials.clamp(1, 20), seed)?.min_gap);
    }
    let correlation = summarize(&gaps, tolerance);

    let mut densities: Vec<Density> =
        (0..trials).map(|k| Density::random_log_normal(model, seed, k as u64)).collect();
    for x in 0..model.n_states() {
        if model.mu_f64()[x] > 0.0 {
            densities.push(Density::point_mass(model, x)?);
        }
    }
    let gaps: Vec<f64> = densities.par_iter().map(|f| entropy_gap(model, maps, &cf, f)).collect::<Result<_>>()?;
    let entropy = summarize(&gaps, tolerance);

    let consistent = if criterion_pass {
        correlation.violations == 0 && entropy.violations == 0
    } else {
        correlation.violations > 0 && entropy.violations > 0
    };
    Ok(DualityReport { criterion_pass, correlation, entropy, consistent })
}

fn summarize(gaps: &[f64], tolerance: f64) -> SideSummary {
    SideSummary {
        min_gap: gaps.iter().copied().fold(f64::INFINITY, f64::min),
        violations: gaps.iter().filter(|g| **g < -tolerance).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::StateLabel;
    use crate::rational::rat;
    use crate::zoo::{restriction_map, symmetric_group_model};
    use approx::assert_abs_diff_eq;

    fn flip() -> FiniteMarkovModel {
        let labels: Vec<StateLabel> = FiniteMarkovModel::indexed_labels(2);
        FiniteMarkovModel::from_dense(labels, vec![vec![rat(0, 1), rat(1, 1)], vec![rat(1, 1), rat(0, 1)]], None)
            .unwrap()
    }

    fn s3() -> (FiniteMarkovModel, Vec<FactorMap>) {
        let m = symmetric_group_model(3).unwrap();
        let maps = (1..=3).map(|i| restriction_map(&m, &[i]).unwrap()).collect();
        (m, maps)
    }

    #[test]
    fn flip_chain_values() {
        let m = flip();
        let f = Density::new(&m, vec![1.5, 0.5]).unwrap();
        assert_abs_diff_eq!(entropy(&m, &f).unwrap(), 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln(), epsilon = 1e-15);
        // Gamma(f, log f) = 1/2 * 1 * (f1 - f0)(log f1 - log f0) = 1/2 log 3 at each state.
        let (a, b) = fisher_routes(&m, &f).unwrap();
        assert_abs_diff_eq!(a, 0.5 * 3f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(b, 0.5 * 3f64.ln(), epsilon = 1e-15);
        let u = Density::uniform(&m);
        assert_eq!(entropy(&m, &u).unwrap(), 0.0);
        assert_eq!(fisher(&m, &u).unwrap(), 0.0);
    }

    #[test]
    fn density_validation() {
        let m = flip();
        assert!(Density::new(&m, vec![1.0, 0.5]).is_err());
        assert!(Density::new(&m, vec![2.5, -0.5]).is_err());
        let z = Density::new(&m, vec![2.0, 0.0]).unwrap();
        assert!(entropy(&m, &z).is_ok());
        assert!(matches!(fisher(&m, &z), Err(Error::NotPositive { index: 1, .. })));
    }

    #[test]
    fn identity_point_mass_on_s3() {
        let (m, maps) = s3();
        let f = Density::point_mass(&m, 0).unwrap();
        let gap = entropy_gap(&m, &maps, &[0.5; 3], &f).unwrap();
        assert_abs_diff_eq!(gap, 6f64.ln() - 1.5 * 3f64.ln(), epsilon = 1e-12);
        let gap = entropy_gap(&m, &maps, &[1.0; 3], &f).unwrap();
        assert_abs_diff_eq!(gap, 6f64.ln() - 3.0 * 3f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn measurable_density_single_map() {
        let (m, maps) = s3();
        let f = Density::normalize(&m, maps[0].lift(&[1.0, 2.0, 5.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(entropy_gap(&m, &maps[..1], &[1.0], &f).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(fisher_gap(&m, &maps[..1], &[1.0], &f).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn dual_gap_equality_and_sign() {
        let (m, _) = s3();
        let f = Density::random_log_normal(&m, 3, 0);
        let log_f = ln_all(f.values());
        assert_abs_diff_eq!(dual_fisher_gap(&m, &f, &log_f).unwrap(), 0.0, epsilon = 1e-12);
        let zero = vec![0.0; 6];
        assert_abs_diff_eq!(dual_fisher_gap(&m, &f, &zero).unwrap(), fisher(&m, &f).unwrap(), epsilon = 1e-14);
    }

    #[test]
    fn debruijn_flip_chain() {
        let m = flip();
        let f = Density::new(&m, vec![1.5, 0.5]).unwrap();
        let r = debruijn_check(&m, &f, 30.0).unwrap();
        assert!(r.residual.abs() <= 1e-6, "{r:?}");
        let u = debruijn_check(&m, &Density::uniform(&m), 30.0).unwrap();
        assert!(u.residual.abs() < 1e-13);
    }

    #[test]
    fn simpson_polynomial() {
        let (v, _) = adaptive_simpson(|t| Ok(t * t * t), 0.0, 2.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 4.0, epsilon = 1e-12);
        let (v, _) = adaptive_simpson(|t| Ok((-t).exp()), 0.0, 30.0, 1e-10).unwrap();
        assert_abs_diff_eq!(v, 1.0 - (-30f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn duality_verdicts() {
        let (m, maps) = s3();
        let half = ExponentVector::parse("1/2,1/2,1/2").unwrap();
        let r = duality_consistency(&m, &maps, &half, 30, 4, 1e-12).unwrap();
        assert!(r.criterion_pass && r.consistent);
        let one = ExponentVector::parse("1,1,1").unwrap();
        let r = duality_consistency(&m, &maps, &one, 30, 4, 1e-12).unwrap();
        assert!(!r.criterion_pass && r.consistent, "{r:?}");
    }
}
