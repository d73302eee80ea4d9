//! Direct numerical checks of the correlation inequality
//!
//! `P_t(prod f_i^{c_i} o T_i) <= prod (P_t(f_i o T_i))^{c_i}` (local) and its
//! `t -> infinity` limit `int prod f_i^{c_i} o T_i dmu <= prod (int f_i o T_i
//! dmu)^{c_i}` (global), together with the interpolation `alpha(s)` whose
//! monotonicity drives the semigroup argument.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::FiniteMarkovModel;
use crate::quotient::{quotient_model, FactorMap};
use crate::rng;

/// Slack for the monotonicity of the interpolation profile.
pub const PROFILE_SLACK: f64 = 1e-9;
pub const ASCENT_STEP: f64 = 0.1;
pub const ASCENT_STEPS: usize = 200;

/// Nonnegative block functions, one per factor map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFamily {
    pub functions: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub distribution: String,
}

impl TestFamily {
    pub fn new(functions: Vec<Vec<f64>>) -> Self {
        TestFamily { functions, seed: None, distribution: "explicit".into() }
    }

    pub fn constant(maps: &[FactorMap], value: f64) -> Self {
        Self::new(maps.iter().map(|t| vec![value; t.n_blocks()]).collect())
    }

    /// `exp(Z)` block values for i.i.d. standard normals, drawn from the
    /// stream `(seed, stream)`.
    pub fn log_normal(maps: &[FactorMap], seed: u64, stream: u64) -> Self {
        let mut rng = rng::stream_rng(seed, stream);
        TestFamily {
            functions: maps.iter().map(|t| rng::log_normals(&mut rng, t.n_blocks())).collect(),
            seed: Some(seed),
            distribution: format!("log-normal/{stream}"),
        }
    }

    pub fn validate(&self, maps: &[FactorMap]) -> Result<()> {
        if self.functions.len() != maps.len() {
            return Err(Error::DimensionMismatch { what: "family", expected: maps.len(), found: self.functions.len() });
        }
        for (f, t) in self.functions.iter().zip(maps) {
            if f.len() != t.n_blocks() {
                return Err(Error::DimensionMismatch { what: "block function", expected: t.n_blocks(), found: f.len() });
            }
            if let Some(index) = f.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::NotPositive { index, value: f[index] });
            }
        }
        Ok(())
    }

    fn lift(&self, maps: &[FactorMap]) -> Result<Vec<Vec<f64>>> {
        self.functions.iter().zip(maps).map(|(f, t)| t.lift(f)).collect()
    }
}

fn check_exponents(c: &[f64], m: usize) -> Result<()> {
    if c.len() != m {
        return Err(Error::DimensionMismatch { what: "exponent vector", expected: m, found: c.len() });
    }
    if let Some(index) = c.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::ExponentOutOfRange { index, value: c[index].to_string() });
    }
    Ok(())
}

/// `v^c` with `0^c = 0` for `c > 0` and `v^0 = 1`, in the log domain.
fn log_pow(v: f64, c: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else if v <= 0.0 {
        f64::NEG_INFINITY
    } else {
        c * v.ln()
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `(log LHS, log RHS)` of the global inequality.
pub fn global_sides(model: &FiniteMarkovModel, maps: &[FactorMap], c: &[f64], family: &TestFamily) -> Result<(f64, f64)> {
    check_exponents(c, maps.len())?;
    family.validate(maps)?;
    let mu = model.mu_f64();
    let log_lhs = log_sum_exp((0..model.n_states()).filter(|&x| mu[x] > 0.0).map(|x| {
        mu[x].ln()
            + maps
                .iter()
                .zip(&family.functions)
                .zip(c)
                .map(|((t, f), &ci)| log_pow(f[t.block_of(x)], ci))
                .sum::<f64>()
    }));
    let log_rhs = maps
        .iter()
        .zip(&family.functions)
        .zip(c)
        .map(|((t, f), &ci)| {
            let mean: f64 = t.block_measure_f64().iter().zip(f).map(|(m, v)| m * v).sum();
            log_pow(mean, ci)
        })
        .sum();
    Ok((log_lhs, log_rhs))
}

/// `log RHS - log LHS` of the global inequality; nonnegative when it holds.
/// A family with some `f_i = 0` and `c_i > 0` makes both sides vanish and
/// gets gap `+inf`.
pub fn global_gap(model: &FiniteMarkovModel, maps: &[FactorMap], c: &[f64], family: &TestFamily) -> Result<f64> {
    let (log_lhs, log_rhs) = global_sides(model, maps, c, family)?;
    if log_lhs == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(log_rhs - log_lhs)
}

fn pow_product(values: &[&[f64]], c: &[f64], x: usize) -> f64 {
    values.iter().zip(c).map(|(f, &ci)| log_pow(f[x].max(0.0), ci)).sum::<f64>().exp()
}

/// Per-state `(LHS, RHS)` of the local inequality at time `t`.
pub fn local_sides(
    model: &FiniteMarkovModel,
    maps: &[FactorMap],
    c: &[f64],
    family: &TestFamily,
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_exponents(c, maps.len())?;
    family.validate(maps)?;
    let lifted = family.lift(maps)?;
    let refs: Vec<&[f64]> = lifted.iter().map(Vec::as_slice).collect();
    let n = model.n_states();
    let product: Vec<f64> = (0..n).map(|x| pow_product(&refs, c, x)).collect();
    let lhs = model.semigroup_apply(t, &product)?;
    let evolved = lifted.iter().map(|f| model.semigroup_apply(t, f)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[f64]> = evolved.iter().map(Vec::as_slice).collect();
    let rhs = (0..n).map(|x| pow_product(&refs, c, x)).collect();
    Ok((lhs, rhs))
}

/// `RHS(x) - LHS(x)` of the local inequality for every state.
pub fn local_gaps(model: &FiniteMarkovModel, maps: &[FactorMap], c: &[f64], family: &TestFamily, t: f64) -> Result<Vec<f64>> {
    let (lhs, rhs) = local_sides(model, maps, c, family, t)?;
    Ok(rhs.iter().zip(&lhs).map(|(r, l)| r - l).collect())
}

pub fn local_gap(
    model: &FiniteMarkovModel,
    maps: &[FactorMap],
    c: &[f64],
    family: &TestFamily,
    t: f64,
    x: usize,
) -> Result<f64> {
    if x >= model.n_states() {
        return Err(Error::IndexOutOfRange { index: x, n: model.n_states() });
    }
    Ok(local_gaps(model, maps, c, family, t)?[x])
}

/// `max |P_t(f o T) - (Q_t f) o T|` where `Q_t` is the semigroup of the
/// quotient kernel.
pub fn quotient_consistency(model: &FiniteMarkovModel, map: &FactorMap, f: &[f64], t: f64) -> Result<f64> {
    let quotient = quotient_model(model, map)?;
    let upstairs = model.semigroup_apply(t, &map.lift(f)?)?;
    let downstairs = map.lift(&quotient.semigroup_apply(t, f)?)?;
    Ok(upstairs.iter().zip(&downstairs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationProfile {
    pub s: Vec<f64>,
    /// `alpha[k][x]` is `alpha(s_k)` at state `x`.
    pub alpha: Vec<Vec<f64>>,
}

impl InterpolationProfile {
    /// Largest increase `alpha(s_{k+1})(x) - alpha(s_k)(x)` over the grid.
    pub fn max_increase(&self) -> f64 {
        self.alpha
            .windows(2)
            .flat_map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_nonincreasing(&self, slack: f64) -> bool {
        self.max_increase() <= slack
    }
}

/// `alpha(s) = P_s(exp(sum c_i log P_{t-s}(f_i o T_i)))` on a uniform grid of
/// `[0, t]`. Requires strictly positive block values.
pub fn interpolation_profile(
    model: &FiniteMarkovModel,
    maps: &[FactorMap],
    c: &[f64],
    family: &TestFamily,
    t: f64,
    grid_size: usize,
) -> Result<InterpolationProfile> {
    check_exponents(c, maps.len())?;
    family.validate(maps)?;
    if grid_size < 2 {
        return Err(Error::InvalidParameter("grid needs at least two points".into()));
    }
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    for f in &family.functions {
        if let Some(index) = f.iter().position(|v| *v <= 0.0) {
            return Err(Error::NotPositive { index, value: f[index] });
        }
    }
    let lifted = family.lift(maps)?;
    let n = model.n_states();
    let s: Vec<f64> = (0..grid_size).map(|k| t * k as f64 / (grid_size - 1) as f64).collect();
    let alpha = s
        .iter()
        .map(|&sk| {
            let evolved = lifted.iter().map(|f| model.semigroup_apply(t - sk, f)).collect::<Result<Vec<_>>>()?;
            let inner: Vec<f64> = (0..n)
                .map(|x| evolved.iter().zip(c).map(|(f, ci)| ci * f[x].ln()).sum::<f64>().exp())
                .collect();
            model.semigroup_apply(sk, &inner)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InterpolationProfile { s, alpha })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialResult {
    pub min_gap: f64,
    pub worst_family: TestFamily,
    pub restarts: usize,
}

/// Gradient of `log LHS - log RHS` with respect to `u_i = log f_i` for one
/// map: `c_i (pi(b) - nu_i(b))`, where `pi` is the LHS-weighted block mass
/// and `nu_i` the RHS-weighted one.
fn ascent_gradient(model: &FiniteMarkovModel, maps: &[FactorMap], c: &[f64], u: &[Vec<f64>], i: usize) -> Vec<f64> {
    let mu = model.mu_f64();
    let log_w: Vec<f64> = (0..model.n_states())
        .map(|x| mu[x].ln() + maps.iter().zip(u).zip(c).map(|((t, ui), ci)| ci * ui[t.block_of(x)]).sum::<f64>())
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let map = &maps[i];
    let mut pi = vec![0.0; map.n_blocks()];
    for (x, lw) in log_w.iter().enumerate() {
        pi[map.block_of(x)] += (lw - max).exp();
    }
    let total: f64 = pi.iter().sum();
    let umax = u[i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut nu: Vec<f64> = map.block_measure_f64().iter().zip(&u[i]).map(|(m, v)| m * (v - umax).exp()).collect();
    let nu_total: f64 = nu.iter().sum();
    nu.iter_mut().for_each(|v| *v /= nu_total);
    pi.iter().zip(&nu).map(|(p, q)| c[i] * (p / total - q)).collect()
}

fn family_from_logs(u: &[Vec<f64>]) -> TestFamily {
    TestFamily::new(u.iter().map(|ui| ui.iter().map(|v| v.exp()).collect()).collect())
}

/// Indicator of the largest block value of each map.
fn rounded_family(u: &[Vec<f64>]) -> TestFamily {
    TestFamily::new(
        u.iter()
            .map(|ui| {
                let best = (0..ui.len()).fold(0, |b, k| if ui[k] > ui[b] { k } else { b });
                (0..ui.len()).map(|k| f64::from(k == best)).collect()
            })
            .collect(),
    )
}

fn ascend(
    model: &FiniteMarkovModel,
    maps: &[FactorMap],
    c: &[f64],
    seed: u64,
    restart: usize,
) -> Result<(f64, TestFamily)> {
    let mut rng = rng::stream_rng(seed, restart as u64);
    let mut u: Vec<Vec<f64>> = maps.iter().map(|t| rng::normals(&mut rng, t.n_blocks())).collect();
    for _ in 0..ASCENT_STEPS {
        for i in 0..maps.len() {
            let grad = ascent_gradient(model, maps, c, &u, i);
            for (v, g) in u[i].iter_mut().zip(grad) {
                *v += ASCENT_STEP * g;
            }
            let mean = u[i].iter().sum::<f64>() / u[i].len() as f64;
            u[i].iter_mut().for_each(|v| *v -= mean);
        }
    }
    let mut best = family_from_logs(&u);
    let mut best_gap = global_gap(model, maps, c, &best)?;
    let rounded = rounded_family(&u);
    let rounded_gap = global_gap(model, maps, c, &rounded)?;
    if rounded_gap < best_gap {
        best = rounded;
        best_gap = rounded_gap;
    }
    best.seed = Some(seed);
    best.distribution = format!("ascent/{restart}");
    Ok((best_gap, best))
}

/// Multiplicative block-coordinate ascent on `log LHS - log RHS` from
/// `restarts` random log-normal starts (step [`ASCENT_STEP`], [`ASCENT_STEPS`]
/// sweeps). Each restart also tries the indicator of its largest block values.
/// Returns the most violating family found.
pub fn adversarial_search(
    model: &FiniteMarkovModel,
    maps: &[FactorMap],
    c: &[f64],
    restarts: usize,
    seed: u64,
) -> Result<AdversarialResult> {
    check_exponents(c, maps.len())?;
    if restarts == 0 {
        return Err(Error::InvalidParameter("adversarial search needs at least one restart".into()));
    }
    let results = (0..restarts).into_par_iter().map(|r| ascend(model, maps, c, seed, r)).collect::<Result<Vec<_>>>()?;
    let (min_gap, worst_family) = results
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .expect("at least one restart");
    Ok(AdversarialResult { min_gap, worst_family, restarts })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    /// Times at which the local inequality is checked.
    pub local_times: Vec<f64>,
    /// Horizon of the interpolation check; `None` skips it.
    pub interpolation_t: Option<f64>,
    pub grid_size: usize,
    /// A gap below `-tolerance` counts as a violation.
    pub tolerance: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { local_times: vec![0.5, 2.0], interpolation_t: Some(2.0), grid_size: 21, tolerance: 1e-12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trials: usize,
    pub seed: u64,
    pub min_global_gap: Option<f64>,
    pub min_local_gap: Option<f64>,
    pub max_interpolation_increase: Option<f64>,
    pub n_violations: usize,
    pub worst_family: Option<TestFamily>,
}

struct TrialOutcome {
    global: f64,
    local: f64,
    increase: Option<f64>,
    family: TestFamily,
}

fn run_trial(model: &FiniteMarkovModel, maps: &[FactorMap], c: &[f64], seed: u64, k: usize, cfg: &SuiteConfig) -> Result<TrialOutcome> {
    let family = TestFamily::log_normal(maps, seed, k as u64);
    let global = global_gap(model, maps, c, &family)?;
    let mut local = f64::INFINITY;
    for &t in &cfg.local_times {
        local = local_gaps(model, maps, c, &family, t)?.into_iter().fold(local, f64::min);
    }
    let increase = match cfg.interpolation_t {
        Some(t) => Some(interpolation_profile(model, maps, c, &family, t, cfg.grid_size)?.max_increase()),
        None => None,
    };
    Ok(TrialOutcome { global, local, increase, family })
}

pub fn random_trial_suite(model: &FiniteMarkovModel, maps: &[FactorMap], c: &[f64], trials: usize, seed: u64) -> Result<TrialReport> {
    random_trial_suite_with(model, maps, c, trials, seed, &SuiteConfig::default())
}

/// Global, local and interpolation checks on `trials` log-normal families.
/// Trial `k` draws from RNG stream `k`, so the report depends only on `seed`.
pub fn random_trial_suite_with(
    model: &FiniteMarkovModel,
    maps: &[FactorMap],
    c: &[f64],
    trials: usize,
    seed: u64,
    cfg: &SuiteConfig,
) -> Result<TrialReport> {
    check_exponents(c, maps.len())?;
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|k| run_trial(model, maps, c, seed, k, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut report = TrialReport {
        trials,
        seed,
        min_global_gap: None,
        min_local_gap: None,
        max_interpolation_increase: None,
        n_violations: 0,
        worst_family: None,
    };
    for o in outcomes {
        let violated = o.global < -cfg.tolerance
            || o.local < -cfg.tolerance
            || o.increase.is_some_and(|v| v > PROFILE_SLACK);
        report.n_violations += usize::from(violated);
        if report.min_global_gap.is_none_or(|g| o.global < g) {
            report.min_global_gap = Some(o.global);
            report.worst_family = Some(o.family);
        }
        report.min_local_gap = Some(report.min_local_gap.map_or(o.local, |g| g.min(o.local)));
        if let Some(v) = o.increase {
            report.max_interpolation_increase = Some(report.max_interpolation_increase.map_or(v, |g| g.max(v)));
        }
    }
    Ok(report)
}
