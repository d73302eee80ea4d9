//! `blv`: command-line front end for the verification workbench.

mod source;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use blv_core::bl::{self, ExponentVector};
use blv_core::entropy::{self, Density};
use blv_core::geo::sphere::{self, Polynomial};
use blv_core::geo::{self, SubspaceFile};
use blv_core::io::ModelDocument;
use blv_core::quotient::check_commutation;
use blv_core::rational::{self, Rational};
use blv_core::verify::{self, SuiteConfig};
use blv_core::{Error, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use source::SourceArgs;

#[derive(Parser, Debug)]
#[command(name = "blv", version, about = "Brascamp-Lieb and correlation inequality checks on finite Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Threshold for floating-point verdicts; exact checks ignore it.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tolerance: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that each map commutes with the kernel.
    CheckCommute {
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Edge criterion (exact) plus the pointwise inequality on random inputs.
    CheckBl {
        #[command(flatten)]
        source: SourceArgs,
        /// Exponents as rationals, e.g. `1/2,1/2,1/2`; one value is repeated.
        #[arg(long)]
        c: String,
        #[arg(long, default_value_t = 100)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Height of the ramp functions used when the criterion fails.
        #[arg(long, default_value_t = 3.0)]
        theta: f64,
    },
    /// Maximize a weighted sum of exponents over the feasible polytope.
    Optimize {
        #[command(flatten)]
        source: SourceArgs,
        /// Nonnegative rational weights; defaults to all ones.
        #[arg(long)]
        weights: Option<String>,
    },
    /// Random, adversarial and interpolation checks of the inequality.
    Verify {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        c: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Adversarial restarts; defaults to 20, or 0 when `--trials 0`.
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Horizon of the interpolation check; 0 disables it.
        #[arg(long, default_value_t = 2.0)]
        t: f64,
        #[arg(long, default_value_t = 21)]
        grid: usize,
    },
    /// Entropy and Fisher information gaps, one JSON line per trial.
    #[command(alias = "entropy-report")]
    Entropy {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        c: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also run the de Bruijn check on the first density up to this time.
        #[arg(long)]
        debruijn: Option<f64>,
        /// Also compare the correlation and entropy verdicts.
        #[arg(long)]
        consistency: bool,
    },
    /// Decompositions of the identity and sphere quadrature.
    Geo {
        #[command(subcommand)]
        command: GeoCommand,
    },
    /// Build example models.
    Zoo {
        #[command(subcommand)]
        command: ZooCommand,
    },
}

#[derive(Subcommand, Debug)]
enum GeoCommand {
    /// Check `sum c_i P_i <= Id` and its lift to so(n).
    Check {
        #[arg(long)]
        subspaces: PathBuf,
        #[arg(long)]
        c: String,
    },
    /// Sphere inequality for polynomial functions of the coordinates.
    Sphere {
        #[arg(long)]
        n: usize,
        /// Coefficients of `1, u, u^2, ...`; repeat once per coordinate or
        /// give once for all.
        #[arg(long, required = true)]
        poly: Vec<String>,
        #[arg(long, default_value = "1/2")]
        c: String,
    },
}

#[derive(Subcommand, Debug)]
enum ZooCommand {
    /// Emit a zoo model as a JSON document.
    Build {
        /// `symmetric-group`, `slice`, `product` or `cyclic`.
        kind: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        sizes: Option<String>,
        #[arg(long)]
        generators: Option<String>,
    },
}

enum Outcome {
    Pass,
    Violation,
}

struct Writer {
    out: Box<dyn Write>,
}

impl Writer {
    fn new(path: Option<&PathBuf>) -> Result<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(std::fs::File::create(p).map_err(|source| Error::Io { path: p.display().to_string(), source })?),
            None => Box::new(std::io::stdout().lock()),
        };
        Ok(Writer { out })
    }

    fn pretty<T: Serialize>(&mut self, v: &T) -> Result<()> {
        let s = serde_json::to_string_pretty(v)?;
        writeln!(self.out, "{s}").map_err(|source| Error::Io { path: "output".into(), source })
    }

    fn line<T: Serialize>(&mut self, v: &T) -> Result<()> {
        let s = serde_json::to_string(v)?;
        writeln!(self.out, "{s}").map_err(|source| Error::Io { path: "output".into(), source })
    }
}

fn exponents(s: &str, m: usize) -> Result<Vec<Rational>> {
    let mut c = rational::parse_rational_list(s)?;
    if c.len() == 1 && m > 1 {
        c = vec![c[0].clone(); m];
    }
    Ok(c)
}

fn verdict(ok: bool) -> Outcome {
    if ok {
        Outcome::Pass
    } else {
        Outcome::Violation
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    let tol = cli.tolerance;
    let mut w = Writer::new(cli.output.as_ref())?;
    match &cli.command {
        Command::CheckCommute { source } => {
            let loaded = source::load(source)?;
            let reports = loaded.maps.iter().map(|t| check_commutation(&loaded.model, t)).collect::<Result<Vec<_>>>()?;
            let all = reports.iter().all(|r| r.commutes);
            w.pretty(&json!({ "all_commute": all, "maps": reports }))?;
            Ok(verdict(all))
        }
        Command::CheckBl { source, c, draws, seed, theta } => {
            let loaded = source::load(source)?;
            let c = ExponentVector::new(exponents(c, loaded.maps.len())?)?;
            let system = bl::edge_active_sets(&loaded.model, &loaded.maps)?;
            let edge = bl::check_edge_criterion(&system, &c)?;
            let max_residual = bl::random_pointwise_check(&loaded.model, &loaded.maps, &c.to_f64(), *draws, *seed)?;
            let ramp =
                if edge.pass { None } else { bl::ramp_falsifier(&loaded.model, &loaded.maps, &system, &c, *theta)? };
            let pointwise_pass = *draws == 0 || max_residual <= tol;
            let pass = edge.pass && pointwise_pass;
            w.pretty(&json!({
                "pass": pass,
                "maps": system.map_names(),
                "c": c,
                "edge": edge,
                "pointwise": { "draws": draws, "seed": seed, "max_residual": finite_or_null(max_residual), "pass": pointwise_pass },
                "ramp": ramp,
            }))?;
            Ok(verdict(pass))
        }
        Command::Optimize { source, weights } => {
            let loaded = source::load(source)?;
            let m = loaded.maps.len();
            let weights = match weights {
                Some(s) => exponents(s, m)?,
                None => vec![rational::one(); m],
            };
            let system = bl::edge_active_sets(&loaded.model, &loaded.maps)?;
            let opt = bl::optimize_exponents(&system, &weights)?;
            w.pretty(&json!({ "maps": system.map_names(), "optimum": opt }))?;
            Ok(Outcome::Pass)
        }
        Command::Verify { source, c, trials, restarts, seed, t, grid } => {
            let loaded = source::load(source)?;
            let c: Vec<f64> = exponents(c, loaded.maps.len())?.iter().map(rational::to_f64).collect();
            let cfg = SuiteConfig {
                interpolation_t: (*t > 0.0).then_some(*t),
                grid_size: *grid,
                tolerance: tol,
                ..SuiteConfig::default()
            };
            let report = verify::random_trial_suite_with(&loaded.model, &loaded.maps, &c, *trials, *seed, &cfg)?;
            let restarts = restarts.unwrap_or(if *trials == 0 { 0 } else { 20 });
            let adversarial = if restarts > 0 {
                Some(verify::adversarial_search(&loaded.model, &loaded.maps, &c, restarts, *seed)?)
            } else {
                None
            };
            let ok = report.n_violations == 0 && adversarial.as_ref().is_none_or(|a| a.min_gap >= -tol);
            let mut value = serde_json::to_value(&report)?;
            value["adversarial"] = serde_json::to_value(&adversarial)?;
            value["pass"] = json!(ok);
            w.pretty(&value)?;
            Ok(verdict(ok))
        }
        Command::Entropy { source, c, trials, seed, debruijn, consistency } => {
            let loaded = source::load(source)?;
            let exact = ExponentVector::new(exponents(c, loaded.maps.len())?)?;
            let cf = exact.to_f64();
            let rows = entropy::entropy_trials(&loaded.model, &loaded.maps, &cf, *trials, *seed)?;
            let mut violations = 0;
            for r in &rows {
                violations += usize::from(r.entropy_gap < -tol || r.fisher_gap < -tol);
                w.line(r)?;
            }
            let mut ok = violations == 0;
            let min = |f: fn(&entropy::EntropyTrial) -> f64| rows.iter().map(f).reduce(f64::min);
            if let Some(t_max) = debruijn {
                let f = Density::random_log_normal(&loaded.model, *seed, 0);
                let r = entropy::debruijn_check(&loaded.model, &f, *t_max)?;
                ok &= r.residual.abs() <= 1e-6;
                w.line(&json!({ "debruijn": r }))?;
            }
            if *consistency {
                let r = entropy::duality_consistency(&loaded.model, &loaded.maps, &exact, *trials, *seed, tol)?;
                ok &= r.consistent;
                w.line(&json!({ "consistency": r }))?;
            }
            w.line(&json!({ "summary": {
                "trials": trials,
                "seed": seed,
                "min_entropy_gap": min(|r| r.entropy_gap),
                "min_fisher_gap": min(|r| r.fisher_gap),
                "n_violations": violations,
                "pass": ok,
            }}))?;
            Ok(verdict(ok))
        }
        Command::Geo { command: GeoCommand::Check { subspaces, c } } => {
            let text = std::fs::read_to_string(subspaces)
                .map_err(|source| Error::Io { path: subspaces.display().to_string(), source })?;
            let file: SubspaceFile = serde_json::from_str(&text)?;
            let specs = file.build()?;
            let c: Vec<f64> = exponents(c, specs.len())?.iter().map(rational::to_f64).collect();
            let psd = geo::psd_decomposition_check(&specs, &c)?;
            let lift = match geo::lie_lift_check(&specs, &c) {
                Ok(v) => Some(v),
                Err(Error::PremiseFails { .. }) => None,
                Err(e) => return Err(e),
            };
            let ok = psd.pass && lift.as_ref().is_some_and(|l| l.pass);
            w.pretty(&json!({ "pass": ok, "psd": psd, "lift": lift }))?;
            Ok(verdict(ok))
        }
        Command::Geo { command: GeoCommand::Sphere { n, poly, c } } => {
            let mut family = poly
                .iter()
                .map(|p| Ok(Polynomial(rational::parse_rational_list(p)?.iter().map(rational::to_f64).collect())))
                .collect::<Result<Vec<_>>>()?;
            if family.len() == 1 {
                family = vec![family[0].clone(); *n];
            }
            let c: Vec<f64> = exponents(c, *n)?.iter().map(rational::to_f64).collect();
            let r = sphere::sphere_quadrature_check(*n, &family, &c)?;
            let ok = r.gap >= -tol;
            w.pretty(&json!({ "pass": ok, "report": r }))?;
            Ok(verdict(ok))
        }
        Command::Zoo { command: ZooCommand::Build { kind, n, k, sizes, generators } } => {
            let args = SourceArgs {
                source: format!("zoo:{kind}"),
                n: *n,
                k: *k,
                sizes: sizes.clone(),
                generators: generators.clone(),
                maps: None,
            };
            let built = source::zoo_spec(kind, &args)?.build()?;
            w.pretty(&ModelDocument::from_model(&built.model, &built.maps))?;
            Ok(Outcome::Pass)
        }
    }
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("BLV_THREADS") {
        let n: usize = v.parse().map_err(|_| Error::Parse(format!("BLV_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match configure_threads().and_then(|()| run(&cli)) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Violation) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
