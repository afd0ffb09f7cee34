//! Subcommand implementations. Each returns its artifacts and effective
//! configuration; writing is left to the caller.

use std::path::Path;

use clap::{Args, ValueEnum};
use mdev_core::confidence::{coverage_sim, half_width, md_quantile, normal_two_sided_quantile, IntervalMethod};
use mdev_core::efficiency::{efficiency_sweep, ExperimentConfig, ExperimentReport};
use mdev_core::exit::{exit_probability, ExitOptions, Method, DEFAULT_REGIME_GUARD};
use mdev_core::geometry::{nearest_boundary, validate_b_assumptions, BodySpec, Check, ConvexBody};
use mdev_core::models::{check_a2, FamilySpec};
use mdev_core::numerics::RngStream;
use mdev_core::tilting::{DistSpec, TiltableDistribution};
use serde::Serialize;
use serde_json::json;

use crate::output::{json_bytes, Artifact, RunOutput};
use crate::CliError;

/// Reads JSON from a file, or parses the argument itself when it looks
/// like inline JSON.
fn load_json<T: serde::de::DeserializeOwned>(arg: &str) -> Result<T, CliError> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(Path::new(arg))?
    };
    Ok(serde_json::from_str(&text)?)
}

/// Accepts a bare family name or a JSON family specification.
fn load_family(arg: &str) -> Result<FamilySpec, CliError> {
    if arg.trim_start().starts_with('{') || arg.ends_with(".json") {
        return load_json(arg);
    }
    serde_json::from_value(json!({ "family": arg }))
        .map_err(|_| CliError::Usage(format!("unknown family `{arg}`")))
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0);
        let seed = nanos ^ ((std::process::id() as u64) << 32);
        eprintln!("mdev: no --seed given; using generated seed {seed}");
        seed
    })
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Debug, Args)]
pub struct QuantileArgs {
    /// Significance levels.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.01")]
    pub alphas: Vec<f64>,
}

pub fn quantile_table(a: &QuantileArgs) -> Result<RunOutput, CliError> {
    let mut rows = Vec::new();
    for &alpha in &a.alphas {
        rows.push(vec![
            alpha.to_string(),
            format!("{:.6}", md_quantile(alpha)?),
            format!("{:.6}", normal_two_sided_quantile(alpha)?),
        ]);
    }
    Ok(RunOutput {
        artifacts: vec![Artifact {
            extension: "csv",
            bytes: csv_bytes(&["alpha", "md_quantile", "normal_quantile"], rows)?,
        }],
        config: json!({ "alphas": a.alphas }),
        master_seed: None,
    })
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitMethodArg {
    Exact,
    Asymptotic,
    Mc,
    Is,
}

#[derive(Debug, Args)]
pub struct ExitProbArgs {
    /// Body specification: a JSON file or inline JSON.
    #[arg(long)]
    pub body: String,
    /// Scale t of the body tΩ.
    #[arg(long)]
    pub t: f64,
    /// Route; defaults to exact for balls, the asymptotic formula for
    /// ellipsoids in regime and importance sampling otherwise.
    #[arg(long, value_enum)]
    pub method: Option<ExitMethodArg>,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Smallest t·(distance to the boundary) accepted by the asymptotic route.
    #[arg(long, default_value_t = DEFAULT_REGIME_GUARD)]
    pub regime_guard: f64,
}

pub fn exit_prob(a: &ExitProbArgs) -> Result<RunOutput, CliError> {
    let spec: BodySpec = load_json(&a.body)?;
    let body = ConvexBody::from_spec(&spec)?;
    let method = match a.method {
        Some(ExitMethodArg::Exact) => Method::Exact,
        Some(ExitMethodArg::Asymptotic) => Method::Asymptotic,
        Some(ExitMethodArg::Mc) => Method::Mc,
        Some(ExitMethodArg::Is) => Method::Is,
        None => match body {
            ConvexBody::Ball { .. } => Method::Exact,
            _ if a.t * nearest_boundary(&body)?.min_distance >= a.regime_guard => Method::Asymptotic,
            _ => Method::Is,
        },
    };
    let randomized = matches!(method, Method::Mc | Method::Is);
    let seed = randomized.then(|| resolve_seed(a.seed));
    let opts = ExitOptions {
        n_samples: a.samples,
        seed: seed.unwrap_or(0),
        regime_guard: a.regime_guard,
    };
    let est = exit_probability(&body, a.t, method, &opts)?;
    Ok(RunOutput {
        artifacts: vec![Artifact {
            extension: "json",
            bytes: json_bytes(&est)?,
        }],
        config: json!({
            "body": spec,
            "t": a.t,
            "method": method,
            "samples": randomized.then_some(a.samples),
            "regime_guard": a.regime_guard,
        }),
        master_seed: seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CiMethodArg {
    Md,
    Normal,
    Both,
}

#[derive(Debug, Args)]
pub struct CiArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub alpha: Vec<f64>,
    #[arg(long)]
    pub n: u64,
    /// Known standard deviation for the default Gaussian family.
    #[arg(long, conflicts_with = "family")]
    pub sigma: Option<f64>,
    #[arg(long, value_enum, default_value = "both")]
    pub method: CiMethodArg,
    /// Family name or JSON specification; σ is then I(θ)^{-1/2}.
    #[arg(long)]
    pub family: Option<String>,
    /// True parameter (defaults to an interior point of the domain).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Simulated samples per interval; 0 reports half-widths only.
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn ci(a: &CiArgs) -> Result<RunOutput, CliError> {
    let spec = match (&a.family, a.sigma) {
        (Some(f), _) => load_family(f)?,
        (None, s) => FamilySpec::GaussianLocation {
            sigma2: s.unwrap_or(1.0).powi(2),
        },
    };
    let family = spec.build()?;
    if family.param_dim() != 1 {
        return Err(CliError::Usage("ci needs a one-parameter family".into()));
    }
    let theta = a.theta.unwrap_or_else(|| match spec {
        FamilySpec::GaussianLocation { .. } => 0.0,
        _ => family.theta_domain().interior_point()[0],
    });
    let sigma = family.fisher(&[theta])?.get(0, 0).powf(-0.5);
    let methods: Vec<IntervalMethod> = match a.method {
        CiMethodArg::Md => vec![IntervalMethod::ModerateDeviation],
        CiMethodArg::Normal => vec![IntervalMethod::Normal],
        CiMethodArg::Both => vec![IntervalMethod::ModerateDeviation, IntervalMethod::Normal],
    };
    let seed = (a.trials > 0).then(|| resolve_seed(a.seed));
    let mut rows = Vec::new();
    for (i, &alpha) in a.alpha.iter().enumerate() {
        for &m in &methods {
            let w = half_width(m, sigma, a.n, alpha)?;
            let (coverage, se) = match seed {
                Some(s) => {
                    // one stream per alpha: both methods see the same samples
                    let res = coverage_sim(family.as_ref(), theta, a.n, alpha, m, a.trials, &RngStream::new(s, i as u64))?;
                    (Some(res.coverage), Some(res.std_error))
                }
                None => (None, None),
            };
            rows.push(vec![alpha.to_string(), m.to_string(), w.to_string(), fmt_opt(coverage), fmt_opt(se)]);
        }
    }
    Ok(RunOutput {
        artifacts: vec![Artifact {
            extension: "csv",
            bytes: csv_bytes(&["alpha", "method", "half_width", "coverage", "std_error"], rows)?,
        }],
        config: json!({
            "alpha": a.alpha,
            "n": a.n,
            "family": spec,
            "theta": theta,
            "methods": methods,
            "trials": a.trials,
        }),
        master_seed: seed,
    })
}

#[derive(Debug, Args)]
pub struct TiltArgs {
    /// Distribution specification: a JSON file or inline JSON.
    #[arg(long)]
    pub dist: String,
    /// Target tilted mean (comma-separated coordinates of the centered
    /// variable); repeat for several targets.
    #[arg(long, value_delimiter = ',', num_args = 1, action = clap::ArgAction::Append, required = true, allow_negative_numbers = true)]
    pub v: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct TiltRecord {
    v: Vec<f64>,
    h: Vec<f64>,
    phi: f64,
    ln_phi: f64,
    rate: f64,
    lambda: f64,
    iterations: usize,
    residual: f64,
    tilted_cov: Vec<Vec<f64>>,
}

pub fn tilt(a: &TiltArgs) -> Result<RunOutput, CliError> {
    let spec: DistSpec = load_json(&a.dist)?;
    let dist = TiltableDistribution::from_spec(&spec)?;
    let d = dist.dim();
    if !a.v.len().is_multiple_of(d) {
        return Err(CliError::Usage(format!("--v values must come in groups of {d} coordinates")));
    }
    let mut solutions = Vec::new();
    for v in a.v.chunks(d) {
        let sol = dist.solve_tilt(v)?;
        let m = dist.tilted_mean(&sol.h)?;
        let residual = m.iter().zip(v).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        solutions.push(TiltRecord {
            lambda: sol.lambda(),
            v: sol.v,
            h: sol.h,
            phi: sol.phi,
            ln_phi: sol.ln_phi,
            rate: sol.rate,
            iterations: sol.iterations,
            residual,
            tilted_cov: sol.tilted_cov.rows(),
        });
    }
    let body = json!({ "distribution": spec, "center": dist.center(), "solutions": solutions });
    Ok(RunOutput {
        artifacts: vec![Artifact {
            extension: "json",
            bytes: json_bytes(&body)?,
        }],
        config: json!({ "distribution": spec, "v": a.v }),
        master_seed: None,
    })
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment configuration (JSON file).
    #[arg(long)]
    pub config: String,
    /// Overrides the configuration's master_seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn report_csv(report: &ExperimentReport) -> Result<Vec<u8>, CliError> {
    let header = [
        "n",
        "b_n",
        "c_n",
        "theta",
        "numerator",
        "numerator_std_error",
        "numerator_method",
        "denominator",
        "denominator_std_error",
        "denominator_method",
        "ratio",
        "ratio_std_error",
        "error",
    ];
    let method = |m: Method| serde_json::to_value(m).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let rows = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.b_n.to_string(),
                r.c_n.to_string(),
                r.theta.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(";"),
                fmt_opt(r.numerator.as_ref().map(|e| e.value)),
                fmt_opt(r.numerator.as_ref().map(|e| e.std_error)),
                r.numerator.as_ref().map(|e| method(e.method)).unwrap_or_default(),
                fmt_opt(r.denominator.as_ref().map(|e| e.value)),
                fmt_opt(r.denominator.as_ref().map(|e| e.std_error)),
                r.denominator.as_ref().map(|e| method(e.method)).unwrap_or_default(),
                fmt_opt(r.ratio),
                fmt_opt(r.ratio_std_error),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    csv_bytes(&header, rows)
}

pub fn simulate(a: &SimulateArgs) -> Result<RunOutput, CliError> {
    let mut config: ExperimentConfig = load_json(&a.config)?;
    if let Some(seed) = a.seed {
        config.master_seed = seed;
    }
    let report = efficiency_sweep(&config)?;
    for w in &report.warnings {
        eprintln!("mdev: warning: {w}");
    }
    Ok(RunOutput {
        artifacts: vec![
            Artifact {
                extension: "json",
                bytes: json_bytes(&report)?,
            },
            Artifact {
                extension: "csv",
                bytes: report_csv(&report)?,
            },
        ],
        config: serde_json::to_value(&config)?,
        master_seed: Some(config.master_seed),
    })
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Family name or JSON specification.
    #[arg(long)]
    pub family: String,
    /// Base parameter θ0 (defaults to an interior point of the domain).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta0: Option<Vec<f64>>,
    /// Displacement radii, applied along both directions of each axis
    /// (default: 20 log-spaced radii in [1e-3, 0.3]).
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Optional body specification to validate as well.
    #[arg(long)]
    pub body: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn check_assumptions(a: &CheckArgs) -> Result<RunOutput, CliError> {
    let spec = load_family(&a.family)?;
    let family = spec.build()?;
    let theta0 = match &a.theta0 {
        Some(t) => t.clone(),
        None => match spec {
            FamilySpec::GaussianLocation { .. } | FamilySpec::GaussianMeanVector { .. } => {
                vec![0.0; family.param_dim()]
            }
            _ => family.theta_domain().interior_point(),
        },
    };
    let grid = match &a.grid {
        None => mdev_core::models::default_u_grid(family.as_ref(), &theta0),
        Some(radii) => {
            let d = family.param_dim();
            let mut g = Vec::new();
            for &r in radii {
                for axis in 0..d {
                    for sign in [1.0, -1.0] {
                        let mut u = vec![0.0; d];
                        u[axis] = sign * r;
                        g.push(u);
                    }
                }
            }
            g
        }
    };
    let body = match &a.body {
        Some(b) => {
            let spec: BodySpec = load_json(b)?;
            Some((ConvexBody::from_spec(&spec)?, spec))
        }
        None => None,
    };
    let seed = resolve_seed(a.seed);
    let a2 = check_a2(family.as_ref(), &theta0, &grid, &RngStream::new(seed, 0))?;
    let fisher = family.fisher(&theta0)?;
    let body_report = body.as_ref().map(|(b, spec)| {
        let r = validate_b_assumptions(b);
        let pass = [r.b1, r.b2, r.b3].iter().all(|c| *c != Check::Fail);
        json!({ "spec": spec, "report": r, "pass": pass })
    });
    let pass = a2.pass && body_report.as_ref().is_none_or(|r| r["pass"] == json!(true));
    let report = json!({
        "family": spec,
        "theta0": theta0,
        "a1": { "fisher": fisher.rows(), "positive_definite": a2.fisher_positive_definite },
        "a2": a2,
        "body": body_report,
        "pass": pass,
    });
    Ok(RunOutput {
        artifacts: vec![Artifact {
            extension: "json",
            bytes: json_bytes(&report)?,
        }],
        config: json!({ "family": spec, "theta0": theta0, "grid": grid, "body": body.map(|b| b.1) }),
        master_seed: Some(seed),
    })
}
