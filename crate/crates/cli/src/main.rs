//! Command-line driver: instance generation, fitting, condition checks,
//! certificate verification, and Monte Carlo sweeps.
//!
//! Every command is a pure function of its config files and flags; all
//! randomness flows from seeds given explicitly in configs or arguments.
//!
//! Exit codes: 0 success, 2 config or I/O error, 3 generation or domain
//! error, 4 solver hit the iteration cap (output still written), 5 a check
//! failed (report still written).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use sparsistency::datagen::{gen_graph_instance, gen_regression_instance};
use sparsistency::{
    analytic_certificate, check_theorem, fit_l1, recommend_tau, verify_lssc, BetaGenParams,
    DesignFamily, Error as CoreError, GraphGenParams, Instance, ModelFamily, ModelSpec,
    SolverOptions, SweepConfig, VerifyBudget,
};

const SCHEMA_VERSION: u64 = 1;

const EXIT_CONFIG: u8 = 2;
const EXIT_GENERATION: u8 = 3;
const EXIT_UNCONVERGED: u8 = 4;
const EXIT_CHECK_FAILED: u8 = 5;

#[derive(Parser)]
#[command(
    name = "sparsistency",
    version,
    about = "l1-regularized estimation, recovery-condition checks, and phase-transition sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance file from a JSON config.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Replace the config seed.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Fit the l1-regularized estimator on an instance file.
    Fit {
        #[arg(long)]
        instance: PathBuf,
        /// Fixed regularization level (mutually exclusive with --recommended-c).
        #[arg(long, conflicts_with = "recommended_c")]
        tau: Option<f64>,
        /// Use the rate-based recommendation with this constant.
        #[arg(long)]
        recommended_c: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        kkt_tol: f64,
        #[arg(long, default_value_t = 20_000)]
        max_iters: usize,
    },
    /// Evaluate the seven recovery conditions at the instance truth.
    Check {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        tau: f64,
        /// Certificate slack for the gamma and graph families.
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify the analytic smoothness certificate by randomized sampling.
    VerifyLssc {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long, default_value_t = 200)]
        n_delta: usize,
        #[arg(long, default_value_t = 200)]
        n_dir: usize,
        #[arg(long)]
        seed: u64,
        /// Sampling radius for unbounded certificate neighborhoods.
        #[arg(long)]
        probe_radius: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Run a Monte Carlo sweep over an (n, p, s) grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; falls back to the config's out_dir.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Skip trials already persisted in the output directory.
        #[arg(long)]
        resume: bool,
        /// Rejected here: sweep seeds live in the config to keep manifests
        /// faithful.
        #[arg(long)]
        seed_override: Option<u64>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_CONFIG, e.to_string())
}

fn generation_err(e: CoreError) -> Failure {
    Failure::new(EXIT_GENERATION, e.to_string())
}

/// Loads a schema-versioned JSON config: the `schema` field must equal 1 and
/// unknown fields are rejected by the typed parse.
fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| config_err(format!("cannot parse {}: {e}", path.display())))?;
    let schema = value
        .get("schema")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| {
            config_err(format!(
                "{} lacks an integer \"schema\" field; expected schema {SCHEMA_VERSION}",
                path.display()
            ))
        })?;
    if schema != SCHEMA_VERSION {
        return Err(config_err(format!(
            "unsupported schema {schema} in {}; expected schema {SCHEMA_VERSION}",
            path.display()
        )));
    }
    value
        .as_object_mut()
        .expect("validated object")
        .remove("schema");
    serde_json::from_value(value)
        .map_err(|e| config_err(format!("invalid config {}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| config_err(format!("invalid instance {}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| config_err(format!("serialization: {e}")))?;
    fs::write(path, text).map_err(|e| config_err(format!("cannot write {}: {e}", path.display())))
}

/// Instance-generation config. The size fields mirror the sweep grid: for
/// graph selection `p` is the matrix dimension and `s` the off-diagonal
/// support size.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenConfig {
    seed: u64,
    model: ModelFamily,
    n: usize,
    p: usize,
    s: usize,
    #[serde(default)]
    design: DesignFamily,
    #[serde(default)]
    beta: BetaGenParams,
    #[serde(default)]
    graph: GraphGenParams,
}

fn cmd_gen(config: &Path, out: &Path, seed_override: Option<u64>) -> CmdResult {
    let mut cfg: GenConfig = load_config(config)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    let instance = match &cfg.model {
        ModelFamily::GraphSelect => {
            gen_graph_instance(cfg.p, cfg.s, cfg.n, &cfg.graph, cfg.seed).map_err(generation_err)?
        }
        family => {
            let spec = match family {
                ModelFamily::Linear { c } => ModelSpec::Linear { c: *c },
                ModelFamily::Logistic => ModelSpec::Logistic,
                // the placeholder floor is replaced by the realized one
                ModelFamily::Gamma { k } => ModelSpec::Gamma { k: *k, mu_n: 1.0 },
                ModelFamily::GraphSelect => unreachable!(),
            };
            gen_regression_instance(&spec, cfg.design, cfg.n, cfg.p, cfg.s, &cfg.beta, cfg.seed)
                .map_err(generation_err)?
        }
    };
    write_json(out, &instance)?;
    Ok(0)
}

/// Largest diagonal entry of the true covariance, for graph recommendations.
fn instance_kappa_sigma(instance: &Instance) -> Result<Option<f64>, Failure> {
    match instance.model {
        ModelSpec::GraphSelect { d } => {
            let truth = instance.truth();
            let theta = sparsistency::loss_models::unvec_row_major(&truth.beta_star, d);
            let sigma = theta
                .try_inverse()
                .ok_or_else(|| Failure::new(EXIT_GENERATION, "instance truth is singular"))?;
            Ok(Some((0..d).map(|i| sigma[(i, i)]).fold(0.0_f64, f64::max)))
        }
        _ => Ok(None),
    }
}

fn resolve_tau(
    instance: &Instance,
    tau: Option<f64>,
    recommended_c: Option<f64>,
) -> Result<f64, Failure> {
    match (tau, recommended_c) {
        (Some(t), None) => Ok(t),
        (None, Some(c)) => {
            let p_rate = match instance.model {
                ModelSpec::GraphSelect { d } => d,
                _ => instance.p,
            };
            let kappa_sigma = instance_kappa_sigma(instance)?;
            let rec = recommend_tau(&instance.model, instance.n, p_rate, 1.0, c, kappa_sigma)
                .map_err(generation_err)?;
            Ok(rec.tau)
        }
        _ => Err(config_err(
            "exactly one of --tau / --recommended-c is required",
        )),
    }
}

fn cmd_fit(
    instance_path: &Path,
    tau: Option<f64>,
    recommended_c: Option<f64>,
    out: &Path,
    kkt_tol: f64,
    max_iters: usize,
) -> CmdResult {
    let instance = load_instance(instance_path)?;
    let oracle = instance.oracle().map_err(generation_err)?;
    let tau = resolve_tau(&instance, tau, recommended_c)?;
    let opts = SolverOptions {
        kkt_tol,
        max_iters,
        ..Default::default()
    };
    let estimate = fit_l1(&oracle, tau, &opts).map_err(generation_err)?;
    let converged = estimate.converged;
    write_json(out, &estimate)?;
    Ok(if converged { 0 } else { EXIT_UNCONVERGED })
}

fn cmd_check(instance_path: &Path, tau: f64, kappa: f64, out: &Path) -> CmdResult {
    let instance = load_instance(instance_path)?;
    let oracle = instance.oracle().map_err(generation_err)?;
    let truth = instance.truth();
    let cert = analytic_certificate(&oracle, &truth.beta_star, &truth.support, kappa)
        .map_err(generation_err)?;
    let report = check_theorem(&oracle, &truth, tau, &cert).map_err(generation_err)?;
    let overall = report.overall;
    write_json(out, &serde_json::json!({ "report": report, "certificate": cert }))?;
    Ok(if overall { 0 } else { EXIT_CHECK_FAILED })
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify_lssc(
    instance_path: &Path,
    kappa: f64,
    n_delta: usize,
    n_dir: usize,
    seed: u64,
    probe_radius: Option<f64>,
    out: &Path,
    seed_override: Option<u64>,
) -> CmdResult {
    let instance = load_instance(instance_path)?;
    let oracle = instance.oracle().map_err(generation_err)?;
    let truth = instance.truth();
    let cert = analytic_certificate(&oracle, &truth.beta_star, &truth.support, kappa)
        .map_err(generation_err)?;
    let report = verify_lssc(
        &oracle,
        &truth.beta_star,
        &truth.support,
        &cert,
        VerifyBudget { n_delta, n_dir },
        seed_override.unwrap_or(seed),
        probe_radius,
    )
    .map_err(generation_err)?;
    let pass = report.pass;
    write_json(out, &report)?;
    Ok(if pass { 0 } else { EXIT_CHECK_FAILED })
}

fn cmd_sweep(
    config_path: &Path,
    out_dir: Option<PathBuf>,
    jobs: usize,
    resume: bool,
    seed_override: Option<u64>,
) -> CmdResult {
    if seed_override.is_some() {
        return Err(config_err(
            "--seed-override is rejected for sweep: the master seed lives in the config so \
             the manifest stays faithful",
        ));
    }
    let config: SweepConfig = load_config(config_path)?;
    config.validate().map_err(|e| config_err(e.to_string()))?;
    let out_dir = out_dir.or_else(|| config.out_dir.clone()).ok_or_else(|| {
        config_err("no output directory: pass --out-dir or set out_dir in the config")
    })?;
    sparsistency::sweep(&config, &out_dir, jobs, resume).map_err(|e| match e {
        CoreError::Io(_) | CoreError::Serde(_) => config_err(e.to_string()),
        other => generation_err(other),
    })?;
    Ok(0)
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Gen {
            config,
            out,
            seed_override,
        } => cmd_gen(&config, &out, seed_override),
        Command::Fit {
            instance,
            tau,
            recommended_c,
            out,
            kkt_tol,
            max_iters,
        } => cmd_fit(&instance, tau, recommended_c, &out, kkt_tol, max_iters),
        Command::Check {
            instance,
            tau,
            kappa,
            out,
        } => cmd_check(&instance, tau, kappa, &out),
        Command::VerifyLssc {
            instance,
            kappa,
            n_delta,
            n_dir,
            seed,
            probe_radius,
            out,
            seed_override,
        } => cmd_verify_lssc(
            &instance,
            kappa,
            n_delta,
            n_dir,
            seed,
            probe_radius,
            &out,
            seed_override,
        ),
        Command::Sweep {
            config,
            out_dir,
            jobs,
            resume,
            seed_override,
        } => cmd_sweep(&config, out_dir, jobs, resume, seed_override),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
