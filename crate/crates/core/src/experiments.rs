//! Monte Carlo recovery experiments over `(n, p, s)` grids.
//!
//! Each trial is a pure function of `(config, cell index, trial index)`:
//! per-trial seeds come from [`trial_seed`], so tables are reproducible
//! regardless of worker count or completion order. Sweeps persist per-trial
//! progress and can resume from a partial run; the final CSV is byte-stable.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::concentration::recommend_tau;
use crate::conditions::{check_theorem, GroundTruth};
use crate::datagen::{
    gen_graph_samples, gen_graph_truth, gen_graph_truth_chain, trial_seed, BetaGenParams,
    DesignFamily, GraphGenParams, GraphPattern,
};
use crate::error::{Error, Result};
use crate::loss_models::{Dataset, LossOracle, ModelFamily, ModelSpec, SmoothLoss};
use crate::lssc::analytic_certificate;
use crate::solver::{
    fit_l1, fit_restricted, recovery_assess, support_of, witness_check, SolverOptions,
};

/// How each trial picks its regularization level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum TauPolicy {
    /// Rate-based recommendation with multiplier `c`.
    Recommended { c: f64 },
    Fixed { tau: f64 },
    /// Half the largest level passing the theorem's regularization bound,
    /// computed at the realized truth; capped by the level at which the
    /// minimum-signal condition would fail, which also covers the `K = 0`
    /// case where the theorem bound is infinite.
    OracleTheorem,
}

/// One grid cell: sample count, dimension, sparsity. For graph selection `p`
/// is the matrix dimension and `s` the off-diagonal support size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub p: usize,
    pub s: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub model: ModelFamily,
    #[serde(default)]
    pub design: DesignFamily,
    pub grid: Vec<Cell>,
    pub trials: usize,
    pub tau: TauPolicy,
    #[serde(default)]
    pub beta: BetaGenParams,
    #[serde(default)]
    pub graph: GraphGenParams,
    pub master_seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Certificate slack for theorem checks.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Write the per-trial JSONL log next to the CSV.
    #[serde(default)]
    pub log_trials: bool,
    /// Run the restricted fit and the witness inequality per trial.
    #[serde(default)]
    pub log_witness: bool,
    /// Evaluate the seven recovery conditions per trial.
    #[serde(default)]
    pub check_theorem: bool,
}

fn default_kappa() -> f64 {
    1.0
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidData("sweep grid is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidData("sweeps need at least one trial per cell".into()));
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidData("kappa must be positive".into()));
        }
        Ok(())
    }
}

/// Result of a single generated-and-solved trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub cell: usize,
    pub trial: usize,
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub tau: f64,
    pub support_match: bool,
    pub sign_match: bool,
    pub l2_error: f64,
    pub solver_iterations: usize,
    pub converged: bool,
    /// Witness inequality verdict, when witness logging is on.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness_held: Option<bool>,
    /// Whether the full and restricted fits share a support.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness_supports_match: Option<bool>,
    /// Per-condition verdicts, when theorem checking is on.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub conditions: Option<[bool; 7]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub conditions_overall: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub r_n: Option<f64>,
    /// Wall time is inherently nondeterministic and excluded from the
    /// serialized outcome so logs stay byte-reproducible.
    #[serde(skip)]
    pub wall_ms: u64,
}

/// Per-cell aggregate with a Wilson 95% interval on the success probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: String,
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub tau: f64,
    pub trials: usize,
    pub successes: usize,
    pub prob: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub outcomes: Vec<TrialOutcome>,
}

/// Wilson 95% score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let z = 1.959963984540054_f64;
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn materialize_spec(family: &ModelFamily, cell: Cell) -> ModelSpec {
    match family {
        ModelFamily::Linear { c } => ModelSpec::Linear { c: *c },
        ModelFamily::Logistic => ModelSpec::Logistic,
        // predictor floor recorded at generation time
        ModelFamily::Gamma { k } => ModelSpec::Gamma { k: *k, mu_n: 1.0 },
        ModelFamily::GraphSelect => ModelSpec::GraphSelect { d: cell.p },
    }
}

fn choose_tau(
    policy: TauPolicy,
    spec: &ModelSpec,
    cell: Cell,
    oracle: &LossOracle,
    truth: &GroundTruth,
    kappa: f64,
    kappa_sigma: Option<f64>,
) -> Result<f64> {
    match policy {
        TauPolicy::Fixed { tau } => Ok(tau),
        TauPolicy::Recommended { c } => {
            Ok(recommend_tau(spec, cell.n, cell.p, 1.0, c, kappa_sigma)?.tau)
        }
        TauPolicy::OracleTheorem => {
            let h = oracle.hessian(&truth.beta_star)?;
            let lambda = crate::conditions::restricted_hessian_lambda_min(&h, &truth.support)?;
            let alpha = crate::conditions::irrepresentability_alpha(&h, &truth.support)?;
            if lambda <= 0.0 || alpha <= 0.0 {
                // theorem inapplicable: fall back to the nominal rate
                return Ok(((cell.p as f64).ln() / cell.n as f64).sqrt());
            }
            let cert = analytic_certificate(oracle, &truth.beta_star, &truth.support, kappa)?;
            let (thm, _) = crate::conditions::tau_upper_bounds(alpha, lambda, truth.s, cert.k);
            let beta_min_cap =
                truth.beta_min * lambda / ((alpha + 4.0) * (truth.s as f64).sqrt());
            Ok(0.5 * thm.min(beta_min_cap))
        }
    }
}

/// Generates, solves, and assesses one trial. Deterministic in
/// `(config, cell_idx, trial_idx)`.
pub fn run_trial(config: &SweepConfig, cell_idx: usize, trial_idx: usize) -> Result<TrialOutcome> {
    let start = Instant::now();
    let cell = config.grid[cell_idx];
    let seed = trial_seed(config.master_seed, cell_idx as u64, trial_idx as u64);
    let spec = materialize_spec(&config.model, cell);

    let (oracle, truth, spec, kappa_sigma, graph_offdiag): (
        LossOracle,
        GroundTruth,
        ModelSpec,
        Option<f64>,
        Option<Vec<usize>>,
    ) = match &spec {
        ModelSpec::GraphSelect { d } => {
            let graph_truth = match config.graph.pattern {
                GraphPattern::Chain => {
                    gen_graph_truth_chain(*d, config.graph.rho_target, trial_seed(seed, 1, 1))
                }
                GraphPattern::RandomPairs => {
                    gen_graph_truth(*d, cell.s, config.graph.rho_target, trial_seed(seed, 1, 1))
                }
            };
            let (_, sigma_hat) =
                gen_graph_samples(&graph_truth.sigma_star, cell.n, trial_seed(seed, 1, 2))?;
            let oracle = LossOracle::new(
                spec.clone(),
                Dataset::covariance(sigma_hat, cell.n)?,
            )?;
            let offdiag: Vec<usize> = (0..d * d)
                .filter(|idx| idx / d != idx % d)
                .collect();
            (
                oracle,
                graph_truth.ground_truth(),
                spec.clone(),
                Some(graph_truth.kappa_sigma),
                Some(offdiag),
            )
        }
        _ => {
            let instance = crate::datagen::gen_regression_instance(
                &spec,
                config.design,
                cell.n,
                cell.p,
                cell.s,
                &config.beta,
                seed,
            )?;
            let oracle = instance.oracle()?;
            let truth = instance.truth();
            (oracle, truth, instance.model.clone(), None, None)
        }
    };

    let tau = choose_tau(config.tau, &spec, cell, &oracle, &truth, config.kappa, kappa_sigma)?;
    let opts = SolverOptions::default();
    let estimate = fit_l1(&oracle, tau, &opts)?;

    // headline success metric: exact sign recovery (off-diagonal entries
    // only for graph selection, whose diagonal is never zero)
    let (support_match, sign_match, l2_error) = match &graph_offdiag {
        Some(offdiag) => {
            let rec = recovery_assess(&estimate.beta, &truth);
            let sup = offdiag.iter().all(|&j| {
                (estimate.beta[j] != 0.0) == (truth.beta_star[j] != 0.0)
            });
            let sgn = offdiag.iter().all(|&j| {
                sign_of(estimate.beta[j]) == sign_of(truth.beta_star[j])
            });
            (sup, sgn, rec.l2_error)
        }
        None => {
            let rec = recovery_assess(&estimate.beta, &truth);
            (rec.support_match, rec.sign_match, rec.l2_error)
        }
    };
    // non-convergence counts as a recorded failure
    let (support_match, sign_match) = if estimate.converged {
        (support_match, sign_match)
    } else {
        (false, false)
    };

    let (witness_held, witness_supports_match) = if config.log_witness {
        let restricted = fit_restricted(&oracle, &truth.support, tau, &opts)?;
        let w = witness_check(&oracle, &restricted.beta, &truth.support, tau)?;
        let agree = support_of(&estimate.beta) == support_of(&restricted.beta);
        (Some(w.holds), Some(agree))
    } else {
        (None, None)
    };

    let (conditions, conditions_overall, r_n) = if config.check_theorem {
        let cert = analytic_certificate(&oracle, &truth.beta_star, &truth.support, config.kappa)?;
        let report = check_theorem(&oracle, &truth, tau, &cert)?;
        (
            Some(report.verdicts),
            Some(report.overall),
            Some(report.r_n),
        )
    } else {
        (None, None, None)
    };

    Ok(TrialOutcome {
        cell: cell_idx,
        trial: trial_idx,
        n: cell.n,
        p: cell.p,
        s: cell.s,
        tau,
        support_match,
        sign_match,
        l2_error,
        solver_iterations: estimate.iterations,
        converged: estimate.converged,
        witness_held,
        witness_supports_match,
        conditions,
        conditions_overall,
        r_n,
        wall_ms: start.elapsed().as_millis() as u64,
    })
}

fn sign_of(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn progress_path(out_dir: &Path) -> PathBuf {
    out_dir.join(".progress.jsonl")
}

fn load_progress(out_dir: &Path) -> Result<Vec<TrialOutcome>> {
    let path = progress_path(out_dir);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path)?;
    let mut outcomes = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        // a torn final line from an interrupted run is skipped, not fatal
        match serde_json::from_str::<TrialOutcome>(line) {
            Ok(o) => outcomes.push(o),
            Err(_) => break,
        }
    }
    Ok(outcomes)
}

/// Runs every `(cell, trial)` pair, optionally resuming from persisted
/// progress, and writes `sweep.csv`, `manifest.json`, and (optionally)
/// `trials.jsonl` into `out_dir`. The CSV and JSONL bytes depend only on the
/// config, not on `jobs` or interruption history.
pub fn sweep(config: &SweepConfig, out_dir: &Path, jobs: usize, resume: bool) -> Result<SweepTable> {
    config.validate()?;
    let started = Instant::now();
    fs::create_dir_all(out_dir)?;

    let total = config.grid.len() * config.trials;
    let mut done: Vec<Option<TrialOutcome>> = vec![None; total];
    let index_of = |cell: usize, trial: usize| cell * config.trials + trial;

    if resume {
        for outcome in load_progress(out_dir)? {
            if outcome.cell < config.grid.len() && outcome.trial < config.trials {
                let slot = index_of(outcome.cell, outcome.trial);
                done[slot] = Some(outcome);
            }
        }
    }

    let pending: Vec<(usize, usize)> = (0..config.grid.len())
        .flat_map(|c| (0..config.trials).map(move |t| (c, t)))
        .filter(|&(c, t)| done[index_of(c, t)].is_none())
        .collect();

    let progress = Mutex::new(fs::OpenOptions::new().create(true).append(true).open(progress_path(out_dir))?);
    let fresh: Vec<TrialOutcome> = {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::InvalidData(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            pending
                .par_iter()
                .map(|&(c, t)| {
                    let outcome = run_trial(config, c, t)?;
                    {
                        let mut file = progress.lock().unwrap();
                        let line = serde_json::to_string(&outcome)?;
                        writeln!(file, "{line}")?;
                        file.flush()?;
                    }
                    Ok(outcome)
                })
                .collect::<Result<Vec<_>>>()
        })?
    };
    for outcome in fresh {
        let slot = index_of(outcome.cell, outcome.trial);
        done[slot] = Some(outcome);
    }
    let outcomes: Vec<TrialOutcome> = done.into_iter().map(|o| o.expect("all trials ran")).collect();

    // rows sorted by (p, s, n)
    let mut order: Vec<usize> = (0..config.grid.len()).collect();
    order.sort_by_key(|&c| {
        let cell = config.grid[c];
        (cell.p, cell.s, cell.n)
    });
    let mut rows = Vec::with_capacity(config.grid.len());
    for &c in &order {
        let cell = config.grid[c];
        let cell_outcomes: Vec<&TrialOutcome> =
            outcomes.iter().filter(|o| o.cell == c).collect();
        let successes = cell_outcomes.iter().filter(|o| o.sign_match).count();
        let tau_mean = cell_outcomes.iter().map(|o| o.tau).sum::<f64>()
            / cell_outcomes.len().max(1) as f64;
        let (lo, hi) = wilson_interval(successes, config.trials);
        rows.push(SweepRow {
            model: config.model.name().to_string(),
            n: cell.n,
            p: cell.p,
            s: cell.s,
            tau: tau_mean,
            trials: config.trials,
            successes,
            prob: successes as f64 / config.trials as f64,
            wilson_lo: lo,
            wilson_hi: hi,
        });
    }

    write_csv(&rows, &out_dir.join("sweep.csv"))?;
    if config.log_trials {
        let mut sorted = outcomes.clone();
        sorted.sort_by_key(|o| (o.cell, o.trial));
        let mut text = String::new();
        for o in &sorted {
            text.push_str(&serde_json::to_string(o)?);
            text.push('\n');
        }
        fs::write(out_dir.join("trials.jsonl"), text)?;
    }
    let manifest = serde_json::json!({
        "config": config,
        "version": env!("CARGO_PKG_VERSION"),
        "total_trials": total,
        "runtime_seconds": started.elapsed().as_secs_f64(),
    });
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    let _ = fs::remove_file(progress_path(out_dir));

    Ok(SweepTable { rows, outcomes })
}

fn write_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut text = String::from("model,n,p,s,tau,trials,successes,prob,wilson_lo,wilson_hi\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.model, r.n, r.p, r.s, r.tau, r.trials, r.successes, r.prob, r.wilson_lo, r.wilson_hi
        ));
    }
    fs::write(path, text)?;
    Ok(())
}

/// Rescaled x-axis for phase-transition curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rescale {
    /// `n / (s log p)` (linear regression).
    NOverSLogP,
    /// `n / (s^2 log p)` (logistic regression, graph selection).
    NOverS2LogP,
    /// `n / (s^2 (log p)^2)` (gamma regression).
    NOverS2LogP2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub n: usize,
    pub prob: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

/// One `(p, s)` series of rescaled success probabilities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveSeries {
    pub p: usize,
    pub s: usize,
    pub points: Vec<CurvePoint>,
}

/// Reindexes a sweep table by the rescaled sample size, one series per
/// `(p, s)` pair; series alignment across pairs is the qualitative check of
/// the corresponding scaling law.
pub fn phase_curve(table: &SweepTable, rescale: Rescale) -> Result<Vec<CurveSeries>> {
    if table.rows.is_empty() {
        return Err(Error::InvalidData("empty sweep table".into()));
    }
    for row in &table.rows {
        if row.p < 2 || row.s < 1 {
            return Err(Error::InvalidData(format!(
                "rescaling needs p >= 2 and s >= 1, got p={} s={}",
                row.p, row.s
            )));
        }
    }
    let mut series: Vec<CurveSeries> = Vec::new();
    for row in &table.rows {
        let (p, s) = (row.p as f64, row.s as f64);
        let x = match rescale {
            Rescale::NOverSLogP => row.n as f64 / (s * p.ln()),
            Rescale::NOverS2LogP => row.n as f64 / (s * s * p.ln()),
            Rescale::NOverS2LogP2 => row.n as f64 / (s * s * p.ln() * p.ln()),
        };
        let point = CurvePoint {
            x,
            n: row.n,
            prob: row.prob,
            wilson_lo: row.wilson_lo,
            wilson_hi: row.wilson_hi,
        };
        match series.iter_mut().find(|cs| cs.p == row.p && cs.s == row.s) {
            Some(cs) => cs.points.push(point),
            None => series.push(CurveSeries {
                p: row.p,
                s: row.s,
                points: vec![point],
            }),
        }
    }
    for cs in &mut series {
        cs.points.sort_by(|a, b| a.x.total_cmp(&b.x));
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::SignPattern;

    fn tiny_linear_config() -> SweepConfig {
        SweepConfig {
            model: ModelFamily::Linear { c: 0.1 },
            design: DesignFamily::GaussianIid,
            grid: vec![Cell { n: 40, p: 16, s: 2 }, Cell { n: 80, p: 16, s: 2 }],
            trials: 4,
            tau: TauPolicy::Recommended { c: 1.0 },
            beta: BetaGenParams {
                beta_min: 1.0,
                beta_max: 1.5,
                signs: SignPattern::Random,
            },
            graph: GraphGenParams::default(),
            master_seed: 7,
            out_dir: None,
            kappa: 1.0,
            log_trials: true,
            log_witness: true,
            check_theorem: false,
        }
    }

    #[test]
    fn wilson_interval_basics() {
        let (lo, hi) = wilson_interval(0, 10);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.35);
        let (lo, hi) = wilson_interval(10, 10);
        assert!(lo > 0.65);
        assert!(hi > 1.0 - 1e-12);
        let (lo, hi) = wilson_interval(5, 10);
        assert!(lo < 0.5 && hi > 0.5);
    }

    #[test]
    fn trials_are_deterministic() {
        let config = tiny_linear_config();
        let a = run_trial(&config, 0, 1).unwrap();
        let b = run_trial(&config, 0, 1).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn noiseless_orthogonal_trial_recovers_signs() {
        let config = SweepConfig {
            model: ModelFamily::Linear { c: 1e-9 },
            design: DesignFamily::Orthogonalized,
            grid: vec![Cell { n: 32, p: 32, s: 3 }],
            trials: 1,
            tau: TauPolicy::Fixed { tau: 0.05 },
            beta: BetaGenParams {
                beta_min: 1.0,
                beta_max: 1.0,
                signs: SignPattern::Random,
            },
            ..tiny_linear_config()
        };
        for t in 0..5 {
            let outcome = run_trial(&config, 0, t).unwrap();
            assert!(outcome.sign_match, "trial {t}");
            assert_eq!(outcome.witness_held, Some(true));
        }
    }

    #[test]
    fn hopeless_regime_mostly_fails() {
        let config = SweepConfig {
            model: ModelFamily::Linear { c: 0.5 },
            design: DesignFamily::GaussianIid,
            grid: vec![Cell { n: 3, p: 64, s: 3 }],
            trials: 1,
            tau: TauPolicy::Recommended { c: 1.0 },
            ..tiny_linear_config()
        };
        let failures = (0..50)
            .filter(|&t| !run_trial(&config, 0, t).unwrap().sign_match)
            .count();
        assert!(failures >= 45, "only {failures}/50 failures in the hopeless regime");
    }

    #[test]
    fn sweep_writes_stable_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_linear_config();
        let table = sweep(&config, dir.path(), 2, false).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.outcomes.len(), 8);
        let csv1 = std::fs::read(dir.path().join("sweep.csv")).unwrap();
        let jsonl1 = std::fs::read(dir.path().join("trials.jsonl")).unwrap();
        assert!(dir.path().join("manifest.json").exists());
        assert!(!progress_path(dir.path()).exists(), "progress file cleaned up");

        // a second run with a different worker count is byte-identical
        let dir2 = tempfile::tempdir().unwrap();
        sweep(&config, dir2.path(), 1, false).unwrap();
        let csv2 = std::fs::read(dir2.path().join("sweep.csv")).unwrap();
        let jsonl2 = std::fs::read(dir2.path().join("trials.jsonl")).unwrap();
        assert_eq!(csv1, csv2);
        assert_eq!(jsonl1, jsonl2);

        // single-trial probabilities are 0 or 1
        let config1 = SweepConfig { trials: 1, ..tiny_linear_config() };
        let dir3 = tempfile::tempdir().unwrap();
        let table = sweep(&config1, dir3.path(), 1, false).unwrap();
        for row in &table.rows {
            assert!(row.prob == 0.0 || row.prob == 1.0);
        }
    }

    #[test]
    fn resume_reproduces_uninterrupted_run() {
        let config = tiny_linear_config();
        let full_dir = tempfile::tempdir().unwrap();
        sweep(&config, full_dir.path(), 2, false).unwrap();
        let reference = std::fs::read(full_dir.path().join("sweep.csv")).unwrap();

        // fake an interrupted run: persist half the trials, then resume
        let partial_dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(partial_dir.path()).unwrap();
        let mut lines = String::new();
        for (c, t) in [(0usize, 0usize), (0, 2), (1, 1)] {
            let outcome = run_trial(&config, c, t).unwrap();
            lines.push_str(&serde_json::to_string(&outcome).unwrap());
            lines.push('\n');
        }
        std::fs::write(progress_path(partial_dir.path()), lines).unwrap();
        sweep(&config, partial_dir.path(), 2, true).unwrap();
        let resumed = std::fs::read(partial_dir.path().join("sweep.csv")).unwrap();
        assert_eq!(reference, resumed);
    }

    #[test]
    fn witness_and_theorem_consistency_hold_on_sweep() {
        let config = SweepConfig {
            check_theorem: true,
            ..tiny_linear_config()
        };
        let dir = tempfile::tempdir().unwrap();
        let table = sweep(&config, dir.path(), 2, false).unwrap();
        for o in &table.outcomes {
            if o.witness_held == Some(true) {
                assert_eq!(o.witness_supports_match, Some(true), "cell {} trial {}", o.cell, o.trial);
            }
            if o.conditions_overall == Some(true) {
                assert!(o.sign_match, "theorem-true trial failed: cell {} trial {}", o.cell, o.trial);
            }
        }
    }

    #[test]
    fn graph_trials_run_and_aggregate() {
        let config = SweepConfig {
            model: ModelFamily::GraphSelect,
            grid: vec![Cell { n: 4000, p: 4, s: 4 }],
            trials: 2,
            tau: TauPolicy::Recommended { c: 1.0 },
            graph: GraphGenParams {
                pattern: GraphPattern::Chain,
                rho_target: 1.0,
            },
            log_witness: false,
            ..tiny_linear_config()
        };
        let outcome = run_trial(&config, 0, 0).unwrap();
        assert!(outcome.converged);
        assert_eq!(outcome.p, 4);
    }

    #[test]
    fn phase_curve_reindexes_single_series() {
        let table = SweepTable {
            rows: vec![
                SweepRow {
                    model: "linear".into(), n: 39, p: 128, s: 4, tau: 0.1,
                    trials: 10, successes: 5, prob: 0.5, wilson_lo: 0.2, wilson_hi: 0.8,
                },
                SweepRow {
                    model: "linear".into(), n: 78, p: 128, s: 4, tau: 0.1,
                    trials: 10, successes: 9, prob: 0.9, wilson_lo: 0.6, wilson_hi: 0.99,
                },
            ],
            outcomes: vec![],
        };
        let curves = phase_curve(&table, Rescale::NOverSLogP).unwrap();
        assert_eq!(curves.len(), 1);
        let xs: Vec<f64> = curves[0].points.iter().map(|pt| pt.x).collect();
        assert!(xs[0] < xs[1]);
        assert!((xs[0] - 39.0 / (4.0 * 128.0_f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn phase_curve_rejects_degenerate_rows() {
        let table = SweepTable {
            rows: vec![SweepRow {
                model: "linear".into(), n: 10, p: 1, s: 0, tau: 0.1,
                trials: 1, successes: 0, prob: 0.0, wilson_lo: 0.0, wilson_hi: 0.9,
            }],
            outcomes: vec![],
        };
        assert!(phase_curve(&table, Rescale::NOverSLogP).is_err());
        assert!(phase_curve(&SweepTable { rows: vec![], outcomes: vec![] }, Rescale::NOverSLogP).is_err());
    }
}
