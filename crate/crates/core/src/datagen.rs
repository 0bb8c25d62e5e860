//! Synthetic instance generation.
//!
//! Designs are normalized so every column has l2 norm at most `sqrt(n)`.
//! All generators are pure functions of their arguments and a seed; sweeps
//! derive per-trial seeds with [`trial_seed`] so trials are reproducible and
//! order-independent.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma as GammaDist, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::conditions::GroundTruth;
use crate::error::{Error, Result};
use crate::loss_models::{vec_row_major, Dataset, LossOracle, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DesignFamily {
    #[default]
    GaussianIid,
    /// Orthonormal columns scaled by `sqrt(n)`, so `X'X = n I`; needs `n >= p`.
    Orthogonalized,
    /// Gaussian design whose last column duplicates the first, breaking
    /// irrepresentability whenever column 1 is in the support and column `p`
    /// is not.
    DuplicateColumnAdversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SignPattern {
    #[default]
    Random,
    AllPositive,
}

/// Magnitude range and sign law for generated sparse coefficients.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BetaGenParams {
    pub beta_min: f64,
    pub beta_max: f64,
    #[serde(default)]
    pub signs: SignPattern,
}

impl Default for BetaGenParams {
    fn default() -> Self {
        BetaGenParams {
            beta_min: 1.0,
            beta_max: 1.0,
            signs: SignPattern::Random,
        }
    }
}

/// Deterministic per-trial seed derived from the master seed and the trial's
/// grid coordinates; splitmix64 steps keep the stream stable across
/// platforms and independent of execution order.
pub fn trial_seed(master: u64, cell: u64, trial: u64) -> u64 {
    fn splitmix64(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix64(splitmix64(master ^ splitmix64(cell.wrapping_add(0x9E37_79B9))) ^ splitmix64(trial))
}

fn enforce_column_bound(x: &mut DMatrix<f64>) {
    let bound = (x.nrows() as f64).sqrt();
    for j in 0..x.ncols() {
        let norm = x.column(j).norm();
        if norm > bound {
            x.column_mut(j).scale_mut(bound / norm);
        }
    }
}

/// Generates an `n x p` design of the requested family; every column norm is
/// at most `sqrt(n)` (columns exceeding it are rescaled to exactly `sqrt(n)`).
pub fn gen_design(n: usize, p: usize, family: DesignFamily, seed: u64) -> DMatrix<f64> {
    assert!(n >= 1 && p >= 1, "design dimensions must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match family {
        DesignFamily::GaussianIid => {
            let mut x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            enforce_column_bound(&mut x);
            x
        }
        DesignFamily::Orthogonalized => {
            assert!(n >= p, "orthogonalized designs need n >= p");
            let g = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            let qr = g.qr();
            let mut x = qr.q() * (n as f64).sqrt();
            enforce_column_bound(&mut x);
            x
        }
        DesignFamily::DuplicateColumnAdversarial => {
            let mut x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            enforce_column_bound(&mut x);
            if p >= 2 {
                let first = x.column(0).into_owned();
                x.set_column(p - 1, &first);
            }
            x
        }
    }
}

/// Draws a sparse ground truth: `s` support indices chosen uniformly without
/// replacement, magnitudes uniform in `[beta_min, beta_max]`, signs by fair
/// coin or all positive.
pub fn gen_sparse_beta(
    p: usize,
    s: usize,
    beta_min: f64,
    beta_max: f64,
    signs: SignPattern,
    seed: u64,
) -> GroundTruth {
    assert!(s <= p, "sparsity cannot exceed the dimension");
    assert!(
        0.0 < beta_min && beta_min <= beta_max,
        "need 0 < beta_min <= beta_max"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // partial Fisher-Yates for the support
    let mut indices: Vec<usize> = (0..p).collect();
    for i in 0..s.min(p.saturating_sub(1)) {
        let j = rng.gen_range(i..p);
        indices.swap(i, j);
    }
    let mut beta = DVector::zeros(p);
    for &idx in indices.iter().take(s) {
        let magnitude = if beta_min == beta_max {
            beta_min
        } else {
            rng.gen_range(beta_min..beta_max)
        };
        let sign = match signs {
            SignPattern::AllPositive => 1.0,
            SignPattern::Random => {
                if rng.gen_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        beta[idx] = sign * magnitude;
    }
    GroundTruth::from_beta(beta)
}

/// Draws responses for a regression model. For the gamma family the realized
/// predictor floor `mu_n = min_i <x_i, beta*>` must be positive and is
/// recorded in the returned spec.
pub fn gen_responses(
    spec: &ModelSpec,
    x: &DMatrix<f64>,
    truth: &GroundTruth,
    seed: u64,
) -> Result<(DVector<f64>, ModelSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = x * &truth.beta_star;
    match spec {
        ModelSpec::Linear { c } => {
            let y = DVector::from_fn(x.nrows(), |i, _| {
                t[i] + c * rng.sample::<f64, _>(StandardNormal)
            });
            Ok((y, spec.clone()))
        }
        ModelSpec::Logistic => {
            let y = DVector::from_fn(x.nrows(), |i, _| {
                let prob = crate::loss_models::sigmoid(t[i]);
                if rng.gen::<f64>() < prob {
                    1.0
                } else {
                    0.0
                }
            });
            Ok((y, spec.clone()))
        }
        ModelSpec::Gamma { k, .. } => {
            let mu = t.iter().cloned().fold(f64::INFINITY, f64::min);
            if mu <= 0.0 {
                return Err(Error::PredictorFloorViolation(mu));
            }
            let mut y = DVector::zeros(x.nrows());
            for i in 0..x.nrows() {
                let scale = 1.0 / (k * t[i]);
                let dist = GammaDist::new(*k, scale)
                    .map_err(|e| Error::InvalidData(format!("gamma sampler: {e}")))?;
                y[i] = dist.sample(&mut rng);
            }
            Ok((y, ModelSpec::Gamma { k: *k, mu_n: mu }))
        }
        ModelSpec::GraphSelect { .. } => Err(Error::InvalidData(
            "graph selection draws samples via gen_graph_samples".into(),
        )),
    }
}

/// A true concentration matrix with its support and derived constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphTruth {
    pub theta_star: DMatrix<f64>,
    /// Row-major vectorized support indices (diagonal included).
    pub support: Vec<usize>,
    pub s: usize,
    /// Smallest eigenvalue of the truth.
    pub rho_min: f64,
    pub sigma_star: DMatrix<f64>,
    /// Largest diagonal entry of the true covariance.
    pub kappa_sigma: f64,
}

impl GraphTruth {
    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth::from_beta(vec_row_major(&self.theta_star))
    }
}

fn assemble_graph_truth(
    d: usize,
    pairs: &[(usize, usize)],
    rho_target: f64,
    rng: &mut ChaCha8Rng,
) -> GraphTruth {
    let mut theta = DMatrix::<f64>::zeros(d, d);
    for &(i, j) in pairs {
        let magnitude = rng.gen_range(0.1..0.3);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        theta[(i, j)] = sign * magnitude;
        theta[(j, i)] = sign * magnitude;
    }
    // diagonal dominance pins the smallest eigenvalue above rho_target
    for i in 0..d {
        let row_abs: f64 = (0..d).filter(|&j| j != i).map(|j| theta[(i, j)].abs()).sum();
        theta[(i, i)] = row_abs + rho_target;
    }
    let rho_min = theta
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let sigma_star = Cholesky::new(theta.clone())
        .expect("diagonally dominant matrix is positive definite")
        .inverse();
    let kappa_sigma = (0..d).map(|i| sigma_star[(i, i)]).fold(0.0_f64, f64::max);
    let support: Vec<usize> = (0..d * d)
        .filter(|idx| theta[(idx / d, idx % d)] != 0.0)
        .collect();
    let s = support.len();
    GraphTruth {
        theta_star: theta,
        support,
        s,
        rho_min,
        sigma_star,
        kappa_sigma,
    }
}

/// Diagonally dominant truth with `s_offdiag` nonzero off-diagonal entries
/// (an even count; symmetric pairs) placed uniformly at random, entry
/// magnitudes in [0.1, 0.3) with fair-coin signs, and the diagonal set to the
/// absolute row sum plus `rho_target`.
pub fn gen_graph_truth(d: usize, s_offdiag: usize, rho_target: f64, seed: u64) -> GraphTruth {
    assert!(d >= 2, "graph dimension must be at least 2");
    assert!(s_offdiag.is_multiple_of(2), "off-diagonal support comes in symmetric pairs");
    assert!(
        s_offdiag / 2 <= d * (d - 1) / 2,
        "more off-diagonal pairs than positions"
    );
    assert!(rho_target > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all_pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
        .collect();
    let chosen = s_offdiag / 2;
    for i in 0..chosen.min(all_pairs.len().saturating_sub(1)) {
        let j = rng.gen_range(i..all_pairs.len());
        all_pairs.swap(i, j);
    }
    let pairs: Vec<(usize, usize)> = all_pairs.into_iter().take(chosen).collect();
    assemble_graph_truth(d, &pairs, rho_target, &mut rng)
}

/// Chain-structured truth: nonzeros on the first off-diagonal only, same
/// entry law and diagonal rule as [`gen_graph_truth`].
pub fn gen_graph_truth_chain(d: usize, rho_target: f64, seed: u64) -> GraphTruth {
    assert!(d >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(usize, usize)> = (0..d - 1).map(|i| (i, i + 1)).collect();
    assemble_graph_truth(d, &pairs, rho_target, &mut rng)
}

/// Draws `n` zero-mean Gaussian vectors with covariance `sigma_star` and
/// returns them with their sample covariance `(1/n) sum x_i x_i'`.
pub fn gen_graph_samples(
    sigma_star: &DMatrix<f64>,
    n: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = sigma_star.nrows();
    let chol = Cholesky::new(sigma_star.clone()).ok_or(Error::NotPD)?;
    let l = chol.l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let samples = z * l.transpose();
    let sigma_hat = samples.tr_mul(&samples) / n as f64;
    Ok((samples, sigma_hat))
}

/// Base64-packed row-major matrix of little-endian f64 values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PackedMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: String,
}

impl PackedMatrix {
    pub fn pack(m: &DMatrix<f64>) -> Self {
        use base64::Engine;
        let mut bytes = Vec::with_capacity(m.len() * 8);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                bytes.extend_from_slice(&m[(i, j)].to_le_bytes());
            }
        }
        PackedMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
            data: base64::engine::general_purpose::STANDARD.encode(bytes),
        }
    }

    pub fn unpack(&self) -> Result<DMatrix<f64>> {
        use base64::Engine;
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(&self.data)
            .map_err(|e| Error::InvalidData(format!("base64 matrix payload: {e}")))?;
        if bytes.len() != self.rows * self.cols * 8 {
            return Err(Error::InvalidData(format!(
                "matrix payload holds {} bytes, expected {}",
                bytes.len(),
                self.rows * self.cols * 8
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &values))
    }
}

/// A generated problem instance as stored on disk. Regression instances
/// carry the design and responses; graph instances carry the sample
/// covariance. The truth is always present for oracle-side analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub model: ModelSpec,
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub seed: u64,
    #[serde(rename = "X", skip_serializing_if = "Option::is_none", default)]
    pub x: Option<PackedMatrix>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub y: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma_hat: Option<PackedMatrix>,
    pub beta_star: Vec<f64>,
    pub support: Vec<usize>,
}

impl Instance {
    pub fn truth(&self) -> GroundTruth {
        GroundTruth::from_beta(DVector::from_row_slice(&self.beta_star))
    }

    pub fn oracle(&self) -> Result<LossOracle> {
        match &self.model {
            ModelSpec::GraphSelect { .. } => {
                let sigma = self
                    .sigma_hat
                    .as_ref()
                    .ok_or_else(|| Error::InvalidData("graph instance lacks sigma_hat".into()))?
                    .unpack()?;
                LossOracle::new(self.model.clone(), Dataset::covariance(sigma, self.n)?)
            }
            _ => {
                let x = self
                    .x
                    .as_ref()
                    .ok_or_else(|| Error::InvalidData("regression instance lacks a design".into()))?
                    .unpack()?;
                let y = DVector::from_row_slice(
                    self.y
                        .as_ref()
                        .ok_or_else(|| Error::InvalidData("regression instance lacks responses".into()))?,
                );
                LossOracle::new(self.model.clone(), Dataset::regression(x, y)?)
            }
        }
    }
}

/// Pattern knob for generated graph truths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GraphPattern {
    #[default]
    RandomPairs,
    Chain,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GraphGenParams {
    #[serde(default)]
    pub pattern: GraphPattern,
    pub rho_target: f64,
}

impl Default for GraphGenParams {
    fn default() -> Self {
        GraphGenParams {
            pattern: GraphPattern::RandomPairs,
            rho_target: 1.0,
        }
    }
}

/// Shift applied to gamma support columns so predictors stay away from zero.
const GAMMA_COLUMN_SHIFT: f64 = 0.2;

/// Generates a full regression instance: design, truth, responses.
///
/// Gamma instances rewrite the support columns to `|x| + 0.2` (then re-apply
/// the norm bound) so the predictor floor is bounded away from zero; the
/// realized floor is measured afterwards and recorded in the instance model.
/// Combined with a sign pattern that is not all-positive this can still
/// produce a non-positive floor, reported as `PredictorFloorViolation`.
pub fn gen_regression_instance(
    spec: &ModelSpec,
    design: DesignFamily,
    n: usize,
    p: usize,
    s: usize,
    beta: &BetaGenParams,
    seed: u64,
) -> Result<Instance> {
    let seed_design = trial_seed(seed, 0, 1);
    let seed_beta = trial_seed(seed, 0, 2);
    let seed_resp = trial_seed(seed, 0, 3);
    let mut x = gen_design(n, p, design, seed_design);
    let truth = gen_sparse_beta(p, s, beta.beta_min, beta.beta_max, beta.signs, seed_beta);
    if matches!(spec, ModelSpec::Gamma { .. }) {
        let bound = (n as f64).sqrt();
        for &j in &truth.support {
            let mut col = x.column_mut(j);
            col.apply(|v: &mut f64| *v = v.abs() + GAMMA_COLUMN_SHIFT);
            let norm = col.norm();
            if norm > bound {
                col.scale_mut(bound / norm);
            }
        }
    }
    let (y, realized_spec) = gen_responses(spec, &x, &truth, seed_resp)?;
    Ok(Instance {
        model: realized_spec,
        n,
        p,
        s: truth.s,
        seed,
        x: Some(PackedMatrix::pack(&x)),
        y: Some(y.iter().cloned().collect()),
        sigma_hat: None,
        beta_star: truth.beta_star.iter().cloned().collect(),
        support: truth.support.clone(),
    })
}

/// Generates a graph-selection instance: truth, Gaussian samples, sample
/// covariance. `p` is the matrix dimension `d`; `s` counts off-diagonal
/// nonzeros for the random pattern and is ignored for chains.
pub fn gen_graph_instance(
    d: usize,
    s_offdiag: usize,
    n: usize,
    graph: &GraphGenParams,
    seed: u64,
) -> Result<Instance> {
    let seed_truth = trial_seed(seed, 1, 1);
    let seed_samples = trial_seed(seed, 1, 2);
    let truth = match graph.pattern {
        GraphPattern::RandomPairs => gen_graph_truth(d, s_offdiag, graph.rho_target, seed_truth),
        GraphPattern::Chain => gen_graph_truth_chain(d, graph.rho_target, seed_truth),
    };
    let (_, sigma_hat) = gen_graph_samples(&truth.sigma_star, n, seed_samples)?;
    let gt = truth.ground_truth();
    Ok(Instance {
        model: ModelSpec::GraphSelect { d },
        n,
        p: d * d,
        s: gt.s,
        seed,
        x: None,
        y: None,
        sigma_hat: Some(PackedMatrix::pack(&sigma_hat)),
        beta_star: gt.beta_star.iter().cloned().collect(),
        support: gt.support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(trial_seed(1, 2, 3), trial_seed(1, 2, 3));
        assert_ne!(trial_seed(1, 2, 3), trial_seed(1, 2, 4));
        assert_ne!(trial_seed(1, 2, 3), trial_seed(1, 3, 3));
        assert_ne!(trial_seed(1, 2, 3), trial_seed(2, 2, 3));
    }

    #[test]
    fn column_bound_holds_for_every_family() {
        for family in [
            DesignFamily::GaussianIid,
            DesignFamily::Orthogonalized,
            DesignFamily::DuplicateColumnAdversarial,
        ] {
            let (n, p) = (40, 12);
            let x = gen_design(n, p, family, 9);
            let bound = (n as f64).sqrt() * (1.0 + 1e-9);
            for j in 0..p {
                assert!(x.column(j).norm() <= bound, "{family:?} column {j}");
            }
        }
    }

    #[test]
    fn orthogonalized_design_is_orthogonal() {
        let n = 16;
        let x = gen_design(n, n, DesignFamily::Orthogonalized, 3);
        let gram = x.tr_mul(&x);
        let expected = DMatrix::identity(n, n) * n as f64;
        assert!((gram - expected).amax() < 1e-9);
        for j in 0..n {
            assert!((x.column(j).norm() - (n as f64).sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn duplicate_design_duplicates_first_column() {
        let x = gen_design(20, 6, DesignFamily::DuplicateColumnAdversarial, 4);
        assert_eq!(x.column(0), x.column(5));
    }

    #[test]
    fn sparse_beta_edge_cases() {
        let zero = gen_sparse_beta(5, 0, 1.0, 2.0, SignPattern::Random, 1);
        assert_eq!(zero.s, 0);
        assert_eq!(zero.beta_star, DVector::zeros(5));

        let ones = gen_sparse_beta(4, 4, 1.0, 1.0, SignPattern::AllPositive, 2);
        assert_eq!(ones.beta_star, DVector::from_element(4, 1.0));

        let a = gen_sparse_beta(100, 5, 0.5, 1.5, SignPattern::Random, 77);
        let b = gen_sparse_beta(100, 5, 0.5, 1.5, SignPattern::Random, 77);
        assert_eq!(a.support, b.support);
        assert_eq!(a.beta_star, b.beta_star);
        assert!(a.beta_min >= 0.5 && a.beta_min <= 1.5);
    }

    #[test]
    fn logistic_responses_balanced_at_zero_truth() {
        let x = gen_design(20_000, 3, DesignFamily::GaussianIid, 5);
        let truth = GroundTruth::from_beta(DVector::zeros(3));
        let (y, _) = gen_responses(&ModelSpec::Logistic, &x, &truth, 6).unwrap();
        let mean = y.sum() / y.len() as f64;
        // P{Y=1} = 1/2 exactly; three standard errors at n = 20000
        let se = 0.5 / (y.len() as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn gamma_moments_match_closed_forms() {
        // fixed predictor t: mean k*theta = 1/t, second moment k(k+1)theta^2
        let n = 100_000;
        let t = 2.0;
        let k = 1.7;
        // constant design entries t/10 with beta = 10 give <x_i, beta> = t
        // within the column norm bound 0.2 sqrt(n)
        let x = DMatrix::from_element(n, 1, t / 10.0);
        let truth = GroundTruth::from_beta(DVector::from_element(1, 10.0));
        let (y, spec) = gen_responses(&ModelSpec::Gamma { k, mu_n: 1.0 }, &x, &truth, 8).unwrap();
        match spec {
            ModelSpec::Gamma { mu_n, .. } => assert!((mu_n - t).abs() < 1e-12),
            _ => unreachable!(),
        }
        let mean = y.sum() / n as f64;
        let second: f64 = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let theta = 1.0 / (k * t);
        let expected_mean = k * theta;
        let expected_second = k * (k + 1.0) * theta * theta;
        // three standard errors with the empirical spread
        let var_mean = (second - mean * mean) / n as f64;
        assert!((mean - expected_mean).abs() < 3.0 * var_mean.sqrt());
        let fourth: f64 = y.iter().map(|v| v.powi(4)).sum::<f64>() / n as f64;
        let var_second = (fourth - second * second) / n as f64;
        assert!((second - expected_second).abs() < 3.0 * var_second.sqrt());
    }

    #[test]
    fn linear_noiseless_limit() {
        let x = gen_design(50, 4, DesignFamily::GaussianIid, 10);
        let truth = gen_sparse_beta(4, 2, 1.0, 1.0, SignPattern::Random, 11);
        let (y, _) = gen_responses(&ModelSpec::Linear { c: 1e-12 }, &x, &truth, 12).unwrap();
        assert!((y - &x * &truth.beta_star).amax() < 1e-9);
    }

    #[test]
    fn gamma_floor_violation_reported() {
        let x = gen_design(30, 4, DesignFamily::GaussianIid, 13);
        // mixed signs on a dense truth make some predictor negative
        let truth = GroundTruth::from_beta(DVector::from_row_slice(&[1.0, -1.0, 1.0, -1.0]));
        let err = gen_responses(&ModelSpec::Gamma { k: 1.0, mu_n: 1.0 }, &x, &truth, 14);
        assert!(matches!(err, Err(Error::PredictorFloorViolation(_))));
    }

    #[test]
    fn graph_truth_spectrum_and_dominance() {
        let truth = gen_graph_truth(6, 8, 0.7, 15);
        assert!(truth.rho_min >= 0.7 - 1e-12);
        assert_eq!(truth.s, 8 + 6);
        // support is symmetric as a relation and includes the diagonal
        let d = 6;
        for idx in &truth.support {
            let (i, j) = (idx / d, idx % d);
            assert!(truth.support.contains(&(j * d + i)));
        }
        for i in 0..d {
            assert!(truth.support.contains(&(i * d + i)));
        }
    }

    #[test]
    fn diagonal_graph_truth() {
        let truth = gen_graph_truth(4, 0, 0.5, 16);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(truth.theta_star[(i, j)], 0.0);
                }
            }
        }
        let min_diag = (0..4).map(|i| truth.theta_star[(i, i)]).fold(f64::INFINITY, f64::min);
        assert!((truth.kappa_sigma - 1.0 / min_diag).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_closed_form_covariance() {
        let truth = gen_graph_truth_chain(2, 1.0, 17);
        let (a, b) = (truth.theta_star[(0, 0)], truth.theta_star[(0, 1)]);
        assert_eq!(truth.theta_star[(1, 1)], a);
        let det = a * a - b * b;
        let expected_kappa = a / det;
        assert!((truth.kappa_sigma - expected_kappa).abs() < 1e-12);
        assert!((truth.sigma_star[(0, 1)] - (-b / det)).abs() < 1e-12);
    }

    #[test]
    fn graph_samples_concentrate() {
        let truth = gen_graph_truth_chain(2, 1.0, 18);
        let n = 100_000;
        let (samples, sigma_hat) = gen_graph_samples(&truth.sigma_star, n, 19).unwrap();
        assert_eq!(samples.nrows(), n);
        let dev = (&sigma_hat - &truth.sigma_star).amax();
        let bound = 5.0 * truth.kappa_sigma * ((2.0_f64).ln() / n as f64).sqrt();
        assert!(dev <= bound, "deviation {dev} bound {bound}");
    }

    #[test]
    fn single_graph_sample_is_rank_one() {
        let (samples, sigma_hat) = gen_graph_samples(&DMatrix::identity(3, 3), 1, 20).unwrap();
        let x0 = samples.row(0).transpose();
        assert!((&sigma_hat - &x0 * x0.transpose()).amax() < 1e-14);
    }

    #[test]
    fn generators_are_deterministic() {
        let a = gen_graph_samples(&DMatrix::identity(3, 3), 50, 21).unwrap();
        let b = gen_graph_samples(&DMatrix::identity(3, 3), 50, 21).unwrap();
        assert_eq!(a.1, b.1);

        let i1 = gen_regression_instance(
            &ModelSpec::Linear { c: 0.5 },
            DesignFamily::GaussianIid,
            30,
            8,
            3,
            &BetaGenParams::default(),
            22,
        )
        .unwrap();
        let i2 = gen_regression_instance(
            &ModelSpec::Linear { c: 0.5 },
            DesignFamily::GaussianIid,
            30,
            8,
            3,
            &BetaGenParams::default(),
            22,
        )
        .unwrap();
        assert_eq!(serde_json::to_string(&i1).unwrap(), serde_json::to_string(&i2).unwrap());
    }

    #[test]
    fn instance_round_trips_through_json() {
        let inst = gen_regression_instance(
            &ModelSpec::Gamma { k: 2.0, mu_n: 1.0 },
            DesignFamily::GaussianIid,
            25,
            6,
            2,
            &BetaGenParams {
                beta_min: 0.8,
                beta_max: 1.2,
                signs: SignPattern::AllPositive,
            },
            23,
        )
        .unwrap();
        let json = serde_json::to_string(&inst).unwrap();
        let back: Instance = serde_json::from_str(&json).unwrap();
        let oracle = back.oracle().unwrap();
        let truth = back.truth();
        assert_eq!(truth.s, 2);
        assert!(crate::loss_models::SmoothLoss::in_domain(&oracle, &truth.beta_star));
        // realized predictor floor is recorded and positive
        match back.model {
            ModelSpec::Gamma { mu_n, .. } => assert!(mu_n > 0.0),
            _ => unreachable!(),
        }

        let graph = gen_graph_instance(4, 4, 60, &GraphGenParams::default(), 24).unwrap();
        let json = serde_json::to_string(&graph).unwrap();
        let back: Instance = serde_json::from_str(&json).unwrap();
        assert!(back.oracle().is_ok());
        assert_eq!(back.p, 16);
    }

    #[test]
    fn packed_matrix_is_row_major_little_endian() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let packed = PackedMatrix::pack(&m);
        use base64::Engine;
        let bytes = base64::engine::general_purpose::STANDARD.decode(&packed.data).unwrap();
        assert_eq!(&bytes[0..8], &1.0_f64.to_le_bytes());
        assert_eq!(&bytes[8..16], &2.0_f64.to_le_bytes());
        assert_eq!(packed.unpack().unwrap(), m);
    }
}
