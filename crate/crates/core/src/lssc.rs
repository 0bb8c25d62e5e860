//! Local structured smoothness certificates.
//!
//! A certificate asserts `||D^3 L(b* + delta)[u, u]||_inf <= K ||u||_2^2` for
//! all perturbations `delta` keeping `b* + delta` inside a neighborhood of
//! `b*` and all directions `u` supported on `S = supp(b*)`. Analytic
//! constants are available for each loss family; [`verify_lssc`] probes a
//! certificate by randomized sampling over the structured direction set.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss_models::{LossOracle, ModelSpec, SmoothLoss};

/// Region of perturbations a certificate is valid on; the center (`b*` or the
/// true concentration matrix) is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Neighborhood {
    AllSpace,
    Ball2 { radius: f64, support_restricted: bool },
    FrobeniusBallSymmetric { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Empirical,
}

/// Constants recorded alongside a certificate, when the family defines them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuxConstants {
    /// max_i ||(x_i)_S||_2
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_n: Option<f64>,
    /// max_i ||x_i||_inf
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_n: Option<f64>,
    /// min_i <x_i, b*>
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_n: Option<f64>,
    /// largest restricted eigenvalue of the Hessian at the center
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    /// largest diagonal entry of the Hessian at the center
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_max: Option<f64>,
    /// smallest eigenvalue of the true concentration matrix
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_min: Option<f64>,
}

/// A smoothness constant `K >= 0` paired with the neighborhood it holds on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsscCertificate {
    pub k: f64,
    pub neighborhood: Neighborhood,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub provenance: Provenance,
    #[serde(default)]
    pub aux: AuxConstants,
    /// The anchor point; combination requires identical anchors.
    pub center: Vec<f64>,
    /// Sampling budget `(n_delta, n_dir)` behind an empirical constant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_budget: Option<(usize, usize)>,
}

impl LsscCertificate {
    /// Structural validity: finite non-negative constant, positive radii.
    pub fn is_well_formed(&self) -> bool {
        let radius_ok = match self.neighborhood {
            Neighborhood::AllSpace => true,
            Neighborhood::Ball2 { radius, .. } => radius > 0.0,
            Neighborhood::FrobeniusBallSymmetric { radius } => radius > 0.0,
        };
        self.k.is_finite() && self.k >= 0.0 && radius_ok
    }
}

/// Maximum per-row design norms restricted to `support` and in sup norm.
fn design_norms(x: &DMatrix<f64>, support: &[usize]) -> (f64, f64) {
    let mut nu: f64 = 0.0;
    let mut gamma: f64 = 0.0;
    for i in 0..x.nrows() {
        let row = x.row(i);
        let restricted: f64 = support.iter().map(|&j| row[j] * row[j]).sum();
        nu = nu.max(restricted.sqrt());
        gamma = gamma.max(row.amax());
    }
    (nu, gamma)
}

/// Closed-form certificate for the oracle's loss family.
///
/// The slack `kappa > 0` trades the constant against the neighborhood radius
/// for the gamma and graph-selection families and is ignored otherwise.
pub fn analytic_certificate(
    oracle: &LossOracle,
    beta_star: &DVector<f64>,
    support: &[usize],
    kappa: f64,
) -> Result<LsscCertificate> {
    if !oracle.in_domain(beta_star) {
        return Err(Error::DomainViolation(
            "certificate anchor lies outside the loss domain".into(),
        ));
    }
    let center = beta_star.iter().cloned().collect::<Vec<f64>>();
    match oracle.spec() {
        ModelSpec::Linear { .. } => Ok(LsscCertificate {
            k: 0.0,
            neighborhood: Neighborhood::AllSpace,
            kappa: None,
            provenance: Provenance::Analytic,
            aux: AuxConstants::default(),
            center,
            sample_budget: None,
        }),
        ModelSpec::Logistic => {
            let (x, _) = match oracle.dataset() {
                crate::loss_models::Dataset::Regression { x, y } => (x, y),
                _ => unreachable!(),
            };
            let (nu, gamma) = design_norms(x, support);
            Ok(LsscCertificate {
                k: 0.25 * nu * nu * gamma,
                neighborhood: Neighborhood::AllSpace,
                kappa: None,
                provenance: Provenance::Analytic,
                aux: AuxConstants {
                    nu_n: Some(nu),
                    gamma_n: Some(gamma),
                    ..Default::default()
                },
                center,
                sample_budget: None,
            })
        }
        ModelSpec::Gamma { .. } => {
            if kappa <= 0.0 {
                return Err(Error::InvalidData(format!("kappa={kappa} must be > 0")));
            }
            let (x, _) = match oracle.dataset() {
                crate::loss_models::Dataset::Regression { x, y } => (x, y),
                _ => unreachable!(),
            };
            let (nu, gamma) = design_norms(x, support);
            if nu <= 0.0 {
                return Err(Error::DegenerateSpectrum(
                    "gamma certificate needs a nonzero restricted design".into(),
                ));
            }
            let t = x * beta_star;
            let mu = t.iter().cloned().fold(f64::INFINITY, f64::min);
            let k = 2.0 * (1.0 + 1.0 / kappa).powi(3) * mu.powi(-3) * nu * nu * gamma;
            Ok(LsscCertificate {
                k,
                neighborhood: Neighborhood::Ball2 {
                    radius: mu / ((1.0 + kappa) * nu),
                    support_restricted: true,
                },
                kappa: Some(kappa),
                provenance: Provenance::Analytic,
                aux: AuxConstants {
                    nu_n: Some(nu),
                    gamma_n: Some(gamma),
                    mu_n: Some(mu),
                    ..Default::default()
                },
                center,
                sample_budget: None,
            })
        }
        ModelSpec::GraphSelect { d } => {
            if kappa <= 0.0 {
                return Err(Error::InvalidData(format!("kappa={kappa} must be > 0")));
            }
            let theta = crate::loss_models::unvec_row_major(beta_star, *d);
            let sym = (&theta + theta.transpose()) * 0.5;
            let rho_min = sym
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if rho_min <= 0.0 {
                return Err(Error::DegenerateSpectrum(format!(
                    "smallest eigenvalue {rho_min:.3e} of the anchor matrix is not positive"
                )));
            }
            let k = 2.0 * kappa.powi(-3) * (1.0 + kappa).powi(3) * rho_min.powi(-3);
            Ok(LsscCertificate {
                k,
                neighborhood: Neighborhood::FrobeniusBallSymmetric {
                    radius: rho_min / (1.0 + kappa),
                },
                kappa: Some(kappa),
                provenance: Provenance::Analytic,
                aux: AuxConstants {
                    rho_min: Some(rho_min),
                    ..Default::default()
                },
                center,
                sample_budget: None,
            })
        }
    }
}

/// Sampling budget for [`verify_lssc`]: `n_delta` perturbations crossed with
/// `n_dir` structured directions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VerifyBudget {
    pub n_delta: usize,
    pub n_dir: usize,
}

/// The `(delta, u, j)` triple attaining the maximal observed ratio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub delta: Vec<f64>,
    pub u: Vec<f64>,
    pub j: usize,
    pub ratio: f64,
}

/// Outcome of a randomized certificate check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub model: String,
    #[serde(rename = "K")]
    pub k: f64,
    pub empirical_max_ratio: f64,
    pub n_delta: usize,
    pub n_dir: usize,
    pub seed: u64,
    pub pass: bool,
    /// Populated when the check fails.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

/// Multiplicative slack absorbing floating-point noise in the pass decision.
const PASS_RTOL: f64 = 1e-6;
const MAX_RESAMPLES: usize = 100;

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Uniform draw from the l2 ball of `radius` over the listed coordinates.
fn sample_ball(
    rng: &mut ChaCha8Rng,
    dim: usize,
    coords: &[usize],
    radius: f64,
) -> DVector<f64> {
    let m = coords.len();
    let mut g = DVector::zeros(dim);
    let mut norm_sq = 0.0;
    for &j in coords {
        let z = standard_normal(rng);
        g[j] = z;
        norm_sq += z * z;
    }
    let norm = norm_sq.sqrt();
    if norm == 0.0 {
        return g;
    }
    let r = radius * rng.gen::<f64>().powf(1.0 / m as f64);
    g * (r / norm)
}

/// Uniform draw from the Frobenius ball of symmetric `d x d` matrices,
/// returned as a row-major vectorization.
fn sample_symmetric_ball(rng: &mut ChaCha8Rng, d: usize, radius: f64) -> DVector<f64> {
    // isotropic Gaussian in the Frobenius inner product on symmetric
    // matrices: N(0,1) on the diagonal and N(0, 1/2) off it
    let mut g = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let z = standard_normal(rng);
            if i == j {
                g[(i, i)] = z;
            } else {
                let v = z / std::f64::consts::SQRT_2;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
    }
    let norm = g.norm();
    if norm == 0.0 {
        return DVector::zeros(d * d);
    }
    let m = d * (d + 1) / 2;
    let r = radius * rng.gen::<f64>().powf(1.0 / m as f64);
    crate::loss_models::vec_row_major(&g) * (r / norm)
}

/// Unit direction supported on `coords`.
fn sample_direction(rng: &mut ChaCha8Rng, dim: usize, coords: &[usize]) -> DVector<f64> {
    loop {
        let mut g = DVector::zeros(dim);
        let mut norm_sq = 0.0;
        for &j in coords {
            let z = standard_normal(rng);
            g[j] = z;
            norm_sq += z * z;
        }
        if norm_sq > 0.0 {
            return g / norm_sq.sqrt();
        }
    }
}

/// Checks a certificate by sampling perturbations in its neighborhood and
/// unit directions supported on `support`, reporting the largest observed
/// sup-norm ratio of the third-order form.
///
/// `probe_radius` bounds the sampling region for `AllSpace` neighborhoods
/// (default 1.0); bounded shapes use their own radius. Sampled points that
/// leave the loss domain are resampled up to 100 times each.
pub fn verify_lssc(
    oracle: &dyn SmoothLoss,
    beta_star: &DVector<f64>,
    support: &[usize],
    cert: &LsscCertificate,
    budget: VerifyBudget,
    seed: u64,
    probe_radius: Option<f64>,
) -> Result<VerificationReport> {
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let dim = oracle.dim();
    if beta_star.len() != dim {
        return Err(Error::DimensionMismatch("anchor/oracle dimensions differ".into()));
    }
    let all: Vec<usize> = (0..dim).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    enum Region {
        Ball { radius: f64, restricted: bool },
        SymBall { radius: f64, d: usize },
    }
    let region = match cert.neighborhood {
        Neighborhood::AllSpace => Region::Ball {
            radius: probe_radius.unwrap_or(1.0),
            restricted: false,
        },
        Neighborhood::Ball2 {
            radius,
            support_restricted,
        } => Region::Ball {
            radius,
            restricted: support_restricted,
        },
        Neighborhood::FrobeniusBallSymmetric { radius } => {
            let d = (dim as f64).sqrt().round() as usize;
            if d * d != dim {
                return Err(Error::DimensionMismatch(
                    "symmetric ball needs a square parameter layout".into(),
                ));
            }
            Region::SymBall { radius, d }
        }
    };

    let mut deltas = Vec::with_capacity(budget.n_delta);
    for _ in 0..budget.n_delta {
        let mut accepted = None;
        for _ in 0..MAX_RESAMPLES {
            let delta = match &region {
                Region::Ball { radius, restricted } => {
                    sample_ball(&mut rng, dim, if *restricted { support } else { &all }, *radius)
                }
                Region::SymBall { radius, d } => sample_symmetric_ball(&mut rng, *d, *radius),
            };
            if oracle.in_domain(&(beta_star + &delta)) {
                accepted = Some(delta);
                break;
            }
        }
        deltas.push(accepted.ok_or_else(|| {
            Error::DomainViolation(format!(
                "no in-domain perturbation found after {MAX_RESAMPLES} attempts"
            ))
        })?);
    }
    let dirs: Vec<DVector<f64>> = (0..budget.n_dir)
        .map(|_| sample_direction(&mut rng, dim, support))
        .collect();

    let mut max_ratio = 0.0_f64;
    let mut witness: Option<Witness> = None;
    for (di, delta) in deltas.iter().enumerate() {
        let point = beta_star + delta;
        for (ui, u) in dirs.iter().enumerate() {
            let form = oracle.third_directional(&point, u)?;
            let ratio = form.amax();
            if ratio > max_ratio {
                max_ratio = ratio;
                let j = form.iter().enumerate().fold((0usize, 0.0f64), |acc, (j, v)| {
                    if v.abs() > acc.1 { (j, v.abs()) } else { acc }
                });
                witness = Some(Witness {
                    delta: deltas[di].iter().cloned().collect(),
                    u: dirs[ui].iter().cloned().collect(),
                    j: j.0,
                    ratio,
                });
            }
        }
    }

    let pass = max_ratio <= cert.k * (1.0 + PASS_RTOL);
    Ok(VerificationReport {
        model: oracle.name().to_string(),
        k: cert.k,
        empirical_max_ratio: max_ratio,
        n_delta: budget.n_delta,
        n_dir: budget.n_dir,
        seed,
        pass,
        witness: if pass { None } else { witness },
    })
}

/// Certificate for the weighted sum `w1 L1 + w2 L2` of two losses certified
/// at the same anchor: the constant combines linearly and the neighborhood is
/// the intersection.
///
/// Same-shape balls intersect to the smaller radius. A mixed l2/Frobenius
/// pair is represented as the symmetric Frobenius ball of the smaller radius;
/// this may enlarge the true intersection, which is safe since the combined
/// constant then holds on a superset of it.
pub fn combine_certificates(
    c1: &LsscCertificate,
    w1: f64,
    c2: &LsscCertificate,
    w2: f64,
) -> Result<LsscCertificate> {
    if w1 <= 0.0 || w2 <= 0.0 {
        return Err(Error::InvalidData("combination weights must be positive".into()));
    }
    if c1.center != c2.center {
        return Err(Error::IncompatibleCenters);
    }
    use Neighborhood::*;
    let neighborhood = match (&c1.neighborhood, &c2.neighborhood) {
        (AllSpace, other) | (other, AllSpace) => other.clone(),
        (
            Ball2 { radius: r1, support_restricted: s1 },
            Ball2 { radius: r2, support_restricted: s2 },
        ) => Ball2 {
            radius: r1.min(*r2),
            support_restricted: *s1 || *s2,
        },
        (FrobeniusBallSymmetric { radius: r1 }, FrobeniusBallSymmetric { radius: r2 }) => {
            FrobeniusBallSymmetric { radius: r1.min(*r2) }
        }
        (Ball2 { radius: r1, .. }, FrobeniusBallSymmetric { radius: r2 })
        | (FrobeniusBallSymmetric { radius: r2 }, Ball2 { radius: r1, .. }) => {
            FrobeniusBallSymmetric { radius: r1.min(*r2) }
        }
    };
    Ok(LsscCertificate {
        k: w1 * c1.k + w2 * c2.k,
        neighborhood,
        kappa: if c1.kappa == c2.kappa { c1.kappa } else { None },
        provenance: if c1.provenance == Provenance::Analytic
            && c2.provenance == Provenance::Analytic
        {
            Provenance::Analytic
        } else {
            Provenance::Empirical
        },
        aux: AuxConstants::default(),
        center: c1.center.clone(),
        sample_budget: None,
    })
}

/// Empirical unstructured smoothness constant: the largest observed
/// `||H(b* + delta) - H(b*)||_2 / ||delta||_2` over perturbations sampled
/// uniformly in the ball of `probe_radius`.
///
/// Used to demonstrate that the structured constant can sit strictly below
/// the unstructured Hessian-Lipschitz one.
pub fn hessian_lipschitz_ratio(
    oracle: &dyn SmoothLoss,
    beta_star: &DVector<f64>,
    probe_radius: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let dim = oracle.dim();
    let all: Vec<usize> = (0..dim).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h0 = oracle.hessian(beta_star)?;
    let mut max_ratio = 0.0_f64;
    for _ in 0..n_samples {
        let mut accepted = None;
        for _ in 0..MAX_RESAMPLES {
            let delta = sample_ball(&mut rng, dim, &all, probe_radius);
            if delta.norm() > 0.0 && oracle.in_domain(&(beta_star + &delta)) {
                accepted = Some(delta);
                break;
            }
        }
        let delta = accepted.ok_or_else(|| {
            Error::DomainViolation(format!(
                "no in-domain perturbation found after {MAX_RESAMPLES} attempts"
            ))
        })?;
        let diff = oracle.hessian(&(beta_star + &delta))? - &h0;
        let sym = (&diff + diff.transpose()) * 0.5;
        let spectral = sym.symmetric_eigen().eigenvalues.amax();
        max_ratio = max_ratio.max(spectral / delta.norm());
    }
    Ok(max_ratio)
}
