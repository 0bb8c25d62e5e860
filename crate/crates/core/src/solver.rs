//! Proximal-gradient solver for l1-regularized losses.
//!
//! One solver covers all four families: gradient step, soft-thresholding
//! prox, backtracking line search, and (for the open-domain losses) a
//! segment safeguard that shrinks a tentative point toward the last feasible
//! iterate until it re-enters the domain. Momentum extrapolation is used
//! when it keeps the composite objective non-increasing and is abandoned for
//! a plain step otherwise, so the reported objective trace never increases.
//!
//! The restricted problem (optimization over a fixed support with the
//! complement pinned to zero) runs through the same engine with the gradient
//! and prox masked to the active coordinates.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::conditions::GroundTruth;
use crate::error::{Error, Result};
use crate::loss_models::SmoothLoss;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Convergence threshold on the stationarity residual.
    pub kkt_tol: f64,
    pub initial_step: f64,
    /// Multiplicative step shrink factor in (0, 1).
    pub backtracking: f64,
    /// Sufficient-decrease constant for plain (non-extrapolated) steps.
    pub armijo: f64,
    /// Shrink steps that exit the loss domain back along the segment to the
    /// last feasible point (gamma and graph-selection losses).
    pub domain_safeguard: bool,
    /// Momentum extrapolation with monotone restart.
    pub accelerate: bool,
    /// Starting point override; defaults to the model's canonical start.
    #[serde(skip)]
    pub start: Option<DVector<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 20_000,
            kkt_tol: 1e-8,
            initial_step: 1.0,
            backtracking: 0.5,
            armijo: 1e-4,
            domain_safeguard: true,
            accelerate: true,
            start: None,
        }
    }
}

/// Solver output. `converged` implies `kkt_residual <= kkt_tol`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Estimate {
    #[serde(with = "serde_dvec")]
    pub beta: DVector<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub objective: f64,
    pub converged: bool,
}

mod serde_dvec {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn l1_norm(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Stationarity residual of the composite problem at `beta`:
/// `|g_i + tau sign(beta_i)|` on the active nonzeros and
/// `max(0, |g_i| - tau)` on the zeros, maximized over the coordinates the
/// problem optimizes (all of them, or a fixed support for the restricted
/// problem).
pub fn kkt_residual(
    beta: &DVector<f64>,
    grad: &DVector<f64>,
    tau: f64,
    active: Option<&[usize]>,
) -> f64 {
    let eval = |j: usize| -> f64 {
        if beta[j] != 0.0 {
            (grad[j] + tau * beta[j].signum()).abs()
        } else {
            (grad[j].abs() - tau).max(0.0)
        }
    };
    match active {
        Some(coords) => coords.iter().map(|&j| eval(j)).fold(0.0, f64::max),
        None => (0..beta.len()).map(eval).fold(0.0, f64::max),
    }
}

fn masked_gradient(
    oracle: &dyn SmoothLoss,
    point: &DVector<f64>,
    mask: Option<&[bool]>,
) -> Result<DVector<f64>> {
    let mut g = oracle.gradient(point)?;
    // structural projection (graph selection symmetrizes) keeps iterates on
    // the parameterization's constraint set; masks are structure-closed
    oracle.project_step(&mut g);
    if let Some(m) = mask {
        for j in 0..g.len() {
            if !m[j] {
                g[j] = 0.0;
            }
        }
    }
    Ok(g)
}

const MAX_BACKTRACKS: usize = 100;
const MIN_SEGMENT: f64 = 1e-14;

/// Accepted step: the point, its loss value, the step size used, and whether
/// the decrease tests carried signal (false once below objective resolution).
type StepOutcome = Option<(DVector<f64>, f64, f64, bool)>;

/// One backtracked proximal step from `base`. Returns the accepted point,
/// its loss value, and the step size that produced it, or `None` when the
/// line search exhausts its budget.
#[allow(clippy::too_many_arguments)]
fn backtracked_step(
    oracle: &dyn SmoothLoss,
    base: &DVector<f64>,
    f_base: f64,
    g_base: &DVector<f64>,
    tau: f64,
    eta0: f64,
    opts: &SolverOptions,
    armijo_reference: Option<f64>,
) -> Result<StepOutcome> {
    let mut eta = eta0;
    for _ in 0..MAX_BACKTRACKS {
        let mut z = base - g_base * eta;
        let t = eta * tau;
        z.apply(|v: &mut f64| *v = soft_threshold(*v, t));

        if !oracle.in_domain(&z) {
            // pull the tentative point back along the segment to the feasible
            // base; the prox output (and its threshold) is left untouched
            let mut recovered = false;
            if opts.domain_safeguard {
                let dir = &z - base;
                let mut theta = 0.5;
                while theta > MIN_SEGMENT {
                    let cand = base + &dir * theta;
                    if oracle.in_domain(&cand) {
                        z = cand;
                        recovered = true;
                        break;
                    }
                    theta *= 0.5;
                }
            }
            if !recovered {
                eta *= opts.backtracking;
                continue;
            }
        }

        let f_z = oracle.value(&z)?;
        let dz = &z - base;
        let quad_term = dz.norm_squared() / (2.0 * eta);
        // once the step falls below the resolution of the objective, the
        // decrease tests are pure roundoff noise; accept and let the prox
        // iteration contract the iterates the rest of the way
        if quad_term <= 1e-12 * (1.0 + f_base.abs()) {
            return Ok(Some((z, f_z, eta, false)));
        }
        let slack = 1e-15 * (1.0 + f_base.abs());
        let quad_ok = f_z <= f_base + g_base.dot(&dz) + quad_term + slack;
        let armijo_ok = match armijo_reference {
            Some(obj_base) => {
                f_z + tau * l1_norm(&z)
                    <= obj_base - opts.armijo / eta * dz.norm_squared() + slack
            }
            None => true,
        };
        if quad_ok && armijo_ok {
            return Ok(Some((z, f_z, eta, true)));
        }
        eta *= opts.backtracking;
    }
    Ok(None)
}

fn solve(
    oracle: &dyn SmoothLoss,
    tau: f64,
    opts: &SolverOptions,
    active: Option<&[usize]>,
) -> Result<(Estimate, Vec<f64>)> {
    if tau < 0.0 {
        return Err(Error::InvalidData("tau must be non-negative".into()));
    }
    let p = oracle.dim();
    let mask: Option<Vec<bool>> = active.map(|coords| {
        let mut m = vec![false; p];
        for &j in coords {
            m[j] = true;
        }
        m
    });

    let mut x = match &opts.start {
        Some(b) => b.clone(),
        None => oracle
            .feasible_start(active)
            .ok_or_else(|| Error::NoFeasibleStart("no canonical starting point".into()))?,
    };
    if let Some(m) = &mask {
        for j in 0..p {
            if !m[j] {
                x[j] = 0.0;
            }
        }
    }
    if !oracle.in_domain(&x) {
        return Err(Error::NoFeasibleStart(
            "starting point lies outside the loss domain".into(),
        ));
    }

    let mut f_x = oracle.value(&x)?;
    let mut obj_x = f_x + tau * l1_norm(&x);
    let mut trace = vec![obj_x];
    let mut g_x = masked_gradient(oracle, &x, mask.as_deref())?;
    let mut residual = kkt_residual(&x, &g_x, tau, active);
    let mut x_prev = x.clone();
    let mut t_mom = 1.0_f64;
    let mut eta = opts.initial_step;
    let mut iterations = 0;
    let mut converged = residual <= opts.kkt_tol;
    // once steps drop below the objective's floating-point resolution the
    // decrease tests carry no signal; freeze the step and run plain prox
    // iterations, which contract the iterates at a certified step size
    let mut fine_phase = false;

    while !converged && iterations < opts.max_iters {
        iterations += 1;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_mom * t_mom).sqrt());
        let mut accepted: Option<(DVector<f64>, f64, f64, bool)> = None;

        if opts.accelerate && iterations > 1 && !fine_phase {
            let omega = (t_mom - 1.0) / t_next;
            let y = &x + (&x - &x_prev) * omega;
            if oracle.in_domain(&y) {
                let f_y = oracle.value(&y)?;
                let g_y = masked_gradient(oracle, &y, mask.as_deref())?;
                if let Some((z, f_z, eta_used, checked)) =
                    backtracked_step(oracle, &y, f_y, &g_y, tau, eta, opts, None)?
                {
                    // keep the extrapolated step only if it is monotone
                    if f_z + tau * l1_norm(&z) <= obj_x + 1e-13 * (1.0 + obj_x.abs()) {
                        accepted = Some((z, f_z, eta_used, checked));
                    }
                }
            }
        }

        let momentum_accepted = accepted.is_some();
        if accepted.is_none() {
            accepted = backtracked_step(oracle, &x, f_x, &g_x, tau, eta, opts, Some(obj_x))?;
        }
        let Some((z, f_z, eta_used, checked)) = accepted else {
            // line search exhausted: numerically stationary, stop here
            break;
        };

        if (&z - &x).amax() == 0.0 {
            // bit-identical iterate: nothing left to resolve
            break;
        }
        x_prev = std::mem::replace(&mut x, z);
        f_x = f_z;
        obj_x = f_x + tau * l1_norm(&x);
        trace.push(obj_x);
        t_mom = if momentum_accepted { t_next } else { 1.0 };
        fine_phase = !checked;
        // let a certified step re-grow; keep it frozen in the fine phase
        eta = if checked { eta_used * 2.0 } else { eta_used };

        g_x = masked_gradient(oracle, &x, mask.as_deref())?;
        residual = kkt_residual(&x, &g_x, tau, active);
        converged = residual <= opts.kkt_tol;
    }

    Ok((
        Estimate {
            beta: x,
            iterations,
            kkt_residual: residual,
            objective: obj_x,
            converged,
        },
        trace,
    ))
}

/// Minimizes `L(beta) + tau ||beta||_1` over the full parameter space.
///
/// Reaching the iteration cap is not an error: the best (monotone) iterate is
/// returned with `converged = false`.
pub fn fit_l1(oracle: &dyn SmoothLoss, tau: f64, opts: &SolverOptions) -> Result<Estimate> {
    solve(oracle, tau, opts, None).map(|(est, _)| est)
}

/// [`fit_l1`] plus the per-iteration composite objective trace.
pub fn fit_l1_traced(
    oracle: &dyn SmoothLoss,
    tau: f64,
    opts: &SolverOptions,
) -> Result<(Estimate, Vec<f64>)> {
    solve(oracle, tau, opts, None)
}

/// Minimizes the same objective over `{beta : beta[support^c] = 0}`, the
/// genie-aided problem with exact support information.
pub fn fit_restricted(
    oracle: &dyn SmoothLoss,
    support: &[usize],
    tau: f64,
    opts: &SolverOptions,
) -> Result<Estimate> {
    if support.is_empty() {
        let beta = DVector::zeros(oracle.dim());
        let objective = if oracle.in_domain(&beta) {
            oracle.value(&beta)? + 0.0
        } else {
            f64::NAN
        };
        return Ok(Estimate {
            beta,
            iterations: 0,
            kkt_residual: 0.0,
            objective,
            converged: true,
        });
    }
    solve(oracle, tau, opts, Some(support)).map(|(est, _)| est)
}

/// Outcome of the primal-dual witness inequality
/// `||[grad L(beta_check)]_{S^c}||_inf < tau`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WitnessOutcome {
    pub holds: bool,
    /// `tau` minus the off-support gradient sup norm.
    pub slack: f64,
}

/// Checks whether the restricted solution certifies the full problem: when it
/// holds, the full estimate coincides with the genie-aided one.
pub fn witness_check(
    oracle: &dyn SmoothLoss,
    beta_check: &DVector<f64>,
    support: &[usize],
    tau: f64,
) -> Result<WitnessOutcome> {
    let p = oracle.dim();
    let mut in_s = vec![false; p];
    for &j in support {
        in_s[j] = true;
    }
    let grad = oracle.gradient(beta_check)?;
    let off_norm = (0..p)
        .filter(|&j| !in_s[j])
        .map(|j| grad[j].abs())
        .fold(0.0_f64, f64::max);
    Ok(WitnessOutcome {
        holds: off_norm < tau,
        slack: tau - off_norm,
    })
}

/// Exact support, sign, and l2 comparison of an estimate against the truth.
/// The prox produces exact zeros, so no thresholding is applied.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Recovery {
    pub support_match: bool,
    pub sign_match: bool,
    pub l2_error: f64,
}

pub fn support_of(beta: &DVector<f64>) -> Vec<usize> {
    (0..beta.len()).filter(|&i| beta[i] != 0.0).collect()
}

/// Numerical uniqueness margin for the restricted problem: the smallest
/// eigenvalue of the restricted Hessian at the solution. A margin above
/// ~1e-10 certifies local strict convexity of the genie-aided problem, in
/// place of a uniqueness proof.
pub fn restricted_uniqueness_margin(
    oracle: &dyn SmoothLoss,
    beta_check: &DVector<f64>,
    support: &[usize],
) -> Result<f64> {
    let h = oracle.hessian(beta_check)?;
    crate::conditions::restricted_hessian_lambda_min(&h, support)
}

pub fn recovery_assess(beta_hat: &DVector<f64>, truth: &GroundTruth) -> Recovery {
    let support_match = support_of(beta_hat) == truth.support;
    let sign_match = (0..beta_hat.len())
        .all(|i| beta_hat[i].signum() * (beta_hat[i] != 0.0) as i32 as f64
            == truth.beta_star[i].signum() * (truth.beta_star[i] != 0.0) as i32 as f64);
    Recovery {
        support_match,
        sign_match,
        l2_error: (beta_hat - &truth.beta_star).norm(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{irrepresentability_alpha, restricted_hessian_lambda_min, radii};
    use crate::loss_models::tests::random_oracle;
    use crate::loss_models::{vec_row_major, Dataset, LossOracle, ModelSpec};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_linear(y0: f64) -> LossOracle {
        let x = DMatrix::from_row_slice(1, 1, &[1.0]);
        let y = DVector::from_row_slice(&[y0]);
        LossOracle::new(ModelSpec::Linear { c: 1.0 }, Dataset::regression(x, y).unwrap()).unwrap()
    }

    #[test]
    fn scalar_soft_threshold() {
        let oracle = scalar_linear(1.0);
        let est = fit_l1(&oracle, 0.3, &SolverOptions::default()).unwrap();
        assert!(est.converged);
        assert!((est.beta[0] - 0.7).abs() < 1e-8);

        let est = fit_l1(&oracle, 2.0, &SolverOptions::default()).unwrap();
        assert!(est.converged);
        assert_eq!(est.beta[0], 0.0);
    }

    #[test]
    fn logistic_zero_is_kkt_point_for_large_tau() {
        let oracle = random_oracle(ModelSpec::Logistic, 20, 5, 1);
        let g0 = oracle.gradient(&DVector::zeros(5)).unwrap();
        let tau = g0.amax() * 1.01;
        let est = fit_l1(&oracle, tau, &SolverOptions::default()).unwrap();
        assert!(est.converged);
        assert_eq!(est.beta, DVector::zeros(5));
        assert_eq!(est.iterations, 0);
    }

    #[test]
    fn restricted_full_support_matches_unrestricted() {
        let oracle = random_oracle(ModelSpec::Linear { c: 1.0 }, 30, 4, 2);
        let opts = SolverOptions::default();
        let full = fit_l1(&oracle, 0.05, &opts).unwrap();
        let all: Vec<usize> = (0..4).collect();
        let restricted = fit_restricted(&oracle, &all, 0.05, &opts).unwrap();
        assert!((&full.beta - &restricted.beta).amax() <= 10.0 * opts.kkt_tol);
    }

    #[test]
    fn restricted_empty_support_returns_zero() {
        let oracle = random_oracle(ModelSpec::Linear { c: 1.0 }, 10, 3, 3);
        let est = fit_restricted(&oracle, &[], 0.1, &SolverOptions::default()).unwrap();
        assert_eq!(est.beta, DVector::zeros(3));
        assert!(est.converged);
    }

    fn orthogonal_instance(
        p: usize,
        beta: &[f64],
        noise_seed: Option<u64>,
    ) -> (LossOracle, GroundTruth) {
        let n = p;
        let x = DMatrix::<f64>::identity(n, p) * (n as f64).sqrt();
        let b = DVector::from_row_slice(beta);
        let mut y = &x * &b;
        if let Some(seed) = noise_seed {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in 0..n {
                y[i] += 0.01 * rng.gen_range(-1.0..1.0);
            }
        }
        let oracle = LossOracle::new(
            ModelSpec::Linear { c: 0.01 },
            Dataset::regression(x, y).unwrap(),
        )
        .unwrap();
        (oracle, GroundTruth::from_beta(b))
    }

    #[test]
    fn restricted_orthogonal_closed_form() {
        let (oracle, _) = orthogonal_instance(4, &[1.0, 0.0, -0.5, 0.0], Some(7));
        let tau = 0.2;
        let est = fit_restricted(&oracle, &[0], tau, &SolverOptions::default()).unwrap();
        // for X'X = nI the restricted coordinate solves soft((X'y/n)_0, tau)
        let (x, y) = oracle.design();
        let target = (x.tr_mul(y) / x.nrows() as f64)[0];
        assert!((est.beta[0] - soft_threshold(target, tau)).abs() < 1e-8);
        for j in 1..4 {
            assert_eq!(est.beta[j], 0.0);
        }
    }

    #[test]
    fn witness_trivial_and_orthogonal() {
        let (oracle, truth) = orthogonal_instance(4, &[1.0, -1.0, 0.0, 0.0], None);
        let all: Vec<usize> = (0..4).collect();
        let est = fit_restricted(&oracle, &truth.support, 0.05, &SolverOptions::default()).unwrap();

        // empty complement: holds with slack tau
        let w = witness_check(&oracle, &est.beta, &all, 0.05).unwrap();
        assert!(w.holds);
        assert_eq!(w.slack, 0.05);

        // noiseless orthogonal: off-support gradient is exactly zero
        let w = witness_check(&oracle, &est.beta, &truth.support, 0.05).unwrap();
        assert!(w.holds);
        assert!((w.slack - 0.05).abs() < 1e-12);
    }

    /// Design whose last column is a 0.8/0.8 mix of the two support columns:
    /// the irrepresentability row sum is 1.6, so the witness must fail while
    /// the restricted fit still recovers the support.
    fn adversarial_mixed_design() -> (LossOracle, GroundTruth) {
        let n = 64;
        let scale = (n as f64).sqrt();
        let mut x = DMatrix::zeros(n, 3);
        x[(0, 0)] = scale;
        x[(1, 1)] = scale;
        x.set_column(2, &((x.column(0) * 0.8) + (x.column(1) * 0.8)));
        // rescale the mixed column back inside the norm bound
        let norm = x.column(2).norm();
        if norm > scale {
            x.column_mut(2).scale_mut(scale / norm);
        }
        let beta = DVector::from_row_slice(&[1.0, 1.0, 0.0]);
        let y = &x * &beta;
        let oracle = LossOracle::new(
            ModelSpec::Linear { c: 0.01 },
            Dataset::regression(x, y).unwrap(),
        )
        .unwrap();
        (oracle, GroundTruth::from_beta(beta))
    }

    #[test]
    fn witness_fails_on_adversarial_design() {
        let (oracle, truth) = adversarial_mixed_design();
        let h = oracle.hessian(&truth.beta_star).unwrap();
        let alpha = irrepresentability_alpha(&h, &truth.support).unwrap();
        assert!(alpha < 0.0, "construction must violate irrepresentability: {alpha}");

        let tau = 0.05;
        let est = fit_restricted(&oracle, &truth.support, tau, &SolverOptions::default()).unwrap();
        assert!(est.converged);
        let rec = recovery_assess(&est.beta, &truth);
        assert!(rec.support_match, "restricted fit recovers the support");
        let w = witness_check(&oracle, &est.beta, &truth.support, tau).unwrap();
        assert!(!w.holds);
        assert!(w.slack < 0.0, "slack {}", w.slack);
    }

    #[test]
    fn witness_equivalence_on_random_instances() {
        // whenever the witness holds, the full fit must agree with the
        // restricted one in support and near-exactly in values
        let opts = SolverOptions::default();
        for seed in 0..20u64 {
            let model = if seed % 2 == 0 {
                ModelSpec::Linear { c: 0.1 }
            } else {
                ModelSpec::Logistic
            };
            let oracle = random_oracle(model, 60, 6, 100 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
            let mut beta = DVector::zeros(6);
            beta[rng.gen_range(0..3)] = 1.0;
            beta[3 + rng.gen_range(0..3)] = -1.0;
            let truth = GroundTruth::from_beta(beta);
            let tau = 0.05 + 0.05 * rng.gen::<f64>();

            let check = fit_restricted(&oracle, &truth.support, tau, &opts).unwrap();
            let w = witness_check(&oracle, &check.beta, &truth.support, tau).unwrap();
            if !w.holds {
                continue;
            }
            let full = fit_l1(&oracle, tau, &opts).unwrap();
            assert_eq!(
                support_of(&full.beta),
                support_of(&check.beta),
                "seed {seed}"
            );
            assert!(
                (&full.beta - &check.beta).amax() <= 10.0 * opts.kkt_tol,
                "seed {seed}: {}",
                (&full.beta - &check.beta).amax()
            );
        }
    }

    #[test]
    fn objective_trace_is_monotone() {
        for (i, model) in [
            ModelSpec::Linear { c: 0.5 },
            ModelSpec::Logistic,
            ModelSpec::Gamma { k: 1.0, mu_n: 0.5 },
            ModelSpec::GraphSelect { d: 3 },
        ]
        .into_iter()
        .enumerate()
        {
            let oracle = random_oracle(model, 40, 5, 300 + i as u64);
            let (_, trace) = fit_l1_traced(&oracle, 0.02, &SolverOptions::default()).unwrap();
            for w in trace.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()),
                    "objective increased: {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn kkt_residual_reverifies_independently() {
        let oracle = random_oracle(ModelSpec::Logistic, 50, 6, 8);
        let opts = SolverOptions::default();
        let est = fit_l1(&oracle, 0.03, &opts).unwrap();
        assert!(est.converged);
        let fresh = oracle.gradient(&est.beta).unwrap();
        let residual = kkt_residual(&est.beta, &fresh, 0.03, None);
        assert!(residual <= opts.kkt_tol, "{residual}");
        assert!((residual - est.kkt_residual).abs() < 1e-14);
    }

    #[test]
    fn error_bound_radius_holds_for_restricted_gamma_fit() {
        let oracle = random_oracle(ModelSpec::Gamma { k: 2.0, mu_n: 0.5 }, 400, 5, 9);
        let mut beta = DVector::zeros(5);
        beta[0] = 1.0;
        beta[3] = 1.5;
        let truth = GroundTruth::from_beta(beta);
        let h = oracle.hessian(&truth.beta_star).unwrap();
        let lambda = restricted_hessian_lambda_min(&h, &truth.support).unwrap();
        let alpha = irrepresentability_alpha(&h, &truth.support).unwrap().clamp(0.05, 1.0);
        let grad = oracle.gradient(&truth.beta_star).unwrap().amax();
        let tau = (4.0 * grad / alpha).max(1e-4) * 1.2;
        let (r_n, _) = radii(alpha, lambda, truth.s, tau, 0.0);
        let est = fit_restricted(&oracle, &truth.support, tau, &SolverOptions::default()).unwrap();
        assert!(est.converged);
        let err = (&est.beta - &truth.beta_star).norm();
        assert!(err <= r_n, "error {err} exceeds radius {r_n}");
    }

    #[test]
    fn graph_fit_stays_pd_and_sparsifies() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let d = 4;
        // well-conditioned covariance with weak off-diagonal structure
        let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-0.2..0.2));
        let sigma = &a * a.transpose() + DMatrix::identity(d, d);
        let oracle = LossOracle::new(
            ModelSpec::GraphSelect { d },
            Dataset::covariance(sigma, 50).unwrap(),
        )
        .unwrap();
        let est = fit_l1(&oracle, 0.3, &SolverOptions::default()).unwrap();
        assert!(est.converged);
        let theta = crate::loss_models::unvec_row_major(&est.beta, d);
        // exactly symmetric (the gradient step is symmetrized), positive
        // definite, with exact zeros from the prox
        assert_eq!((&theta - theta.transpose()).amax(), 0.0);
        let min_eig = theta
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!(min_eig > 0.0);
        let zeros = est.beta.iter().filter(|&&v| v == 0.0).count();
        assert!(zeros > 0, "expected exact zeros at tau = 0.3");
    }

    #[test]
    fn max_iters_returns_best_iterate_unconverged() {
        let oracle = random_oracle(ModelSpec::Logistic, 50, 6, 11);
        let opts = SolverOptions {
            max_iters: 3,
            ..Default::default()
        };
        let est = fit_l1(&oracle, 0.001, &opts).unwrap();
        assert!(!est.converged);
        assert_eq!(est.iterations, 3);
        assert!(est.kkt_residual > opts.kkt_tol);
    }

    #[test]
    fn gamma_without_feasible_start_errors() {
        // rows e1 and -e1 force the least-squares start to the origin, which
        // is infeasible
        let x = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let y = DVector::from_row_slice(&[1.0, 1.0]);
        let oracle = LossOracle::new(
            ModelSpec::Gamma { k: 1.0, mu_n: 1.0 },
            Dataset::regression(x, y).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            fit_l1(&oracle, 0.1, &SolverOptions::default()),
            Err(Error::NoFeasibleStart(_))
        ));
    }

    #[test]
    fn gamma_caller_supplied_start_is_used() {
        let oracle = random_oracle(ModelSpec::Gamma { k: 1.0, mu_n: 0.5 }, 30, 4, 12);
        let opts = SolverOptions {
            start: Some(DVector::from_element(4, 0.8)),
            ..Default::default()
        };
        let est = fit_l1(&oracle, 0.05, &opts).unwrap();
        assert!(est.converged);
        assert!(oracle.in_domain(&est.beta));
    }

    #[test]
    fn uniqueness_margin_is_positive_at_restricted_solutions() {
        for (i, model) in [ModelSpec::Logistic, ModelSpec::Gamma { k: 1.0, mu_n: 0.5 }]
            .into_iter()
            .enumerate()
        {
            let oracle = random_oracle(model, 60, 5, 500 + i as u64);
            let mut beta = DVector::zeros(5);
            beta[0] = 1.0;
            beta[2] = 0.8;
            let truth = GroundTruth::from_beta(beta);
            let est =
                fit_restricted(&oracle, &truth.support, 0.02, &SolverOptions::default()).unwrap();
            assert!(est.converged);
            let margin =
                restricted_uniqueness_margin(&oracle, &est.beta, &truth.support).unwrap();
            assert!(margin > 1e-10, "{}: margin {margin}", oracle.name());
        }
    }

    #[test]
    fn recovery_assessment_cases() {
        let truth = GroundTruth::from_beta(DVector::from_row_slice(&[1.0, 0.0, -2.0]));
        let same = recovery_assess(&truth.beta_star.clone(), &truth);
        assert!(same.support_match && same.sign_match);
        assert_eq!(same.l2_error, 0.0);

        let flipped = recovery_assess(&(-&truth.beta_star), &truth);
        assert!(flipped.support_match && !flipped.sign_match);
        assert!((flipped.l2_error - 2.0 * truth.beta_star.norm()).abs() < 1e-12);

        let null = recovery_assess(&DVector::zeros(3), &truth);
        assert!(!null.support_match && !null.sign_match);
        assert!((null.l2_error - truth.beta_star.norm()).abs() < 1e-12);
    }

    #[test]
    fn graph_solver_iterates_stay_pd_under_aggressive_steps() {
        // start from a matrix close to the PD boundary to exercise the
        // segment safeguard
        let d = 3;
        let sigma = DMatrix::identity(d, d) * 2.0;
        let oracle = LossOracle::new(
            ModelSpec::GraphSelect { d },
            Dataset::covariance(sigma, 20).unwrap(),
        )
        .unwrap();
        let mut start = DMatrix::identity(d, d) * 5.0;
        start[(0, 0)] = 1e-3;
        let opts = SolverOptions {
            start: Some(vec_row_major(&start)),
            initial_step: 10.0,
            ..Default::default()
        };
        let est = fit_l1(&oracle, 0.05, &opts).unwrap();
        assert!(est.converged);
        assert!(oracle.in_domain(&est.beta));
    }

    #[test]
    fn estimate_serializes_beta_as_plain_array() {
        let oracle = scalar_linear(1.0);
        let est = fit_l1(&oracle, 0.3, &SolverOptions::default()).unwrap();
        let json = serde_json::to_value(&est).unwrap();
        assert!(json["beta"].is_array());
        let back: Estimate = serde_json::from_value(json).unwrap();
        assert_eq!(back.beta, est.beta);
    }
}
