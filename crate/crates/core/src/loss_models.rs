//! Differentiable oracles for the four loss families.
//!
//! Each oracle evaluates the empirical loss `L_n`, its gradient and Hessian,
//! and the third-order directional forms `D^3 L_n(b)[u,u]` (a vector) and
//! `D^3 L_n(b)[u,v,w]` (a scalar). The third-order forms are analytic per
//! model; finite differences are used only in tests.
//!
//! Parameters are dense vectors. The graph-selection loss acts on a `d x d`
//! concentration matrix vectorized row-major (`p = d^2`); evaluation goes
//! through the symmetrized matrix `(T + T')/2`, so the loss is smooth and
//! convex on the open set of vectors whose symmetric part is positive
//! definite.

use std::sync::Mutex;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Loss family plus its model constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Halved squared loss; responses carry additive sub-Gaussian noise with
    /// parameter `c > 0`.
    Linear { c: f64 },
    /// Bernoulli log-loss with responses in {0, 1}.
    Logistic,
    /// Gamma log-loss with known shape `k > 0`; `mu_n` is the realized
    /// predictor floor `min_i <x_i, beta*>` recorded at generation time.
    Gamma { k: f64, mu_n: f64 },
    /// Trace-plus-negative-log-determinant loss over `d x d` concentration
    /// matrices; the parameter dimension is `p = d^2`.
    GraphSelect { d: usize },
}

/// Loss family without instance-realized constants; used by configs where the
/// dimension and the gamma predictor floor are determined per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelFamily {
    Linear { c: f64 },
    Logistic,
    Gamma { k: f64 },
    GraphSelect,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::Linear { c } => {
                if c <= 0.0 {
                    return Err(Error::InvalidData(format!("linear noise c={c} must be > 0")));
                }
            }
            ModelSpec::Logistic => {}
            ModelSpec::Gamma { k, mu_n } => {
                if k <= 0.0 {
                    return Err(Error::InvalidData(format!("gamma shape k={k} must be > 0")));
                }
                if mu_n <= 0.0 {
                    return Err(Error::InvalidData(format!(
                        "gamma predictor floor mu_n={mu_n} must be > 0"
                    )));
                }
            }
            ModelSpec::GraphSelect { d } => {
                if d < 1 {
                    return Err(Error::InvalidData("graph dimension d must be >= 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Linear { .. } => "linear",
            ModelSpec::Logistic => "logistic",
            ModelSpec::Gamma { .. } => "gamma",
            ModelSpec::GraphSelect { .. } => "graph_select",
        }
    }
}

impl ModelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::Linear { .. } => "linear",
            ModelFamily::Logistic => "logistic",
            ModelFamily::Gamma { .. } => "gamma",
            ModelFamily::GraphSelect => "graph_select",
        }
    }
}

/// Observations an oracle is built from.
///
/// Regression models carry a design matrix with rows `x_i` and a response
/// vector; the graph-selection model carries a sample covariance and the
/// sample count behind it.
#[derive(Debug, Clone)]
pub enum Dataset {
    Regression { x: DMatrix<f64>, y: DVector<f64> },
    Covariance { sigma_hat: DMatrix<f64>, n: usize },
}

/// Relative tolerance for the column-norm bound `||X_.j||_2 <= sqrt(n)`.
const COL_NORM_RTOL: f64 = 1e-9;
/// Eigenvalue tolerance for positive semidefiniteness of a sample covariance.
const PSD_TOL: f64 = 1e-10;

impl Dataset {
    /// Builds a regression dataset, enforcing the column normalization
    /// `||X_.j||_2 <= sqrt(n)` up to relative tolerance 1e-9.
    pub fn regression(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let n = x.nrows();
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "design has {n} rows but response has {} entries",
                y.len()
            )));
        }
        let bound = (n as f64).sqrt() * (1.0 + COL_NORM_RTOL);
        for j in 0..x.ncols() {
            let norm = x.column(j).norm();
            if norm > bound {
                return Err(Error::InvalidData(format!(
                    "column {j} has norm {norm:.6} > sqrt(n)={:.6}",
                    (n as f64).sqrt()
                )));
            }
        }
        Ok(Dataset::Regression { x, y })
    }

    /// Builds a covariance dataset. The matrix is symmetrized as
    /// `(S + S')/2` and must be positive semidefinite up to eigenvalue
    /// tolerance -1e-10 (scaled by the largest eigenvalue).
    pub fn covariance(sigma_hat: DMatrix<f64>, n: usize) -> Result<Self> {
        if sigma_hat.nrows() != sigma_hat.ncols() {
            return Err(Error::DimensionMismatch(
                "sample covariance must be square".into(),
            ));
        }
        let sym = (&sigma_hat + sigma_hat.transpose()) * 0.5;
        let eigs = sym.clone().symmetric_eigen().eigenvalues;
        let max = eigs.iter().cloned().fold(0.0_f64, f64::max);
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOL * max.max(1.0) {
            return Err(Error::InvalidData(format!(
                "sample covariance has eigenvalue {min:.3e} below the PSD tolerance"
            )));
        }
        Ok(Dataset::Covariance { sigma_hat: sym, n })
    }
}

/// Common surface for losses with third-order information.
///
/// Implementations must be deterministic: identical arguments yield
/// bit-identical outputs.
pub trait SmoothLoss: Sync {
    /// Ambient parameter dimension `p`.
    fn dim(&self) -> usize;

    /// Whether `point` lies in the open domain of the loss.
    fn in_domain(&self, point: &DVector<f64>) -> bool;

    fn value(&self, point: &DVector<f64>) -> Result<f64>;

    fn gradient(&self, point: &DVector<f64>) -> Result<DVector<f64>>;

    fn hessian(&self, point: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// The vector `v` with `<v, w> = D^3 L(point)[u, u, w]` for all `w`.
    fn third_directional(&self, point: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>>;

    /// The scalar `D^3 L(point)[u, v, w]`, symmetric in its arguments.
    fn third_trilinear(
        &self,
        point: &DVector<f64>,
        u: &DVector<f64>,
        v: &DVector<f64>,
        w: &DVector<f64>,
    ) -> Result<f64>;

    fn name(&self) -> &str {
        "custom"
    }

    /// Canonical strictly feasible starting point for solvers, restricted to
    /// `active` coordinates when given. `None` when no such point is known.
    fn feasible_start(&self, _active: Option<&[usize]>) -> Option<DVector<f64>> {
        let zero = DVector::zeros(self.dim());
        self.in_domain(&zero).then_some(zero)
    }

    /// Projects a solver step direction onto the parameterization's
    /// structural constraints. Graph selection symmetrizes so that iterates
    /// stay exactly symmetric; other losses leave the step untouched.
    fn project_step(&self, _step: &mut DVector<f64>) {}
}

enum PointCache {
    /// Per-sample linear predictors `X b` for regression models.
    Predictors(DVector<f64>),
    /// Inverse and log-determinant of the symmetrized concentration matrix.
    Inverse { m: DMatrix<f64>, log_det: f64 },
}

/// A loss family bound to a dataset.
///
/// Immutable after construction and safe to share across threads; all
/// evaluations are pure functions of `(oracle, arguments)`. A single-slot
/// cache keyed on the bit pattern of the evaluation point avoids recomputing
/// per-sample predictors (or the matrix inverse) when several derivative
/// forms are requested at the same point.
pub struct LossOracle {
    spec: ModelSpec,
    data: Dataset,
    cache: Mutex<Option<(Vec<u64>, PointCache)>>,
}

fn bit_key(v: &DVector<f64>) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

impl LossOracle {
    pub fn new(spec: ModelSpec, data: Dataset) -> Result<Self> {
        spec.validate()?;
        match (&spec, &data) {
            (ModelSpec::GraphSelect { d }, Dataset::Covariance { sigma_hat, .. }) => {
                if sigma_hat.nrows() != *d {
                    return Err(Error::DimensionMismatch(format!(
                        "covariance is {}x{} but the model declares d={d}",
                        sigma_hat.nrows(),
                        sigma_hat.ncols()
                    )));
                }
            }
            (ModelSpec::GraphSelect { .. }, _) => {
                return Err(Error::InvalidData(
                    "graph selection needs a covariance dataset".into(),
                ));
            }
            (_, Dataset::Covariance { .. }) => {
                return Err(Error::InvalidData(
                    "regression models need a design/response dataset".into(),
                ));
            }
            (ModelSpec::Logistic, Dataset::Regression { y, .. })
                if y.iter().any(|&v| v != 0.0 && v != 1.0) =>
            {
                return Err(Error::InvalidData(
                    "logistic responses must be exactly 0 or 1".into(),
                ));
            }
            _ => {}
        }
        Ok(LossOracle {
            spec,
            data,
            cache: Mutex::new(None),
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    /// Number of samples behind the empirical loss.
    pub fn n_samples(&self) -> usize {
        match &self.data {
            Dataset::Regression { x, .. } => x.nrows(),
            Dataset::Covariance { n, .. } => *n,
        }
    }

    pub(crate) fn design(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        match &self.data {
            Dataset::Regression { x, y } => (x, y),
            Dataset::Covariance { .. } => unreachable!("regression accessor on covariance data"),
        }
    }

    fn sigma_hat(&self) -> &DMatrix<f64> {
        match &self.data {
            Dataset::Covariance { sigma_hat, .. } => sigma_hat,
            Dataset::Regression { .. } => unreachable!("covariance accessor on regression data"),
        }
    }

    fn check_dim(&self, point: &DVector<f64>) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has length {} but the oracle dimension is {}",
                point.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Per-sample predictors `X b`, served from the point cache when the same
    /// point was evaluated last.
    fn predictors(&self, point: &DVector<f64>) -> DVector<f64> {
        let key = bit_key(point);
        {
            let guard = self.cache.lock().unwrap();
            if let Some((k, PointCache::Predictors(t))) = guard.as_ref() {
                if *k == key {
                    return t.clone();
                }
            }
        }
        let (x, _) = self.design();
        let t = x * point;
        *self.cache.lock().unwrap() = Some((key, PointCache::Predictors(t.clone())));
        t
    }

    /// Positive gamma predictors, or the domain violation that prevents them.
    fn gamma_predictors(&self, point: &DVector<f64>) -> Result<DVector<f64>> {
        let t = self.predictors(point);
        let min = t.iter().cloned().fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            return Err(Error::DomainViolation(format!(
                "gamma predictor min_i <x_i, b> = {min:.6e} is not positive"
            )));
        }
        Ok(t)
    }

    fn graph_dim(&self) -> usize {
        match self.spec {
            ModelSpec::GraphSelect { d } => d,
            _ => unreachable!(),
        }
    }

    /// Reshapes a vectorized parameter into its symmetrized `d x d` matrix.
    fn sym_matrix(&self, point: &DVector<f64>) -> DMatrix<f64> {
        let d = self.graph_dim();
        let theta = DMatrix::from_row_slice(d, d, point.as_slice());
        (&theta + theta.transpose()) * 0.5
    }

    /// Inverse and log-determinant of the raw (unsymmetrized) matrix, cached
    /// per evaluation point. The domain is the open set of matrices whose
    /// symmetric part is positive definite; on it the determinant is
    /// strictly positive, so the log-determinant extends off the symmetric
    /// subspace and coordinate finite differences probe the same field the
    /// analytic derivatives describe.
    fn graph_inverse(&self, point: &DVector<f64>) -> Result<(DMatrix<f64>, f64)> {
        let key = bit_key(point);
        {
            let guard = self.cache.lock().unwrap();
            if let Some((k, PointCache::Inverse { m, log_det })) = guard.as_ref() {
                if *k == key {
                    return Ok((m.clone(), *log_det));
                }
            }
        }
        if Cholesky::new(self.sym_matrix(point)).is_none() {
            return Err(Error::DomainViolation(
                "concentration matrix is not positive definite".into(),
            ));
        }
        let d = self.graph_dim();
        let theta = DMatrix::from_row_slice(d, d, point.as_slice());
        let lu = theta.lu();
        let det = lu.determinant();
        if det <= 0.0 || !det.is_finite() {
            return Err(Error::DomainViolation(
                "concentration matrix has a non-positive determinant".into(),
            ));
        }
        let m = lu.try_inverse().ok_or_else(|| {
            Error::DomainViolation("concentration matrix is numerically singular".into())
        })?;
        let log_det = det.ln();
        *self.cache.lock().unwrap() = Some((
            key,
            PointCache::Inverse {
                m: m.clone(),
                log_det,
            },
        ));
        Ok((m, log_det))
    }
}

/// Row-major vectorization of a `d x d` matrix.
pub fn vec_row_major(m: &DMatrix<f64>) -> DVector<f64> {
    let d = m.nrows();
    DVector::from_fn(d * m.ncols(), |idx, _| m[(idx / d, idx % d)])
}

/// Inverse of [`vec_row_major`] for square matrices.
pub fn unvec_row_major(v: &DVector<f64>, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| v[i * d + j])
}

fn sym_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

impl SmoothLoss for LossOracle {
    fn dim(&self) -> usize {
        match (&self.spec, &self.data) {
            (ModelSpec::GraphSelect { d }, _) => d * d,
            (_, Dataset::Regression { x, .. }) => x.ncols(),
            _ => unreachable!(),
        }
    }

    fn in_domain(&self, point: &DVector<f64>) -> bool {
        if point.len() != self.dim() || point.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self.spec {
            ModelSpec::Linear { .. } | ModelSpec::Logistic => true,
            ModelSpec::Gamma { .. } => {
                let t = self.predictors(point);
                t.iter().all(|&v| v > 0.0)
            }
            ModelSpec::GraphSelect { .. } => self.graph_inverse(point).is_ok(),
        }
    }

    fn value(&self, point: &DVector<f64>) -> Result<f64> {
        self.check_dim(point)?;
        match self.spec {
            ModelSpec::Linear { .. } => {
                let (x, y) = self.design();
                let n = x.nrows() as f64;
                let r = self.predictors(point) - y;
                Ok(r.norm_squared() / (2.0 * n))
            }
            ModelSpec::Logistic => {
                let (x, y) = self.design();
                let n = x.nrows() as f64;
                let t = self.predictors(point);
                let mut total = 0.0;
                for i in 0..x.nrows() {
                    let z = (2.0 * y[i] - 1.0) * t[i];
                    total += softplus(-z);
                }
                Ok(total / n)
            }
            ModelSpec::Gamma { .. } => {
                let (x, y) = self.design();
                let n = x.nrows() as f64;
                let t = self.gamma_predictors(point)?;
                let mut total = 0.0;
                for i in 0..x.nrows() {
                    total += -t[i].ln() + y[i] * t[i];
                }
                Ok(total / n)
            }
            ModelSpec::GraphSelect { .. } => {
                let (_, log_det) = self.graph_inverse(point)?;
                let sym = self.sym_matrix(point);
                let trace = (self.sigma_hat() * sym).trace();
                Ok(trace - log_det)
            }
        }
    }

    fn gradient(&self, point: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(point)?;
        match self.spec {
            ModelSpec::Linear { .. } => {
                let (x, y) = self.design();
                let n = x.nrows() as f64;
                let r = self.predictors(point) - y;
                Ok(x.tr_mul(&r) / n)
            }
            ModelSpec::Logistic => {
                let (x, y) = self.design();
                let n = x.nrows() as f64;
                let t = self.predictors(point);
                let resid = DVector::from_fn(x.nrows(), |i, _| sigmoid(t[i]) - y[i]);
                Ok(x.tr_mul(&resid) / n)
            }
            ModelSpec::Gamma { .. } => {
                let (x, y) = self.design();
                let n = x.nrows() as f64;
                let t = self.gamma_predictors(point)?;
                let resid = DVector::from_fn(x.nrows(), |i, _| y[i] - 1.0 / t[i]);
                Ok(x.tr_mul(&resid) / n)
            }
            ModelSpec::GraphSelect { .. } => {
                let (m, _) = self.graph_inverse(point)?;
                Ok(vec_row_major(&(self.sigma_hat() - m)))
            }
        }
    }

    fn hessian(&self, point: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(point)?;
        match self.spec {
            ModelSpec::Linear { .. } => {
                let (x, _) = self.design();
                let n = x.nrows() as f64;
                Ok(x.tr_mul(x) / n)
            }
            ModelSpec::Logistic => {
                let (x, _) = self.design();
                let n = x.nrows() as f64;
                let t = self.predictors(point);
                let mut scaled = x.clone();
                for i in 0..x.nrows() {
                    let s = sigmoid(t[i]);
                    scaled.row_mut(i).scale_mut(s * (1.0 - s));
                }
                Ok(x.tr_mul(&scaled) / n)
            }
            ModelSpec::Gamma { .. } => {
                let (x, _) = self.design();
                let n = x.nrows() as f64;
                let t = self.gamma_predictors(point)?;
                let mut scaled = x.clone();
                for i in 0..x.nrows() {
                    scaled.row_mut(i).scale_mut(1.0 / (t[i] * t[i]));
                }
                Ok(x.tr_mul(&scaled) / n)
            }
            ModelSpec::GraphSelect { .. } => {
                let d = self.graph_dim();
                let (m, _) = self.graph_inverse(point)?;
                // Kronecker form H[(i,j),(k,l)] = M_ik M_jl, the Jacobian of
                // the gradient field vec(S - T^-1): positive definite, and
                // its restricted blocks stay invertible on supports that
                // contain both orientations of an off-diagonal entry.
                let p = d * d;
                let mut h = DMatrix::zeros(p, p);
                for i in 0..d {
                    for j in 0..d {
                        let row = i * d + j;
                        for k in 0..d {
                            for l in 0..d {
                                h[(row, k * d + l)] = m[(i, k)] * m[(j, l)];
                            }
                        }
                    }
                }
                Ok(h)
            }
        }
    }

    fn third_directional(&self, point: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(point)?;
        self.check_dim(u)?;
        match self.spec {
            ModelSpec::Linear { .. } => Ok(DVector::zeros(self.dim())),
            ModelSpec::Logistic => {
                let (x, _) = self.design();
                let n = x.nrows() as f64;
                let t = self.predictors(point);
                let a = x * u;
                let coef = DVector::from_fn(x.nrows(), |i, _| {
                    let s = sigmoid(t[i]);
                    s * (1.0 - s) * (1.0 - 2.0 * s) * a[i] * a[i]
                });
                Ok(x.tr_mul(&coef) / n)
            }
            ModelSpec::Gamma { .. } => {
                let (x, _) = self.design();
                let n = x.nrows() as f64;
                let t = self.gamma_predictors(point)?;
                let a = x * u;
                let coef = DVector::from_fn(x.nrows(), |i, _| {
                    -2.0 * a[i] * a[i] / (t[i] * t[i] * t[i])
                });
                Ok(x.tr_mul(&coef) / n)
            }
            ModelSpec::GraphSelect { .. } => {
                let d = self.graph_dim();
                let (m, _) = self.graph_inverse(point)?;
                // third-order forms act through symmetrized directions; along
                // symmetric u this is exactly the derivative of the Hessian
                // field, which is all the recovery analysis displaces over
                let u_s = sym_part(&unvec_row_major(u, d));
                let mu = &m * &u_s;
                // -2 M U_s M U_s M, symmetric, so its row-major vectorization
                // represents w -> -2 tr(M W_s M U_s M U_s) exactly.
                let b = &mu * &mu * &m;
                Ok(vec_row_major(&b) * -2.0)
            }
        }
    }

    fn third_trilinear(
        &self,
        point: &DVector<f64>,
        u: &DVector<f64>,
        v: &DVector<f64>,
        w: &DVector<f64>,
    ) -> Result<f64> {
        self.check_dim(point)?;
        for arg in [u, v, w] {
            self.check_dim(arg)?;
        }
        match self.spec {
            ModelSpec::Linear { .. } => Ok(0.0),
            ModelSpec::Logistic => {
                let (x, _) = self.design();
                let n = x.nrows() as f64;
                let t = self.predictors(point);
                let (a, b, c) = (x * u, x * v, x * w);
                let mut total = 0.0;
                for i in 0..x.nrows() {
                    let s = sigmoid(t[i]);
                    total += s * (1.0 - s) * (1.0 - 2.0 * s) * a[i] * b[i] * c[i];
                }
                Ok(total / n)
            }
            ModelSpec::Gamma { .. } => {
                let (x, _) = self.design();
                let n = x.nrows() as f64;
                let t = self.gamma_predictors(point)?;
                let (a, b, c) = (x * u, x * v, x * w);
                let mut total = 0.0;
                for i in 0..x.nrows() {
                    total += -2.0 * a[i] * b[i] * c[i] / (t[i] * t[i] * t[i]);
                }
                Ok(total / n)
            }
            ModelSpec::GraphSelect { .. } => {
                let d = self.graph_dim();
                let (m, _) = self.graph_inverse(point)?;
                let u_s = sym_part(&unvec_row_major(u, d));
                let v_s = sym_part(&unvec_row_major(v, d));
                let w_s = sym_part(&unvec_row_major(w, d));
                let (mu, mv, mw) = (&m * u_s, &m * v_s, &m * w_s);
                Ok(-((&mw * &mu * &mv).trace() + (&mu * &mw * &mv).trace()))
            }
        }
    }

    fn name(&self) -> &str {
        self.spec.name()
    }

    fn project_step(&self, step: &mut DVector<f64>) {
        if let ModelSpec::GraphSelect { d } = self.spec {
            let sym = sym_part(&unvec_row_major(step, d));
            step.copy_from(&vec_row_major(&sym));
        }
    }

    fn feasible_start(&self, active: Option<&[usize]>) -> Option<DVector<f64>> {
        match self.spec {
            ModelSpec::Linear { .. } | ModelSpec::Logistic => Some(DVector::zeros(self.dim())),
            ModelSpec::GraphSelect { d } => Some(vec_row_major(&DMatrix::identity(d, d))),
            ModelSpec::Gamma { .. } => {
                // least-squares point aiming at unit predictors <x_i, b> = 1,
                // solved over the active columns
                let (x, _) = self.design();
                let p = self.dim();
                let cols: Vec<usize> = match active {
                    Some(s) => s.to_vec(),
                    None => (0..p).collect(),
                };
                if cols.is_empty() {
                    return None;
                }
                let sub = DMatrix::from_fn(x.nrows(), cols.len(), |i, j| x[(i, cols[j])]);
                let ones = DVector::from_element(x.nrows(), 1.0);
                let sol = sub.svd(true, true).solve(&ones, 1e-12).ok()?;
                let mut start = DVector::zeros(p);
                for (j, &col) in cols.iter().enumerate() {
                    start[col] = sol[j];
                }
                self.in_domain(&start).then_some(start)
            }
        }
    }
}

/// A positively weighted sum of losses sharing one parameter space.
///
/// Derivatives distribute over the terms, so the combined loss inherits a
/// smoothness certificate with constant `sum_i w_i K_i` on the intersection
/// of the terms' neighborhoods.
pub struct ScaledSum<'a> {
    terms: Vec<(f64, &'a dyn SmoothLoss)>,
}

impl<'a> ScaledSum<'a> {
    pub fn new(terms: Vec<(f64, &'a dyn SmoothLoss)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidData("empty loss combination".into()));
        }
        let dim = terms[0].1.dim();
        if terms.iter().any(|(w, l)| *w <= 0.0 || l.dim() != dim) {
            return Err(Error::InvalidData(
                "weights must be positive and dimensions must agree".into(),
            ));
        }
        Ok(ScaledSum { terms })
    }
}

impl SmoothLoss for ScaledSum<'_> {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }

    fn in_domain(&self, point: &DVector<f64>) -> bool {
        self.terms.iter().all(|(_, l)| l.in_domain(point))
    }

    fn value(&self, point: &DVector<f64>) -> Result<f64> {
        let mut total = 0.0;
        for (w, l) in &self.terms {
            total += w * l.value(point)?;
        }
        Ok(total)
    }

    fn gradient(&self, point: &DVector<f64>) -> Result<DVector<f64>> {
        let mut total = DVector::zeros(self.dim());
        for (w, l) in &self.terms {
            total += l.gradient(point)? * *w;
        }
        Ok(total)
    }

    fn hessian(&self, point: &DVector<f64>) -> Result<DMatrix<f64>> {
        let p = self.dim();
        let mut total = DMatrix::zeros(p, p);
        for (w, l) in &self.terms {
            total += l.hessian(point)? * *w;
        }
        Ok(total)
    }

    fn third_directional(&self, point: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let mut total = DVector::zeros(self.dim());
        for (w, l) in &self.terms {
            total += l.third_directional(point, u)? * *w;
        }
        Ok(total)
    }

    fn third_trilinear(
        &self,
        point: &DVector<f64>,
        u: &DVector<f64>,
        v: &DVector<f64>,
        w: &DVector<f64>,
    ) -> Result<f64> {
        let mut total = 0.0;
        for (wt, l) in &self.terms {
            total += wt * l.third_trilinear(point, u, v, w)?;
        }
        Ok(total)
    }

    fn name(&self) -> &str {
        "weighted_sum"
    }
}
