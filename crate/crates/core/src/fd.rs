//! Central-difference derivative probes.
//!
//! These operate on plain closures and are kept independent of the analytic
//! oracle implementations they are used to cross-check.

use nalgebra::{DMatrix, DVector};

/// Central-difference gradient of a scalar function.
pub fn grad_fd(f: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let p = x.len();
    let mut out = DVector::zeros(p);
    let mut probe = x.clone();
    for j in 0..p {
        probe[j] = x[j] + h;
        let plus = f(&probe);
        probe[j] = x[j] - h;
        let minus = f(&probe);
        probe[j] = x[j];
        out[j] = (plus - minus) / (2.0 * h);
    }
    out
}

/// Central-difference Jacobian of a gradient map (an approximate Hessian).
pub fn hessian_fd(
    grad: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
    h: f64,
) -> DMatrix<f64> {
    let p = x.len();
    let mut out = DMatrix::zeros(p, p);
    let mut probe = x.clone();
    for j in 0..p {
        probe[j] = x[j] + h;
        let plus = grad(&probe);
        probe[j] = x[j] - h;
        let minus = grad(&probe);
        probe[j] = x[j];
        let col = (plus - minus) / (2.0 * h);
        out.set_column(j, &col);
    }
    out
}

/// Directional third-order form `(H(x+hu) - H(x-hu)) / (2h) * u`, the
/// finite-difference counterpart of `D^3 f(x)[u, u]`.
pub fn third_directional_fd(
    hess: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    x: &DVector<f64>,
    u: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    let plus = hess(&(x + u * h));
    let minus = hess(&(x - u * h));
    ((plus - minus) / (2.0 * h)) * u
}

/// Sup-norm deviation of `a` from the reference `b`, relative to `1 + |b|`.
pub fn rel_err_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / (1.0 + b.amax())
}

/// Matrix analogue of [`rel_err_vec`] in the entrywise sup norm.
pub fn rel_err_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / (1.0 + b.amax())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_derivatives() {
        // f(x) = x0^2 + 3 x0 x1
        let f = |x: &DVector<f64>| x[0] * x[0] + 3.0 * x[0] * x[1];
        let x = DVector::from_row_slice(&[1.0, 2.0]);
        let g = grad_fd(&f, &x, 1e-6);
        assert!((g[0] - 8.0).abs() < 1e-6);
        assert!((g[1] - 3.0).abs() < 1e-6);

        let grad = |x: &DVector<f64>| DVector::from_row_slice(&[2.0 * x[0] + 3.0 * x[1], 3.0 * x[0]]);
        let h = hessian_fd(&grad, &x, 1e-6);
        assert!((h[(0, 0)] - 2.0).abs() < 1e-7);
        assert!((h[(0, 1)] - 3.0).abs() < 1e-7);
    }

    #[test]
    fn cubic_third_form() {
        // f(x) = x0^3 has D^3 f[u,u] = 6 u0^2 e0
        let hess = |x: &DVector<f64>| DMatrix::from_row_slice(1, 1, &[6.0 * x[0]]);
        let x = DVector::from_row_slice(&[0.4]);
        let u = DVector::from_row_slice(&[2.0]);
        let v = third_directional_fd(&hess, &x, &u, 1e-6);
        assert!((v[0] - 24.0).abs() < 1e-5);
    }
}
