//! Least-squares fits used for starting values and for the scale of the coefficient priors.

use nalgebra::{DMatrix, DVector};

use crate::linalg::rcond_symmetric;

/// Ridge added to `X'X` (relative to its largest diagonal entry) when it is near-singular.
pub const OLS_RIDGE: f64 = 1e-8;
/// Lower bound on each prior variance entry.
pub const MIN_PRIOR_VAR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coef: DVector<f64>,
    /// Diagonal of `s^2 (X'X)^{-1}`, floored at [`MIN_PRIOR_VAR`].
    pub coef_var: DVector<f64>,
    /// Residual variance `SSR / (n - p)`, or `SSR / n` when `n <= p`.
    pub resid_var: f64,
}

pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> OlsFit {
    let (n, p) = x.shape();
    let mut xtx = x.transpose() * x;
    if rcond_symmetric(&xtx) < 1e-12 {
        let scale = xtx.diagonal().amax().max(1.0);
        for j in 0..p {
            xtx[(j, j)] += OLS_RIDGE * scale;
        }
    }
    let inv = xtx
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| xtx.clone().pseudo_inverse(1e-14).ok())
        .unwrap_or_else(|| DMatrix::identity(p, p));
    let coef = &inv * (x.transpose() * y);
    let resid = y - x * &coef;
    let ssr = resid.norm_squared();
    let dof = if n > p { n - p } else { n.max(1) };
    let resid_var = ssr / dof as f64;
    let coef_var = DVector::from_fn(p, |j, _| (resid_var * inv[(j, j)]).max(MIN_PRIOR_VAR));
    OlsFit {
        coef,
        coef_var,
        resid_var,
    }
}
