//! Gaussian maximum likelihood for VAR coefficients under a zero pattern,
//! via iterated feasible generalized least squares.
//!
//! Free coefficients (plus the always-free intercepts) are embedded into one
//! stacked parameter vector. Each sweep solves the weighted normal equations
//! at the current residual covariance, then refreshes the covariance from the
//! new residuals; the weighting matrix couples equations, so a zero pattern
//! in one equation shifts estimates in the others. Standard errors come from
//! the inverse of the final normal-equations matrix.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Inverse, Solve};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::varmodel::{log_likelihood_from, SupportMask, VarModel};

const GLS_TOL: f64 = 1e-8;
const GLS_MAX_ITER: usize = 50;

/// Constrained fit with per-coefficient inference.
///
/// The vectors `coords`, `estimates`, `std_errors`, `t_stats`, `p_values`
/// are aligned: entry r describes the free coefficient A_{lag+1}(i, j) at
/// `coords[r] = (lag, i, j)`. Intercepts are estimated but carry no entry.
#[derive(Debug, Clone)]
pub struct RestrictedFit {
    pub model: VarModel,
    pub support: SupportMask,
    /// Number of free coefficients, intercepts excluded.
    pub free_params: usize,
    pub coords: Vec<(usize, usize, usize)>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Observations conditioned on (not entering the residual sum).
    pub skip: usize,
}

/// Two-sided tail probability of |t| under the standard normal reference.
pub(crate) fn two_sided_normal_p(t: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * (1.0 - normal.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Restricted fit conditioning on the first p observations.
pub fn fit_restricted(data: &TimeSeries, p: usize, support: &SupportMask) -> Result<RestrictedFit> {
    fit_restricted_from(data, p, support, p)
}

/// Restricted fit conditioning on the first `skip >= p` observations, so fits
/// with different lag orders can share one effective sample for criterion
/// comparisons.
pub fn fit_restricted_from(
    data: &TimeSeries,
    p: usize,
    support: &SupportMask,
    skip: usize,
) -> Result<RestrictedFit> {
    let k = data.dim();
    if p == 0 {
        return Err(Error::InvalidParam("lag order must be at least 1".into()));
    }
    if support.p() != p || support.dim() != k {
        return Err(Error::DimensionMismatch(format!(
            "support for (p = {}, K = {}) against request (p = {p}, K = {k})",
            support.p(),
            support.dim()
        )));
    }
    if skip < p {
        return Err(Error::InvalidParam(format!(
            "skip = {skip} smaller than lag order {p}"
        )));
    }
    let t_len = data.len();
    if t_len <= skip + 1 {
        return Err(Error::SeriesTooShort {
            t: t_len,
            min: skip + 2,
        });
    }
    let n = t_len - skip;
    let m = 1 + k * p;
    let values = data.values();

    // Column t of z holds (1, Y_{t-1}, ..., Y_{t-p}) for observation t.
    let mut y = Array2::zeros((k, n));
    let mut z = Array2::zeros((m, n));
    for (col, t) in (skip..t_len).enumerate() {
        for i in 0..k {
            y[[i, col]] = values[[t, i]];
        }
        z[[0, col]] = 1.0;
        for lag in 0..p {
            for j in 0..k {
                z[[1 + lag * k + j, col]] = values[[t - 1 - lag, j]];
            }
        }
    }
    let zz = z.dot(&z.t());
    let yz = y.dot(&z.t());

    // Stacked free-parameter layout: intercepts first, then coefficients in
    // (lag, i, j) order. Each entry maps an equation row to a regressor
    // column.
    let mut rows: Vec<usize> = Vec::new();
    let mut cols: Vec<usize> = Vec::new();
    for i in 0..k {
        rows.push(i);
        cols.push(0);
    }
    let mut coords = Vec::new();
    for lag in 0..p {
        for i in 0..k {
            for j in 0..k {
                if support.is_free(lag, i, j) {
                    rows.push(i);
                    cols.push(1 + lag * k + j);
                    coords.push((lag, i, j));
                }
            }
        }
    }
    let q = rows.len();
    let mut per_equation = vec![0usize; k];
    for &i in &rows {
        per_equation[i] += 1;
    }
    let max_eq = per_equation.iter().copied().max().unwrap_or(0);
    if n < max_eq {
        return Err(Error::SeriesTooShort {
            t: t_len,
            min: skip + max_eq,
        });
    }

    let build_g = |sig_inv: &Array2<f64>| -> Array2<f64> {
        let mut g = Array2::zeros((q, q));
        for a in 0..q {
            for b in 0..q {
                g[[a, b]] = sig_inv[[rows[a], rows[b]]] * zz[[cols[a], cols[b]]];
            }
        }
        g
    };
    let build_rhs = |sig_inv: &Array2<f64>| -> Array1<f64> {
        let mut rhs = Array1::zeros(q);
        for a in 0..q {
            let mut acc = 0.0;
            for i2 in 0..k {
                acc += sig_inv[[rows[a], i2]] * yz[[i2, cols[a]]];
            }
            rhs[a] = acc;
        }
        rhs
    };
    let coefficient_matrix = |beta: &Array1<f64>| -> Array2<f64> {
        let mut b_mat = Array2::zeros((k, m));
        for a in 0..q {
            b_mat[[rows[a], cols[a]]] = beta[a];
        }
        b_mat
    };

    let mut sigma = Array2::eye(k);
    let mut beta: Array1<f64> = Array1::zeros(q);
    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=GLS_MAX_ITER {
        iterations = iter;
        let sig_inv = symmetrize(&sigma.inv().map_err(|_| Error::RankDeficient)?);
        let g = build_g(&sig_inv);
        let rhs = build_rhs(&sig_inv);
        let new_beta = g.solve(&rhs).map_err(|_| Error::RankDeficient)?;
        let delta = beta
            .iter()
            .zip(new_beta.iter())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        beta = new_beta;
        let b_mat = coefficient_matrix(&beta);
        let resid = &y - &b_mat.dot(&z);
        sigma = symmetrize(&(resid.dot(&resid.t()) / n as f64));
        if delta < GLS_TOL {
            converged = true;
            break;
        }
    }

    // Inference at the final weighting matrix.
    let sig_inv = symmetrize(&sigma.inv().map_err(|_| Error::RankDeficient)?);
    let g = build_g(&sig_inv);
    let g_inv = g.inv().map_err(|_| Error::RankDeficient)?;

    let b_mat = coefficient_matrix(&beta);
    let intercept = Array1::from_shape_fn(k, |i| b_mat[[i, 0]]);
    let mut coeffs = vec![Array2::zeros((k, k)); p];
    for (lag, cm) in coeffs.iter_mut().enumerate() {
        for i in 0..k {
            for j in 0..k {
                if support.is_free(lag, i, j) {
                    cm[[i, j]] = b_mat[[i, 1 + lag * k + j]];
                }
            }
        }
    }
    let model = VarModel::new(intercept, coeffs, sigma)?;
    let loglik = log_likelihood_from(&model, data, skip)?;

    let mut estimates = Vec::with_capacity(coords.len());
    let mut std_errors = Vec::with_capacity(coords.len());
    let mut t_stats = Vec::with_capacity(coords.len());
    let mut p_values = Vec::with_capacity(coords.len());
    for (r, &(lag, i, j)) in coords.iter().enumerate() {
        let idx = k + r;
        let est = model.coeffs()[lag][[i, j]];
        let se = g_inv[[idx, idx]].max(0.0).sqrt();
        let t = if se > 0.0 { est / se } else { 0.0 };
        estimates.push(est);
        std_errors.push(se);
        t_stats.push(t);
        p_values.push(two_sided_normal_p(t));
    }

    Ok(RestrictedFit {
        model,
        support: support.clone(),
        free_params: coords.len(),
        coords,
        estimates,
        std_errors,
        t_stats,
        p_values,
        loglik,
        converged,
        iterations,
        skip,
    })
}

/// Bayesian information criterion with a caller-supplied parameter count.
pub fn bic(fit: &RestrictedFit, t_len: usize, param_count: usize) -> f64 {
    -2.0 * fit.loglik + (t_len as f64).ln() * param_count as f64
}

fn symmetrize(m: &Array2<f64>) -> Array2<f64> {
    let k = m.nrows();
    Array2::from_shape_fn((k, k), |(i, j)| 0.5 * (m[[i, j]] + m[[j, i]]))
}
