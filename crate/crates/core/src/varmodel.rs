//! VAR(p) models: representation, stability, simulation, conditional
//! likelihood, and iterated forecasting.
//!
//! A model is Y_t = a + A_1 Y_{t-1} + ... + A_p Y_{t-p} + u_t with Gaussian
//! noise u_t ~ N(0, Sigma_u). Stability is certified through the companion
//! matrix: the process is stable iff its spectral radius is below one.

use ndarray::{s, Array1, Array2, Array3};
use ndarray_linalg::{Cholesky, Eig, Eigh, InverseInto, UPLO, SVD};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// A VAR(p) model with intercept and Gaussian noise covariance.
///
/// Serialization goes through the flat row-major layout, so deserialized
/// models re-run the full constructor checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VarModelJson", into = "VarModelJson")]
pub struct VarModel {
    p: usize,
    intercept: Array1<f64>,
    coeffs: Vec<Array2<f64>>,
    noise_cov: Array2<f64>,
}

impl VarModel {
    /// Validates dimensions, symmetry of the noise covariance (tolerance
    /// 1e-12 relative to its largest entry), and positive definiteness.
    pub fn new(
        intercept: Array1<f64>,
        coeffs: Vec<Array2<f64>>,
        noise_cov: Array2<f64>,
    ) -> Result<Self> {
        let k = intercept.len();
        let p = coeffs.len();
        if k == 0 || p == 0 {
            return Err(Error::DimensionMismatch(
                "model needs K >= 1 and p >= 1".into(),
            ));
        }
        for a in &coeffs {
            if a.dim() != (k, k) {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient matrix {:?} for K = {k}",
                    a.dim()
                )));
            }
        }
        if noise_cov.dim() != (k, k) {
            return Err(Error::DimensionMismatch(format!(
                "noise covariance {:?} for K = {k}",
                noise_cov.dim()
            )));
        }
        let finite = intercept.iter().all(|v| v.is_finite())
            && coeffs.iter().all(|a| a.iter().all(|v| v.is_finite()))
            && noise_cov.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("VAR model"));
        }
        let scale = noise_cov.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..k {
            for j in 0..k {
                if (noise_cov[[i, j]] - noise_cov[[j, i]]).abs() > 1e-12 * scale {
                    return Err(Error::NotPositiveDefinite("noise covariance not symmetric"));
                }
            }
        }
        let (eigs, _) = noise_cov.eigh(UPLO::Lower)?;
        if eigs[0] <= 0.0 {
            return Err(Error::NotPositiveDefinite(
                "noise covariance has a non-positive eigenvalue",
            ));
        }
        Ok(Self {
            p,
            intercept,
            coeffs,
            noise_cov,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.intercept.len()
    }

    pub fn intercept(&self) -> &Array1<f64> {
        &self.intercept
    }

    pub fn coeffs(&self) -> &[Array2<f64>] {
        &self.coeffs
    }

    pub fn noise_cov(&self) -> &Array2<f64> {
        &self.noise_cov
    }

    /// Noise precision Theta_u = Sigma_u^{-1}, symmetrized.
    pub fn noise_precision(&self) -> Result<Array2<f64>> {
        let inv = self.noise_cov.clone().inv_into()?;
        let mut sym = Array2::zeros(inv.dim());
        for i in 0..inv.nrows() {
            for j in 0..inv.ncols() {
                sym[[i, j]] = 0.5 * (inv[[i, j]] + inv[[j, i]]);
            }
        }
        Ok(sym)
    }

    /// Kp x Kp companion matrix [[A_1 .. A_p], [I, 0]].
    pub fn companion(&self) -> Array2<f64> {
        let k = self.dim();
        let kp = k * self.p;
        let mut c = Array2::zeros((kp, kp));
        for (lag, a) in self.coeffs.iter().enumerate() {
            c.slice_mut(s![0..k, lag * k..(lag + 1) * k]).assign(a);
        }
        for i in k..kp {
            c[[i, i - k]] = 1.0;
        }
        c
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&VarModelJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: VarModelJson = serde_json::from_str(text)?;
        raw.try_into()
    }
}

/// JSON interchange form: coefficient and covariance matrices flattened
/// row-major, one flat array per lag.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct VarModelJson {
    p: usize,
    intercept: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
    noise_cov: Vec<f64>,
}

impl From<&VarModel> for VarModelJson {
    fn from(m: &VarModel) -> Self {
        Self {
            p: m.p,
            intercept: m.intercept.to_vec(),
            coeffs: m
                .coeffs
                .iter()
                .map(|a| a.iter().copied().collect())
                .collect(),
            noise_cov: m.noise_cov.iter().copied().collect(),
        }
    }
}

impl From<VarModel> for VarModelJson {
    fn from(m: VarModel) -> Self {
        Self::from(&m)
    }
}

impl TryFrom<VarModelJson> for VarModel {
    type Error = Error;

    fn try_from(raw: VarModelJson) -> Result<Self> {
        let k = raw.intercept.len();
        if raw.p != raw.coeffs.len() {
            return Err(Error::DimensionMismatch(format!(
                "p = {} but {} coefficient matrices",
                raw.p,
                raw.coeffs.len()
            )));
        }
        let mut coeffs = Vec::with_capacity(raw.p);
        for flat in raw.coeffs {
            if flat.len() != k * k {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient matrix with {} entries for K = {k}",
                    flat.len()
                )));
            }
            coeffs.push(
                Array2::from_shape_vec((k, k), flat)
                    .map_err(|e| Error::DimensionMismatch(e.to_string()))?,
            );
        }
        if raw.noise_cov.len() != k * k {
            return Err(Error::DimensionMismatch(format!(
                "noise covariance with {} entries for K = {k}",
                raw.noise_cov.len()
            )));
        }
        let noise_cov = Array2::from_shape_vec((k, k), raw.noise_cov)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        VarModel::new(Array1::from(raw.intercept), coeffs, noise_cov)
    }
}

/// Zero-pattern over coefficients, with the pair-level view used by the
/// screening stages.
///
/// `pair` is symmetric with a true diagonal: a series may always load on its
/// own lags. An absent pair (i,j) forces A_k(i,j) = A_k(j,i) = 0 for every
/// lag, so `coeff` entries can only be free where the pair allows them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportMask {
    coeff: Array3<bool>,
    pair: Array2<bool>,
}

impl SupportMask {
    /// Everything free.
    pub fn full(p: usize, k: usize) -> Self {
        Self {
            coeff: Array3::from_elem((p, k, k), true),
            pair: Array2::from_elem((k, k), true),
        }
    }

    /// Only diagonal coefficients free (no cross-series pair selected).
    pub fn diagonal(p: usize, k: usize) -> Self {
        let coeff = Array3::from_shape_fn((p, k, k), |(_, i, j)| i == j);
        let pair = Array2::from_shape_fn((k, k), |(i, j)| i == j);
        Self { coeff, pair }
    }

    /// Nothing free, not even diagonals; only intercepts remain estimable.
    pub fn empty(p: usize, k: usize) -> Self {
        Self {
            coeff: Array3::from_elem((p, k, k), false),
            pair: Array2::from_shape_fn((k, k), |(i, j)| i == j),
        }
    }

    /// Pair-level support: diagonals plus the given unordered pairs, each
    /// freeing A_k(i,j) and A_k(j,i) at every lag.
    pub fn from_pairs(p: usize, k: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut pair = Array2::from_shape_fn((k, k), |(i, j)| i == j);
        for &(i, j) in pairs {
            if i >= k || j >= k || i == j {
                return Err(Error::InvalidParam(format!("pair ({i},{j}) out of range")));
            }
            pair[[i, j]] = true;
            pair[[j, i]] = true;
        }
        let coeff = Array3::from_shape_fn((p, k, k), |(_, i, j)| pair[[i, j]]);
        Ok(Self { coeff, pair })
    }

    /// Symmetric pair matrix (true diagonal) lifted to every lag.
    pub fn from_pair_matrix(p: usize, pair: &Array2<bool>) -> Result<Self> {
        let k = pair.nrows();
        if pair.ncols() != k {
            return Err(Error::DimensionMismatch("pair matrix must be square".into()));
        }
        let mut sym = pair.clone();
        for i in 0..k {
            sym[[i, i]] = true;
            for j in 0..k {
                if pair[[i, j]] != pair[[j, i]] {
                    sym[[i, j]] = true;
                    sym[[j, i]] = true;
                }
            }
        }
        let coeff = Array3::from_shape_fn((p, k, k), |(_, i, j)| sym[[i, j]]);
        Ok(Self { coeff, pair: sym })
    }

    /// Coefficient-level support; the pair view becomes the symmetric
    /// closure of the surviving coefficients.
    pub fn from_coeff(coeff: Array3<bool>) -> Self {
        let (p, k, _) = coeff.dim();
        let pair = Array2::from_shape_fn((k, k), |(i, j)| {
            i == j || (0..p).any(|l| coeff[[l, i, j]] || coeff[[l, j, i]])
        });
        Self { coeff, pair }
    }

    pub fn p(&self) -> usize {
        self.coeff.dim().0
    }

    pub fn dim(&self) -> usize {
        self.pair.nrows()
    }

    pub fn coeff(&self) -> &Array3<bool> {
        &self.coeff
    }

    pub fn pair(&self) -> &Array2<bool> {
        &self.pair
    }

    pub fn is_free(&self, lag: usize, i: usize, j: usize) -> bool {
        self.coeff[[lag, i, j]]
    }

    /// Number of free coefficients (intercepts not included).
    pub fn free_count(&self) -> usize {
        self.coeff.iter().filter(|&&b| b).count()
    }

    /// Number of selected unordered off-diagonal pairs.
    pub fn pair_count(&self) -> usize {
        let k = self.dim();
        let mut n = 0;
        for i in 0..k {
            for j in (i + 1)..k {
                if self.pair[[i, j]] {
                    n += 1;
                }
            }
        }
        n
    }

    /// Same lag count and dimension, and free set contained in `other`'s.
    pub fn is_subset_of(&self, other: &SupportMask) -> bool {
        self.coeff.dim() == other.coeff.dim()
            && self
                .coeff
                .iter()
                .zip(other.coeff.iter())
                .all(|(a, b)| !a || *b)
    }

    /// Restricts to a smaller lag order by dropping trailing lag slices.
    pub fn truncate_lags(&self, p: usize) -> Self {
        let kept = self.coeff.slice(s![..p, .., ..]).to_owned();
        Self {
            coeff: kept,
            pair: self.pair.clone(),
        }
    }
}

/// Companion spectral radius and the strict stability verdict.
pub fn is_stable(model: &VarModel) -> Result<(bool, f64)> {
    let companion = model.companion();
    let (eigs, _) = companion.eig()?;
    let radius = eigs.iter().fold(0.0f64, |m, e| m.max(e.norm()));
    Ok((radius < 1.0, radius))
}

/// Simulates T observations from a stable model, discarding `burn_in` initial
/// samples started from the zero state. Deterministic given `seed`.
pub fn simulate(model: &VarModel, t_len: usize, burn_in: usize, seed: u64) -> Result<TimeSeries> {
    let (stable, radius) = is_stable(model)?;
    if !stable {
        return Err(Error::Unstable { radius });
    }
    if t_len < 2 {
        return Err(Error::SeriesTooShort { t: t_len, min: 2 });
    }
    let k = model.dim();
    let p = model.p();
    let chol = model
        .noise_cov
        .cholesky(UPLO::Lower)
        .map_err(|_| Error::NotPositiveDefinite("noise covariance"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = burn_in + t_len;
    let mut history: Vec<Array1<f64>> = vec![Array1::zeros(k); p];
    let mut out = Array2::zeros((t_len, k));
    let mut z = Array1::zeros(k);
    for t in 0..total {
        for zi in z.iter_mut() {
            *zi = rng.sample::<f64, _>(StandardNormal);
        }
        let mut y = &model.intercept + &chol.dot(&z);
        for (lag, a) in model.coeffs.iter().enumerate() {
            y += &a.dot(&history[history.len() - 1 - lag]);
        }
        if t >= burn_in {
            out.row_mut(t - burn_in).assign(&y);
        }
        history.remove(0);
        history.push(y);
    }
    TimeSeries::with_default_names(out)
}

/// Conditional Gaussian log-likelihood given the first `skip` observations
/// (`skip >= p`). Residuals r_t = Y_t - a - sum_i A_i Y_{t-i} for t >= skip.
pub fn log_likelihood_from(model: &VarModel, data: &TimeSeries, skip: usize) -> Result<f64> {
    let p = model.p();
    let k = model.dim();
    if data.dim() != k {
        return Err(Error::DimensionMismatch(format!(
            "data has {} series, model has {k}",
            data.dim()
        )));
    }
    if skip < p {
        return Err(Error::InvalidParam(format!(
            "skip = {skip} smaller than lag order {p}"
        )));
    }
    let t_len = data.len();
    if t_len <= skip {
        return Err(Error::SeriesTooShort {
            t: t_len,
            min: skip + 1,
        });
    }
    let chol = model
        .noise_cov
        .cholesky(UPLO::Lower)
        .map_err(|_| Error::Singular("noise covariance"))?;
    // log det from the Cholesky factor; quadratic form via triangular solve.
    let log_det: f64 = (0..k).map(|i| chol[[i, i]].ln()).sum::<f64>() * 2.0;
    let values = data.values();
    let n_eff = t_len - skip;
    let mut quad = 0.0;
    for t in skip..t_len {
        let mut r = values.row(t).to_owned() - &model.intercept;
        for (lag, a) in model.coeffs.iter().enumerate() {
            let past = values.row(t - 1 - lag);
            r -= &a.dot(&past.to_owned());
        }
        let w = forward_substitute(&chol, &r);
        quad += w.iter().map(|v| v * v).sum::<f64>();
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(-0.5 * (n_eff as f64) * (k as f64 * two_pi.ln() + log_det) - 0.5 * quad)
}

/// Conditional log-likelihood given the first p observations.
pub fn log_likelihood(model: &VarModel, data: &TimeSeries) -> Result<f64> {
    log_likelihood_from(model, data, model.p())
}

fn forward_substitute(lower: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = b.len();
    let mut x = Array1::zeros(n);
    for i in 0..n {
        let mut acc = b[i];
        for j in 0..i {
            acc -= lower[[i, j]] * x[j];
        }
        x[i] = acc / lower[[i, i]];
    }
    x
}

/// Iterated conditional-mean forecasts for horizons 1..=h; returns an h x K
/// matrix. Unobserved lags are replaced by their forecasts.
pub fn forecast(model: &VarModel, history: &TimeSeries, h: usize) -> Result<Array2<f64>> {
    let p = model.p();
    let k = model.dim();
    if history.dim() != k {
        return Err(Error::DimensionMismatch(format!(
            "history has {} series, model has {k}",
            history.dim()
        )));
    }
    if history.len() < p {
        return Err(Error::InsufficientHistory {
            need: p,
            got: history.len(),
        });
    }
    let values = history.values();
    let mut lags: Vec<Array1<f64>> = (0..p)
        .map(|lag| values.row(values.nrows() - 1 - lag).to_owned())
        .collect();
    let mut out = Array2::zeros((h, k));
    for step in 0..h {
        let mut y = model.intercept.clone();
        for (lag, a) in model.coeffs.iter().enumerate() {
            y += &a.dot(&lags[lag]);
        }
        out.row_mut(step).assign(&y);
        lags.rotate_right(1);
        lags[0] = y;
    }
    Ok(out)
}

/// Random sparse stable VAR: each coefficient entry is nonzero with the given
/// probability, values standard normal, then every lag is divided by the
/// largest singular value of the stacked [A_1 .. A_p] plus 0.1. The division
/// repeats against the companion radius until strictly stable. Noise is unit
/// covariance.
pub fn random_sparse(k: usize, p: usize, density: f64, seed: u64) -> Result<VarModel> {
    if k == 0 || p == 0 {
        return Err(Error::DimensionMismatch("need K >= 1 and p >= 1".into()));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidParam(format!(
            "density {density} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs: Vec<Array2<f64>> = Vec::with_capacity(p);
    for _ in 0..p {
        let mut a = Array2::zeros((k, k));
        for v in a.iter_mut() {
            if rng.random::<f64>() < density {
                *v = rng.sample::<f64, _>(StandardNormal);
            }
        }
        coeffs.push(a);
    }
    let mut stacked = Array2::zeros((k, k * p));
    for (lag, a) in coeffs.iter().enumerate() {
        stacked.slice_mut(s![.., lag * k..(lag + 1) * k]).assign(a);
    }
    let (_, sv, _) = stacked.svd(false, false)?;
    let sigma_max = sv.iter().fold(0.0f64, |m, v| m.max(*v));
    if sigma_max > 0.0 {
        let scale = sigma_max + 0.1;
        for a in &mut coeffs {
            a.mapv_inplace(|v| v / scale);
        }
    }
    let mut model = VarModel::new(Array1::zeros(k), coeffs, Array2::eye(k))?;
    loop {
        let (stable, radius) = is_stable(&model)?;
        if stable {
            return Ok(model);
        }
        let scale = radius + 0.1;
        let coeffs = model
            .coeffs
            .iter()
            .map(|a| a.mapv(|v| v / scale))
            .collect();
        model = VarModel::new(Array1::zeros(k), coeffs, Array2::eye(k))?;
    }
}

/// The three benchmark model fixtures, built from their published precision
/// matrices; the stored covariance is the symmetrized inverse.
pub mod fixtures {
    use super::*;

    fn from_precision(
        coeffs: Vec<Array2<f64>>,
        theta_u: Array2<f64>,
    ) -> Result<VarModel> {
        let k = theta_u.nrows();
        let inv = theta_u.inv_into()?;
        let mut sigma = Array2::zeros((k, k));
        for i in 0..k {
            for j in 0..k {
                sigma[[i, j]] = 0.5 * (inv[[i, j]] + inv[[j, i]]);
            }
        }
        VarModel::new(Array1::zeros(k), coeffs, sigma)
    }

    /// K = 10, p = 1 sparse design with a chained precision first row.
    pub fn model1() -> VarModel {
        let a1 = ndarray::array![
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.3, 0.0, 0.0],
            [0.0, 0.0, 0.1, 0.0, 0.0, 0.0, 0.4, 0.0, 0.0, 0.4],
            [0.0, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.2, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.3, 0.0, 0.1, 0.0, 0.0, 0.2, 0.1, 0.3, 0.5],
            [0.2, 0.0, 0.0, 0.0, 0.4, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.6],
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.6, 0.0, 0.0, 0.0, 0.0],
            [0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.4, 0.0, 0.0, 0.0, 0.0, 0.0]
        ];
        let delta = 0.5;
        let mut theta = Array2::eye(10);
        theta[[0, 0]] = delta;
        for j in 1..10 {
            theta[[0, j]] = delta / (j as f64 + 1.0);
            theta[[j, 0]] = delta / (j as f64 + 1.0);
        }
        from_precision(vec![a1], theta).expect("fixture is well formed")
    }

    /// K = 6, p = 1 design built so selected coefficient entries sit outside
    /// what pairwise inverse-spectrum screening can certify.
    pub fn model2() -> VarModel {
        let a1 = ndarray::array![
            [0.0, 0.50, 0.50, 0.20, 0.0, 0.0],
            [0.0, 0.0, 0.30, 0.0, 0.0, 0.0],
            [0.0, 0.25, 0.50, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.33, 0.33],
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.20],
            [0.0, 0.50, 0.0, 0.0, 0.17, 0.33]
        ];
        let theta = ndarray::array![
            [0.17, 0.0, 0.25, 0.03, 0.0, 0.0],
            [0.0, 1.40, 0.34, 0.25, 0.04, 0.58],
            [0.25, 0.34, 0.55, 0.05, 0.0, 0.0],
            [0.03, 0.25, 0.05, 0.26, 0.0, 0.42],
            [0.0, 0.04, 0.0, 0.0, 1.51, 0.36],
            [0.0, 0.58, 0.0, 0.42, 0.36, 0.98]
        ];
        from_precision(vec![a1], theta).expect("fixture is well formed")
    }

    /// K = 6, p = 2 circulant band design.
    pub fn model3() -> VarModel {
        fn circulant(k: usize, diag: f64, off: f64) -> Array2<f64> {
            let mut m = Array2::zeros((k, k));
            for i in 0..k {
                m[[i, i]] = diag;
                m[[i, (i + 1) % k]] = off;
                m[[i, (i + k - 1) % k]] = off;
            }
            m
        }
        let a1 = circulant(6, -0.6, 0.4);
        let a2 = circulant(6, -0.3, 0.2);
        let theta = circulant(6, 1.0, -0.3);
        from_precision(vec![a1, a2], theta).expect("fixture is well formed")
    }

    /// Looks up a fixture by its config name.
    pub fn by_name(name: &str) -> Result<VarModel> {
        match name {
            "model1" => Ok(model1()),
            "model2" => Ok(model2()),
            "model3" => Ok(model3()),
            other => Err(Error::UnknownFixture(other.to_string())),
        }
    }
}

/// Per-replicate seed derivation (SplitMix64 step), so parallel replicates
/// draw from disjoint deterministic streams.
pub fn replicate_seed(master: u64, replicate: u64) -> u64 {
    let mut z = master.wrapping_add(replicate.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
