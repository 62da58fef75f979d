//! Partial spectral coherence: the normalized off-diagonal of the inverse
//! spectral density, its cross-frequency summary used for pair screening,
//! and the analytic inverse spectrum of a known VAR model.
//!
//! PSC_ij(w) = -Theta_ij(w) / sqrt(Theta_ii(w) Theta_jj(w)), so a pair is
//! conditionally uncorrelated at every frequency exactly when its precision
//! entries vanish everywhere. The summary S_ij takes the largest squared
//! modulus over the estimated frequencies.

use ndarray::Array2;
use ndarray_linalg::Inverse;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{hermitian_eigenvalues, hermitianize, HermitianSpectrum};
use crate::varmodel::{is_stable, VarModel};

/// Condition numbers above this make plain inversion unreliable.
const MAX_CONDITION: f64 = 1e12;

/// PSC values per frequency plus the max-modulus-squared summary.
#[derive(Debug, Clone)]
pub struct PscSurface {
    values: Vec<Array2<Complex64>>,
    summary: Array2<f64>,
    frequencies: Vec<f64>,
}

impl PscSurface {
    /// PSC matrices, one per frequency; diagonals are 0 by convention.
    pub fn values(&self) -> &[Array2<Complex64>] {
        &self.values
    }

    /// S_ij = max over frequencies of |PSC_ij|^2; symmetric, zero diagonal.
    pub fn summary(&self) -> &Array2<f64> {
        &self.summary
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn dim(&self) -> usize {
        self.summary.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Unordered pairs (i < j) sorted by descending summary statistic; equal
    /// values fall back to ascending (i, j) so the order is total.
    pub fn ranked_pairs(&self) -> Vec<((usize, usize), f64)> {
        let k = self.dim();
        let mut out = Vec::with_capacity(k * (k - 1) / 2);
        for i in 0..k {
            for j in (i + 1)..k {
                out.push(((i, j), self.summary[[i, j]]));
            }
        }
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        out
    }

    /// Long-format CSV: frequency, i, j, re, im, modulus2 for every ordered
    /// off-diagonal pair; indices are 1-based to match series naming.
    pub fn to_csv_writer<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["frequency", "i", "j", "re", "im", "modulus2"])?;
        let k = self.dim();
        for (n, freq) in self.frequencies.iter().enumerate() {
            for i in 0..k {
                for j in 0..k {
                    if i == j {
                        continue;
                    }
                    let v = self.values[n][[i, j]];
                    // Adding positive zero folds -0.0 into 0.0 for output.
                    w.write_record([
                        freq.to_string(),
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        (v.re + 0.0).to_string(),
                        (v.im + 0.0).to_string(),
                        v.norm_sqr().to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// PSC from a stack of precision matrices.
pub fn psc_from_precision(theta: &HermitianSpectrum) -> Result<PscSurface> {
    let k = theta.dim();
    let mut values = Vec::with_capacity(theta.len());
    let mut summary = Array2::zeros((k, k));
    for t in theta.matrices() {
        for i in 0..k {
            if t[[i, i]].re <= 0.0 {
                return Err(Error::NotPositiveDefinite(
                    "precision matrix has a nonpositive diagonal entry",
                ));
        }
        }
        let mut psc = Array2::zeros((k, k));
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let denom = (t[[i, i]].re * t[[j, j]].re).sqrt();
                let v = -t[[i, j]] / denom;
                psc[[i, j]] = v;
                let m2 = v.norm_sqr();
                if m2 > summary[[i, j]] {
                    summary[[i, j]] = m2;
                }
            }
        }
        values.push(psc);
    }
    // The max of |PSC_ij| and |PSC_ji| coincide on Hermitian input; enforce
    // exact symmetry of the summary anyway.
    for i in 0..k {
        for j in (i + 1)..k {
            let s = summary[[i, j]].max(summary[[j, i]]);
            summary[[i, j]] = s;
            summary[[j, i]] = s;
        }
    }
    Ok(PscSurface {
        values,
        summary,
        frequencies: theta.frequencies().to_vec(),
    })
}

/// Inverts the spectral stack, then computes the PSC. This is the screening
/// path that needs no penalty.
pub fn psc_by_inversion(spectrum: &HermitianSpectrum) -> Result<PscSurface> {
    let mut thetas = Vec::with_capacity(spectrum.len());
    for f in spectrum.matrices() {
        let eigs = hermitian_eigenvalues(f)?;
        let (min, max) = (eigs[0], eigs[eigs.len() - 1]);
        if min <= 0.0 {
            return Err(Error::IllConditioned {
                cond: f64::INFINITY,
            });
        }
        let cond = max / min;
        if cond >= MAX_CONDITION {
            return Err(Error::IllConditioned { cond });
        }
        thetas.push(hermitianize(&f.inv()?));
    }
    let theta = HermitianSpectrum::new(
        thetas,
        spectrum.frequencies().to_vec(),
        spectrum.window(),
    )?;
    psc_from_precision(&theta)
}

/// Entry (a, b) of the spectral density of the residuals after projecting
/// out the series in `excluded`, per frequency. Both a and b must lie
/// outside the excluded set.
pub fn residual_spectrum_entry(
    spectrum: &HermitianSpectrum,
    a: usize,
    b: usize,
    excluded: &[usize],
) -> Result<Vec<Complex64>> {
    let k = spectrum.dim();
    if excluded.iter().any(|&e| e == a || e == b) {
        return Err(Error::InvalidParam(
            "residual spectrum indices overlap the excluded set".into(),
        ));
    }
    if a >= k || b >= k || excluded.iter().any(|&e| e >= k) {
        return Err(Error::InvalidParam("series index out of range".into()));
    }
    let cond_set: Vec<usize> = excluded.to_vec();
    let m = cond_set.len();
    let mut out = Vec::with_capacity(spectrum.len());
    for f in spectrum.matrices() {
        if m == 0 {
            out.push(f[[a, b]]);
            continue;
        }
        let sub = Array2::from_shape_fn((m, m), |(x, y)| f[[cond_set[x], cond_set[y]]]);
        let sub_inv = sub
            .inv()
            .map_err(|_| Error::Singular("conditioning sub-block of the spectrum"))?;
        let fa = Array2::from_shape_fn((1, m), |(_, y)| f[[a, cond_set[y]]]);
        let fb = Array2::from_shape_fn((m, 1), |(x, _)| f[[cond_set[x], b]]);
        let corr = fa.dot(&sub_inv).dot(&fb)[[0, 0]];
        out.push(f[[a, b]] - corr);
    }
    Ok(out)
}

/// Cross-spectrum of the residuals of series i and j given all remaining
/// series, the direct (sub-block inversion) route to the PSC numerator.
pub fn residual_cross_spectrum(
    spectrum: &HermitianSpectrum,
    i: usize,
    j: usize,
) -> Result<Vec<Complex64>> {
    if spectrum.dim() < 3 {
        return Err(Error::DimensionMismatch(
            "residual cross-spectrum needs at least 3 series".into(),
        ));
    }
    if i == j {
        return Err(Error::InvalidParam("need two distinct series".into()));
    }
    let excluded: Vec<usize> = (0..spectrum.dim()).filter(|&x| x != i && x != j).collect();
    residual_spectrum_entry(spectrum, i, j, &excluded)
}

/// Inverse spectrum of a VAR model in trigonometric-polynomial form.
#[derive(Debug, Clone)]
pub struct ArInverseSpectrum {
    /// Theta^Y evaluated on the requested grid.
    pub spectrum: HermitianSpectrum,
    /// Real coefficient matrices X_0 .. X_p of the polynomial.
    pub xk: Vec<Array2<f64>>,
    /// zero_pattern[i, j] is true when (X_k)_ij vanishes for every k; for an
    /// off-diagonal pair the PSC is identically zero only when both ordered
    /// entries vanish.
    pub zero_pattern: Array2<bool>,
}

/// Evaluates the inverse spectral density of a stable VAR analytically:
/// with A~_0 = I and A~_k = -A_k,
/// X_k = sum_a A~_a' Theta_u A~_{a+k} and
/// Theta^Y(w) = X_0 + sum_k (e^{-i 2 pi w k} X_k + e^{+i 2 pi w k} X_k').
/// Entries of X_k with |value| <= tol count as zero in the report.
pub fn ar_inverse_spectrum(
    model: &VarModel,
    frequencies: &[f64],
    tol: f64,
) -> Result<ArInverseSpectrum> {
    let (stable, radius) = is_stable(model)?;
    if !stable {
        return Err(Error::Unstable { radius });
    }
    if frequencies.is_empty() {
        return Err(Error::EmptyGrid("frequency grid"));
    }
    let k = model.dim();
    let p = model.p();
    let theta_u = model.noise_precision()?;
    // a_tilde[0] = I, a_tilde[l] = -A_l.
    let mut a_tilde: Vec<Array2<f64>> = Vec::with_capacity(p + 1);
    a_tilde.push(Array2::eye(k));
    for a in model.coeffs() {
        a_tilde.push(a.mapv(|v| -v));
    }
    let mut xk = Vec::with_capacity(p + 1);
    for lag in 0..=p {
        let mut acc = Array2::zeros((k, k));
        for a in 0..=(p - lag) {
            acc += &a_tilde[a].t().dot(&theta_u).dot(&a_tilde[a + lag]);
        }
        xk.push(acc);
    }
    let zero_pattern =
        Array2::from_shape_fn((k, k), |(i, j)| xk.iter().all(|x| x[[i, j]].abs() <= tol));

    let mut mats = Vec::with_capacity(frequencies.len());
    for &w in frequencies {
        let mut m: Array2<Complex64> = xk[0].mapv(|v| Complex64::new(v, 0.0));
        for (lag, x) in xk.iter().enumerate().skip(1) {
            let phase = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * w * lag as f64);
            m = m + &x.mapv(|v| phase * v) + &x.t().mapv(|v| phase.conj() * v);
        }
        mats.push(hermitianize(&m));
    }
    let spectrum = HermitianSpectrum::new(mats, frequencies.to_vec(), 1)?;
    Ok(ArInverseSpectrum {
        spectrum,
        xk,
        zero_pattern,
    })
}

/// Largest off-diagonal PSC modulus violation of the unit bound; test helper.
pub fn max_psc_modulus(surface: &PscSurface) -> f64 {
    let mut worst = 0.0f64;
    for v in surface.values() {
        for x in v.iter() {
            worst = worst.max(x.norm());
        }
    }
    worst
}
