//! End-to-end structure learning: screening for a pair-level support, lag
//! selection, then coefficient-level refinement.
//!
//! Two procedures share the frame. `svar_fit` screens pairs by ranked partial
//! spectral coherence and scans an information criterion over (lag order,
//! pair count), then prunes single coefficients by ranked t-statistics.
//! `msvar_fit` takes the pair support straight from the penalized inverse
//! spectrum, spends one criterion scan on the lag order alone, and prunes
//! coefficients with a false-discovery-rate cut on the fit's p-values.

use std::time::Instant;

use ndarray::Array3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psc;
use crate::restricted_mle::{bic, fit_restricted_from, RestrictedFit};
use crate::series::TimeSeries;
use crate::spectral::{self, HermitianSpectrum};
use crate::tsglasso::{self, Criterion, PenaltyCount, SolverConfig};
use crate::varmodel::{SupportMask, VarModel};

/// Which procedure produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "sVAR")]
    Svar,
    #[serde(rename = "msVAR")]
    Msvar,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Svar => write!(f, "sVAR"),
            Method::Msvar => write!(f, "msVAR"),
        }
    }
}

/// Seconds spent in each stage; excluded from `content_eq`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct StageTimes {
    pub stage1_secs: f64,
    pub stage2_secs: f64,
}

/// One candidate of the lag/pair-count scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BicEntry {
    pub p: usize,
    /// Pair count of the candidate support, when the scan varies it.
    pub pairs: Option<usize>,
    pub value: f64,
}

/// Refinement bookkeeping for the false-discovery-rate stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrDiagnostics {
    pub q: f64,
    /// Harmonic-sum correction for arbitrary dependence, off by default.
    pub yekutieli: bool,
    pub hypotheses: usize,
    pub rejected: usize,
    /// True when no coefficient survived; the final model keeps intercepts
    /// only.
    pub rejected_nothing: bool,
}

/// Full record of a fit: the selected model plus every selection trace
/// needed to audit it. Serializes to JSON and round-trips exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: Method,
    pub final_model: VarModel,
    pub selected_p: usize,
    /// Off-diagonal pairs kept by stage 1.
    pub selected_pairs: usize,
    /// Free coefficients in the final model, intercepts excluded.
    pub final_nonzeros: usize,
    pub stage1_support: SupportMask,
    pub stage2_support: SupportMask,
    /// Criterion value per (p, pair-count) candidate, in scan order.
    pub bic_trace: Vec<BicEntry>,
    /// Stage-2 criterion path over coefficient counts (pair-screened route).
    pub bic_m_path: Vec<(usize, f64)>,
    /// (lambda, criterion score) per penalty candidate (penalized route).
    pub tuning_trace: Vec<(f64, f64)>,
    pub fdr: Option<FdrDiagnostics>,
    pub warnings: Vec<String>,
    pub wall_time: StageTimes,
}

impl FitReport {
    /// Equality of everything that is a function of data and configuration;
    /// wall-clock times are ignored.
    pub fn content_eq(&self, other: &Self) -> bool {
        self.method == other.method
            && self.final_model == other.final_model
            && self.selected_p == other.selected_p
            && self.selected_pairs == other.selected_pairs
            && self.final_nonzeros == other.final_nonzeros
            && self.stage1_support == other.stage1_support
            && self.stage2_support == other.stage2_support
            && self.bic_trace == other.bic_trace
            && self.bic_m_path == other.bic_m_path
            && self.tuning_trace == other.tuning_trace
            && self.fdr == other.fdr
            && self.warnings == other.warnings
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Options for the pair-screened procedure.
#[derive(Debug, Clone, Default)]
pub struct SvarOptions {
    /// Stage-1 pair counts to scan; `None` scans 0..=K(K-1)/2.
    pub m_grid: Option<Vec<usize>>,
    /// Stage-2 coefficient counts to scan; `None` scans every count up to
    /// the stage-1 total. Coarsening keeps large problems tractable.
    pub stage2_grid: Option<Vec<usize>>,
    /// Smoothing half-window m_t; `None` uses ceil(K/2).
    pub half_window: Option<usize>,
}

/// How the penalty level is chosen for the penalized route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// Single fixed level, no tuning.
    Fixed(f64),
    /// Explicit candidate list.
    Grid(Vec<f64>),
    /// Log-spaced grid of the given size anchored at the smallest level
    /// that zeroes every pair.
    Auto(usize),
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::Auto(20)
    }
}

/// Options for the penalized procedure.
#[derive(Debug, Clone)]
pub struct MsvarOptions {
    pub lambda: LambdaRule,
    pub criterion: Criterion,
    /// Density weight in the extended criterion; 0 recovers the classical
    /// one.
    pub gamma: f64,
    /// Parameter-counting convention inside the tuning criterion.
    pub penalty_count: PenaltyCount,
    /// False-discovery-rate level for stage 2.
    pub q: f64,
    /// Use the harmonic-sum correction in stage 2.
    pub yekutieli: bool,
    pub half_window: Option<usize>,
    pub solver: SolverConfig,
}

impl Default for MsvarOptions {
    fn default() -> Self {
        Self {
            lambda: LambdaRule::default(),
            criterion: Criterion::Ebic,
            gamma: 0.5,
            penalty_count: PenaltyCount::default(),
            q: 0.1,
            yekutieli: false,
            half_window: None,
            solver: SolverConfig::default(),
        }
    }
}

/// Step-up false-discovery-rate cut at level `q`.
///
/// Sorts ascending, finds the largest rank i with p_(i) <= i q / N, and
/// rejects the hypotheses carrying the i smallest p-values. Ties are broken
/// by original index, so the output is stable under input order. Returns the
/// rejected indices sorted ascending; empty input rejects nothing.
pub fn bh_fdr(p_values: &[f64], q: f64) -> Result<Vec<usize>> {
    bh_fdr_with(p_values, q, false)
}

/// `bh_fdr` with an optional harmonic-sum correction: the level is divided
/// by sum_{i=1}^N 1/i, which stays valid under arbitrary dependence.
pub fn bh_fdr_with(p_values: &[f64], q: f64, yekutieli: bool) -> Result<Vec<usize>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParam(format!(
            "fdr level q = {q} outside (0, 1)"
        )));
    }
    for (i, &p) in p_values.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParam(format!(
                "p-value {p} at index {i} outside [0, 1]"
            )));
        }
    }
    let n = p_values.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let scale = if yekutieli {
        (1..=n).map(|i| 1.0 / i as f64).sum::<f64>()
    } else {
        1.0
    };
    let mut cut = 0;
    for (rank, &i) in order.iter().enumerate() {
        if p_values[i] <= (rank + 1) as f64 * q / (n as f64 * scale) {
            cut = rank + 1;
        }
    }
    let mut rejected = order[..cut].to_vec();
    rejected.sort_unstable();
    Ok(rejected)
}

fn smoothed(data: &TimeSeries, half_window: Option<usize>) -> Result<HermitianSpectrum> {
    let frame = spectral::dft(data)?;
    let m_t = half_window.unwrap_or_else(|| spectral::default_half_window(data.dim()));
    spectral::smoothed_spectrum(&frame, m_t)
}

fn cleaned_grid(grid: &[usize], what: &'static str) -> Result<Vec<usize>> {
    let mut g = grid.to_vec();
    g.sort_unstable();
    g.dedup();
    if g.is_empty() {
        return Err(Error::EmptyGrid(what));
    }
    Ok(g)
}

/// Coefficient-level mask holding exactly the given (lag, i, j) entries.
fn support_from_coords(p: usize, k: usize, coords: &[(usize, usize, usize)]) -> SupportMask {
    let mut coeff = Array3::from_elem((p, k, k), false);
    for &(lag, i, j) in coords {
        coeff[[lag, i, j]] = true;
    }
    SupportMask::from_coeff(coeff)
}

/// Stage-2 ranking: order coefficient indices of `fit` by |t| descending,
/// ties by (row, column, lag).
fn rank_by_t(fit: &RestrictedFit) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fit.coords.len()).collect();
    order.sort_by(|&a, &b| {
        fit.t_stats[b]
            .abs()
            .total_cmp(&fit.t_stats[a].abs())
            .then_with(|| {
                let (la, ia, ja) = fit.coords[a];
                let (lb, ib, jb) = fit.coords[b];
                (ia, ja, la).cmp(&(ib, jb, lb))
            })
    });
    order
}

/// Pair-screened two-stage fit.
///
/// Stage 1 ranks off-diagonal pairs by the peak squared modulus of their
/// partial spectral coherence, then scans (p, M) candidates where the top-M
/// pairs are free at every lag; the criterion charges (K+2M)p parameters.
/// Stage 2 ranks the surviving coefficients by |t| and scans the kept count
/// m, charging m parameters. Ties prefer smaller p, then smaller M or m.
/// All candidate likelihoods condition on max(p_grid) initial observations
/// so they are comparable.
pub fn svar_fit(data: &TimeSeries, p_grid: &[usize], opts: &SvarOptions) -> Result<FitReport> {
    let start = Instant::now();
    let k = data.dim();
    let t_len = data.len();
    let p_grid = cleaned_grid(p_grid, "lag order grid")?;
    if p_grid[0] == 0 {
        return Err(Error::InvalidParam("lag order must be at least 1".into()));
    }
    let skip = *p_grid.last().unwrap();

    let spectrum = smoothed(data, opts.half_window)?;
    let surface = psc::psc_by_inversion(&spectrum)?;
    let ranked: Vec<(usize, usize)> = surface.ranked_pairs().into_iter().map(|(p, _)| p).collect();

    let m_grid = match &opts.m_grid {
        Some(g) => {
            let g = cleaned_grid(g, "pair count grid")?;
            let g: Vec<usize> = g.into_iter().filter(|&m| m <= ranked.len()).collect();
            if g.is_empty() {
                return Err(Error::EmptyGrid("pair count grid"));
            }
            g
        }
        None => (0..=ranked.len()).collect(),
    };

    let mut candidates = Vec::with_capacity(p_grid.len() * m_grid.len());
    for &p in &p_grid {
        for &m in &m_grid {
            candidates.push((p, m));
        }
    }
    let scored: Vec<(usize, usize, f64)> = candidates
        .par_iter()
        .map(|&(p, m)| -> Result<(usize, usize, f64)> {
            let support = SupportMask::from_pairs(p, k, &ranked[..m])?;
            let fit = fit_restricted_from(data, p, &support, skip)?;
            Ok((p, m, bic(&fit, t_len, (k + 2 * m) * p)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (i, cand) in scored.iter().enumerate() {
        if cand.2 < scored[best].2 {
            best = i;
        }
    }
    let (p_star, m_pairs, _) = scored[best];
    let bic_trace: Vec<BicEntry> = scored
        .iter()
        .map(|&(p, m, value)| BicEntry {
            p,
            pairs: Some(m),
            value,
        })
        .collect();

    let stage1_support = SupportMask::from_pairs(p_star, k, &ranked[..m_pairs])?;
    let stage1_fit = fit_restricted_from(data, p_star, &stage1_support, skip)?;
    let mut warnings = Vec::new();
    if !stage1_fit.converged {
        warnings.push("stage-1 weighted estimation hit its sweep cap".to_string());
    }
    let stage1_secs = start.elapsed().as_secs_f64();

    let stage2_start = Instant::now();
    let order = rank_by_t(&stage1_fit);
    let stage2_grid = match &opts.stage2_grid {
        Some(g) => {
            let g = cleaned_grid(g, "coefficient count grid")?;
            let g: Vec<usize> = g.into_iter().filter(|&m| m <= order.len()).collect();
            if g.is_empty() {
                return Err(Error::EmptyGrid("coefficient count grid"));
            }
            g
        }
        None => (0..=order.len()).collect(),
    };
    let supports: Vec<(usize, SupportMask)> = stage2_grid
        .iter()
        .map(|&m| {
            let coords: Vec<_> = order[..m].iter().map(|&r| stage1_fit.coords[r]).collect();
            (m, support_from_coords(p_star, k, &coords))
        })
        .collect();
    let bic_m_path: Vec<(usize, f64)> = supports
        .par_iter()
        .map(|(m, support)| -> Result<(usize, f64)> {
            let fit = fit_restricted_from(data, p_star, support, skip)?;
            Ok((*m, bic(&fit, t_len, *m)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best_m = 0;
    for (i, cand) in bic_m_path.iter().enumerate() {
        if cand.1 < bic_m_path[best_m].1 {
            best_m = i;
        }
    }
    let m_coeffs = bic_m_path[best_m].0;
    let stage2_support = supports
        .into_iter()
        .find(|(m, _)| *m == m_coeffs)
        .map(|(_, s)| s)
        .unwrap();
    let final_fit = fit_restricted_from(data, p_star, &stage2_support, skip)?;
    if !final_fit.converged {
        warnings.push("final weighted estimation hit its sweep cap".to_string());
    }

    Ok(FitReport {
        method: Method::Svar,
        final_model: final_fit.model,
        selected_p: p_star,
        selected_pairs: m_pairs,
        final_nonzeros: m_coeffs,
        stage1_support,
        stage2_support,
        bic_trace,
        bic_m_path,
        tuning_trace: Vec::new(),
        fdr: None,
        warnings,
        wall_time: StageTimes {
            stage1_secs,
            stage2_secs: stage2_start.elapsed().as_secs_f64(),
        },
    })
}

/// Penalized two-stage fit.
///
/// Stage 1 solves the penalized inverse-spectrum problem (tuning the penalty
/// unless fixed), takes the surviving pairs as the support, and spends one
/// criterion scan on the lag order with that support held fixed, charging
/// (K+2M*)p parameters. Stage 2 applies the step-up false-discovery-rate cut
/// to the p-values of all free coefficients (diagonals included, intercepts
/// not hypotheses) and refits on the survivors so discarded entries are
/// exact zeros.
pub fn msvar_fit(data: &TimeSeries, p_grid: &[usize], opts: &MsvarOptions) -> Result<FitReport> {
    let start = Instant::now();
    let k = data.dim();
    let t_len = data.len();
    let p_grid = cleaned_grid(p_grid, "lag order grid")?;
    if p_grid[0] == 0 {
        return Err(Error::InvalidParam("lag order must be at least 1".into()));
    }
    if !(opts.q > 0.0 && opts.q < 1.0) {
        return Err(Error::InvalidParam(format!(
            "fdr level q = {} outside (0, 1)",
            opts.q
        )));
    }
    let skip = *p_grid.last().unwrap();

    let spectrum = smoothed(data, opts.half_window)?;
    let lambdas = match &opts.lambda {
        LambdaRule::Fixed(l) => vec![*l],
        LambdaRule::Grid(g) => g.clone(),
        LambdaRule::Auto(n) => {
            let lmax = tsglasso::lambda_max(&spectrum, &opts.solver)?;
            tsglasso::lambda_grid_log(lmax, *n)
        }
    };
    let (solution, tuning_trace) = tsglasso::tune_scoped(
        &spectrum,
        &lambdas,
        opts.criterion,
        opts.gamma,
        opts.penalty_count,
        &opts.solver,
    )?;
    let mut warnings = Vec::new();
    if !solution.converged {
        warnings.push("penalized inverse-spectrum solver hit its iteration cap".to_string());
    }
    let pairs = solution.active_pairs();
    let m_pairs = pairs.len();

    let scored: Vec<(usize, f64)> = p_grid
        .par_iter()
        .map(|&p| -> Result<(usize, f64)> {
            let support = SupportMask::from_pairs(p, k, &pairs)?;
            let fit = fit_restricted_from(data, p, &support, skip)?;
            Ok((p, bic(&fit, t_len, (k + 2 * m_pairs) * p)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, cand) in scored.iter().enumerate() {
        if cand.1 < scored[best].1 {
            best = i;
        }
    }
    let p_star = scored[best].0;
    let bic_trace: Vec<BicEntry> = scored
        .iter()
        .map(|&(p, value)| BicEntry {
            p,
            pairs: Some(m_pairs),
            value,
        })
        .collect();

    let stage1_support = SupportMask::from_pairs(p_star, k, &pairs)?;
    let stage1_fit = fit_restricted_from(data, p_star, &stage1_support, skip)?;
    if !stage1_fit.converged {
        warnings.push("stage-1 weighted estimation hit its sweep cap".to_string());
    }
    let stage1_secs = start.elapsed().as_secs_f64();

    let stage2_start = Instant::now();
    let rejected = bh_fdr_with(&stage1_fit.p_values, opts.q, opts.yekutieli)?;
    let rejected_nothing = rejected.is_empty();
    let coords: Vec<_> = rejected.iter().map(|&r| stage1_fit.coords[r]).collect();
    let stage2_support = support_from_coords(p_star, k, &coords);
    let final_fit = fit_restricted_from(data, p_star, &stage2_support, skip)?;
    if !final_fit.converged {
        warnings.push("final weighted estimation hit its sweep cap".to_string());
    }
    if rejected_nothing {
        warnings.push(
            "false-discovery-rate cut kept no coefficients; model has intercepts only"
                .to_string(),
        );
    }
    let fdr = FdrDiagnostics {
        q: opts.q,
        yekutieli: opts.yekutieli,
        hypotheses: stage1_fit.p_values.len(),
        rejected: rejected.len(),
        rejected_nothing,
    };

    Ok(FitReport {
        method: Method::Msvar,
        final_model: final_fit.model,
        selected_p: p_star,
        selected_pairs: m_pairs,
        final_nonzeros: coords.len(),
        stage1_support,
        stage2_support,
        bic_trace,
        bic_m_path: Vec::new(),
        tuning_trace,
        fdr: Some(fdr),
        warnings,
        wall_time: StageTimes {
            stage1_secs,
            stage2_secs: stage2_start.elapsed().as_secs_f64(),
        },
    })
}
