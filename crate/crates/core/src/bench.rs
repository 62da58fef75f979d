//! Monte-Carlo benchmark harness: simulate replicates from a known model,
//! fit each configured method, and aggregate coefficient accuracy, edge
//! recovery, forecast error, and wall time.
//!
//! Replicate r draws its seed from the master seed, so results are
//! reproducible whether replicates run in parallel or sequentially; the
//! sequential mode exists for timing comparisons where concurrent fits
//! would distort wall-clock measurements.

use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::pipeline::{msvar_fit, svar_fit, FitReport, LambdaRule, MsvarOptions, SvarOptions};
use crate::series::TimeSeries;
use crate::tsglasso::{Criterion, PenaltyCount, SolverConfig};
use crate::varmodel::{fixtures, random_sparse, replicate_seed, simulate, VarModel};

/// Level that keeps every hypothesis with a p-value below one: the
/// refinement stage passes stage 1 through unchanged.
const SATURATED_Q: f64 = 1.0 - 1e-12;

/// Ensemble accuracy of coefficient estimates against a known model.
///
/// `mse` is computed directly as the mean squared deviation; it agrees with
/// `bias2 + variance` to rounding because the variance uses the population
/// divisor R.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub bias2: f64,
    pub variance: f64,
    pub mse: f64,
    /// Fraction of true directed edges (i != j) recovered, averaged over
    /// the ensemble; 1 when the model has no off-diagonal edges.
    pub tpr: f64,
    /// Fraction of absent directed edges reported present; 0 when every
    /// off-diagonal edge is true.
    pub fpr: f64,
    pub replicates: usize,
    /// detection[(i, j)]: fraction of estimates with some nonzero A_k(i, j),
    /// diagonal included; feeds the weighted graph export.
    pub detection: Array2<f64>,
}

/// Accuracy metrics of an estimate ensemble against the generating model.
///
/// Lag orders are padded with zero matrices up to the longest model, so a
/// fit that picked the wrong order is charged for every entry it missed or
/// invented. Edges are read off exact zero patterns: fitted models carry
/// exact zeros in constrained entries.
pub fn metrics(estimates: &[VarModel], truth: &VarModel) -> Result<Metrics> {
    if estimates.is_empty() {
        return Err(Error::EmptyGrid("estimate ensemble"));
    }
    let k = truth.dim();
    for e in estimates {
        if e.dim() != k {
            return Err(Error::DimensionMismatch(format!(
                "estimate with K = {} against truth K = {k}",
                e.dim()
            )));
        }
    }
    let p_big = estimates
        .iter()
        .map(|m| m.p())
        .chain([truth.p()])
        .max()
        .unwrap();
    let r = estimates.len() as f64;
    let entry = |m: &VarModel, lag: usize, i: usize, j: usize| -> f64 {
        if lag < m.p() {
            m.coeffs()[lag][[i, j]]
        } else {
            0.0
        }
    };

    let mut bias2 = 0.0;
    let mut variance = 0.0;
    let mut mse = 0.0;
    for lag in 0..p_big {
        for i in 0..k {
            for j in 0..k {
                let truth_v = entry(truth, lag, i, j);
                let mean = estimates.iter().map(|m| entry(m, lag, i, j)).sum::<f64>() / r;
                let var = estimates
                    .iter()
                    .map(|m| (entry(m, lag, i, j) - mean).powi(2))
                    .sum::<f64>()
                    / r;
                let sq = estimates
                    .iter()
                    .map(|m| (entry(m, lag, i, j) - truth_v).powi(2))
                    .sum::<f64>()
                    / r;
                bias2 += (mean - truth_v).powi(2);
                variance += var;
                mse += sq;
            }
        }
    }

    let has_edge = |m: &VarModel, i: usize, j: usize| -> bool {
        (0..m.p()).any(|lag| m.coeffs()[lag][[i, j]] != 0.0)
    };
    let mut true_pos = 0usize;
    let mut false_pos = 0usize;
    let mut positives = 0usize;
    let mut negatives = 0usize;
    let mut detection = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            let found = estimates.iter().filter(|m| has_edge(m, i, j)).count();
            detection[[i, j]] = found as f64 / r;
            if i == j {
                continue;
            }
            if has_edge(truth, i, j) {
                positives += 1;
                true_pos += found;
            } else {
                negatives += 1;
                false_pos += found;
            }
        }
    }
    let tpr = if positives == 0 {
        1.0
    } else {
        true_pos as f64 / (r * positives as f64)
    };
    let fpr = if negatives == 0 {
        0.0
    } else {
        false_pos as f64 / (r * negatives as f64)
    };

    Ok(Metrics {
        bias2,
        variance,
        mse,
        tpr,
        fpr,
        replicates: estimates.len(),
        detection,
    })
}

/// Rolling-origin h-step forecast root mean squared error.
///
/// Origins walk the test window: origin j conditions on the full history
/// plus the first j test observations and is scored on test observation
/// j + h - 1, giving T_test - h + 1 origins. Errors are averaged over
/// series and origins, then square-rooted.
pub fn rmse_h(model: &VarModel, history: &TimeSeries, test: &TimeSeries, h: usize) -> Result<f64> {
    let k = model.dim();
    if history.dim() != k || test.dim() != k {
        return Err(Error::DimensionMismatch(format!(
            "series with {} / {} columns against model K = {k}",
            history.dim(),
            test.dim()
        )));
    }
    if h == 0 {
        return Err(Error::InvalidParam("forecast horizon must be >= 1".into()));
    }
    let t_test = test.len();
    if h > t_test {
        return Err(Error::HorizonTooLong { h, t_test });
    }
    let p = model.p();
    if history.len() < p {
        return Err(Error::InsufficientHistory {
            need: p,
            got: history.len(),
        });
    }

    let h_len = history.len();
    let mut combined = Array2::zeros((h_len + t_test, k));
    combined
        .slice_mut(s![..h_len, ..])
        .assign(history.values());
    combined.slice_mut(s![h_len.., ..]).assign(test.values());

    let origins = t_test - h + 1;
    let mut sq = 0.0;
    for j in 0..origins {
        let last = h_len + j;
        let mut lags: Vec<ndarray::Array1<f64>> = (0..p)
            .map(|lag| combined.row(last - 1 - lag).to_owned())
            .collect();
        let mut y = ndarray::Array1::zeros(k);
        for _ in 0..h {
            y = model.intercept().to_owned();
            for (lag, a) in model.coeffs().iter().enumerate() {
                y += &a.dot(&lags[lag]);
            }
            lags.rotate_right(1);
            lags[0] = y.clone();
        }
        let target = test.values().row(j + h - 1);
        for i in 0..k {
            sq += (y[i] - target[i]).powi(2);
        }
    }
    Ok((sq / (k * origins) as f64).sqrt())
}

/// Fitting procedure variants a benchmark can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMethod {
    Svar,
    Msvar,
    /// Penalized route with the fixed penalty level, no tuning.
    MsvarFixed,
    /// Penalized route stopped after stage 1 (refinement passes everything
    /// through, via a saturated cut level).
    MsvarStage1,
}

impl std::fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BenchMethod::Svar => "svar",
            BenchMethod::Msvar => "msvar",
            BenchMethod::MsvarFixed => "msvar-fixed",
            BenchMethod::MsvarStage1 => "msvar-stage1",
        };
        write!(f, "{s}")
    }
}

/// Declarative benchmark description; loads from TOML or JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// model1 | model2 | model3 | random-sparse.
    pub model: String,
    /// Dimension for random-sparse.
    pub k: usize,
    /// Lag order for random-sparse.
    pub p: usize,
    /// Nonzero probability for random-sparse.
    pub density: f64,
    pub replicates: usize,
    pub t_len: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub methods: Vec<BenchMethod>,
    pub p_grid: Vec<usize>,
    pub half_window: Option<usize>,
    /// Stage-1 pair-count grid for svar; None scans every count.
    pub m_grid: Option<Vec<usize>>,
    /// Stage-2 coefficient-count grid for svar; None scans every count.
    pub stage2_grid: Option<Vec<usize>>,
    /// Penalty level for msvar-fixed.
    pub lambda: f64,
    /// Grid size for tuned penalized fits.
    pub lambda_grid_size: usize,
    /// Explicit penalty grid for tuned fits; overrides the automatic grid.
    pub lambda_grid: Option<Vec<f64>>,
    pub criterion: Criterion,
    pub gamma: f64,
    /// Parameter-counting convention inside the tuning criterion.
    pub penalty_count: PenaltyCount,
    pub q: f64,
    pub yekutieli: bool,
    pub solver: SolverConfig,
    /// Extra simulated observations held out for forecasting; 0 disables.
    pub test_len: usize,
    pub horizons: Vec<usize>,
    /// Sequential replicates keep wall-clock comparisons honest.
    pub parallel_replicates: bool,
    pub keep_reports: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            model: "model1".to_string(),
            k: 10,
            p: 1,
            density: 0.25,
            replicates: 50,
            t_len: 100,
            burn_in: 200,
            seed: 1729,
            methods: vec![BenchMethod::Svar, BenchMethod::Msvar],
            p_grid: vec![1, 2, 3],
            half_window: None,
            m_grid: None,
            stage2_grid: None,
            lambda: 0.2,
            lambda_grid_size: 20,
            lambda_grid: None,
            criterion: Criterion::Ebic,
            gamma: 0.5,
            penalty_count: PenaltyCount::default(),
            q: 0.1,
            yekutieli: false,
            solver: SolverConfig::default(),
            test_len: 0,
            horizons: Vec::new(),
            parallel_replicates: true,
            keep_reports: false,
        }
    }
}

/// Resolves the generating model named by the config.
pub fn truth_model(cfg: &BenchConfig) -> Result<VarModel> {
    match cfg.model.as_str() {
        "random-sparse" => random_sparse(cfg.k, cfg.p, cfg.density, cfg.seed),
        name => fixtures::by_name(name),
    }
}

/// Per-h forecast error summary across replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmseSummary {
    pub horizons: Vec<usize>,
    pub mean: Vec<f64>,
    /// Population standard deviation across replicates.
    pub sd: Vec<f64>,
}

/// Aggregated outcome of one method across all replicates.
#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: BenchMethod,
    /// None when every replicate failed.
    pub metrics: Option<Metrics>,
    pub mean_fit_secs: f64,
    pub total_fit_secs: f64,
    pub failures: usize,
    pub errors: Vec<String>,
    pub rmse: Option<RmseSummary>,
    /// Populated when the config keeps reports; successes in replicate
    /// order.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub reports: Vec<FitReport>,
}

/// Everything a benchmark run produces.
#[derive(Debug, Clone, Serialize)]
pub struct BenchOutcome {
    pub model: String,
    pub truth: VarModel,
    pub summaries: Vec<MethodSummary>,
}

struct MethodReplicate {
    model: Option<VarModel>,
    report: Option<FitReport>,
    rmse: Option<Vec<f64>>,
    secs: f64,
    error: Option<String>,
}

fn fit_one(cfg: &BenchConfig, method: BenchMethod, train: &TimeSeries) -> Result<FitReport> {
    match method {
        BenchMethod::Svar => {
            let opts = SvarOptions {
                m_grid: cfg.m_grid.clone(),
                stage2_grid: cfg.stage2_grid.clone(),
                half_window: cfg.half_window,
            };
            svar_fit(train, &cfg.p_grid, &opts)
        }
        BenchMethod::Msvar | BenchMethod::MsvarFixed | BenchMethod::MsvarStage1 => {
            let lambda = if method == BenchMethod::MsvarFixed {
                LambdaRule::Fixed(cfg.lambda)
            } else if let Some(grid) = &cfg.lambda_grid {
                LambdaRule::Grid(grid.clone())
            } else {
                LambdaRule::Auto(cfg.lambda_grid_size)
            };
            let q = if method == BenchMethod::MsvarStage1 {
                SATURATED_Q
            } else {
                cfg.q
            };
            let opts = MsvarOptions {
                lambda,
                criterion: cfg.criterion,
                gamma: cfg.gamma,
                penalty_count: cfg.penalty_count,
                q,
                yekutieli: cfg.yekutieli,
                half_window: cfg.half_window,
                solver: cfg.solver,
            };
            msvar_fit(train, &cfg.p_grid, &opts)
        }
    }
}

/// Runs the full benchmark described by the config.
///
/// Fit errors are recorded per replicate and excluded from the ensemble;
/// they do not abort the run.
pub fn bench_run(cfg: &BenchConfig) -> Result<BenchOutcome> {
    if cfg.methods.is_empty() {
        return Err(Error::EmptyGrid("method list"));
    }
    if cfg.replicates == 0 {
        return Err(Error::InvalidParam("replicates must be >= 1".into()));
    }
    for &h in &cfg.horizons {
        if h == 0 {
            return Err(Error::InvalidParam("forecast horizon must be >= 1".into()));
        }
        if h > cfg.test_len {
            return Err(Error::HorizonTooLong {
                h,
                t_test: cfg.test_len,
            });
        }
    }
    let forecasting = cfg.test_len > 0 && !cfg.horizons.is_empty();
    let truth = truth_model(cfg)?;

    let run_replicate = |r: usize| -> Vec<MethodReplicate> {
        let seed = replicate_seed(cfg.seed, r as u64);
        let full = match simulate(&truth, cfg.t_len + cfg.test_len, cfg.burn_in, seed) {
            Ok(s) => s,
            Err(e) => {
                return cfg
                    .methods
                    .iter()
                    .map(|_| MethodReplicate {
                        model: None,
                        report: None,
                        rmse: None,
                        secs: 0.0,
                        error: Some(format!("simulate: {e}")),
                    })
                    .collect();
            }
        };
        let values = full.values();
        let names = full.names().to_vec();
        let train = TimeSeries::new(
            values.slice(s![..cfg.t_len, ..]).to_owned(),
            names.clone(),
        )
        .expect("train split");
        let test = if cfg.test_len > 0 {
            Some(
                TimeSeries::new(values.slice(s![cfg.t_len.., ..]).to_owned(), names)
                    .expect("test split"),
            )
        } else {
            None
        };

        cfg.methods
            .iter()
            .map(|&method| {
                let clock = Instant::now();
                let fitted = fit_one(cfg, method, &train);
                let secs = clock.elapsed().as_secs_f64();
                match fitted {
                    Ok(report) => {
                        let rmse = match (&test, forecasting) {
                            (Some(test), true) => {
                                let per_h: Result<Vec<f64>> = cfg
                                    .horizons
                                    .iter()
                                    .map(|&h| rmse_h(&report.final_model, &train, test, h))
                                    .collect();
                                per_h.ok()
                            }
                            _ => None,
                        };
                        MethodReplicate {
                            model: Some(report.final_model.clone()),
                            report: cfg.keep_reports.then_some(report),
                            rmse,
                            secs,
                            error: None,
                        }
                    }
                    Err(e) => MethodReplicate {
                        model: None,
                        report: None,
                        rmse: None,
                        secs,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    };

    let rows: Vec<Vec<MethodReplicate>> = if cfg.parallel_replicates {
        (0..cfg.replicates)
            .into_par_iter()
            .map(run_replicate)
            .collect()
    } else {
        (0..cfg.replicates).map(run_replicate).collect()
    };

    let mut summaries = Vec::with_capacity(cfg.methods.len());
    for (mi, &method) in cfg.methods.iter().enumerate() {
        let cells: Vec<&MethodReplicate> = rows.iter().map(|row| &row[mi]).collect();
        let models: Vec<VarModel> = cells.iter().filter_map(|c| c.model.clone()).collect();
        let failures = cells.len() - models.len();
        let errors: Vec<String> = cells.iter().filter_map(|c| c.error.clone()).collect();
        let method_metrics = if models.is_empty() {
            None
        } else {
            Some(metrics(&models, &truth)?)
        };
        let total_fit_secs: f64 = cells.iter().map(|c| c.secs).sum();
        let mean_fit_secs = total_fit_secs / cells.len() as f64;
        let rmse = if forecasting {
            let tables: Vec<&Vec<f64>> = cells.iter().filter_map(|c| c.rmse.as_ref()).collect();
            if tables.is_empty() {
                None
            } else {
                let n = tables.len() as f64;
                let mut mean = vec![0.0; cfg.horizons.len()];
                let mut sd = vec![0.0; cfg.horizons.len()];
                for (hi, m) in mean.iter_mut().enumerate() {
                    *m = tables.iter().map(|t| t[hi]).sum::<f64>() / n;
                }
                for (hi, s) in sd.iter_mut().enumerate() {
                    let m = mean[hi];
                    *s = (tables.iter().map(|t| (t[hi] - m).powi(2)).sum::<f64>() / n).sqrt();
                }
                Some(RmseSummary {
                    horizons: cfg.horizons.clone(),
                    mean,
                    sd,
                })
            }
        } else {
            None
        };
        let reports: Vec<FitReport> = if cfg.keep_reports {
            rows.iter().filter_map(|row| row[mi].report.clone()).collect()
        } else {
            Vec::new()
        };
        summaries.push(MethodSummary {
            method,
            metrics: method_metrics,
            mean_fit_secs,
            total_fit_secs,
            failures,
            errors,
            rmse,
            reports,
        });
    }

    Ok(BenchOutcome {
        model: cfg.model.clone(),
        truth,
        summaries,
    })
}

/// One row per method: method, model, Bias2, Variance, MSE, TPR, FPR.
/// Methods whose every replicate failed are omitted.
pub fn metrics_csv(outcome: &BenchOutcome) -> String {
    let mut out = String::from("method,model,Bias2,Variance,MSE,TPR,FPR\n");
    for summary in &outcome.summaries {
        if let Some(m) = &summary.metrics {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                summary.method, outcome.model, m.bias2, m.variance, m.mse, m.tpr, m.fpr
            ));
        }
    }
    out
}

/// One row per method and horizon: method, h, rmse, sd.
pub fn rmse_csv(outcome: &BenchOutcome) -> String {
    let mut out = String::from("method,h,rmse,sd\n");
    for summary in &outcome.summaries {
        if let Some(table) = &summary.rmse {
            for (hi, &h) in table.horizons.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    summary.method, h, table.mean[hi], table.sd[hi]
                ));
            }
        }
    }
    out
}
