//! Batch front end: simulate benchmark data, fit either procedure to a CSV
//! series, evaluate rolling forecasts, run full Monte-Carlo benchmarks from
//! a config file, and export dependency graphs as DOT.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sparsevar::bench::{bench_run, metrics_csv, rmse_csv, rmse_h, BenchConfig, BenchMethod};
use sparsevar::config::{parse_auto, FitOverrides};
use sparsevar::graph::{export_digraph, export_weighted_digraph};
use sparsevar::pipeline::{msvar_fit, svar_fit, FitReport, LambdaRule, MsvarOptions, SvarOptions};
use sparsevar::tsglasso::{Criterion, PenaltyCount};
use sparsevar::varmodel::{fixtures, random_sparse, simulate, VarModel};
use sparsevar::TimeSeries;

#[derive(Parser)]
#[command(
    name = "sparsevar",
    about = "Sparse VAR structure learning via frequency-domain screening",
    version
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a series from a fixture or random sparse model to CSV.
    Simulate(SimulateArgs),
    /// Fit a CSV series with the pair-screened (svar) or penalized (msvar)
    /// procedure and write a JSON report.
    Fit(FitArgs),
    /// Rolling-origin forecast evaluation of a fitted model on held-out
    /// observations.
    Forecast(ForecastArgs),
    /// Monte-Carlo benchmark described by a TOML/JSON config file.
    Bench(BenchArgs),
    /// DOT digraph of the nonzero coefficient structure.
    ExportGraph(ExportGraphArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// model1 | model2 | model3 | random-sparse.
    #[arg(long, default_value = "model1")]
    model: String,
    /// Dimension (random-sparse only).
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Lag order (random-sparse only).
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// Nonzero probability (random-sparse only).
    #[arg(long, default_value_t = 0.25)]
    density: f64,
    #[arg(long = "t-len", default_value_t = 100)]
    t_len: usize,
    #[arg(long = "burn-in", default_value_t = 200)]
    burn_in: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Also write the generating model as JSON.
    #[arg(long = "model-out")]
    model_out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Input series CSV (header row, one column per series).
    #[arg(long)]
    input: PathBuf,
    /// TOML/JSON config; present fields override the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// svar | msvar.
    #[arg(long, default_value = "msvar")]
    method: String,
    #[arg(long = "p-grid", value_delimiter = ',', default_values_t = vec![1usize, 2, 3])]
    p_grid: Vec<usize>,
    /// False-discovery-rate level (msvar).
    #[arg(long, default_value_t = 0.1)]
    q: f64,
    /// Fixed penalty level (msvar); exclusive with --lambda-grid.
    #[arg(long, conflicts_with = "lambda_grid")]
    lambda: Option<f64>,
    /// Explicit penalty grid (msvar).
    #[arg(long = "lambda-grid", value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    /// Size of the automatic log-spaced penalty grid (msvar).
    #[arg(long = "lambda-grid-size", default_value_t = 20)]
    lambda_grid_size: usize,
    /// aic | ebic.
    #[arg(long, default_value = "ebic")]
    criterion: String,
    /// Density weight of the extended criterion.
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// per-frequency | shared parameter counting in the tuning criterion.
    #[arg(long = "penalty-count", default_value = "per-frequency")]
    penalty_count: String,
    /// Smoothing half-window m_t (default ceil(K/2)).
    #[arg(long)]
    mt: Option<usize>,
    /// Stage-1 pair-count grid (svar).
    #[arg(long = "m-grid", value_delimiter = ',')]
    m_grid: Option<Vec<usize>>,
    /// Stage-2 coefficient-count grid (svar).
    #[arg(long = "stage2-grid", value_delimiter = ',')]
    stage2_grid: Option<Vec<usize>>,
    /// Harmonic-sum correction for the refinement cut (msvar).
    #[arg(long)]
    yekutieli: bool,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    #[arg(long = "tol-abs")]
    tol_abs: Option<f64>,
    #[arg(long = "tol-rel")]
    tol_rel: Option<f64>,
    /// Report JSON path (stdout summary is printed either way).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also export the fitted structure as DOT.
    #[arg(long = "graph-out")]
    graph_out: Option<PathBuf>,
}

#[derive(Args)]
struct ForecastArgs {
    /// Input series CSV; the last --test-len rows are held out.
    #[arg(long)]
    input: PathBuf,
    /// Fit report JSON produced by `fit`.
    #[arg(long, conflicts_with = "model")]
    report: Option<PathBuf>,
    /// Bare model JSON (alternative to --report).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long = "test-len")]
    test_len: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 2, 4, 8])]
    horizons: Vec<usize>,
    /// RMSE table CSV path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark config (TOML or JSON).
    #[arg(long)]
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for metrics.csv, rmse.csv, timing.csv, summary.json and
    /// graphs; stdout only when absent.
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ExportGraphArgs {
    /// Fit report JSON.
    #[arg(long, conflicts_with = "model")]
    report: Option<PathBuf>,
    /// Bare model JSON.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Take node labels from this CSV's header.
    #[arg(long = "names-from")]
    names_from: Option<PathBuf>,
    /// Output DOT path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool already initialized")?;
    }
    match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Fit(args) => run_fit(args),
        Command::Forecast(args) => run_forecast(args),
        Command::Bench(args) => run_bench(args),
        Command::ExportGraph(args) => run_export_graph(args),
    }
}

fn resolve_model(name: &str, k: usize, p: usize, density: f64, seed: u64) -> Result<VarModel> {
    let model = match name {
        "random-sparse" => random_sparse(k, p, density, seed)?,
        other => fixtures::by_name(other)?,
    };
    Ok(model)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let model = resolve_model(&args.model, args.k, args.p, args.density, args.seed)?;
    let series = simulate(&model, args.t_len, args.burn_in, args.seed)?;
    series.to_csv_path(&args.out)?;
    println!(
        "wrote {} observations of {} series to {}",
        series.len(),
        series.dim(),
        args.out.display()
    );
    if let Some(model_out) = args.model_out {
        write_text(&model_out, &model.to_json()?)?;
        println!("wrote generating model to {}", model_out.display());
    }
    Ok(())
}

fn parse_criterion(name: &str) -> Result<Criterion> {
    match name {
        "aic" => Ok(Criterion::Aic),
        "ebic" => Ok(Criterion::Ebic),
        other => bail!("unknown criterion {other:?} (expected aic or ebic)"),
    }
}

fn parse_penalty_count(name: &str) -> Result<PenaltyCount> {
    match name {
        "per-frequency" => Ok(PenaltyCount::PerFrequency),
        "shared" => Ok(PenaltyCount::Shared),
        other => bail!("unknown penalty count {other:?} (expected per-frequency or shared)"),
    }
}

fn run_fit(mut args: FitArgs) -> Result<()> {
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let over: FitOverrides = parse_auto(&text)?;
        if let Some(v) = over.method {
            args.method = v;
        }
        if let Some(v) = over.p_grid {
            args.p_grid = v;
        }
        if let Some(v) = over.q {
            args.q = v;
        }
        if over.lambda.is_some() {
            args.lambda = over.lambda;
            args.lambda_grid = None;
        }
        if over.lambda_grid.is_some() {
            args.lambda_grid = over.lambda_grid;
            args.lambda = None;
        }
        if let Some(v) = over.lambda_grid_size {
            args.lambda_grid_size = v;
        }
        if let Some(v) = over.criterion {
            args.criterion = match v {
                Criterion::Aic => "aic".to_string(),
                Criterion::Ebic => "ebic".to_string(),
            };
        }
        if let Some(v) = over.gamma {
            args.gamma = v;
        }
        if let Some(v) = over.penalty_count {
            args.penalty_count = match v {
                PenaltyCount::PerFrequency => "per-frequency".to_string(),
                PenaltyCount::Shared => "shared".to_string(),
            };
        }
        if over.mt.is_some() {
            args.mt = over.mt;
        }
        if over.m_grid.is_some() {
            args.m_grid = over.m_grid;
        }
        if over.stage2_grid.is_some() {
            args.stage2_grid = over.stage2_grid;
        }
        if let Some(v) = over.yekutieli {
            args.yekutieli = v;
        }
        if over.rho.is_some() {
            args.rho = over.rho;
        }
        if over.max_iter.is_some() {
            args.max_iter = over.max_iter;
        }
        if over.tol_abs.is_some() {
            args.tol_abs = over.tol_abs;
        }
        if over.tol_rel.is_some() {
            args.tol_rel = over.tol_rel;
        }
    }

    let series = TimeSeries::from_csv_path(&args.input)?;
    let report = match args.method.as_str() {
        "svar" => {
            let opts = SvarOptions {
                m_grid: args.m_grid.clone(),
                stage2_grid: args.stage2_grid.clone(),
                half_window: args.mt,
            };
            svar_fit(&series, &args.p_grid, &opts)?
        }
        "msvar" => {
            let lambda = if let Some(l) = args.lambda {
                LambdaRule::Fixed(l)
            } else if let Some(grid) = args.lambda_grid.clone() {
                LambdaRule::Grid(grid)
            } else {
                LambdaRule::Auto(args.lambda_grid_size)
            };
            let mut opts = MsvarOptions {
                lambda,
                criterion: parse_criterion(&args.criterion)?,
                gamma: args.gamma,
                penalty_count: parse_penalty_count(&args.penalty_count)?,
                q: args.q,
                yekutieli: args.yekutieli,
                half_window: args.mt,
                ..MsvarOptions::default()
            };
            if let Some(v) = args.rho {
                opts.solver.rho = v;
            }
            if let Some(v) = args.max_iter {
                opts.solver.max_iter = v;
            }
            if let Some(v) = args.tol_abs {
                opts.solver.tol_abs = v;
            }
            if let Some(v) = args.tol_rel {
                opts.solver.tol_rel = v;
            }
            msvar_fit(&series, &args.p_grid, &opts)?
        }
        other => bail!("unknown method {other:?} (expected svar or msvar)"),
    };

    println!(
        "{}: p* = {}, pairs = {}, nonzero coefficients = {}",
        report.method, report.selected_p, report.selected_pairs, report.final_nonzeros
    );
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    if let Some(out) = &args.out {
        write_text(out, &report.to_json()?)?;
        println!("wrote report to {}", out.display());
    }
    if let Some(graph_out) = &args.graph_out {
        let names = series.names().to_vec();
        let dot = export_digraph(&report.final_model, Some(&names))?;
        write_text(graph_out, &dot)?;
        println!("wrote graph to {}", graph_out.display());
    }
    Ok(())
}

fn load_model(report: Option<&Path>, model: Option<&Path>) -> Result<(VarModel, Option<String>)> {
    match (report, model) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let report = FitReport::from_json(&text)?;
            Ok((report.final_model, Some(report.method.to_string())))
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            Ok((VarModel::from_json(&text)?, None))
        }
        _ => bail!("provide exactly one of --report and --model"),
    }
}

fn run_forecast(args: ForecastArgs) -> Result<()> {
    let series = TimeSeries::from_csv_path(&args.input)?;
    if args.test_len == 0 || args.test_len >= series.len() {
        bail!(
            "--test-len must be in 1..{} (series length {})",
            series.len(),
            series.len()
        );
    }
    let (model, method) = load_model(args.report.as_deref(), args.model.as_deref())?;
    let split = series.len() - args.test_len;
    let values = series.values();
    let names = series.names().to_vec();
    let train = TimeSeries::new(
        values.slice(ndarray::s![..split, ..]).to_owned(),
        names.clone(),
    )?;
    let test = TimeSeries::new(values.slice(ndarray::s![split.., ..]).to_owned(), names)?;

    let mut csv = String::from("h,rmse\n");
    for &h in &args.horizons {
        let value = rmse_h(&model, &train, &test, h)?;
        csv.push_str(&format!("{h},{value}\n"));
    }
    if let Some(label) = method {
        println!("model source: {label} fit");
    }
    match &args.out {
        Some(out) => {
            write_text(out, &csv)?;
            println!("wrote RMSE table to {}", out.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg: BenchConfig = parse_auto(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let outcome = bench_run(&cfg)?;

    let metrics_table = metrics_csv(&outcome);
    print!("{metrics_table}");
    for summary in &outcome.summaries {
        if summary.failures > 0 {
            eprintln!(
                "warning: {} failed in {} of {} replicates",
                summary.method, summary.failures, cfg.replicates
            );
        }
    }

    // Relative wall times against the fixed-penalty run when present,
    // otherwise against the fastest method.
    let reference = outcome
        .summaries
        .iter()
        .find(|s| s.method == BenchMethod::MsvarFixed)
        .map(|s| s.total_fit_secs)
        .or_else(|| {
            outcome
                .summaries
                .iter()
                .map(|s| s.total_fit_secs)
                .min_by(f64::total_cmp)
        })
        .unwrap_or(1.0);
    let mut timing = String::from("method,total_secs,mean_secs,relative\n");
    for summary in &outcome.summaries {
        let relative = if reference > 0.0 {
            summary.total_fit_secs / reference
        } else {
            f64::NAN
        };
        timing.push_str(&format!(
            "{},{:.3},{:.3},{:.2}\n",
            summary.method, summary.total_fit_secs, summary.mean_fit_secs, relative
        ));
    }
    print!("{timing}");

    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_text(&dir.join("metrics.csv"), &metrics_table)?;
        write_text(&dir.join("timing.csv"), &timing)?;
        let rmse_table = rmse_csv(&outcome);
        if rmse_table.lines().count() > 1 {
            write_text(&dir.join("rmse.csv"), &rmse_table)?;
        }
        write_text(
            &dir.join("summary.json"),
            &serde_json::to_string_pretty(&outcome)?,
        )?;
        for summary in &outcome.summaries {
            if let Some(m) = &summary.metrics {
                let dot = export_weighted_digraph(&m.detection, None, 0.0)?;
                write_text(&dir.join(format!("graph-{}.dot", summary.method)), &dot)?;
            }
            for (r, report) in summary.reports.iter().enumerate() {
                write_text(
                    &dir.join(format!("report-{}-{r}.json", summary.method)),
                    &report.to_json()?,
                )?;
            }
        }
        println!("wrote benchmark outputs to {}", dir.display());
    }
    Ok(())
}

fn run_export_graph(args: ExportGraphArgs) -> Result<()> {
    let (model, _) = load_model(args.report.as_deref(), args.model.as_deref())?;
    let names = match &args.names_from {
        Some(path) => {
            let series = TimeSeries::from_csv_path(path)?;
            Some(series.names().to_vec())
        }
        None => None,
    };
    let dot = export_digraph(&model, names.as_deref())?;
    match &args.out {
        Some(out) => {
            write_text(out, &dot)?;
            println!("wrote graph to {}", out.display());
        }
        None => print!("{dot}"),
    }
    Ok(())
}
