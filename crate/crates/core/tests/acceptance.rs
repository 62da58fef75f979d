//! End-to-end acceptance gate: nine numbered checks covering benchmark
//! reproduction on the three fixture models, the timing ordering on a wide
//! system, optimizer correctness, the statistical procedures, spectral
//! identities, and a forecasting hold-out. Every check prints exactly one
//! PASS/FAIL line; a FAIL line lists the failing sub-checks with the
//! measured values. Heavy benchmark runs are serialized through one lock so
//! wall-clock comparisons stay meaningful, and the model1 ensemble is run
//! once and shared.

use std::sync::{Mutex, MutexGuard, OnceLock};

use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparsevar::bench::{bench_run, rmse_h, BenchConfig, BenchMethod, BenchOutcome, Metrics};
use sparsevar::pipeline::{bh_fdr, msvar_fit, svar_fit, MsvarOptions, SvarOptions};
use sparsevar::psc::{
    max_psc_modulus, psc_by_inversion, residual_cross_spectrum, residual_spectrum_entry,
    ar_inverse_spectrum, psc_from_precision,
};
use sparsevar::restricted_mle::{fit_restricted, fit_restricted_from};
use sparsevar::spectral::{
    dft_all, hermitian_eig, hermitian_eigenvalues, hermitianize, max_asymmetry, HermitianSpectrum,
};
use sparsevar::tsglasso::{
    admm_solve, theta_update, whittle_neg_loglik, z_update, Criterion, SolverConfig,
};
use sparsevar::varmodel::{fixtures, log_likelihood_from, simulate, SupportMask, VarModel};
use sparsevar::TimeSeries;

/// Serializes the expensive checks so their wall-clock measurements do not
/// contend for cores; a poisoned lock still gates ordering.
static GATE: Mutex<()> = Mutex::new(());

fn gate() -> MutexGuard<'static, ()> {
    match GATE.lock() {
        Ok(g) => g,
        Err(poisoned) => poisoned.into_inner(),
    }
}

/// One sub-check: a short description with measured values, plus the verdict.
struct Checks {
    label: &'static str,
    entries: Vec<(String, bool)>,
}

impl Checks {
    fn new(label: &'static str) -> Self {
        Self {
            label,
            entries: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, detail: String) {
        self.entries.push((detail, ok));
    }

    /// Prints the single verdict line and panics when any sub-check failed.
    fn finish(self) {
        let failing: Vec<&str> = self
            .entries
            .iter()
            .filter(|(_, ok)| !ok)
            .map(|(d, _)| d.as_str())
            .collect();
        if failing.is_empty() {
            println!("{}: PASS", self.label);
        } else {
            println!("{}: FAIL [{}]", self.label, failing.join(" | "));
            panic!(
                "{}: {}/{} sub-checks failed: {}",
                self.label,
                failing.len(),
                self.entries.len(),
                failing.join(" | ")
            );
        }
    }
}

/// True when `x` lies within +-40 percent of the published reference value.
fn near_reference(x: f64, reference: f64) -> bool {
    x >= 0.6 * reference && x <= 1.4 * reference
}

fn linear_grid() -> Vec<f64> {
    (1..=20).map(|k| k as f64 / 21.0).collect()
}

fn metrics_of(outcome: &BenchOutcome, method: BenchMethod) -> &Metrics {
    outcome
        .summaries
        .iter()
        .find(|s| s.method == method)
        .and_then(|s| s.metrics.as_ref())
        .unwrap_or_else(|| panic!("no metrics for {method}"))
}

fn fit_secs_of(outcome: &BenchOutcome, method: BenchMethod) -> f64 {
    outcome
        .summaries
        .iter()
        .find(|s| s.method == method)
        .map(|s| s.total_fit_secs)
        .unwrap_or_else(|| panic!("no timing for {method}"))
}

/// The model1 ensemble feeds two checks; it runs once.
static MODEL1_RUN: OnceLock<BenchOutcome> = OnceLock::new();

fn model1_outcome() -> &'static BenchOutcome {
    MODEL1_RUN.get_or_init(|| {
        let cfg = BenchConfig {
            model: "model1".to_string(),
            replicates: 50,
            t_len: 100,
            seed: 20250,
            methods: vec![
                BenchMethod::Svar,
                BenchMethod::Msvar,
                BenchMethod::MsvarStage1,
            ],
            p_grid: vec![1, 2, 3],
            lambda_grid: Some(linear_grid()),
            ..BenchConfig::default()
        };
        bench_run(&cfg).expect("model1 benchmark completes")
    })
}

/// Random Hermitian positive definite stack B B^H + I with a seeded fill.
fn random_pd_stack(k: usize, m: usize, window: usize, seed: u64) -> HermitianSpectrum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mats = Vec::with_capacity(m);
    for _ in 0..m {
        let b = Array2::from_shape_fn((k, k), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let bh = b.t().mapv(|v| v.conj());
        let mut f = b.dot(&bh);
        for i in 0..k {
            f[[i, i]] += Complex64::new(1.0, 0.0);
        }
        mats.push(f);
    }
    let freqs: Vec<f64> = (1..=m).map(|n| n as f64 / (2 * (m + 1)) as f64).collect();
    HermitianSpectrum::new(mats, freqs, window).expect("constructed stack is valid")
}

/// Random Hermitian (not necessarily definite) stack for dual/iterate seeds.
fn random_hermitian_stack(k: usize, m: usize, window: usize, seed: u64) -> HermitianSpectrum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mats = Vec::with_capacity(m);
    for _ in 0..m {
        let b = Array2::from_shape_fn((k, k), |_| {
            Complex64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5))
        });
        mats.push(hermitianize(&b));
    }
    let freqs: Vec<f64> = (1..=m).map(|n| n as f64 / (2 * (m + 1)) as f64).collect();
    HermitianSpectrum::new(mats, freqs, window).expect("constructed stack is valid")
}

/// Inverse of a Hermitian positive definite matrix via its eigensystem.
fn hermitian_inverse(m: &Array2<Complex64>) -> Array2<Complex64> {
    let (vals, vecs) = hermitian_eig(m).expect("eigendecomposition succeeds");
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
        let inv = 1.0 / vals[j];
        col.map_inplace(|v| *v *= Complex64::new(inv, 0.0));
    }
    let vh = vecs.t().mapv(|v| v.conj());
    scaled.dot(&vh)
}

#[test]
fn check_1_model1_accuracy_and_selection() {
    let _g = gate();
    let out = model1_outcome();
    let sv = metrics_of(out, BenchMethod::Svar);
    let ms = metrics_of(out, BenchMethod::Msvar);
    let fit_secs: f64 = out.summaries.iter().map(|s| s.total_fit_secs).sum();

    let mut c = Checks::new("acceptance 1/8 model1 accuracy benchmark");
    c.require(
        ms.mse < sv.mse,
        format!("mse ordering {:.4} < {:.4}", ms.mse, sv.mse),
    );
    c.require(
        ms.fpr <= sv.fpr,
        format!("fpr ordering {:.4} <= {:.4}", ms.fpr, sv.fpr),
    );
    c.require(
        near_reference(ms.bias2, 0.174),
        format!("bias2 {:.4} within 40% of 0.174", ms.bias2),
    );
    c.require(
        near_reference(ms.variance, 0.732),
        format!("variance {:.4} within 40% of 0.732", ms.variance),
    );
    c.require(
        near_reference(ms.mse, 0.906),
        format!("mse {:.4} within 40% of 0.906", ms.mse),
    );
    c.require(
        near_reference(ms.tpr, 0.632),
        format!("tpr {:.4} within 40% of 0.632", ms.tpr),
    );
    c.require(
        near_reference(ms.fpr, 0.02),
        format!("fpr {:.4} within 40% of 0.02", ms.fpr),
    );
    c.require(
        fit_secs < 900.0,
        format!("fit time {fit_secs:.0}s under 900s"),
    );
    c.finish();
}

#[test]
fn check_2_model2_orderings_and_inverse_spectrum_zeros() {
    let _g = gate();
    let cfg = BenchConfig {
        model: "model2".to_string(),
        replicates: 50,
        t_len: 800,
        seed: 20250,
        methods: vec![BenchMethod::Svar, BenchMethod::Msvar],
        p_grid: vec![1, 2, 3],
        q: 0.3,
        lambda_grid: Some(vec![0.2, 0.4, 0.6, 0.8]),
        ..BenchConfig::default()
    };
    let out = bench_run(&cfg).expect("model2 benchmark completes");
    let sv = metrics_of(&out, BenchMethod::Svar);
    let ms = metrics_of(&out, BenchMethod::Msvar);

    let mut c = Checks::new("acceptance 2/8 model2 orderings and analytic zeros");
    c.require(
        ms.bias2 < sv.bias2,
        format!("bias2 ordering {:.4} < {:.4}", ms.bias2, sv.bias2),
    );
    c.require(
        ms.tpr > sv.tpr,
        format!("tpr ordering {:.4} > {:.4}", ms.tpr, sv.tpr),
    );

    // The fixture places nonzero lag-one coefficients on pairs whose
    // inverse-spectrum polynomial entries are supposed to vanish for every
    // lag; certify both sides of that construction analytically.
    let model = fixtures::model2();
    let freqs = [0.0, 0.125, 0.25, 0.375, 0.5];
    let diag = ar_inverse_spectrum(&model, &freqs, 1e-10).expect("analytic inverse spectrum");
    let a1 = &model.coeffs()[0];
    c.require(
        a1[[0, 1]] != 0.0 && a1[[3, 4]] != 0.0,
        format!(
            "coefficients present a1[0,1]={:.2} a1[3,4]={:.2}",
            a1[[0, 1]],
            a1[[3, 4]]
        ),
    );
    let max01 = diag
        .xk
        .iter()
        .map(|x| x[[0, 1]].abs().max(x[[1, 0]].abs()))
        .fold(0.0f64, f64::max);
    let max34 = diag
        .xk
        .iter()
        .map(|x| x[[3, 4]].abs().max(x[[4, 3]].abs()))
        .fold(0.0f64, f64::max);
    c.require(
        max01 <= 1e-10,
        format!("inverse-spectrum entry (0,1) zero for all lags, max |X_k| = {max01:.4}"),
    );
    c.require(
        max34 <= 1e-10,
        format!("inverse-spectrum entry (3,4) zero for all lags, max |X_k| = {max34:.4}"),
    );
    c.finish();
}

#[test]
fn check_3_model3_recovery() {
    let _g = gate();
    let cfg = BenchConfig {
        model: "model3".to_string(),
        replicates: 50,
        t_len: 100,
        seed: 20250,
        methods: vec![BenchMethod::Svar, BenchMethod::Msvar],
        p_grid: vec![1, 2, 3],
        half_window: Some(10),
        criterion: Criterion::Aic,
        ..BenchConfig::default()
    };
    let out = bench_run(&cfg).expect("model3 benchmark completes");
    let sv = metrics_of(&out, BenchMethod::Svar);
    let ms = metrics_of(&out, BenchMethod::Msvar);

    let mut c = Checks::new("acceptance 3/8 model3 recovery benchmark");
    c.require(sv.tpr >= 0.85, format!("pair-screened tpr {:.4} >= 0.85", sv.tpr));
    c.require(ms.tpr >= 0.85, format!("penalized tpr {:.4} >= 0.85", ms.tpr));
    c.require(
        near_reference(sv.mse, 0.851),
        format!("pair-screened mse {:.4} within 40% of 0.851", sv.mse),
    );
    c.require(
        near_reference(ms.mse, 0.844),
        format!("penalized mse {:.4} within 40% of 0.844", ms.mse),
    );
    c.finish();
}

#[test]
fn check_4_refinement_stage_reduces_error() {
    let _g = gate();
    let out = model1_outcome();
    let ms = metrics_of(out, BenchMethod::Msvar);
    let stage1 = metrics_of(out, BenchMethod::MsvarStage1);

    let mut c = Checks::new("acceptance 4/8 refinement stage value");
    c.require(
        ms.mse < stage1.mse,
        format!("mse {:.4} < stage-1-only {:.4}", ms.mse, stage1.mse),
    );
    c.finish();
}

#[test]
fn check_5_timing_ordering_on_wide_system() {
    let _g = gate();
    let m_grid: Vec<usize> = (0..=1225).step_by(50).collect();
    let cfg = BenchConfig {
        model: "random-sparse".to_string(),
        k: 50,
        p: 1,
        density: 0.25,
        replicates: 1,
        t_len: 200,
        seed: 20250,
        methods: vec![
            BenchMethod::Svar,
            BenchMethod::Msvar,
            BenchMethod::MsvarFixed,
        ],
        p_grid: vec![1],
        m_grid: Some(m_grid),
        stage2_grid: Some(vec![0, 50, 100, 150, 200, 300, 400, 600, 800, 1000]),
        lambda_grid: Some(linear_grid()),
        parallel_replicates: false,
        ..BenchConfig::default()
    };
    let out = bench_run(&cfg).expect("timing benchmark completes");
    let sv = fit_secs_of(&out, BenchMethod::Svar);
    let tuned = fit_secs_of(&out, BenchMethod::Msvar);
    let fixed = fit_secs_of(&out, BenchMethod::MsvarFixed);

    let mut c = Checks::new("acceptance 5/8 timing ordering at K=50");
    c.require(
        sv > 10.0 * fixed,
        format!("pair-screened {sv:.1}s > 10x fixed-penalty {fixed:.1}s"),
    );
    c.require(
        tuned < 2.0 * fixed,
        format!("tuned {tuned:.1}s < 2x fixed-penalty {fixed:.1}s"),
    );
    c.finish();
}

#[test]
fn check_6_optimizer_suite() {
    let _g = gate();
    let mut c = Checks::new("acceptance 6/8 optimizer suite");
    let config = SolverConfig::default();

    // (a) Unpenalized solve recovers the inverse of the input per frequency.
    let f = random_pd_stack(3, 4, 5, 601);
    let sol = admm_solve(&f, 0.0, &config).expect("unpenalized solve");
    let mut worst = 0.0f64;
    for n in 0..f.len() {
        let prod = sol.theta.matrices()[n].dot(&f.matrices()[n]);
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[[i, j]] - Complex64::new(target, 0.0)).norm());
            }
        }
    }
    c.require(
        worst < 1e-6,
        format!("lambda=0 recovers the inverse, max |theta f - I| = {worst:.2e}"),
    );

    // (b) Stationarity of the smooth update: L(-theta^-1 + f) + rho (theta - z + u) = 0.
    let z = random_hermitian_stack(3, 4, 5, 602);
    let u = random_hermitian_stack(3, 4, 5, 603);
    let theta = theta_update(&z, &u, &f, 2.0, 5).expect("smooth update");
    let mut kkt = 0.0f64;
    for n in 0..f.len() {
        let theta_inv = hermitian_inverse(&theta.matrices()[n]);
        let mut resid = f.matrices()[n].clone();
        resid = resid - &theta_inv;
        resid.mapv_inplace(|v| v * Complex64::new(5.0, 0.0));
        let drift =
            (&theta.matrices()[n] - &z.matrices()[n] + &u.matrices()[n]).mapv(|v| v * 2.0);
        resid = resid + &drift;
        let fro: f64 = resid.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        kkt = kkt.max(fro);
    }
    c.require(
        kkt < 1e-8,
        format!("smooth-update stationarity residual {kkt:.2e} < 1e-8"),
    );

    // (c) The shrinkage update minimizes its separable objective: compare
    // each returned group against random perturbations of the closed form.
    let theta_c = random_hermitian_stack(3, 2, 5, 604);
    let u_c = random_hermitian_stack(3, 2, 5, 605);
    let (lambda, rho) = (0.7, 2.0);
    let zsol = z_update(&theta_c, &u_c, lambda, rho);
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut prox_ok = true;
    let mut prox_note = String::from("shrinkage update is the group minimizer");
    'outer: for i in 0..3 {
        for j in (i + 1)..3 {
            let a: Vec<Complex64> = (0..theta_c.len())
                .map(|n| theta_c.matrices()[n][[i, j]] + u_c.matrices()[n][[i, j]])
                .collect();
            let zg: Vec<Complex64> = (0..theta_c.len())
                .map(|n| zsol.matrices()[n][[i, j]])
                .collect();
            // Ordered-pair objective: both (i,j) and (j,i) carry the penalty
            // and the quadratic coupling, so each scales by two.
            let objective = |v: &[Complex64]| -> f64 {
                let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                let quad: f64 = v
                    .iter()
                    .zip(&a)
                    .map(|(x, y)| (x - y).norm_sqr())
                    .sum::<f64>();
                2.0 * lambda * norm + rho * quad
            };
            let base = objective(&zg);
            for trial in 0..400 {
                let scale = 10f64.powf(rng.random_range(-4.0..0.0));
                let candidate: Vec<Complex64> = zg
                    .iter()
                    .map(|x| {
                        x + Complex64::new(
                            scale * rng.random_range(-1.0..1.0),
                            scale * rng.random_range(-1.0..1.0),
                        )
                    })
                    .collect();
                let other = if trial % 7 == 0 {
                    vec![Complex64::new(0.0, 0.0); zg.len()]
                } else {
                    candidate
                };
                if base > objective(&other) + 1e-6 {
                    prox_ok = false;
                    prox_note = format!(
                        "group ({i},{j}) beaten by a perturbation: {base:.8} > {:.8}",
                        objective(&other)
                    );
                    break 'outer;
                }
            }
        }
    }
    c.require(prox_ok, prox_note);

    // (d) Hermitian symmetry and positive definiteness hold at every sweep.
    let mut zi = HermitianSpectrum::zeros_like(&f);
    let mut ui = HermitianSpectrum::zeros_like(&f);
    let mut invariant_ok = true;
    let mut invariant_note = String::from("iterates stay Hermitian and positive definite");
    for sweep in 0..25 {
        let th = theta_update(&zi, &ui, &f, 2.0, 5).expect("smooth update");
        zi = z_update(&th, &ui, 0.5, 2.0);
        let mut next_u = Vec::with_capacity(f.len());
        for n in 0..f.len() {
            next_u.push(hermitianize(
                &(&ui.matrices()[n] + &th.matrices()[n] - &zi.matrices()[n]),
            ));
        }
        ui = HermitianSpectrum::new(next_u, f.frequencies().to_vec(), 5)
            .expect("dual stack stays valid");
        for n in 0..f.len() {
            let asym = max_asymmetry(&th.matrices()[n])
                .max(max_asymmetry(&zi.matrices()[n]))
                .max(max_asymmetry(&ui.matrices()[n]));
            let min_eig = hermitian_eigenvalues(&th.matrices()[n])
                .expect("eigenvalues")
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if asym > 0.0 || min_eig <= 0.0 {
                invariant_ok = false;
                invariant_note = format!(
                    "sweep {sweep} frequency {n}: asymmetry {asym:.2e}, min eigenvalue {min_eig:.2e}"
                );
            }
        }
    }
    c.require(invariant_ok, invariant_note);

    // (e) Scalar smooth update solves rho t - 1/t = c exactly.
    let ones = HermitianSpectrum::new(
        vec![Array2::from_elem((1, 1), Complex64::new(1.0, 0.0))],
        vec![0.25],
        1,
    )
    .expect("scalar stack");
    let zero = HermitianSpectrum::zeros_like(&ones);
    let scalar = theta_update(&zero, &zero, &ones, 1.0, 1).expect("scalar update");
    let got = scalar.matrices()[0][[0, 0]];
    let golden = (-1.0 + 5.0f64.sqrt()) / 2.0;
    c.require(
        (got.re - golden).abs() < 1e-12 && got.im == 0.0,
        format!("scalar update {:.15} matches {golden:.15}", got.re),
    );

    // The converged objective is no worse than the fully shrunk diagonal
    // solution of the same problem.
    let pen = admm_solve(&f, 1.5, &config).expect("penalized solve");
    let diag_stack = {
        let mut mats = Vec::with_capacity(f.len());
        for n in 0..f.len() {
            let mut d = Array2::<Complex64>::zeros((3, 3));
            for i in 0..3 {
                d[[i, i]] = Complex64::new(1.0 / f.matrices()[n][[i, i]].re, 0.0);
            }
            mats.push(d);
        }
        HermitianSpectrum::new(mats, f.frequencies().to_vec(), 5).expect("diagonal stack")
    };
    let obj_pen = whittle_neg_loglik(&pen.z, &f, 5)
        .expect("objective at solution")
        + sparsevar::tsglasso::group_penalty(&pen.z, 1.5);
    let obj_diag = whittle_neg_loglik(&diag_stack, &f, 5)
        .expect("objective at diagonal")
        + sparsevar::tsglasso::group_penalty(&diag_stack, 1.5);
    c.require(
        obj_pen <= obj_diag + 1e-6,
        format!("penalized objective {obj_pen:.6} <= diagonal objective {obj_diag:.6}"),
    );

    c.finish();
}

#[test]
fn check_7_statistical_procedures() {
    let _g = gate();
    let mut c = Checks::new("acceptance 7/8 statistical procedures");

    // Step-up cut rule against an exhaustive evaluation on random inputs.
    let mut rng = ChaCha8Rng::seed_from_u64(701);
    let levels = [0.05, 0.1, 0.2, 0.3];
    let mut bh_ok = true;
    let mut bh_note = String::from("cut rule matches exhaustive evaluation on 1000 vectors");
    for trial in 0..1000 {
        let n = rng.random_range(1..=12);
        let q = levels[trial % levels.len()];
        let p: Vec<f64> = (0..n)
            .map(|_| {
                let v: f64 = rng.random_range(0.0..1.0);
                if rng.random_bool(0.3) {
                    (v * 10.0).round() / 10.0
                } else {
                    v
                }
            })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap().then(a.cmp(&b)));
        let mut k = 0;
        for i in (1..=n).rev() {
            if p[order[i - 1]] <= i as f64 * q / n as f64 {
                k = i;
                break;
            }
        }
        let mut expected: Vec<usize> = order[..k].to_vec();
        expected.sort_unstable();
        let mut got = bh_fdr(&p, q).expect("cut rule accepts valid input");
        got.sort_unstable();
        if got != expected {
            bh_ok = false;
            bh_note = format!("trial {trial}: got {got:?}, expected {expected:?} for p = {p:?}");
            break;
        }
    }
    c.require(bh_ok, bh_note);

    // A full-support restricted fit coincides with per-equation least squares.
    let truth = fixtures::model1();
    let data = simulate(&truth, 300, 200, 702).expect("simulation");
    let k = truth.dim();
    let full = fit_restricted(&data, 1, &SupportMask::full(1, k)).expect("full-support fit");
    let values = data.values();
    let t_len = data.len();
    let rows = t_len - 1;
    let mut x = Array2::zeros((rows, k + 1));
    for t in 0..rows {
        x[[t, 0]] = 1.0;
        for j in 0..k {
            x[[t, 1 + j]] = values[[t, j]];
        }
    }
    let xtx = x.t().dot(&x);
    let mut ols_gap = 0.0f64;
    for i in 0..k {
        let y = Array1::from_shape_fn(rows, |t| values[[t + 1, i]]);
        let xty = x.t().dot(&y);
        let beta = xtx.solve(&xty).expect("normal equations solve");
        ols_gap = ols_gap.max((full.model.intercept()[i] - beta[0]).abs());
        for j in 0..k {
            ols_gap = ols_gap.max((full.model.coeffs()[0][[i, j]] - beta[1 + j]).abs());
        }
    }
    c.require(
        ols_gap < 1e-8,
        format!("full-support fit matches least squares, max gap {ols_gap:.2e}"),
    );

    // Penalized-count lag selection recovers the true order on long samples.
    let mut hits = 0;
    for r in 0..50 {
        let sample = simulate(&truth, 1000, 200, 703_000 + r).expect("simulation");
        let mut best = (f64::INFINITY, 0usize);
        for p in 1..=3 {
            let fit = fit_restricted_from(&sample, p, &SupportMask::full(p, k), 3)
                .expect("full fit at candidate order");
            let count = (k * k * p) as f64;
            let bic = -2.0 * fit.loglik + (1000f64).ln() * count;
            if bic < best.0 {
                best = (bic, p);
            }
        }
        if best.1 == 1 {
            hits += 1;
        }
    }
    c.require(
        hits >= 45,
        format!("lag order recovered in {hits}/50 long-sample replicates"),
    );

    c.finish();
}

#[test]
fn check_8_spectral_identities() {
    let _g = gate();
    let mut c = Checks::new("acceptance 8/8 spectral identities");

    // Energy conservation of the normalized transform.
    let mut rng = ChaCha8Rng::seed_from_u64(801);
    for &t_len in &[256usize, 257] {
        let values = Array2::from_shape_fn((t_len, 4), |_| rng.random_range(-2.0..2.0));
        let series = TimeSeries::with_default_names(values.clone()).expect("series");
        let coeff = dft_all(&series).expect("transform");
        let t_even = t_len - (t_len % 2);
        let freq_energy: f64 = coeff.iter().map(|v| v.norm_sqr()).sum();
        let time_energy: f64 = values
            .rows()
            .into_iter()
            .take(t_even)
            .flat_map(|r| r.into_iter().map(|v| v * v).collect::<Vec<_>>())
            .sum();
        let rel = (freq_energy - time_energy).abs() / time_energy;
        c.require(
            rel < 1e-10,
            format!("energy conserved at T={t_len}, relative gap {rel:.2e}"),
        );
    }

    // Partial-coherence modulus bound on random precision stacks.
    let mut bound_worst = 0.0f64;
    for k in 3..=5 {
        let theta = random_pd_stack(k, 3, 7, 810 + k as u64);
        let surface = psc_from_precision(&theta).expect("coherence from precision");
        bound_worst = bound_worst.max(max_psc_modulus(&surface));
    }
    c.require(
        bound_worst <= 1.0 + 1e-8,
        format!("coherence modulus bounded by one, worst {bound_worst:.12}"),
    );

    // Sub-block regression route agrees with the direct inversion route.
    let mut route_gap = 0.0f64;
    for k in 3..=5 {
        let f = random_pd_stack(k, 3, 7, 820 + k as u64);
        let direct = psc_by_inversion(&f).expect("inversion route");
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let excluded: Vec<usize> = (0..k).filter(|&x| x != i && x != j).collect();
                let num = residual_cross_spectrum(&f, i, j).expect("residual numerator");
                let dii = residual_spectrum_entry(&f, i, i, &excluded).expect("residual variance");
                let djj = residual_spectrum_entry(&f, j, j, &excluded).expect("residual variance");
                for n in 0..f.len() {
                    let modulus = (num[n] / (dii[n].re * djj[n].re).sqrt()).norm();
                    route_gap =
                        route_gap.max((modulus - direct.values()[n][[i, j]].norm()).abs());
                }
            }
        }
    }
    c.require(
        route_gap < 1e-10,
        format!("regression and inversion routes agree, max gap {route_gap:.2e}"),
    );

    c.finish();
}

/// Forecasting substitute for the real-data table: fitted models must beat a
/// zero forecast on a short synthetic hold-out and stay finite at every
/// horizon as iterated forecasts decay toward the process mean.
#[test]
fn check_9_forecast_holdout() {
    let _g = gate();
    let truth = fixtures::model3();
    let data = simulate(&truth, 124, 300, 901).expect("simulation");
    let (train, test) = data.split_at(100).expect("train/test split");

    let sv_opts = SvarOptions {
        half_window: Some(10),
        ..SvarOptions::default()
    };
    let ms_opts = MsvarOptions {
        criterion: Criterion::Aic,
        half_window: Some(10),
        ..MsvarOptions::default()
    };
    let svar = svar_fit(&train, &[1, 2, 3], &sv_opts).expect("pair-screened fit");
    let msvar = msvar_fit(&train, &[1, 2, 3], &ms_opts).expect("penalized fit");
    let zero = VarModel::new(
        Array1::zeros(truth.dim()),
        vec![Array2::zeros((truth.dim(), truth.dim()))],
        Array2::eye(truth.dim()),
    )
    .expect("zero model");

    let mut c = Checks::new("acceptance forecast hold-out");
    for (name, report) in [("pair-screened", &svar), ("penalized", &msvar)] {
        for h in 1..=6usize {
            let model_rmse =
                rmse_h(&report.final_model, &train, &test, h).expect("forecast error");
            let zero_rmse = rmse_h(&zero, &train, &test, h).expect("baseline error");
            let ok = model_rmse.is_finite() && model_rmse <= 1.05 * zero_rmse;
            let strict = h > 1 || model_rmse < zero_rmse;
            c.require(
                ok && strict,
                format!("{name} h={h}: rmse {model_rmse:.4} vs zero {zero_rmse:.4}"),
            );
        }
    }
    // A sanity guard that the log-likelihood machinery sees the fitted
    // models as proper densities on the hold-out.
    let ll = log_likelihood_from(&svar.final_model, &data, 100).expect("hold-out likelihood");
    c.require(ll.is_finite(), format!("hold-out log-likelihood {ll:.2} finite"));
    c.finish();
}
