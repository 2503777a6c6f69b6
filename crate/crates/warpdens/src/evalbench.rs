//! Simulation scenarios with known truth, error norms, and a replicated
//! benchmark harness with a paired kernel baseline.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;

use crate::conditional::{estimate_conditional, ConditionalConfig};
use crate::density::{kde_at, normal_pdf, ucv_bandwidth};
use crate::error::{Error, Result};
use crate::unconditional::{estimate_density, evaluate_estimate, EstimateConfig, FitPlan, InitialKind};
use crate::basis::BasisKind;

/// Mass of the exponential/normal mixture inside [0,1], frozen from a
/// high-resolution quadrature; a test pins the two against each other.
const MIX_TRUNC_MASS: f64 = 0.761_636_696_599_811_3;

/// Scale making a centered double-exponential have unit variance.
const LAPLACE_B: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// 0.75·Exp(3) + 0.25·N(0.75, 2²), truncated to [0,1] by rejection.
    MixExpNormal,
    /// ½N(0,1) + Σₗ (1/10)·N(l/2 − 1, 0.1²), l = 0..4.
    Claw,
    /// X ~ N(0,1); y = 2x − 1 + double-exponential noise of unit variance.
    CondLaplace,
    /// X₁ a normal scale mixture, X₂ ~ U(0,1); y drawn from a normal or a
    /// double-exponential component with probability depending on x₂.
    CondBivariate,
}

impl ScenarioKind {
    pub fn is_conditional(self) -> bool {
        matches!(self, ScenarioKind::CondLaplace | ScenarioKind::CondBivariate)
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::MixExpNormal => "mix_exp_normal",
            ScenarioKind::Claw => "claw",
            ScenarioKind::CondLaplace => "cond_laplace",
            ScenarioKind::CondBivariate => "cond_bivariate",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub enum ScenarioSample {
    Plain(Vec<f64>),
    Regression { x: Vec<Vec<f64>>, y: Vec<f64> },
}

fn laplace_pdf(y: f64, center: f64, b: f64) -> f64 {
    (-(y - center).abs() / b).exp() / (2.0 * b)
}

fn draw_laplace(rng: &mut impl Rng, b: f64) -> f64 {
    let e = Exp::new(1.0).unwrap();
    b * (e.sample(rng) - e.sample(rng))
}

pub fn sample_scenario(scenario: &Scenario) -> ScenarioSample {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let n = scenario.n;
    match scenario.kind {
        ScenarioKind::MixExpNormal => {
            let exp3 = Exp::new(3.0).unwrap();
            let norm = Normal::new(0.75, 2.0).unwrap();
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let v = if rng.gen::<f64>() < 0.75 {
                    exp3.sample(&mut rng)
                } else {
                    norm.sample(&mut rng)
                };
                if (0.0..=1.0).contains(&v) {
                    out.push(v);
                }
            }
            ScenarioSample::Plain(out)
        }
        ScenarioKind::Claw => {
            let wide = Normal::new(0.0, 1.0).unwrap();
            let out = (0..n)
                .map(|_| {
                    let u = rng.gen::<f64>();
                    if u < 0.5 {
                        wide.sample(&mut rng)
                    } else {
                        let l = (((u - 0.5) / 0.1).floor() as usize).min(4);
                        let spike = Normal::new(l as f64 / 2.0 - 1.0, 0.1).unwrap();
                        spike.sample(&mut rng)
                    }
                })
                .collect();
            ScenarioSample::Plain(out)
        }
        ScenarioKind::CondLaplace => {
            let std_norm = Normal::new(0.0, 1.0).unwrap();
            let mut x = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let xi = std_norm.sample(&mut rng);
                y.push(2.0 * xi - 1.0 + draw_laplace(&mut rng, LAPLACE_B));
                x.push(vec![xi]);
            }
            ScenarioSample::Regression { x, y }
        }
        ScenarioKind::CondBivariate => {
            let narrow = Normal::new(0.0, 0.4).unwrap();
            let broad = Normal::new(0.0, 1.4).unwrap();
            let mut x = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let x1 = if rng.gen::<f64>() < 0.95 {
                    narrow.sample(&mut rng)
                } else {
                    broad.sample(&mut rng)
                };
                let x2 = rng.gen::<f64>();
                let yi = if rng.gen::<f64>() < 1.0 - (-x2).exp() {
                    Normal::new(x1 + 2.0, 0.5).unwrap().sample(&mut rng)
                } else {
                    x1 - 1.0 + draw_laplace(&mut rng, LAPLACE_B)
                };
                x.push(vec![x1, x2]);
                y.push(yi);
            }
            ScenarioSample::Regression { x, y }
        }
    }
}

/// Density each scenario draws from. For the regression scenarios this is
/// the conditional density of the response given the predictors `x0`; the
/// plain scenarios ignore `x0`.
pub fn true_pdf(kind: ScenarioKind, x0: &[f64], y: f64) -> f64 {
    match kind {
        ScenarioKind::MixExpNormal => {
            if !(0.0..=1.0).contains(&y) {
                return 0.0;
            }
            let exp_part = 0.75 * 3.0 * (-3.0 * y).exp();
            let norm_part = 0.25 * normal_pdf((y - 0.75) / 2.0) / 2.0;
            (exp_part + norm_part) / MIX_TRUNC_MASS
        }
        ScenarioKind::Claw => {
            let mut v = 0.5 * normal_pdf(y);
            for l in 0..5 {
                let center = l as f64 / 2.0 - 1.0;
                v += 0.1 * normal_pdf((y - center) / 0.1) / 0.1;
            }
            v
        }
        ScenarioKind::CondLaplace => laplace_pdf(y, 2.0 * x0[0] - 1.0, LAPLACE_B),
        ScenarioKind::CondBivariate => {
            let (x1, x2) = (x0[0], x0[1]);
            let w = 1.0 - (-x2).exp();
            w * normal_pdf((y - (x1 + 2.0)) / 0.5) / 0.5
                + (1.0 - w) * laplace_pdf(y, x1 - 1.0, LAPLACE_B)
        }
    }
}

/// Pointwise error summaries between two functions.
#[derive(Debug, Clone, Copy, Default)]
pub struct ErrorReport {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub ise: f64,
}

/// Continuous error norms: trapezoid quadrature of |e| and e² over the
/// window the two value sets were sampled on, plus the sup norm.
pub fn error_norms(est: &[f64], truth: &[f64], window: (f64, f64)) -> Result<ErrorReport> {
    if est.len() != truth.len() || est.len() < 2 {
        return Err(Error::Config("error norms need two equal-length samplings".into()));
    }
    if !(window.1 > window.0) {
        return Err(Error::Config(format!(
            "window ({}, {}) is empty",
            window.0, window.1
        )));
    }
    let step = (window.1 - window.0) / (est.len() - 1) as f64;
    let (mut l1, mut ise, mut linf) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..est.len() {
        let e = (est[i] - truth[i]).abs();
        let w = if i == 0 || i == est.len() - 1 { 0.5 } else { 1.0 };
        l1 += w * e;
        ise += w * e * e;
        linf = linf.max(e);
    }
    l1 *= step;
    ise *= step;
    Ok(ErrorReport {
        l1,
        l2: ise.sqrt(),
        linf,
        ise,
    })
}

/// Plain vector norms of the pointwise difference, with no quadrature
/// weighting: Σ|e|, √Σe², max|e|, Σe².
pub fn vector_norms(est: &[f64], truth: &[f64]) -> Result<ErrorReport> {
    if est.len() != truth.len() || est.is_empty() {
        return Err(Error::Config("vector norms need two equal-length samplings".into()));
    }
    let (mut l1, mut ise, mut linf) = (0.0f64, 0.0f64, 0.0f64);
    for (a, b) in est.iter().zip(truth) {
        let e = (a - b).abs();
        l1 += e;
        ise += e * e;
        linf = linf.max(e);
    }
    Ok(ErrorReport {
        l1,
        l2: ise.sqrt(),
        linf,
        ise,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct BenchConfig {
    pub scenario: ScenarioKind,
    pub n: usize,
    pub replicates: usize,
    pub master_seed: u64,
    /// Initial estimator for the plain pipeline.
    pub initial: InitialKind,
    /// Fit plan for the plain pipeline; regression scenarios always use
    /// the fixed-dimension conditional fit.
    pub plan: FitPlan,
    /// Also fit a cross-validated kernel estimate on the same draws.
    pub with_baseline: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            scenario: ScenarioKind::MixExpNormal,
            n: 100,
            replicates: 20,
            master_seed: 0,
            initial: InitialKind::Kde,
            plan: FitPlan::MultiResolution { j_max: 40, step: 2 },
            with_baseline: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloSummary {
    pub scenario: ScenarioKind,
    pub n: usize,
    pub replicates: usize,
    pub completed: usize,
    /// Failed fit attempts: whole replicates for plain scenarios, query
    /// locations for regression scenarios.
    pub failures: usize,
    /// Fits whose final log-likelihood fell below the identity warp's.
    pub loglik_violations: usize,
    pub mean: ErrorReport,
    pub sd: ErrorReport,
    pub baseline_mean: Option<ErrorReport>,
    pub baseline_sd: Option<ErrorReport>,
    pub mean_j: f64,
    pub seconds: f64,
    pub reports: Vec<ErrorReport>,
    pub baseline_reports: Vec<ErrorReport>,
    pub j_used: Vec<usize>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() == 1 {
        return (m, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (m, (ss / (values.len() - 1) as f64).sqrt())
}

fn summarize(reports: &[ErrorReport]) -> (ErrorReport, ErrorReport) {
    let pick = |f: fn(&ErrorReport) -> f64| -> (f64, f64) {
        let vals: Vec<f64> = reports.iter().map(f).collect();
        mean_sd(&vals)
    };
    let (l1m, l1s) = pick(|r| r.l1);
    let (l2m, l2s) = pick(|r| r.l2);
    let (lim, lis) = pick(|r| r.linf);
    let (isem, ises) = pick(|r| r.ise);
    (
        ErrorReport { l1: l1m, l2: l2m, linf: lim, ise: isem },
        ErrorReport { l1: l1s, l2: l2s, linf: lis, ise: ises },
    )
}

/// Linear-interpolation sample quantile: rank p·(n−1) split between the
/// two bracketing order statistics.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Query locations for a regression scenario: the ten central decile
/// levels of each predictor coordinate, paired level by level.
fn quantile_queries(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = x[0].len();
    let mut cols: Vec<Vec<f64>> = (0..d)
        .map(|k| x.iter().map(|row| row[k]).collect())
        .collect();
    for col in cols.iter_mut() {
        col.sort_by(f64::total_cmp);
    }
    (0..10)
        .map(|i| {
            let p = (i as f64 + 0.5) / 10.0;
            cols.iter().map(|col| quantile(col, p)).collect()
        })
        .collect()
}

struct ReplicateOutcome {
    report: Option<ErrorReport>,
    baseline: Option<ErrorReport>,
    j_used: Option<usize>,
    failures: usize,
    violations: usize,
}

fn eval_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

const EVAL_POINTS: usize = 100;

fn run_plain_replicate(config: &BenchConfig, seed: u64) -> ReplicateOutcome {
    let failed = ReplicateOutcome {
        report: None,
        baseline: None,
        j_used: None,
        failures: 1,
        violations: 0,
    };
    let data = match sample_scenario(&Scenario { kind: config.scenario, n: config.n, seed }) {
        ScenarioSample::Plain(d) => d,
        ScenarioSample::Regression { .. } => unreachable!("plain replicate"),
    };
    let est_config = EstimateConfig {
        grid_len: 100,
        initial: config.initial,
        basis: BasisKind::Fourier,
        plan: config.plan,
        seed,
    };
    let est = match estimate_density(&data, &est_config) {
        Ok(e) => e,
        Err(_) => return failed,
    };
    // evaluation window: the estimated support, clipped to the truth's
    // support when that is known to be bounded
    let (lo, hi) = match config.scenario {
        ScenarioKind::MixExpNormal => (est.bounds.a.max(0.0), est.bounds.b.min(1.0)),
        _ => (est.bounds.a, est.bounds.b),
    };
    let grid = eval_grid(lo, hi, EVAL_POINTS);
    let est_vals = evaluate_estimate(&est, &grid);
    let truth_vals: Vec<f64> = grid.iter().map(|&t| true_pdf(config.scenario, &[], t)).collect();
    let report = match vector_norms(&est_vals, &truth_vals) {
        Ok(r) => r,
        Err(_) => return failed,
    };
    let violations = usize::from(est.fit.loglik < est.initial_loglik - 1e-9);

    let baseline = if config.with_baseline {
        match ucv_bandwidth(&data) {
            Ok(h) => {
                let kde_vals: Vec<f64> = grid.iter().map(|&t| kde_at(&data, h, t)).collect();
                vector_norms(&kde_vals, &truth_vals).ok()
            }
            Err(_) => return failed,
        }
    } else {
        None
    };
    if config.with_baseline && baseline.is_none() {
        return failed;
    }

    ReplicateOutcome {
        report: Some(report),
        baseline,
        j_used: Some(est.fit.j_used),
        failures: 0,
        violations,
    }
}

fn run_conditional_replicate(config: &BenchConfig, seed: u64) -> ReplicateOutcome {
    let (x, y) = match sample_scenario(&Scenario { kind: config.scenario, n: config.n, seed }) {
        ScenarioSample::Regression { x, y } => (x, y),
        ScenarioSample::Plain(_) => unreachable!("conditional replicate"),
    };
    let queries = quantile_queries(&x);
    let cond_config = ConditionalConfig { seed, ..ConditionalConfig::default() };
    let fits = match estimate_conditional(&x, &y, &queries, &cond_config) {
        Ok(f) => f,
        Err(_) => {
            return ReplicateOutcome {
                report: None,
                baseline: None,
                j_used: None,
                failures: queries.len(),
                violations: 0,
            }
        }
    };

    let mut failures = 0usize;
    let mut violations = 0usize;
    let mut per_location = Vec::new();
    let mut j_used = None;
    for (x0, fit) in queries.iter().zip(fits) {
        let fit = match fit {
            Ok(f) => f,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        violations += usize::from(fit.fit.loglik < fit.initial_loglik - 1e-9);
        j_used = Some(fit.fit.j_used);
        let grid = eval_grid(fit.bounds.a, fit.bounds.b, EVAL_POINTS);
        let est_vals: Vec<f64> = grid.iter().map(|&t| fit.pdf_at(t)).collect();
        let truth_vals: Vec<f64> = grid
            .iter()
            .map(|&t| true_pdf(config.scenario, x0, t))
            .collect();
        if let Ok(r) = vector_norms(&est_vals, &truth_vals) {
            per_location.push(r);
        } else {
            failures += 1;
        }
    }
    if per_location.is_empty() {
        return ReplicateOutcome {
            report: None,
            baseline: None,
            j_used: None,
            failures,
            violations,
        };
    }
    let k = per_location.len() as f64;
    let report = ErrorReport {
        l1: per_location.iter().map(|r| r.l1).sum::<f64>() / k,
        l2: per_location.iter().map(|r| r.l2).sum::<f64>() / k,
        linf: per_location.iter().map(|r| r.linf).sum::<f64>() / k,
        ise: per_location.iter().map(|r| r.ise).sum::<f64>() / k,
    };
    ReplicateOutcome {
        report: Some(report),
        baseline: None,
        j_used,
        failures,
        violations,
    }
}

/// Replicated simulation: fresh draws per replicate from serially drawn
/// seeds, fits in parallel, and summary statistics over the successful
/// replicates. Reruns with the same configuration reproduce every number
/// except the wall-clock time.
pub fn run_monte_carlo(config: &BenchConfig) -> Result<MonteCarloSummary> {
    if config.replicates == 0 {
        return Err(Error::Config("need at least one replicate".into()));
    }
    if config.n < 2 {
        return Err(Error::Config(format!("sample size {} too small", config.n)));
    }
    let started = Instant::now();
    let mut master = ChaCha8Rng::seed_from_u64(config.master_seed);
    let seeds: Vec<u64> = (0..config.replicates).map(|_| master.gen()).collect();

    let outcomes: Vec<ReplicateOutcome> = seeds
        .par_iter()
        .map(|&seed| {
            if config.scenario.is_conditional() {
                run_conditional_replicate(config, seed)
            } else {
                run_plain_replicate(config, seed)
            }
        })
        .collect();

    let reports: Vec<ErrorReport> = outcomes.iter().filter_map(|o| o.report).collect();
    let baseline_reports: Vec<ErrorReport> = outcomes.iter().filter_map(|o| o.baseline).collect();
    let j_used: Vec<usize> = outcomes.iter().filter_map(|o| o.j_used).collect();
    let failures: usize = outcomes.iter().map(|o| o.failures).sum();
    let loglik_violations: usize = outcomes.iter().map(|o| o.violations).sum();
    if reports.is_empty() {
        return Err(Error::DegenerateSample("every replicate failed".into()));
    }

    let (mean, sd) = summarize(&reports);
    let (baseline_mean, baseline_sd) = if baseline_reports.is_empty() {
        (None, None)
    } else {
        let (m, s) = summarize(&baseline_reports);
        (Some(m), Some(s))
    };
    let mean_j = j_used.iter().map(|&j| j as f64).sum::<f64>() / j_used.len().max(1) as f64;

    Ok(MonteCarloSummary {
        scenario: config.scenario,
        n: config.n,
        replicates: config.replicates,
        completed: reports.len(),
        failures,
        loglik_violations,
        mean,
        sd,
        baseline_mean,
        baseline_sd,
        mean_j,
        seconds: started.elapsed().as_secs_f64(),
        reports,
        baseline_reports,
        j_used,
    })
}

impl MonteCarloSummary {
    /// Long-format CSV; every row repeats the run's wall-clock seconds,
    /// which is the one column that varies between identical reruns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,n,replicates,norm,mean,sd,seconds\n");
        let mut push = |norm: &str, mean: f64, sd: f64, secs: f64| {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.scenario.name(),
                self.n,
                self.replicates,
                norm,
                mean,
                sd,
                secs
            ));
        };
        push("l1", self.mean.l1, self.sd.l1, self.seconds);
        push("l2", self.mean.l2, self.sd.l2, self.seconds);
        push("linf", self.mean.linf, self.sd.linf, self.seconds);
        push("ise", self.mean.ise, self.sd.ise, self.seconds);
        if let (Some(bm), Some(bs)) = (self.baseline_mean, self.baseline_sd) {
            push("kde_l1", bm.l1, bs.l1, self.seconds);
            push("kde_l2", bm.l2, bs.l2, self.seconds);
            push("kde_linf", bm.linf, bs.linf, self.seconds);
            push("kde_ise", bm.ise, bs.ise, self.seconds);
        }
        let (jm, js) = mean_sd(&self.j_used.iter().map(|&j| j as f64).collect::<Vec<_>>());
        push("j_used", jm, js, self.seconds);
        push("failures", self.failures as f64, 0.0, self.seconds);
        push("loglik_violations", self.loglik_violations as f64, 0.0, self.seconds);
        out
    }
}
