//! Command-line front end: CSV in, plot-ready JSON/CSV out. Exit codes:
//! 0 success, 1 pipeline failure, 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use warpdens::{
    estimate_conditional, estimate_density, run_monte_carlo, sample_scenario, unscale_density,
    BenchConfig, ConditionalConfig, ConditionalFit, EstimateConfig, FitPlan, InitialKind,
    Scenario, ScenarioKind, ScenarioSample,
};

#[derive(Parser)]
#[command(name = "warpdens", version, about = "Density estimation by warping an initial fit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitialArg {
    Kde,
    TruncatedNormal,
}

impl From<InitialArg> for InitialKind {
    fn from(v: InitialArg) -> InitialKind {
        match v {
            InitialArg::Kde => InitialKind::Kde,
            InitialArg::TruncatedNormal => InitialKind::TruncatedNormal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    MixExpNormal,
    Claw,
    CondLaplace,
    CondBivariate,
}

impl From<ScenarioArg> for ScenarioKind {
    fn from(v: ScenarioArg) -> ScenarioKind {
        match v {
            ScenarioArg::MixExpNormal => ScenarioKind::MixExpNormal,
            ScenarioArg::Claw => ScenarioKind::Claw,
            ScenarioArg::CondLaplace => ScenarioKind::CondLaplace,
            ScenarioArg::CondBivariate => ScenarioKind::CondBivariate,
        }
    }
}

fn parse_multires(s: &str) -> Result<(usize, usize), String> {
    let mut parts = s.split(',');
    let j_max = parts
        .next()
        .and_then(|p| p.trim().parse::<usize>().ok())
        .ok_or_else(|| format!("expected J_MAX or J_MAX,STEP, got {s:?}"))?;
    let step = match parts.next() {
        None => 2,
        Some(p) => p
            .trim()
            .parse::<usize>()
            .map_err(|_| format!("bad step in {s:?}"))?,
    };
    if parts.next().is_some() {
        return Err(format!("expected J_MAX or J_MAX,STEP, got {s:?}"));
    }
    Ok((j_max, step))
}

#[derive(Args)]
struct PlanArgs {
    /// Fixed number of warp coefficients
    #[arg(long, conflicts_with = "multires")]
    j: Option<usize>,
    /// Dimension ladder as J_MAX or J_MAX,STEP (default 40,2)
    #[arg(long, value_parser = parse_multires)]
    multires: Option<(usize, usize)>,
}

impl PlanArgs {
    fn plan(&self) -> FitPlan {
        match (self.j, self.multires) {
            (Some(j), _) => FitPlan::Fixed { j },
            (None, Some((j_max, step))) => FitPlan::MultiResolution { j_max, step },
            (None, None) => FitPlan::MultiResolution { j_max: 40, step: 2 },
        }
    }

    fn describe(&self) -> Value {
        match self.plan() {
            FitPlan::Fixed { j } => json!({"kind": "fixed", "j": j}),
            FitPlan::MultiResolution { j_max, step } => {
                json!({"kind": "multiresolution", "j_max": j_max, "step": step})
            }
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit a density to one column of observations
    Estimate {
        /// CSV of observations: a `y` column, or a single headerless column
        #[arg(long)]
        input: PathBuf,
        /// Output JSON path
        #[arg(long)]
        out: PathBuf,
        /// Evaluation grid length
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[arg(long, value_enum, default_value_t = InitialArg::Kde)]
        initial: InitialArg,
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit conditional densities at query points
    Conditional {
        /// CSV with header y,x1,...: response then predictors
        #[arg(long)]
        input: PathBuf,
        /// Output JSON path
        #[arg(long)]
        out: PathBuf,
        /// Query point "c1,c2,..."; repeat or separate with ';' for several
        #[arg(long = "at", required = true)]
        at: Vec<String>,
        #[arg(long, default_value_t = 100)]
        grid: usize,
        /// Warp coefficients per query fit
        #[arg(long, default_value_t = 6)]
        j: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Draw a synthetic dataset from a named scenario
    Simulate {
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo benchmark of the pipeline on a scenario
    Bench {
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = InitialArg::Kde)]
        initial: InitialArg,
        #[command(flatten)]
        plan: PlanArgs,
        /// Also fit a cross-validated kernel baseline on the same draws
        #[arg(long)]
        baseline: bool,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    match std::env::var("WARPDENS_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => {
            let n: usize = raw
                .parse()
                .map_err(|_| format!("WARPDENS_THREADS={raw:?} is not a thread count"))?;
            if n == 0 {
                return Err("WARPDENS_THREADS must be positive".into());
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| format!("thread pool: {e}"))
        }
    }
}

struct Table {
    header: Option<Vec<String>>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> Result<Table, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        records.push(rec.iter().map(str::to_owned).collect::<Vec<String>>());
    }
    if records.is_empty() {
        return Err(format!("{}: no rows", path.display()));
    }
    let width = records[0].len();
    if records.iter().any(|r| r.len() != width) {
        return Err(format!("{}: ragged rows", path.display()));
    }
    let first_is_numeric = records[0].iter().all(|f| f.parse::<f64>().is_ok());
    let (header, data) = if first_is_numeric {
        (None, &records[..])
    } else {
        (Some(records[0].clone()), &records[1..])
    };
    let mut rows = Vec::with_capacity(data.len());
    for (i, rec) in data.iter().enumerate() {
        let mut row = Vec::with_capacity(width);
        for field in rec {
            row.push(field.parse::<f64>().map_err(|_| {
                format!("{}: row {} field {field:?} is not a number", path.display(), i + 2)
            })?);
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Response column plus predictors, resolved from the header convention.
fn split_response(table: &Table, path: &Path) -> Result<(Vec<f64>, Vec<Vec<f64>>), String> {
    match &table.header {
        None => {
            if table.rows.iter().any(|r| r.len() != 1) {
                return Err(format!(
                    "{}: headerless input must be a single column",
                    path.display()
                ));
            }
            Ok((table.rows.iter().map(|r| r[0]).collect(), Vec::new()))
        }
        Some(header) => {
            let y_pos = header
                .iter()
                .position(|h| h == "y")
                .ok_or_else(|| format!("{}: no column named y", path.display()))?;
            let y = table.rows.iter().map(|r| r[y_pos]).collect();
            let x = table
                .rows
                .iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|(i, _)| *i != y_pos)
                        .map(|(_, &v)| v)
                        .collect::<Vec<f64>>()
                })
                .collect();
            Ok((y, x))
        }
    }
}

fn parse_queries(at: &[String], dim: usize) -> Result<Vec<Vec<f64>>, String> {
    let mut queries = Vec::new();
    for group in at {
        for part in group.split(';') {
            let q = part
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| format!("query coordinate {c:?} is not a number"))
                })
                .collect::<Result<Vec<f64>, String>>()?;
            if q.len() != dim {
                return Err(format!(
                    "query {part:?} has {} coordinates; data has {dim} predictors",
                    q.len()
                ));
            }
            queries.push(q);
        }
    }
    Ok(queries)
}

fn write_output(path: &Path, contents: &str) -> Result<(), String> {
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

fn density_block(
    grid: &[f64],
    pdf: &[f64],
    bounds: (f64, f64),
    fit: &warpdens::FitResult,
) -> Value {
    json!({
        "grid": grid,
        "pdf": pdf,
        "bounds": {"A": bounds.0, "B": bounds.1},
        "fit": {
            "J": fit.j_used,
            "loglik": fit.loglik,
            "aic": fit.aic,
            "coefficients": fit.c_hat,
        },
    })
}

fn conditional_block(fit: &ConditionalFit) -> Value {
    let (xs, pdf) = unscale_density(&fit.warped, fit.bounds);
    let mut block = density_block(&xs, &pdf, (fit.bounds.a, fit.bounds.b), &fit.fit);
    let obj = block.as_object_mut().unwrap();
    obj.insert("x0".into(), json!(fit.x0));
    obj.insert("m_hat".into(), json!(fit.m_hat));
    obj.insert("sigma_hat".into(), json!(fit.sigma_hat));
    obj.insert("h_local".into(), json!(fit.h_local));
    block
}

fn run(command: Command) -> Result<(), String> {
    match command {
        Command::Estimate {
            input,
            out,
            grid,
            initial,
            plan,
            seed,
        } => {
            let started = Instant::now();
            let table = read_table(&input)?;
            let (y, _x) = split_response(&table, &input)?;
            let config = EstimateConfig {
                grid_len: grid,
                initial: initial.into(),
                basis: warpdens::BasisKind::Fourier,
                plan: plan.plan(),
                seed,
            };
            let est = estimate_density(&y, &config).map_err(|e| e.to_string())?;
            let (xs, pdf) = unscale_density(&est.warped, est.bounds);
            let mut doc = density_block(&xs, &pdf, (est.bounds.a, est.bounds.b), &est.fit);
            doc.as_object_mut().unwrap().insert(
                "meta".into(),
                json!({
                    "seed": seed,
                    "config": {
                        "grid": grid,
                        "initial": initial_name(initial),
                        "plan": plan.describe(),
                    },
                }),
            );
            write_output(&out, &to_pretty(&doc))?;
            eprintln!(
                "estimate: n={} J={} loglik {:.4} -> {:.4} wall {:.2}s",
                y.len(),
                est.fit.j_used,
                est.initial_loglik,
                est.fit.loglik,
                started.elapsed().as_secs_f64()
            );
            Ok(())
        }
        Command::Conditional {
            input,
            out,
            at,
            grid,
            j,
            seed,
        } => {
            let started = Instant::now();
            let table = read_table(&input)?;
            let (y, x) = split_response(&table, &input)?;
            if x.is_empty() || x[0].is_empty() {
                return Err(format!(
                    "{}: conditional fits need predictor columns (header y,x1,...)",
                    input.display()
                ));
            }
            let queries = parse_queries(&at, x[0].len())?;
            let config = ConditionalConfig {
                grid_len: grid,
                j,
                basis: warpdens::BasisKind::Fourier,
                seed,
            };
            let fits =
                estimate_conditional(&x, &y, &queries, &config).map_err(|e| e.to_string())?;
            let mut blocks = Vec::with_capacity(fits.len());
            let mut failed = 0usize;
            for (q, fit) in queries.iter().zip(&fits) {
                blocks.push(match fit {
                    Ok(f) => conditional_block(f),
                    Err(e) => {
                        failed += 1;
                        json!({"x0": q, "error": e.to_string()})
                    }
                });
            }
            let doc = json!({
                "queries": blocks,
                "meta": {
                    "seed": seed,
                    "config": {"grid": grid, "j": j},
                },
            });
            write_output(&out, &to_pretty(&doc))?;
            eprintln!(
                "conditional: n={} queries={} failed={} wall {:.2}s",
                y.len(),
                queries.len(),
                failed,
                started.elapsed().as_secs_f64()
            );
            if failed == queries.len() {
                return Err("every query failed".into());
            }
            Ok(())
        }
        Command::Simulate {
            scenario,
            n,
            seed,
            out,
        } => {
            let sample = sample_scenario(&Scenario {
                kind: scenario.into(),
                n,
                seed,
            });
            let mut csv = String::new();
            match &sample {
                ScenarioSample::Plain(y) => {
                    csv.push_str("y\n");
                    for v in y {
                        csv.push_str(&format!("{v}\n"));
                    }
                }
                ScenarioSample::Regression { x, y } => {
                    csv.push('y');
                    for k in 0..x[0].len() {
                        csv.push_str(&format!(",x{}", k + 1));
                    }
                    csv.push('\n');
                    for (row, v) in x.iter().zip(y) {
                        csv.push_str(&format!("{v}"));
                        for c in row {
                            csv.push_str(&format!(",{c}"));
                        }
                        csv.push('\n');
                    }
                }
            }
            write_output(&out, &csv)?;
            eprintln!("simulate: wrote {n} rows to {}", out.display());
            Ok(())
        }
        Command::Bench {
            scenario,
            n,
            replicates,
            seed,
            initial,
            plan,
            baseline,
            out,
        } => {
            let config = BenchConfig {
                scenario: scenario.into(),
                n,
                replicates,
                master_seed: seed,
                initial: initial.into(),
                plan: plan.plan(),
                with_baseline: baseline,
            };
            let summary = run_monte_carlo(&config).map_err(|e| e.to_string())?;
            write_output(&out, &summary.to_csv())?;
            eprintln!(
                "bench: {} n={} replicates={} completed={} failures={} wall {:.2}s",
                summary.scenario.name(),
                summary.n,
                summary.replicates,
                summary.completed,
                summary.failures,
                summary.seconds
            );
            Ok(())
        }
    }
}

fn initial_name(v: InitialArg) -> &'static str {
    match v {
        InitialArg::Kde => "kde",
        InitialArg::TruncatedNormal => "truncated_normal",
    }
}

fn to_pretty(doc: &Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("serializable document");
    s.push('\n');
    s
}
