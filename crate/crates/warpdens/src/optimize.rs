//! Simplex search and the warped-likelihood objective it maximizes.
//!
//! The coefficient vector c parameterizes a warping through the chart:
//! v = Σ cⱼ bⱼ, q = exp map of v, γ̇ = q²/Z, γ = its antiderivative.
//! The objective is the (optionally weighted) log-likelihood of the data
//! under (f ∘ γ)·γ̇ with the initial estimate f held fixed. Coefficients
//! whose tangent vector leaves the chart's ball, or that drive the
//! likelihood to zero at any observation, score −∞.

use std::sync::Arc;

use crate::basis::BasisSet;
use crate::density::Density;
use crate::error::{Error, Result};
use crate::grid::{cumulative_trapezoid, interpolate, trapezoid};
use crate::sphere::BALL_RADIUS;

/// Margin inside the ball radius at which coefficients are rejected.
const BALL_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct NmOptions {
    /// Sup-norm simplex diameter (relative to the best vertex) below
    /// which the search stops.
    pub x_tol: f64,
    /// Spread of vertex values below which the search stops.
    pub f_tol: f64,
    /// Function-evaluation budget; defaults to 200 per dimension.
    pub max_evals: Option<usize>,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions {
            x_tol: 1e-6,
            f_tol: 1e-8,
            max_evals: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// Downhill simplex minimization with the classical coefficient set
/// (reflection 1, expansion 2, contraction 0.5, shrink 0.5) and the
/// 5-percent initial displacement rule (0.00025 for zero coordinates).
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], opts: NmOptions) -> NmResult {
    let n = x0.len();
    assert!(n >= 1, "need at least one coordinate");
    let max_evals = opts.max_evals.unwrap_or(200 * n);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for j in 0..n {
        let mut y = x0.to_vec();
        if y[j] != 0.0 {
            y[j] *= 1.05;
        } else {
            y[j] = 0.00025;
        }
        simplex.push(y);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = n + 1;
    let mut iterations = 0usize;
    sort_simplex(&mut simplex, &mut values);

    let mut converged = false;
    while evals < max_evals {
        let spread_ok = values[1..]
            .iter()
            .all(|&fv| (fv - values[0]).abs() <= opts.f_tol);
        let diam_ok = simplex[1..].iter().all(|v| {
            v.iter()
                .zip(&simplex[0])
                .all(|(a, b)| (a - b).abs() <= opts.x_tol)
        });
        if spread_ok && diam_ok {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|v| v[i]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let affine = |s: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst)
                .map(|(&c, &w)| c + s * (c - w))
                .collect()
        };

        let xr = affine(1.0);
        let fr = f(&xr);
        evals += 1;

        let mut shrink = false;
        if fr < values[0] {
            let xe = affine(2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else if fr < values[n] {
            // outside contraction
            let xc = affine(0.5);
            let fc = f(&xc);
            evals += 1;
            if fc <= fr {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                shrink = true;
            }
        } else {
            // inside contraction
            let xcc = affine(-0.5);
            let fcc = f(&xcc);
            evals += 1;
            if fcc < values[n] {
                simplex[n] = xcc;
                values[n] = fcc;
            } else {
                shrink = true;
            }
        }

        if shrink {
            for j in 1..=n {
                for i in 0..n {
                    simplex[j][i] = simplex[0][i] + 0.5 * (simplex[j][i] - simplex[0][i]);
                }
                values[j] = f(&simplex[j]);
                evals += 1;
            }
        }

        sort_simplex(&mut simplex, &mut values);
        iterations += 1;
    }

    NmResult {
        x: simplex.swap_remove(0),
        value: values[0],
        evals,
        iterations,
        converged,
    }
}

fn sort_simplex(simplex: &mut [Vec<f64>], values: &mut [f64]) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // total order with NaN (from ∞−∞ arithmetic upstream) pushed last
    order.sort_by(|&a, &b| match values[a].partial_cmp(&values[b]) {
        Some(o) => o,
        None => values[a].is_nan().cmp(&values[b].is_nan()),
    });
    let new_simplex: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
    let new_values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    simplex.clone_from_slice(&new_simplex);
    values.copy_from_slice(&new_values);
}

/// Log-likelihood of unit-scale data under warps of a fixed initial
/// density, parameterized by basis coefficients.
#[derive(Debug, Clone)]
pub struct Objective {
    initial: Density,
    data: Vec<f64>,
    weights: Option<Vec<f64>>,
    basis: Arc<BasisSet>,
}

impl Objective {
    pub fn new(
        initial: Density,
        data: Vec<f64>,
        weights: Option<Vec<f64>>,
        basis: Arc<BasisSet>,
    ) -> Result<Self> {
        if initial.grid() != basis.grid() {
            return Err(Error::Config("initial density and basis grids differ".into()));
        }
        if data.is_empty() {
            return Err(Error::DegenerateSample("no observations".into()));
        }
        if data.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::DegenerateSample(
                "observations must lie strictly inside (0,1)".into(),
            ));
        }
        if let Some(w) = &weights {
            if w.len() != data.len() {
                return Err(Error::Config(format!(
                    "{} weights for {} observations",
                    w.len(),
                    data.len()
                )));
            }
            if w.iter().any(|&wi| !(wi >= 0.0) || !wi.is_finite()) {
                return Err(Error::Config("weights must be finite and nonnegative".into()));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-10 {
                return Err(Error::Config(format!("weights sum to {total}, not 1")));
            }
        }
        Ok(Objective {
            initial,
            data,
            weights,
            basis,
        })
    }

    pub fn basis(&self) -> &Arc<BasisSet> {
        &self.basis
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn initial(&self) -> &Density {
        &self.initial
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    /// Log-likelihood at coefficients `c` (length at most the basis
    /// size). −∞ when c leaves the chart ball or zeroes the likelihood.
    pub fn value(&self, c: &[f64]) -> f64 {
        let grid = self.basis.grid();
        let step = grid.step();
        let v = self.basis.combine(c);
        let norm = trapezoid(step, &v.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt();
        if norm >= BALL_RADIUS * (1.0 - BALL_SLACK) {
            return f64::NEG_INFINITY;
        }

        let q: Vec<f64> = if norm < 1e-12 {
            vec![1.0; grid.len()]
        } else {
            let (cos_t, scale) = (norm.cos(), norm.sin() / norm);
            v.iter().map(|&vi| cos_t + scale * vi).collect()
        };
        // square roots of warp derivatives are nonnegative, so a sign
        // crossing means the candidate is not a warping at all
        if q.iter().any(|&qi| qi <= 0.0) {
            return f64::NEG_INFINITY;
        }
        let qsq: Vec<f64> = q.iter().map(|&qi| qi * qi).collect();
        let z = trapezoid(step, &qsq);
        if !(z > 0.0) {
            return f64::NEG_INFINITY;
        }
        let mut gamma = cumulative_trapezoid(step, &qsq);
        for g in gamma.iter_mut() {
            *g /= z;
        }
        let gdot: Vec<f64> = qsq.iter().map(|&s| s / z).collect();

        let mut total = 0.0;
        match &self.weights {
            None => {
                for &x in &self.data {
                    let term = self.initial.pdf_at(interpolate(step, &gamma, x))
                        * interpolate(step, &gdot, x);
                    if term <= 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    total += term.ln();
                }
            }
            Some(w) => {
                for (&x, &wi) in self.data.iter().zip(w) {
                    if wi == 0.0 {
                        continue;
                    }
                    let term = self.initial.pdf_at(interpolate(step, &gamma, x))
                        * interpolate(step, &gdot, x);
                    if term <= 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    total += wi * term.ln();
                }
            }
        }
        total
    }

    /// Information criterion 2J − 2·loglik; a weighted objective's value
    /// is a per-observation average, so it is scaled back by n first.
    pub fn aic(&self, j: usize, loglik: f64) -> f64 {
        let scale = if self.weights.is_some() {
            self.data.len() as f64
        } else {
            1.0
        };
        2.0 * j as f64 - 2.0 * scale * loglik
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub c_hat: Vec<f64>,
    pub loglik: f64,
    pub aic: f64,
    pub j_used: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximize the objective over coefficients of fixed length, starting
/// from `c_init`. The start is a simplex vertex, so the returned value
/// never falls below the starting value.
pub fn fit_fixed_j(obj: &Objective, c_init: &[f64], opts: NmOptions) -> Result<FitResult> {
    let j = c_init.len();
    if j < 1 || j > obj.basis.len() {
        return Err(Error::Config(format!(
            "coefficient length {j} outside 1..={}",
            obj.basis.len()
        )));
    }
    let res = nelder_mead(|c| -obj.value(c), c_init, opts);
    let loglik = -res.value;
    Ok(FitResult {
        aic: obj.aic(j, loglik),
        c_hat: res.x,
        loglik,
        j_used: j,
        iterations: res.iterations,
        converged: res.converged,
    })
}

/// Fit over the dimension ladder step, 2·step, …, j_max. Each rung runs
/// two starts — fresh zeros and the previous rung's winner padded with
/// zeros — keeps the better information criterion of the two, and the
/// best rung overall is returned.
pub fn fit_multiresolution(
    obj: &Objective,
    j_max: usize,
    step: usize,
    opts: NmOptions,
) -> Result<FitResult> {
    if step < 1 || j_max < step {
        return Err(Error::Config(format!(
            "dimension schedule step {step} / max {j_max} invalid"
        )));
    }
    if j_max > obj.basis.len() {
        return Err(Error::Config(format!(
            "j_max {j_max} exceeds basis size {}",
            obj.basis.len()
        )));
    }

    let mut previous: Option<FitResult> = None;
    let mut best: Option<FitResult> = None;
    let mut jay = step;
    while jay <= j_max {
        let from_zero = fit_fixed_j(obj, &vec![0.0; jay], opts)?;
        let stage = match &previous {
            Some(prev) => {
                let mut padded = prev.c_hat.clone();
                padded.resize(jay, 0.0);
                let continued = fit_fixed_j(obj, &padded, opts)?;
                if continued.aic < from_zero.aic {
                    continued
                } else {
                    from_zero
                }
            }
            None => from_zero,
        };
        if best.as_ref().map_or(true, |b| stage.aic < b.aic) {
            best = Some(stage.clone());
        }
        previous = Some(stage);
        jay += step;
    }
    Ok(best.expect("schedule contains at least one rung"))
}
