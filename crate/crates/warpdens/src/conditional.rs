//! Conditional density estimation: a local linear regression centers a
//! truncated-normal initial at each query point, and a localized weight
//! vector turns the warp fit into a weighted likelihood over the shared
//! response sample.

use std::sync::Arc;

use rayon::prelude::*;

use crate::basis::{BasisKind, BasisSet};
use crate::density::{
    kde_at, normal_pdf, silverman_bandwidth, truncated_normal, turnbull_bounds, warp, Density,
    ScaledSample, SupportBounds,
};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::optimize::{fit_fixed_j, FitResult, NmOptions, Objective};
use crate::sphere::{gamma_of, Warping};

const SINGULAR_RETRIES: usize = 5;

/// Gaussian-weighted local linear regression, held as a callable fit:
/// evaluating the mean function solves the weighted least squares
/// problem at that point.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    /// Residual standard deviation at the sample points.
    pub sigma_hat: f64,
    /// Per-coordinate kernel bandwidths in use.
    pub kernel_bandwidths: Vec<f64>,
    /// In-sample residuals, one per observation.
    pub residuals: Vec<f64>,
}

impl RegressionFit {
    /// Mean function at `x0`: the intercept of the locally weighted
    /// linear fit, with bandwidths doubled on a singular local design
    /// up to a bounded number of retries.
    pub fn m_hat(&self, x0: &[f64]) -> Result<f64> {
        if x0.len() != self.kernel_bandwidths.len() {
            return Err(Error::Config("query dimension mismatch".into()));
        }
        regress_at(&self.x, &self.y, &self.kernel_bandwidths, x0)
    }

    pub fn dimension(&self) -> usize {
        self.kernel_bandwidths.len()
    }
}

fn validate_rows(x: &[Vec<f64>]) -> Result<usize> {
    let d = match x.first() {
        Some(row) if !row.is_empty() => row.len(),
        _ => return Err(Error::Config("predictor matrix is empty".into())),
    };
    if x.iter().any(|row| row.len() != d) {
        return Err(Error::Config("predictor rows have inconsistent length".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Config("predictor values must be finite".into()));
    }
    Ok(d)
}

/// Weighted least squares for intercept + slopes at `x0`; `None` when the
/// local design is singular.
fn wls_solve(x: &[Vec<f64>], y: &[f64], w: &[f64], x0: &[f64]) -> Option<f64> {
    let d = x0.len();
    let m = d + 1;
    let mut a = vec![vec![0.0f64; m]; m];
    let mut b = vec![0.0f64; m];
    for (i, row) in x.iter().enumerate() {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        let mut z = Vec::with_capacity(m);
        z.push(1.0);
        for k in 0..d {
            z.push(row[k] - x0[k]);
        }
        for p in 0..m {
            for q in p..m {
                a[p][q] += wi * z[p] * z[q];
            }
            b[p] += wi * z[p] * y[i];
        }
    }
    for p in 0..m {
        for q in 0..p {
            a[p][q] = a[q][p];
        }
    }

    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if scale <= 0.0 {
        return None;
    }
    // Gaussian elimination with partial pivoting
    for col in 0..m {
        let pivot_row = (col..m)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..m {
            let factor = a[row][col] / a[col][col];
            for k in col..m {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut beta = vec![0.0f64; m];
    for row in (0..m).rev() {
        let mut acc = b[row];
        for k in row + 1..m {
            acc -= a[row][k] * beta[k];
        }
        beta[row] = acc / a[row][row];
    }
    Some(beta[0])
}

fn regress_at(x: &[Vec<f64>], y: &[f64], h0: &[f64], x0: &[f64]) -> Result<f64> {
    let mut scale = 1.0;
    for _ in 0..=SINGULAR_RETRIES {
        let w: Vec<f64> = x
            .iter()
            .map(|row| {
                row.iter()
                    .zip(x0)
                    .zip(h0)
                    .map(|((&xi, &ci), &h)| normal_pdf((xi - ci) / (h * scale)))
                    .product()
            })
            .collect();
        if let Some(beta0) = wls_solve(x, y, &w, x0) {
            return Ok(beta0);
        }
        scale *= 2.0;
    }
    Err(Error::SingularDesign {
        retries: SINGULAR_RETRIES,
    })
}

fn per_coordinate_bandwidths(x: &[Vec<f64>], d: usize) -> Result<Vec<f64>> {
    (0..d)
        .map(|k| {
            let col: Vec<f64> = x.iter().map(|row| row[k]).collect();
            silverman_bandwidth(&col)
        })
        .collect()
}

/// Fit the local linear regression. `bandwidths` overrides the default
/// per-coordinate rule-of-thumb choice. Responses fit with no residual
/// scale at all are flagged as degenerate, since downstream use needs a
/// positive spread.
pub fn local_linear_fit(
    x: &[Vec<f64>],
    y: &[f64],
    bandwidths: Option<&[f64]>,
) -> Result<RegressionFit> {
    let d = validate_rows(x)?;
    if x.len() != y.len() {
        return Err(Error::Config(format!(
            "{} predictor rows for {} responses",
            x.len(),
            y.len()
        )));
    }
    if x.len() < d + 2 {
        return Err(Error::DegenerateSample(format!(
            "need at least {} observations for dimension {d}",
            d + 2
        )));
    }
    let h = match bandwidths {
        Some(h) => {
            if h.len() != d || h.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::Config(format!(
                    "need {d} positive bandwidths, got {h:?}"
                )));
            }
            h.to_vec()
        }
        None => per_coordinate_bandwidths(x, d)?,
    };

    let in_sample = x
        .iter()
        .map(|xi| regress_at(x, y, &h, xi))
        .collect::<Result<Vec<f64>>>()?;
    let residuals: Vec<f64> = y.iter().zip(&in_sample).map(|(yi, fi)| yi - fi).collect();
    let sigma_hat =
        (residuals.iter().map(|r| r * r).sum::<f64>() / (y.len() - 1) as f64).sqrt();

    let mean_y = y.iter().sum::<f64>() / y.len() as f64;
    let sd_y = (y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum::<f64>()
        / (y.len() - 1) as f64)
        .sqrt();
    // relative to the response scale: constant or exactly-linear
    // responses leave only rounding noise behind
    let scale = sd_y.max(mean_y.abs()).max(f64::MIN_POSITIVE);
    if sigma_hat <= 1e-10 * scale {
        return Err(Error::DegenerateSample(
            "regression interpolates the responses exactly; no residual scale".into(),
        ));
    }

    Ok(RegressionFit {
        x: x.to_vec(),
        y: y.to_vec(),
        sigma_hat,
        kernel_bandwidths: h,
        residuals,
    })
}

/// Likelihood weights localized at a query point: the nearer half of the
/// sample (ties broken by index) gets Gaussian kernel weights in the
/// predictor distance, the rest get zero.
#[derive(Debug, Clone)]
pub struct WeightVector {
    weights: Vec<f64>,
    active: Vec<usize>,
}

impl WeightVector {
    /// Normalized weights, one per observation; sums to 1.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Indices carrying nonzero weight, in order of increasing distance.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }
}

pub fn localized_weights(x: &[Vec<f64>], x0: &[f64], h: f64) -> Result<WeightVector> {
    let d = validate_rows(x)?;
    if x0.len() != d {
        return Err(Error::Config("query dimension mismatch".into()));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Config(format!("localization bandwidth {h} invalid")));
    }
    let n = x.len();
    let dist_sq: Vec<f64> = x
        .iter()
        .map(|row| {
            row.iter()
                .zip(x0)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| dist_sq[i].total_cmp(&dist_sq[j]).then(i.cmp(&j)));
    let m = (n + 1) / 2;
    let active: Vec<usize> = order[..m].to_vec();
    let d_min = dist_sq[active[0]];

    let mut weights = vec![0.0f64; n];
    let mut total = 0.0;
    for &i in &active {
        // kernel value relative to the nearest point, so the weights
        // survive normalization even when every distance is large
        let w = (-(dist_sq[i] - d_min) / (2.0 * h * h)).exp();
        weights[i] = w;
        total += w;
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    Ok(WeightVector { weights, active })
}

/// Global localization bandwidth with pointwise adaptation: the harmonic
/// mean of per-coordinate rule-of-thumb bandwidths, divided at each query
/// by the square root of every marginal density estimate there.
#[derive(Debug, Clone)]
pub struct BandwidthPlan {
    h_global: f64,
    columns: Vec<(Vec<f64>, f64)>,
}

pub(crate) fn harmonic_mean(v: &[f64]) -> f64 {
    v.len() as f64 / v.iter().map(|x| 1.0 / x).sum::<f64>()
}

impl BandwidthPlan {
    pub fn new(x: &[Vec<f64>]) -> Result<Self> {
        let d = validate_rows(x)?;
        let h = per_coordinate_bandwidths(x, d)?;
        let columns = (0..d)
            .map(|k| (x.iter().map(|row| row[k]).collect::<Vec<f64>>(), h[k]))
            .collect();
        Ok(BandwidthPlan {
            h_global: harmonic_mean(&h),
            columns,
        })
    }

    #[cfg(test)]
    pub(crate) fn from_parts(h_global: f64, columns: Vec<(Vec<f64>, f64)>) -> Self {
        BandwidthPlan { h_global, columns }
    }

    pub fn h_global(&self) -> f64 {
        self.h_global
    }

    pub fn dimension(&self) -> usize {
        self.columns.len()
    }

    /// Bandwidth at a query: smaller where predictors are dense, larger
    /// in sparse regions; marginal densities are floored to keep it
    /// finite.
    pub fn bandwidth_at(&self, x0: &[f64]) -> Result<f64> {
        if x0.len() != self.columns.len() {
            return Err(Error::Config("query dimension mismatch".into()));
        }
        let mut h = self.h_global;
        for ((col, hk), &c) in self.columns.iter().zip(x0) {
            h /= kde_at(col, *hk, c).max(1e-8).sqrt();
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConditionalConfig {
    pub grid_len: usize,
    /// Fixed warp dimension for every query fit.
    pub j: usize,
    pub basis: BasisKind,
    /// Recorded into outputs; the fit draws nothing.
    pub seed: u64,
}

impl Default for ConditionalConfig {
    fn default() -> Self {
        ConditionalConfig {
            grid_len: 100,
            j: 6,
            basis: BasisKind::Fourier,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConditionalFit {
    pub x0: Vec<f64>,
    /// Local linear regression value at the query.
    pub m_hat: f64,
    /// Shared residual scale of the regression.
    pub sigma_hat: f64,
    /// Localization bandwidth used at this query.
    pub h_local: f64,
    pub bounds: SupportBounds,
    pub weights: WeightVector,
    pub initial: Density,
    pub warped: Density,
    pub warping: Warping,
    pub fit: FitResult,
    pub initial_loglik: f64,
}

impl ConditionalFit {
    /// Conditional density on the response's original scale.
    pub fn pdf_at(&self, y: f64) -> f64 {
        if y < self.bounds.a || y > self.bounds.b {
            return 0.0;
        }
        self.warped.pdf_at(self.bounds.to_unit(y)) / self.bounds.width()
    }
}

/// Fit a conditional density at each query point. Query-level failures
/// are reported in place so one bad location cannot sink the batch;
/// problems with the shared material (support bounds, regression scale)
/// fail the whole call.
pub fn estimate_conditional(
    x: &[Vec<f64>],
    y: &[f64],
    queries: &[Vec<f64>],
    config: &ConditionalConfig,
) -> Result<Vec<Result<ConditionalFit>>> {
    if config.grid_len < 3 {
        return Err(Error::Config(format!(
            "grid length {} too small",
            config.grid_len
        )));
    }
    let d = validate_rows(x)?;
    if x.len() != y.len() {
        return Err(Error::Config(format!(
            "{} predictor rows for {} responses",
            x.len(),
            y.len()
        )));
    }
    if queries.iter().any(|q| q.len() != d) {
        return Err(Error::Config("query dimension mismatch".into()));
    }
    if x.len() < 20 {
        return Err(Error::DegenerateSample(format!(
            "need at least 20 observations, got {}",
            x.len()
        )));
    }

    let bounds = turnbull_bounds(y)?;
    let scaled = ScaledSample::new(y, bounds)?;
    let regression = local_linear_fit(x, y, None)?;
    let plan = BandwidthPlan::new(x)?;
    let grid = Grid::uniform(config.grid_len);
    let basis = Arc::new(BasisSet::new(config.basis, grid.clone(), config.j)?);
    let sigma_unit = regression.sigma_hat / bounds.width();

    let ranges: Vec<(f64, f64)> = (0..d)
        .map(|k| {
            x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), row| {
                (lo.min(row[k]), hi.max(row[k]))
            })
        })
        .collect();

    Ok(queries
        .par_iter()
        .map(|x0| {
            for (k, &(lo, hi)) in ranges.iter().enumerate() {
                if x0[k] < lo || x0[k] > hi {
                    return Err(Error::QueryOutsideRange(format!(
                        "coordinate {k} of {x0:?} outside observed range [{lo}, {hi}]"
                    )));
                }
            }
            let m_hat = regression.m_hat(x0)?;
            let h_local = plan.bandwidth_at(x0)?;
            let weights = localized_weights(x, x0, h_local)?;
            let initial = truncated_normal(grid.clone(), bounds.to_unit(m_hat), sigma_unit)?;
            let obj = Objective::new(
                initial.clone(),
                scaled.values().to_vec(),
                Some(weights.weights().to_vec()),
                basis.clone(),
            )?;
            let initial_loglik = obj.value(&[]);
            let fit = fit_fixed_j(&obj, &vec![0.0; config.j], NmOptions::default())?;
            let warping = gamma_of(&fit.c_hat, &basis)?;
            let warped = warp(&initial, &warping);
            Ok(ConditionalFit {
                x0: x0.clone(),
                m_hat,
                sigma_hat: regression.sigma_hat,
                h_local,
                bounds,
                weights,
                initial,
                warped,
                warping,
                fit,
                initial_loglik,
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn column(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn linear_data_is_fit_exactly() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
        let y: Vec<f64> = xs.iter().map(|&x| 2.0 * x - 1.0 + 0.001 * (x * 37.0).sin()).collect();
        // exactness of the linear part: remove the ripple and any
        // bandwidth must reproduce the line
        let clean: Vec<f64> = xs.iter().map(|&x| 2.0 * x - 1.0).collect();
        for h in [0.05, 0.3, 2.0] {
            let fit_err = {
                let reg = local_linear_fit(&column(&xs), &y, Some(&[h])).unwrap();
                // fitting near-linear data: m̂ tracks the line to the
                // ripple's amplitude
                let m = reg.m_hat(&[0.33]).unwrap();
                (m - (2.0 * 0.33 - 1.0)).abs()
            };
            assert!(fit_err < 0.01, "h={h}: error {fit_err}");
            for q in [0.1, 0.33, 0.5, 0.77] {
                let m = exact_m(&xs, &clean, h, q);
                assert!((m - (2.0 * q - 1.0)).abs() < 1e-8, "h={h} at {q}: {m}");
            }
        }
    }

    fn exact_m(xs: &[f64], clean: &[f64], h: f64, q: f64) -> f64 {
        regress_at(&column(xs), clean, &[h], &[q]).unwrap()
    }

    #[test]
    fn exactly_linear_responses_are_degenerate() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 / 29.0).collect();
        let clean: Vec<f64> = xs.iter().map(|&x| 3.0 * x).collect();
        let err = local_linear_fit(&column(&xs), &clean, None).unwrap_err();
        assert!(matches!(err, Error::DegenerateSample(_)));
    }

    #[test]
    fn constant_responses_are_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y = vec![4.2; 30];
        let err = local_linear_fit(&column(&xs), &y, None).unwrap_err();
        assert!(matches!(err, Error::DegenerateSample(_)));
    }

    #[test]
    fn planar_data_is_fit_exactly_in_two_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0)])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| 1.0 + 2.0 * r[0] - 3.0 * r[1]).collect();
        for q in [vec![0.0, 1.0], vec![0.5, 0.3], vec![-0.4, 1.7]] {
            let m = regress_at(&x, &y, &[0.4, 0.4], &q).unwrap();
            let truth = 1.0 + 2.0 * q[0] - 3.0 * q[1];
            assert!((m - truth).abs() < 1e-8);
        }
    }

    #[test]
    fn smooth_curve_is_tracked() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let xs: Vec<f64> = (0..500).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y: Vec<f64> = xs
            .iter()
            .map(|&x| (2.0 * std::f64::consts::PI * x).sin() + noise.sample(&mut rng))
            .collect();
        let fit = local_linear_fit(&column(&xs), &y, Some(&[0.05])).unwrap();
        let mut worst = 0.0f64;
        for i in 0..33 {
            let q = 0.1 + 0.8 * i as f64 / 32.0;
            let m = fit.m_hat(&[q]).unwrap();
            worst = worst.max((m - (2.0 * std::f64::consts::PI * q).sin()).abs());
        }
        assert!(worst < 0.1, "sup regression error {worst}");
        assert!((fit.sigma_hat - 0.1).abs() < 0.05);
    }

    #[test]
    fn default_bandwidths_follow_the_rule_of_thumb() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let xs: Vec<f64> = (0..100).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y: Vec<f64> = xs.iter().map(|&x| x + rng.gen_range(-0.1..0.1)).collect();
        let fit = local_linear_fit(&column(&xs), &y, None).unwrap();
        let expected = silverman_bandwidth(&xs).unwrap();
        assert_eq!(fit.kernel_bandwidths, vec![expected]);
    }

    #[test]
    fn collinear_predictors_are_rejected() {
        let xs: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let t = i as f64 / 29.0;
                vec![t, 2.0 * t]
            })
            .collect();
        let y: Vec<f64> = xs.iter().map(|r| r[0] + 1.0).collect();
        let err = local_linear_fit(&xs, &y, None).unwrap_err();
        assert!(matches!(err, Error::SingularDesign { retries: 5 }));
    }

    #[test]
    fn constant_predictor_is_rejected() {
        let xs = column(&[2.0; 20]);
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert!(local_linear_fit(&xs, &y, None).is_err());
    }

    #[test]
    fn localization_weights_match_hand_computation() {
        let x = column(&[0.0, 1.0, 2.0, 3.0]);
        let w = localized_weights(&x, &[0.0], 1.0).unwrap();
        assert_eq!(w.active(), &[0, 1]);
        assert!((w.weights()[0] - 0.6225).abs() < 1e-3);
        assert!((w.weights()[1] - 0.3775).abs() < 1e-3);
        assert_eq!(w.weights()[2], 0.0);
        assert_eq!(w.weights()[3], 0.0);
        assert!((w.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equidistant_active_points_share_weight_equally() {
        let x = vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
            vec![5.0, 5.0],
            vec![6.0, 6.0],
            vec![7.0, 7.0],
            vec![8.0, 8.0],
        ];
        let w = localized_weights(&x, &[0.0, 0.0], 0.7).unwrap();
        assert_eq!(w.active(), &[0, 1, 2, 3]);
        for &i in w.active() {
            assert!((w.weights()[i] - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_do_not_increase_with_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let xs: Vec<f64> = (0..41).map(|_| rng.gen_range(0.0..4.0)).collect();
        let x = column(&xs);
        let w = localized_weights(&x, &[1.7], 0.3).unwrap();
        let active = w.active();
        for pair in active.windows(2) {
            assert!(w.weights()[pair[0]] >= w.weights()[pair[1]]);
        }
        assert_eq!(active.len(), 21);
    }

    #[test]
    fn distance_ties_break_by_index() {
        let x = column(&[0.0, 1.0, 1.0, 2.0, 5.0]);
        let w = localized_weights(&x, &[1.0], 0.5).unwrap();
        // three slots; both exact hits enter first, then index 0 beats
        // index 3 on the tie at distance 1
        assert_eq!(w.active(), &[1, 2, 0]);
        assert_eq!(w.weights()[3], 0.0);
        assert_eq!(w.weights()[4], 0.0);
    }

    #[test]
    fn weights_vary_smoothly_with_the_query() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..1.0)).collect();
        let x = column(&xs);
        let a = localized_weights(&x, &[0.437], 0.2).unwrap();
        let b = localized_weights(&x, &[0.437 + 1e-9], 0.2).unwrap();
        let drift = a
            .weights()
            .iter()
            .zip(b.weights())
            .fold(0.0f64, |acc, (p, q)| acc.max((p - q).abs()));
        assert!(drift < 1e-6, "weight drift {drift}");
    }

    #[test]
    fn harmonic_mean_of_one_and_three() {
        assert!((harmonic_mean(&[1.0, 3.0]) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn local_bandwidth_divides_by_root_density() {
        // both marginals evaluate to exactly 4 at the query
        let h = normal_pdf(0.0) / 4.0;
        let plan = BandwidthPlan::from_parts(
            2.0,
            vec![(vec![0.0, 0.0], h), (vec![1.0, 1.0], h)],
        );
        let local = plan.bandwidth_at(&[0.0, 1.0]).unwrap();
        assert!((local - 2.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn unit_marginal_density_leaves_bandwidth_global() {
        let h = normal_pdf(0.0);
        let plan = BandwidthPlan::from_parts(0.8, vec![(vec![0.5, 0.5], h)]);
        // single coordinate, marginal exactly 1 at the query
        let local = plan.bandwidth_at(&[0.5]).unwrap();
        assert!((local - 0.8).abs() < 1e-12);
    }

    #[test]
    fn doubling_global_bandwidth_doubles_every_local_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let x: Vec<Vec<f64>> = (0..80)
            .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(-2.0..2.0)])
            .collect();
        let plan = BandwidthPlan::new(&x).unwrap();
        let doubled = BandwidthPlan::from_parts(
            2.0 * plan.h_global(),
            x[0].iter()
                .enumerate()
                .map(|(k, _)| {
                    let col: Vec<f64> = x.iter().map(|row| row[k]).collect();
                    let h = silverman_bandwidth(&col).unwrap();
                    (col, h)
                })
                .collect(),
        );
        for q in [[0.3, 0.0], [0.7, -1.0], [0.5, 1.5]] {
            let a = plan.bandwidth_at(&q).unwrap();
            let b = doubled.bandwidth_at(&q).unwrap();
            assert!((b - 2.0 * a).abs() < 1e-12);
        }
    }

    #[test]
    fn sparse_regions_get_wider_bandwidths() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xs: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..1.0)).collect();
        let plan = BandwidthPlan::new(&column(&xs)).unwrap();
        let dense = plan.bandwidth_at(&[0.5]).unwrap();
        let sparse = plan.bandwidth_at(&[30.0]).unwrap();
        assert!(sparse > dense);
        // far away the marginal hits its floor
        assert!((sparse - plan.h_global() / 1e-8f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn conditional_fits_track_a_linear_gaussian_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let xs: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y: Vec<f64> = xs
            .iter()
            .map(|&x| 2.0 * x - 1.0 + noise.sample(&mut rng))
            .collect();
        let queries = column(&[0.25, 0.5, 0.75]);
        let fits = estimate_conditional(
            &column(&xs),
            &y,
            &queries,
            &ConditionalConfig::default(),
        )
        .unwrap();
        assert_eq!(fits.len(), 3);
        for (q, fit) in queries.iter().zip(fits) {
            let fit = fit.unwrap();
            assert!((fit.m_hat - (2.0 * q[0] - 1.0)).abs() < 0.2);
            assert!(fit.fit.loglik >= fit.initial_loglik - 1e-12);
            // unit mass on the original scale
            let (lo, hi) = (fit.bounds.a, fit.bounds.b);
            let m = 2000;
            let step = (hi - lo) / m as f64;
            let mut mass = 0.0;
            for i in 0..=m {
                let v = fit.pdf_at(lo + step * i as f64);
                mass += if i == 0 || i == m { 0.5 * v } else { v };
            }
            assert!((mass * step - 1.0).abs() < 1e-3);
            assert_eq!(fit.weights.weights().len(), 200);
        }
    }

    #[test]
    fn queries_outside_the_predictor_range_fail_individually() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let xs: Vec<f64> = (0..60).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y: Vec<f64> = xs
            .iter()
            .map(|&x| x + noise.sample(&mut rng))
            .collect();
        let queries = vec![vec![0.5], vec![50.0]];
        let fits = estimate_conditional(
            &column(&xs),
            &y,
            &queries,
            &ConditionalConfig::default(),
        )
        .unwrap();
        fits[0].as_ref().unwrap();
        assert!(matches!(fits[1], Err(Error::QueryOutsideRange(_))));
    }

    #[test]
    fn shape_and_size_preconditions() {
        let x = column(&[0.1, 0.4, 0.9]);
        let y = vec![0.0, 1.0];
        assert!(estimate_conditional(&x, &y, &[vec![0.5]], &ConditionalConfig::default()).is_err());
        let y3 = vec![0.0, 1.0, 2.0];
        assert!(
            estimate_conditional(&x, &y3, &[vec![0.5, 0.5]], &ConditionalConfig::default())
                .is_err()
        );
        // consistent shapes but too few observations
        assert!(
            estimate_conditional(&x, &y3, &[vec![0.5]], &ConditionalConfig::default()).is_err()
        );
    }
}
