//! End-to-end pipeline for a plain sample: estimate the support, rescale
//! to the unit interval, fit an initial density, then improve it by a
//! maximum-likelihood warp.

use std::sync::Arc;

use crate::basis::{BasisKind, BasisSet};
use crate::density::{
    kde_fit, truncated_normal_fit, warp, Density, ScaledSample, SupportBounds,
};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::optimize::{fit_fixed_j, fit_multiresolution, FitResult, NmOptions, Objective};
use crate::sphere::{gamma_of, Warping};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    Kde,
    TruncatedNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitPlan {
    /// One likelihood fit at a fixed basis dimension.
    Fixed { j: usize },
    /// Dimension ladder step, 2·step, …, j_max scored by AIC.
    MultiResolution { j_max: usize, step: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct EstimateConfig {
    pub grid_len: usize,
    pub initial: InitialKind,
    pub basis: BasisKind,
    pub plan: FitPlan,
    /// Recorded into outputs for reproducibility; the fit itself is
    /// deterministic and draws nothing.
    pub seed: u64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            grid_len: 100,
            initial: InitialKind::Kde,
            basis: BasisKind::Fourier,
            plan: FitPlan::MultiResolution { j_max: 40, step: 2 },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DensityEstimate {
    pub bounds: SupportBounds,
    pub scaled: ScaledSample,
    pub initial: Density,
    pub warped: Density,
    pub warping: Warping,
    pub fit: FitResult,
    /// Log-likelihood of the initial estimate (identity warp); the fitted
    /// value can never fall below this.
    pub initial_loglik: f64,
    pub config: EstimateConfig,
}

impl DensityEstimate {
    /// The fitted density on the original scale: zero outside the estimated
    /// support, otherwise the unit-scale estimate with the affine Jacobian.
    pub fn pdf_at(&self, x: f64) -> f64 {
        let b = self.bounds;
        if x < b.a || x > b.b {
            return 0.0;
        }
        self.warped.pdf_at(b.to_unit(x)) / b.width()
    }
}

pub fn estimate_density(x: &[f64], config: &EstimateConfig) -> Result<DensityEstimate> {
    if config.grid_len < 3 {
        return Err(Error::Config(format!(
            "grid length {} too small",
            config.grid_len
        )));
    }
    let scaled = ScaledSample::from_data(x)?;
    let grid = Grid::uniform(config.grid_len);
    let initial = match config.initial {
        InitialKind::Kde => kde_fit(&scaled, grid.clone(), None)?,
        InitialKind::TruncatedNormal => truncated_normal_fit(&scaled, grid.clone())?,
    };

    let basis_len = match config.plan {
        FitPlan::Fixed { j } => j,
        FitPlan::MultiResolution { j_max, .. } => j_max,
    };
    let basis = Arc::new(BasisSet::new(config.basis, grid, basis_len)?);
    let obj = Objective::new(initial.clone(), scaled.values().to_vec(), None, basis.clone())?;
    let initial_loglik = obj.value(&[]);
    let fit = match config.plan {
        FitPlan::Fixed { j } => fit_fixed_j(&obj, &vec![0.0; j], NmOptions::default())?,
        FitPlan::MultiResolution { j_max, step } => {
            fit_multiresolution(&obj, j_max, step, NmOptions::default())?
        }
    };
    let warping = gamma_of(&fit.c_hat, &basis)?;
    let warped = warp(&initial, &warping);

    Ok(DensityEstimate {
        bounds: scaled.bounds(),
        scaled,
        initial,
        warped,
        warping,
        fit,
        initial_loglik,
        config: *config,
    })
}

/// The fitted density evaluated at each point of `xs` on the original scale.
pub fn evaluate_estimate(est: &DensityEstimate, xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| est.pdf_at(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::invert_cdf;
    use crate::density::truncated_normal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tn_sample(n: usize, seed: u64) -> Vec<f64> {
        let f = truncated_normal(Grid::uniform(200), 0.5, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| invert_cdf(f.cdf(), rng.gen_range(0.0..1.0)).unwrap())
            .collect()
    }

    #[test]
    fn matched_family_keeps_warp_near_identity() {
        let x = tn_sample(500, 2);
        let config = EstimateConfig {
            initial: InitialKind::TruncatedNormal,
            plan: FitPlan::Fixed { j: 6 },
            ..EstimateConfig::default()
        };
        let est = estimate_density(&x, &config).unwrap();
        let l1 = est
            .warped
            .pdf()
            .values()
            .iter()
            .zip(est.initial.pdf().values())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * est.warped.grid().step();
        assert!(l1 < 0.1, "warp moved a matched initial by L1 {l1}");
    }

    #[test]
    fn fitted_loglik_never_below_initial() {
        let x = tn_sample(300, 9);
        for plan in [
            FitPlan::Fixed { j: 4 },
            FitPlan::MultiResolution { j_max: 8, step: 2 },
        ] {
            let config = EstimateConfig {
                plan,
                ..EstimateConfig::default()
            };
            let est = estimate_density(&x, &config).unwrap();
            assert!(est.fit.loglik >= est.initial_loglik - 1e-12);
        }
    }

    #[test]
    fn evaluate_is_zero_outside_support_and_integrates_to_one() {
        let x = tn_sample(200, 5);
        let config = EstimateConfig {
            plan: FitPlan::Fixed { j: 4 },
            ..EstimateConfig::default()
        };
        let est = estimate_density(&x, &config).unwrap();
        assert_eq!(est.pdf_at(est.bounds.a - 1e-9), 0.0);
        assert_eq!(est.pdf_at(est.bounds.b + 1e-9), 0.0);
        assert_eq!(est.pdf_at(-100.0), 0.0);

        // trapezoid over a fine grid spanning beyond the support
        let lo = est.bounds.a - 0.1;
        let hi = est.bounds.b + 0.1;
        let m = 4000;
        let h = (hi - lo) / m as f64;
        let mut mass = 0.0;
        for i in 0..=m {
            let xi = lo + h * i as f64;
            let v = est.pdf_at(xi);
            mass += if i == 0 || i == m { 0.5 * v } else { v };
        }
        mass *= h;
        assert!((mass - 1.0).abs() < 1e-3, "total mass {mass}");
    }

    #[test]
    fn affine_equivariance() {
        let x = tn_sample(200, 13);
        let (a, b) = (2.0, 3.0);
        let moved: Vec<f64> = x.iter().map(|&v| a * v + b).collect();
        let config = EstimateConfig {
            initial: InitialKind::TruncatedNormal,
            plan: FitPlan::Fixed { j: 4 },
            ..EstimateConfig::default()
        };
        let base = estimate_density(&x, &config).unwrap();
        let scaled = estimate_density(&moved, &config).unwrap();
        let xs: Vec<f64> = (0..200)
            .map(|i| base.bounds.a + (base.bounds.b - base.bounds.a) * i as f64 / 199.0)
            .collect();
        let moved_xs: Vec<f64> = xs.iter().map(|&xi| a * xi + b).collect();
        let lhs = evaluate_estimate(&scaled, &moved_xs);
        let rhs = evaluate_estimate(&base, &xs);
        for i in 0..xs.len() {
            let (l, r) = (lhs[i], rhs[i] / a);
            assert!((l - r).abs() < 1e-6, "at {}: {l} vs {r}", xs[i]);
        }
    }

    #[test]
    fn kde_initial_also_runs() {
        let x = tn_sample(150, 4);
        let est = estimate_density(
            &x,
            &EstimateConfig {
                plan: FitPlan::Fixed { j: 2 },
                ..EstimateConfig::default()
            },
        )
        .unwrap();
        assert_eq!(est.fit.j_used, 2);
        assert!((est.warped.pdf().integral() - 1.0).abs() < 1e-9);
        assert!(est.scaled.values().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn config_is_validated() {
        let x = tn_sample(50, 1);
        assert!(estimate_density(
            &x,
            &EstimateConfig {
                grid_len: 2,
                ..EstimateConfig::default()
            }
        )
        .is_err());
        assert!(estimate_density(
            &x,
            &EstimateConfig {
                plan: FitPlan::Fixed { j: 0 },
                ..EstimateConfig::default()
            }
        )
        .is_err());
        assert!(estimate_density(&[1.0], &EstimateConfig::default()).is_err());
    }

    #[test]
    fn bounds_cover_the_sample() {
        let x = tn_sample(100, 7);
        let est = estimate_density(
            &x,
            &EstimateConfig {
                plan: FitPlan::Fixed { j: 2 },
                ..EstimateConfig::default()
            },
        )
        .unwrap();
        let (lo, hi) = x
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                (l.min(v), h.max(v))
            });
        assert!(est.bounds.a < lo && est.bounds.b > hi);
    }
}
