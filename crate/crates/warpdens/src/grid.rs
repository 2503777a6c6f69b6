//! Uniform grids on [0,1] and the discrete calculus shared by every other
//! module: trapezoid quadrature, cumulative integrals, first-order
//! differences, linear interpolation, and quantile (inverse-CDF) lookup.
//!
//! Everything downstream assumes these exact conventions, so the invariants
//! here are deliberately strict: a `Grid` is always uniform on [0,1]
//! inclusive, and a `GridFunction` always has one finite value per node.

use std::sync::Arc;

use crate::error::{Error, Result};

/// `len` equidistant points spanning [0,1] inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    step: f64,
}

impl Grid {
    /// Uniform grid with `len >= 3` points; endpoints are exactly 0 and 1.
    pub fn uniform(len: usize) -> Arc<Self> {
        assert!(len >= 3, "grid needs at least 3 points, got {len}");
        let denom = (len - 1) as f64;
        let points = (0..len).map(|i| i as f64 / denom).collect();
        Arc::new(Grid {
            points,
            step: 1.0 / denom,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

/// A function sampled on a grid: one value per node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridFunction(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::GridFunction(format!("non-finite value {v}")));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        GridFunction::new(grid, values)
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Self {
        let values = vec![value; grid.len()];
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Composite trapezoid value of the integral over [0,1].
    pub fn integral(&self) -> f64 {
        trapezoid(self.grid.step(), &self.values)
    }

    /// Running trapezoid integral; starts at exactly 0.
    pub fn cumulative(&self) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: cumulative_trapezoid(self.grid.step(), &self.values),
        }
    }

    /// First-order difference quotient. The last node replicates the
    /// preceding difference so the output has the same length.
    pub fn derivative(&self) -> GridFunction {
        let h = self.grid.step();
        let n = self.values.len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n - 1 {
            out.push((self.values[i + 1] - self.values[i]) / h);
        }
        out.push(out[n - 2]);
        GridFunction {
            grid: self.grid.clone(),
            values: out,
        }
    }

    /// Piecewise-linear interpolation at `x`; exact at the nodes.
    /// `x` must lie in [0,1].
    pub fn at(&self, x: f64) -> f64 {
        interpolate(self.grid.step(), &self.values, x)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

pub(crate) fn trapezoid(step: f64, values: &[f64]) -> f64 {
    debug_assert!(values.len() >= 2);
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    step * (interior + 0.5 * (values[0] + values[values.len() - 1]))
}

pub(crate) fn cumulative_trapezoid(step: f64, values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    out.push(0.0);
    let mut acc = 0.0;
    for i in 1..values.len() {
        acc += 0.5 * step * (values[i - 1] + values[i]);
        out.push(acc);
    }
    out
}

pub(crate) fn interpolate(step: f64, values: &[f64], x: f64) -> f64 {
    assert!(
        (-1e-9..=1.0 + 1e-9).contains(&x),
        "interpolation point {x} outside [0,1]"
    );
    let x = x.clamp(0.0, 1.0);
    let pos = x / step;
    let i = (pos.floor() as usize).min(values.len() - 2);
    let frac = pos - i as f64;
    values[i] + frac * (values[i + 1] - values[i])
}

/// Quantile lookup on a discretized cumulative function.
///
/// `f` must be nondecreasing with F(0)=0 and F(1)=1. Returns the x with
/// linearly interpolated F(x) = u; across a flat segment at height u the
/// left endpoint of the segment is returned.
pub fn invert_cdf(f: &GridFunction, u: f64) -> Result<f64> {
    let vals = f.values();
    let pts = f.grid().points();
    if !(-1e-12..=1.0 + 1e-12).contains(&u) {
        return Err(Error::InvalidCdf(format!("quantile level {u} outside [0,1]")));
    }
    let u = u.clamp(0.0, 1.0);
    if vals[0].abs() > 1e-8 {
        return Err(Error::InvalidCdf(format!("F(0) = {} != 0", vals[0])));
    }
    if (vals[vals.len() - 1] - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidCdf(format!(
            "F(1) = {} != 1",
            vals[vals.len() - 1]
        )));
    }
    if vals.windows(2).any(|w| w[1] < w[0] - 1e-12) {
        return Err(Error::InvalidCdf("not nondecreasing".into()));
    }

    // First index with F[j] >= u; j-1 then satisfies F[j-1] < u, so the
    // bracketing increment is strictly positive and interpolation is safe.
    let j = vals.partition_point(|&v| v < u);
    if j == 0 {
        return Ok(pts[0]);
    }
    if j == vals.len() {
        return Ok(pts[pts.len() - 1]);
    }
    let d = vals[j] - vals[j - 1];
    if d <= 0.0 {
        return Ok(pts[j]);
    }
    Ok(pts[j - 1] + (pts[j] - pts[j - 1]) * (u - vals[j - 1]) / d)
}
