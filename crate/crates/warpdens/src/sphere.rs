//! The warping group and its sphere geometry.
//!
//! A warping γ is an increasing diffeomorphism of [0,1] fixing the
//! endpoints. Its square-root slope function q = √γ̇ lies on the positive
//! orthant of the unit sphere in L²([0,1]); the exponential map at the
//! constant function 1 flattens a geodesic ball of that orthant onto the
//! zero-mean tangent space, where coefficients are taken in an orthonormal
//! basis. Composing these maps gives the coefficient chart (here
//! `coefficients_of` after `inverse_exp`/`srsf_of`) and its inverse
//! `gamma_of`, a bijection between coefficient vectors of tangent norm
//! < π/4 and a rich family of warpings.
//!
//! All inner products and integrals are discrete trapezoid values on the
//! working grid, matching the conventions in [`crate::grid`]; combined with
//! the discretely-orthonormalized bases this keeps the chart round trip
//! exact to roundoff rather than to quadrature error.

use std::sync::Arc;

use crate::basis::BasisSet;
use crate::density::Density;
use crate::error::{Error, Result};
use crate::grid::{cumulative_trapezoid, invert_cdf, trapezoid, Grid, GridFunction};

/// Radius of the geodesic ball (and of the coefficient region V_π):
/// tangent vectors must have norm strictly below π/4.
pub const BALL_RADIUS: f64 = std::f64::consts::FRAC_PI_4;

/// An increasing diffeomorphism of [0,1] with its derivative, both sampled
/// on a shared grid. `gamma` runs from exactly 0 to exactly 1, `gamma_dot`
/// is strictly positive with unit trapezoid mass.
#[derive(Debug, Clone)]
pub struct Warping {
    gamma: GridFunction,
    gamma_dot: GridFunction,
}

impl Warping {
    pub fn new(gamma: GridFunction, gamma_dot: GridFunction) -> Result<Self> {
        if gamma.grid() != gamma_dot.grid() {
            return Err(Error::GridFunction("gamma and gamma_dot grids differ".into()));
        }
        let g = gamma.values();
        if g[0].abs() > 1e-8 {
            return Err(Error::Density(format!("gamma(0) = {} != 0", g[0])));
        }
        if (g[g.len() - 1] - 1.0).abs() > 1e-8 {
            return Err(Error::Density(format!(
                "gamma(1) = {} != 1",
                g[g.len() - 1]
            )));
        }
        if g.windows(2).any(|w| w[1] < w[0] - 1e-12) {
            return Err(Error::Density("gamma is not nondecreasing".into()));
        }
        if gamma_dot.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::Density("gamma_dot is not strictly positive".into()));
        }
        let mass = gamma_dot.integral();
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::Density(format!("gamma_dot mass {mass} != 1")));
        }
        Ok(Warping { gamma, gamma_dot })
    }

    pub fn identity(grid: Arc<Grid>) -> Self {
        let gamma = GridFunction::new(grid.clone(), grid.points().to_vec()).unwrap();
        let gamma_dot = GridFunction::constant(grid, 1.0);
        Warping { gamma, gamma_dot }
    }

    /// γ = Z⁻¹ ∫₀ᵗ q², γ̇ = Z⁻¹ q² with Z the trapezoid mass of q², so the
    /// endpoint and mass invariants hold exactly despite discretization.
    pub fn from_srsf(q: &Srsf) -> Self {
        let grid = q.values.grid().clone();
        let sq: Vec<f64> = q.values.values().iter().map(|v| v * v).collect();
        let mut gamma = cumulative_trapezoid(grid.step(), &sq);
        let z = gamma[gamma.len() - 1];
        for v in gamma.iter_mut() {
            *v /= z;
        }
        let gamma_dot: Vec<f64> = sq.iter().map(|v| v / z).collect();
        Warping {
            gamma: GridFunction::new(grid.clone(), gamma).unwrap(),
            gamma_dot: GridFunction::new(grid, gamma_dot).unwrap(),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.gamma.grid()
    }

    pub fn gamma(&self) -> &GridFunction {
        &self.gamma
    }

    pub fn gamma_dot(&self) -> &GridFunction {
        &self.gamma_dot
    }

    pub fn gamma_at(&self, t: f64) -> f64 {
        self.gamma.at(t)
    }

    pub fn gamma_dot_at(&self, t: f64) -> f64 {
        self.gamma_dot.at(t)
    }
}

/// Square-root slope function: a strictly positive unit-norm function.
#[derive(Debug, Clone)]
pub struct Srsf {
    values: GridFunction,
}

impl Srsf {
    pub fn new(values: GridFunction) -> Result<Self> {
        if values.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::Density("srsf is not strictly positive".into()));
        }
        let sq: Vec<f64> = values.values().iter().map(|v| v * v).collect();
        let norm = trapezoid(values.grid().step(), &sq);
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::Density(format!("srsf squared mass {norm} != 1")));
        }
        Ok(Srsf { values })
    }

    pub fn values(&self) -> &GridFunction {
        &self.values
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.values.grid()
    }
}

/// Zero-mean tangent vector at the identity, with its L² norm cached.
#[derive(Debug, Clone)]
pub struct TangentVector {
    v: GridFunction,
    norm: f64,
}

impl TangentVector {
    pub fn new(v: GridFunction) -> Result<Self> {
        let mean = v.integral();
        if mean.abs() > 1e-8 {
            return Err(Error::GridFunction(format!(
                "tangent vector has nonzero mean {mean}"
            )));
        }
        let sq: Vec<f64> = v.values().iter().map(|x| x * x).collect();
        let norm = trapezoid(v.grid().step(), &sq).sqrt();
        if norm >= BALL_RADIUS {
            return Err(Error::OutsideBall {
                norm,
                limit: BALL_RADIUS,
            });
        }
        Ok(TangentVector { v, norm })
    }

    pub fn values(&self) -> &GridFunction {
        &self.v
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.v.grid()
    }
}

/// q = √γ̇ pointwise.
pub fn srsf_of(w: &Warping) -> Srsf {
    let values = w.gamma_dot().map(f64::sqrt);
    // gamma_dot is strictly positive with unit mass by the Warping
    // invariants, so this cannot fail
    Srsf::new(values).expect("warping invariants guarantee a valid srsf")
}

/// Inverse exponential map at 1: v = (θ/sin θ)(q − cos θ · 1) with
/// θ = arccos⟨1, q⟩. Errors when θ ≥ π/4 (outside the chart's ball).
pub fn inverse_exp(q: &Srsf) -> Result<TangentVector> {
    let step = q.grid().step();
    let ip = trapezoid(step, q.values().values()).clamp(-1.0, 1.0);
    let theta = ip.acos();
    if theta >= BALL_RADIUS {
        return Err(Error::OutsideBall {
            norm: theta,
            limit: BALL_RADIUS,
        });
    }
    if theta < 1e-12 {
        return TangentVector::new(GridFunction::constant(q.grid().clone(), 0.0));
    }
    let scale = theta / theta.sin();
    let cos = theta.cos();
    let v = q.values().map(|x| scale * (x - cos));
    TangentVector::new(v)
}

/// Exponential map at 1: q = cos(‖v‖)·1 + (sin‖v‖/‖v‖)·v. Errors when the
/// image leaves the positive orthant (q must stay strictly positive).
pub fn exp_map(v: &TangentVector) -> Result<Srsf> {
    if v.norm() < 1e-12 {
        return Srsf::new(GridFunction::constant(v.grid().clone(), 1.0));
    }
    let cos = v.norm().cos();
    let scale = v.norm().sin() / v.norm();
    let q = v.values().map(|x| cos + scale * x);
    Srsf::new(q).map_err(|_| {
        Error::Density("exponential map left the positive orthant (q not strictly positive)".into())
    })
}

/// Coefficient analysis: c_j = ⟨v, b_j⟩.
pub fn coefficients_of(v: &TangentVector, basis: &BasisSet) -> Vec<f64> {
    basis.project(v.values().values())
}

/// Coefficient synthesis: v = Σ c_j b_j, validated against the ball.
pub fn tangent_of(c: &[f64], basis: &BasisSet) -> Result<TangentVector> {
    let v = basis.combine(c);
    TangentVector::new(GridFunction::new(basis.grid().clone(), v)?)
}

/// The chart inverse G: coefficients → warping, via the exponential map and
/// cumulative integration of q².
pub fn gamma_of(c: &[f64], basis: &BasisSet) -> Result<Warping> {
    let v = tangent_of(c, basis)?;
    let q = exp_map(&v)?;
    Ok(Warping::from_srsf(&q))
}

/// The warping carrying f1 to f2: γ = F₁⁻¹ ∘ F₂, with derivative
/// f₂ / (f₁ ∘ γ) renormalized to unit mass.
pub fn transport_warping(f1: &Density, f2: &Density) -> Result<Warping> {
    if f1.grid() != f2.grid() {
        return Err(Error::GridFunction("density grids differ".into()));
    }
    let grid = f1.grid().clone();
    let n = grid.len();
    let mut gamma = Vec::with_capacity(n);
    for i in 0..n {
        gamma.push(invert_cdf(f1.cdf(), f2.cdf().values()[i])?);
    }
    gamma[0] = 0.0;
    gamma[n - 1] = 1.0;
    let mut gamma_dot: Vec<f64> = (0..n)
        .map(|i| f2.pdf().values()[i] / f1.pdf_at(gamma[i]))
        .collect();
    let mass = trapezoid(grid.step(), &gamma_dot);
    for v in gamma_dot.iter_mut() {
        *v /= mass;
    }
    Warping::new(
        GridFunction::new(grid.clone(), gamma)?,
        GridFunction::new(grid, gamma_dot)?,
    )
}

/// Pointwise composition γ₁ ∘ γ₂ with chain-rule derivative, renormalized
/// to restore the unit-mass invariant after interpolation.
pub fn compose(w1: &Warping, w2: &Warping) -> Warping {
    let grid = w2.grid().clone();
    let n = grid.len();
    let mut gamma = Vec::with_capacity(n);
    let mut gamma_dot = Vec::with_capacity(n);
    for i in 0..n {
        let inner = w2.gamma().values()[i];
        gamma.push(w1.gamma_at(inner));
        gamma_dot.push(w1.gamma_dot_at(inner) * w2.gamma_dot().values()[i]);
    }
    gamma[0] = 0.0;
    gamma[n - 1] = 1.0;
    let mass = trapezoid(grid.step(), &gamma_dot);
    for v in gamma_dot.iter_mut() {
        *v /= mass;
    }
    Warping::new(
        GridFunction::new(grid.clone(), gamma).unwrap(),
        GridFunction::new(grid, gamma_dot).unwrap(),
    )
    .expect("composition of valid warpings is valid")
}

/// Group inverse: γ⁻¹ by quantile lookup on γ, derivative 1/(γ̇ ∘ γ⁻¹)
/// renormalized.
pub fn invert(w: &Warping) -> Result<Warping> {
    let grid = w.grid().clone();
    let n = grid.len();
    let mut gamma = Vec::with_capacity(n);
    for &t in grid.points() {
        gamma.push(invert_cdf(w.gamma(), t)?);
    }
    gamma[0] = 0.0;
    gamma[n - 1] = 1.0;
    let mut gamma_dot: Vec<f64> = gamma.iter().map(|&g| 1.0 / w.gamma_dot_at(g)).collect();
    let mass = trapezoid(grid.step(), &gamma_dot);
    for v in gamma_dot.iter_mut() {
        *v /= mass;
    }
    Warping::new(
        GridFunction::new(grid.clone(), gamma)?,
        GridFunction::new(grid, gamma_dot)?,
    )
}

/// Sup distances (|γ₁−γ₂|, |γ̇₁−γ̇₂|) over the grid. For warping pairs whose
/// gamma is the cumulative integral of gamma_dot, the first never exceeds
/// the second.
pub fn check_derivative_bound(a: &Warping, b: &Warping) -> (f64, f64) {
    let sup_gamma = a
        .gamma()
        .values()
        .iter()
        .zip(b.gamma().values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let sup_dot = a
        .gamma_dot()
        .values()
        .iter()
        .zip(b.gamma_dot().values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    (sup_gamma, sup_dot)
}
