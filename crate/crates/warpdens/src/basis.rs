//! Orthonormal bases of the tangent space at the identity warping: smooth
//! functions on [0,1] that are orthogonal to the constant function 1.
//!
//! Orthonormality is enforced in the *discrete* trapezoid inner product of
//! the working grid, not by analytic constants: each raw family is mean-
//! removed and run through modified Gram-Schmidt. This makes the Gram matrix
//! the identity to machine precision at the grid in use, which in turn makes
//! synthesis followed by analysis exact — a property the coefficient chart
//! round trip depends on. The procedure is sequential, so a basis of size J
//! is always a prefix of the basis of size J' > J.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{trapezoid, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Fourier,
    Legendre,
}

/// An orthonormal family b_1..b_J sampled on a shared grid.
#[derive(Debug, Clone)]
pub struct BasisSet {
    kind: BasisKind,
    grid: Arc<Grid>,
    functions: Vec<Vec<f64>>,
}

impl BasisSet {
    /// Interleaved sine/cosine family: √2 sin(2πt), √2 cos(2πt),
    /// √2 sin(4πt), √2 cos(4πt), …
    pub fn fourier(grid: Arc<Grid>, j: usize) -> Result<Self> {
        BasisSet::new(BasisKind::Fourier, grid, j)
    }

    /// Shifted Legendre polynomials P_1..P_J on [0,1] (constant excluded).
    pub fn legendre(grid: Arc<Grid>, j: usize) -> Result<Self> {
        BasisSet::new(BasisKind::Legendre, grid, j)
    }

    pub fn new(kind: BasisKind, grid: Arc<Grid>, j: usize) -> Result<Self> {
        if j == 0 {
            return Err(Error::Config("basis size must be at least 1".into()));
        }
        let raw = match kind {
            BasisKind::Fourier => raw_fourier(&grid, j),
            BasisKind::Legendre => raw_legendre(&grid, j),
        };
        let functions = orthonormalize(&grid, raw)?;
        Ok(BasisSet {
            kind,
            grid,
            functions,
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Number of basis elements J.
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn function(&self, j: usize) -> &[f64] {
        &self.functions[j]
    }

    /// Synthesize Σ c_j b_j. Accepts any prefix length c.len() <= J.
    pub fn combine(&self, c: &[f64]) -> Vec<f64> {
        assert!(
            c.len() <= self.functions.len(),
            "{} coefficients for a basis of {} elements",
            c.len(),
            self.functions.len()
        );
        let mut out = vec![0.0; self.grid.len()];
        for (cj, bj) in c.iter().zip(&self.functions) {
            if *cj == 0.0 {
                continue;
            }
            for (o, b) in out.iter_mut().zip(bj) {
                *o += cj * b;
            }
        }
        out
    }

    /// Analyze: c_j = <v, b_j> in the trapezoid inner product.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.grid.len());
        self.functions
            .iter()
            .map(|b| inner(self.grid.step(), v, b))
            .collect()
    }
}

fn inner(step: f64, a: &[f64], b: &[f64]) -> f64 {
    let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    trapezoid(step, &prod)
}

fn raw_fourier(grid: &Grid, j: usize) -> Vec<Vec<f64>> {
    let root2 = std::f64::consts::SQRT_2;
    (0..j)
        .map(|idx| {
            let k = (idx / 2 + 1) as f64;
            grid.points()
                .iter()
                .map(|&t| {
                    let phase = 2.0 * std::f64::consts::PI * k * t;
                    if idx % 2 == 0 {
                        root2 * phase.sin()
                    } else {
                        root2 * phase.cos()
                    }
                })
                .collect()
        })
        .collect()
}

fn raw_legendre(grid: &Grid, j: usize) -> Vec<Vec<f64>> {
    // Bonnet recurrence in the shifted variable u = 2t - 1.
    let n = grid.len();
    let mut prev = vec![1.0; n];
    let mut cur: Vec<f64> = grid.points().iter().map(|&t| 2.0 * t - 1.0).collect();
    let mut out = Vec::with_capacity(j);
    out.push(cur.clone());
    for deg in 1..j {
        let d = deg as f64;
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let u = 2.0 * grid.points()[i] - 1.0;
                ((2.0 * d + 1.0) * u * cur[i] - d * prev[i]) / (d + 1.0)
            })
            .collect();
        prev = std::mem::take(&mut cur);
        cur = next;
        out.push(cur.clone());
    }
    out
}

fn orthonormalize(grid: &Grid, raw: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let step = grid.step();
    let ones = vec![1.0; grid.len()];
    let mut done: Vec<Vec<f64>> = Vec::with_capacity(raw.len());
    for mut v in raw {
        // remove the component along 1 (||1||^2 = 1 on [0,1])
        let mean = inner(step, &v, &ones);
        for x in v.iter_mut() {
            *x -= mean;
        }
        for b in &done {
            let c = inner(step, &v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
        let norm = inner(step, &v, &v).sqrt();
        if norm < 1e-10 {
            return Err(Error::Config(format!(
                "basis element {} is numerically dependent on its predecessors",
                done.len() + 1
            )));
        }
        for x in v.iter_mut() {
            *x /= norm;
        }
        done.push(v);
    }
    Ok(done)
}
