//! Matérn prior covariance.
//!
//! The covariance operator `(𝒞u)(x) = ∫ c(x, x') u(x') dx'` is discretized by
//! the midpoint rule on the inversion grid, so its nodal matrix is
//! `C_ij = h² c(x_i, x_j)`, plus a small diagonal jitter.

pub mod bessel;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{Grid, ParamField};

pub use bessel::bessel_k;

/// Smoothness values with a supported evaluation path.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Smoothness {
    Integer(u32),
    Half,
    ThreeHalves,
    FiveHalves,
}

fn classify(nu: f64) -> Result<Smoothness> {
    if nu > 0.0 && nu.fract() == 0.0 && nu <= 64.0 {
        Ok(Smoothness::Integer(nu as u32))
    } else if nu == 0.5 {
        Ok(Smoothness::Half)
    } else if nu == 1.5 {
        Ok(Smoothness::ThreeHalves)
    } else if nu == 2.5 {
        Ok(Smoothness::FiveHalves)
    } else {
        Err(Error::UnsupportedSmoothness(nu))
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `c(r) = c0 · 2^(1−ν)/Γ(ν) · K_ν(r/ℓ) · (r/ℓ)^ν`, with `c(0) = c0`.
pub fn matern_kernel(r: f64, c0: f64, nu: f64, ell: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::invalid(format!("distance must be >= 0, got {r}")));
    }
    if !(ell > 0.0) {
        return Err(Error::invalid(format!("length scale must be > 0, got {ell}")));
    }
    let smooth = classify(nu)?;
    if r == 0.0 {
        return Ok(c0);
    }
    let s = r / ell;
    let value = match smooth {
        Smoothness::Half => (-s).exp(),
        Smoothness::ThreeHalves => (1.0 + s) * (-s).exp(),
        Smoothness::FiveHalves => (1.0 + s + s * s / 3.0) * (-s).exp(),
        Smoothness::Integer(n) => {
            if s > 740.0 {
                0.0
            } else {
                // Γ(n) = (n − 1)!
                2f64.powi(1 - n as i32) / factorial(n - 1) * bessel_k(n, s)? * s.powi(n as i32)
            }
        }
    };
    Ok(c0 * value)
}

/// Dense covariance matrix with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct CovarianceOperator {
    matrix: DMatrix<f64>,
    lower: DMatrix<f64>,
    c0: f64,
    nu: f64,
    ell: f64,
    jitter: f64,
}

impl CovarianceOperator {
    /// The identity operator on `dim` unknowns.
    pub fn identity(dim: usize) -> Self {
        let eye = DMatrix::identity(dim, dim);
        Self { matrix: eye.clone(), lower: eye, c0: 1.0, nu: f64::NAN, ell: f64::NAN, jitter: 0.0 }
    }

    /// Wraps an arbitrary symmetric positive definite matrix.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid("covariance matrix must be square"));
        }
        let lower = matrix.clone().cholesky().ok_or(Error::CovarianceFactorization { jitter: 0.0 })?.unpack();
        Ok(Self { matrix, lower, c0: f64::NAN, nu: f64::NAN, ell: f64::NAN, jitter: 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Lower Cholesky factor `L` with `C = L Lᵀ`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(x)).iter().copied().collect()
    }
}

/// Default diagonal jitter, relative to `c0`.
pub const DEFAULT_JITTER: f64 = 1e-10;

/// Assembles `C_ij = h² c(|x_i − x_j|) + δ_ij · jitter · c0` and factors it.
pub fn assemble_covariance(grid: Grid, c0: f64, nu: f64, ell: f64, jitter: f64) -> Result<CovarianceOperator> {
    if !(c0 > 0.0) {
        return Err(Error::invalid(format!("c0 must be > 0, got {c0}")));
    }
    if !(jitter >= 0.0) {
        return Err(Error::invalid("jitter must be >= 0"));
    }
    let n = grid.n();
    let h = grid.spacing();
    let w = grid.cell_area();
    // distances on a uniform grid depend only on the index offsets
    let mut table = vec![0.0; n * n];
    for dj in 0..n {
        for di in 0..n {
            let r = h * ((di * di + dj * dj) as f64).sqrt();
            table[dj * n + di] = w * matern_kernel(r, c0, nu, ell)?;
        }
    }
    let dim = grid.len();
    let mut matrix = DMatrix::<f64>::zeros(dim, dim);
    for b in 0..dim {
        let (ib, jb) = grid.node(b);
        for a in 0..dim {
            let (ia, ja) = grid.node(a);
            matrix[(a, b)] = table[ia.abs_diff(ib) + n * ja.abs_diff(jb)];
        }
        matrix[(b, b)] += jitter * c0;
    }
    let lower = matrix.clone().cholesky().ok_or(Error::CovarianceFactorization { jitter })?.unpack();
    Ok(CovarianceOperator { matrix, lower, c0, nu, ell, jitter })
}

/// `L z` with `C = L Lᵀ` and `z` standard normal from a ChaCha8 stream keyed
/// by `seed`.
pub fn sample_prior(cov: &CovarianceOperator, grid: Grid, seed: u64) -> Result<ParamField> {
    if grid.len() != cov.dim() {
        return Err(Error::DimensionMismatch { expected: cov.dim(), got: grid.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DVector::from_iterator(cov.dim(), (0..cov.dim()).map(|_| StandardNormal.sample(&mut rng)));
    let x = &cov.lower * z;
    ParamField::new(grid, x.iter().copied().collect())
}
