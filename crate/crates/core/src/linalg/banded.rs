//! Banded direct solvers for the finite-difference systems.
//!
//! Five-point stencils on an `n × n` grid with row-major numbering have
//! half-bandwidth `n`, so banded factorizations cost `O(N n²)` with
//! `N = n²` unknowns, which is all the desk-scale problems need.

use crate::error::{Error, Result};

/// Symmetric band matrix, lower triangle stored row by row.
#[derive(Debug, Clone)]
pub struct SymBandMatrix {
    dim: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBandMatrix {
    pub fn zeros(dim: usize, bw: usize) -> Self {
        Self { dim, bw, data: vec![0.0; dim * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` to entry `(i, j)` (and implicitly `(j, i)`).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for i in 0..self.dim {
            let lo = i.saturating_sub(self.bw);
            for j in lo..i {
                let a = self.data[self.slot(i, j)];
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += self.data[self.slot(i, i)] * x[i];
        }
        y
    }

    /// Cholesky factorization `A = L Lᵀ`. Fails on the first non-positive
    /// pivot, reporting it together with the smallest pivot seen so far.
    pub fn cholesky(mut self) -> Result<BandCholesky> {
        let (n, bw) = (self.dim, self.bw);
        let mut smallest = f64::INFINITY;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(bw));
                let mut s = self.data[self.slot(i, j)];
                let ri = i * (bw + 1) + bw - i;
                let rj = j * (bw + 1) + bw - j;
                for k in klo..j {
                    s -= self.data[ri + k] * self.data[rj + k];
                }
                if i == j {
                    smallest = smallest.min(s);
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s, smallest });
                    }
                    self.data[ri + i] = s.sqrt();
                } else {
                    self.data[ri + j] = s / self.data[rj + j];
                }
            }
        }
        Ok(BandCholesky { factor: self, smallest_pivot: smallest })
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    factor: SymBandMatrix,
    smallest_pivot: f64,
}

impl BandCholesky {
    pub fn dim(&self) -> usize {
        self.factor.dim
    }

    pub fn smallest_pivot(&self) -> f64 {
        self.smallest_pivot
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let l = &self.factor;
        let (n, bw) = (l.dim, l.bw);
        for i in 0..n {
            let ri = i * (bw + 1) + bw - i;
            let lo = i.saturating_sub(bw);
            let mut s = x[i];
            for k in lo..i {
                s -= l.data[ri + k] * x[k];
            }
            x[i] = s / l.data[ri + i];
        }
        for i in (0..n).rev() {
            let ri = i * (bw + 1) + bw - i;
            x[i] /= l.data[ri + i];
            let xi = x[i];
            let lo = i.saturating_sub(bw);
            for k in lo..i {
                x[k] -= l.data[ri + k] * xi;
            }
        }
    }
}

/// General band matrix with `kl` sub- and `ku` super-diagonals, with room
/// for the `kl` extra super-diagonals produced by partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    dim: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(dim: usize, kl: usize, ku: usize) -> Self {
        Self { dim, kl, ku, data: vec![0.0; dim * Self::width(kl, ku)] }
    }

    fn width(kl: usize, ku: usize) -> usize {
        2 * kl + ku + 1
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * Self::width(self.kl, self.ku) + (j + self.kl - i)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside the band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.dim - 1);
                (lo..=hi).map(|j| self.data[self.slot(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// LU factorization with partial pivoting.
    pub fn lu(mut self) -> Result<BandLu> {
        let (n, kl) = (self.dim, self.kl);
        let reach = self.kl + self.ku;
        let mut pivots = Vec::with_capacity(n);
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > scale * f64::EPSILON * 1e-3) || !best.is_finite() {
                return Err(Error::Singular { row: k, pivot: best });
            }
            pivots.push(p);
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(k, k)];
            for i in k + 1..=last_row {
                let sik = self.slot(i, k);
                let l = self.data[sik] / pivot;
                self.data[sik] = l;
                if l == 0.0 {
                    continue;
                }
                let rk = self.slot(k, k) - k;
                let ri = self.slot(i, k) - k;
                for j in k + 1..=last_col {
                    self.data[ri + j] -= l * self.data[rk + j];
                }
            }
        }
        Ok(BandLu { lu: self, pivots })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    lu: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = &self.lu;
        let n = m.dim;
        let reach = m.kl + m.ku;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + m.kl).min(n - 1) {
                    x[i] -= m.data[m.slot(i, k)] * xk;
                }
            }
        }
        for i in (0..n).rev() {
            let ri = m.slot(i, i) - i;
            let mut s = x[i];
            for j in i + 1..=(i + reach).min(n - 1) {
                s -= m.data[ri + j] * x[j];
            }
            x[i] = s / m.data[ri + i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(a: Vec<Vec<f64>>, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
        let x = m.lu().solve(&nalgebra::DVector::from_column_slice(b)).unwrap();
        x.iter().copied().collect()
    }

    #[test]
    fn band_cholesky_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, bw) = (40, 5);
        let mut a = SymBandMatrix::zeros(n, bw);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(bw)..i {
                let v: f64 = rng.random_range(-1.0..1.0);
                a.add(i, j, v);
                dense[i][j] += v;
                dense[j][i] += v;
            }
            a.add(i, i, 12.0);
            dense[i][i] += 12.0;
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let y = a.matvec(&b);
        let y_dense: Vec<f64> = dense.iter().map(|r| r.iter().zip(&b).map(|(p, q)| p * q).sum()).collect();
        for (p, q) in y.iter().zip(&y_dense) {
            assert!((p - q).abs() < 1e-12);
        }
        let x = a.cholesky().unwrap().solve(&b);
        let x_dense = dense_solve(dense, &b);
        for (p, q) in x.iter().zip(&x_dense) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn band_cholesky_reports_indefinite_pivot() {
        let mut a = SymBandMatrix::zeros(3, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, -2.0);
        a.add(2, 2, 1.0);
        match a.cholesky() {
            Err(Error::NotPositiveDefinite { row, pivot, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(pivot, -2.0);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn band_lu_matches_dense_with_pivoting() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, kl, ku) = (30, 3, 2);
        let mut a = BandMatrix::zeros(n, kl, ku);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // small diagonal forces row exchanges
                let v: f64 = if i == j { 1e-3 } else { rng.random_range(-1.0..1.0) };
                a.add(i, j, v);
                dense[i][j] += v;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let x = a.clone().lu().unwrap().solve(&b);
        let r = a.matvec(&x);
        for (p, q) in r.iter().zip(&b) {
            assert!((p - q).abs() < 1e-9 * q.abs().max(1.0), "{p} vs {q}");
        }
        let x_dense = dense_solve(dense, &b);
        for (p, q) in x.iter().zip(&x_dense) {
            assert!((p - q).abs() < 1e-8 * q.abs().max(1.0));
        }
    }

    #[test]
    fn band_lu_detects_singular() {
        let mut a = BandMatrix::zeros(2, 1, 1);
        a.add(0, 0, 1.0);
        a.add(0, 1, 2.0);
        a.add(1, 0, 2.0);
        a.add(1, 1, 4.0);
        assert!(matches!(a.lu(), Err(Error::Singular { .. })));
    }
}
