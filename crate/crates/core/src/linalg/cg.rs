use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Achieved `‖b − Ax‖ / ‖b‖` in the supplied inner product.
    pub relative_residual: f64,
}

/// Conjugate gradients for `A x = b` with `A` self-adjoint and positive
/// definite with respect to `inner`. Starts from `x = 0`.
pub fn conjugate_gradient<A, I>(
    mut apply: A,
    inner: I,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgSolution>
where
    A: FnMut(&[f64]) -> Result<Vec<f64>>,
    I: Fn(&[f64], &[f64]) -> f64,
{
    let n = b.len();
    let b_norm = inner(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgSolution { x, iterations: 0, relative_residual: 0.0 });
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = inner(&r, &r);
    for it in 1..=max_iter {
        let ap = apply(&p)?;
        let pap = inner(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::KrylovNotConverged { iterations: it, residual: rr.sqrt() / b_norm });
        }
        let step = rr / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rr_new = inner(&r, &r);
        let rel = rr_new.sqrt() / b_norm;
        if rel <= tol {
            return Ok(CgSolution { x, iterations: it, relative_residual: rel });
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::KrylovNotConverged { iterations: max_iter, residual: rr.sqrt() / b_norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclid(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn solves_small_spd() {
        // tridiagonal [-1 4 -1]
        let apply = |v: &[f64]| -> Result<Vec<f64>> {
            let n = v.len();
            Ok((0..n)
                .map(|i| {
                    let l = if i > 0 { v[i - 1] } else { 0.0 };
                    let r = if i + 1 < n { v[i + 1] } else { 0.0 };
                    4.0 * v[i] - l - r
                })
                .collect())
        };
        let b = vec![1.0; 20];
        let sol = conjugate_gradient(apply, euclid, &b, 1e-12, 100).unwrap();
        let ax = apply(&sol.x).unwrap();
        for (p, q) in ax.iter().zip(&b) {
            assert!((p - q).abs() < 1e-10);
        }
        assert!(sol.relative_residual <= 1e-12);
    }

    #[test]
    fn reports_non_convergence_with_residual() {
        let apply = |v: &[f64]| -> Result<Vec<f64>> {
            Ok(v.iter().enumerate().map(|(i, x)| (1.0 + i as f64 * 1e3) * x).collect())
        };
        let b = vec![1.0; 50];
        match conjugate_gradient(apply, euclid, &b, 1e-14, 3) {
            Err(Error::KrylovNotConverged { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_rhs_is_immediate() {
        let sol = conjugate_gradient(|v: &[f64]| Ok(v.to_vec()), euclid, &[0.0; 4], 1e-10, 10).unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.x, vec![0.0; 4]);
    }
}
