//! Log-permeability identification in `−∇·(e^u ∇p) = f` on `[0, 1]²` with
//! `p = 0` on the boundary, observing `p` at `K` interior points.
//!
//! The flux is discretized with centred differences and face
//! transmissibilities equal to the arithmetic mean of the nodal `e^u`; faces
//! on the boundary use the interior node's value. Sensitivities are those of
//! the discrete system: with `A(u)p = f` and `S = ∂_u[A(u)p]`,
//! `F'[u]h = −P A⁻¹ S h` and `F'[u]*g = −h⁻² Sᵀ A⁻¹ Pᵀ g`, the `h⁻²` coming
//! from the mesh-weighted parameter inner product.

use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};
use crate::gauss_newton::{ForwardModel, Linearization};
use crate::grid::{dot, Grid, ParamField};
use crate::linalg::{BandCholesky, SymBandMatrix};
use crate::observation::ObsVector;

use super::{neighbours, two_bumps};

/// Observation lattice points per side; points sit at `(i, j)/(LATTICE + 1)`.
pub const LATTICE: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DarcyTruth {
    /// Two Gaussian bumps.
    Smooth,
    /// A sinusoidal channel of value 2 on a zero background.
    Channel,
}

/// Channel fixture: `u = 2` where `|y − (0.5 + 0.15 sin(3πx + 0.7))| < 0.1`,
/// else `0`.
pub fn channel(x: f64, y: f64) -> f64 {
    let centre = 0.5 + 0.15 * (3.0 * PI * x + 0.7).sin();
    if (y - centre).abs() < 0.1 {
        2.0
    } else {
        0.0
    }
}

impl DarcyTruth {
    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            DarcyTruth::Smooth => two_bumps(x, y),
            DarcyTruth::Channel => channel(x, y),
        }
    }
}

pub fn truth_field(kind: DarcyTruth, grid: Grid) -> ParamField {
    ParamField::from_fn(grid, |x, y| kind.eval(x, y))
}

/// The regular `14 × 14` lattice of testing points.
pub fn lattice_points() -> Vec<(f64, f64)> {
    let step = 1.0 / (LATTICE as f64 + 1.0);
    (1..=LATTICE)
        .flat_map(|j| (1..=LATTICE).map(move |i| (i as f64 * step, j as f64 * step)))
        .collect()
}

fn permeability(u: &[f64]) -> Result<Vec<f64>> {
    u.iter()
        .enumerate()
        .map(|(k, &v)| {
            let kappa = v.exp();
            if kappa > 0.0 && kappa.is_finite() {
                Ok(kappa)
            } else {
                Err(Error::NonPositiveTransmissibility { node: k, value: v })
            }
        })
        .collect()
}

/// Transmissibility of the face between `a` and `b` (`None` for boundary).
#[inline]
fn face(kappa: &[f64], a: usize, b: Option<usize>) -> f64 {
    match b {
        Some(b) => 0.5 * (kappa[a] + kappa[b]),
        None => kappa[a],
    }
}

fn operator(grid: Grid, kappa: &[f64]) -> SymBandMatrix {
    let n = grid.n();
    let inv_h2 = 1.0 / grid.cell_area();
    let mut a = SymBandMatrix::zeros(grid.len(), n);
    for k in 0..grid.len() {
        let mut diag = 0.0;
        for (side, b) in neighbours(n, k).into_iter().enumerate() {
            let t = face(kappa, k, b) * inv_h2;
            diag += t;
            // each interior face is visited from both ends; add it once
            if let Some(b) = b {
                if side == 1 || side == 3 {
                    a.add(b, k, -t);
                }
            }
        }
        a.add(k, k, diag);
    }
    a
}

/// Solves `A(u) p = f` with zero Dirichlet data.
pub fn solve_darcy(u: &ParamField, f: &[f64]) -> Result<ParamField> {
    let grid = u.grid();
    check_len(grid.len(), f.len())?;
    let kappa = permeability(u.values())?;
    let p = operator(grid, &kappa).cholesky()?.solve(f);
    ParamField::new(grid, p)
}

#[derive(Debug, Clone)]
pub struct DarcyProblem {
    grid: Grid,
    source: Vec<f64>,
    /// Node index of each observation point.
    obs_nodes: Vec<usize>,
}

impl DarcyProblem {
    /// Unit source and the `14 × 14` testing points, snapped to `grid`.
    pub fn new(grid: Grid) -> Self {
        Self::with_points(grid, &lattice_points())
    }

    pub fn with_points(grid: Grid, points: &[(f64, f64)]) -> Self {
        let obs_nodes = points.iter().map(|&(x, y)| grid.nearest(x, y)).collect();
        Self { grid, source: vec![1.0; grid.len()], obs_nodes }
    }

    pub fn obs_nodes(&self) -> &[usize] {
        &self.obs_nodes
    }

    pub fn solve_darcy(&self, u: &ParamField) -> Result<ParamField> {
        solve_darcy(u, &self.source)
    }

    /// `P p`.
    pub fn restrict(&self, p: &[f64]) -> Vec<f64> {
        self.obs_nodes.iter().map(|&k| p[k]).collect()
    }

    /// `Pᵀ g`.
    pub fn extend(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for (&k, &v) in self.obs_nodes.iter().zip(g) {
            out[k] += v;
        }
        out
    }

    pub fn forward(&self, u: &ParamField) -> Result<ObsVector> {
        ObsVector::new(self.restrict(self.solve_darcy(u)?.values()))
    }
}

/// Nonzeros of `S = ∂_u[A(u)p]` in row `a`: the diagonal and the four
/// neighbour columns (zero for boundary faces).
#[derive(Debug, Clone)]
struct Sensitivity {
    n: usize,
    diag: Vec<f64>,
    off: Vec<[f64; 4]>,
}

impl Sensitivity {
    fn new(grid: Grid, kappa: &[f64], p: &[f64]) -> Self {
        let n = grid.n();
        let inv_h2 = 1.0 / grid.cell_area();
        let mut diag = vec![0.0; grid.len()];
        let mut off = vec![[0.0; 4]; grid.len()];
        for a in 0..grid.len() {
            for (side, b) in neighbours(n, a).into_iter().enumerate() {
                match b {
                    Some(b) => {
                        let flux = (p[a] - p[b]) * inv_h2;
                        diag[a] += 0.5 * kappa[a] * flux;
                        off[a][side] = 0.5 * kappa[b] * flux;
                    }
                    None => diag[a] += kappa[a] * p[a] * inv_h2,
                }
            }
        }
        Self { n, diag, off }
    }

    fn apply(&self, h: &[f64]) -> Vec<f64> {
        (0..h.len())
            .map(|a| {
                let mut acc = self.diag[a] * h[a];
                for (side, b) in neighbours(self.n, a).into_iter().enumerate() {
                    if let Some(b) = b {
                        acc += self.off[a][side] * h[b];
                    }
                }
                acc
            })
            .collect()
    }

    fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.diag.iter().zip(g).map(|(d, v)| d * v).collect();
        for a in 0..g.len() {
            for (side, b) in neighbours(self.n, a).into_iter().enumerate() {
                if let Some(b) = b {
                    out[b] += self.off[a][side] * g[a];
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct DarcyLin {
    chol: BandCholesky,
    sens: Sensitivity,
    state: Vec<f64>,
    value: Vec<f64>,
    obs_nodes: Vec<usize>,
    inv_h2: f64,
}

impl DarcyLin {
    /// Pressure on the whole grid.
    pub fn state(&self) -> &[f64] {
        &self.state
    }
}

impl Linearization for DarcyLin {
    fn value(&self) -> &[f64] {
        &self.value
    }

    fn deriv(&self, h: &[f64]) -> Result<Vec<f64>> {
        check_len(self.state.len(), h.len())?;
        let mut v = self.sens.apply(h);
        self.chol.solve_in_place(&mut v);
        Ok(self.obs_nodes.iter().map(|&k| -v[k]).collect())
    }

    fn adjoint(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_len(self.obs_nodes.len(), g.len())?;
        let mut lam = vec![0.0; self.state.len()];
        for (&k, &v) in self.obs_nodes.iter().zip(g) {
            lam[k] += v;
        }
        self.chol.solve_in_place(&mut lam);
        Ok(self.sens.apply_transpose(&lam).into_iter().map(|v| -v * self.inv_h2).collect())
    }
}

impl ForwardModel for DarcyProblem {
    type Lin = DarcyLin;

    fn grid(&self) -> Grid {
        self.grid
    }

    fn dim_obs(&self) -> usize {
        self.obs_nodes.len()
    }

    fn linearize(&self, u: &[f64]) -> Result<DarcyLin> {
        check_len(self.grid.len(), u.len())?;
        let kappa = permeability(u)?;
        let chol = operator(self.grid, &kappa).cholesky()?;
        let state = chol.solve(&self.source);
        let sens = Sensitivity::new(self.grid, &kappa, &state);
        let value = self.restrict(&state);
        Ok(DarcyLin { chol, sens, state, value, obs_nodes: self.obs_nodes.clone(), inv_h2: 1.0 / self.grid.cell_area() })
    }

    fn inner_obs(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss_newton::{gn_step_covariance, gn_step_identity, KrylovSettings};
    use crate::prior::CovarianceOperator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // −Δp = 1 on the unit square, centre value (double Fourier series).
    const POISSON_CENTRE: f64 = 0.07367135126667050192;

    fn random_vec(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..len).map(|_| rng.random_range(lo..hi)).collect()
    }

    #[test]
    fn unit_permeability_is_poisson() {
        let mut prev_err = f64::INFINITY;
        for n in [31, 63, 127] {
            let g = Grid::new(n).unwrap();
            let p = DarcyProblem::new(g).solve_darcy(&ParamField::constant(g, 0.0)).unwrap();
            let c = p.values()[g.index(n / 2 + 1, n / 2 + 1)];
            let err = ((c - POISSON_CENTRE) / POISSON_CENTRE).abs();
            assert!(err < prev_err);
            prev_err = err;
        }
        assert!(prev_err < 0.01);
    }

    #[test]
    fn zero_source_gives_zero_state() {
        let g = Grid::new(5).unwrap();
        let p = solve_darcy(&ParamField::constant(g, 0.3), &vec![0.0; g.len()]).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shift_identity() {
        let g = Grid::new(17).unwrap();
        let prob = DarcyProblem::new(g);
        let u = truth_field(DarcyTruth::Channel, g);
        let c = 0.7;
        let shifted = ParamField::new(g, u.values().iter().map(|v| v + c).collect()).unwrap();
        let p = prob.solve_darcy(&u).unwrap();
        let q = prob.solve_darcy(&shifted).unwrap();
        for (a, b) in p.values().iter().zip(q.values()) {
            assert!((b - (-c).exp() * a).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn overflowing_permeability_is_rejected() {
        let g = Grid::new(3).unwrap();
        let mut u = vec![0.0; 9];
        u[4] = 800.0;
        let u = ParamField::new(g, u).unwrap();
        assert!(matches!(
            DarcyProblem::new(g).forward(&u),
            Err(Error::NonPositiveTransmissibility { node: 4, .. })
        ));
    }

    #[test]
    fn restriction_of_constant() {
        let g = Grid::new(9).unwrap();
        let prob = DarcyProblem::new(g);
        assert_eq!(prob.restrict(&vec![3.5; g.len()]), vec![3.5; 196]);
    }

    #[test]
    fn observation_points_inside_and_distinct_on_fine_grid() {
        let pts = lattice_points();
        assert_eq!(pts.len(), 196);
        assert!(pts.iter().all(|&(x, y)| x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0));
        let prob = DarcyProblem::new(Grid::new(65).unwrap());
        let mut nodes = prob.obs_nodes().to_vec();
        nodes.sort();
        nodes.dedup();
        assert_eq!(nodes.len(), 196);
    }

    #[test]
    fn dot_product_test() {
        for n in [9, 17] {
            let g = Grid::new(n).unwrap();
            let prob = DarcyProblem::new(g);
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            for _ in 0..20 {
                let u = random_vec(&mut rng, g.len(), -1.0, 1.0);
                let h = random_vec(&mut rng, g.len(), -1.0, 1.0);
                let w = random_vec(&mut rng, 196, -1.0, 1.0);
                let lin = prob.linearize(&u).unwrap();
                let a = prob.inner_obs(&lin.deriv(&h).unwrap(), &w);
                let b = prob.inner_param(&h, &lin.adjoint(&w).unwrap());
                assert!((a - b).abs() / (a.abs() + 1e-30) < 1e-10, "{a} {b}");
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = Grid::new(9).unwrap();
        let prob = DarcyProblem::new(g);
        let u = truth_field(DarcyTruth::Smooth, g);
        let lin = prob.linearize(u.values()).unwrap();
        let h = g.sample(|x, y| (2.0 * x).cos() * y);
        let jh = lin.deriv(&h).unwrap();
        let t = 1e-6;
        let plus: Vec<f64> = u.values().iter().zip(&h).map(|(a, b)| a + t * b).collect();
        let minus: Vec<f64> = u.values().iter().zip(&h).map(|(a, b)| a - t * b).collect();
        let fp = prob.apply(&plus).unwrap();
        let fm = prob.apply(&minus).unwrap();
        for k in 0..196 {
            let fd = (fp.values()[k] - fm.values()[k]) / (2.0 * t);
            assert!((fd - jh[k]).abs() < 1e-7 * jh.iter().map(|v| v.abs()).fold(0.0, f64::max));
        }
    }

    #[test]
    fn every_node_influences_the_data() {
        let g = Grid::new(9).unwrap();
        let prob = DarcyProblem::new(g);
        let lin = prob.linearize(&vec![0.0; g.len()]).unwrap();
        let mut e = vec![0.0; g.len()];
        for k in 0..g.len() {
            e[k] = 1.0;
            let col = lin.deriv(&e).unwrap();
            assert!(col.iter().any(|&v| v != 0.0), "column {k} is zero");
            e[k] = 0.0;
        }
    }

    #[test]
    fn covariance_step_with_identity_matches_krylov() {
        let g = Grid::new(9).unwrap();
        let prob = DarcyProblem::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cov = CovarianceOperator::identity(g.len());
        for _ in 0..5 {
            let u_n = ParamField::new(g, random_vec(&mut rng, g.len(), -0.5, 0.5)).unwrap();
            let anchor = ParamField::constant(g, rng.random_range(0.0..1.0));
            let w = ObsVector::new(random_vec(&mut rng, 196, 0.0, 0.07)).unwrap();
            let alpha = 10f64.powf(rng.random_range(-3.0..0.0));
            let a = gn_step_covariance(&prob, &u_n, &anchor, &w, alpha, &cov).unwrap();
            let settings = KrylovSettings { tol: 1e-13, max_iter: 10_000 };
            let b = gn_step_identity(&prob, &u_n, &anchor, &w, alpha, settings).unwrap();
            let diff: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            assert!(diff < 1e-8 * b.l2_norm() / g.spacing(), "{diff}");
        }
    }

    #[test]
    fn truths() {
        assert!((DarcyTruth::Smooth.eval(0.3, 0.7) - 1.0).abs() < 1e-11);
        let g = Grid::new(33).unwrap();
        let c = truth_field(DarcyTruth::Channel, g);
        assert!(c.values().iter().all(|&v| v == 0.0 || v == 2.0));
        assert!(c.values().contains(&0.0) && c.values().contains(&2.0));
        // nodes shared by the 33 and 67 grids agree
        let fine = Grid::new(67).unwrap();
        let cf = truth_field(DarcyTruth::Channel, fine);
        for j in 1..=33 {
            for i in 1..=33 {
                assert_eq!(c.values()[g.index(i, j)], cf.values()[fine.index(2 * i, 2 * j)]);
            }
        }
    }
}
