//! Potential identification: recover `u` in `−Δp + u p = f` on `[0, 1]²`
//! with Dirichlet data `p = g`, observing `p` at every interior node.
//!
//! The state equation is discretized with the 5-point Laplacian. With
//! `A(u) = −Δ_h + diag(u)` the linearization at `u` is
//! `F'[u]h = −A(u)⁻¹(h ⊙ p)` and its adjoint is `F'[u]*g = −p ⊙ A(u)⁻¹g`.

use crate::error::{check_len, Error, Result};
use crate::gauss_newton::{ForwardModel, Linearization};
use crate::grid::{Grid, ParamField};
use crate::linalg::{BandCholesky, BandMatrix, SymBandMatrix};
use crate::observation::ObsVector;

use super::{neighbours, two_bumps};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialTruth {
    /// Two Gaussian bumps.
    Smooth,
    /// A disk of value 1 and a rectangle of value 1/2 on a zero background.
    Discontinuous,
}

impl PotentialTruth {
    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            PotentialTruth::Smooth => two_bumps(x, y),
            PotentialTruth::Discontinuous => {
                if (x - 0.3).powi(2) + (y - 0.7).powi(2) < 0.15 * 0.15 {
                    1.0
                } else if (0.6..=0.8).contains(&x) && (0.2..=0.5).contains(&y) {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }
}

/// `u†` at the interior nodes of `grid`.
pub fn truth_field(kind: PotentialTruth, grid: Grid) -> ParamField {
    ParamField::from_fn(grid, |x, y| kind.eval(x, y))
}

/// `A(u) = −Δ_h + diag(u)` as a symmetric band matrix.
fn operator(grid: Grid, u: &[f64]) -> SymBandMatrix {
    let n = grid.n();
    let inv_h2 = 1.0 / grid.cell_area();
    let mut a = SymBandMatrix::zeros(grid.len(), n);
    for k in 0..grid.len() {
        a.add(k, k, 4.0 * inv_h2 + u[k]);
        let [_, east, _, north] = neighbours(n, k);
        for l in [east, north].into_iter().flatten() {
            a.add(l, k, -inv_h2);
        }
    }
    a
}

fn factor(grid: Grid, u: &[f64]) -> Result<BandCholesky> {
    operator(grid, u).cholesky()
}

/// Right-hand side contribution `g(x_b)/h²` of every boundary neighbour.
fn boundary_lift(grid: Grid, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let n = grid.n();
    let h = grid.spacing();
    let inv_h2 = 1.0 / grid.cell_area();
    let mut lift = vec![0.0; grid.len()];
    for (k, out) in lift.iter_mut().enumerate() {
        let (i, j) = grid.node(k);
        let mut acc = 0.0;
        if i == 1 {
            acc += g(0.0, j as f64 * h);
        }
        if i == n {
            acc += g(1.0, j as f64 * h);
        }
        if j == 1 {
            acc += g(i as f64 * h, 0.0);
        }
        if j == n {
            acc += g(i as f64 * h, 1.0);
        }
        *out = acc * inv_h2;
    }
    lift
}

/// Solves `−Δ_h p + u p = f` with `p = g` on the boundary.
pub fn solve_pde(u: &ParamField, f: impl Fn(f64, f64) -> f64, g: impl Fn(f64, f64) -> f64) -> Result<ParamField> {
    let grid = u.grid();
    let mut rhs = grid.sample(f);
    for (r, l) in rhs.iter_mut().zip(boundary_lift(grid, g)) {
        *r += l;
    }
    let p = factor(grid, u.values())?.solve(&rhs);
    ParamField::new(grid, p)
}

#[derive(Debug, Clone)]
pub struct PotentialProblem {
    grid: Grid,
    truth: Option<PotentialTruth>,
    /// `f` at the nodes plus the boundary lift of `g`.
    rhs: Vec<f64>,
}

impl PotentialProblem {
    /// The manufactured problem for `truth`: `f = (x + y)·u†`, `g = x + y`,
    /// so that `p† = x + y`.
    pub fn new(grid: Grid, truth: PotentialTruth) -> Self {
        let mut p = Self::with_data(grid, |x, y| (x + y) * truth.eval(x, y), |x, y| x + y);
        p.truth = Some(truth);
        p
    }

    /// A problem with arbitrary source `f` and boundary data `g`.
    pub fn with_data(grid: Grid, f: impl Fn(f64, f64) -> f64, g: impl Fn(f64, f64) -> f64) -> Self {
        let mut rhs = grid.sample(f);
        for (r, l) in rhs.iter_mut().zip(boundary_lift(grid, g)) {
            *r += l;
        }
        Self { grid, truth: None, rhs }
    }

    pub fn truth(&self) -> Option<PotentialTruth> {
        self.truth
    }

    pub fn truth_field(&self) -> Option<ParamField> {
        self.truth.map(|t| truth_field(t, self.grid))
    }

    /// Noise-free data `p† = x + y` evaluated analytically at the nodes.
    pub fn exact_data(&self) -> ObsVector {
        ObsVector::new(self.grid.sample(|x, y| x + y)).expect("finite")
    }

    pub fn solve_pde(&self, u: &ParamField) -> Result<ParamField> {
        check_len(self.grid.len(), u.values().len())?;
        let p = factor(self.grid, u.values())?.solve(&self.rhs);
        ParamField::new(self.grid, p)
    }

    /// One Gauss-Newton step computed from the saddle-point system of the
    /// linearized problem in the unknowns `(μ, v)`, `μ = λ/α`:
    ///
    /// ```text
    /// α A μ + v     = W − F(û_n)
    /// −F(û_n)² μ + A v = (û_n − û_anchor) F(û_n)
    /// ```
    ///
    /// with `A = −Δ_h + diag(û_n)`, followed by `u = û_anchor − μ F(û_n)`.
    pub fn kkt_step(&self, u_n: &ParamField, u_anchor: &ParamField, w: &ObsVector, alpha: f64) -> Result<ParamField> {
        let lin = self.linearize(u_n.values())?;
        check_len(self.grid.len(), u_anchor.values().len())?;
        check_len(self.grid.len(), w.len())?;
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        let u = kkt_solve(self.grid, &lin, u_n.values(), u_anchor.values(), w.values(), alpha)?;
        ParamField::new(self.grid, u)
    }
}

fn kkt_solve(grid: Grid, lin: &PotentialLin, u_n: &[f64], u_anchor: &[f64], w: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let n = grid.n();
    let dim = grid.len();
    let inv_h2 = 1.0 / grid.cell_area();
    let p = &lin.p;
    let mut m = BandMatrix::zeros(2 * dim, 2 * n, 2 * n);
    let mut rhs = vec![0.0; 2 * dim];
    for k in 0..dim {
        let (mu, v) = (2 * k, 2 * k + 1);
        let diag = 4.0 * inv_h2 + u_n[k];
        m.add(mu, mu, alpha * diag);
        m.add(mu, v, 1.0);
        m.add(v, mu, -p[k] * p[k]);
        m.add(v, v, diag);
        for l in neighbours(n, k).into_iter().flatten() {
            m.add(mu, 2 * l, -alpha * inv_h2);
            m.add(v, 2 * l + 1, -inv_h2);
        }
        rhs[mu] = w[k] - p[k];
        rhs[v] = (u_n[k] - u_anchor[k]) * p[k];
    }
    let sol = m.lu()?.solve(&rhs);
    Ok((0..dim).map(|k| u_anchor[k] - sol[2 * k] * p[k]).collect())
}

/// Factorized `A(u)` and state `p = F(u)`.
#[derive(Debug, Clone)]
pub struct PotentialLin {
    chol: BandCholesky,
    p: Vec<f64>,
}

impl PotentialLin {
    /// `A(u)⁻¹ b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.chol.solve(b)
    }
}

impl Linearization for PotentialLin {
    fn value(&self) -> &[f64] {
        &self.p
    }

    fn deriv(&self, h: &[f64]) -> Result<Vec<f64>> {
        check_len(self.p.len(), h.len())?;
        let mut v: Vec<f64> = h.iter().zip(&self.p).map(|(a, b)| -a * b).collect();
        self.chol.solve_in_place(&mut v);
        Ok(v)
    }

    fn adjoint(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_len(self.p.len(), g.len())?;
        let mut lam = g.to_vec();
        self.chol.solve_in_place(&mut lam);
        Ok(lam.iter().zip(&self.p).map(|(l, p)| -l * p).collect())
    }
}

impl ForwardModel for PotentialProblem {
    type Lin = PotentialLin;

    fn grid(&self) -> Grid {
        self.grid
    }

    fn dim_obs(&self) -> usize {
        self.grid.len()
    }

    fn linearize(&self, u: &[f64]) -> Result<PotentialLin> {
        check_len(self.grid.len(), u.len())?;
        let chol = factor(self.grid, u)?;
        let p = chol.solve(&self.rhs);
        Ok(PotentialLin { chol, p })
    }

    fn inner_obs(&self, a: &[f64], b: &[f64]) -> f64 {
        self.grid.inner(a, b)
    }

    fn native_step(
        &self,
        lin: &PotentialLin,
        u_n: &[f64],
        u_anchor: &[f64],
        w: &[f64],
        alpha: f64,
    ) -> Option<Result<Vec<f64>>> {
        Some(kkt_solve(self.grid, lin, u_n, u_anchor, w, alpha))
    }
}
