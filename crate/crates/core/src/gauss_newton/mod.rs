//! The regularized Gauss-Newton step and the classical, dynamic and hybrid
//! drivers built on it.
//!
//! Every step minimizes the linearized functional
//!
//! ```text
//! S(F(û_n) + F'[û_n](u − û_n); W) + (α/2)‖u − û_anchor‖²
//! ```
//!
//! whose stationarity condition is the normal equation
//! `(J*J + α) (u − û_n) = J*(W − F(û_n)) − α(û_n − û_anchor)` with `J = F'[û_n]`.

mod drivers;
mod trajectory;

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::grid::{dot, Grid, ParamField};
use crate::linalg::conjugate_gradient;
use crate::observation::ObsVector;
use crate::prior::CovarianceOperator;
use crate::schedules::{RegSchedule, StopRule};

pub use drivers::{run_cirgnm, run_dirgnm, run_hirgnm};
pub use trajectory::{Phase, Trajectory, TrajectoryRecord};

/// `F`, its derivative and the adjoint of the derivative, frozen at one
/// parameter `u`. Implementations cache whatever factorization the state
/// equation needs so repeated `deriv`/`adjoint` calls are cheap.
pub trait Linearization {
    /// `F(u)`.
    fn value(&self) -> &[f64];
    /// `F'[u] h`.
    fn deriv(&self, h: &[f64]) -> Result<Vec<f64>>;
    /// `F'[u]* g`, adjoint with respect to the model's inner products.
    fn adjoint(&self, g: &[f64]) -> Result<Vec<f64>>;
}

/// A discretized forward operator `F: X → Y`.
///
/// Implementations must be usable concurrently from several driver runs.
pub trait ForwardModel: Sync {
    type Lin: Linearization;

    /// Grid carrying the unknown.
    fn grid(&self) -> Grid;

    fn dim_param(&self) -> usize {
        self.grid().len()
    }

    fn dim_obs(&self) -> usize;

    fn linearize(&self, u: &[f64]) -> Result<Self::Lin>;

    fn inner_obs(&self, a: &[f64], b: &[f64]) -> f64;

    fn inner_param(&self, a: &[f64], b: &[f64]) -> f64 {
        self.grid().inner(a, b)
    }

    fn apply(&self, u: &[f64]) -> Result<ObsVector> {
        ObsVector::new(self.linearize(u)?.value().to_vec())
    }

    fn deriv(&self, u: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        self.linearize(u)?.deriv(h)
    }

    fn adjoint(&self, u: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.linearize(u)?.adjoint(g)
    }

    /// A problem-specific solver for the same step, if the problem has one.
    fn native_step(
        &self,
        _lin: &Self::Lin,
        _u_n: &[f64],
        _u_anchor: &[f64],
        _w: &[f64],
        _alpha: f64,
    ) -> Option<Result<Vec<f64>>> {
        None
    }
}

/// Stopping tolerance and iteration cap for the matrix-free normal-equation
/// solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for KrylovSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 5000 }
    }
}

/// How each Gauss-Newton step is solved.
#[derive(Debug, Clone)]
pub enum StepMethod {
    /// Identity prior, normal equations solved by conjugate gradients.
    Krylov(KrylovSettings),
    /// Covariance prior, solved in observation space via the Woodbury form.
    Covariance(Arc<CovarianceOperator>),
    /// The model's own solver (see [`ForwardModel::native_step`]).
    Native,
}

#[derive(Debug, Clone)]
pub struct GnConfig {
    /// Anchor `û_0` of the penalty, also the default starting point.
    pub u0: ParamField,
    pub schedule: RegSchedule,
    pub stop: Option<StopRule>,
    pub step: StepMethod,
    /// Truth used to record relative errors, if known.
    pub reference: Option<ParamField>,
}

impl GnConfig {
    pub fn new(u0: ParamField, schedule: RegSchedule, step: StepMethod) -> Self {
        Self { u0, schedule, stop: None, step, reference: None }
    }

    pub fn with_stop(mut self, stop: StopRule) -> Self {
        self.stop = Some(stop);
        self
    }

    pub fn with_reference(mut self, reference: ParamField) -> Self {
        self.reference = Some(reference);
        self
    }
}

fn check_step_inputs<M: ForwardModel>(model: &M, u_n: &[f64], u_anchor: &[f64], w: &[f64], alpha: f64) -> Result<()> {
    check_len(model.dim_param(), u_n.len())?;
    check_len(model.dim_param(), u_anchor.len())?;
    check_len(model.dim_obs(), w.len())?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

/// Right-hand side `J*(W − F(û_n)) − α(û_n − û_anchor)` of the normal equation.
fn normal_rhs(lin: &impl Linearization, u_n: &[f64], u_anchor: &[f64], w: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let resid: Vec<f64> = w.iter().zip(lin.value()).map(|(a, b)| a - b).collect();
    let mut rhs = lin.adjoint(&resid)?;
    for ((r, a), b) in rhs.iter_mut().zip(u_n).zip(u_anchor) {
        *r -= alpha * (a - b);
    }
    Ok(rhs)
}

pub(crate) fn step_identity_lin<M: ForwardModel>(
    model: &M,
    lin: &M::Lin,
    u_n: &[f64],
    u_anchor: &[f64],
    w: &[f64],
    alpha: f64,
    settings: KrylovSettings,
) -> Result<Vec<f64>> {
    check_step_inputs(model, u_n, u_anchor, w, alpha)?;
    let rhs = normal_rhs(lin, u_n, u_anchor, w, alpha)?;
    let apply = |h: &[f64]| -> Result<Vec<f64>> {
        let mut out = lin.adjoint(&lin.deriv(h)?)?;
        for (o, v) in out.iter_mut().zip(h) {
            *o += alpha * v;
        }
        Ok(out)
    };
    let sol = conjugate_gradient(apply, |a, b| model.inner_param(a, b), &rhs, settings.tol, settings.max_iter)?;
    Ok(u_n.iter().zip(&sol.x).map(|(a, d)| a + d).collect())
}

pub(crate) fn step_covariance_lin<M: ForwardModel>(
    model: &M,
    lin: &M::Lin,
    u_n: &[f64],
    u_anchor: &[f64],
    w: &[f64],
    alpha: f64,
    cov: &CovarianceOperator,
) -> Result<Vec<f64>> {
    check_step_inputs(model, u_n, u_anchor, w, alpha)?;
    let (p, k) = (model.dim_param(), model.dim_obs());
    check_len(p, cov.dim())?;

    let mut j_star = DMatrix::<f64>::zeros(p, k);
    let mut e = vec![0.0; k];
    for col in 0..k {
        e[col] = 1.0;
        let c = lin.adjoint(&e)?;
        j_star.column_mut(col).copy_from_slice(&c);
        e[col] = 0.0;
    }
    let g = cov.matrix() * &j_star;

    let mut system = DMatrix::<f64>::zeros(k, k);
    for col in 0..k {
        let jc = lin.deriv(g.column(col).as_slice())?;
        system.column_mut(col).copy_from_slice(&jc);
    }
    let system = (&system + system.transpose()) * 0.5 + DMatrix::<f64>::identity(k, k) * alpha;
    let chol = system.cholesky().ok_or(Error::ObservationSystem { alpha })?;

    let shift: Vec<f64> = u_anchor.iter().zip(u_n).map(|(a, b)| a - b).collect();
    let j_shift = lin.deriv(&shift)?;
    let bracket: Vec<f64> = (0..k).map(|i| w[i] - lin.value()[i] - j_shift[i]).collect();
    let coeff = chol.solve(&nalgebra::DVector::from_vec(bracket));
    let update = &g * coeff;
    Ok(u_anchor.iter().zip(update.iter()).map(|(a, d)| a + d).collect())
}

/// One identity-prior step
/// `û_{n+1} = û_n − (J*J + α)⁻¹(J*(F(û_n) − W) + α(û_n − û_anchor))`,
/// solved matrix-free by conjugate gradients.
pub fn gn_step_identity<M: ForwardModel>(
    model: &M,
    u_n: &ParamField,
    u_anchor: &ParamField,
    w: &ObsVector,
    alpha: f64,
    settings: KrylovSettings,
) -> Result<ParamField> {
    let lin = model.linearize(u_n.values())?;
    let u = step_identity_lin(model, &lin, u_n.values(), u_anchor.values(), w.values(), alpha, settings)?;
    ParamField::new(model.grid(), u)
}

/// One covariance-prior step
/// `û_{n+1} = û_anchor + 𝒞J*(J𝒞J* + αI)⁻¹(W − F(û_n) − J(û_anchor − û_n))`,
/// assembling the `dim_obs × dim_obs` system densely.
pub fn gn_step_covariance<M: ForwardModel>(
    model: &M,
    u_n: &ParamField,
    u_anchor: &ParamField,
    w: &ObsVector,
    alpha: f64,
    cov: &CovarianceOperator,
) -> Result<ParamField> {
    let lin = model.linearize(u_n.values())?;
    let u = step_covariance_lin(model, &lin, u_n.values(), u_anchor.values(), w.values(), alpha, cov)?;
    ParamField::new(model.grid(), u)
}

pub(crate) fn take_step<M: ForwardModel>(
    model: &M,
    method: &StepMethod,
    lin: &M::Lin,
    u_n: &[f64],
    u_anchor: &[f64],
    w: &[f64],
    alpha: f64,
) -> Result<Vec<f64>> {
    match method {
        StepMethod::Krylov(s) => step_identity_lin(model, lin, u_n, u_anchor, w, alpha, *s),
        StepMethod::Covariance(cov) => step_covariance_lin(model, lin, u_n, u_anchor, w, alpha, cov),
        StepMethod::Native => {
            check_step_inputs(model, u_n, u_anchor, w, alpha)?;
            model
                .native_step(lin, u_n, u_anchor, w, alpha)
                .unwrap_or_else(|| Err(Error::invalid("this model has no native step solver")))
        }
    }
}

/// `‖u − u†‖ / ‖u†‖` in the mesh-weighted L² norm.
pub fn relative_error(u: &ParamField, u_true: &ParamField) -> Result<f64> {
    if u.grid() != u_true.grid() {
        return Err(Error::DimensionMismatch { expected: u_true.grid().len(), got: u.grid().len() });
    }
    let denom = dot(u_true.values(), u_true.values());
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num: f64 = u.values().iter().zip(u_true.values()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((num / denom).sqrt())
}
