//! Iteratively regularized Gauss-Newton methods for nonlinear ill-posed
//! problems with sequentially arriving observations.
//!
//! Three drivers are provided:
//!
//! - [`run_cirgnm`]: the classical method on a fixed datum `W`,
//! - [`run_dirgnm`]: the dynamic method, which ingests one observation per
//!   iteration and steps against the running average `Z_n`,
//! - [`run_hirgnm`]: a dynamic phase over `N` observations followed by a
//!   classical phase on `Z_N`.
//!
//! Each driver works against any [`ForwardModel`]. Two PDE benchmark problems
//! ship with the crate: potential identification in `-Δp + up = f` with
//! full-field data ([`problems::potential`]) and log-permeability
//! identification in Darcy flow with point observations
//! ([`problems::darcy`]), the latter with a Matérn prior
//! ([`prior`]).

pub mod error;
pub mod experiments;
pub mod gauss_newton;
pub mod grid;
pub mod linalg;
pub mod observation;
pub mod prior;
pub mod problems;
pub mod schedules;

pub use error::{Error, Result};
pub use gauss_newton::{
    gn_step_covariance, gn_step_identity, relative_error, run_cirgnm, run_dirgnm, run_hirgnm,
    ForwardModel, GnConfig, Linearization, Phase, StepMethod, Trajectory, TrajectoryRecord,
};
pub use grid::{Grid, ParamField};
pub use observation::{average_update, misfit, sample_observation, AveragedData, NoiseConfig, ObsVector};
pub use prior::CovarianceOperator;
pub use schedules::{should_stop, RegSchedule, StopRule};
