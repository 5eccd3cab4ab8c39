use super::{relative_error, take_step, ForwardModel, GnConfig, Linearization, Phase, Trajectory, TrajectoryRecord};
use crate::error::{check_len, Error, Result};
use crate::grid::ParamField;
use crate::observation::{misfit, AveragedData, ObsVector};
use crate::schedules::{should_stop, RegSchedule};

struct Run<'a, M: ForwardModel> {
    model: &'a M,
    config: &'a GnConfig,
    traj: Trajectory,
    best_error: f64,
    u: Vec<f64>,
    lin: M::Lin,
}

impl<'a, M: ForwardModel> Run<'a, M> {
    fn new(model: &'a M, config: &'a GnConfig, u_start: &ParamField) -> Result<Self> {
        check_len(model.dim_param(), u_start.values().len())?;
        check_len(model.dim_param(), config.u0.values().len())?;
        let start_err = config.reference.as_ref().map(|r| relative_error(u_start, r)).transpose()?;
        let lin = model.linearize(u_start.values())?;
        Ok(Self {
            model,
            config,
            traj: Trajectory::start(u_start.clone(), start_err),
            best_error: f64::INFINITY,
            u: u_start.values().to_vec(),
            lin,
        })
    }

    /// One step against `w`; returns the residual norm of the new iterate.
    fn step(&mut self, iter: usize, phase: Phase, alpha: f64, w: &[f64], n_obs_used: usize) -> Result<f64> {
        let model = self.model;
        let u_next = take_step(model, &self.config.step, &self.lin, &self.u, self.config.u0.values(), w, alpha)?;
        let field = ParamField::new(model.grid(), u_next)?;
        let lin = model.linearize(field.values())?;
        let fu = lin.value();
        let resid: Vec<f64> = fu.iter().zip(w).map(|(a, b)| a - b).collect();
        let residual_norm = model.inner_obs(&resid, &resid).sqrt();
        let misfit_value = misfit(fu, w, |a, b| model.inner_obs(a, b))?;
        let rel_error = self.config.reference.as_ref().map(|r| relative_error(&field, r)).transpose()?;
        if let Some(e) = rel_error {
            if e < self.best_error {
                self.best_error = e;
                self.traj.best_estimate = Some(field.clone());
            }
        }
        self.traj.records.push(TrajectoryRecord {
            iter,
            phase,
            alpha,
            n_obs_used,
            rel_error,
            residual_norm,
            misfit: misfit_value,
        });
        self.traj.final_alpha = Some(alpha);
        self.u = field.values().to_vec();
        self.traj.final_estimate = field;
        self.lin = lin;
        Ok(residual_norm)
    }

    fn classic_phase(&mut self, schedule: &RegSchedule, w: &[f64], n_obs_used: usize, m: usize) -> Result<()> {
        check_len(self.model.dim_obs(), w.len())?;
        for n in 1..=m {
            let alpha = schedule.alpha(n)?;
            let residual = self.step(n, Phase::Classic, alpha, w, n_obs_used).map_err(|e| self.abort(n, e))?;
            if let Some(rule) = &self.config.stop {
                if should_stop(rule, n, residual) {
                    break;
                }
            }
        }
        Ok(())
    }

    fn dynamic_phase(
        &mut self,
        observations: impl IntoIterator<Item = ObsVector>,
        n_obs: usize,
    ) -> Result<AveragedData> {
        let config = self.config;
        let schedule = &config.schedule;
        if matches!(schedule, RegSchedule::Geometric { .. }) {
            return Err(Error::invalid("the dynamic method needs a power-type schedule"));
        }
        let mut z = AveragedData::empty(self.model.dim_obs());
        let mut stream = observations.into_iter();
        for n in 1..=n_obs {
            let y = stream.next().ok_or(Error::StreamExhausted { expected: n_obs, got: n - 1 })?;
            z.push(&y).map_err(|e| self.abort(n, e))?;
            let alpha = schedule.alpha(n)?;
            self.step(n, Phase::Dynamic, alpha, z.mean().values(), n).map_err(|e| self.abort(n, e))?;
        }
        Ok(z)
    }

    fn abort(&self, iteration: usize, source: Error) -> Error {
        Error::Aborted { iteration, source: Box::new(source), partial: Box::new(self.traj.clone()) }
    }
}

/// Classical IRGNM: `m` steps against the fixed datum `w`, starting at
/// `u_start` and penalizing toward `config.u0`, with `α_n` from
/// `config.schedule` at `n = 1, …, m`. The optional stop rule is checked
/// after every step.
pub fn run_cirgnm<M: ForwardModel>(
    model: &M,
    config: &GnConfig,
    u_start: &ParamField,
    w: &ObsVector,
    n_obs_used: usize,
    m: usize,
) -> Result<Trajectory> {
    let mut run = Run::new(model, config, u_start)?;
    run.classic_phase(&config.schedule, w.values(), n_obs_used, m)?;
    Ok(run.traj)
}

/// Dynamic IRGNM: at `n = 1, …, N` ingest `Y_n`, update the running average
/// `Z_n`, and take one step against `Z_n` with `α_n` from the (power-type)
/// schedule. Starts and stays anchored at `config.u0`.
///
/// The stop rule is not consulted: the dynamic phase always assimilates all
/// `N` observations.
pub fn run_dirgnm<M: ForwardModel>(
    model: &M,
    config: &GnConfig,
    observations: impl IntoIterator<Item = ObsVector>,
    n_obs: usize,
) -> Result<Trajectory> {
    let mut run = Run::new(model, config, &config.u0)?;
    run.dynamic_phase(observations, n_obs)?;
    Ok(run.traj)
}

/// Hybrid IRGNM: [`run_dirgnm`] over `N ≥ 1` observations, then `m`
/// classical steps from `Û_N` against `Z_N` with
/// `α̃_n = α_N · c_dec^(−n)`, still anchored at `config.u0`.
pub fn run_hirgnm<M: ForwardModel>(
    model: &M,
    config: &GnConfig,
    observations: impl IntoIterator<Item = ObsVector>,
    n_obs: usize,
    m: usize,
    c_dec: f64,
) -> Result<Trajectory> {
    if n_obs == 0 {
        return Err(Error::invalid("the hybrid method needs at least one observation"));
    }
    let mut run = Run::new(model, config, &config.u0)?;
    let z = run.dynamic_phase(observations, n_obs)?;
    let alpha_n = run.traj.final_alpha.expect("dynamic phase took at least one step");
    let schedule = RegSchedule::geometric(alpha_n, c_dec)?;
    run.classic_phase(&schedule, z.mean().values(), n_obs, m)?;
    Ok(run.traj)
}
