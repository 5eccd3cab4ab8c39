//! Experiment harness behind the `irgnm` binary: builds a problem from a
//! [`RunConfig`], feeds it a seeded observation stream and writes CSV output.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

pub use config::{Method, ProblemKind, RunConfig, StopKind, TruthKind};

use crate::error::{Error, Result};
use crate::gauss_newton::{run_cirgnm, run_dirgnm, run_hirgnm, ForwardModel, GnConfig, Phase, StepMethod, Trajectory};
use crate::grid::{Grid, ParamField};
use crate::observation::{AveragedData, NoiseConfig, ObsVector, SyntheticStream};
use crate::prior::{assemble_covariance, sample_prior, DEFAULT_JITTER};
use crate::problems::{darcy, potential, DarcyProblem, DarcyTruth, PotentialProblem, PotentialTruth};
use crate::schedules::{noise_norm_estimate, RegSchedule, StopRule};

#[derive(Debug, Clone)]
enum Model {
    Potential(PotentialProblem),
    Darcy(DarcyProblem),
}

/// A built problem: model, truth, anchor, exact data and step solver.
#[derive(Debug, Clone)]
pub struct Setup {
    model: Model,
    truth: ParamField,
    u0: ParamField,
    stream: SyntheticStream,
    step: StepMethod,
}

impl Setup {
    pub fn build(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let grid = Grid::new(config.grid())?;
        let noise = NoiseConfig::new(config.sigma(), config.seed)?;
        match config.problem {
            ProblemKind::Potential => {
                let kind = match config.truth {
                    TruthKind::Smooth => PotentialTruth::Smooth,
                    TruthKind::Discontinuous => PotentialTruth::Discontinuous,
                };
                let model = PotentialProblem::new(grid, kind);
                // analytic data, so no second grid is needed
                let y_true = model.exact_data();
                Ok(Self {
                    truth: potential::truth_field(kind, grid),
                    u0: ParamField::constant(grid, 0.0),
                    stream: SyntheticStream::new(y_true, noise),
                    step: StepMethod::Native,
                    model: Model::Potential(model),
                })
            }
            ProblemKind::Darcy => {
                let kind = match config.truth {
                    TruthKind::Smooth => DarcyTruth::Smooth,
                    TruthKind::Discontinuous => DarcyTruth::Channel,
                };
                let fine = Grid::new(config.data_grid())?;
                let y_true = DarcyProblem::new(fine).forward(&darcy::truth_field(kind, fine))?;
                let cov = Arc::new(assemble_covariance(grid, config.c0, config.nu, config.ell, DEFAULT_JITTER)?);
                let u0 = match kind {
                    DarcyTruth::Smooth => ParamField::constant(grid, 1.0),
                    DarcyTruth::Channel => {
                        // L z has pointwise variance h² c0; rescale to c0
                        let s = sample_prior(&cov, grid, config.seed)?;
                        let h = grid.spacing();
                        ParamField::new(grid, s.values().iter().map(|v| v / h).collect())?
                    }
                };
                Ok(Self {
                    truth: darcy::truth_field(kind, grid),
                    u0,
                    stream: SyntheticStream::new(y_true, noise),
                    step: StepMethod::Covariance(cov),
                    model: Model::Darcy(DarcyProblem::new(grid)),
                })
            }
        }
    }

    pub fn truth(&self) -> &ParamField {
        &self.truth
    }

    pub fn u0(&self) -> &ParamField {
        &self.u0
    }

    pub fn stream(&self) -> &SyntheticStream {
        &self.stream
    }

    fn execute(&self, config: &RunConfig, variant: Variant, checksum: &mut u64) -> Result<Trajectory> {
        match &self.model {
            Model::Potential(m) => self.execute_on(m, config, variant, checksum),
            Model::Darcy(m) => self.execute_on(m, config, variant, checksum),
        }
    }

    fn execute_on<M: ForwardModel>(
        &self,
        model: &M,
        config: &RunConfig,
        variant: Variant,
        checksum: &mut u64,
    ) -> Result<Trajectory> {
        let classic = RegSchedule::geometric(config.alpha0, config.c_dec)?;
        let dynamic = match config.theta {
            Some(theta) => RegSchedule::holder_rate(config.alpha0, config.nu_src, theta)?,
            None => RegSchedule::power(config.alpha0, config.beta)?,
        };
        let gn = |schedule: RegSchedule, count: usize| -> Result<GnConfig> {
            let mut c = GnConfig::new(self.u0.clone(), schedule, self.step.clone()).with_reference(self.truth.clone());
            if config.stop == StopKind::Discrepancy {
                let ones = vec![1.0; model.dim_obs()];
                let est = noise_norm_estimate(config.sigma(), model.inner_obs(&ones, &ones), count);
                c = c.with_stop(StopRule::discrepancy(config.tau, est)?);
            }
            Ok(c)
        };
        let stream = Hashing { inner: self.stream.clone(), hash: checksum };
        match variant {
            Variant::NoiseFree => {
                let w = self.stream.exact().clone();
                run_cirgnm(model, &gn(classic, usize::MAX)?, &self.u0, &w, 0, config.max_iter)
            }
            Variant::Classic { count } => {
                let mut z = AveragedData::empty(model.dim_obs());
                for y in stream.take(count) {
                    z.push(&y)?;
                }
                run_cirgnm(model, &gn(classic, count)?, &self.u0, z.mean(), count, config.max_iter)
            }
            Variant::Dynamic => run_dirgnm(model, &gn(dynamic, config.n_obs)?, stream, config.n_obs),
            Variant::Hybrid => {
                run_hirgnm(model, &gn(dynamic, config.n_obs)?, stream, config.n_obs, config.max_iter, config.c_dec)
            }
        }
    }
}

/// Which data and driver a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Classical method on the exact data.
    NoiseFree,
    /// Classical method on the average of the first `count` observations.
    Classic { count: usize },
    Dynamic,
    Hybrid,
}

impl Variant {
    pub fn for_method(config: &RunConfig) -> Self {
        match config.method {
            Method::Cirgnm => Variant::Classic { count: config.n_obs },
            Method::Dirgnm => Variant::Dynamic,
            Method::Hirgnm => Variant::Hybrid,
        }
    }
}

/// FNV-1a over the bit patterns of every observation drawn.
struct Hashing<'a> {
    inner: SyntheticStream,
    hash: &'a mut u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

impl Iterator for Hashing<'_> {
    type Item = ObsVector;

    fn next(&mut self) -> Option<ObsVector> {
        let y = self.inner.next()?;
        for v in y.values() {
            for b in v.to_bits().to_le_bytes() {
                *self.hash = (*self.hash ^ u64::from(b)).wrapping_mul(FNV_PRIME);
            }
        }
        Some(y)
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub trajectory_csv: PathBuf,
    pub final_csv: PathBuf,
    pub best_csv: Option<PathBuf>,
    pub start_rel_error: Option<f64>,
    /// Smallest relative error over all recorded iterations.
    pub min_rel_error: Option<f64>,
    pub argmin_iter: Option<usize>,
    pub argmin_phase: Option<Phase>,
    pub final_rel_error: Option<f64>,
    pub steps: usize,
    /// Checksum of the observations the run consumed.
    pub observation_checksum: u64,
    pub wall_seconds: f64,
}

fn write_outputs(dir: &Path, setup: &Setup, traj: &Trajectory) -> Result<(PathBuf, PathBuf, Option<PathBuf>)> {
    let trajectory_csv = dir.join("trajectory.csv");
    traj.save_csv(&trajectory_csv)?;
    let final_csv = dir.join("estimate_final.csv");
    traj.final_estimate.write_csv(&final_csv)?;
    let best_csv = match &traj.best_estimate {
        Some(best) => {
            let p = dir.join("estimate_best.csv");
            best.write_csv(&p)?;
            Some(p)
        }
        None => None,
    };
    setup.truth.write_csv(&dir.join("truth.csv"))?;
    Ok((trajectory_csv, final_csv, best_csv))
}

/// Runs `variant` on a built setup and writes its outputs into `dir`. On a
/// solver failure the partial trajectory is still written.
pub fn run_variant(setup: &Setup, config: &RunConfig, variant: Variant, dir: &Path) -> Result<(RunReport, Trajectory)> {
    let start = Instant::now();
    std::fs::create_dir_all(dir)?;
    let mut checksum = FNV_OFFSET;
    let traj = match setup.execute(config, variant, &mut checksum) {
        Ok(t) => t,
        Err(e) => {
            if let Error::Aborted { partial, .. } = &e {
                write_outputs(dir, setup, partial)?;
            }
            return Err(e);
        }
    };
    let (trajectory_csv, final_csv, best_csv) = write_outputs(dir, setup, &traj)?;
    let min = traj.min_rel_error();
    let report = RunReport {
        trajectory_csv,
        final_csv,
        best_csv,
        start_rel_error: traj.start_rel_error,
        min_rel_error: min.map(|(_, e)| e),
        argmin_iter: min.map(|(r, _)| r.iter),
        argmin_phase: min.map(|(r, _)| r.phase),
        final_rel_error: traj.final_rel_error(),
        steps: traj.len(),
        observation_checksum: checksum,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((report, traj))
}

/// Builds the problem, runs the configured method and writes
/// `trajectory.csv`, `estimate_final.csv`, `estimate_best.csv` and
/// `truth.csv` into `config.out`.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    let setup = Setup::build(config)?;
    Ok(run_variant(&setup, config, Variant::for_method(config), &config.out)?.0)
}

#[derive(Debug)]
pub struct SweepMember {
    pub beta: f64,
    pub result: Result<RunReport>,
}

#[derive(Debug)]
pub struct SweepReport {
    pub members: Vec<SweepMember>,
    pub summary_csv: PathBuf,
}

fn beta_dir(out: &Path, beta: f64) -> PathBuf {
    out.join(format!("beta_{beta}"))
}

/// Dynamic runs for each `β` on one shared observation stream. Members run
/// concurrently, each writing into `out/beta_<β>/`; a failed member is
/// recorded in `summary.csv` and does not stop the others.
pub fn sweep_beta(config: &RunConfig, betas: &[f64]) -> Result<SweepReport> {
    if config.method != Method::Dirgnm {
        return Err(Error::invalid("sweep-beta needs method = dirgnm"));
    }
    let setup = Setup::build(config)?;
    std::fs::create_dir_all(&config.out)?;
    let members: Vec<SweepMember> = betas
        .par_iter()
        .map(|&beta| {
            let mut c = config.clone();
            c.beta = beta;
            c.out = beta_dir(&config.out, beta);
            let result = run_variant(&setup, &c, Variant::Dynamic, &c.out).map(|(r, _)| r);
            SweepMember { beta, result }
        })
        .collect();
    let summary_csv = config.out.join("summary.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&summary_csv)?);
    writeln!(f, "beta,min_error,final_error,argmin_iter,status")?;
    for m in &members {
        match &m.result {
            Ok(r) => writeln!(
                f,
                "{},{},{},{},ok",
                m.beta,
                sci(r.min_rel_error),
                sci(r.final_rel_error),
                r.argmin_iter.map_or_else(|| "NaN".into(), |i| i.to_string())
            )?,
            Err(e) => writeln!(f, "{},NaN,NaN,NaN,\"{}\"", m.beta, e.to_string().replace('"', "'"))?,
        }
    }
    f.flush()?;
    Ok(SweepReport { members, summary_csv })
}

fn sci(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v:.16e}"),
        _ => "NaN".to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct CompareRow {
    pub variant: &'static str,
    /// Minimum relative error; for the hybrid method over its classical
    /// phase only.
    pub min_error: f64,
    /// Iteration of the minimum within the phase it was taken over.
    pub argmin_iter: usize,
    pub final_error: f64,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub summary_csv: PathBuf,
}

impl CompareReport {
    pub fn row(&self, variant: &str) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }
}

/// Classical method on the exact data, on `Y_1` and on `Z_N`, and the
/// hybrid method on `Y_1 … Y_N`, all from one stream. Each variant writes
/// into `out/<variant>/`; the table goes to `out/summary.csv`.
pub fn compare(config: &RunConfig) -> Result<CompareReport> {
    let setup = Setup::build(config)?;
    std::fs::create_dir_all(&config.out)?;
    let variants: [(&'static str, Variant); 4] = [
        ("cirgnm_noise_free", Variant::NoiseFree),
        ("cirgnm_single", Variant::Classic { count: 1 }),
        ("cirgnm_average", Variant::Classic { count: config.n_obs }),
        ("hirgnm", Variant::Hybrid),
    ];
    let results: Vec<Result<CompareRow>> = variants
        .par_iter()
        .map(|&(name, variant)| {
            let (_, traj) = run_variant(&setup, config, variant, &config.out.join(name))?;
            let records: Vec<_> = traj.phase(Phase::Classic).collect();
            let (best, min_error) = Trajectory::min_rel_error_in(records.iter().copied())
                .ok_or_else(|| Error::invalid(format!("{name}: no iterations recorded")))?;
            Ok(CompareRow {
                variant: name,
                min_error,
                argmin_iter: best.iter,
                final_error: records.last().and_then(|r| r.rel_error).unwrap_or(f64::NAN),
            })
        })
        .collect();
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summary_csv = config.out.join("summary.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&summary_csv)?);
    writeln!(f, "variant,min_error,argmin_iter,final_error")?;
    for r in &rows {
        writeln!(f, "{},{},{},{}", r.variant, sci(Some(r.min_error)), r.argmin_iter, sci(Some(r.final_error)))?;
    }
    f.flush()?;
    Ok(CompareReport { rows, summary_csv })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &Path) -> RunConfig {
        RunConfig { grid: Some(9), n_obs: 5, max_iter: 4, out: dir.to_path_buf(), ..RunConfig::default() }
    }

    #[test]
    fn hybrid_without_observations_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig { method: Method::Hirgnm, n_obs: 0, ..small(dir.path()) };
        assert!(run(&c).is_err());
    }

    #[test]
    fn report_matches_trajectory() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig { method: Method::Hirgnm, ..small(dir.path()) };
        let r = run(&c).unwrap();
        assert_eq!(r.steps, 5 + 4);
        let text = std::fs::read_to_string(&r.trajectory_csv).unwrap();
        let min = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(4).unwrap().parse::<f64>().unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(min, r.min_rel_error.unwrap());
        assert!(r.best_csv.is_some());
    }

    #[test]
    fn singleton_sweep_reproduces_run() {
        let dir = tempfile::tempdir().unwrap();
        let base = RunConfig { method: Method::Dirgnm, beta: 0.6, ..small(&dir.path().join("run")) };
        let r = run(&base).unwrap();
        let sweep = sweep_beta(&RunConfig { out: dir.path().join("sweep"), ..base.clone() }, &[0.6]).unwrap();
        let s = sweep.members[0].result.as_ref().unwrap();
        assert_eq!(std::fs::read(&r.trajectory_csv).unwrap(), std::fs::read(&s.trajectory_csv).unwrap());
    }

    #[test]
    fn sweep_members_share_observations() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig { method: Method::Dirgnm, ..small(dir.path()) };
        let sweep = sweep_beta(&c, &[0.6, 0.8, 1.2, 3.0]).unwrap();
        let sums: Vec<u64> = sweep.members.iter().map(|m| m.result.as_ref().unwrap().observation_checksum).collect();
        assert!(sums.windows(2).all(|w| w[0] == w[1]));
        let text = std::fs::read_to_string(&sweep.summary_csv).unwrap();
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn sweep_needs_dynamic_method() {
        let dir = tempfile::tempdir().unwrap();
        assert!(sweep_beta(&small(dir.path()), &[1.0]).is_err());
    }

    #[test]
    fn noise_free_compare_coincides() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig { sigma: Some(0.0), ..small(dir.path()) };
        let rep = compare(&c).unwrap();
        let nf = rep.row("cirgnm_noise_free").unwrap();
        for name in ["cirgnm_single", "cirgnm_average"] {
            let r = rep.row(name).unwrap();
            assert!((r.min_error - nf.min_error).abs() < 1e-10 * nf.min_error);
            assert_eq!(r.argmin_iter, nf.argmin_iter);
        }
    }
}
