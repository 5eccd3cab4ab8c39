use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::grid::ParamField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Dynamic,
    Classic,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Dynamic => "dynamic",
            Phase::Classic => "classic",
        })
    }
}

/// State after one Gauss-Newton step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    /// Iteration index within its phase, starting at 1.
    pub iter: usize,
    pub phase: Phase,
    pub alpha: f64,
    /// Number of observations averaged into the datum used by this step.
    pub n_obs_used: usize,
    /// `E_n` against the configured reference, if any.
    pub rel_error: Option<f64>,
    /// `‖F(û_n) − W‖` in the observation norm.
    pub residual_norm: f64,
    /// `S(F(û_n); W)`.
    pub misfit: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    /// Relative error of the starting point.
    pub start_rel_error: Option<f64>,
    /// Iterate of the last step (the start when no step was taken).
    pub final_estimate: ParamField,
    /// Regularization parameter of the last step.
    pub final_alpha: Option<f64>,
    /// Iterate attaining the smallest recorded relative error.
    pub best_estimate: Option<ParamField>,
}

pub const CSV_HEADER: &str = "iter,phase,alpha,n_obs_used,rel_error,residual_norm,misfit";

fn sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "NaN".to_string()
    }
}

impl Trajectory {
    pub(crate) fn start(u_start: ParamField, start_rel_error: Option<f64>) -> Self {
        Self { records: Vec::new(), start_rel_error, final_estimate: u_start, final_alpha: None, best_estimate: None }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &TrajectoryRecord> {
        self.records.iter().filter(move |r| r.phase == phase)
    }

    /// `(record, E_n)` with the smallest relative error among `records`.
    pub fn min_rel_error_in<'a>(
        records: impl Iterator<Item = &'a TrajectoryRecord>,
    ) -> Option<(&'a TrajectoryRecord, f64)> {
        records
            .filter_map(|r| r.rel_error.map(|e| (r, e)))
            .fold(None, |best, (r, e)| match best {
                Some((_, b)) if b <= e => best,
                _ => Some((r, e)),
            })
    }

    pub fn min_rel_error(&self) -> Option<(&TrajectoryRecord, f64)> {
        Self::min_rel_error_in(self.records.iter())
    }

    pub fn final_rel_error(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.rel_error)
    }

    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.iter,
                r.phase,
                sci(r.alpha),
                r.n_obs_used,
                r.rel_error.map_or_else(|| "NaN".to_string(), sci),
                sci(r.residual_norm),
                sci(r.misfit)
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }
}
