use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Potential,
    Darcy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthKind {
    Smooth,
    /// Disk and rectangle for the potential problem, channel for Darcy.
    Discontinuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Cirgnm,
    Dirgnm,
    Hirgnm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopKind {
    MaxIter,
    Discrepancy,
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $($name:literal)|+),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($($name)|+ => Ok($ty::$variant),)+
                    other => Err(Error::invalid(format!(concat!("unknown ", stringify!($ty), " '{}'"), other))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let name = match self {
                    $($ty::$variant => [$($name),+][0],)+
                };
                f.write_str(name)
            }
        }
    };
}

keyword_enum!(ProblemKind { Potential => "potential", Darcy => "darcy" });
keyword_enum!(TruthKind { Smooth => "smooth", Discontinuous => "discontinuous" | "channel" });
keyword_enum!(Method { Cirgnm => "cirgnm", Dirgnm => "dirgnm", Hirgnm => "hirgnm" });
keyword_enum!(StopKind { MaxIter => "maxiter", Discrepancy => "discrepancy" });

/// Everything needed to reproduce one run.
///
/// `None` fields fall back to the per-problem defaults: grid 33, noise
/// `5·10⁻⁴` for the potential problem; grid 65 (data 129), noise `2·10⁻³`
/// for Darcy.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub truth: TruthKind,
    pub method: Method,
    pub sigma: Option<f64>,
    pub alpha0: f64,
    pub c_dec: f64,
    pub beta: f64,
    /// Source index for the Hölder-rate schedule, used with `theta`.
    pub nu_src: f64,
    /// When set, the dynamic phase uses the Hölder-rate schedule instead of
    /// `α_0 n^(−β)`.
    pub theta: Option<f64>,
    pub n_obs: usize,
    pub max_iter: usize,
    pub grid: Option<usize>,
    pub data_grid: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
    pub c0: f64,
    pub nu: f64,
    pub ell: f64,
    pub stop: StopKind,
    pub tau: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Potential,
            truth: TruthKind::Smooth,
            method: Method::Cirgnm,
            sigma: None,
            alpha0: 1e-3,
            c_dec: 1.5,
            beta: 1.2,
            nu_src: 0.5,
            theta: None,
            n_obs: 50,
            max_iter: 30,
            grid: None,
            data_grid: None,
            seed: 0,
            out: PathBuf::from("out"),
            c0: 1.0,
            nu: 3.0,
            ell: 0.08,
            stop: StopKind::MaxIter,
            tau: 1.5,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::invalid(format!("bad value '{value}' for {key}")))
}

impl RunConfig {
    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(match self.problem {
            ProblemKind::Potential => 5e-4,
            ProblemKind::Darcy => 2e-3,
        })
    }

    pub fn grid(&self) -> usize {
        self.grid.unwrap_or(match self.problem {
            ProblemKind::Potential => 33,
            ProblemKind::Darcy => 65,
        })
    }

    /// Grid the Darcy data are generated on.
    pub fn data_grid(&self) -> usize {
        self.data_grid.unwrap_or(129)
    }

    /// Sets one option from its textual form. Keys are the long flag names
    /// without dashes; `-` and `_` are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let v = value.trim();
        match key.as_str() {
            "problem" => self.problem = v.parse()?,
            "truth" => self.truth = v.parse()?,
            "method" => self.method = v.parse()?,
            "sigma" => self.sigma = Some(parse(&key, v)?),
            "alpha0" => self.alpha0 = parse(&key, v)?,
            "cdec" | "c-dec" => self.c_dec = parse(&key, v)?,
            "beta" => self.beta = parse(&key, v)?,
            "nu-src" => self.nu_src = parse(&key, v)?,
            "theta" => self.theta = Some(parse(&key, v)?),
            "n-obs" => self.n_obs = parse(&key, v)?,
            "max-iter" => self.max_iter = parse(&key, v)?,
            "grid" => self.grid = Some(parse(&key, v)?),
            "data-grid" => self.data_grid = Some(parse(&key, v)?),
            "seed" => self.seed = parse(&key, v)?,
            "out" => self.out = PathBuf::from(v),
            "c0" => self.c0 = parse(&key, v)?,
            "nu" => self.nu = parse(&key, v)?,
            "ell" => self.ell = parse(&key, v)?,
            "stop" => self.stop = v.parse()?,
            "tau" => self.tau = parse(&key, v)?,
            other => return Err(Error::invalid(format!("unknown option '{other}'"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file; blank lines and `#` comments are
    /// ignored.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
                path: path.display().to_string(),
                reason: format!("line {}: expected key = value", lineno + 1),
            })?;
            self.set(k, v).map_err(|e| Error::Format {
                path: path.display().to_string(),
                reason: format!("line {}: {e}", lineno + 1),
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_obs == 0 {
            return Err(Error::invalid("n-obs must be >= 1"));
        }
        if self.grid() == 0 || self.data_grid() == 0 {
            return Err(Error::invalid("grid sizes must be >= 1"));
        }
        if !(self.sigma() >= 0.0) || !self.sigma().is_finite() {
            return Err(Error::invalid("sigma must be >= 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keywords_round_trip() {
        for m in [Method::Cirgnm, Method::Dirgnm, Method::Hirgnm] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert_eq!("channel".parse::<TruthKind>().unwrap(), TruthKind::Discontinuous);
        assert!("nope".parse::<ProblemKind>().is_err());
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# comment\nproblem = darcy\nn_obs=7\nbeta = 0.8 # inline\n").unwrap();
        let mut c = RunConfig::default();
        c.apply_file(&path).unwrap();
        c.set("beta", "3").unwrap();
        assert_eq!(c.problem, ProblemKind::Darcy);
        assert_eq!(c.n_obs, 7);
        assert_eq!(c.beta, 3.0);
        assert_eq!(c.grid(), 65);
        assert_eq!(c.sigma(), 2e-3);
    }

    #[test]
    fn bad_file_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        std::fs::write(&path, "grid 5\n").unwrap();
        assert!(matches!(RunConfig::default().apply_file(&path), Err(Error::Format { .. })));
        std::fs::write(&path, "colour = red\n").unwrap();
        assert!(RunConfig::default().apply_file(&path).is_err());
    }
}
