//! The data model: exact data, sequential noisy observations `Y_n`, their
//! running averages `Z_n`, and the misfit functional `S(g; W)`.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};

/// A point of observation space: exact data, one observation, or an average.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsVector(Vec<f64>);

impl ObsVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("observation entry {k} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for ObsVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Noise standard deviation and the seed of the observation stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    sigma: f64,
    seed: u64,
}

impl NoiseConfig {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("noise sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(Self { sigma, seed })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Draws `Y_n = y† + σ ξ_n` with `ξ_n` i.i.d. standard normal entries.
///
/// Each index `n` reads its own ChaCha8 stream (key from `seed`, stream id
/// `n`), and normals come from the ziggurat sampler of `rand_distr`, so any
/// single `Y_n` can be regenerated without replaying `Y_1 … Y_{n-1}`.
pub fn sample_observation(y_true: &ObsVector, noise: &NoiseConfig, n: usize) -> ObsVector {
    if noise.sigma == 0.0 {
        return y_true.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(n as u64);
    let values = y_true
        .0
        .iter()
        .map(|&y| {
            let xi: f64 = StandardNormal.sample(&mut rng);
            y + noise.sigma * xi
        })
        .collect();
    ObsVector(values)
}

/// Infinite iterator over `Y_1, Y_2, …` for fixed exact data and noise.
#[derive(Debug, Clone)]
pub struct SyntheticStream {
    y_true: ObsVector,
    noise: NoiseConfig,
    next: usize,
}

impl SyntheticStream {
    pub fn new(y_true: ObsVector, noise: NoiseConfig) -> Self {
        Self { y_true, noise, next: 1 }
    }

    pub fn exact(&self) -> &ObsVector {
        &self.y_true
    }

    pub fn noise(&self) -> NoiseConfig {
        self.noise
    }

    /// `Y_n` without advancing the iterator.
    pub fn observation(&self, n: usize) -> ObsVector {
        sample_observation(&self.y_true, &self.noise, n)
    }

    /// `Z_n` computed by the running-average recursion over `Y_1 … Y_n`.
    pub fn average(&self, n: usize) -> Result<AveragedData> {
        let mut z = AveragedData::empty(self.y_true.len());
        for k in 1..=n {
            z.push(&self.observation(k))?;
        }
        Ok(z)
    }
}

impl Iterator for SyntheticStream {
    type Item = ObsVector;

    fn next(&mut self) -> Option<ObsVector> {
        let y = self.observation(self.next);
        self.next += 1;
        Some(y)
    }
}

/// Running mean `Z_n` of the first `count` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedData {
    mean: ObsVector,
    count: usize,
}

impl AveragedData {
    /// The state before any observation arrived (`count = 0`).
    pub fn empty(dim: usize) -> Self {
        Self { mean: ObsVector::zeros(dim), count: 0 }
    }

    pub fn mean(&self) -> &ObsVector {
        &self.mean
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `Z_{n+1} = (n Z_n + Y_{n+1}) / (n + 1)`.
    pub fn push(&mut self, y: &ObsVector) -> Result<()> {
        check_len(self.mean.len(), y.len())?;
        let n = self.count as f64;
        let denom = n + 1.0;
        for (z, &v) in self.mean.0.iter_mut().zip(&y.0) {
            *z = (n * *z + v) / denom;
        }
        self.count += 1;
        Ok(())
    }
}

pub fn average_update(z: &AveragedData, y_new: &ObsVector) -> Result<AveragedData> {
    let mut next = z.clone();
    next.push(y_new)?;
    Ok(next)
}

/// `S(g; w) = ½‖g‖² − ⟨g, w⟩` in the supplied observation inner product.
pub fn misfit(g: &[f64], w: &[f64], inner: impl Fn(&[f64], &[f64]) -> f64) -> Result<f64> {
    check_len(g.len(), w.len())?;
    Ok(0.5 * inner(g, g) - inner(g, w))
}

/// Writes observations one per row under a `n,y0,y1,…` header.
pub fn write_observations(path: &Path, observations: &[ObsVector]) -> Result<()> {
    let dim = observations.first().map_or(0, ObsVector::len);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["n".to_string()];
    header.extend((0..dim).map(|k| format!("y{k}")));
    w.write_record(&header)?;
    for (n, y) in observations.iter().enumerate() {
        check_len(dim, y.len())?;
        let mut row = vec![(n + 1).to_string()];
        row.extend(y.0.iter().map(|v| format!("{v:.16e}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_observations(path: &Path) -> Result<Vec<ObsVector>> {
    let bad = |reason: String| Error::Format { path: path.display().to_string(), reason };
    let mut r = csv::Reader::from_path(path)?;
    let dim = r.headers()?.len().checked_sub(1).ok_or_else(|| bad("missing header".into()))?;
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        if record.len() != dim + 1 {
            return Err(bad(format!("row has {} columns, header declares {}", record.len(), dim + 1)));
        }
        let values = record
            .iter()
            .skip(1)
            .map(|t| t.trim().parse::<f64>().map_err(|e| bad(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        out.push(ObsVector::new(values)?);
    }
    Ok(out)
}
