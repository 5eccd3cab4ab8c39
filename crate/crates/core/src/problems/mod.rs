//! Benchmark inverse problems on the unit square.

pub mod darcy;
pub mod potential;

pub use darcy::{DarcyProblem, DarcyTruth};
pub use potential::{PotentialProblem, PotentialTruth};

/// Two Gaussian bumps, heights 1 and 1/2, centred at `(0.3, 0.7)` and
/// `(0.7, 0.35)`.
pub fn two_bumps(x: f64, y: f64) -> f64 {
    (-100.0 * ((x - 0.3).powi(2) + (y - 0.7).powi(2))).exp()
        + 0.5 * (-100.0 * ((x - 0.7).powi(2) + (y - 0.35).powi(2))).exp()
}

/// Neighbour `k ± 1` or `k ± n` of interior node `k`, if it is interior.
#[inline]
pub(crate) fn neighbours(n: usize, k: usize) -> [Option<usize>; 4] {
    let (i, j) = (k % n, k / n);
    [
        (i > 0).then(|| k - 1),
        (i + 1 < n).then(|| k + 1),
        (j > 0).then(|| k - n),
        (j + 1 < n).then(|| k + n),
    ]
}
