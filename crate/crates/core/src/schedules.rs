//! Regularization-parameter schedules `α_n` and stopping rules.

use crate::error::{Error, Result};

/// Rule producing the regularization parameter `α_n`.
///
/// All variants satisfy `0 < α_0 ≤ 1`, are strictly positive and
/// nonincreasing in `n`, and keep `α_n / α_{n+1}` bounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegSchedule {
    /// `α_n = α_0 · c_dec^(−n)`, `n ≥ 0`.
    Geometric { alpha0: f64, c_dec: f64 },
    /// `α_n = α_0 · n^(−β)`, `n ≥ 1`.
    Power { alpha0: f64, beta: f64 },
    /// `α_n = α_0 · n^(−(1−ν)/(2−ν−θ(1−ν)))`, `n ≥ 1`, for a Hölder source
    /// condition of index `ν` and smoothing index `θ`.
    HolderRate { alpha0: f64, nu_src: f64, theta: f64 },
}

fn check_alpha0(alpha0: f64) -> Result<()> {
    if alpha0 > 0.0 && alpha0 <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha0 must lie in (0, 1], got {alpha0}")))
    }
}

impl RegSchedule {
    pub fn geometric(alpha0: f64, c_dec: f64) -> Result<Self> {
        check_alpha0(alpha0)?;
        if !(c_dec > 1.0) || !c_dec.is_finite() {
            return Err(Error::invalid(format!("c_dec must be > 1, got {c_dec}")));
        }
        Ok(Self::Geometric { alpha0, c_dec })
    }

    pub fn power(alpha0: f64, beta: f64) -> Result<Self> {
        check_alpha0(alpha0)?;
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::invalid(format!("beta must be > 0, got {beta}")));
        }
        Ok(Self::Power { alpha0, beta })
    }

    pub fn holder_rate(alpha0: f64, nu_src: f64, theta: f64) -> Result<Self> {
        check_alpha0(alpha0)?;
        if !(0.0..1.0).contains(&nu_src) {
            return Err(Error::invalid(format!("source index nu must lie in [0, 1), got {nu_src}")));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::invalid(format!("theta must lie in (0, 1), got {theta}")));
        }
        Ok(Self::HolderRate { alpha0, nu_src, theta })
    }

    pub fn alpha0(&self) -> f64 {
        match *self {
            Self::Geometric { alpha0, .. } | Self::Power { alpha0, .. } | Self::HolderRate { alpha0, .. } => {
                alpha0
            }
        }
    }

    /// First admissible index: 0 for the geometric rule, 1 for the power rules.
    pub fn first_index(&self) -> usize {
        match self {
            Self::Geometric { .. } => 0,
            _ => 1,
        }
    }

    pub fn alpha(&self, n: usize) -> Result<f64> {
        match *self {
            Self::Geometric { alpha0, c_dec } => Ok(alpha_geometric(alpha0, c_dec, n)),
            Self::Power { alpha0, beta } => alpha_power(alpha0, beta, n),
            Self::HolderRate { alpha0, nu_src, theta } => alpha_holder(alpha0, nu_src, theta, n),
        }
    }
}

pub fn alpha_geometric(alpha0: f64, c_dec: f64, n: usize) -> f64 {
    alpha0 * c_dec.powi(-(n as i32))
}

pub fn alpha_power(alpha0: f64, beta: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("power schedule starts at n = 1"));
    }
    Ok(alpha0 * (n as f64).powf(-beta))
}

/// Decay exponent `(1 − ν) / (2 − ν − θ(1 − ν))` of the Hölder-rate rule.
pub fn holder_exponent(nu_src: f64, theta: f64) -> f64 {
    (1.0 - nu_src) / (2.0 - nu_src - theta * (1.0 - nu_src))
}

pub fn alpha_holder(alpha0: f64, nu_src: f64, theta: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("Hölder-rate schedule starts at n = 1"));
    }
    Ok(alpha0 * (n as f64).powf(-holder_exponent(nu_src, theta)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop once `n ≥ m`.
    MaxIter(usize),
    /// Stop once `‖F(û_n) − W‖ ≤ τ · noise_norm_estimate`.
    Discrepancy { tau: f64, noise_norm_estimate: f64 },
}

impl StopRule {
    pub fn max_iter(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("MaxIter needs m >= 1"));
        }
        Ok(Self::MaxIter(m))
    }

    pub fn discrepancy(tau: f64, noise_norm_estimate: f64) -> Result<Self> {
        if !(tau > 1.0) {
            return Err(Error::invalid(format!("discrepancy tau must be > 1, got {tau}")));
        }
        if !(noise_norm_estimate >= 0.0) {
            return Err(Error::invalid("noise norm estimate must be >= 0"));
        }
        Ok(Self::Discrepancy { tau, noise_norm_estimate })
    }
}

/// White-noise norm of an average of `count` observations, `σ·√(‖1‖² / count)`
/// where `‖1‖²` is the squared norm of the all-ones vector in the observation
/// inner product (`dim_obs` for the Euclidean product).
pub fn noise_norm_estimate(sigma: f64, ones_norm_sq: f64, count: usize) -> f64 {
    sigma * (ones_norm_sq / count.max(1) as f64).sqrt()
}

pub fn should_stop(rule: &StopRule, n: usize, residual_norm: f64) -> bool {
    match *rule {
        StopRule::MaxIter(m) => n >= m,
        StopRule::Discrepancy { tau, noise_norm_estimate } => residual_norm <= tau * noise_norm_estimate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_values() {
        assert_eq!(alpha_geometric(1e-3, 1.5, 0), 1e-3);
        assert!((alpha_geometric(1e-3, 1.5, 1) - 6.6667e-4).abs() < 1e-8);
        for n in 0..=50 {
            let r = alpha_geometric(0.7, 1.5, n) / alpha_geometric(0.7, 1.5, n + 1);
            assert!((r - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn power_values() {
        assert_eq!(alpha_power(1e-3, 1.2, 1).unwrap(), 1e-3);
        let a10 = alpha_power(1e-3, 1.2, 10).unwrap();
        assert!((a10 - 6.3096e-5).abs() < 1e-9, "{a10}");
        assert!(alpha_power(1e-3, 1.2, 0).is_err());
        let beta = 1.2;
        let bound = 2f64.powf(beta);
        for n in 1..=10_000 {
            let r = alpha_power(1e-3, beta, n).unwrap() / alpha_power(1e-3, beta, n + 1).unwrap();
            assert!(r >= 1.0 && r <= bound * (1.0 + 1e-14));
        }
    }

    #[test]
    fn n_alpha_squared_follows_its_power_law() {
        // n·α_n² = α_0² n^(1−2β), which decays for every β > 1/2
        let (alpha0, beta) = (1e-3, 0.75);
        let mut prev = f64::INFINITY;
        for n in 1..=10_000 {
            let a = alpha_power(alpha0, beta, n).unwrap();
            let v = n as f64 * a * a;
            let want = alpha0 * alpha0 * (n as f64).powf(1.0 - 2.0 * beta);
            assert!((v - want).abs() <= 1e-12 * want);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn holder_exponent_cases() {
        assert!((holder_exponent(0.0, 0.5) - 2.0 / 3.0).abs() < 1e-15);
        assert!((holder_exponent(0.5, 0.5) - 0.4).abs() < 1e-15);
        let a10 = alpha_holder(1e-3, 0.5, 0.5, 10).unwrap();
        assert!((a10 - 1e-3 * 10f64.powf(-0.4)).abs() < 1e-18);
    }

    #[test]
    fn holder_exponent_in_unit_interval_on_grid() {
        for i in 0..100 {
            let nu = i as f64 / 100.0;
            for j in 0..100 {
                let theta = (j as f64 + 0.5) / 100.0;
                let e = holder_exponent(nu, theta);
                assert!(e > 0.0 && e < 1.0, "nu={nu} theta={theta} e={e}");
            }
        }
    }

    #[test]
    fn constructors_validate() {
        assert!(RegSchedule::geometric(0.0, 1.5).is_err());
        assert!(RegSchedule::geometric(1.5, 1.5).is_err());
        assert!(RegSchedule::geometric(1e-3, 1.0).is_err());
        assert!(RegSchedule::power(1e-3, 0.0).is_err());
        assert!(RegSchedule::holder_rate(1e-3, 1.0, 0.5).is_err());
        assert!(RegSchedule::holder_rate(1e-3, 0.2, 1.0).is_err());
        assert!(StopRule::discrepancy(1.0, 0.1).is_err());
        assert!(StopRule::max_iter(0).is_err());
    }

    #[test]
    fn schedules_are_positive_nonincreasing_and_start_at_alpha0() {
        let all = [
            RegSchedule::geometric(1e-3, 1.5).unwrap(),
            RegSchedule::power(1e-3, 0.75).unwrap(),
            RegSchedule::holder_rate(1e-3, 0.3, 0.6).unwrap(),
        ];
        for s in all {
            let first = s.first_index();
            assert_eq!(s.alpha(first).unwrap(), s.alpha0());
            let mut prev = f64::INFINITY;
            for n in first..first + 200 {
                let a = s.alpha(n).unwrap();
                assert!(a > 0.0 && a <= prev);
                prev = a;
            }
        }
    }

    #[test]
    fn stop_rules() {
        assert!(should_stop(&StopRule::MaxIter(5), 5, 1.0));
        assert!(!should_stop(&StopRule::MaxIter(5), 4, 1.0));
        let d = StopRule::discrepancy(1.2, 0.1).unwrap();
        assert!(!should_stop(&d, 1, 0.13));
        assert!(should_stop(&d, 1, 0.11));
        let exact = StopRule::discrepancy(1.2, 0.0).unwrap();
        assert!(!should_stop(&exact, 1, 1e-300));
        assert!(should_stop(&exact, 1, 0.0));
    }

    #[test]
    fn noise_estimate_is_white_noise_rms() {
        assert!((noise_norm_estimate(0.1, 400.0, 4) - 1.0).abs() < 1e-15);
    }
}
