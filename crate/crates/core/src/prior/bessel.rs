//! Modified Bessel functions of the second kind, integer order.
//!
//! `K_0` and `K_1` come from the ascending series for `x ≤ 2` and from
//! Steed's evaluation of the continued fraction CF2 (Thompson & Barnett,
//! 1987) for `x > 2`; both reach close to machine precision. Higher orders use
//! the forward recurrence `K_{n+1}(x) = K_{n−1}(x) + (2n/x) K_n(x)`, which is
//! stable for `K`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const MAX_TERMS: usize = 500;

/// `(K_0(x), K_1(x))` for `0 < x ≤ 2`.
fn k01_series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let log_half = (0.5 * x).ln();
    // K_0 = −(ln(x/2) + γ) I_0 + Σ q^k/(k!)² H_k
    // K_1 = 1/x + ln(x/2) I_1 − (x/4) Σ q^k/(k!(k+1)!) (ψ(k+1) + ψ(k+2))
    let mut i0 = 0.0;
    let mut i1 = 0.0;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut term = 1.0; // q^k / (k!)²
    let mut harmonic = 0.0; // H_k
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        let term1 = term / (kf + 1.0); // q^k / (k!(k+1)!)
        let psi_k1 = harmonic - EULER_GAMMA;
        let psi_k2 = psi_k1 + 1.0 / (kf + 1.0);
        i0 += term;
        i1 += term1;
        s0 += term * harmonic;
        s1 += term1 * (psi_k1 + psi_k2);
        if term < f64::EPSILON * i0 * 1e-2 && k > 2 {
            break;
        }
        harmonic += 1.0 / (kf + 1.0);
        term *= q / ((kf + 1.0) * (kf + 1.0));
    }
    let i1 = 0.5 * x * i1;
    let k0 = -(log_half + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + log_half * i1 - 0.25 * x * s1;
    (k0, k1)
}

/// `(K_0(x), K_1(x))` for `x > 2` via CF2 with order 0.
fn k01_cf2(x: f64) -> (f64, f64) {
    let v = 0.0_f64;
    let mut a = v * v - 0.25;
    let mut b = 2.0 * (x + 1.0);
    let mut d = 1.0 / b;
    let mut delta = d;
    let mut f = d;
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut q = -a;
    let mut c = -a;
    let mut s = 1.0 + q * delta;
    for k in 2..MAX_TERMS {
        let kf = k as f64;
        a -= 2.0 * (kf - 1.0);
        b += 2.0;
        d = 1.0 / (b + a * d);
        delta *= b * d - 1.0;
        f += delta;
        let t = (prev - (b - 2.0) * cur) / a;
        prev = cur;
        cur = t;
        c *= -a / kf;
        q += c * t;
        s += q * delta;
        if (q * delta).abs() < 0.5 * f64::EPSILON * s.abs() {
            break;
        }
    }
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (0.5 + v + x + (v * v - 0.25) * f) / x;
    (k0, k1)
}

fn k01(x: f64) -> (f64, f64) {
    if x <= 2.0 {
        k01_series(x)
    } else {
        k01_cf2(x)
    }
}

/// `K_n(x)` for integer `n ≥ 0` and `x > 0`.
pub fn bessel_k(order: u32, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::BesselDomain(x));
    }
    let (k0, k1) = k01(x);
    if order == 0 {
        return Ok(k0);
    }
    let (mut prev, mut cur) = (k0, k1);
    for n in 1..order {
        let next = prev + 2.0 * n as f64 / x * cur;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}
