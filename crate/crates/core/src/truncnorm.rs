//! Sampling from normal distributions truncated to an interval.
//!
//! Moderate truncation uses the inverse CDF on the truncated uniform range,
//! always evaluated on the lower side of the mean so the CDF values stay small
//! and exact. Intervals entirely beyond [`TAIL_SWITCH`] standard deviations use
//! rejection from a shifted exponential proposal.

use rand::distr::{Open01, StandardUniform};
use rand::Rng;

use crate::error::{Error, Result};
use crate::normal::{cdf, inv_cdf};

/// Standardized distance from the mean beyond which the tail sampler is used.
pub const TAIL_SWITCH: f64 = 6.0;

/// Draws from 𝒩(0, 1) restricted to `[a, b]`, `a < b`.
pub fn sample_standard<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    debug_assert!(a < b);
    let z = if a >= TAIL_SWITCH {
        tail(a, b, rng)
    } else if b <= -TAIL_SWITCH {
        -tail(-b, -a, rng)
    } else if a > 0.0 {
        -inverse_lower(-b, -a, rng)
    } else {
        inverse_lower(a, b, rng)
    };
    z.clamp(a, b)
}

/// Inverse-CDF draw for an interval that is not entirely above the mean.
fn inverse_lower<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let pa = cdf(a);
    let pb = cdf(b);
    let u: f64 = rng.sample(Open01);
    if pb > pa {
        inv_cdf(pa + u * (pb - pa))
    } else {
        // interval narrower than CDF resolution: density is flat across it
        a + u * (b - a)
    }
}

/// Rejection sampler for `[a, b]` with `a >= TAIL_SWITCH` (Robert, 1995).
fn tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    // proposal mass of [a, b] under the shifted exponential
    let span = if b.is_finite() {
        -(-rate * (b - a)).exp_m1()
    } else {
        1.0
    };
    loop {
        let u: f64 = rng.sample(Open01);
        let z = a - (-u * span).ln_1p() / rate;
        if z > b {
            continue;
        }
        let v: f64 = rng.sample(StandardUniform);
        let d = z - rate;
        if v <= (-0.5 * d * d).exp() {
            return z;
        }
    }
}

/// Draws from 𝒩(μ, σ²) restricted to `[s, t]`.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    mu: f64,
    sigma: f64,
    s: f64,
    t: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
        return Err(Error::domain(format!("invalid normal parameters mu={mu}, sigma={sigma}")));
    }
    if !(s < t) {
        return Err(Error::domain(format!("truncation interval [{s}, {t}] is empty")));
    }
    let a = (s - mu) / sigma;
    let b = (t - mu) / sigma;
    let z = sample_standard(a, b, rng);
    Ok((mu + sigma * z).clamp(s, t))
}
