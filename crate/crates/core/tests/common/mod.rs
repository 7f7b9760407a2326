#![allow(dead_code)]

//! Reference values computed independently of the library code.

use std::f64::consts::PI;

/// `erfc(z)` for `z ≥ 0`: positive-term Maclaurin series
/// `erf z = 2/√π e^{-z²} Σ 2ⁿ z^{2n+1} / (2n+1)!!` below 3, Lentz continued
/// fraction above.
pub fn erfc_oracle(z: f64) -> f64 {
    assert!(z >= 0.0);
    if z < 3.0 {
        let mut term = z;
        let mut sum = z;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= 2.0 * z * z / (2.0 * n + 1.0);
            sum += term;
            if term <= 1e-18 * sum {
                break;
            }
        }
        let erf = 2.0 / PI.sqrt() * (-z * z).exp() * sum;
        1.0 - erf
    } else {
        // erfc z = e^{-z²}/√π · 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + …))))
        let tiny = 1e-300;
        let mut f = z;
        let mut c = z;
        let mut d = 0.0;
        for k in 1..500 {
            let a = k as f64 * 0.5;
            d = z + a * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = z + a / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-z * z).exp() / (PI.sqrt() * f)
    }
}

pub fn q_oracle(x: f64) -> f64 {
    let z = x.abs() / 2f64.sqrt();
    let tail = 0.5 * erfc_oracle(z);
    if x >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Closed-form BPSK SER with `t`-branch maximal-ratio combining in Rayleigh
/// fading: `[½(1-μ)]ᵗ Σ_{k<t} C(t-1+k, k) [½(1+μ)]ᵏ`, `μ = √(P/(1+P))`.
pub fn mrc_ser(t: u64, p: f64) -> f64 {
    let mu = (p / (1.0 + p)).sqrt();
    // 1 - μ without cancellation
    let one_minus = 1.0 / ((1.0 + p) * (1.0 + mu));
    let lo = 0.5 * one_minus;
    let hi = 0.5 * (1.0 + mu);
    let sum: f64 = (0..t).map(|k| binomial(t - 1 + k, k) * hi.powi(k as i32)).sum();
    lo.powi(t as i32) * sum
}

/// Two-sided Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// KS critical value at significance 0.001.
pub fn ks_critical(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}
