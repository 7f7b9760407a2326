//! Evaluators for the achievability and converse bounds, the constants they
//! depend on, and the codebook-resolution schedule `δ(P)`.
//!
//! Logarithms of `P` are natural; feedback lengths use base 2.

use serde::{Deserialize, Serialize};

use crate::estimate::{ser_full_analytic, ser_open_analytic};
use crate::numerics::{bisect_decreasing, fit_loglog, gamma_int, minimize_1d, q_function};
use crate::{Error, Result};

/// `C₁ = min_x Q(x) e^{x²}` and its minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C1 {
    pub value: f64,
    pub argmin: f64,
}

/// The largest `C₁` with `Q(x) ≥ C₁ e^{-x²}` for all real `x`. For `x < 0`
/// the product exceeds ½, so the search runs on `[0, 5]`.
pub fn derive_c1() -> C1 {
    let (argmin, value) = minimize_1d(|x| q_function(x) * (x * x).exp(), 0.0, 5.0, 1e-10)
        .expect("static bracket is valid");
    C1 { value, argmin }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop1Bounds {
    /// Upper bound on `SER(VLQ) - SER(FLQ)`: `P^{-(t+1)}`.
    pub ser_slack: f64,
    /// `1 + (t+1) |B| log₂(4|B|) ln P / P`.
    pub rate_bound: f64,
}

/// Penalty of the variable-length beamforming quantizer over the fixed-length
/// one with the same codebook. Meaningful for `P > 1`.
pub fn prop1_bounds(cardinality: usize, t: usize, p: f64) -> Prop1Bounds {
    let b = cardinality as f64;
    let t1 = t as f64 + 1.0;
    Prop1Bounds {
        ser_slack: p.powf(-t1),
        rate_bound: 1.0 + t1 * b * (4.0 * b).log2() * p.ln() / p,
    }
}

/// `φ(δ) = (t+1) C₀ δ^{-2t} log₂(4 C₀ δ^{-2t})`.
pub fn phi(delta: f64, t: usize, c0: f64) -> f64 {
    let u = c0 * delta.powf(-2.0 * t as f64);
    (t as f64 + 1.0) * u * (4.0 * u).log2()
}

/// Largest `δ` on which `φ` is used. `φ` is decreasing only while
/// `C₀ δ^{-2t} > 1/(4e)`, which covers all of `(0, 1)` when `C₀ ≥ 1/(4e)`.
pub fn schedule_upper_delta(t: usize, c0: f64) -> f64 {
    let knee = (4.0 * std::f64::consts::E * c0).powf(1.0 / (2.0 * t as f64));
    knee.min(0.99)
}

/// `δ = φ^{-1}(f(P))` by bisection on the decreasing branch of `φ`.
///
/// Fails when `fP ≤ φ(δ_max)` with `δ_max` from [`schedule_upper_delta`].
pub fn delta_schedule(fp: f64, t: usize, c0: f64) -> Result<f64> {
    if t == 0 {
        return Err(Error::invalid("antenna count must be at least 1"));
    }
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::invalid(format!("C0 must be positive, got {c0}")));
    }
    let hi = schedule_upper_delta(t, c0);
    let floor = phi(hi, t, c0);
    if !(fp > floor) || !fp.is_finite() {
        return Err(Error::invalid(format!(
            "f(P) = {fp} is below the range of phi (phi({hi}) = {floor})"
        )));
    }
    // work in ln φ; for large f(P) the root sits at tiny δ
    let target = fp.ln();
    let g = |d: f64| phi(d, t, c0).ln() - target;
    let mut lo = hi * 0.5;
    while g(lo) < 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::invalid(format!("f(P) = {fp} too large to invert")));
        }
    }
    // the relative bracket width bounds |φ(δ) - f(P)| / f(P)
    let root = bisect_decreasing(g, lo, hi, 1e-14 * lo)?;
    Ok(root)
}

/// Growth function for the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleFn {
    #[serde(rename = "logP")]
    LogP,
    #[serde(rename = "sqrtP")]
    SqrtP,
}

impl ScheduleFn {
    pub fn eval(self, p: f64) -> f64 {
        match self {
            ScheduleFn::LogP => p.ln(),
            ScheduleFn::SqrtP => p.sqrt(),
        }
    }
}

/// `δ(P)` for every power of a grid.
pub fn schedule_grid(f: ScheduleFn, p_grid: &[f64], t: usize, c0: f64) -> Result<Vec<f64>> {
    p_grid.iter().map(|&p| delta_schedule(f.eval(p), t, c0)).collect()
}

/// Rate budget of the converse, `t ln P / (13 P)`.
pub fn thm3_rate_budget(t: usize, p: f64) -> f64 {
    t as f64 * p.ln() / (13.0 * p)
}

/// `C₁ exp(-6 P R) / (3 P)`: SER lower bound for any beamforming quantizer
/// whose rate excess over one bit is at most `R`.
pub fn thm3_converse_lb(p: f64, r: f64, c1: f64) -> f64 {
    c1 * (-6.0 * p * r).exp() / (3.0 * p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm6Constants {
    pub g_open: f64,
    pub g_full: f64,
    pub c3: f64,
    pub d_open: f64,
    pub d_full: f64,
}

/// Powers at which the open-loop and full-CSIT array gains are fitted.
pub const THM6_GRID: [f64; 5] = [1e4, 31_622.776_601_683_792, 1e5, 316_227.766_016_837_95, 1e6];

/// Array gains (at diversity `t`) of the open-loop and full-CSIT precoders
/// from quadrature on [`THM6_GRID`], and `C₃ = ½(1/g_open - 1/g_full)`.
pub fn thm6_constants(t: usize, r: f64) -> Result<Thm6Constants> {
    if !(2..=4).contains(&t) {
        return Err(Error::UnsupportedAntennas(t));
    }
    let p_max = *THM6_GRID.last().expect("non-empty grid");
    let mut open = Vec::with_capacity(THM6_GRID.len());
    let mut full = Vec::with_capacity(THM6_GRID.len());
    for &p in &THM6_GRID {
        open.push((p, ser_open_analytic(t, p, r)?));
        full.push((p, ser_full_analytic(t, p, r)?));
    }
    let fo = fit_loglog(&open)?;
    let ff = fit_loglog(&full)?;
    let tf = t as f64;
    let g_open = 1.0 / (open.last().expect("non-empty").1 * p_max.powf(tf));
    let g_full = 1.0 / (full.last().expect("non-empty").1 * p_max.powf(tf));
    if !(g_open < g_full) {
        return Err(Error::NonConvergence {
            estimate: g_open / g_full,
            error_estimate: 0.0,
        });
    }
    Ok(Thm6Constants {
        g_open,
        g_full,
        c3: 0.5 * (1.0 / g_open - 1.0 / g_full),
        d_open: fo.diversity(),
        d_full: ff.diversity(),
    })
}

/// `SER_FULL (1 + 2tδ)`: covering-codebook SER bound (and the first term
/// of the precoding bound).
pub fn prop3_ser_bound(ser_full: f64, t: usize, delta: f64) -> f64 {
    ser_full * (1.0 + 2.0 * t as f64 * delta)
}

/// `Ĉ₂ = (2 + ⌈Ĉ₀ δ^{-2t}⌉) tᵗ / (Γ(t+1) ln(1/δ))`.
pub fn c2_hat(t: usize, delta: f64, c0: f64) -> f64 {
    let tf = t as f64;
    let count = (c0 * delta.powf(-2.0 * tf)).ceil();
    (2.0 + count) * tf.powf(tf) / (gamma_int(t as u32 + 1) * (1.0 / delta).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop4Bounds {
    /// `SER_FULL (1 + 2tδ) + δ / Pᵗ`.
    pub ser_bound: f64,
    /// `1 + Ĉ₂ δ^{-t} ln(1/δ) / Pᵗ`.
    pub rate_bound: f64,
}

pub fn prop4_bounds(ser_full_r: f64, t: usize, delta: f64, p: f64, c0: f64) -> Prop4Bounds {
    let tf = t as f64;
    Prop4Bounds {
        ser_bound: prop3_ser_bound(ser_full_r, t, delta) + delta / p.powf(tf),
        rate_bound: 1.0 + c2_hat(t, delta, c0) * delta.powf(-tf) * (1.0 / delta).ln() / p.powf(tf),
    }
}

/// Every constant, for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub t: usize,
    pub r: f64,
    pub c0_hat: f64,
    pub c1: f64,
    /// `Ĉ₂` at [`BoundConstants::delta`].
    pub c2_hat: f64,
    pub delta: f64,
    pub c3: f64,
}

impl BoundConstants {
    pub fn evaluate(t: usize, r: f64, c0_hat: f64, delta: f64) -> Result<Self> {
        if !(c0_hat > 0.0) {
            return Err(Error::invalid("C0 must be positive"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid("delta must lie in (0, 1)"));
        }
        Ok(Self {
            t,
            r,
            c0_hat,
            c1: derive_c1().value,
            c2_hat: c2_hat(t, delta, c0_hat),
            delta,
            c3: thm6_constants(t, r)?.c3,
        })
    }
}
