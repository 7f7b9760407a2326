//! Gamma(t, 1) distribution helpers for integer shape `t`.
//!
//! `‖h‖²` of a `CN(0, I_t)` channel is Gamma(t, 1), so these show up in
//! every semi-analytic SER and rate expression.

/// `Γ(t) = (t-1)!` for integer `t ≥ 1`.
pub fn gamma_int(t: u32) -> f64 {
    (1..t).map(f64::from).product()
}

/// Density `x^{t-1} e^{-x} / Γ(t)` of Gamma(t, 1).
pub fn gamma_pdf(t: u32, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return if t == 1 { 1.0 } else { 0.0 };
    }
    ((f64::from(t) - 1.0) * x.ln() - x - ln_gamma_int(t)).exp()
}

fn ln_gamma_int(t: u32) -> f64 {
    (1..t).map(|k| f64::from(k).ln()).sum()
}

/// Upper regularized incomplete gamma `Q(t, y) = P(X > y)`, `X ~ Gamma(t, 1)`.
pub fn gamma_sf(t: u32, y: f64) -> f64 {
    if y <= 0.0 {
        return 1.0;
    }
    if y.is_infinite() {
        return 0.0;
    }
    // e^{-y} Σ_{k<t} y^k / k!, all terms positive.
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..t {
        term *= y / f64::from(k);
        sum += term;
    }
    if y > 700.0 {
        // keep exp from underflowing before the polynomial factor is applied
        return (sum.ln() - y).exp();
    }
    (-y).exp() * sum
}

/// Lower regularized incomplete gamma `P(t, y) = P(X ≤ y)`, `X ~ Gamma(t, 1)`.
///
/// Accurate in relative terms for small `y`, where `1 - Q(t, y)` would cancel.
pub fn gamma_cdf(t: u32, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y.is_infinite() {
        return 1.0;
    }
    if y > f64::from(t) + 1.0 {
        return 1.0 - gamma_sf(t, y);
    }
    // e^{-y} Σ_{k≥t} y^k / k!
    let mut term = 1.0;
    for k in 1..=t {
        term *= y / f64::from(k);
    }
    let mut sum = term;
    let mut k = t;
    loop {
        k += 1;
        term *= y / f64::from(k);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    (-y).exp() * sum
}

/// Probability mass of Gamma(t, 1) on `[a, b]`, computed from whichever tail
/// loses less precision.
pub fn gamma_mass(t: u32, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a <= 0.0 {
        return gamma_cdf(t, b);
    }
    if b.is_infinite() {
        return gamma_sf(t, a);
    }
    if a >= f64::from(t) {
        gamma_sf(t, a) - gamma_sf(t, b)
    } else {
        gamma_cdf(t, b) - gamma_cdf(t, a)
    }
}
