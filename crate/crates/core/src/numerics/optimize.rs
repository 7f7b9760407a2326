use crate::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a minimizer of `f` on `[lo, hi]`.
///
/// Returns `(argmin, f(argmin))` once the bracket is narrower than `tol`.
/// For unimodal `f` this is the global minimizer; for monotone `f` it
/// converges to the lower-valued end.
pub fn minimize_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("invalid bracket [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let mut best = (mid, f(mid));
    // a bracket that collapsed onto an end of the interval (monotone f)
    for end in [lo, hi] {
        if (end - mid).abs() <= tol {
            let fe = f(end);
            if fe < best.1 {
                best = (end, fe);
            }
        }
    }
    Ok(best)
}

/// Root of a continuous, strictly decreasing `f` on `[lo, hi]` by bisection.
///
/// Requires `f(lo) ≥ 0 ≥ f(hi)`; stops when the bracket width is below
/// `tol` or after 200 halvings.
pub fn bisect_decreasing(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::invalid(format!("invalid bracket [{lo}, {hi}]")));
    }
    let (flo, fhi) = (f(lo), f(hi));
    if flo < 0.0 || fhi > 0.0 {
        return Err(Error::invalid(format!(
            "root not bracketed: f({lo}) = {flo}, f({hi}) = {fhi}"
        )));
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a <= tol || m <= a || m >= b {
            break;
        }
        if f(m) >= 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_minimum() {
        let (x, fx) = minimize_1d(|x| (x - 1.0).powi(2), 0.0, 2.0, 1e-9).unwrap();
        assert!((x - 1.0).abs() < 1e-8);
        assert!(fx < 1e-16);
    }

    #[test]
    fn monotone_goes_to_endpoint() {
        let (x, _) = minimize_1d(|x| x, 0.0, 1.0, 1e-9).unwrap();
        assert!(x.abs() < 1e-8);
    }

    #[test]
    fn bad_bracket() {
        assert!(minimize_1d(|x| x, 1.0, 0.0, 1e-9).is_err());
        assert!(bisect_decreasing(|x| x, 0.0, 1.0, 1e-9).is_err());
    }

    #[test]
    fn bisection_finds_root() {
        let r = bisect_decreasing(|x| 2.0 - x * x, 0.0, 3.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }
}
