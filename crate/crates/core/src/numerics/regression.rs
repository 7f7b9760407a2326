use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Least-squares line through `(ln P, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_abs_residual: f64,
    /// Smallest and largest linear power used in the fit.
    pub p_range: (f64, f64),
}

impl LogLogFit {
    /// Diversity read off the fit, `-slope`.
    pub fn diversity(&self) -> f64 {
        -self.slope
    }

    /// Array gain `exp(-intercept)` of the model `y = 1 / (g P^d)`.
    pub fn array_gain(&self) -> f64 {
        (-self.intercept).exp()
    }

    pub fn predict(&self, p: f64) -> f64 {
        (self.intercept + self.slope * p.ln()).exp()
    }
}

pub fn fit_loglog(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 2 {
        return Err(Error::invalid("log-log fit needs at least two points"));
    }
    for (i, &(p, y)) in points.iter().enumerate() {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::invalid(format!("point {i}: P must be positive, got {p}")));
        }
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::invalid(format!("point {i}: y must be positive, got {y}")));
        }
        if i > 0 && p <= points[i - 1].0 {
            return Err(Error::invalid("P values must be strictly increasing"));
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(p, _)| p.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, y)| y.ln()).collect();
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let max_abs_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(LogLogFit {
        slope,
        intercept,
        max_abs_residual,
        p_range: (points[0].0, points[points.len() - 1].0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [10.0, 100.0, 1000.0].iter().map(|&p: &f64| (p, 4.0 / (p * p))).collect();
        let fit = fit_loglog(&pts).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12);
        assert!((fit.array_gain() - 0.25).abs() < 1e-12);
        assert!(fit.max_abs_residual < 1e-12);
        assert_eq!(fit.p_range, (10.0, 1000.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_loglog(&[(10.0, 1.0)]).is_err());
        assert!(fit_loglog(&[(10.0, 1.0), (100.0, 0.0)]).is_err());
        assert!(fit_loglog(&[(-1.0, 1.0), (100.0, 1.0)]).is_err());
        assert!(fit_loglog(&[(100.0, 1.0), (10.0, 1.0)]).is_err());
    }
}
