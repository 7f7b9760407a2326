use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use super::gamma::{gamma_mass, gamma_pdf, gamma_sf};
use crate::{Error, Result};

/// Accuracy controls for [`integrate_gamma_weighted`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub relative_tolerance: f64,
    pub max_subdivisions: usize,
}

impl QuadratureSpec {
    pub fn new(relative_tolerance: f64, max_subdivisions: usize) -> Result<Self> {
        if !(relative_tolerance > 0.0) {
            return Err(Error::invalid("relative tolerance must be positive"));
        }
        if max_subdivisions == 0 {
            return Err(Error::invalid("max subdivisions must be at least 1"));
        }
        Ok(Self {
            relative_tolerance,
            max_subdivisions,
        })
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            relative_tolerance: 1e-10,
            max_subdivisions: 4000,
        }
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15(f: &mut impl FnMut(f64) -> f64, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) over `[lo, hi]`, seeded with the
/// given breakpoints. Returns `(value, error estimate)`.
fn adaptive(
    f: &mut impl FnMut(f64) -> f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<(f64, f64)> {
    let mut heap = BinaryHeap::new();
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod15(f, w[0], w[1]));
        }
    }
    let mut splits = 0usize;
    loop {
        let value: f64 = heap.iter().map(|s| s.value).sum();
        let error: f64 = heap.iter().map(|s| s.error).sum();
        if error <= spec.relative_tolerance * value.abs() || error < f64::MIN_POSITIVE {
            return Ok((value, error));
        }
        if splits >= spec.max_subdivisions {
            return Err(Error::NonConvergence {
                estimate: value,
                error_estimate: error,
            });
        }
        let worst = heap.pop().expect("non-empty segment heap");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // interval cannot be split further in floating point
            return Err(Error::NonConvergence {
                estimate: value,
                error_estimate: error,
            });
        }
        heap.push(kronrod15(f, worst.lo, mid));
        heap.push(kronrod15(f, mid, worst.hi));
        splits += 1;
    }
}

/// `∫₀^∞ g(x) x^{t-1} e^{-x} / Γ(t) dx`, i.e. `E[g(X)]` for `X ~ Gamma(t, 1)`.
///
/// The range is truncated at the first `X_max` (by doubling) where the
/// neglected mass, weighted by the size of `g` beyond the cut, falls under a
/// tenth of the requested tolerance. `[0, X_max]` is pre-split geometrically
/// towards the origin so that integrands concentrated near zero (high-SNR
/// error probabilities) are resolved without exhausting the subdivision
/// budget.
pub fn integrate_gamma_weighted(
    g: impl Fn(f64) -> f64,
    t: u32,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if t == 0 {
        return Err(Error::invalid("gamma shape t must be at least 1"));
    }
    let mut x_max = 2.0 * f64::from(t) + 16.0;
    loop {
        let mut breakpoints: Vec<f64> = (0..=24).rev().map(|k| x_max * 0.25f64.powi(k)).collect();
        breakpoints.insert(0, 0.0);
        let mut integrand = |x: f64| {
            let w = gamma_pdf(t, x);
            if w == 0.0 {
                0.0
            } else {
                g(x) * w
            }
        };
        let (value, _) = adaptive(&mut integrand, &breakpoints, spec)?;
        let scale = [x_max, 2.0 * x_max, 4.0 * x_max]
            .iter()
            .map(|&x| g(x).abs())
            .fold(0.0, f64::max);
        let tail = scale * gamma_sf(t, x_max);
        if tail <= 0.1 * spec.relative_tolerance * value.abs() || tail == 0.0 {
            return Ok(value);
        }
        if x_max > 1e4 {
            return Err(Error::NonConvergence {
                estimate: value,
                error_estimate: tail,
            });
        }
        x_max *= 2.0;
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                let jf = j as f64;
                p0 = ((2.0 * jf + 1.0) * z * p1 - jf * p2) / (jf + 1.0);
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

const CRAIG_PANELS: usize = 4;
const CRAIG_NODES: usize = 20;

/// Gauss–Legendre nodes (angles) and weights (already divided by π) for
/// Craig's representation `Q(√(2s)) = (1/π) ∫₀^{π/2} exp(-s / sin²θ) dθ`.
fn craig_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let (x, w) = gauss_legendre(CRAIG_NODES);
        let width = FRAC_PI_2 / CRAIG_PANELS as f64;
        let mut rule = Vec::with_capacity(CRAIG_PANELS * CRAIG_NODES);
        for panel in 0..CRAIG_PANELS {
            let center = width * (panel as f64 + 0.5);
            for (xi, wi) in x.iter().zip(&w) {
                let theta = center + 0.5 * width * xi;
                let s = theta.sin();
                rule.push((s * s, 0.5 * width * wi / PI));
            }
        }
        rule
    })
}

/// `E[Q(√(2 X γ)) ; a ≤ X < b]` for `X ~ Gamma(t, 1)`.
///
/// This is the BPSK error probability at SNR `γ‖h‖²` restricted to a band
/// of channel norms. With Craig's form of `Q` the inner expectation is an
/// incomplete gamma function, leaving a smooth integral over `θ ∈ (0, π/2)`.
pub fn q_gamma_segment(t: u32, gamma: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if gamma <= 0.0 {
        return 0.5 * gamma_mass(t, a, b);
    }
    let tf = -(f64::from(t));
    craig_rule()
        .iter()
        .map(|&(sin2, w)| {
            let k = 1.0 + gamma / sin2;
            let scaled_b = if b.is_infinite() { b } else { k * b };
            w * k.powf(tf) * gamma_mass(t, k * a, scaled_b)
        })
        .sum()
}
