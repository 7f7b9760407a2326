//! Complex orthogonal space-time block codes and a symbol-level simulator.
//!
//! The simulator is a cross-check of the conditional SER formula used by
//! the estimators; it is not on any hot path.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{ChannelVector, RngStream};
use crate::numerics::bpsk_ser;
use crate::{Error, Result};

/// One entry of a design matrix: `±s_k` or `±s_k*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignEntry {
    pub symbol: usize,
    pub conjugate: bool,
    pub negative: bool,
}

const fn e(symbol: usize, conjugate: bool, negative: bool) -> Option<DesignEntry> {
    Some(DesignEntry {
        symbol,
        conjugate,
        negative,
    })
}

/// An `n × t` complex orthogonal design carrying `k` symbols per block.
#[derive(Debug, Clone, PartialEq)]
pub struct OstbcDescriptor {
    pub t: usize,
    pub n: usize,
    pub k: usize,
    /// Entry `(row, column)` of the generator, `None` for a zero.
    pub layout: Vec<Vec<Option<DesignEntry>>>,
}

impl OstbcDescriptor {
    /// Code rate `k / n`.
    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// The `n × t` block for symbols `s`.
    pub fn generate(&self, s: &[Complex64]) -> DMatrix<Complex64> {
        assert_eq!(s.len(), self.k, "expected {} symbols", self.k);
        DMatrix::from_fn(self.n, self.t, |i, j| match self.layout[i][j] {
            None => Complex64::new(0.0, 0.0),
            Some(d) => {
                let v = if d.conjugate { s[d.symbol].conj() } else { s[d.symbol] };
                if d.negative {
                    -v
                } else {
                    v
                }
            }
        })
    }

    /// `max |S†S - Σ|s_k|² I|` over the given symbols.
    pub fn orthogonality_defect(&self, s: &[Complex64]) -> f64 {
        let m = self.generate(s);
        let energy: f64 = s.iter().map(|z| z.norm_sqr()).sum();
        let gram = m.adjoint() * m;
        let mut worst: f64 = 0.0;
        for i in 0..self.t {
            for j in 0..self.t {
                let target = if i == j { energy } else { 0.0 };
                worst = worst.max((gram[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// `S` with `s_k = 1` and every other symbol zero. For real symbols the
    /// block is `Σ s_k C_k`.
    fn real_component(&self, k: usize) -> DMatrix<Complex64> {
        let mut s = vec![Complex64::new(0.0, 0.0); self.k];
        s[k] = Complex64::new(1.0, 0.0);
        self.generate(&s)
    }
}

/// Alamouti for two antennas, the rate-¾ design (or three of its columns)
/// for three and four.
pub fn ostbc_generator(t: usize) -> Result<OstbcDescriptor> {
    let layout: Vec<Vec<Option<DesignEntry>>> = match t {
        2 => vec![
            vec![e(0, false, false), e(1, false, false)],
            vec![e(1, true, true), e(0, true, false)],
        ],
        3 | 4 => {
            let full = [
                [e(0, false, false), e(1, false, false), e(2, false, false), None],
                [e(1, true, true), e(0, true, false), None, e(2, false, false)],
                [e(2, true, true), None, e(0, true, false), e(1, false, true)],
                [None, e(2, true, true), e(1, true, false), e(0, false, false)],
            ];
            full.iter().map(|row| row[..t].to_vec()).collect()
        }
        _ => return Err(Error::UnsupportedAntennas(t)),
    };
    let n = layout.len();
    let k = if t == 2 { 2 } else { 3 };
    Ok(OstbcDescriptor { t, n, k, layout })
}

/// Code rate used for precoding with `t` antennas: 1 for one or two
/// antennas, ¾ for three or four.
pub fn code_rate(t: usize) -> Result<f64> {
    match t {
        1 => Ok(1.0),
        _ => Ok(ostbc_generator(t)?.rate()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolMcResult {
    pub errors: u64,
    pub symbols: u64,
    pub ser: f64,
    /// Binomial standard error `√(p̂(1-p̂)/N)`.
    pub stderr: f64,
    /// Conditional SER `Q(√(2‖Xh‖²P/r))` for the same `X`, `h`, `P`.
    pub analytic: f64,
}

const BLOCKS_PER_CHUNK: usize = 8192;

/// Send `blocks` random BPSK blocks through `y = S X h √(P/r) + n` and
/// detect each symbol with the matched filter `Re(c_k† y)`, `c_k = C_k X h`.
pub fn simulate_symbol_mc(
    x: &DMatrix<Complex64>,
    h: &ChannelVector,
    p: f64,
    code: &OstbcDescriptor,
    blocks: usize,
    stream: RngStream,
) -> Result<SymbolMcResult> {
    if blocks == 0 {
        return Err(Error::invalid("need at least one block"));
    }
    if x.nrows() != code.t || x.ncols() != h.t() {
        return Err(Error::invalid("precoder, channel and code dimensions disagree"));
    }
    let g = x * DVector::from_column_slice(h.entries());
    let r = code.rate();
    let amplitude = (p / r).sqrt();
    let filters: Vec<DVector<Complex64>> = (0..code.k).map(|k| code.real_component(k) * &g).collect();
    let chunks = blocks.div_ceil(BLOCKS_PER_CHUNK);
    let errors: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = BLOCKS_PER_CHUNK.min(blocks - c * BLOCKS_PER_CHUNK);
            let mut rng = stream.substream(c as u64).rng();
            let mut errs = 0u64;
            let mut s = vec![0.0; code.k];
            let mut y = DVector::<Complex64>::zeros(code.n);
            for _ in 0..count {
                s.iter_mut().for_each(|v| *v = rng.bpsk());
                for yi in y.iter_mut() {
                    *yi = rng.complex_gaussian();
                }
                for (sk, ck) in s.iter().zip(&filters) {
                    y.axpy(Complex64::new(amplitude * sk, 0.0), ck, Complex64::new(1.0, 0.0));
                }
                for (sk, ck) in s.iter().zip(&filters) {
                    let stat = ck.dotc(&y).re;
                    if stat * sk <= 0.0 {
                        errs += 1;
                    }
                }
            }
            errs
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let symbols = (blocks * code.k) as u64;
    let ser = errors as f64 / symbols as f64;
    Ok(SymbolMcResult {
        errors,
        symbols,
        ser,
        stderr: (ser * (1.0 - ser) / symbols as f64).sqrt(),
        analytic: bpsk_ser(g.norm_squared() * p / r),
    })
}
