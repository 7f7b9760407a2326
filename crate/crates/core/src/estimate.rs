//! SER and feedback-rate estimation over Rayleigh draws.
//!
//! Two estimators share one set of channel draws:
//!
//! * [`Estimator::Pathwise`] averages the conditional SER `Q(√(2·snr(h)))`
//!   and the emitted codeword length over draws of `h`.
//! * [`Estimator::Conditional`] draws only the direction `u = h/‖h‖` and
//!   integrates the independent `‖h‖² ~ Gamma(t, 1)` analytically. Every
//!   encoder here depends on `‖h‖` through a threshold on `‖h‖²`, so the
//!   conditional SER and rate are closed-form incomplete-gamma expressions.
//!   This removes the norm from the Monte Carlo and resolves error rates far
//!   below `1/samples`.
//!
//! Draws are partitioned into fixed-size chunks with one substream each.
//! Chunk statistics are merged in chunk order, so results do not depend on
//! the number of worker threads.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{inner, norm_sqr, sample_channel_into, ChannelVector, RngStream};
use crate::codebook::BeamformingCodebook;
use crate::numerics::{
    bpsk_ser, fit_loglog, gamma_cdf, integrate_gamma_weighted, q_gamma_segment, LogLogFit,
    QuadratureSpec,
};
use crate::quantizer::correlation_extremes;
use crate::{Error, Result};

/// Channel draws per chunk (and per substream).
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    #[default]
    Pathwise,
    Conditional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    BfFull,
    BfFlq,
    BfVlq,
    PcFull,
    PcVlq,
    OpenLoop,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::BfFull => "bf-full",
            Strategy::BfFlq => "bf-flq",
            Strategy::BfVlq => "bf-vlq",
            Strategy::PcFull => "pc-full",
            Strategy::PcVlq => "pc-vlq",
            Strategy::OpenLoop => "open-loop",
        }
    }

    pub fn needs_codebook(self) -> bool {
        matches!(self, Strategy::BfFlq | Strategy::BfVlq | Strategy::PcVlq)
    }

    pub fn is_precoding(self) -> bool {
        matches!(self, Strategy::PcFull | Strategy::PcVlq | Strategy::OpenLoop)
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bf-full" => Strategy::BfFull,
            "bf-flq" => Strategy::BfFlq,
            "bf-vlq" => Strategy::BfVlq,
            "pc-full" => Strategy::PcFull,
            "pc-vlq" => Strategy::PcVlq,
            "open-loop" => Strategy::OpenLoop,
            other => return Err(Error::invalid(format!("unknown strategy {other:?}"))),
        })
    }
}

/// A quantizer to evaluate. Codebook-based strategies carry either one
/// codebook for the whole power grid or one codebook per grid point.
#[derive(Debug, Clone)]
pub struct QuantizerSpec {
    pub strategy: Strategy,
    pub t: usize,
    /// Space-time code rate; 1 for beamforming.
    pub code_rate: f64,
    pub codebooks: Vec<Arc<BeamformingCodebook>>,
    pub label: String,
}

impl QuantizerSpec {
    fn new(strategy: Strategy, t: usize, code_rate: f64, codebooks: Vec<Arc<BeamformingCodebook>>) -> Self {
        Self {
            strategy,
            t,
            code_rate,
            codebooks,
            label: strategy.as_str().to_string(),
        }
    }

    pub fn bf_full(t: usize) -> Self {
        Self::new(Strategy::BfFull, t, 1.0, vec![])
    }

    pub fn bf_flq(cb: Arc<BeamformingCodebook>) -> Self {
        Self::new(Strategy::BfFlq, cb.t(), 1.0, vec![cb])
    }

    pub fn bf_vlq(cb: Arc<BeamformingCodebook>) -> Self {
        Self::new(Strategy::BfVlq, cb.t(), 1.0, vec![cb])
    }

    pub fn pc_full(t: usize, code_rate: f64) -> Self {
        Self::new(Strategy::PcFull, t, code_rate, vec![])
    }

    pub fn pc_vlq(cb: Arc<BeamformingCodebook>, code_rate: f64) -> Self {
        Self::new(Strategy::PcVlq, cb.t(), code_rate, vec![cb])
    }

    pub fn open_loop(t: usize, code_rate: f64) -> Self {
        Self::new(Strategy::OpenLoop, t, code_rate, vec![])
    }

    /// Same strategy with one codebook per grid point.
    pub fn scheduled(strategy: Strategy, code_rate: f64, codebooks: Vec<Arc<BeamformingCodebook>>) -> Result<Self> {
        if !strategy.needs_codebook() {
            return Err(Error::invalid(format!("{strategy} does not use a codebook")));
        }
        let t = codebooks
            .first()
            .ok_or_else(|| Error::invalid("schedule needs at least one codebook"))?
            .t();
        Ok(Self::new(strategy, t, code_rate, codebooks))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Codebook in force at grid point `i`.
    pub fn codebook_at(&self, i: usize) -> Option<&BeamformingCodebook> {
        match self.codebooks.len() {
            0 => None,
            1 => Some(&self.codebooks[0]),
            _ => self.codebooks.get(i).map(|c| c.as_ref()),
        }
    }

    fn validate(&self, grid: &[f64]) -> Result<()> {
        if self.t == 0 {
            return Err(Error::invalid("antenna count must be at least 1"));
        }
        if !(self.code_rate > 0.0 && self.code_rate <= 1.0) {
            return Err(Error::invalid(format!("code rate {} outside (0, 1]", self.code_rate)));
        }
        if self.strategy.needs_codebook() {
            let n = self.codebooks.len();
            if n != 1 && n != grid.len() {
                return Err(Error::invalid(format!(
                    "{}: {n} codebooks for a {}-point grid",
                    self.label,
                    grid.len()
                )));
            }
            if self.codebooks.iter().any(|c| c.t() != self.t) {
                return Err(Error::invalid(format!("{}: codebook dimension mismatch", self.label)));
            }
        }
        if self.strategy == Strategy::BfVlq {
            if let Some(&p) = grid.iter().find(|&&p| p <= 1.0) {
                return Err(Error::invalid(format!("VLQ beamforming needs P > 1, got {p}")));
            }
        }
        Ok(())
    }
}

/// Estimated SER and feedback rate of one quantizer at one power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub quantizer: String,
    pub p: f64,
    pub ser: f64,
    pub ser_stderr: f64,
    /// Expected feedback bits per channel state; infinite for full CSIT.
    pub rate: f64,
    pub rate_stderr: f64,
    pub samples: usize,
}

impl SweepRecord {
    pub fn p_db(&self) -> f64 {
        10.0 * self.p.log10()
    }
}

/// Per-draw outcome of the pathwise estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawOutcome {
    pub snr: f64,
    pub ser: f64,
    /// Feedback bits; `None` for full CSIT.
    pub bits: Option<u32>,
}

/// SNR and feedback length for channel `h` at power `p`, using `cb` where
/// the strategy needs a codebook.
pub fn pathwise_outcome(spec: &QuantizerSpec, cb: Option<&BeamformingCodebook>, h: &[Complex64], p: f64) -> DrawOutcome {
    let t = spec.t as f64;
    let r = spec.code_rate;
    let energy = norm_sqr(h);
    let (snr, bits) = match spec.strategy {
        Strategy::BfFull => (energy * p, None),
        Strategy::PcFull => (energy * p / r, None),
        Strategy::OpenLoop => (energy * p / (t * r), Some(0)),
        Strategy::BfFlq => {
            let cb = cb.expect("FLQ needs a codebook");
            let (_, best, _) = correlation_extremes(cb, h);
            (best * p, Some(cb.index_bits()))
        }
        Strategy::BfVlq => {
            let cb = cb.expect("VLQ needs a codebook");
            let beta = (t + 1.0) * p.ln();
            let (_, best, min) = correlation_extremes(cb, h);
            if min * p >= beta {
                (inner(cb.vector(0), h).norm_sqr() * p, Some(1))
            } else {
                (best * p, Some(1 + cb.index_bits()))
            }
        }
        Strategy::PcVlq => {
            let cb = cb.expect("VLQ needs a codebook");
            if energy * p >= t / cb.delta() {
                (energy * p / (t * r), Some(1))
            } else {
                let (_, best, _) = correlation_extremes(cb, h);
                (best * p / r, Some(1 + cb.index_bits()))
            }
        }
    };
    DrawOutcome {
        snr,
        ser: bpsk_ser(snr),
        bits,
    }
}

/// SER and rate conditioned on the channel direction `u` (unit norm),
/// averaged over `‖h‖² ~ Gamma(t, 1)`. Rate is `None` for full CSIT.
pub fn conditional_outcome(spec: &QuantizerSpec, cb: Option<&BeamformingCodebook>, u: &[Complex64], p: f64) -> (f64, Option<f64>) {
    let tu = spec.t as u32;
    let t = spec.t as f64;
    let r = spec.code_rate;
    let inf = f64::INFINITY;
    match spec.strategy {
        Strategy::BfFull => (q_gamma_segment(tu, p, 0.0, inf), None),
        Strategy::PcFull => (q_gamma_segment(tu, p / r, 0.0, inf), None),
        Strategy::OpenLoop => (q_gamma_segment(tu, p / (t * r), 0.0, inf), Some(0.0)),
        Strategy::BfFlq => {
            let cb = cb.expect("FLQ needs a codebook");
            let (_, best, _) = correlation_extremes(cb, u);
            (q_gamma_segment(tu, best * p, 0.0, inf), Some(f64::from(cb.index_bits())))
        }
        Strategy::BfVlq => {
            let cb = cb.expect("VLQ needs a codebook");
            let beta = (t + 1.0) * p.ln();
            let (_, best, min) = correlation_extremes(cb, u);
            // short branch iff ‖h‖² ≥ a
            let a = if min > 0.0 { beta / (p * min) } else { inf };
            let first = inner(cb.vector(0), u).norm_sqr();
            let ser = q_gamma_segment(tu, best * p, 0.0, a) + q_gamma_segment(tu, first * p, a, inf);
            let rate = 1.0 + f64::from(cb.index_bits()) * gamma_cdf(tu, a);
            (ser, Some(rate))
        }
        Strategy::PcVlq => {
            let cb = cb.expect("VLQ needs a codebook");
            let a = t / (cb.delta() * p);
            let (_, best, _) = correlation_extremes(cb, u);
            let ser = q_gamma_segment(tu, best * p / r, 0.0, a) + q_gamma_segment(tu, p / (t * r), a, inf);
            let rate = 1.0 + f64::from(cb.index_bits()) * gamma_cdf(tu, a);
            (ser, Some(rate))
        }
    }
}

/// Streaming mean and sum of squared deviations, merged with Chan's update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn from_slice(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = crate::numerics::compensated_sum(values) / n as f64;
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        Self {
            n,
            mean,
            m2: crate::numerics::compensated_sum(&dev),
        }
    }

    pub fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let wa = self.n as f64 / n as f64;
        let wb = other.n as f64 / n as f64;
        Self {
            n,
            mean: self.mean * wa + other.mean * wb,
            m2: self.m2 + other.m2 + delta * delta * self.n as f64 * wb,
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2.max(0.0) / (self.n as f64 - 1.0) / self.n as f64).sqrt()
        }
    }
}

fn check_grid(p_grid: &[f64]) -> Result<()> {
    if p_grid.is_empty() {
        return Err(Error::invalid("power grid is empty"));
    }
    if let Some(&p) = p_grid.iter().find(|&&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::invalid(format!("power must be positive and finite, got {p}")));
    }
    Ok(())
}

/// Chunk `c` of the common draw set: `count` channels of dimension `t`,
/// stored row-major.
fn chunk_draws(t: usize, stream: RngStream, c: usize, count: usize) -> Vec<Complex64> {
    let mut rng = stream.substream(c as u64).rng();
    let mut out = vec![Complex64::new(0.0, 0.0); t * count];
    for h in out.chunks_exact_mut(t) {
        sample_channel_into(&mut rng, h);
    }
    out
}

/// The first `samples` channel draws of `stream`, exactly as every sweep
/// in this module sees them.
pub fn draw_channels(t: usize, samples: usize, stream: RngStream) -> Vec<ChannelVector> {
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .flat_map(|c| {
            let count = CHUNK.min(samples - c * CHUNK);
            chunk_draws(t, stream, c, count)
                .chunks_exact(t)
                .map(|h| ChannelVector::new(h.to_vec()).expect("finite draw"))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// One chunk: moments of (SER, rate) for every (spec, grid point).
fn chunk_moments(
    specs: &[QuantizerSpec],
    p_grid: &[f64],
    t: usize,
    stream: RngStream,
    c: usize,
    count: usize,
    estimator: Estimator,
) -> Vec<(Moments, Moments)> {
    let draws = chunk_draws(t, stream, c, count);
    let mut out = Vec::with_capacity(specs.len() * p_grid.len());
    let mut ser = vec![0.0; count];
    let mut rate = vec![0.0; count];
    let mut unit = vec![Complex64::new(0.0, 0.0); t];
    for spec in specs {
        // conditional SER of full CSIT and open loop does not depend on u
        let direction_free = matches!(spec.strategy, Strategy::BfFull | Strategy::PcFull | Strategy::OpenLoop);
        for (i, &p) in p_grid.iter().enumerate() {
            let cb = spec.codebook_at(i);
            let mut has_rate = true;
            match estimator {
                Estimator::Pathwise => {
                    for (k, h) in draws.chunks_exact(t).enumerate() {
                        let o = pathwise_outcome(spec, cb, h, p);
                        ser[k] = o.ser;
                        match o.bits {
                            Some(b) => rate[k] = f64::from(b),
                            None => has_rate = false,
                        }
                    }
                }
                Estimator::Conditional if direction_free => {
                    let (s, r) = conditional_outcome(spec, cb, &draws[..t], p);
                    ser.fill(s);
                    match r {
                        Some(r) => rate.fill(r),
                        None => has_rate = false,
                    }
                }
                Estimator::Conditional => {
                    for (k, h) in draws.chunks_exact(t).enumerate() {
                        let n = norm_sqr(h).sqrt();
                        unit.iter_mut().zip(h).for_each(|(u, z)| *u = z / n);
                        let (s, r) = conditional_outcome(spec, cb, &unit, p);
                        ser[k] = s;
                        match r {
                            Some(r) => rate[k] = r,
                            None => has_rate = false,
                        }
                    }
                }
            }
            let rate_moments = if has_rate {
                Moments::from_slice(&rate)
            } else {
                Moments {
                    n: count,
                    mean: f64::INFINITY,
                    m2: 0.0,
                }
            };
            out.push((Moments::from_slice(&ser), rate_moments));
        }
    }
    out
}

/// Estimate SER and rate of every quantizer at every power on one shared set of
/// channel draws. Returns one record list per quantizer, in grid order.
pub fn ser_rate_sweep(
    specs: &[QuantizerSpec],
    p_grid: &[f64],
    samples: usize,
    stream: RngStream,
    estimator: Estimator,
) -> Result<Vec<Vec<SweepRecord>>> {
    check_grid(p_grid)?;
    if samples == 0 {
        return Err(Error::invalid("samples must be at least 1"));
    }
    let t = specs.first().map(|s| s.t).ok_or_else(|| Error::invalid("no quantizers given"))?;
    for s in specs {
        if s.t != t {
            return Err(Error::invalid("quantizers in one batch must share t"));
        }
        s.validate(p_grid)?;
    }
    let chunks = samples.div_ceil(CHUNK);
    let per_chunk: Vec<Vec<(Moments, Moments)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(samples - c * CHUNK);
            chunk_moments(specs, p_grid, t, stream, c, count, estimator)
        })
        .collect();
    let cells = specs.len() * p_grid.len();
    let mut totals = vec![(Moments::default(), Moments::default()); cells];
    for chunk in &per_chunk {
        for (acc, &(s, r)) in totals.iter_mut().zip(chunk) {
            acc.0 = acc.0.merge(s);
            acc.1 = if r.mean.is_infinite() { r } else { acc.1.merge(r) };
        }
    }
    let mut out = Vec::with_capacity(specs.len());
    for (si, spec) in specs.iter().enumerate() {
        let recs = p_grid
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let (s, r) = totals[si * p_grid.len() + i];
                let infinite = r.mean.is_infinite();
                SweepRecord {
                    quantizer: spec.label.clone(),
                    p,
                    ser: s.mean,
                    ser_stderr: s.stderr(),
                    rate: if infinite { f64::INFINITY } else { r.mean },
                    rate_stderr: if infinite { 0.0 } else { r.stderr() },
                    samples,
                }
            })
            .collect();
        out.push(recs);
    }
    Ok(out)
}

/// `E[Q(√(2‖h‖²P/r))]` by gamma-weighted quadrature (relative tolerance 1e-10).
pub fn ser_full_analytic(t: usize, p: f64, r: f64) -> Result<f64> {
    if t == 0 {
        return Err(Error::invalid("antenna count must be at least 1"));
    }
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::invalid(format!("power must be positive, got {p}")));
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::invalid(format!("code rate {r} outside (0, 1]")));
    }
    let gamma = p / r;
    integrate_gamma_weighted(|x| bpsk_ser(x * gamma), t as u32, &QuadratureSpec::default())
}

/// Open-loop SER: full-CSIT SER at power `P / t`.
pub fn ser_open_analytic(t: usize, p: f64, r: f64) -> Result<f64> {
    ser_full_analytic(t, p / t as f64, r)
}

/// Fitted diversity and array gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainEstimate {
    pub diversity: f64,
    pub array_gain: f64,
    pub fit: LogLogFit,
}

/// Records whose power lies within `decades` decades of the largest.
fn top_decades(records: &[SweepRecord], decades: u32) -> Result<Vec<&SweepRecord>> {
    if decades == 0 {
        return Err(Error::invalid("need at least one decade"));
    }
    let p_max = records
        .iter()
        .map(|r| r.p)
        .fold(f64::NEG_INFINITY, f64::max);
    let p_min_needed = p_max / 10f64.powi(decades as i32);
    let span_ok = records.iter().any(|r| r.p <= p_min_needed * (1.0 + 1e-9));
    if records.len() < 3 || !span_ok {
        return Err(Error::invalid(format!(
            "need at least 3 records spanning {decades} decades of P"
        )));
    }
    let mut sel: Vec<&SweepRecord> = records
        .iter()
        .filter(|r| r.p >= p_min_needed * (1.0 - 1e-9))
        .collect();
    sel.sort_by(|a, b| a.p.total_cmp(&b.p));
    if sel.len() < 3 {
        return Err(Error::invalid("fewer than 3 records inside the fitted decades"));
    }
    Ok(sel)
}

/// Fit `ln SER` against `ln P` over the top `decades` decades. The array
/// gain is `1 / (SER · P^d)` at the largest power, with `d` the fitted
/// diversity.
pub fn estimate_gains(records: &[SweepRecord], decades: u32) -> Result<GainEstimate> {
    let sel = top_decades(records, decades)?;
    let points: Vec<(f64, f64)> = sel.iter().map(|r| (r.p, r.ser)).collect();
    let fit = fit_loglog(&points)?;
    let last = sel.last().expect("non-empty selection");
    let diversity = fit.diversity();
    Ok(GainEstimate {
        diversity,
        array_gain: array_gain_at(last.ser, last.p, diversity),
        fit,
    })
}

/// `1 / (SER · P^d)`.
pub fn array_gain_at(ser: f64, p: f64, diversity: f64) -> f64 {
    1.0 / (ser * p.powf(diversity))
}

/// Fit `ln(R - 1)` against `ln P` over the top `decades` decades.
pub fn fit_rate_overhead(records: &[SweepRecord], decades: u32) -> Result<LogLogFit> {
    let sel = top_decades(records, decades)?;
    let points: Vec<(f64, f64)> = sel.iter().map(|r| (r.p, r.rate - 1.0)).collect();
    fit_loglog(&points)
}

/// Pathwise comparison of two quantizers on common draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    /// Mean of `SER_A(h) - SER_B(h)`.
    pub mean_gap: f64,
    pub gap_stderr: f64,
    /// Fraction of draws with `SER_A(h) ≥ SER_B(h)`.
    pub fraction_a_dominates: f64,
    /// Largest `SER_B(h) - SER_A(h)`, zero if A always dominates.
    pub max_violation: f64,
    pub samples: usize,
}

/// Compare the conditional SERs of `a` and `b` on the same `samples`
/// channel draws at power `p`. Codebook schedules use their first entry.
pub fn paired_compare(
    a: &QuantizerSpec,
    b: &QuantizerSpec,
    p: f64,
    samples: usize,
    stream: RngStream,
) -> Result<PairedComparison> {
    check_grid(&[p])?;
    if samples == 0 {
        return Err(Error::invalid("samples must be at least 1"));
    }
    if a.t != b.t {
        return Err(Error::invalid("compared quantizers must share t"));
    }
    a.validate(&[p]).or_else(|e| if a.codebooks.len() > 1 { Ok(()) } else { Err(e) })?;
    b.validate(&[p]).or_else(|e| if b.codebooks.len() > 1 { Ok(()) } else { Err(e) })?;
    let t = a.t;
    let (cba, cbb) = (a.codebook_at(0), b.codebook_at(0));
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<(Moments, usize, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(samples - c * CHUNK);
            let draws = chunk_draws(t, stream, c, count);
            let mut gaps = Vec::with_capacity(count);
            let mut dominated = 0usize;
            let mut worst: f64 = 0.0;
            for h in draws.chunks_exact(t) {
                let sa = pathwise_outcome(a, cba, h, p).ser;
                let sb = pathwise_outcome(b, cbb, h, p).ser;
                if sa >= sb {
                    dominated += 1;
                } else {
                    worst = worst.max(sb - sa);
                }
                gaps.push(sa - sb);
            }
            (Moments::from_slice(&gaps), dominated, worst)
        })
        .collect();
    let mut m = Moments::default();
    let mut dominated = 0;
    let mut worst: f64 = 0.0;
    for (pm, d, w) in parts {
        m = m.merge(pm);
        dominated += d;
        worst = worst.max(w);
    }
    Ok(PairedComparison {
        mean_gap: m.mean,
        gap_stderr: m.stderr(),
        fraction_a_dominates: dominated as f64 / samples as f64,
        max_violation: worst,
        samples,
    })
}

/// Shortest round-trip decimal; infinities as `inf`.
pub fn format_float(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:?}")
    }
}

pub const CSV_HEADER: &str = "quantizer,P_dB,P_linear,ser,ser_stderr,rate,rate_stderr,samples,seed";

/// Sweep records as CSV in the column order of [`CSV_HEADER`].
pub fn records_to_csv(records: &[SweepRecord], seed: u64) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.quantizer,
            format_float(r.p_db()),
            format_float(r.p),
            format_float(r.ser),
            format_float(r.ser_stderr),
            format_float(r.rate),
            format_float(r.rate_stderr),
            r.samples,
            seed
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_merge_matches_direct() {
        let v: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let whole = Moments::from_slice(&v);
        let merged = v
            .chunks(97)
            .map(Moments::from_slice)
            .fold(Moments::default(), Moments::merge);
        assert_eq!(whole.n, merged.n);
        assert!((whole.mean - merged.mean).abs() < 1e-12);
        assert!((whole.m2 - merged.m2).abs() < 1e-8 * whole.m2);
    }

    #[test]
    fn synthetic_power_law_gains() {
        let recs: Vec<SweepRecord> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&p: &f64| SweepRecord {
                quantizer: "x".into(),
                p,
                ser: 4.0 / (p * p),
                ser_stderr: 0.0,
                rate: 1.0,
                rate_stderr: 0.0,
                samples: 1,
            })
            .collect();
        let g = estimate_gains(&recs, 2).unwrap();
        assert!((g.diversity - 2.0).abs() < 1e-12);
        assert!((g.array_gain - 0.25).abs() < 1e-12);
        assert!(estimate_gains(&recs, 3).is_err());
        assert!(estimate_gains(&recs[..2], 1).is_err());
    }

    #[test]
    fn empty_grid_rejected() {
        let s = QuantizerSpec::bf_full(2);
        assert!(ser_rate_sweep(&[s], &[], 10, RngStream::new(0, 0), Estimator::Pathwise).is_err());
    }

    #[test]
    fn draws_match_sweep_partition() {
        let d = draw_channels(2, CHUNK + 3, RngStream::new(5, 1));
        assert_eq!(d.len(), CHUNK + 3);
        let direct = chunk_draws(2, RngStream::new(5, 1), 1, 3);
        assert_eq!(d[CHUNK].entries(), &direct[..2]);
    }

    #[test]
    fn float_format() {
        assert_eq!(format_float(0.1), "0.1");
        assert_eq!(format_float(10.0), "10.0");
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!(format_float(1e-20), "1e-20");
    }
}
