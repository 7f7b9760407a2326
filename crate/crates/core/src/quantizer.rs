//! Channel quantizers: full-CSIT maps, the fixed-length nearest-codeword
//! encoder and the two-branch variable-length encoders.
//!
//! Encoding regions are never materialized; each encoder is a membership
//! predicate evaluated on `h`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{inner, ChannelVector};
use crate::codebook::{rank_one, BeamformingCodebook, PrecodingCodebook};
use crate::{Error, Result};

/// A set of binary feedback codewords, stored as `'0'`/`'1'` strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixCode {
    codewords: Vec<String>,
}

impl PrefixCode {
    /// Rejects empty codewords and characters other than `0`/`1`.
    pub fn new<S: Into<String>>(codewords: impl IntoIterator<Item = S>) -> Result<Self> {
        let codewords: Vec<String> = codewords.into_iter().map(Into::into).collect();
        for (i, c) in codewords.iter().enumerate() {
            if c.is_empty() {
                return Err(Error::invalid(format!("codeword {i} is empty")));
            }
            if c.chars().any(|b| b != '0' && b != '1') {
                return Err(Error::invalid(format!("codeword {i} ({c:?}) is not binary")));
            }
        }
        Ok(Self { codewords })
    }

    pub fn codewords(&self) -> &[String] {
        &self.codewords
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.codewords.iter().map(String::len).collect()
    }
}

/// `(prefix-free, Σ 2^{-L})`, by exhaustive pairwise comparison.
pub fn kraft_check(code: &PrefixCode) -> (bool, f64) {
    let words = code.codewords();
    let mut prefix_free = true;
    'outer: for (i, a) in words.iter().enumerate() {
        for (j, b) in words.iter().enumerate() {
            if i != j && b.starts_with(a.as_str()) {
                prefix_free = false;
                break 'outer;
            }
        }
    }
    let kraft = words.iter().map(|w| 0.5f64.powi(w.len() as i32)).sum();
    (prefix_free, kraft)
}

/// Big-endian binary of `index` in exactly `bits` characters.
pub fn index_codeword(index: usize, bits: u32) -> String {
    let mut s = String::with_capacity(bits as usize);
    for k in (0..bits).rev() {
        s.push(if (index >> k) & 1 == 1 { '1' } else { '0' });
    }
    s
}

/// Every codeword the fixed-length encoder can emit for `cardinality`
/// codewords. With a single codeword nothing is fed back and the code has
/// one empty word, so this is only a [`PrefixCode`] for `cardinality ≥ 2`.
pub fn flq_code(cardinality: usize) -> Result<PrefixCode> {
    let bits = bits_for(cardinality);
    PrefixCode::new((0..cardinality).map(|i| index_codeword(i, bits)))
}

/// `{0} ∪ {1 ‖ index}` for a codebook of `cardinality` entries.
pub fn vlq_code(cardinality: usize) -> PrefixCode {
    let bits = bits_for(cardinality);
    let words = std::iter::once("0".to_string())
        .chain((0..cardinality).map(|i| format!("1{}", index_codeword(i, bits))));
    PrefixCode::new(words).expect("VLQ codewords are non-empty and binary")
}

fn bits_for(cardinality: usize) -> u32 {
    if cardinality <= 1 {
        0
    } else {
        usize::BITS - (cardinality - 1).leading_zeros()
    }
}

/// What the transmitter applies after decoding the feedback.
#[derive(Debug, Clone, PartialEq)]
pub enum TransmitObject {
    /// Unit beamforming vector.
    Beam(Vec<Complex64>),
    /// `t × t` precoding matrix applied to an orthogonal block code.
    Precoder(DMatrix<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerDecision {
    /// Codebook position of the transmit object. For precoding this indexes
    /// the precoding codebook (0 is the scaled identity).
    pub index: usize,
    pub codeword: String,
    pub transmit: TransmitObject,
    /// Linear per-symbol SNR.
    pub snr: f64,
    pub feedback_bits: usize,
}

impl QuantizerDecision {
    /// Whether this is the one-bit branch of a variable-length encoder.
    pub fn is_short_branch(&self) -> bool {
        self.codeword == "0"
    }
}

/// Nearest codeword by `|⟨x, h⟩|`: `(argmax, max |⟨x,h⟩|², min |⟨x,h⟩|²)`.
/// Ties go to the lowest index.
#[inline]
pub fn correlation_extremes(cb: &BeamformingCodebook, h: &[Complex64]) -> (usize, f64, f64) {
    let mut best = (0usize, f64::NEG_INFINITY);
    let mut min = f64::INFINITY;
    for (i, x) in cb.vectors().iter().enumerate() {
        let c = inner(x, h).norm_sqr();
        if c > best.1 {
            best = (i, c);
        }
        min = min.min(c);
    }
    (best.0, best.1, min)
}

/// `h / ‖h‖`.
pub fn full_csit_bf(h: &ChannelVector) -> Result<Vec<Complex64>> {
    h.direction()
}

/// `h h† / ‖h‖²`.
pub fn full_csit_pc(h: &ChannelVector) -> Result<DMatrix<Complex64>> {
    Ok(rank_one(&h.direction()?))
}

pub fn flq_encode(cb: &BeamformingCodebook, h: &ChannelVector, p: f64) -> QuantizerDecision {
    let (index, best, _) = correlation_extremes(cb, h.entries());
    let bits = cb.index_bits();
    QuantizerDecision {
        index,
        codeword: index_codeword(index, bits),
        transmit: TransmitObject::Beam(cb.vector(index).to_vec()),
        snr: best * p,
        feedback_bits: bits as usize,
    }
}

/// Variable-length beamforming quantizer at one power level.
#[derive(Debug, Clone)]
pub struct VlqBeamformingSpec {
    pub codebook: BeamformingCodebook,
    /// `(t + 1) ln P`.
    pub beta: f64,
    pub index_bits: u32,
}

impl VlqBeamformingSpec {
    pub fn new(codebook: BeamformingCodebook, p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::invalid(format!("VLQ beamforming needs P > 1, got {p}")));
        }
        let beta = (codebook.t() as f64 + 1.0) * p.ln();
        let index_bits = codebook.index_bits();
        Ok(Self {
            codebook,
            beta,
            index_bits,
        })
    }
}

pub fn vlq_encode_bf(spec: &VlqBeamformingSpec, h: &ChannelVector, p: f64) -> QuantizerDecision {
    let cb = &spec.codebook;
    let (index, best, min) = correlation_extremes(cb, h.entries());
    if min * p >= spec.beta {
        QuantizerDecision {
            index: 0,
            codeword: "0".to_string(),
            transmit: TransmitObject::Beam(cb.vector(0).to_vec()),
            snr: inner(cb.vector(0), h.entries()).norm_sqr() * p,
            feedback_bits: 1,
        }
    } else {
        let codeword = format!("1{}", index_codeword(index, spec.index_bits));
        QuantizerDecision {
            index,
            feedback_bits: codeword.len(),
            codeword,
            transmit: TransmitObject::Beam(cb.vector(index).to_vec()),
            snr: best * p,
        }
    }
}

/// Variable-length precoding quantizer.
#[derive(Debug, Clone)]
pub struct VlqPrecodingSpec {
    pub codebook: PrecodingCodebook,
    pub delta: f64,
    /// `t / δ`, compared against `‖h‖² P`.
    pub threshold: f64,
    /// Space-time code rate `r`.
    pub rate: f64,
}

impl VlqPrecodingSpec {
    pub fn new(codebook: PrecodingCodebook, rate: f64) -> Result<Self> {
        let delta = codebook.delta;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::invalid(format!("code rate must lie in (0, 1], got {rate}")));
        }
        let threshold = codebook.t() as f64 / delta;
        Ok(Self {
            codebook,
            delta,
            threshold,
            rate,
        })
    }
}

pub fn vlq_encode_pc(spec: &VlqPrecodingSpec, h: &ChannelVector, p: f64) -> QuantizerDecision {
    let pc = &spec.codebook;
    let t = pc.t() as f64;
    let energy = h.norm_sqr() * p;
    if energy >= spec.threshold {
        QuantizerDecision {
            index: pc.identity_index,
            codeword: "0".to_string(),
            transmit: TransmitObject::Precoder(pc.matrices[pc.identity_index].clone()),
            snr: energy / (t * spec.rate),
            feedback_bits: 1,
        }
    } else {
        let cb = pc.beamforming();
        let (index, best, _) = correlation_extremes(cb, h.entries());
        let codeword = format!("1{}", index_codeword(index, cb.index_bits()));
        QuantizerDecision {
            index: index + 1,
            feedback_bits: codeword.len(),
            codeword,
            transmit: TransmitObject::Precoder(pc.matrices[index + 1].clone()),
            snr: best * p / spec.rate,
        }
    }
}

/// Feedback trace as CSV: `sample_id,branch,index,codeword,bits,snr`.
pub fn feedback_trace_csv(decisions: &[QuantizerDecision]) -> String {
    let mut out = String::from("sample_id,branch,index,codeword,bits,snr\n");
    for (i, d) in decisions.iter().enumerate() {
        let branch = if d.is_short_branch() {
            "short"
        } else if d.codeword.starts_with('1') && d.codeword.len() > 1 {
            "long"
        } else {
            "fixed"
        };
        let _ = writeln!(
            out,
            "{i},{branch},{},{},{},{}",
            d.index, d.codeword, d.feedback_bits, d.snr
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_basis() -> BeamformingCodebook {
        BeamformingCodebook::from_real(2, 0.5, &[&[1.0, 0.0], &[0.0, 1.0]]).unwrap()
    }

    #[test]
    fn kraft_examples() {
        let c = PrefixCode::new(["0", "10", "11"]).unwrap();
        assert_eq!(kraft_check(&c), (true, 1.0));
        let c = PrefixCode::new(["0", "01"]).unwrap();
        assert!(!kraft_check(&c).0);
        let c = vlq_code(4);
        assert_eq!(c.codewords(), ["0", "100", "101", "110", "111"]);
        assert_eq!(kraft_check(&c), (true, 1.0));
    }

    #[test]
    fn prefix_code_rejects_empty_words() {
        assert!(PrefixCode::new([""]).is_err());
        assert!(PrefixCode::new(["012"]).is_err());
    }

    #[test]
    fn vlq_code_with_single_vector() {
        let c = vlq_code(1);
        assert_eq!(c.codewords(), ["0", "1"]);
        assert_eq!(kraft_check(&c), (true, 1.0));
    }

    #[test]
    fn index_codeword_big_endian() {
        assert_eq!(index_codeword(1, 3), "001");
        assert_eq!(index_codeword(6, 3), "110");
        assert_eq!(index_codeword(0, 0), "");
    }

    #[test]
    fn flq_picks_largest_then_lowest() {
        let cb = unit_basis();
        let h = ChannelVector::from_real(&[0.6, 0.8]).unwrap();
        let d = flq_encode(&cb, &h, 1.0);
        assert_eq!(d.index, 1);
        assert_eq!(d.codeword, "1");
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let tie = ChannelVector::from_real(&[s, s]).unwrap();
        assert_eq!(flq_encode(&cb, &tie, 1.0).index, 0);
    }

    #[test]
    fn vlq_bf_examples() {
        let spec = VlqBeamformingSpec::new(unit_basis(), 100.0).unwrap();
        assert!((spec.beta - 3.0 * 100f64.ln()).abs() < 1e-12);
        let h = ChannelVector::from_real(&[10.0, 10.0]).unwrap();
        let d = vlq_encode_bf(&spec, &h, 100.0);
        assert_eq!(d.codeword, "0");
        assert_eq!(d.transmit, TransmitObject::Beam(unit_basis().vector(0).to_vec()));
        let h = ChannelVector::from_real(&[1.0, 0.01]).unwrap();
        let d = vlq_encode_bf(&spec, &h, 100.0);
        assert_eq!(d.codeword, "10");
        assert_eq!(d.index, 0);
        assert_eq!(d.feedback_bits, 2);
    }

    #[test]
    fn vlq_bf_threshold_equality_is_short() {
        let cb = unit_basis();
        let p = 100.0;
        let spec = VlqBeamformingSpec::new(cb, p).unwrap();
        let a = (spec.beta / p).sqrt();
        let h = ChannelVector::from_real(&[a, a]).unwrap();
        let min = correlation_extremes(&spec.codebook, h.entries()).2;
        if min * p == spec.beta {
            assert_eq!(vlq_encode_bf(&spec, &h, p).codeword, "0");
        }
    }

    #[test]
    fn vlq_bf_rejects_low_power() {
        assert!(VlqBeamformingSpec::new(unit_basis(), 1.0).is_err());
    }

    #[test]
    fn vlq_pc_examples() {
        let pc = crate::codebook::precoding_codebook(
            &BeamformingCodebook::from_real(2, 0.1, &[&[1.0, 0.0], &[0.0, 1.0]]).unwrap(),
        );
        let spec = VlqPrecodingSpec::new(pc, 1.0).unwrap();
        assert!((spec.threshold - 20.0).abs() < 1e-12);
        let h = ChannelVector::from_real(&[1.0, 1.0]).unwrap();
        let d = vlq_encode_pc(&spec, &h, 100.0);
        assert_eq!(d.codeword, "0");
        assert!((d.snr - 100.0).abs() < 1e-12);
        let h = ChannelVector::from_real(&[0.1, 0.1]).unwrap();
        let d = vlq_encode_pc(&spec, &h, 100.0);
        assert_eq!(d.codeword, "10");
        assert_eq!(d.index, 1);
        assert!((d.snr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_csit_maps() {
        let h = ChannelVector::from_real(&[3.0, 4.0]).unwrap().rotate_phase(0.7);
        let x = full_csit_bf(&h).unwrap();
        assert!((crate::channel::norm_sqr(&x) - 1.0).abs() < 1e-15);
        assert!((inner(&x, h.entries()) - Complex64::new(5.0, 0.0)).norm() < 1e-12);
        let e1 = ChannelVector::from_real(&[1.0, 0.0]).unwrap();
        let m = full_csit_pc(&e1).unwrap();
        assert_eq!(m[(0, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(m[(1, 1)], Complex64::new(0.0, 0.0));
        let zero = ChannelVector::from_real(&[0.0, 0.0]).unwrap();
        assert!(full_csit_bf(&zero).is_err());
        assert!(full_csit_pc(&zero).is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let spec = VlqBeamformingSpec::new(unit_basis(), 100.0).unwrap();
        let ds = vec![
            vlq_encode_bf(&spec, &ChannelVector::from_real(&[10.0, 10.0]).unwrap(), 100.0),
            vlq_encode_bf(&spec, &ChannelVector::from_real(&[1.0, 0.01]).unwrap(), 100.0),
        ];
        let csv = feedback_trace_csv(&ds);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "sample_id,branch,index,codeword,bits,snr");
        assert_eq!(lines[1], "0,short,0,0,1,10000");
        assert!(lines[2].starts_with("1,long,0,10,2,"));
    }
}
