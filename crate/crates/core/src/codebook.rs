//! Covering beamforming codebooks and the derived precoding codebook.
//!
//! A codebook `B` covers at level `δ` when every unit direction `h̄` has some
//! codeword with `|⟨x, h̄⟩|² ≥ 1 - δ`. Codebooks are built by greedy
//! sequential covering over random probes and certified statistically, with
//! an adversarial local search around the worst probe.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{inner, norm_sqr, random_unit_vector, RngStream};
use crate::{Error, Result};

/// Codewords are added while a probe's best correlation² is below
/// `1 - BUILD_MARGIN · δ`, i.e. the greedy pass covers a slightly smaller
/// `δ` than the one certified. Residual holes left when the streak stops
/// are then too shallow to be uncovered at the target `δ`.
pub const BUILD_MARGIN: f64 = 0.9;

/// Two codewords closer than this (in `|⟨xᵢ, xⱼ⟩|`) count as duplicates.
pub const DUPLICATE_THRESHOLD: f64 = 1.0 - 1e-9;

const VERIFY_CHUNK: usize = 4096;
const HOLE_CANDIDATES: usize = 8;
const MAX_HOLE_ROUNDS: u64 = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildMetadata {
    pub seed: u64,
    pub stream_index: u64,
    pub stop_streak: usize,
    pub probes_drawn: usize,
    pub margin: f64,
    /// Codewords added by the adversarial hole search after the random pass.
    #[serde(default)]
    pub holes_filled: usize,
    pub verify_probes: usize,
    pub verify_worst_correlation_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingCodebook {
    t: usize,
    delta: f64,
    vectors: Vec<Vec<Complex64>>,
    metadata: Option<BuildMetadata>,
}

impl BeamformingCodebook {
    /// Validating constructor. Vectors must be unit norm (1e-12), pairwise
    /// distinct and of a common dimension.
    pub fn new(t: usize, delta: f64, vectors: Vec<Vec<Complex64>>) -> Result<Self> {
        let cb = Self {
            t,
            delta,
            vectors,
            metadata: None,
        };
        let problems = cb.invariant_violations();
        if let Some(first) = problems.into_iter().next() {
            return Err(Error::InvalidCodebook(first));
        }
        Ok(cb)
    }

    /// Build without checking invariants; used to inspect damaged files.
    pub fn new_unchecked(t: usize, delta: f64, vectors: Vec<Vec<Complex64>>) -> Self {
        Self {
            t,
            delta,
            vectors,
            metadata: None,
        }
    }

    /// Real-valued convenience constructor for tests and examples.
    pub fn from_real(t: usize, delta: f64, vectors: &[&[f64]]) -> Result<Self> {
        Self::new(
            t,
            delta,
            vectors
                .iter()
                .map(|v| v.iter().map(|&r| Complex64::new(r, 0.0)).collect())
                .collect(),
        )
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<Complex64>] {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> &[Complex64] {
        &self.vectors[i]
    }

    pub fn metadata(&self) -> Option<&BuildMetadata> {
        self.metadata.as_ref()
    }

    /// Width of the fixed-length index, `⌈log₂|B|⌉`.
    pub fn index_bits(&self) -> u32 {
        let n = self.vectors.len();
        if n <= 1 {
            0
        } else {
            usize::BITS - (n - 1).leading_zeros()
        }
    }

    /// `max_i |⟨xᵢ, v⟩|²` for a unit `v`.
    pub fn max_correlation_sq(&self, v: &[Complex64]) -> f64 {
        self.vectors
            .iter()
            .map(|x| inner(x, v).norm_sqr())
            .fold(0.0, f64::max)
    }

    /// Every violated invariant, described in words. Empty when valid.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.t == 0 {
            out.push("antenna count must be at least 1".to_string());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            out.push(format!("delta {} outside (0, 1)", self.delta));
        }
        if self.vectors.is_empty() {
            out.push("codebook is empty".to_string());
        }
        for (i, v) in self.vectors.iter().enumerate() {
            if v.len() != self.t {
                out.push(format!("vector {i} has length {} (expected {})", v.len(), self.t));
                continue;
            }
            let n = norm_sqr(v).sqrt();
            if !((n - 1.0).abs() <= 1e-12) {
                out.push(format!("vector {i} has norm {n} (expected 1)"));
            }
        }
        for i in 0..self.vectors.len() {
            for j in (i + 1)..self.vectors.len() {
                if self.vectors[i].len() == self.vectors[j].len()
                    && inner(&self.vectors[i], &self.vectors[j]).norm() >= DUPLICATE_THRESHOLD
                {
                    out.push(format!("vectors {i} and {j} are duplicates"));
                }
            }
        }
        out
    }

    pub fn to_file(&self) -> CodebookFile {
        CodebookFile {
            format_version: 1,
            t: self.t,
            delta: self.delta,
            vectors: self
                .vectors
                .iter()
                .map(|v| v.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            metadata: self.metadata.clone(),
        }
    }

    pub fn from_file(file: CodebookFile) -> Result<Self> {
        let cb = Self::from_file_unchecked(file)?;
        let problems = cb.invariant_violations();
        if let Some(first) = problems.into_iter().next() {
            return Err(Error::InvalidCodebook(first));
        }
        Ok(cb)
    }

    /// Parse the file structure but skip the geometric invariants.
    pub fn from_file_unchecked(file: CodebookFile) -> Result<Self> {
        if file.format_version != 1 {
            return Err(Error::InvalidCodebook(format!(
                "unsupported format-version {}",
                file.format_version
            )));
        }
        Ok(Self {
            t: file.t,
            delta: file.delta,
            vectors: file
                .vectors
                .into_iter()
                .map(|v| v.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
                .collect(),
            metadata: file.metadata,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn load_unchecked(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_file_unchecked(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// On-disk codebook document. Complex numbers are `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookFile {
    #[serde(rename = "format-version")]
    pub format_version: u32,
    pub t: usize,
    pub delta: f64,
    pub vectors: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub metadata: Option<BuildMetadata>,
}

/// Result of a covering certification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub delta: f64,
    pub probes_tested: usize,
    pub refine_steps: usize,
    pub worst_correlation_sq: f64,
    pub worst_probe: Vec<[f64; 2]>,
    pub pass: bool,
}

/// Greedy sequential covering.
///
/// Random unit probes are drawn from `stream`; a probe whose best
/// correlation² is below `1 - BUILD_MARGIN·δ` becomes a codeword. The random
/// pass stops after `stop_streak` consecutive probes needed nothing. Random
/// probes rarely land in the deepest holes once `t ≥ 3`, so a second pass
/// refines the worst probes into local minima of the covering and adds any
/// below `1 - δ`. The result must pass [`verify_covering`] at `δ` with
/// `10·stop_streak` fresh probes and 50 refinement steps; a failed check
/// adds its refined worst probe and retries, up to a fixed number of rounds.
pub fn build_covering_codebook(
    t: usize,
    delta: f64,
    stream: RngStream,
    stop_streak: usize,
) -> Result<BeamformingCodebook> {
    if t == 0 {
        return Err(Error::invalid("antenna count must be at least 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if stop_streak == 0 {
        return Err(Error::invalid("stop streak must be at least 1"));
    }
    let accept_below = 1.0 - BUILD_MARGIN * delta;
    let mut rng = stream.substream(0).rng();
    let mut vectors: Vec<Vec<Complex64>> = Vec::new();
    let mut streak = 0usize;
    let mut probes = 0usize;
    if t == 1 {
        // every unit scalar has |⟨1, h̄⟩| = 1
        vectors.push(vec![Complex64::new(1.0, 0.0)]);
    }
    while streak < stop_streak {
        let probe = random_unit_vector(&mut rng, t);
        probes += 1;
        let best = vectors
            .iter()
            .map(|x| inner(x, &probe).norm_sqr())
            .fold(0.0, f64::max);
        if best < accept_below {
            vectors.push(probe);
            streak = 0;
        } else {
            streak += 1;
        }
    }
    let verify_probes = stop_streak.saturating_mul(10);
    let mut holes_filled = 0usize;
    let mut round = 0u64;
    let report = loop {
        // adversarial pass: refined local minima of the covering become codewords
        for hole in find_holes(&vectors, t, delta, verify_probes, stream.substream(2).substream(round)) {
            let best = vectors
                .iter()
                .map(|x| inner(x, &hole).norm_sqr())
                .fold(0.0, f64::max);
            if best < accept_below {
                vectors.push(hole);
                holes_filled += 1;
            }
        }
        let cb = BeamformingCodebook::new(t, delta, vectors.clone())?;
        let report = verify_covering(&cb, delta, verify_probes, 50, stream.substream(1).substream(round));
        if report.pass {
            break report;
        }
        round += 1;
        if round >= MAX_HOLE_ROUNDS {
            return Err(Error::CoveringFailed {
                delta,
                worst: report.worst_correlation_sq,
                probes: verify_probes,
            });
        }
        vectors.push(report.worst_probe.iter().map(|&[re, im]| Complex64::new(re, im)).collect());
        holes_filled += 1;
    };
    let mut cb = BeamformingCodebook::new(t, delta, vectors)?;
    cb.metadata = Some(BuildMetadata {
        seed: stream.seed,
        stream_index: stream.index,
        stop_streak,
        probes_drawn: probes,
        margin: BUILD_MARGIN,
        holes_filled,
        verify_probes,
        verify_worst_correlation_sq: report.worst_correlation_sq,
    });
    Ok(cb)
}

/// Candidate holes: the `HOLE_CANDIDATES` worst of `probes` random probes,
/// each refined away from the codebook, keeping those below `1 - δ`.
fn find_holes(
    vectors: &[Vec<Complex64>],
    t: usize,
    delta: f64,
    probes: usize,
    stream: RngStream,
) -> Vec<Vec<Complex64>> {
    let cb = BeamformingCodebook::new_unchecked(t, delta, vectors.to_vec());
    let chunks = probes.max(1).div_ceil(VERIFY_CHUNK);
    let mut worst: Vec<(Vec<Complex64>, f64)> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let count = VERIFY_CHUNK.min(probes - c * VERIFY_CHUNK);
            let mut rng = stream.substream(c as u64).rng();
            let mut keep: Vec<(Vec<Complex64>, f64)> = Vec::with_capacity(HOLE_CANDIDATES + 1);
            for _ in 0..count {
                let probe = random_unit_vector(&mut rng, t);
                let v = cb.max_correlation_sq(&probe);
                if keep.len() < HOLE_CANDIDATES || v < keep[keep.len() - 1].1 {
                    let at = keep.partition_point(|k| k.1 <= v);
                    keep.insert(at, (probe, v));
                    keep.truncate(HOLE_CANDIDATES);
                }
            }
            keep
        })
        .collect();
    worst.sort_by(|a, b| a.1.total_cmp(&b.1));
    worst.truncate(HOLE_CANDIDATES);
    worst
        .into_iter()
        .map(|(p, _)| refine_away(&cb, p, 100))
        .filter(|(_, v)| *v < 1.0 - delta)
        .map(|(p, _)| p)
        .collect()
}

/// `(argmin probe, its correlation²)` over a chunk of random probes.
fn worst_probe_in_chunk(
    cb: &BeamformingCodebook,
    stream: RngStream,
    count: usize,
) -> (Vec<Complex64>, f64) {
    let mut rng = stream.rng();
    let mut worst = (Vec::new(), f64::INFINITY);
    for _ in 0..count {
        let probe = random_unit_vector(&mut rng, cb.t);
        let c = cb.max_correlation_sq(&probe);
        if c < worst.1 {
            worst = (probe, c);
        }
    }
    worst
}

/// Local search moving `start` away from every codeword: projected descent
/// on a soft-max of `|⟨xᵢ, v⟩|²` over the unit sphere, accepting only steps
/// that lower the true maximum.
fn refine_away(cb: &BeamformingCodebook, start: Vec<Complex64>, steps: usize) -> (Vec<Complex64>, f64) {
    const SHARPNESS: f64 = 60.0;
    let mut v = start;
    let mut value = cb.max_correlation_sq(&v);
    let mut step = 0.5;
    for _ in 0..steps {
        let corr: Vec<Complex64> = cb.vectors.iter().map(|x| inner(x, &v)).collect();
        let top = corr.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
        let weights: Vec<f64> = corr
            .iter()
            .map(|c| (SHARPNESS * (c.norm_sqr() - top)).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        // gradient of Σ wᵢ|xᵢ†v|² with respect to v̄ is Σ wᵢ xᵢ (xᵢ†v)
        let mut grad = vec![Complex64::new(0.0, 0.0); cb.t];
        for ((x, c), w) in cb.vectors.iter().zip(&corr).zip(&weights) {
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += xi * c * (w / total);
            }
        }
        // project onto the tangent space at v
        let radial = inner(&v, &grad);
        for (g, vi) in grad.iter_mut().zip(&v) {
            *g -= vi * radial;
        }
        let gnorm = norm_sqr(&grad).sqrt();
        if gnorm < 1e-15 {
            break;
        }
        let mut improved = false;
        while step > 1e-12 {
            let mut cand: Vec<Complex64> = v.iter().zip(&grad).map(|(vi, g)| vi - g * (step / gnorm)).collect();
            let n = norm_sqr(&cand).sqrt();
            cand.iter_mut().for_each(|z| *z /= n);
            let cv = cb.max_correlation_sq(&cand);
            if cv < value {
                v = cand;
                value = cv;
                step *= 1.5;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (v, value)
}

/// Certify the covering property at level `delta`.
///
/// Probes are split into fixed-size chunks, each drawn from its own
/// substream, and reduced in chunk order, so the report does not depend on
/// the number of worker threads.
pub fn verify_covering(
    cb: &BeamformingCodebook,
    delta: f64,
    probes: usize,
    refine_steps: usize,
    stream: RngStream,
) -> CoveringReport {
    let probes = probes.max(1);
    let chunks = probes.div_ceil(VERIFY_CHUNK);
    let per_chunk: Vec<(Vec<Complex64>, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = VERIFY_CHUNK.min(probes - c * VERIFY_CHUNK);
            worst_probe_in_chunk(cb, stream.substream(c as u64), count)
        })
        .collect();
    let (probe, raw) = per_chunk
        .into_iter()
        .fold((Vec::new(), f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let (refined, refined_value) = refine_away(cb, probe.clone(), refine_steps);
    let (worst_probe, worst) = if refined_value < raw {
        (refined, refined_value)
    } else {
        (probe, raw)
    };
    CoveringReport {
        delta,
        probes_tested: probes,
        refine_steps,
        worst_correlation_sq: worst,
        worst_probe: worst_probe.iter().map(|z| [z.re, z.im]).collect(),
        pass: worst >= 1.0 - delta,
    }
}

/// `C_δ = {I/√t} ∪ {x x† : x ∈ B_δ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingCodebook {
    pub delta: f64,
    pub matrices: Vec<DMatrix<Complex64>>,
    pub identity_index: usize,
    beamforming: BeamformingCodebook,
}

impl PrecodingCodebook {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn t(&self) -> usize {
        self.beamforming.t()
    }

    /// The beamforming codebook the rank-one entries were derived from.
    pub fn beamforming(&self) -> &BeamformingCodebook {
        &self.beamforming
    }
}

/// Outer product `x x†`.
pub fn rank_one(x: &[Complex64]) -> DMatrix<Complex64> {
    let t = x.len();
    DMatrix::from_fn(t, t, |i, j| x[i] * x[j].conj())
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn precoding_codebook(cb: &BeamformingCodebook) -> PrecodingCodebook {
    let t = cb.t();
    let mut matrices = Vec::with_capacity(cb.len() + 1);
    matrices.push(DMatrix::<Complex64>::identity(t, t) / Complex64::new((t as f64).sqrt(), 0.0));
    matrices.extend(cb.vectors().iter().map(|x| rank_one(x)));
    PrecodingCodebook {
        delta: cb.delta(),
        matrices,
        identity_index: 0,
        beamforming: cb.clone(),
    }
}

/// `max_δ |B_δ| δ^{2t}` over `(δ, |B_δ|)` pairs of a common dimension `t`.
pub fn fit_c0_from_sizes(t: usize, family: &[(f64, usize)]) -> Result<f64> {
    if family.len() < 2 {
        return Err(Error::invalid("C0 fit needs at least two codebooks"));
    }
    let exponent = 2.0 * t as f64;
    family
        .iter()
        .map(|&(delta, size)| {
            if !(delta > 0.0 && delta < 1.0) || size == 0 {
                Err(Error::invalid(format!("bad family entry (delta {delta}, size {size})")))
            } else {
                Ok(size as f64 * delta.powf(exponent))
            }
        })
        .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
}

/// Empirical `Ĉ₀` for a family of codebooks built at different `δ`.
pub fn fit_c0(family: &[BeamformingCodebook]) -> Result<f64> {
    let t = family.first().map(|b| b.t()).unwrap_or(0);
    if family.iter().any(|b| b.t() != t) {
        return Err(Error::invalid("codebook family mixes antenna counts"));
    }
    let sizes: Vec<(f64, usize)> = family.iter().map(|b| (b.delta(), b.len())).collect();
    fit_c0_from_sizes(t, &sizes)
}
