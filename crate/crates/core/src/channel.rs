//! Quasi-static Rayleigh MISO channel: `h ~ CN(0, I_t)`.
//!
//! Randomness is organised as [`RngStream`]s: a master seed plus a stream
//! index, mapped onto a ChaCha key and stream id. Workers never share a
//! generator; they derive child streams from a parent by index, so results
//! depend only on how the work is partitioned, never on how many threads
//! execute it.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A reproducible random substream identified by `(seed, index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub index: u64,
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }

    /// Child stream `k` of this stream. Distinct `k` give distinct streams.
    pub fn substream(&self, k: u64) -> Self {
        let mixed = splitmix64(self.index ^ splitmix64(k.wrapping_add(0x5851_f42d_4c95_7f2d)));
        Self {
            seed: self.seed,
            index: mixed,
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut key = [0u8; 32];
        let mut state = self.seed;
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut inner = ChaCha12Rng::from_seed(key);
        inner.set_stream(self.index);
        StreamRng { inner }
    }
}

/// Generator handed out by [`RngStream::rng`].
///
/// Every variate consumes a fixed number of words (no rejection sampling),
/// so draw `n` of a stream is always the same value.
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha12Rng,
}

impl StreamRng {
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Pair of independent standard normals (Box–Muller).
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let r = (-2.0 * self.uniform_open0().ln()).sqrt();
        let theta = TAU * self.uniform();
        (r * theta.cos(), r * theta.sin())
    }

    /// Circularly-symmetric `CN(0, 1)`: real and imaginary parts each `N(0, 1/2)`.
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let (a, b) = self.normal_pair();
        Complex64::new(a * FRAC_1_SQRT_2, b * FRAC_1_SQRT_2)
    }

    /// Random BPSK symbol.
    pub fn bpsk(&mut self) -> f64 {
        if self.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// `⟨x, h⟩ = x†h`.
#[inline]
pub fn inner(x: &[Complex64], h: &[Complex64]) -> Complex64 {
    x.iter().zip(h).map(|(a, b)| a.conj() * b).sum()
}

#[inline]
pub fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// One channel realization `h ∈ C^t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector(Vec<Complex64>);

impl ChannelVector {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("channel vector needs at least one entry"));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("channel entries must be finite"));
        }
        Ok(Self(entries))
    }

    /// Convenience constructor from real entries.
    pub fn from_real(entries: &[f64]) -> Result<Self> {
        Self::new(entries.iter().map(|&r| Complex64::new(r, 0.0)).collect())
    }

    pub fn t(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `h / ‖h‖`.
    pub fn direction(&self) -> Result<Vec<Complex64>> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroChannel);
        }
        Ok(self.0.iter().map(|z| z / n).collect())
    }

    /// Multiply every entry by `e^{iφ}`.
    pub fn rotate_phase(&self, phi: f64) -> Self {
        let w = Complex64::from_polar(1.0, phi);
        Self(self.0.iter().map(|z| z * w).collect())
    }
}

impl AsRef<[Complex64]> for ChannelVector {
    fn as_ref(&self) -> &[Complex64] {
        &self.0
    }
}

/// Draw `h ~ CN(0, I_t)`.
pub fn sample_channel(rng: &mut StreamRng, t: usize) -> ChannelVector {
    assert!(t >= 1, "antenna count must be at least 1");
    ChannelVector((0..t).map(|_| rng.complex_gaussian()).collect())
}

/// Fill `out` with a `CN(0, I)` draw; allocation-free variant for hot loops.
pub fn sample_channel_into(rng: &mut StreamRng, out: &mut [Complex64]) {
    for z in out.iter_mut() {
        *z = rng.complex_gaussian();
    }
}

/// Uniformly distributed unit vector in `C^t`.
pub fn random_unit_vector(rng: &mut StreamRng, t: usize) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..t).map(|_| rng.complex_gaussian()).collect();
        let n = norm_sqr(&v).sqrt();
        if n > 0.0 {
            return v.into_iter().map(|z| z / n).collect();
        }
    }
}

/// Haar-distributed `t × t` unitary: QR of a complex Gaussian matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn random_unitary(rng: &mut StreamRng, t: usize) -> DMatrix<Complex64> {
    assert!(t >= 1, "dimension must be at least 1");
    let g = DMatrix::from_fn(t, t, |_, _| rng.complex_gaussian());
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..t {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..t {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `max |(U†U - I)_{ij}|`.
pub fn unitary_deviation(u: &DMatrix<Complex64>) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    let gram = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// `U h` for a unitary `U` (checked to 1e-10).
pub fn apply_unitary(u: &DMatrix<Complex64>, h: &ChannelVector) -> Result<ChannelVector> {
    if u.ncols() != h.t() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {}x{} matrix, length-{} channel",
            u.nrows(),
            u.ncols(),
            h.t()
        )));
    }
    let deviation = unitary_deviation(u);
    if !(deviation <= 1e-10) {
        return Err(Error::NotUnitary { deviation });
    }
    let out = (0..u.nrows())
        .map(|i| (0..h.t()).map(|j| u[(i, j)] * h.0[j]).sum())
        .collect();
    Ok(ChannelVector(out))
}
