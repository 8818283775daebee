//! Bits to symbols to received vectors: Gray-labelled constellations, the
//! coded-bit frame layout over channel uses, and the i.i.d. Rayleigh
//! flat-fading channel with AWGN.
//!
//! Bits are logical `0`/`1` here. The bipolar image used for LLR signs is
//! `0 ↦ −1`, `1 ↦ +1`, so a positive LLR favours logical `1`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::matqr::ComplexMatrix;
use crate::{Error, Result};

/// Supported modulation alphabets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Qam16,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modulation::Bpsk => "bpsk",
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "16qam",
        })
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(Modulation::Bpsk),
            "qpsk" => Ok(Modulation::Qpsk),
            "16qam" | "qam16" => Ok(Modulation::Qam16),
            other => Err(Error::InvalidInput(format!("unknown modulation '{other}'"))),
        }
    }
}

/// A unit-energy constellation indexed by its bit label.
///
/// `points[label]` is the symbol carrying `label`, where bit position `b`
/// (0 = first transmitted bit) is the `b`-th most significant bit of `label`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    modulation: Modulation,
    bits_per_symbol: usize,
    points: Vec<Complex64>,
}

/// Gray map of a bit pair onto one PAM-4 axis: 00, 01, 11, 10 ↦ −3, −1, +1, +3.
fn pam4_gray(b0: usize, b1: usize) -> f64 {
    match (b0, b1) {
        (0, 0) => -3.0,
        (0, 1) => -1.0,
        (1, 1) => 1.0,
        _ => 3.0,
    }
}

impl Constellation {
    pub fn new(modulation: Modulation) -> Self {
        let bits_per_symbol = modulation.bits_per_symbol();
        let size = 1usize << bits_per_symbol;
        let points = (0..size)
            .map(|label| {
                let bit = |b: usize| (label >> (bits_per_symbol - 1 - b)) & 1;
                let pm = |b: usize| if bit(b) == 1 { 1.0 } else { -1.0 };
                match modulation {
                    Modulation::Bpsk => Complex64::new(pm(0), 0.0),
                    Modulation::Qpsk => {
                        Complex64::new(pm(0), pm(1)) * std::f64::consts::FRAC_1_SQRT_2
                    }
                    Modulation::Qam16 => {
                        Complex64::new(pam4_gray(bit(0), bit(1)), pam4_gray(bit(2), bit(3)))
                            / 10f64.sqrt()
                    }
                }
            })
            .collect();
        Self {
            modulation,
            bits_per_symbol,
            points,
        }
    }

    pub fn qpsk() -> Self {
        Self::new(Modulation::Qpsk)
    }

    pub fn qam16() -> Self {
        Self::new(Modulation::Qam16)
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    /// Symbols indexed by label.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Logical value (0/1) of bit `b` in `label`.
    #[inline]
    pub fn label_bit(&self, label: usize, b: usize) -> u8 {
        ((label >> (self.bits_per_symbol - 1 - b)) & 1) as u8
    }

    /// Bits of a label, first bit first.
    pub fn label_bits(&self, label: usize) -> Vec<u8> {
        (0..self.bits_per_symbol)
            .map(|b| self.label_bit(label, b))
            .collect()
    }

    /// Label of a bit pattern (first bit first).
    pub fn label_of(&self, bits: &[u8]) -> Result<usize> {
        if bits.len() != self.bits_per_symbol {
            return Err(Error::DimensionMismatch {
                expected: self.bits_per_symbol,
                actual: bits.len(),
            });
        }
        bits.iter().try_fold(0usize, |acc, &b| match b {
            0 | 1 => Ok((acc << 1) | b as usize),
            _ => Err(Error::InvalidInput(format!("bit value {b} is not 0 or 1"))),
        })
    }

    /// Maps a block of `log2|S|` bits onto its symbol.
    pub fn map_block(&self, bits: &[u8]) -> Result<Complex64> {
        Ok(self.points[self.label_of(bits)?])
    }

    /// Label of the point exactly equal to `symbol`, if any.
    pub fn lookup(&self, symbol: Complex64) -> Option<usize> {
        self.points.iter().position(|&p| p == symbol)
    }
}

/// Placement of interleaved coded bits onto (channel use, antenna, bit position).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLayout {
    pub m_t: usize,
    pub m_r: usize,
    pub bits_per_symbol: usize,
    pub uses: usize,
}

impl FrameLayout {
    /// Layout for `coded_len` bits, which must fill whole channel uses.
    pub fn for_coded_len(
        coded_len: usize,
        m_t: usize,
        m_r: usize,
        bits_per_symbol: usize,
    ) -> Result<Self> {
        if m_t == 0 || bits_per_symbol == 0 {
            return Err(Error::InvalidConfig(
                "antenna count and bits per symbol must be positive".into(),
            ));
        }
        if m_r < m_t {
            return Err(Error::InvalidConfig(format!(
                "need m_r >= m_t, got m_r = {m_r}, m_t = {m_t}"
            )));
        }
        let per_use = m_t * bits_per_symbol;
        if coded_len == 0 || !coded_len.is_multiple_of(per_use) {
            return Err(Error::InvalidConfig(format!(
                "{coded_len} coded bits do not fill whole channel uses of {per_use} bits"
            )));
        }
        Ok(Self {
            m_t,
            m_r,
            bits_per_symbol,
            uses: coded_len / per_use,
        })
    }

    pub fn bits_per_use(&self) -> usize {
        self.m_t * self.bits_per_symbol
    }

    pub fn coded_len(&self) -> usize {
        self.uses * self.bits_per_use()
    }

    /// Interleaved bit index `k = ((u·m_t) + t)·bits_per_symbol + b`.
    pub fn layout_index(&self, u: usize, t: usize, b: usize) -> Result<usize> {
        if u >= self.uses || t >= self.m_t || b >= self.bits_per_symbol {
            return Err(Error::OutOfRange(format!(
                "(u={u}, t={t}, b={b}) outside {}x{}x{}",
                self.uses, self.m_t, self.bits_per_symbol
            )));
        }
        Ok((u * self.m_t + t) * self.bits_per_symbol + b)
    }

    /// Inverse of [`FrameLayout::layout_index`].
    pub fn position(&self, k: usize) -> Result<(usize, usize, usize)> {
        if k >= self.coded_len() {
            return Err(Error::OutOfRange(format!(
                "bit index {k} outside frame of {}",
                self.coded_len()
            )));
        }
        let b = k % self.bits_per_symbol;
        let sym = k / self.bits_per_symbol;
        Ok((sym / self.m_t, sym % self.m_t, b))
    }
}

/// One channel realization `y = H s + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelUse {
    pub h: ComplexMatrix,
    pub y: Vec<Complex64>,
    /// Noise variance per complex receive entry (`2σ_n²`).
    pub sigma2: f64,
}

/// Noise variance per complex entry for a per-receive-antenna SNR in dB,
/// assuming unit-energy symbols and unit-variance channel taps.
pub fn snr_to_sigma2(snr_db: f64, m_t: usize) -> f64 {
    m_t as f64 * 10f64.powf(-snr_db / 10.0)
}

/// Circularly-symmetric complex Gaussian sample with `E|z|² = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Draws a fresh Rayleigh channel and noise vector for the symbol vector `s`.
///
/// Draw order: the `m_r × m_t` channel taps row by row, then the `m_r` noise
/// samples.
pub fn sample_channel_use<R: Rng + ?Sized>(
    s: &[Complex64],
    m_r: usize,
    sigma2: f64,
    rng: &mut R,
) -> Result<ChannelUse> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidInput(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    let m_t = s.len();
    let taps = (0..m_r * m_t).map(|_| complex_gaussian(rng, 1.0)).collect();
    let h = ComplexMatrix::from_row_major(m_r, m_t, taps)?;
    let mut y = h.mul_vec(s)?;
    for yi in y.iter_mut() {
        *yi += complex_gaussian(rng, sigma2);
    }
    Ok(ChannelUse { h, y, sigma2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn approx(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-15
    }

    #[test]
    fn qam16_table_entries() {
        let c = Constellation::qam16();
        let r10 = 10f64.sqrt();
        assert!(approx(
            c.map_block(&[0, 0, 0, 0]).unwrap(),
            Complex64::new(-3.0, -3.0) / r10
        ));
        assert!(approx(
            c.map_block(&[1, 0, 1, 0]).unwrap(),
            Complex64::new(3.0, 3.0) / r10
        ));
        assert!(approx(
            c.map_block(&[0, 1, 1, 1]).unwrap(),
            Complex64::new(-1.0, 1.0) / r10
        ));
    }

    #[test]
    fn qpsk_table_entries() {
        let c = Constellation::qpsk();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(approx(c.map_block(&[1, 1]).unwrap(), Complex64::new(s, s)));
        assert!(approx(c.map_block(&[0, 1]).unwrap(), Complex64::new(-s, s)));
        assert!(approx(c.map_block(&[1, 0]).unwrap(), Complex64::new(s, -s)));
    }

    #[test]
    fn wrong_pattern_length_is_an_error() {
        let c = Constellation::qam16();
        assert!(matches!(
            c.map_block(&[0, 1]),
            Err(Error::DimensionMismatch {
                expected: 4,
                actual: 2
            })
        ));
        assert!(c.map_block(&[0, 1, 2, 0]).is_err());
    }

    #[test]
    fn unit_average_energy() {
        for m in [Modulation::Bpsk, Modulation::Qpsk, Modulation::Qam16] {
            let c = Constellation::new(m);
            let e = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.size() as f64;
            assert!((e - 1.0).abs() < 1e-12, "{m}: {e}");
        }
    }

    #[test]
    fn round_trip_through_lookup() {
        for m in [Modulation::Bpsk, Modulation::Qpsk, Modulation::Qam16] {
            let c = Constellation::new(m);
            let mut seen = vec![false; c.size()];
            for label in 0..c.size() {
                let bits = c.label_bits(label);
                let p = c.map_block(&bits).unwrap();
                let back = c.lookup(p).unwrap();
                assert_eq!(c.label_bits(back), bits);
                seen[back] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn qam16_is_gray_along_each_axis() {
        let c = Constellation::qam16();
        let step = 2.0 / 10f64.sqrt();
        for a in 0..16 {
            for b in 0..16 {
                let d = c.points()[a] - c.points()[b];
                let axis_neighbor = ((d.re.abs() - step).abs() < 1e-12 && d.im.abs() < 1e-12)
                    || ((d.im.abs() - step).abs() < 1e-12 && d.re.abs() < 1e-12);
                if axis_neighbor {
                    assert_eq!((a ^ b).count_ones(), 1, "labels {a:04b} and {b:04b}");
                }
            }
            // every single-bit flip stays on the same row or column
            for bit in 0..4 {
                let d = c.points()[a] - c.points()[a ^ (1 << bit)];
                assert!(d.re.abs() < 1e-12 || d.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn layout_index_examples() {
        let l = FrameLayout::for_coded_len(2304, 4, 4, 4).unwrap();
        assert_eq!(l.uses, 144);
        assert_eq!(l.layout_index(0, 0, 0).unwrap(), 0);
        assert_eq!(l.layout_index(0, 1, 0).unwrap(), 4);
        assert_eq!(l.layout_index(143, 3, 3).unwrap(), 2303);
        assert!(l.layout_index(144, 0, 0).is_err());
        assert!(l.layout_index(0, 4, 0).is_err());
        assert!(l.layout_index(0, 0, 4).is_err());
        assert!(l.position(2304).is_err());
    }

    #[test]
    fn layout_is_bijective() {
        let l = FrameLayout::for_coded_len(96, 3, 3, 2).unwrap();
        for k in 0..l.coded_len() {
            let (u, t, b) = l.position(k).unwrap();
            assert_eq!(l.layout_index(u, t, b).unwrap(), k);
        }
    }

    #[test]
    fn layout_rejects_partial_uses() {
        assert!(FrameLayout::for_coded_len(2008, 4, 4, 4).is_err());
        assert!(FrameLayout::for_coded_len(16, 4, 2, 4).is_err());
    }

    #[test]
    fn snr_examples() {
        assert_eq!(snr_to_sigma2(0.0, 4), 4.0);
        assert!((snr_to_sigma2(14.0, 4) - 0.159_243_2).abs() < 1e-6);
        assert!((snr_to_sigma2(10.0, 1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_deterministic() {
        let c = Constellation::qam16();
        let s = vec![c.points()[3], c.points()[9]];
        let a = sample_channel_use(&s, 2, 0.3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = sample_channel_use(&s, 2, 0.3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.h.rows(), 2);
        assert_eq!(a.y.len(), 2);
    }

    #[test]
    fn channel_and_noise_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let s = [Complex64::new(0.0, 0.0)];
        let sigma2 = 0.37;
        let n = 100_000;
        let (mut h_pow, mut n_pow) = (0.0, 0.0);
        for _ in 0..n {
            let cu = sample_channel_use(&s, 1, sigma2, &mut rng).unwrap();
            h_pow += cu.h[(0, 0)].norm_sqr();
            // zero symbol, so y is pure noise
            n_pow += cu.y[0].norm_sqr();
        }
        let h_mean = h_pow / n as f64;
        let n_mean = n_pow / n as f64 / sigma2;
        assert!((0.98..=1.02).contains(&h_mean), "{h_mean}");
        assert!((0.98..=1.02).contains(&n_mean), "{n_mean}");
    }

    #[test]
    fn sampling_rejects_bad_variance() {
        let s = [Complex64::new(1.0, 0.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_channel_use(&s, 1, 0.0, &mut rng).is_err());
        assert!(sample_channel_use(&s, 1, f64::NAN, &mut rng).is_err());
    }
}
