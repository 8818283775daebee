//! Mapping between a target error rate and an LLR magnitude threshold.
//!
//! The hard decision on a bit with LLR `L` is wrong with probability
//! `1 / (1 + e^{|L|})`, so a bit meets a target error rate `ter` exactly when
//! `|L| > ln(1/ter − 1)`. That threshold serves both as the detector clipping
//! level and as the selection threshold of the decoder.

use crate::{Error, Result};

/// Error probability of the hard decision taken on an LLR.
pub fn bit_error_prob(l: f64) -> f64 {
    // exp overflows to +inf for huge |l|, which correctly yields 0
    1.0 / (1.0 + l.abs().exp())
}

/// Mean of [`bit_error_prob`] over the information-bit LLRs of a block.
pub fn estimate_block_ber(ld_info: &[f64]) -> Result<f64> {
    if ld_info.is_empty() {
        return Err(Error::InvalidInput("empty LLR block".into()));
    }
    Ok(ld_info.iter().map(|&l| bit_error_prob(l)).sum::<f64>() / ld_info.len() as f64)
}

/// `ln(1/ter − 1)` for `0 < ter < 0.5`.
pub fn ter_to_clip(ter: f64) -> Result<f64> {
    if !(ter > 0.0 && ter < 0.5) {
        return Err(Error::InvalidInput(format!(
            "target error rate must lie in (0, 0.5), got {ter}"
        )));
    }
    Ok((1.0 / ter - 1.0).ln())
}

/// A target error rate together with its LLR threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerPolicy {
    ter: f64,
    l_ter: f64,
}

impl TerPolicy {
    pub fn new(ter: f64) -> Result<Self> {
        Ok(Self {
            ter,
            l_ter: ter_to_clip(ter)?,
        })
    }

    pub fn ter(&self) -> f64 {
        self.ter
    }

    pub fn l_ter(&self) -> f64 {
        self.l_ter
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_prob_examples() {
        assert_eq!(bit_error_prob(0.0), 0.5);
        assert!((bit_error_prob(99f64.ln()) - 0.01).abs() < 1e-15);
        assert!((bit_error_prob(-(99f64.ln())) - 0.01).abs() < 1e-15);
        assert!(bit_error_prob(50.0) < 2e-22);
        assert_eq!(bit_error_prob(f64::INFINITY), 0.0);
    }

    #[test]
    fn block_estimate() {
        let l = 99f64.ln();
        assert!((estimate_block_ber(&[l, -l, l]).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(
            estimate_block_ber(&[0.0, f64::INFINITY, 0.0, f64::NEG_INFINITY]).unwrap(),
            0.25
        );
        assert!(estimate_block_ber(&[]).is_err());
    }

    #[test]
    fn block_estimate_matches_direct_sum() {
        let llrs: Vec<f64> = (0..257).map(|i| ((i * 37) % 101) as f64 / 7.0 - 6.0).collect();
        let mut direct = 0.0;
        for &l in &llrs {
            direct += 1.0 / (1.0 + l.abs().exp());
        }
        direct /= llrs.len() as f64;
        assert!((estimate_block_ber(&llrs).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn clip_examples() {
        assert!((ter_to_clip(1e-2).unwrap() - 4.59512).abs() < 1e-5);
        assert!((ter_to_clip(1e-3).unwrap() - 6.90675).abs() < 1e-5);
        let near_half = ter_to_clip(0.5 - 1e-9).unwrap();
        assert!(near_half > 0.0 && near_half < 1e-8);
        for bad in [0.0, 0.5, 0.7, -1e-3, f64::NAN] {
            assert!(ter_to_clip(bad).is_err());
        }
    }

    #[test]
    fn clip_round_trip_and_monotone() {
        let ters = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
        for &t in &ters {
            assert!((bit_error_prob(ter_to_clip(t).unwrap()) - t).abs() < 1e-12);
        }
        for w in ters.windows(2) {
            assert!(ter_to_clip(w[1]).unwrap() > ter_to_clip(w[0]).unwrap());
        }
        let p = TerPolicy::new(1e-4).unwrap();
        assert_eq!(p.ter(), 1e-4);
        assert!((p.l_ter() - 9999f64.ln()).abs() < 1e-12);
    }
}
