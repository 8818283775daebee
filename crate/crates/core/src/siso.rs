//! Log-MAP BCJR decoding of the (5/7) recursive systematic code.
//!
//! Branch metrics are `½·(c_sys·L_sys + c_par·L_par)` for bipolar edge outputs
//! `c`, which is the exact log-probability of the edge up to a per-step
//! constant. All state metrics are combined with the Jacobian logarithm
//! [`max_star`], so the output equals the exact a-posteriori LLR.
//!
//! Selective decoding runs the same recursions but keeps backward state metric
//! vectors only for the trellis steps whose systematic bit is still weak
//! (`|L_A| < L_TER`). Strong systematic bits are decided from their a-priori
//! sign. The number of kept vectors is reported as `beta_stores`.

use crate::convcode::{encode, Trellis, NUM_STATES};
use crate::{Error, Result};

/// Stand-in for `−∞` in state metrics.
pub const NEG_INF: f64 = -1e30;

/// Largest block the exhaustive reference will enumerate.
pub const EXHAUSTIVE_MAX_K: usize = 12;

/// Jacobian logarithm `ln(eᵃ + eᵇ)`.
#[inline]
pub fn max_star(a: f64, b: f64) -> f64 {
    if a <= NEG_INF {
        return b.max(NEG_INF);
    }
    if b <= NEG_INF {
        return a;
    }
    a.max(b) + (-(a - b).abs()).exp().ln_1p()
}

/// Exact `ln P(c | L)` for a bipolar bit `c` with LLR `L`.
pub fn ln_p_exact(c: f64, l: f64) -> f64 {
    // −ln(1 + e^{−cL}), evaluated without overflow
    let x = -c * l;
    if x > 0.0 {
        -(x + (-x).exp().ln_1p())
    } else {
        -x.exp().ln_1p()
    }
}

/// Large-|L| approximation `½(c·L − |L|)` of [`ln_p_exact`].
pub fn ln_p_approx(c: f64, l: f64) -> f64 {
    0.5 * (c * l - l.abs())
}

/// Decoder a-priori LLRs in coded order: systematic, parity, systematic, ...
#[derive(Debug, Clone, PartialEq)]
pub struct AprioriFrame {
    la: Vec<f64>,
}

impl AprioriFrame {
    pub fn new(la: Vec<f64>) -> Result<Self> {
        if !la.len().is_multiple_of(2) || la.is_empty() {
            return Err(Error::InvalidInput(format!(
                "a-priori frame needs a positive even length, got {}",
                la.len()
            )));
        }
        if la.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidInput("a-priori LLRs must be finite".into()));
        }
        Ok(Self { la })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.la
    }

    /// Number of information bits (trellis steps).
    pub fn info_len(&self) -> usize {
        self.la.len() / 2
    }

    pub fn systematic(&self, k: usize) -> f64 {
        self.la[2 * k]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub ld_info: Vec<f64>,
    /// Logical bits; a zero LLR decides 1.
    pub decisions: Vec<u8>,
    pub beta_stores: usize,
    pub decoded_mask: Vec<bool>,
}

#[inline]
fn branch(la: &[f64], k: usize, sys: f64, par: f64) -> f64 {
    0.5 * (sys * la[2 * k] + par * la[2 * k + 1])
}

fn normalize(m: &mut [f64; NUM_STATES]) {
    let top = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for x in m.iter_mut() {
        *x = if *x <= NEG_INF { NEG_INF } else { *x - top };
    }
}

/// Backward sweep storing β only at masked steps, then a forward sweep that
/// emits `(systematic, parity)` a-posteriori LLRs for those steps.
fn recurse(la: &[f64], trellis: &Trellis, mask: &[bool]) -> (Vec<Option<[f64; 2]>>, usize) {
    let steps = mask.len();
    let edges = trellis.edges();

    // β_{k+1} is what step k needs; β_K = 0 everywhere (open trellis end).
    let mut beta = [0.0; NUM_STATES];
    let mut stored: Vec<[f64; NUM_STATES]> = Vec::with_capacity(steps);
    for k in (0..steps).rev() {
        if mask[k] {
            stored.push(beta);
        }
        if k == 0 {
            break;
        }
        let mut prev = [NEG_INF; NUM_STATES];
        for e in edges {
            let m = beta[e.to] + branch(la, k, e.sys, e.par);
            prev[e.from] = max_star(prev[e.from], m);
        }
        normalize(&mut prev);
        beta = prev;
    }
    let beta_stores = stored.len();

    let mut alpha = [NEG_INF; NUM_STATES];
    alpha[0] = 0.0;
    let mut out = vec![None; steps];
    for k in 0..steps {
        if mask[k] {
            let beta_next = stored.pop().expect("one stored β per masked step");
            let mut sys = [NEG_INF; 2];
            let mut par = [NEG_INF; 2];
            for e in edges {
                let delta = alpha[e.from] + branch(la, k, e.sys, e.par) + beta_next[e.to];
                let (si, pi) = ((e.sys > 0.0) as usize, (e.par > 0.0) as usize);
                sys[si] = max_star(sys[si], delta);
                par[pi] = max_star(par[pi], delta);
            }
            out[k] = Some([sys[1] - sys[0], par[1] - par[0]]);
        }
        let mut next = [NEG_INF; NUM_STATES];
        for e in edges {
            let m = alpha[e.from] + branch(la, k, e.sys, e.par);
            next[e.to] = max_star(next[e.to], m);
        }
        normalize(&mut next);
        alpha = next;
    }
    (out, beta_stores)
}

/// Full log-MAP decode; returns a-posteriori LLRs for all `2K` coded bits.
pub fn bcjr_decode(la: &AprioriFrame, trellis: &Trellis) -> Result<Vec<f64>> {
    let mask = vec![true; la.info_len()];
    let (out, _) = recurse(la.as_slice(), trellis, &mask);
    Ok(out
        .into_iter()
        .flat_map(|o| o.expect("every step decoded"))
        .collect())
}

fn hard(l: f64) -> u8 {
    (l >= 0.0) as u8
}

/// Decodes only the info bits with `|L_A(systematic)| < l_ter`.
pub fn selective_decode(la: &AprioriFrame, trellis: &Trellis, l_ter: f64) -> Result<DecodeResult> {
    if !(l_ter >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "selection threshold must be non-negative, got {l_ter}"
        )));
    }
    let k = la.info_len();
    let decoded_mask: Vec<bool> = (0..k).map(|i| la.systematic(i).abs() < l_ter).collect();
    let (out, beta_stores) = recurse(la.as_slice(), trellis, &decoded_mask);
    let ld_info: Vec<f64> = out
        .iter()
        .enumerate()
        .map(|(i, o)| match o {
            Some([sys, _]) => *sys,
            None => la.systematic(i),
        })
        .collect();
    Ok(DecodeResult {
        decisions: ld_info.iter().map(|&l| hard(l)).collect(),
        ld_info,
        beta_stores,
        decoded_mask,
    })
}

/// Full decode packaged as a [`DecodeResult`] (every step stores its β).
pub fn full_decode(la: &AprioriFrame, trellis: &Trellis) -> Result<DecodeResult> {
    selective_decode(la, trellis, f64::INFINITY)
}

/// Reference a-posteriori LLRs by summing over all `2^K` codewords.
pub fn exhaustive_app(la: &AprioriFrame) -> Result<Vec<f64>> {
    let k = la.info_len();
    if k > EXHAUSTIVE_MAX_K {
        return Err(Error::InvalidInput(format!(
            "exhaustive APP limited to K <= {EXHAUSTIVE_MAX_K}, got {k}"
        )));
    }
    let n = 2 * k;
    let l = la.as_slice();
    let mut terms: Vec<(Vec<u8>, f64)> = Vec::with_capacity(1 << k);
    for word in 0..(1usize << k) {
        let info: Vec<u8> = (0..k).map(|i| ((word >> i) & 1) as u8).collect();
        let coded = encode(&info);
        let w = coded
            .iter()
            .zip(l)
            .map(|(&c, &li)| ln_p_exact(if c == 1 { 1.0 } else { -1.0 }, li))
            .sum::<f64>();
        terms.push((coded, w));
    }

    let log_sum_exp = |vals: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = vals.collect();
        let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    };
    Ok((0..n)
        .map(|pos| {
            let one = log_sum_exp(&mut terms.iter().filter(|t| t.0[pos] == 1).map(|t| t.1));
            let zero = log_sum_exp(&mut terms.iter().filter(|t| t.0[pos] == 0).map(|t| t.1));
            one - zero
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convcode::build_trellis;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(k: usize, rng: &mut ChaCha8Rng) -> AprioriFrame {
        AprioriFrame::new((0..2 * k).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap()
    }

    #[test]
    fn max_star_examples() {
        let x = 1.7;
        assert!((max_star(x, x) - (x + 2f64.ln())).abs() < 1e-15);
        assert_eq!(max_star(0.0, f64::NEG_INFINITY), 0.0);
        assert_eq!(max_star(f64::NEG_INFINITY, 0.0), 0.0);
        assert_eq!(max_star(0.0, NEG_INF), 0.0);
        assert_eq!(max_star(NEG_INF, NEG_INF), NEG_INF);
        assert!((max_star(2.0, 1.0) - 2.313_261_687_518_223).abs() < 1e-12);
        assert!((max_star(2.0, 1.0) - 2.31326).abs() < 1e-5);
    }

    #[test]
    fn frame_validation() {
        assert!(AprioriFrame::new(vec![1.0]).is_err());
        assert!(AprioriFrame::new(vec![]).is_err());
        assert!(AprioriFrame::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn zero_prior_gives_zero_posterior() {
        let la = AprioriFrame::new(vec![0.0; 20]).unwrap();
        for l in bcjr_decode(&la, &build_trellis()).unwrap() {
            assert!(l.abs() < 1e-12);
        }
        assert!(exhaustive_app(&la).unwrap().iter().all(|l| l.abs() < 1e-12));
    }

    #[test]
    fn single_step_returns_prior() {
        let la = AprioriFrame::new(vec![2.0, 0.0]).unwrap();
        let ld = bcjr_decode(&la, &build_trellis()).unwrap();
        assert!((ld[0] - 2.0).abs() < 1e-12);
        assert!((exhaustive_app(&la).unwrap()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn matches_exhaustive_app() {
        let trellis = build_trellis();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in [1, 2, 3, 5, 8, 10] {
            for _ in 0..20 {
                let la = random_frame(k, &mut rng);
                let fast = bcjr_decode(&la, &trellis).unwrap();
                let slow = exhaustive_app(&la).unwrap();
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-8, "K={k}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn exhaustive_rejects_long_blocks() {
        let la = AprioriFrame::new(vec![0.5; 2 * (EXHAUSTIVE_MAX_K + 1)]).unwrap();
        assert!(exhaustive_app(&la).is_err());
    }

    #[test]
    fn long_strong_frame_stays_finite() {
        let trellis = build_trellis();
        let info: Vec<u8> = (0..1152).map(|i| ((i * 7 + i / 3) % 2) as u8).collect();
        let la: Vec<f64> = encode(&info)
            .iter()
            .map(|&c| if c == 1 { 40.0 } else { -40.0 })
            .collect();
        let res = full_decode(&AprioriFrame::new(la).unwrap(), &trellis).unwrap();
        assert!(res.ld_info.iter().all(|l| l.is_finite()));
        assert_eq!(res.decisions, info);
        assert_eq!(res.beta_stores, 1152);
    }

    #[test]
    fn approximation_examples() {
        assert_eq!(ln_p_approx(1.0, 10.0), 0.0);
        assert_eq!(ln_p_approx(-1.0, 10.0), -10.0);
        assert_eq!(ln_p_approx(1.0, 2.0), 0.0);
        let exact = ln_p_exact(1.0, 2.0);
        assert!((exact + 0.126_928).abs() < 1e-6);
        assert!((ln_p_approx(1.0, 2.0) - exact).abs() < 0.13);
        // the gap shrinks with |L| for both signs
        for l in [4.0, 8.0, 16.0] {
            assert!((ln_p_approx(1.0, l) - ln_p_exact(1.0, l)).abs() < (-l).exp() * 1.01);
            assert!((ln_p_approx(-1.0, l) - ln_p_exact(-1.0, l)).abs() < (-l).exp() * 1.01);
        }
        assert!(ln_p_exact(-1.0, 800.0).is_finite());
    }

    #[test]
    fn selective_edges() {
        let trellis = build_trellis();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let la = random_frame(16, &mut rng);

        let none = selective_decode(&la, &trellis, 0.0).unwrap();
        assert_eq!(none.beta_stores, 0);
        assert!(none.decoded_mask.iter().all(|&m| !m));
        for k in 0..16 {
            assert_eq!(none.ld_info[k], la.systematic(k));
            assert_eq!(none.decisions[k], (la.systematic(k) >= 0.0) as u8);
        }

        let all = selective_decode(&la, &trellis, f64::INFINITY).unwrap();
        assert_eq!(all.beta_stores, 16);
        let full = bcjr_decode(&la, &trellis).unwrap();
        for k in 0..16 {
            assert_eq!(all.ld_info[k], full[2 * k]);
        }
        assert!(selective_decode(&la, &trellis, -1.0).is_err());
    }

    #[test]
    fn selective_mixed_frame() {
        let trellis = build_trellis();
        let sys = [0.5, -6.0, 5.0, -1.0, 7.0, -8.0, 2.0, 9.0];
        let mut la = Vec::new();
        for (i, s) in sys.iter().enumerate() {
            la.push(*s);
            la.push(0.3 * i as f64 - 1.0);
        }
        let la = AprioriFrame::new(la).unwrap();
        let l_ter = 99f64.ln();
        let res = selective_decode(&la, &trellis, l_ter).unwrap();
        assert_eq!(res.decoded_mask.iter().filter(|&&m| m).count(), 3);
        assert_eq!(res.beta_stores, 3);
        let full = bcjr_decode(&la, &trellis).unwrap();
        for k in 0..8 {
            if res.decoded_mask[k] {
                assert_eq!(res.ld_info[k], full[2 * k]);
            } else {
                assert_eq!(res.ld_info[k], sys[k]);
            }
        }
    }

    proptest! {
        #[test]
        fn selective_properties(seed: u64, k in 1usize..64, t1 in 0.0f64..5.0, t2 in 0.0f64..5.0, bump in 0.0f64..20.0) {
            let trellis = build_trellis();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let la: Vec<f64> = (0..2 * k).map(|_| rng.random_range(-8.0..8.0)).collect();
            let frame = AprioriFrame::new(la.clone()).unwrap();
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let a = selective_decode(&frame, &trellis, lo).unwrap();
            let b = selective_decode(&frame, &trellis, hi).unwrap();
            prop_assert!(a.beta_stores <= b.beta_stores);

            let full = bcjr_decode(&frame, &trellis).unwrap();
            for i in 0..k {
                if b.decoded_mask[i] {
                    prop_assert_eq!(b.ld_info[i], full[2 * i]);
                }
                prop_assert_eq!(b.decisions[i], (b.ld_info[i] >= 0.0) as u8);
            }
            prop_assert_eq!(b.beta_stores, b.decoded_mask.iter().filter(|&&m| m).count());

            // pushing strong systematic bits further out leaves the selection alone
            let mut pushed = la;
            for i in 0..k {
                let s = pushed[2 * i];
                if s.abs() >= hi {
                    pushed[2 * i] = s + s.signum() * bump;
                }
            }
            let c = selective_decode(&AprioriFrame::new(pushed).unwrap(), &trellis, hi).unwrap();
            prop_assert_eq!(c.decoded_mask, b.decoded_mask);
        }
    }
}
