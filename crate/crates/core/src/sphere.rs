//! Soft-output MIMO detection.
//!
//! [`sts_detect`] computes max-log a-posteriori LLRs for every bit of one
//! channel use with a single depth-first tree search over the triangular
//! system `‖y′ − R s‖²`. The search keeps one MAP metric and one
//! counterhypothesis metric per bit. Children are visited in ascending metric
//! increment order (Schnorr-Euchner) and the search radius starts at infinity
//! and shrinks as metrics improve.
//!
//! LLR clipping is part of the search itself: every time the MAP metric
//! improves, each counterhypothesis metric is capped at
//! `λ_MAP + σ²·clip`. A tighter cap means tighter pruning radii, so the number
//! of visited nodes falls as the clipping level falls, while the MAP hypothesis
//! and hence the hard decisions are unaffected.
//!
//! [`exhaustive_max_log`] enumerates every candidate vector and serves as the
//! reference for the tree search.

use num_complex::Complex64;

use crate::airlink::{ChannelUse, Constellation};
use crate::matqr::{qr_decompose, QrFactors};
use crate::{Error, Result};

/// Largest candidate set the exhaustive reference will enumerate.
pub const EXHAUSTIVE_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// LLR clipping magnitude, `+∞` for exact max-log output.
    pub clip: f64,
    pub count_nodes: bool,
}

impl DetectorConfig {
    pub fn unclipped() -> Self {
        Self {
            clip: f64::INFINITY,
            count_nodes: true,
        }
    }

    pub fn clipped(clip: f64) -> Result<Self> {
        if !(clip > 0.0) {
            return Err(Error::InvalidInput(format!(
                "clipping level must be positive, got {clip}"
            )));
        }
        Ok(Self {
            clip,
            count_nodes: true,
        })
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self::unclipped()
    }
}

/// Per-bit LLRs for one channel use, `L > 0` favouring logical 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectedLlrs {
    bits_per_symbol: usize,
    /// Flattened `[t][b]`.
    pub llr: Vec<f64>,
    pub visited_nodes: u64,
}

impl DetectedLlrs {
    pub fn get(&self, t: usize, b: usize) -> f64 {
        self.llr[t * self.bits_per_symbol + b]
    }

    pub fn streams(&self) -> usize {
        self.llr.len() / self.bits_per_symbol
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }
}

/// QR-decomposes the channel and rotates the received vector.
pub fn preprocess(cu: &ChannelUse) -> Result<QrFactors> {
    qr_decompose(&cu.h)?.with_rotated(&cu.y)
}

fn check_inputs(f: &QrFactors, sigma2: f64) -> Result<()> {
    if f.y_rot.len() != f.streams() {
        return Err(Error::DimensionMismatch {
            expected: f.streams(),
            actual: f.y_rot.len(),
        });
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidInput(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    Ok(())
}

/// Max-log LLRs by enumerating all `|S|^M_T` candidate vectors.
pub fn exhaustive_max_log(
    f: &QrFactors,
    c: &Constellation,
    sigma2: f64,
) -> Result<DetectedLlrs> {
    check_inputs(f, sigma2)?;
    let m_t = f.streams();
    let bps = c.bits_per_symbol();
    let size = c.size();
    let total = (0..m_t).try_fold(1usize, |acc, _| acc.checked_mul(size));
    let total = match total {
        Some(n) if n <= EXHAUSTIVE_LIMIT => n,
        _ => {
            return Err(Error::InvalidInput(format!(
                "{size}^{m_t} candidates exceed the enumeration limit"
            )))
        }
    };

    // best[t][b][bit]
    let mut best = vec![[f64::INFINITY; 2]; m_t * bps];
    let mut labels = vec![0usize; m_t];
    let mut s = vec![Complex64::new(0.0, 0.0); m_t];
    for idx in 0..total {
        let mut rest = idx;
        for t in 0..m_t {
            labels[t] = rest % size;
            rest /= size;
            s[t] = c.points()[labels[t]];
        }
        let metric: f64 = (0..m_t)
            .map(|i| {
                let rs: Complex64 = (i..m_t).map(|j| f.r[(i, j)] * s[j]).sum();
                (f.y_rot[i] - rs).norm_sqr()
            })
            .sum();
        for t in 0..m_t {
            for b in 0..bps {
                let bit = c.label_bit(labels[t], b) as usize;
                let slot = &mut best[t * bps + b][bit];
                if metric < *slot {
                    *slot = metric;
                }
            }
        }
    }

    Ok(DetectedLlrs {
        bits_per_symbol: bps,
        llr: best.iter().map(|m| (m[0] - m[1]) / sigma2).collect(),
        visited_nodes: total as u64,
    })
}

/// Single-tree-search soft-output sphere detection with LLR clipping.
pub fn sts_detect(
    f: &QrFactors,
    c: &Constellation,
    sigma2: f64,
    cfg: &DetectorConfig,
) -> Result<DetectedLlrs> {
    check_inputs(f, sigma2)?;
    if !(cfg.clip > 0.0) {
        return Err(Error::InvalidInput(format!(
            "clipping level must be positive, got {}",
            cfg.clip
        )));
    }
    let m_t = f.streams();
    let bps = c.bits_per_symbol();

    let mut search = Search {
        f,
        c,
        m_t,
        bps,
        cap_offset: sigma2 * cfg.clip,
        count_nodes: cfg.count_nodes,
        lambda_map: f64::INFINITY,
        map_path: Vec::new(),
        lambda_bar: vec![f64::INFINITY; m_t * bps],
        path: vec![0; m_t],
        visited: 0,
        scratch: vec![Vec::with_capacity(c.size()); m_t],
    };
    if m_t > 0 {
        search.expand(m_t - 1, 0.0);
    }

    let llr = (0..m_t * bps)
        .map(|k| {
            let (t, b) = (k / bps, k % bps);
            let sign = if c.label_bit(search.map_path[t], b) == 1 {
                1.0
            } else {
                -1.0
            };
            sign * (search.lambda_bar[k] - search.lambda_map) / sigma2
        })
        .collect();

    Ok(DetectedLlrs {
        bits_per_symbol: bps,
        llr,
        visited_nodes: search.visited,
    })
}

struct Search<'a> {
    f: &'a QrFactors,
    c: &'a Constellation,
    m_t: usize,
    bps: usize,
    /// `σ²·clip`; infinite when unclipped.
    cap_offset: f64,
    count_nodes: bool,
    lambda_map: f64,
    /// Labels of the MAP hypothesis; empty until the first leaf.
    map_path: Vec<usize>,
    /// Flattened `[t][b]` counterhypothesis metrics.
    lambda_bar: Vec<f64>,
    /// Labels of the current partial vector; valid for levels `>= current`.
    path: Vec<usize>,
    visited: u64,
    scratch: Vec<Vec<(f64, usize)>>,
}

impl Search<'_> {
    /// Visits the children of the node whose path covers levels above `level`.
    fn expand(&mut self, level: usize, d_parent: f64) {
        let r = &self.f.r;
        let mut center = self.f.y_rot[level];
        for j in level + 1..self.m_t {
            center -= r[(level, j)] * self.c.points()[self.path[j]];
        }
        let r_ll = r[(level, level)].re;

        let mut children = std::mem::take(&mut self.scratch[level]);
        children.clear();
        children.extend(
            self.c
                .points()
                .iter()
                .enumerate()
                .map(|(label, &p)| ((center - p * r_ll).norm_sqr(), label)),
        );
        children.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if self.count_nodes {
            self.visited += children.len() as u64;
        }

        for &(inc, label) in &children {
            let d = d_parent + inc;
            // Children come in ascending d: once d reaches the radius that
            // ignores this level's labels, no later sibling can survive.
            if d >= self.radius(level, None) {
                break;
            }
            self.path[level] = label;
            if d >= self.radius(level, Some(label)) {
                continue;
            }
            if level == 0 {
                self.leaf(d);
            } else {
                self.expand(level - 1, d);
            }
        }
        self.scratch[level] = children;
    }

    /// Pruning radius for a node at `level`: the largest metric among the
    /// targets its subtree could still improve. With `label == None` every bit
    /// of `level` counts as a target, which bounds all siblings at once.
    fn radius(&self, level: usize, label: Option<usize>) -> f64 {
        if self.map_path.is_empty() {
            return f64::INFINITY;
        }
        let bps = self.bps;
        let mut radius = self.lambda_map;
        for &lb in &self.lambda_bar[..level * bps] {
            radius = radius.max(lb);
        }
        for t in level..self.m_t {
            let here = if t == level { label } else { Some(self.path[t]) };
            let map_label = self.map_path[t];
            for b in 0..bps {
                let differs = match here {
                    Some(l) => self.c.label_bit(l, b) != self.c.label_bit(map_label, b),
                    None => true,
                };
                if differs {
                    radius = radius.max(self.lambda_bar[t * bps + b]);
                }
            }
        }
        radius
    }

    fn differs_from_map(&self, t: usize, b: usize) -> bool {
        self.c.label_bit(self.path[t], b) != self.c.label_bit(self.map_path[t], b)
    }

    fn leaf(&mut self, d: f64) {
        let bps = self.bps;
        if d < self.lambda_map {
            if !self.map_path.is_empty() {
                for t in 0..self.m_t {
                    for b in 0..bps {
                        if self.differs_from_map(t, b) {
                            self.lambda_bar[t * bps + b] = self.lambda_map;
                        }
                    }
                }
            }
            self.lambda_map = d;
            self.map_path.clone_from(&self.path);
            let cap = d + self.cap_offset;
            for lb in self.lambda_bar.iter_mut() {
                *lb = lb.min(cap);
            }
        } else {
            for t in 0..self.m_t {
                for b in 0..bps {
                    let k = t * bps + b;
                    if d < self.lambda_bar[k] && self.differs_from_map(t, b) {
                        self.lambda_bar[k] = d;
                    }
                }
            }
        }
        debug_assert!(self.lambda_bar.iter().all(|&lb| self.lambda_map <= lb));
    }
}
