//! Block-level link simulation and SNR × TER × mode sweeps.
//!
//! One block: random info bits → (5/7) encoder → interleaver → Gray mapping
//! onto `U` channel uses → Rayleigh channel + AWGN → QR + sphere detection per
//! use → deinterleave → BCJR (full or selective) → bit errors.
//!
//! Every random draw of a block comes from a ChaCha8 stream keyed by
//! `(master seed, SNR, block index)`. The TER and the receiver mode do not
//! enter the key, so all modes and all TERs see the same bits, channels and
//! noise for a given block and the comparisons between them are paired.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::airlink::{sample_channel_use, snr_to_sigma2, Constellation, FrameLayout, Modulation};
use crate::convcode::{build_trellis, encode, Direction, Interleaver, Trellis};
use crate::matqr::QrFactors;
use crate::siso::{full_decode, selective_decode, AprioriFrame};
use crate::sphere::{preprocess, sts_detect, DetectorConfig};
use crate::tercontrol::ter_to_clip;
use crate::{Error, Result};

/// Receiver variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    /// Unclipped detection, full decoding.
    Baseline,
    /// TER-clipped detection, full decoding.
    AdaptDetect,
    /// TER-clipped detection, selective decoding.
    AdaptFull,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Baseline, Mode::AdaptDetect, Mode::AdaptFull];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::AdaptDetect => "adapt-detect",
            Mode::AdaptFull => "adapt-full",
        }
    }

    fn clips(self) -> bool {
        !matches!(self, Mode::Baseline)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown mode '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub m_t: usize,
    pub m_r: usize,
    pub modulation: Modulation,
    pub info_bits: usize,
    pub snr_db: Vec<f64>,
    pub ter: Vec<f64>,
    pub modes: Vec<Mode>,
    pub blocks: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    /// 4×4, 16-QAM, 1152 info bits.
    fn default() -> Self {
        Self {
            m_t: 4,
            m_r: 4,
            modulation: Modulation::Qam16,
            info_bits: 1152,
            snr_db: vec![14.0],
            ter: vec![1e-4],
            modes: Mode::ALL.to_vec(),
            blocks: 100,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.info_bits == 0 {
            return Err(Error::InvalidConfig("info bits must be positive".into()));
        }
        if self.blocks == 0 {
            return Err(Error::InvalidConfig("need at least one block".into()));
        }
        self.layout()?;
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig(
                "SNR list must be non-empty and finite".into(),
            ));
        }
        if self.ter.is_empty() {
            return Err(Error::InvalidConfig("TER list must be non-empty".into()));
        }
        for &t in &self.ter {
            ter_to_clip(t).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
        if self.modes.is_empty() {
            return Err(Error::InvalidConfig("mode list must be non-empty".into()));
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<FrameLayout> {
        FrameLayout::for_coded_len(
            2 * self.info_bits,
            self.m_t,
            self.m_r,
            self.modulation.bits_per_symbol(),
        )
    }
}

/// Counters from one simulated block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BlockRecord {
    pub bits: u64,
    pub errors: u64,
    pub visited_nodes: u64,
    pub channel_uses: u64,
    pub beta_stores: u64,
}

/// A block record together with the transmitted bits and decoder output.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTrace {
    pub record: BlockRecord,
    pub info: Vec<u8>,
    pub ld_info: Vec<f64>,
}

/// Random realization of one block at one SNR.
struct Realization {
    info: Vec<u8>,
    factors: Vec<QrFactors>,
    sigma2: f64,
}

/// Detector output for one block, deinterleaved into coded order.
struct Detection {
    la: AprioriFrame,
    visited_nodes: u64,
}

/// Fixed per-sweep state: constellation, trellis, interleaver and layout.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: SimConfig,
    constellation: Constellation,
    trellis: Trellis,
    interleaver: Interleaver,
    layout: FrameLayout,
}

const INTERLEAVER_TAG: u64 = 0x494c_5645;
const BLOCK_TAG: u64 = 0x424c_4f43;

/// ChaCha key made of four 64-bit words.
fn keyed_rng(words: [u64; 4]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

impl Simulator {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = cfg.layout()?;
        let interleaver_seed = keyed_rng([cfg.seed, INTERLEAVER_TAG, 0, 0]).random();
        Ok(Self {
            constellation: Constellation::new(cfg.modulation),
            trellis: build_trellis(),
            interleaver: Interleaver::new(layout.coded_len(), interleaver_seed),
            layout,
            cfg,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &FrameLayout {
        &self.layout
    }

    fn realize(&self, snr_db: f64, block_index: u64) -> Result<Realization> {
        let mut rng = keyed_rng([self.cfg.seed, snr_db.to_bits(), block_index, BLOCK_TAG]);
        let info: Vec<u8> = (0..self.cfg.info_bits)
            .map(|_| rng.random::<bool>() as u8)
            .collect();
        let coded = encode(&info);
        let tx = self.interleaver.permute(&coded, Direction::Forward)?;
        let sigma2 = snr_to_sigma2(snr_db, self.cfg.m_t);

        let (m_t, bps) = (self.layout.m_t, self.layout.bits_per_symbol);
        let mut factors = Vec::with_capacity(self.layout.uses);
        let mut symbols = vec![Complex64::new(0.0, 0.0); m_t];
        for u in 0..self.layout.uses {
            for (t, s) in symbols.iter_mut().enumerate() {
                let start = self.layout.layout_index(u, t, 0)?;
                *s = self.constellation.map_block(&tx[start..start + bps])?;
            }
            let cu = sample_channel_use(&symbols, self.layout.m_r, sigma2, &mut rng)?;
            factors.push(preprocess(&cu)?);
        }
        Ok(Realization {
            info,
            factors,
            sigma2,
        })
    }

    fn detect(&self, real: &Realization, clip: f64) -> Result<Detection> {
        let cfg = DetectorConfig {
            clip,
            count_nodes: true,
        };
        let (m_t, bps) = (self.layout.m_t, self.layout.bits_per_symbol);
        let mut rx = vec![0.0; self.layout.coded_len()];
        let mut visited_nodes = 0;
        for (u, f) in real.factors.iter().enumerate() {
            let det = sts_detect(f, &self.constellation, real.sigma2, &cfg)?;
            visited_nodes += det.visited_nodes;
            for t in 0..m_t {
                for b in 0..bps {
                    rx[self.layout.layout_index(u, t, b)?] = det.get(t, b);
                }
            }
        }
        let la = self.interleaver.permute(&rx, Direction::Inverse)?;
        Ok(Detection {
            la: AprioriFrame::new(la)?,
            visited_nodes,
        })
    }

    fn decode(
        &self,
        real: &Realization,
        det: &Detection,
        mode: Mode,
        l_ter: f64,
    ) -> Result<BlockTrace> {
        let res = match mode {
            Mode::AdaptFull => selective_decode(&det.la, &self.trellis, l_ter)?,
            Mode::Baseline | Mode::AdaptDetect => full_decode(&det.la, &self.trellis)?,
        };
        let errors = res
            .decisions
            .iter()
            .zip(&real.info)
            .filter(|(a, b)| a != b)
            .count() as u64;
        Ok(BlockTrace {
            record: BlockRecord {
                bits: real.info.len() as u64,
                errors,
                visited_nodes: det.visited_nodes,
                channel_uses: real.factors.len() as u64,
                beta_stores: res.beta_stores as u64,
            },
            info: real.info.clone(),
            ld_info: res.ld_info,
        })
    }

    /// Full trace of one block.
    pub fn simulate_block(
        &self,
        snr_db: f64,
        ter: f64,
        mode: Mode,
        block_index: u64,
    ) -> Result<BlockTrace> {
        let l_ter = ter_to_clip(ter)?;
        let real = self.realize(snr_db, block_index)?;
        let clip = if mode.clips() { l_ter } else { f64::INFINITY };
        let det = self.detect(&real, clip)?;
        self.decode(&real, &det, mode, l_ter)
    }

    pub fn run_block(
        &self,
        snr_db: f64,
        ter: f64,
        mode: Mode,
        block_index: u64,
    ) -> Result<BlockRecord> {
        Ok(self.simulate_block(snr_db, ter, mode, block_index)?.record)
    }

    /// Records for every `(ter, mode)` cell of one block, indexed
    /// `[ter index][mode index]`. Detection runs once per distinct clip level.
    fn run_block_grid(&self, snr_db: f64, block_index: u64) -> Result<Vec<Vec<BlockRecord>>> {
        let real = self.realize(snr_db, block_index)?;
        let baseline = if self.cfg.modes.contains(&Mode::Baseline) {
            let det = self.detect(&real, f64::INFINITY)?;
            Some(self.decode(&real, &det, Mode::Baseline, 0.0)?.record)
        } else {
            None
        };
        let mut grid = Vec::with_capacity(self.cfg.ter.len());
        for &ter in &self.cfg.ter {
            let l_ter = ter_to_clip(ter)?;
            let det = if self.cfg.modes.iter().any(|m| m.clips()) {
                Some(self.detect(&real, l_ter)?)
            } else {
                None
            };
            let mut row = Vec::with_capacity(self.cfg.modes.len());
            for &mode in &self.cfg.modes {
                row.push(match (mode, &det) {
                    (Mode::Baseline, _) => baseline.expect("baseline computed"),
                    (_, Some(det)) => self.decode(&real, det, mode, l_ter)?.record,
                    (_, None) => unreachable!("clipped detection exists for clipping modes"),
                });
            }
            grid.push(row);
        }
        Ok(grid)
    }
}

/// One-shot convenience wrapper around [`Simulator::run_block`].
pub fn run_block(
    cfg: &SimConfig,
    snr_db: f64,
    ter: f64,
    mode: Mode,
    block_index: u64,
) -> Result<BlockRecord> {
    Simulator::new(cfg.clone())?.run_block(snr_db, ter, mode, block_index)
}

/// Aggregated metrics of one sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub ter: f64,
    pub mode: Mode,
    pub blocks: u64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    /// Per channel use.
    pub avg_visited_nodes: f64,
    /// Per block.
    pub avg_beta_stores: f64,
    pub seed: u64,
}

impl SweepRow {
    fn from_records(
        snr_db: f64,
        ter: f64,
        mode: Mode,
        seed: u64,
        records: impl Iterator<Item = BlockRecord>,
    ) -> Self {
        let mut total = BlockRecord::default();
        let mut blocks = 0u64;
        for r in records {
            blocks += 1;
            total.bits += r.bits;
            total.errors += r.errors;
            total.visited_nodes += r.visited_nodes;
            total.channel_uses += r.channel_uses;
            total.beta_stores += r.beta_stores;
        }
        Self {
            snr_db,
            ter,
            mode,
            blocks,
            bits: total.bits,
            errors: total.errors,
            ber: total.errors as f64 / total.bits as f64,
            avg_visited_nodes: total.visited_nodes as f64 / total.channel_uses as f64,
            avg_beta_stores: total.beta_stores as f64 / blocks as f64,
            seed,
        }
    }
}

/// The result table of a sweep, one row per `(snr, ter, mode)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMetrics {
    pub rows: Vec<SweepRow>,
}

impl RunMetrics {
    pub fn find(&self, snr_db: f64, ter: f64, mode: Mode) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.snr_db == snr_db && r.ter == ter && r.mode == mode)
    }
}

/// Runs every `(snr, ter, mode)` cell over `cfg.blocks` blocks.
///
/// Blocks run in parallel; rows come out grouped by SNR, then TER, then mode
/// in configuration order.
pub fn run_sweep(cfg: &SimConfig) -> Result<RunMetrics> {
    let sim = Simulator::new(cfg.clone())?;
    let mut rows = Vec::with_capacity(cfg.snr_db.len() * cfg.ter.len() * cfg.modes.len());
    for &snr in &cfg.snr_db {
        let grids = (0..cfg.blocks as u64)
            .into_par_iter()
            .map(|b| sim.run_block_grid(snr, b))
            .collect::<Result<Vec<_>>>()?;
        for (ti, &ter) in cfg.ter.iter().enumerate() {
            for (mi, &mode) in cfg.modes.iter().enumerate() {
                rows.push(SweepRow::from_records(
                    snr,
                    ter,
                    mode,
                    cfg.seed,
                    grids.iter().map(|g| g[ti][mi]),
                ));
            }
        }
    }
    Ok(RunMetrics { rows })
}
