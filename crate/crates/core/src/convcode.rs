//! The rate-1/2 systematic recursive convolutional code with octal generators
//! (5/7): feedback `1 + D + D²`, feedforward `1 + D²`.
//!
//! Register recursion per step with input `u`:
//!
//! ```text
//! a = u ⊕ a₁ ⊕ a₂      (feedback 7)
//! p = a ⊕ a₂           (feedforward 5)
//! state (a₁, a₂) → (a, a₁)
//! ```
//!
//! State index is `a₁·2 + a₂`. The encoder starts in state 0 and the block is
//! not terminated.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub const NUM_STATES: usize = 4;

/// Encodes logical info bits into `(systematic, parity)` pairs, flattened.
pub fn encode(info: &[u8]) -> Vec<u8> {
    let (mut a1, mut a2) = (0u8, 0u8);
    let mut out = Vec::with_capacity(2 * info.len());
    for &u in info {
        let a = (u & 1) ^ a1 ^ a2;
        let p = a ^ a2;
        out.push(u & 1);
        out.push(p);
        a2 = a1;
        a1 = a;
    }
    out
}

/// One trellis branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub input: u8,
    /// Bipolar systematic output, equal to the bipolar input.
    pub sys: f64,
    /// Bipolar parity output.
    pub par: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trellis {
    /// `edges[2·state + input]`
    edges: Vec<Edge>,
}

fn bipolar(bit: u8) -> f64 {
    if bit == 1 {
        1.0
    } else {
        -1.0
    }
}

impl Trellis {
    pub fn num_states(&self) -> usize {
        NUM_STATES
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, state: usize, input: u8) -> &Edge {
        &self.edges[2 * state + input as usize]
    }

    /// Edges entering `state`.
    pub fn incoming(&self, state: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.to == state)
    }

    /// Re-encodes `info` by walking the trellis from state 0.
    pub fn walk(&self, info: &[u8]) -> Vec<u8> {
        let mut state = 0;
        let mut out = Vec::with_capacity(2 * info.len());
        for &u in info {
            let e = self.edge(state, u & 1);
            out.push((e.sys > 0.0) as u8);
            out.push((e.par > 0.0) as u8);
            state = e.to;
        }
        out
    }
}

pub fn build_trellis() -> Trellis {
    let mut edges = Vec::with_capacity(2 * NUM_STATES);
    for from in 0..NUM_STATES {
        let a1 = (from >> 1) as u8 & 1;
        let a2 = from as u8 & 1;
        for input in 0..2u8 {
            let a = input ^ a1 ^ a2;
            let p = a ^ a2;
            edges.push(Edge {
                from,
                to: ((a as usize) << 1) | a1 as usize,
                input,
                sys: bipolar(input),
                par: bipolar(p),
            });
        }
    }
    Trellis { edges }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Seeded pseudo-random permutation of the coded block.
///
/// Forward: `out[i] = x[perm[i]]`. Inverse undoes it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
    seed: u64,
}

impl Interleaver {
    /// Fisher-Yates shuffle of `0..len` driven by a ChaCha8 stream seeded with `seed`.
    pub fn new(len: usize, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self { perm, seed }
    }

    /// Wraps an explicit permutation.
    pub fn from_permutation(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidInput("not a permutation".into()));
            }
        }
        Ok(Self { perm, seed: 0 })
    }

    pub fn identity(len: usize) -> Self {
        Self {
            perm: (0..len).collect(),
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn permute<T: Copy + Default>(&self, x: &[T], direction: Direction) -> Result<Vec<T>> {
        if x.len() != self.perm.len() {
            return Err(Error::DimensionMismatch {
                expected: self.perm.len(),
                actual: x.len(),
            });
        }
        let mut out = vec![T::default(); x.len()];
        match direction {
            Direction::Forward => {
                for (o, &p) in out.iter_mut().zip(&self.perm) {
                    *o = x[p];
                }
            }
            Direction::Inverse => {
                for (&xi, &p) in x.iter().zip(&self.perm) {
                    out[p] = xi;
                }
            }
        }
        Ok(out)
    }
}
