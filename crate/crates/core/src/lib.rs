//! Coded MIMO link simulation with a complexity-adaptive a-posteriori receiver.
//!
//! The receiver chain is a single-tree-search soft-output sphere detector whose
//! LLR clipping level is derived from a target error rate (TER), followed by a
//! log-MAP SISO decoder for a systematic (5/7)₈ recursive convolutional code that
//! can restrict full decoding to the bits whose a-priori reliability is below
//! the same TER threshold.
//!
//! Module map:
//!
//! - [`matqr`]: complex matrices and positive-diagonal thin QR
//! - [`airlink`]: constellations, frame layout, Rayleigh channel and noise
//! - [`convcode`]: encoder, trellis and interleaver
//! - [`sphere`]: soft-output sphere detector and its exhaustive oracle
//! - [`siso`]: log-MAP BCJR, selective decoding and the exhaustive APP oracle
//! - [`tercontrol`]: TER to LLR threshold mapping
//! - [`montecarlo`]: block simulation and sweeps
//! - [`cli`]: command line front end and CSV output

pub mod airlink;
pub mod cli;
pub mod convcode;
mod error;
pub mod matqr;
pub mod montecarlo;
pub mod siso;
pub mod sphere;
pub mod tercontrol;

pub use error::{Error, Result};
