//! Command line front end: flag parsing, sweep execution and CSV output.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Parser;
use thiserror::Error;

use crate::airlink::Modulation;
use crate::montecarlo::{run_sweep, Mode, RunMetrics, SimConfig, SweepRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const CSV_HEADER: &str =
    "snr_db,ter,mode,blocks,bits,errors,ber,avg_visited_nodes,avg_beta_stores,seed";

#[derive(Debug, Error)]
pub enum CliError {
    /// Help or version text requested.
    #[error("{0}")]
    Info(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Sim(#[from] crate::Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Info(_) => EXIT_OK,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Sim(_) | CliError::Io(_) => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "teradapt",
    version,
    about = "BER / detector-node / beta-store sweeps for a TER-adaptive MIMO receiver"
)]
struct Flags {
    /// Transmit antennas
    #[arg(long = "mt", default_value_t = 4)]
    m_t: usize,
    /// Receive antennas
    #[arg(long = "mr", default_value_t = 4)]
    m_r: usize,
    /// Constellation: qpsk or 16qam
    #[arg(long = "mod", default_value = "16qam")]
    modulation: String,
    /// Information bits per code block
    #[arg(long = "info-bits", default_value_t = 1152)]
    info_bits: usize,
    /// SNR points in dB: start:step:stop (inclusive) or a comma list
    #[arg(long, default_value = "10:2:14", allow_hyphen_values = true)]
    snr: String,
    /// Target error rates, comma separated
    #[arg(long, default_value = "1e-4,1e-3,1e-2")]
    ter: String,
    /// Receiver modes, comma separated: baseline, adapt-detect, adapt-full
    #[arg(long, default_value = "baseline,adapt-detect,adapt-full")]
    mode: String,
    /// Blocks per sweep cell
    #[arg(long, default_value_t = 100)]
    blocks: usize,
    /// Master seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV output path; standard output when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A parsed command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub config: SimConfig,
    pub out: Option<PathBuf>,
}

fn parse_f64(s: &str) -> Result<f64, CliError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("cannot parse '{s}' as a number")))?;
    if !v.is_finite() {
        return Err(CliError::Usage(format!("'{s}' is not finite")));
    }
    Ok(v)
}

/// Parses `start:step:stop` (inclusive) or `a,b,c`.
pub fn parse_snr_list(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (parse_f64(start)?, parse_f64(step)?, parse_f64(stop)?);
            if step == 0.0 || (stop - start) * step < 0.0 {
                return Err(CliError::Usage(format!(
                    "SNR range '{spec}' does not reach its end point"
                )));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..n).map(|i| start + i as f64 * step).collect())
        }
        [_] => spec.split(',').map(parse_f64).collect(),
        _ => Err(CliError::Usage(format!("malformed SNR range '{spec}'"))),
    }
}

fn parse_list<T>(
    spec: &str,
    item: impl Fn(&str) -> Result<T, CliError>,
) -> Result<Vec<T>, CliError> {
    spec.split(',').map(|s| item(s.trim())).collect()
}

/// Parses `argv` (program name first) into a sweep configuration.
pub fn parse_args<S: AsRef<str>>(argv: &[S]) -> Result<Invocation, CliError> {
    let flags = Flags::try_parse_from(argv.iter().map(|s| s.as_ref())).map_err(|e| {
        use clap::error::ErrorKind;
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliError::Info(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    })?;

    let modulation: Modulation = flags
        .modulation
        .parse()
        .map_err(|e: crate::Error| CliError::Usage(e.to_string()))?;
    if modulation == Modulation::Bpsk {
        return Err(CliError::Usage("--mod must be qpsk or 16qam".into()));
    }
    let config = SimConfig {
        m_t: flags.m_t,
        m_r: flags.m_r,
        modulation,
        info_bits: flags.info_bits,
        snr_db: parse_snr_list(&flags.snr)?,
        ter: parse_list(&flags.ter, parse_f64)?,
        modes: parse_list(&flags.mode, |s| {
            s.parse::<Mode>()
                .map_err(|e| CliError::Usage(e.to_string()))
        })?,
        blocks: flags.blocks,
        seed: flags.seed,
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(Invocation {
        config,
        out: flags.out,
    })
}

fn csv_line(r: &SweepRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.snr_db,
        r.ter,
        r.mode,
        r.blocks,
        r.bits,
        r.errors,
        r.ber,
        r.avg_visited_nodes,
        r.avg_beta_stores,
        r.seed
    )
}

/// Writes the header and one line per row, sorted by (mode, ter, snr).
///
/// Floats use the shortest representation that parses back to the same value.
pub fn write_csv<W: Write + ?Sized>(metrics: &RunMetrics, out: &mut W) -> io::Result<()> {
    let mut rows: Vec<&SweepRow> = metrics.rows.iter().collect();
    rows.sort_by(|a, b| {
        a.mode
            .cmp(&b.mode)
            .then(a.ter.total_cmp(&b.ter))
            .then(a.snr_db.total_cmp(&b.snr_db))
    });
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", csv_line(r))?;
    }
    Ok(())
}

pub fn emit_csv(metrics: &RunMetrics, path: &Path) -> Result<(), CliError> {
    if metrics.rows.is_empty() {
        return Err(CliError::Sim(crate::Error::InvalidInput(
            "no rows to write".into(),
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(metrics, &mut w)?;
    w.flush()?;
    Ok(())
}

fn summary(r: &SweepRow) -> String {
    format!(
        "snr={:>6.2} dB  ter={:<8e} {:<13} ber={:.4e} ({}/{})  nodes/use={:.2}  beta/block={:.1}",
        r.snr_db,
        r.ter,
        r.mode.as_str(),
        r.ber,
        r.errors,
        r.bits,
        r.avg_visited_nodes,
        r.avg_beta_stores
    )
}

fn run(argv: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let inv = match parse_args(argv) {
        Ok(inv) => inv,
        Err(CliError::Info(text)) => {
            write!(stdout, "{text}")?;
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    let metrics = run_sweep(&inv.config)?;
    match &inv.out {
        Some(path) => {
            for r in &metrics.rows {
                writeln!(stdout, "{}", summary(r))?;
            }
            emit_csv(&metrics, path)?;
        }
        None => {
            // CSV owns stdout, so progress lines move to stderr
            for r in &metrics.rows {
                writeln!(stderr, "{}", summary(r))?;
            }
            write_csv(&metrics, stdout)?;
        }
    }
    Ok(())
}

/// Parse, sweep, write CSV. Returns the process exit code.
pub fn main_run(argv: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match run(argv, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
