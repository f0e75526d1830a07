//! Run manifest, counts/summary serialization and the per-event trace.
//!
//! Data files are deterministic for a given configuration and master seed;
//! wall-clock timestamps live only in the manifest. Floating-point columns
//! carry 17 significant digits so files round-trip losslessly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use mzsim::experiment::{CountRow, Mode, MziConfig};
use mzsim::message::Message;
use mzsim::network::EventHooks;
use mzsim::rng::derive_seed;

use crate::config::RunSpec;
use crate::error::{config_error, CliError, Result};

pub const COUNTS_HEADER: &str =
    "run_id,r,mode,config,phi_rad,n,n_d0,n_d1,n_d0_path0,n_d0_path1,n_d1_path0,n_d1_path1,seed";
pub const SUMMARY_HEADER: &str = "r,voltage,v_hat,v_err,d_hat,d_err,v2,d2,v2_plus_d2";

/// 17-significant-digit scientific notation: exact round trip for f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Deterministic run identifier: a hash of everything that shapes the data.
pub fn run_id(command: &str, spec: &RunSpec) -> String {
    let e = &spec.experiment;
    let canonical = format!(
        "{command};r={:?};voltages={:?};beta={};vpi={};mode={};phi={:?};n={};alpha={};hwp={};warmup={}",
        spec.r_values,
        spec.voltages,
        spec.beta_deg,
        spec.v_pi,
        e.mode,
        e.phi_grid,
        e.events_per_point,
        e.alpha,
        e.hwp_angle,
        e.warmup_fraction,
    );
    format!("{:016x}", derive_seed(e.seed, &canonical))
}

pub struct OutputPaths {
    pub manifest: PathBuf,
    pub counts: PathBuf,
    pub summary: PathBuf,
    pub trace: Option<PathBuf>,
}

impl OutputPaths {
    pub fn new(out_dir: &Path, trace: bool) -> Self {
        OutputPaths {
            manifest: out_dir.join("manifest.txt"),
            counts: out_dir.join("counts.csv"),
            summary: out_dir.join("summary.csv"),
            trace: trace.then(|| out_dir.join("trace.txt")),
        }
    }
}

/// Write the run manifest. This happens before any data file; the data
/// files reference the manifest through the shared run id.
pub fn write_manifest(paths: &OutputPaths, command: &str, id: &str, spec: &RunSpec) -> Result<()> {
    let e = &spec.experiment;
    let mut w = BufWriter::new(File::create(&paths.manifest)?);
    writeln!(w, "run_id = {id}")?;
    writeln!(w, "tool = mzsim {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "created_utc = {}", chrono::Utc::now().to_rfc3339())?;
    writeln!(w, "command = {command}")?;
    writeln!(w, "seed = {}", e.seed)?;
    let r_list: Vec<String> = spec.r_values.iter().map(|r| r.to_string()).collect();
    writeln!(w, "r = {}", r_list.join(","))?;
    match &spec.voltages {
        Some(vs) => {
            let list: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
            writeln!(w, "voltage = {}", list.join(","))?;
        }
        None => writeln!(w, "voltage =")?,
    }
    writeln!(w, "beta_deg = {}", spec.beta_deg)?;
    writeln!(w, "v_pi = {}", spec.v_pi)?;
    writeln!(w, "mode = {}", e.mode)?;
    writeln!(w, "phi_steps = {}", e.phi_grid.len())?;
    writeln!(
        w,
        "phi_first = {}",
        e.phi_grid.first().copied().unwrap_or(0.0)
    )?;
    writeln!(w, "events = {}", e.events_per_point)?;
    writeln!(w, "alpha = {}", e.alpha)?;
    writeln!(w, "hwp_deg = {}", e.hwp_angle.to_degrees())?;
    writeln!(w, "warmup = {}", e.warmup_fraction)?;
    writeln!(w, "counts_file = {}", paths.counts.display())?;
    writeln!(w, "summary_file = {}", paths.summary.display())?;
    if let Some(trace) = &paths.trace {
        writeln!(w, "trace_file = {}", trace.display())?;
    }
    w.flush()?;
    Ok(())
}

/// One line of the counts file.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsRecord {
    pub run_id: String,
    pub r: f64,
    pub mode: Mode,
    pub config: MziConfig,
    pub phi: f64,
    pub n: u64,
    pub d0: u64,
    pub d1: u64,
    pub d0_by_path: [u64; 2],
    pub d1_by_path: [u64; 2],
    pub seed: u64,
}

impl CountsRecord {
    pub fn from_row(run_id: &str, r: f64, mode: Mode, seed: u64, row: &CountRow) -> Self {
        CountsRecord {
            run_id: run_id.to_string(),
            r,
            mode,
            config: row.config,
            phi: row.phi,
            n: row.n,
            d0: row.d0,
            d1: row.d1,
            d0_by_path: row.d0_by_path,
            d1_by_path: row.d1_by_path,
            seed,
        }
    }

    pub fn to_count_row(&self) -> CountRow {
        CountRow {
            phi: self.phi,
            config: self.config,
            n: self.n,
            d0: self.d0,
            d1: self.d1,
            d0_by_path: self.d0_by_path,
            d1_by_path: self.d1_by_path,
        }
    }

    fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.run_id,
            fmt_f64(self.r),
            self.mode,
            match self.config {
                MziConfig::Open => "open",
                MziConfig::Closed => "closed",
            },
            fmt_f64(self.phi),
            self.n,
            self.d0,
            self.d1,
            self.d0_by_path[0],
            self.d0_by_path[1],
            self.d1_by_path[0],
            self.d1_by_path[1],
            self.seed
        )
    }
}

pub fn write_counts(path: &Path, records: &[CountsRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{COUNTS_HEADER}")?;
    for record in records {
        writeln!(w, "{}", record.to_line())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_counts(path: &Path) -> Result<Vec<CountsRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| config_error("counts file is empty"))??;
    if header != COUNTS_HEADER {
        return Err(config_error(format!(
            "unexpected counts header: '{header}'"
        )));
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 13 {
            return Err(config_error(format!(
                "counts line {}: expected 13 fields, got {}",
                idx + 2,
                fields.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| config_error(format!("counts line {}: bad float '{s}'", idx + 2)))
        };
        let parse_u = |s: &str| -> Result<u64> {
            s.parse()
                .map_err(|_| config_error(format!("counts line {}: bad count '{s}'", idx + 2)))
        };
        records.push(CountsRecord {
            run_id: fields[0].to_string(),
            r: parse_f(fields[1])?,
            mode: fields[2].parse()?,
            config: match fields[3] {
                "open" => MziConfig::Open,
                "closed" => MziConfig::Closed,
                other => {
                    return Err(config_error(format!(
                        "counts line {}: bad config '{other}'",
                        idx + 2
                    )))
                }
            },
            phi: parse_f(fields[4])?,
            n: parse_u(fields[5])?,
            d0: parse_u(fields[6])?,
            d1: parse_u(fields[7])?,
            d0_by_path: [parse_u(fields[8])?, parse_u(fields[9])?],
            d1_by_path: [parse_u(fields[10])?, parse_u(fields[11])?],
            seed: parse_u(fields[12])?,
        });
    }
    Ok(records)
}

/// One line of the summary file. Optional fields print as empty columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRecord {
    pub r: f64,
    pub voltage: Option<f64>,
    pub v_hat: f64,
    pub v_err: f64,
    pub d_hat: Option<f64>,
    pub d_err: Option<f64>,
    pub v2: f64,
    pub d2: Option<f64>,
    pub v2_plus_d2: Option<f64>,
}

impl SummaryRecord {
    fn to_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(self.r),
            opt(self.voltage),
            fmt_f64(self.v_hat),
            fmt_f64(self.v_err),
            opt(self.d_hat),
            opt(self.d_err),
            fmt_f64(self.v2),
            opt(self.d2),
            opt(self.v2_plus_d2)
        )
    }
}

pub fn write_summary(path: &Path, records: &[SummaryRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{SUMMARY_HEADER}")?;
    for record in records {
        writeln!(w, "{}", record.to_line())?;
    }
    w.flush()?;
    Ok(())
}

/// Render summary records to the exact file bytes (used by the round-trip
/// check: re-deriving the summary from a parsed counts file must reproduce
/// the emitted bytes).
pub fn summary_bytes(records: &[SummaryRecord]) -> Vec<u8> {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for record in records {
        out.push_str(&record.to_line());
        out.push('\n');
    }
    out.into_bytes()
}

/// Event hooks that stream `event=<n> unit=<name> ch=<k> msg=<6 floats>`
/// lines to a file. Event numbers continue across sweep points.
pub struct TraceWriter {
    writer: BufWriter<File>,
    offset: u64,
    error: Option<std::io::Error>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(TraceWriter {
            writer: BufWriter::new(File::create(path)?),
            offset: 0,
            error: None,
        })
    }

    /// Advance the global event counter before the next sweep point.
    pub fn advance(&mut self, events: u64) {
        self.offset += events;
    }

    pub fn finish(mut self) -> Result<()> {
        if let Some(e) = self.error.take() {
            return Err(CliError::Io(e));
        }
        self.writer.flush()?;
        Ok(())
    }

    fn record(&mut self, line: String) {
        if self.error.is_none() {
            if let Err(e) = writeln!(self.writer, "{line}") {
                self.error = Some(e);
            }
        }
    }
}

impl EventHooks for TraceWriter {
    fn on_unit(&mut self, event: u64, unit: &str, channel: u8, message: &Message) {
        let c = message.components();
        self.record(format!(
            "event={} unit={unit} ch={channel} msg={} {} {} {} {} {}",
            self.offset + event,
            fmt_f64(c[0]),
            fmt_f64(c[1]),
            fmt_f64(c[2]),
            fmt_f64(c[3]),
            fmt_f64(c[4]),
            fmt_f64(c[5]),
        ));
    }

    fn on_choice(&mut self, event: u64, voltage_on: bool) {
        self.record(format!(
            "event={} unit=draw_a ch={}",
            self.offset + event,
            u8::from(voltage_on)
        ));
    }
}
