//! Configuration assembly: defaults, an optional flat `key = value` config
//! file, and command-line flags, in increasing order of precedence.

use std::path::{Path, PathBuf};

use clap::Args;
use mzsim::experiment::{ExperimentConfig, Mode};
use mzsim::optics::reflectivity_from_voltage;

use crate::error::{config_error, Result};

/// Flags shared by all subcommands. Everything is optional here; the
/// resolver fills in config-file values and defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Reflectivity of the variable output splitter (comma-separated list
    /// for a duality scan)
    #[arg(long, value_delimiter = ',')]
    pub r: Option<Vec<f64>>,
    /// Modulator voltage in volts (comma-separated list; converted to
    /// reflectivity via beta and v-pi)
    #[arg(long, value_delimiter = ',')]
    pub voltage: Option<Vec<f64>>,
    /// Modulator geometry angle in degrees for the voltage conversion
    #[arg(long)]
    pub beta_deg: Option<f64>,
    /// Half-wave voltage in volts for the voltage conversion
    #[arg(long)]
    pub v_pi: Option<f64>,
    /// Run mode: delayed_choice, closed, open, blocked_arm0 or blocked_arm1
    #[arg(long)]
    pub mode: Option<String>,
    /// First phase of the sweep grid, radians
    #[arg(long)]
    pub phi_start: Option<f64>,
    /// End of the sweep grid (exclusive), radians
    #[arg(long)]
    pub phi_end: Option<f64>,
    /// Number of grid phases
    #[arg(long)]
    pub phi_steps: Option<usize>,
    /// Input events per phase point
    #[arg(long)]
    pub events: Option<u64>,
    /// Master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Learning parameter of the adaptive splitters
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Half-wave-plate fast-axis angle, degrees
    #[arg(long)]
    pub hwp_deg: Option<f64>,
    /// Fraction of detected events discarded from counts as warm-up
    #[arg(long)]
    pub warmup: Option<f64>,
    /// Output directory
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Write a per-event trace file (large)
    #[arg(long)]
    pub trace: bool,
    /// Flat `key = value` config file; flags override file keys
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Fully resolved run description.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub experiment: ExperimentConfig,
    /// Reflectivity grid (one entry for sweeps, several for duality scans).
    pub r_values: Vec<f64>,
    /// Voltage grid when the scan was parameterized by voltage.
    pub voltages: Option<Vec<f64>>,
    pub beta_deg: f64,
    pub v_pi: f64,
    pub out_dir: PathBuf,
    pub trace: bool,
}

#[derive(Debug, Clone, Default)]
struct FileValues {
    entries: Vec<(String, String, usize)>, // key, value, line number
}

impl FileValues {
    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, line)| (v.as_str(), *line))
    }
}

const FILE_KEYS: &[&str] = &[
    "r",
    "voltage",
    "beta_deg",
    "v_pi",
    "mode",
    "phi_start",
    "phi_end",
    "phi_steps",
    "events",
    "seed",
    "alpha",
    "hwp_deg",
    "warmup",
    "out_dir",
    "trace",
];

fn parse_file(path: &Path) -> Result<FileValues> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read config file {}: {e}", path.display())))?;
    let mut values = FileValues::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(config_error(format!(
                "line {line_no}: expected `key = value`, got '{raw}'"
            )));
        };
        let key = key.trim();
        let value = value.trim();
        if !FILE_KEYS.contains(&key) {
            return Err(config_error(format!("line {line_no}: unknown key '{key}'")));
        }
        values
            .entries
            .push((key.to_string(), value.to_string(), line_no));
    }
    Ok(values)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.trim().parse().map_err(|_| {
        config_error(format!(
            "line {line}: malformed value for key '{key}': '{value}'"
        ))
    })
}

fn parse_list(key: &str, value: &str, line: usize) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| parse_value(key, v, line))
        .collect()
}

/// Which command the configuration is for; decides the default
/// reflectivity grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Sweep,
    Duality,
}

/// Default scan grid for a duality run.
pub const DEFAULT_SCAN_GRID: [f64; 7] = [0.0, 0.05, 0.1, 0.2, 0.3, 0.43, 0.5];

/// Merge flags over file values over defaults and validate everything.
pub fn parse_config(args: &RunArgs, command: CommandKind) -> Result<RunSpec> {
    let file = match &args.config {
        Some(path) => parse_file(path)?,
        None => FileValues::default(),
    };

    macro_rules! resolve {
        ($flag:expr, $key:literal, $default:expr, $parse:expr) => {
            match (&$flag, file.get($key)) {
                (Some(v), _) => v.clone(),
                (None, Some((text, line))) => $parse($key, text, line)?,
                (None, None) => $default,
            }
        };
    }

    let seed: u64 = resolve!(args.seed, "seed", 42, parse_value);
    let events: u64 = resolve!(args.events, "events", 10_000, parse_value);
    let alpha: f64 = resolve!(args.alpha, "alpha", 0.99, parse_value);
    let hwp_deg: f64 = resolve!(args.hwp_deg, "hwp_deg", 45.0, parse_value);
    let warmup: f64 = resolve!(args.warmup, "warmup", 0.0, parse_value);
    let phi_start: f64 = resolve!(args.phi_start, "phi_start", 0.0, parse_value);
    let phi_end: f64 = resolve!(args.phi_end, "phi_end", std::f64::consts::TAU, parse_value);
    let phi_steps: usize = resolve!(args.phi_steps, "phi_steps", 36, parse_value);
    let beta_deg: f64 = resolve!(args.beta_deg, "beta_deg", 24.0, parse_value);
    let v_pi: f64 = resolve!(args.v_pi, "v_pi", 217.0, parse_value);
    let mode_text: String = resolve!(args.mode, "mode", "delayed_choice".to_string(), parse_value);
    let out_dir: PathBuf = match (&args.out_dir, file.get("out_dir")) {
        (Some(d), _) => d.clone(),
        (None, Some((text, _))) => PathBuf::from(text),
        (None, None) => PathBuf::from("mzsim-out"),
    };
    let trace = args.trace
        || match file.get("trace") {
            Some((text, line)) => parse_value::<bool>("trace", text, line)?,
            None => false,
        };

    let r_flag: Option<Vec<f64>> = match (&args.r, file.get("r")) {
        (Some(v), _) => Some(v.clone()),
        (None, Some((text, line))) => Some(parse_list("r", text, line)?),
        (None, None) => None,
    };
    let voltage_flag: Option<Vec<f64>> = match (&args.voltage, file.get("voltage")) {
        (Some(v), _) => Some(v.clone()),
        (None, Some((text, line))) => Some(parse_list("voltage", text, line)?),
        (None, None) => None,
    };

    let mode: Mode = mode_text.parse()?;

    if phi_steps == 0 {
        return Err(config_error("phi_steps must be at least 1"));
    }
    if !(phi_start.is_finite() && phi_end.is_finite() && phi_end > phi_start) {
        return Err(config_error(format!(
            "phi range [{phi_start}, {phi_end}) is empty or not finite"
        )));
    }
    if !(0.0 < beta_deg && beta_deg < 45.0) {
        return Err(config_error(format!(
            "beta_deg out of range (0,45): {beta_deg}"
        )));
    }
    if v_pi <= 0.0 {
        return Err(config_error(format!("v_pi must be positive: {v_pi}")));
    }

    let (r_values, voltages) = match (r_flag, voltage_flag) {
        (Some(_), Some(_)) => {
            return Err(config_error("specify either r or voltage, not both"));
        }
        (Some(rs), None) => {
            if rs.is_empty() {
                return Err(config_error("r list is empty"));
            }
            (rs, None)
        }
        (None, Some(vs)) => {
            if vs.is_empty() {
                return Err(config_error("voltage list is empty"));
            }
            if let Some(bad) = vs.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(config_error(format!("voltage must be nonnegative: {bad}")));
            }
            let beta = beta_deg.to_radians();
            let rs = vs
                .iter()
                .map(|&v| reflectivity_from_voltage(v, beta, v_pi))
                .collect();
            (rs, Some(vs))
        }
        (None, None) => match command {
            CommandKind::Sweep => (vec![0.5], None),
            CommandKind::Duality => (DEFAULT_SCAN_GRID.to_vec(), None),
        },
    };
    for &r in &r_values {
        if !(0.0..=0.5).contains(&r) {
            return Err(config_error(format!("r out of range [0,0.5]: {r}")));
        }
    }

    let phi_grid: Vec<f64> = (0..phi_steps)
        .map(|i| phi_start + (phi_end - phi_start) * i as f64 / phi_steps as f64)
        .collect();

    let experiment = ExperimentConfig {
        r: r_values[0],
        mode,
        phi_grid,
        events_per_point: events,
        seed,
        alpha,
        hwp_angle: hwp_deg.to_radians(),
        warmup_fraction: warmup,
    };
    experiment.validate()?;

    Ok(RunSpec {
        experiment,
        r_values,
        voltages,
        beta_deg,
        v_pi,
        out_dir,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn defaults_match_the_published_run_parameters() {
        let spec = parse_config(&RunArgs::default(), CommandKind::Sweep).unwrap();
        assert_eq!(spec.experiment.alpha, 0.99);
        assert_eq!(spec.experiment.events_per_point, 10_000);
        assert_eq!(spec.experiment.phi_grid.len(), 36);
        assert_eq!(spec.experiment.mode, Mode::DelayedChoice);
        assert_eq!(spec.experiment.hwp_angle, 45f64.to_radians());
        assert_eq!(spec.beta_deg, 24.0);
        assert_eq!(spec.v_pi, 217.0);
        assert_eq!(spec.experiment.phi_grid[0], 0.0);
    }

    #[test]
    fn flags_set_values() {
        let args = RunArgs {
            r: Some(vec![0.43]),
            mode: Some("closed".into()),
            ..RunArgs::default()
        };
        let spec = parse_config(&args, CommandKind::Sweep).unwrap();
        assert_eq!(spec.experiment.r, 0.43);
        assert_eq!(spec.experiment.mode, Mode::Closed);
    }

    #[test]
    fn out_of_range_reflectivity_is_rejected_by_name() {
        let args = RunArgs {
            r: Some(vec![0.7]),
            ..RunArgs::default()
        };
        let err = parse_config(&args, CommandKind::Sweep).unwrap_err().to_string();
        assert!(err.contains("r out of range [0,0.5]"), "{err}");
    }

    #[test]
    fn config_file_values_apply_and_flags_override() {
        let file =
            write_config("# sweep settings\nr = 0.43\nevents = 5000\nseed = 9\nmode = closed\n");
        let args = RunArgs {
            config: Some(file.path().to_path_buf()),
            events: Some(2000),
            ..RunArgs::default()
        };
        let spec = parse_config(&args, CommandKind::Sweep).unwrap();
        assert_eq!(spec.experiment.r, 0.43);
        assert_eq!(spec.experiment.events_per_point, 2000); // flag wins
        assert_eq!(spec.experiment.seed, 9);
        assert_eq!(spec.experiment.mode, Mode::Closed);
    }

    #[test]
    fn unknown_key_reports_line_number() {
        let file = write_config("r = 0.4\nbogus = 1\n");
        let args = RunArgs {
            config: Some(file.path().to_path_buf()),
            ..RunArgs::default()
        };
        let err = parse_config(&args, CommandKind::Sweep).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("bogus"), "{err}");
    }

    #[test]
    fn malformed_value_reports_key_and_line() {
        let file = write_config("\n\nevents = lots\n");
        let args = RunArgs {
            config: Some(file.path().to_path_buf()),
            ..RunArgs::default()
        };
        let err = parse_config(&args, CommandKind::Sweep).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("events"), "{err}");
    }

    #[test]
    fn voltages_convert_to_reflectivities() {
        let args = RunArgs {
            voltage: Some(vec![0.0, 217.0]),
            ..RunArgs::default()
        };
        let spec = parse_config(&args, CommandKind::Sweep).unwrap();
        assert_eq!(spec.r_values[0], 0.0);
        assert_eq!(spec.r_values[1], 0.5); // clamped from sin^2(48 deg)
        assert_eq!(spec.voltages.as_deref(), Some(&[0.0, 217.0][..]));
    }

    #[test]
    fn r_and_voltage_together_are_rejected() {
        let args = RunArgs {
            r: Some(vec![0.2]),
            voltage: Some(vec![50.0]),
            ..RunArgs::default()
        };
        assert!(parse_config(&args, CommandKind::Sweep).is_err());
    }
}
