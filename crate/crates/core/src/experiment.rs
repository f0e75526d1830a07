//! Run orchestration: per-event configuration choices, phase sweeps,
//! blocked-arm runs, and assembly of the per-event dataset.
//!
//! A run at one phase point builds a fresh network (fresh unit state, fresh
//! streams) and routes `events_per_point` messengers through it. Every
//! detected event is recorded as `(detector, path label, choice)`; the path
//! label is bookkeeping the laboratory cannot see, carried so the full
//! which-path record exists in every mode.

use crate::error::{Error, Result};
use crate::network::{
    build_delayed_choice_network, EventHooks, NetworkConfig, NoHooks, RouteOutcome,
};
use crate::rng::StreamFactory;

/// Interferometer configuration seen by the counting side: modulator
/// voltage off (open) or on (closed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MziConfig {
    Open,
    Closed,
}

impl std::fmt::Display for MziConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MziConfig::Open => write!(f, "open"),
            MziConfig::Closed => write!(f, "closed"),
        }
    }
}

/// Run mode. `DelayedChoice` draws the modulator setting per event after the
/// messenger has passed the input splitter; the fixed modes force it.
/// Blocked modes absorb one arm and keep routing until the requested number
/// of detected events has accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    DelayedChoice,
    Closed,
    Open,
    BlockedArm0,
    BlockedArm1,
}

impl Mode {
    pub fn blocked_arm(&self) -> Option<u8> {
        match self {
            Mode::BlockedArm0 => Some(0),
            Mode::BlockedArm1 => Some(1),
            _ => None,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Mode::DelayedChoice => "delayed_choice",
            Mode::Closed => "closed",
            Mode::Open => "open",
            Mode::BlockedArm0 => "blocked_arm0",
            Mode::BlockedArm1 => "blocked_arm1",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delayed_choice" => Ok(Mode::DelayedChoice),
            "closed" => Ok(Mode::Closed),
            "open" => Ok(Mode::Open),
            "blocked_arm0" => Ok(Mode::BlockedArm0),
            "blocked_arm1" => Ok(Mode::BlockedArm1),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

/// Full description of a run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub r: f64,
    pub mode: Mode,
    pub phi_grid: Vec<f64>,
    pub events_per_point: u64,
    pub seed: u64,
    pub alpha: f64,
    pub hwp_angle: f64,
    /// Fraction of detected events discarded from counts as unit warm-up.
    /// Zero by default: headline fringe counts use every event.
    pub warmup_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            r: 0.5,
            mode: Mode::DelayedChoice,
            phi_grid: default_phi_grid(36),
            events_per_point: 10_000,
            seed: 42,
            alpha: 0.99,
            hwp_angle: std::f64::consts::FRAC_PI_4,
            warmup_fraction: 0.0,
        }
    }
}

/// `steps` equally spaced phases covering [0, 2pi).
pub fn default_phi_grid(steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| std::f64::consts::TAU * i as f64 / steps as f64)
        .collect()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.r) {
            return Err(Error::Config(format!("r out of range [0,0.5]: {}", self.r)));
        }
        if self.phi_grid.is_empty() {
            return Err(Error::Config("phi grid is empty".into()));
        }
        if self.phi_grid.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("phi grid contains a non-finite value".into()));
        }
        if self.events_per_point == 0 {
            return Err(Error::Config("events must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha out of range (0,1): {}",
                self.alpha
            )));
        }
        if !self.hwp_angle.is_finite() {
            return Err(Error::Config(format!(
                "hwp angle is not finite: {}",
                self.hwp_angle
            )));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config(format!(
                "warmup fraction out of range [0,1): {}",
                self.warmup_fraction
            )));
        }
        Ok(())
    }

    fn network_config(&self, phi: f64) -> NetworkConfig {
        NetworkConfig {
            reflectivity: self.r,
            phi,
            alpha: self.alpha,
            hwp_angle: self.hwp_angle,
            blocked_arm: self.mode.blocked_arm(),
        }
    }
}

/// One detected event: which detector fired, which arm the messenger took,
/// and whether the modulator voltage was on for this event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventRecord {
    pub detector: u8,
    pub path_label: u8,
    pub voltage_on: bool,
}

/// The per-event dataset of one phase point.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSlice {
    pub r: f64,
    pub phi: f64,
    pub mode: Mode,
    pub seed: u64,
    pub events: Vec<EventRecord>,
}

/// Collection of per-point datasets for a sweep.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GammaDataset {
    pub slices: Vec<GammaSlice>,
}

/// Counts for one (phase, configuration) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountRow {
    pub phi: f64,
    pub config: MziConfig,
    pub n: u64,
    pub d0: u64,
    pub d1: u64,
    pub d0_by_path: [u64; 2],
    pub d1_by_path: [u64; 2],
}

impl CountRow {
    fn new(phi: f64, config: MziConfig) -> Self {
        CountRow {
            phi,
            config,
            n: 0,
            d0: 0,
            d1: 0,
            d0_by_path: [0; 2],
            d1_by_path: [0; 2],
        }
    }

    fn add(&mut self, record: &EventRecord) {
        self.n += 1;
        let path = usize::from(record.path_label);
        if record.detector == 0 {
            self.d0 += 1;
            self.d0_by_path[path] += 1;
        } else {
            self.d1 += 1;
            self.d1_by_path[path] += 1;
        }
    }

    /// Internal consistency of the cell sums.
    pub fn check(&self) -> Result<()> {
        let ok = self.d0 + self.d1 == self.n
            && self.d0_by_path[0] + self.d0_by_path[1] == self.d0
            && self.d1_by_path[0] + self.d1_by_path[1] == self.d1;
        if ok {
            Ok(())
        } else {
            Err(Error::InsufficientData(format!(
                "inconsistent count row at phi={}",
                self.phi
            )))
        }
    }

    pub fn normalized_d0(&self) -> f64 {
        self.d0 as f64 / self.n as f64
    }
}

/// Count rows plus run metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    pub r: f64,
    pub mode: Mode,
    pub seed: u64,
    pub rows: Vec<CountRow>,
}

impl CountTable {
    pub fn closed_rows(&self) -> Vec<CountRow> {
        self.rows
            .iter()
            .filter(|r| r.config == MziConfig::Closed)
            .copied()
            .collect()
    }

    pub fn open_rows(&self) -> Vec<CountRow> {
        self.rows
            .iter()
            .filter(|r| r.config == MziConfig::Open)
            .copied()
            .collect()
    }
}

/// Detector counts of one blocked-arm run, keyed by the arm that stayed open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockedArmCounts {
    pub open_arm: u8,
    pub n: u64,
    pub d0: u64,
    pub d1: u64,
}

/// Result of one phase point: one count row per configuration that occurred,
/// plus the per-event dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub rows: Vec<CountRow>,
    pub gamma: GammaSlice,
}

/// Result of a phase sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub table: CountTable,
    pub gamma: GammaDataset,
}

/// Run one phase point with event hooks.
///
/// The network is built fresh; its streams are scoped by `point_index` so
/// sweep points are independent. In delayed-choice mode the modulator choice
/// is a fair per-event draw made mid-route (after the input splitter); the
/// fixed modes force it. Blocked modes keep routing until
/// `events_per_point` events have been detected.
pub fn run_point_with_hooks(
    cfg: &ExperimentConfig,
    phi: f64,
    point_index: usize,
    hooks: &mut impl EventHooks,
) -> Result<PointResult> {
    cfg.validate()?;
    let factory = StreamFactory::new(cfg.seed).scoped(&format!("pt{point_index:04}"));
    let mut net = build_delayed_choice_network(&cfg.network_config(phi), &factory)?;
    let mut choice_stream = factory.stream("eom.choice");

    let n = cfg.events_per_point;
    let warmup = (cfg.warmup_fraction * n as f64).ceil() as u64;
    let mut events = Vec::with_capacity(usize::try_from(n).unwrap_or(0));
    let mut open_row = CountRow::new(phi, MziConfig::Open);
    let mut closed_row = CountRow::new(phi, MziConfig::Closed);

    let mode = cfg.mode;
    let mut detected = 0u64;
    let mut event_index = 0u64;
    while detected < n {
        let mut choice: Option<bool> = None;
        let outcome = net.route_one(
            event_index,
            &mut |_| {
                let on = match mode {
                    Mode::DelayedChoice => {
                        // Fair coin, drawn only now that the messenger has
                        // passed the input splitter.
                        choice_stream.uniform() < 0.5
                    }
                    Mode::Open => false,
                    Mode::Closed | Mode::BlockedArm0 | Mode::BlockedArm1 => true,
                };
                choice = Some(on);
                on
            },
            hooks,
        )?;
        event_index += 1;
        match outcome {
            RouteOutcome::Detected {
                detector,
                path_label,
            } => {
                let record = EventRecord {
                    detector,
                    path_label,
                    voltage_on: choice.expect("detected events always pass the choice point"),
                };
                detected += 1;
                events.push(record);
                if detected > warmup {
                    if record.voltage_on {
                        closed_row.add(&record);
                    } else {
                        open_row.add(&record);
                    }
                }
            }
            RouteOutcome::Blocked => {}
        }
    }

    let mut rows = Vec::new();
    match mode {
        Mode::DelayedChoice => {
            rows.push(open_row);
            rows.push(closed_row);
        }
        Mode::Open => rows.push(open_row),
        Mode::Closed | Mode::BlockedArm0 | Mode::BlockedArm1 => rows.push(closed_row),
    }
    for row in &rows {
        row.check()?;
    }

    Ok(PointResult {
        rows,
        gamma: GammaSlice {
            r: cfg.r,
            phi,
            mode,
            seed: cfg.seed,
            events,
        },
    })
}

/// Run one phase point without hooks.
pub fn run_point(cfg: &ExperimentConfig, phi: f64, point_index: usize) -> Result<PointResult> {
    run_point_with_hooks(cfg, phi, point_index, &mut NoHooks)
}

/// One run per grid phase, each with its own network and streams.
pub fn run_phase_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let mut table = CountTable {
        r: cfg.r,
        mode: cfg.mode,
        seed: cfg.seed,
        rows: Vec::new(),
    };
    let mut gamma = GammaDataset::default();
    for (i, &phi) in cfg.phi_grid.iter().enumerate() {
        let point = run_point(cfg, phi, i)?;
        table.rows.extend(point.rows);
        gamma.slices.push(point.gamma);
    }
    Ok(SweepResult { table, gamma })
}

/// Delayed-choice run at one phase point, returning the per-event dataset.
pub fn run_delayed_choice(
    cfg: &ExperimentConfig,
    phi: f64,
    point_index: usize,
) -> Result<GammaSlice> {
    if cfg.mode != Mode::DelayedChoice {
        return Err(Error::Config(format!(
            "run_delayed_choice requires delayed_choice mode, got {}",
            cfg.mode
        )));
    }
    Ok(run_point(cfg, phi, point_index)?.gamma)
}

/// Two blocked-arm runs (arm 0 blocked, then arm 1 blocked) in the closed
/// configuration, at phase 0. Returns detector counts conditioned on the
/// arm that stayed open.
pub fn run_distinguishability(cfg: &ExperimentConfig) -> Result<[BlockedArmCounts; 2]> {
    let mut out = [BlockedArmCounts {
        open_arm: 0,
        n: 0,
        d0: 0,
        d1: 0,
    }; 2];
    for (slot, (mode, scope)) in [(Mode::BlockedArm0, "arm0"), (Mode::BlockedArm1, "arm1")]
        .into_iter()
        .enumerate()
    {
        let sub = ExperimentConfig {
            mode,
            seed: crate::rng::derive_seed(cfg.seed, scope),
            phi_grid: vec![0.0],
            ..cfg.clone()
        };
        let point = run_point(&sub, 0.0, 0)?;
        let row = point.rows[0];
        out[slot] = BlockedArmCounts {
            open_arm: 1 - mode.blocked_arm().unwrap(),
            n: row.n,
            d0: row.d0,
            d1: row.d1,
        };
    }
    Ok(out)
}

/// Fraction of messengers leaving the merging splitter through its busier
/// channel, measured over one phase point after discarding the configured
/// warm-up fraction of events.
pub fn merge_single_channel_fraction(cfg: &ExperimentConfig, phi: f64) -> Result<f64> {
    struct MergeCounter {
        skip: u64,
        counts: [u64; 2],
    }
    impl EventHooks for MergeCounter {
        fn on_unit(&mut self, event: u64, unit: &str, channel: u8, _m: &crate::message::Message) {
            if unit == "pbs_merge" && event >= self.skip {
                self.counts[usize::from(channel)] += 1;
            }
        }
    }
    let mut counter = MergeCounter {
        skip: (cfg.warmup_fraction * cfg.events_per_point as f64).ceil() as u64,
        counts: [0; 2],
    };
    run_point_with_hooks(cfg, phi, 0, &mut counter)?;
    let total = counter.counts[0] + counter.counts[1];
    if total == 0 {
        return Err(Error::InsufficientData(
            "no messengers passed the merging splitter".into(),
        ));
    }
    Ok(counter.counts.iter().max().copied().unwrap() as f64 / total as f64)
}

/// Duality-scan measurement at one reflectivity: closed-configuration sweep
/// for the fringe plus the two blocked-arm runs for the path measurement.
pub fn run_duality_point(cfg: &ExperimentConfig) -> Result<(SweepResult, [BlockedArmCounts; 2])> {
    let closed = ExperimentConfig {
        mode: Mode::Closed,
        ..cfg.clone()
    };
    let sweep = run_phase_sweep(&closed)?;
    let blocked = run_distinguishability(cfg)?;
    Ok((sweep, blocked))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_cfg() -> ExperimentConfig {
        ExperimentConfig {
            seed: 20080527,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn config_validation_names_the_offender() {
        let mut cfg = base_cfg();
        cfg.r = 0.7;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("r out of range"), "{err}");

        let mut cfg = base_cfg();
        cfg.phi_grid.clear();
        assert!(cfg.validate().is_err());

        let mut cfg = base_cfg();
        cfg.events_per_point = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn identical_configs_reproduce_bit_identical_results() {
        let mut cfg = base_cfg();
        cfg.mode = Mode::DelayedChoice;
        cfg.events_per_point = 2000;
        cfg.phi_grid = default_phi_grid(4);
        let a = run_phase_sweep(&cfg).unwrap();
        let b = run_phase_sweep(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn open_mode_is_flat_and_balanced() {
        let mut cfg = base_cfg();
        cfg.mode = Mode::Open;
        cfg.events_per_point = 10_000;
        let phis = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        for (i, &phi) in phis.iter().enumerate() {
            let point = run_point(&cfg, phi, i).unwrap();
            let row = point.rows[0];
            assert_eq!(row.config, MziConfig::Open);
            let frac = row.normalized_d0();
            assert!(
                (frac - 0.5).abs() < 0.015,
                "open-mode D0 fraction {frac} at phi={phi}"
            );
        }
    }

    #[test]
    fn closed_half_reflectivity_shows_full_fringe_with_balanced_paths() {
        let mut cfg = base_cfg();
        cfg.mode = Mode::Closed;
        cfg.r = 0.5;
        cfg.events_per_point = 10_000;
        cfg.phi_grid = default_phi_grid(12);
        let sweep = run_phase_sweep(&cfg).unwrap();
        let rows = sweep.table.closed_rows();
        let max = rows.iter().map(|r| r.normalized_d0()).fold(0.0, f64::max);
        let min = rows.iter().map(|r| r.normalized_d0()).fold(1.0, f64::min);
        assert!(max > 0.95 && min < 0.05, "fringe range [{min}, {max}]");
        for row in &rows {
            let (a, b) = (row.d0_by_path[0], row.d0_by_path[1]);
            let sigma = ((a + b) as f64).sqrt();
            assert!(
                (a as f64 - b as f64).abs() <= 3.0 * sigma + 1.0,
                "path counts {a} vs {b} at phi={}",
                row.phi
            );
        }
    }

    #[test]
    fn delayed_choice_draws_fair_coin_and_partitions() {
        let mut cfg = base_cfg();
        cfg.mode = Mode::DelayedChoice;
        cfg.events_per_point = 10_000;
        let point = run_point(&cfg, 1.0, 0).unwrap();
        assert_eq!(point.rows.len(), 2);
        let n_on = point.gamma.events.iter().filter(|e| e.voltage_on).count() as f64;
        let frac = n_on / point.gamma.events.len() as f64;
        assert!((frac - 0.5).abs() < 0.015, "voltage-on fraction {frac}");

        // The per-event choice is independent of the path label.
        let n = point.gamma.events.len() as f64;
        let mean_a = frac;
        let mean_y = point
            .gamma
            .events
            .iter()
            .map(|e| f64::from(e.path_label))
            .sum::<f64>()
            / n;
        let mean_ay = point
            .gamma
            .events
            .iter()
            .map(|e| f64::from(e.path_label) * f64::from(u8::from(e.voltage_on)))
            .sum::<f64>()
            / n;
        let cov = mean_ay - mean_a * mean_y;
        let corr = cov / (mean_a * (1.0 - mean_a) * mean_y * (1.0 - mean_y)).sqrt();
        assert!(corr.abs() <= 3.0 / n.sqrt(), "corr(A, y) = {corr}");
    }

    #[test]
    fn blocked_runs_sort_perfectly_at_zero_reflectivity() {
        let mut cfg = base_cfg();
        cfg.seed = 31337;
        cfg.r = 0.0;
        cfg.events_per_point = 10_000;
        let [arm1_open, arm0_open] = run_distinguishability(&cfg).unwrap();
        assert_eq!(arm1_open.open_arm, 1);
        assert_eq!(arm0_open.open_arm, 0);
        assert_eq!(arm1_open.n, 10_000);
        // Arm 1 (vertical polarization) ends at D0 after the wave-plate
        // swap; arm 0 ends at D1. A few warm-up events may stray.
        assert!(
            arm1_open.d0 as f64 >= 0.99 * arm1_open.n as f64,
            "arm-1-open counts: d0={} d1={}",
            arm1_open.d0,
            arm1_open.d1
        );
        assert!(
            arm0_open.d1 as f64 >= 0.99 * arm0_open.n as f64,
            "arm-0-open counts: d0={} d1={}",
            arm0_open.d0,
            arm0_open.d1
        );

        // Discarding the warm-up removes the stray events entirely.
        cfg.warmup_fraction = 0.1;
        let [steady1, steady0] = run_distinguishability(&cfg).unwrap();
        assert!(steady1.d0 as f64 >= 0.999 * steady1.n as f64);
        assert!(steady0.d1 as f64 >= 0.999 * steady0.n as f64);
    }

    #[test]
    fn blocked_runs_split_evenly_at_half_reflectivity() {
        let mut cfg = base_cfg();
        cfg.r = 0.5;
        cfg.events_per_point = 10_000;
        for counts in run_distinguishability(&cfg).unwrap() {
            let frac = counts.d0 as f64 / counts.n as f64;
            assert!((frac - 0.5).abs() < 0.015, "blocked-run D0 fraction {frac}");
        }
    }

    #[test]
    fn gamma_records_every_event_with_full_which_path_info() {
        let mut cfg = base_cfg();
        cfg.mode = Mode::DelayedChoice;
        cfg.events_per_point = 1000;
        let slice = run_delayed_choice(&cfg, 0.4, 0).unwrap();
        assert_eq!(slice.events.len(), 1000);
        for e in &slice.events {
            assert!(e.detector <= 1 && e.path_label <= 1);
        }
    }

    #[test]
    fn merge_splitter_uses_one_channel_after_warmup() {
        let mut cfg = base_cfg();
        cfg.mode = Mode::Closed;
        cfg.r = 0.5;
        cfg.events_per_point = 10_000;
        cfg.warmup_fraction = 0.1;
        let frac = merge_single_channel_fraction(&cfg, 0.7).unwrap();
        assert!(frac >= 0.99, "single-channel fraction {frac}");
    }
}
