//! The two batch commands: a phase sweep at fixed reflectivity, and a
//! duality scan over a reflectivity (or voltage) grid.

use mzsim::analysis::{duality_point, fit_visibility, visibility_stderr};
use mzsim::experiment::{
    run_distinguishability, run_point_with_hooks, CountTable, ExperimentConfig, Mode, MziConfig,
    SweepResult,
};
use mzsim::network::NoHooks;
use mzsim::rng::derive_seed;

use crate::config::RunSpec;
use crate::error::{config_error, Result};
use crate::output::{
    run_id, write_counts, write_manifest, write_summary, CountsRecord, OutputPaths, SummaryRecord,
    TraceWriter,
};

/// Phase sweep over the grid, with the per-point trace when requested.
fn traced_sweep(cfg: &ExperimentConfig, trace: &mut Option<TraceWriter>) -> Result<SweepResult> {
    let mut table = CountTable {
        r: cfg.r,
        mode: cfg.mode,
        seed: cfg.seed,
        rows: Vec::new(),
    };
    let mut gamma = mzsim::experiment::GammaDataset::default();
    for (i, &phi) in cfg.phi_grid.iter().enumerate() {
        let point = match trace {
            Some(writer) => {
                let point = run_point_with_hooks(cfg, phi, i, writer)?;
                writer.advance(cfg.events_per_point);
                point
            }
            None => run_point_with_hooks(cfg, phi, i, &mut NoHooks)?,
        };
        table.rows.extend(point.rows);
        gamma.slices.push(point.gamma);
    }
    Ok(SweepResult { table, gamma })
}

fn blocked_records(
    id: &str,
    cfg: &ExperimentConfig,
    blocked: &[mzsim::experiment::BlockedArmCounts; 2],
) -> Vec<CountsRecord> {
    blocked
        .iter()
        .map(|counts| {
            let mode = if counts.open_arm == 1 {
                Mode::BlockedArm0
            } else {
                Mode::BlockedArm1
            };
            CountsRecord {
                run_id: id.to_string(),
                r: cfg.r,
                mode,
                config: MziConfig::Closed,
                phi: 0.0,
                n: counts.n,
                d0: counts.d0,
                d1: counts.d1,
                d0_by_path: [
                    if counts.open_arm == 0 { counts.d0 } else { 0 },
                    if counts.open_arm == 1 { counts.d0 } else { 0 },
                ],
                d1_by_path: [
                    if counts.open_arm == 0 { counts.d1 } else { 0 },
                    if counts.open_arm == 1 { counts.d1 } else { 0 },
                ],
                seed: cfg.seed,
            }
        })
        .collect()
}

/// Rebuild the sweep summary from counts records. The summary is a pure
/// function of the counts file, so parsing the file and calling this again
/// reproduces the emitted summary byte for byte.
///
/// A grid too short to fit (fewer than 3 distinct phases, e.g. a
/// single-point run) yields an empty summary; the counts file carries the
/// data.
pub fn summarize_sweep(records: &[CountsRecord]) -> Result<Vec<SummaryRecord>> {
    let closed: Vec<_> = records
        .iter()
        .filter(|c| c.config == MziConfig::Closed)
        .map(|c| c.to_count_row())
        .collect();
    let open: Vec<_> = records
        .iter()
        .filter(|c| c.config == MziConfig::Open)
        .map(|c| c.to_count_row())
        .collect();
    let rows = if closed.is_empty() { &open } else { &closed };
    let mut distinct: Vec<f64> = Vec::new();
    for row in rows {
        if !distinct.contains(&row.phi) {
            distinct.push(row.phi);
        }
    }
    if distinct.len() < 3 {
        return Ok(Vec::new());
    }
    let fit = fit_visibility(rows)?;
    let v_err = visibility_stderr(rows, &fit);
    let r = records
        .first()
        .map(|c| c.r)
        .ok_or_else(|| config_error("no counts to summarize"))?;
    Ok(vec![SummaryRecord {
        r,
        voltage: None,
        v_hat: fit.v_hat,
        v_err,
        d_hat: None,
        d_err: None,
        v2: fit.v_hat * fit.v_hat,
        d2: None,
        v2_plus_d2: None,
    }])
}

/// Rebuild the duality summary (one row per scan point) from counts records.
pub fn summarize_duality(
    records: &[CountsRecord],
    r_values: &[f64],
    voltages: Option<&[f64]>,
) -> Result<Vec<SummaryRecord>> {
    let mut out = Vec::with_capacity(r_values.len());
    for (ri, &r) in r_values.iter().enumerate() {
        let closed: Vec<_> = records
            .iter()
            .filter(|c| c.r == r && c.mode == Mode::Closed)
            .map(|c| c.to_count_row())
            .collect();
        let blocked: Vec<_> = records
            .iter()
            .filter(|c| c.r == r && c.mode.blocked_arm().is_some())
            .map(|c| mzsim::experiment::BlockedArmCounts {
                open_arm: 1 - c.mode.blocked_arm().unwrap(),
                n: c.n,
                d0: c.d0,
                d1: c.d1,
            })
            .collect();
        let voltage = voltages.map(|vs| vs[ri]);
        let report = duality_point(r, voltage, &closed, &blocked)?;
        out.push(SummaryRecord {
            r: report.r,
            voltage: report.voltage,
            v_hat: report.v_hat,
            v_err: report.v_err,
            d_hat: Some(report.d_hat),
            d_err: Some(report.d_err),
            v2: report.v2,
            d2: Some(report.d2),
            v2_plus_d2: Some(report.sum),
        });
    }
    Ok(out)
}

/// Run a phase sweep and write manifest, counts and summary.
pub fn cmd_sweep(spec: &RunSpec) -> Result<OutputPaths> {
    if spec.r_values.len() != 1 {
        return Err(config_error(
            "sweep takes a single r (use the duality command for grids)",
        ));
    }
    std::fs::create_dir_all(&spec.out_dir)?;
    let paths = OutputPaths::new(&spec.out_dir, spec.trace);
    let id = run_id("sweep", spec);
    write_manifest(&paths, "sweep", &id, spec)?;

    let mut trace = match &paths.trace {
        Some(path) => Some(TraceWriter::create(path)?),
        None => None,
    };
    let sweep = traced_sweep(&spec.experiment, &mut trace)?;
    if let Some(writer) = trace {
        writer.finish()?;
    }

    let records: Vec<CountsRecord> = sweep
        .table
        .rows
        .iter()
        .map(|row| {
            CountsRecord::from_row(
                &id,
                spec.experiment.r,
                spec.experiment.mode,
                spec.experiment.seed,
                row,
            )
        })
        .collect();
    write_counts(&paths.counts, &records)?;
    write_summary(&paths.summary, &summarize_sweep(&records)?)?;
    Ok(paths)
}

/// Run the duality scan: per grid point a closed-configuration sweep plus
/// the two blocked-arm runs, then one summary row per point.
pub fn cmd_duality(spec: &RunSpec) -> Result<OutputPaths> {
    if spec.experiment.phi_grid.len() < 3 {
        return Err(config_error(
            "duality requires phi_steps of at least 3 to fit the fringe",
        ));
    }
    std::fs::create_dir_all(&spec.out_dir)?;
    let paths = OutputPaths::new(&spec.out_dir, spec.trace);
    let id = run_id("duality", spec);
    write_manifest(&paths, "duality", &id, spec)?;

    let mut trace = match &paths.trace {
        Some(path) => Some(TraceWriter::create(path)?),
        None => None,
    };

    let mut records: Vec<CountsRecord> = Vec::new();
    for (ri, &r) in spec.r_values.iter().enumerate() {
        let cfg = ExperimentConfig {
            r,
            mode: Mode::Closed,
            seed: derive_seed(spec.experiment.seed, &format!("r{ri:02}")),
            ..spec.experiment.clone()
        };
        let sweep = traced_sweep(&cfg, &mut trace)?;
        records.extend(
            sweep
                .table
                .rows
                .iter()
                .map(|row| CountsRecord::from_row(&id, r, Mode::Closed, cfg.seed, row)),
        );
        let blocked = run_distinguishability(&cfg)?;
        records.extend(blocked_records(&id, &cfg, &blocked));
    }
    if let Some(writer) = trace {
        writer.finish()?;
    }

    write_counts(&paths.counts, &records)?;
    let summary = summarize_duality(&records, &spec.r_values, spec.voltages.as_deref())?;
    write_summary(&paths.summary, &summary)?;
    Ok(paths)
}
