//! File formats, round trips and the exit-code contract.

use std::process::Command;

use mzsim_cli::commands::{summarize_duality, summarize_sweep};
use mzsim_cli::output::{read_counts, summary_bytes, COUNTS_HEADER, SUMMARY_HEADER};
use mzsim_cli::config::CommandKind;
use mzsim_cli::{cmd_duality, cmd_sweep, parse_config, RunArgs};

fn args_in(dir: &std::path::Path) -> RunArgs {
    RunArgs {
        out_dir: Some(dir.to_path_buf()),
        seed: Some(7),
        ..RunArgs::default()
    }
}

#[test]
fn sweep_counts_schema_closed_mode() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = args_in(dir.path());
    args.r = Some(vec![0.5]);
    args.mode = Some("closed".into());
    args.events = Some(500);
    let paths = cmd_sweep(&parse_config(&args, CommandKind::Sweep).unwrap()).unwrap();

    let text = std::fs::read_to_string(&paths.counts).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), COUNTS_HEADER);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 36, "one row per grid phase");
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 13);
        assert_eq!(fields[2], "closed");
        assert_eq!(fields[3], "closed");
        let n: u64 = fields[5].parse().unwrap();
        let d0: u64 = fields[6].parse().unwrap();
        let d1: u64 = fields[7].parse().unwrap();
        assert_eq!(n, 500);
        assert_eq!(d0 + d1, n);
    }

    let summary = std::fs::read_to_string(&paths.summary).unwrap();
    assert_eq!(summary.lines().next().unwrap(), SUMMARY_HEADER);
    assert_eq!(summary.lines().count(), 2);

    let manifest = std::fs::read_to_string(&paths.manifest).unwrap();
    assert!(manifest.contains("run_id = "));
    assert!(manifest.contains("counts_file = "));
}

#[test]
fn delayed_sweep_partitions_both_configurations() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = args_in(dir.path());
    args.events = Some(400);
    args.phi_steps = Some(6);
    let paths = cmd_sweep(&parse_config(&args, CommandKind::Sweep).unwrap()).unwrap();
    let records = read_counts(&paths.counts).unwrap();
    assert_eq!(records.len(), 12, "open and closed row per phase");
    for pair in records.chunks(2) {
        assert_eq!(pair[0].phi, pair[1].phi);
        assert_eq!(pair[0].n + pair[1].n, 400);
    }
}

#[test]
fn sweep_reruns_are_byte_identical_and_summary_round_trips() {
    let mut outputs = Vec::new();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let mut args = args_in(dir.path());
        args.r = Some(vec![0.43]);
        args.mode = Some("closed".into());
        args.events = Some(1000);
        let paths = cmd_sweep(&parse_config(&args, CommandKind::Sweep).unwrap()).unwrap();
        outputs.push((
            std::fs::read(&paths.counts).unwrap(),
            std::fs::read(&paths.summary).unwrap(),
            paths,
        ));
    }
    assert_eq!(outputs[0].0, outputs[1].0);
    assert_eq!(outputs[0].1, outputs[1].1);

    // Parsing the emitted counts and refitting reproduces the summary bytes.
    let records = read_counts(&outputs[0].2.counts).unwrap();
    let recomputed = summary_bytes(&summarize_sweep(&records).unwrap());
    assert_eq!(recomputed, outputs[0].1);
}

#[test]
fn duality_summary_round_trips_from_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = args_in(dir.path());
    args.r = Some(vec![0.0, 0.05, 0.43, 0.5]);
    args.events = Some(1000);
    args.phi_steps = Some(12);
    args.warmup = Some(0.1);
    let spec = parse_config(&args, CommandKind::Duality).unwrap();
    let paths = cmd_duality(&spec).unwrap();

    let summary = std::fs::read(&paths.summary).unwrap();
    let text = String::from_utf8(summary.clone()).unwrap();
    assert_eq!(
        text.lines().count(),
        5,
        "header plus one row per grid point"
    );

    let records = read_counts(&paths.counts).unwrap();
    // 12 closed rows + 2 blocked rows per grid point.
    assert_eq!(records.len(), 4 * 14);
    let recomputed = summary_bytes(
        &summarize_duality(&records, &spec.r_values, spec.voltages.as_deref()).unwrap(),
    );
    assert_eq!(recomputed, summary);

    // The duality relation holds in the emitted summary.
    for line in text.lines().skip(1) {
        let sum: f64 = line.split(',').next_back().unwrap().parse().unwrap();
        assert!(sum <= 1.05, "v2 + d2 = {sum}");
    }
}

#[test]
fn voltage_parameterized_scan_fills_the_voltage_column() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = args_in(dir.path());
    args.voltage = Some(vec![0.0, 100.0]);
    args.events = Some(500);
    args.phi_steps = Some(8);
    let spec = parse_config(&args, CommandKind::Duality).unwrap();
    let paths = cmd_duality(&spec).unwrap();
    let text = std::fs::read_to_string(&paths.summary).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for (row, expected_v) in rows.iter().zip([0.0, 100.0]) {
        let fields: Vec<&str> = row.split(',').collect();
        let voltage: f64 = fields[1].parse().unwrap();
        assert_eq!(voltage, expected_v);
    }
}

#[test]
fn trace_records_every_unit_of_every_event() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = args_in(dir.path());
    args.events = Some(20);
    args.phi_steps = Some(4);
    args.mode = Some("closed".into());
    args.trace = true;
    let paths = cmd_sweep(&parse_config(&args, CommandKind::Sweep).unwrap()).unwrap();
    let text = std::fs::read_to_string(paths.trace.as_ref().unwrap()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.iter().all(|l| l.starts_with("event=")));
    let draws = lines.iter().filter(|l| l.contains("unit=draw_a")).count();
    assert_eq!(draws, 80, "one choice record per event");
    let sources = lines.iter().filter(|l| l.contains("unit=source")).count();
    assert_eq!(sources, 80);
    // Unit records carry the six message components.
    let unit_line = lines.iter().find(|l| l.contains("unit=hwp")).unwrap();
    let msg = unit_line.split("msg=").nth(1).unwrap();
    assert_eq!(msg.split_whitespace().count(), 6);
}

#[test]
fn single_point_sweep_writes_counts_without_a_fit() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = args_in(dir.path());
    args.phi_steps = Some(1);
    args.phi_start = Some(1.2);
    args.events = Some(300);
    args.mode = Some("closed".into());
    let paths = cmd_sweep(&parse_config(&args, CommandKind::Sweep).unwrap()).unwrap();
    let records = read_counts(&paths.counts).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].n, 300);
    let summary = std::fs::read_to_string(&paths.summary).unwrap();
    assert_eq!(summary.trim(), SUMMARY_HEADER, "header-only summary");
}

fn run_binary(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mzsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_s = out.to_str().unwrap();

    // 0: success
    let ok = run_binary(&[
        "sweep",
        "--r",
        "0.5",
        "--mode",
        "closed",
        "--events",
        "50",
        "--phi-steps",
        "3",
        "--out-dir",
        out_s,
    ]);
    assert_eq!(ok.status.code(), Some(0), "{ok:?}");

    // 2: configuration error, message names the offending key
    let bad_r = run_binary(&["sweep", "--r", "0.7", "--out-dir", out_s]);
    assert_eq!(bad_r.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&bad_r.stderr);
    assert!(stderr.contains("r out of range [0,0.5]"), "{stderr}");

    // 2: unknown flag (argument parsing)
    let bad_flag = run_binary(&["sweep", "--does-not-exist"]);
    assert_eq!(bad_flag.status.code(), Some(2));

    // 3: runtime error (blocked-arm runs need at least 100 events each)
    let runtime = run_binary(&[
        "duality", "--r", "0.5", "--events", "50", "--phi-steps", "4", "--out-dir", out_s,
    ]);
    assert_eq!(runtime.status.code(), Some(3), "{runtime:?}");

    // 4: i/o error (output directory path collides with a file)
    let file_path = dir.path().join("not-a-dir");
    std::fs::write(&file_path, b"x").unwrap();
    let io_err = run_binary(&[
        "sweep",
        "--r",
        "0.5",
        "--events",
        "50",
        "--phi-steps",
        "3",
        "--out-dir",
        file_path.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(io_err.status.code(), Some(4), "{io_err:?}");
}
