//! Acceptance: rerunning a full duality scan with the same master seed must
//! produce byte-identical counts and summary files. Timestamps live only in
//! the manifest, which is excluded from the comparison.

use mzsim_cli::config::CommandKind;
use mzsim_cli::{cmd_duality, parse_config, RunArgs};

#[test]
fn criterion_10_byte_identical_reruns() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut outputs = Vec::new();
    for dir in &dirs {
        let args = RunArgs {
            r: Some(vec![0.0, 0.05, 0.1, 0.2, 0.3, 0.43, 0.5]),
            seed: Some(1924),
            warmup: Some(0.1),
            out_dir: Some(dir.path().join("scan")),
            ..RunArgs::default()
        };
        let spec = parse_config(&args, CommandKind::Duality).unwrap();
        let paths = cmd_duality(&spec).unwrap();
        outputs.push((
            std::fs::read(&paths.counts).unwrap(),
            std::fs::read(&paths.summary).unwrap(),
        ));
    }
    assert!(!outputs[0].0.is_empty() && !outputs[0].1.is_empty());
    assert_eq!(outputs[0].0, outputs[1].0, "counts files differ");
    assert_eq!(outputs[0].1, outputs[1].1, "summary files differ");
    println!("acceptance 10 (byte-identical duality scans): PASS");
}
