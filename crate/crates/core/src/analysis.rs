//! Estimators and closed-form reference curves: fringe visibility from
//! count tables, path distinguishability from blocked-arm runs, and the
//! quantum-theory values they are compared against.
//!
//! Everything here is a pure function of its inputs.

use crate::error::{Error, Result};
use crate::experiment::{BlockedArmCounts, CountRow, GammaSlice};

/// Result of a sinusoid fit to normalized counts versus phase.
///
/// The model is `y = baseline * (1 - v_hat * cos(phi - phase_offset))`.
/// `v_max_min` is the (max-min)/(max+min) cross-check estimator; it is
/// biased high under noise and reported for diagnostics only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeFit {
    pub v_hat: f64,
    pub phase_offset: f64,
    pub baseline: f64,
    pub residual_rms: f64,
    pub v_max_min: f64,
}

/// One point of a duality scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityReport {
    pub r: f64,
    pub voltage: Option<f64>,
    pub v_hat: f64,
    pub v_err: f64,
    pub d_hat: f64,
    pub d_err: f64,
    pub v2: f64,
    pub d2: f64,
    pub sum: f64,
}

/// Least-squares sinusoid fit of `(phi, y)` samples.
///
/// The model is linear in `(a0, a1, a2)` with `y = a0 + a1 cos phi + a2 sin
/// phi`; the visibility is `sqrt(a1^2 + a2^2) / a0` and the phase offset
/// places the fringe minimum.
pub fn fit_sinusoid(points: &[(f64, f64)]) -> Result<FringeFit> {
    let mut distinct: Vec<f64> = Vec::new();
    for &(phi, _) in points {
        if !distinct.contains(&phi) {
            distinct.push(phi);
        }
    }
    if distinct.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "sinusoid fit needs at least 3 distinct phases, got {}",
            distinct.len()
        )));
    }

    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for &(phi, y) in points {
        let basis = [1.0, phi.cos(), phi.sin()];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
            rhs[i] += basis[i] * y;
        }
    }
    let a = solve3(&m, &rhs).ok_or_else(|| {
        Error::InsufficientData("degenerate phase grid: normal matrix is singular".into())
    })?;

    let baseline = a[0];
    let amplitude = (a[1] * a[1] + a[2] * a[2]).sqrt();
    let v_hat = if baseline.abs() < f64::EPSILON {
        0.0
    } else {
        amplitude / baseline
    };
    let phase_offset = (-a[2]).atan2(-a[1]);

    let mut ss = 0.0;
    for &(phi, y) in points {
        let fitted = a[0] + a[1] * phi.cos() + a[2] * phi.sin();
        ss += (y - fitted) * (y - fitted);
    }
    let residual_rms = (ss / points.len() as f64).sqrt();

    let max = points.iter().map(|&(_, y)| y).fold(f64::MIN, f64::max);
    let min = points.iter().map(|&(_, y)| y).fold(f64::MAX, f64::min);
    let v_max_min = if max + min > 0.0 {
        (max - min) / (max + min)
    } else {
        0.0
    };

    Ok(FringeFit {
        v_hat,
        phase_offset,
        baseline,
        residual_rms,
        v_max_min,
    })
}

fn solve3(m: &[[f64; 3]; 3], rhs: &[f64; 3]) -> Option<[f64; 3]> {
    let det = |a: &[[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    if d.abs() < 1e-12 {
        return None;
    }
    let mut out = [0.0; 3];
    for col in 0..3 {
        let mut mc = *m;
        for row in 0..3 {
            mc[row][col] = rhs[row];
        }
        out[col] = det(&mc) / d;
    }
    Some(out)
}

/// Fit the D0 fringe of a set of count rows (normalized counts vs phase).
pub fn fit_visibility(rows: &[CountRow]) -> Result<FringeFit> {
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.phi, r.normalized_d0())).collect();
    fit_sinusoid(&points)
}

/// Binomial standard error of a fitted visibility, from counting statistics
/// of the rows that entered the fit. Uses the continuity-corrected point
/// variance so extreme counts do not report zero error.
pub fn visibility_stderr(rows: &[CountRow], fit: &FringeFit) -> f64 {
    if rows.is_empty() || fit.baseline.abs() < f64::EPSILON {
        return f64::INFINITY;
    }
    let mean_var: f64 = rows
        .iter()
        .map(|r| {
            let p = (r.d0 as f64 + 0.5) / (r.n as f64 + 1.0);
            p * (1.0 - p) / r.n as f64
        })
        .sum::<f64>()
        / rows.len() as f64;
    // For a full-period grid the cosine and sine amplitudes each carry
    // variance 2*sigma^2/M.
    (2.0 * mean_var / rows.len() as f64).sqrt() / fit.baseline
}

/// Path distinguishability from the two blocked-arm runs:
/// `d = (|p(D0|arm0) - p(D0|arm1)| + |p(D1|arm0) - p(D1|arm1)|) / 2`.
pub fn distinguishability(runs: &[BlockedArmCounts]) -> Result<f64> {
    let (arm0, arm1) = blocked_pair(runs)?;
    let p0_arm0 = arm0.d0 as f64 / arm0.n as f64;
    let p0_arm1 = arm1.d0 as f64 / arm1.n as f64;
    let p1_arm0 = arm0.d1 as f64 / arm0.n as f64;
    let p1_arm1 = arm1.d1 as f64 / arm1.n as f64;
    Ok(0.5 * ((p0_arm0 - p0_arm1).abs() + (p1_arm0 - p1_arm1).abs()))
}

/// Binomial standard error of the blocked-arm distinguishability.
pub fn distinguishability_stderr(runs: &[BlockedArmCounts]) -> Result<f64> {
    let (arm0, arm1) = blocked_pair(runs)?;
    let var = |c: &BlockedArmCounts| {
        let p = (c.d0 as f64 + 0.5) / (c.n as f64 + 1.0);
        p * (1.0 - p) / c.n as f64
    };
    Ok((var(arm0) + var(arm1)).sqrt())
}

fn blocked_pair(runs: &[BlockedArmCounts]) -> Result<(&BlockedArmCounts, &BlockedArmCounts)> {
    let arm0 = runs.iter().find(|c| c.open_arm == 0);
    let arm1 = runs.iter().find(|c| c.open_arm == 1);
    match (arm0, arm1) {
        (Some(a), Some(b)) if a.n >= 100 && b.n >= 100 => Ok((a, b)),
        (Some(a), Some(b)) => Err(Error::InsufficientData(format!(
            "blocked-arm runs need at least 100 events each, got {} and {}",
            a.n, b.n
        ))),
        _ => Err(Error::InsufficientData(
            "both blocked-arm rows are required".into(),
        )),
    }
}

/// Alternative path estimator from the per-event record of a single run:
/// detector frequencies conditioned on the simulation-only path label.
/// Exposed for comparison with the blocked-arm protocol; not used for
/// headline numbers.
pub fn distinguishability_from_labels(slice: &GammaSlice) -> Result<f64> {
    let mut n = [0u64; 2];
    let mut d0 = [0u64; 2];
    for e in &slice.events {
        let y = usize::from(e.path_label);
        n[y] += 1;
        if e.detector == 0 {
            d0[y] += 1;
        }
    }
    if n[0] < 100 || n[1] < 100 {
        return Err(Error::InsufficientData(format!(
            "label-conditioned estimate needs at least 100 events per arm, got {} and {}",
            n[0], n[1]
        )));
    }
    let p0 = d0[0] as f64 / n[0] as f64;
    let p1 = d0[1] as f64 / n[1] as f64;
    Ok((p0 - p1).abs())
}

/// Quantum-theory fringe visibility of the variable output splitter.
pub fn v_theory(r: f64) -> f64 {
    2.0 * (r * (1.0 - r)).sqrt()
}

/// Quantum-theory path distinguishability of the variable output splitter.
pub fn d_theory(r: f64) -> f64 {
    1.0 - 2.0 * r
}

/// Reference normalized intensities at phase `phi` for reflectivity `r`,
/// with the fringe minimum of channel 0 at `phi = phase_offset`.
pub fn oracle_intensity(phi: f64, r: f64, phase_offset: f64) -> (f64, f64) {
    let i0 = 0.5 * (1.0 - v_theory(r) * (phi - phase_offset).cos());
    (i0, 1.0 - i0)
}

/// Assemble one duality-scan report row from the closed-configuration sweep
/// rows and the blocked-arm runs at the same reflectivity.
pub fn duality_point(
    r: f64,
    voltage: Option<f64>,
    closed_rows: &[CountRow],
    blocked: &[BlockedArmCounts],
) -> Result<DualityReport> {
    let fit = fit_visibility(closed_rows)?;
    let v_err = visibility_stderr(closed_rows, &fit);
    let d_hat = distinguishability(blocked)?;
    let d_err = distinguishability_stderr(blocked)?;
    let v_hat = fit.v_hat;
    Ok(DualityReport {
        r,
        voltage,
        v_hat,
        v_err,
        d_hat,
        d_err,
        v2: v_hat * v_hat,
        d2: d_hat * d_hat,
        sum: v_hat * v_hat + d_hat * d_hat,
    })
}
