//! Stateless optical transforms: half-wave plate, electro-optic modulator
//! and phase shifter, plus the voltage-to-reflectivity helper used when a
//! scan is parameterized by modulator voltage instead of reflectivity.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::message::{JonesPair, Message};

/// Electro-optic modulator setting: effective beam-splitter reflectivity
/// `R` in [0, 0.5] and whether the control voltage is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EomSetting {
    reflectivity: f64,
    pub voltage_on: bool,
}

impl EomSetting {
    pub fn new(reflectivity: f64, voltage_on: bool) -> Result<Self> {
        if !(0.0..=0.5).contains(&reflectivity) {
            return Err(Error::InvalidArgument(format!(
                "reflectivity {reflectivity} outside [0, 0.5]"
            )));
        }
        Ok(EomSetting {
            reflectivity,
            voltage_on,
        })
    }

    pub fn reflectivity(&self) -> f64 {
        self.reflectivity
    }
}

/// Relative phase between the two interferometer arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSetting {
    pub phi: f64,
}

impl PhaseSetting {
    pub fn new(phi: f64) -> Result<Self> {
        if !phi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "phase shift {phi} is not finite"
            )));
        }
        Ok(PhaseSetting { phi })
    }
}

fn remessage(h: Complex64, v: Complex64) -> Message {
    // The transforms here are unitary on a unit-norm field, so the
    // reconstruction cannot be degenerate.
    Message::from_jones(&JonesPair::new(h, v)).expect("unitary transform preserves the field norm")
}

/// Half-wave plate with its fast axis at `theta_fast`.
///
/// In the Jones view: `(h, v) -> e^{-i pi/2} [[cos 2t, sin 2t], [sin 2t, -cos 2t]] (h, v)`.
/// It changes the phases as well as the polarization; at 45 degrees it
/// interchanges the H and V roles.
pub fn apply_hwp(m: &Message, theta_fast: f64) -> Message {
    let j = m.to_jones();
    let c = (2.0 * theta_fast).cos();
    let s = (2.0 * theta_fast).sin();
    let global = Complex64::new(0.0, -1.0); // e^{-i pi/2}
    let h = global * (j.h * c + j.v * s);
    let v = global * (j.h * s - j.v * c);
    remessage(h, v)
}

/// Electro-optic modulator. With the voltage off the message passes through
/// bit-identically; with the voltage on the polarization is rotated by
/// `theta_R = asin(sqrt(R))`, which gives the device the splitting behavior
/// of a beam splitter with reflectivity `R`.
pub fn apply_eom(m: &Message, s: &EomSetting) -> Message {
    if !s.voltage_on {
        return *m;
    }
    let theta = s.reflectivity.sqrt().asin();
    let j = m.to_jones();
    let (c, sn) = (theta.cos(), theta.sin());
    let h = j.h * c - j.v * sn;
    let v = j.h * sn + j.v * c;
    remessage(h, v)
}

/// Plane rotation of both phase pairs by `phi`; the polarization pair is
/// untouched. Applied to the arm entering input port 0 of the merging beam
/// splitter, this realizes the interferometer phase difference.
pub fn apply_phase_shift(m: &Message, p: &PhaseSetting) -> Message {
    let (c, s) = (p.phi.cos(), p.phi.sin());
    let rot = |(pc, ps): (f64, f64)| (pc * c - ps * s, pc * s + ps * c);
    Message::from_pairs_unchecked(rot(m.psi_h_pair()), rot(m.psi_v_pair()), m.xi_pair())
}

/// Effective reflectivity of the variable output beam splitter for a given
/// modulator voltage: `R = sin^2(2 beta) sin^2(pi V / (2 V_pi))`, clamped
/// to the simulation range [0, 0.5].
pub fn reflectivity_from_voltage(v_eom: f64, beta: f64, v_pi: f64) -> f64 {
    let amplitude = (2.0 * beta).sin().powi(2);
    let phase = (std::f64::consts::PI * v_eom / (2.0 * v_pi)).sin().powi(2);
    (amplitude * phase).clamp(0.0, 0.5)
}
