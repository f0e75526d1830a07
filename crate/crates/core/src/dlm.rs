//! The adaptive polarizing-beam-splitter unit.
//!
//! This is the one stateful processor in the network. It simulates a
//! polarizing beam splitter event by event with three stages:
//!
//! * an input stage that copies the arriving message into per-channel
//!   registers and nudges a two-component internal vector `x` toward the
//!   channel the event arrived on (`x_i <- alpha*x_i + (1-alpha)*delta_ik`),
//! * a transformation stage that combines registers and `x` into the four
//!   complex amplitudes a polarizing beam splitter produces, and
//! * an output stage that picks the exit channel by comparing the candidate
//!   channel-0 intensity against a uniform draw and emits a re-normalized
//!   message for that channel.
//!
//! The internal vector is the unit's memory of recent traffic: under steady
//! input it converges geometrically at rate `alpha`, after which the unit
//! reproduces the stationary splitting ratios of the real device. The same
//! unit, fed on a single input channel, serves as a Wollaston prism.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::message::Message;
use crate::rng::RngStream;

/// The four complex output amplitudes (H and V in channels 0 and 1).
#[derive(Debug, Clone, Copy)]
pub struct AmplitudeQuad {
    pub b0_h: Complex64,
    pub b0_v: Complex64,
    pub b1_h: Complex64,
    pub b1_v: Complex64,
}

impl AmplitudeQuad {
    pub fn total_intensity(&self) -> f64 {
        self.b0_h.norm_sqr() + self.b0_v.norm_sqr() + self.b1_h.norm_sqr() + self.b1_v.norm_sqr()
    }
}

/// State of one adaptive PBS: six two-component registers (H phase, V phase
/// and polarization pair for each input channel), the internal vector `x`
/// with `x0 + x1 = 1`, and the learning parameter `alpha`.
#[derive(Debug, Clone)]
pub struct DlmPbs {
    y_h: [(f64, f64); 2],
    y_v: [(f64, f64); 2],
    y_p: [(f64, f64); 2],
    x: [f64; 2],
    alpha: f64,
}

fn unit_pair(angle: f64) -> (f64, f64) {
    (angle.cos(), angle.sin())
}

impl DlmPbs {
    /// Fresh state: `x = (r, 1-r)` with `r` uniform, and all six registers
    /// set to unit vectors with uniformly random directions.
    ///
    /// Draw order (one `r`, then the channel-0 registers H, V, P, then the
    /// channel-1 registers) is fixed so seeded runs stay stable.
    pub fn init(alpha: f64, rng: &mut RngStream) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "learning parameter alpha {alpha} outside (0, 1)"
            )));
        }
        let r = rng.uniform();
        let mut registers = [(0.0, 0.0); 6];
        for reg in registers.iter_mut() {
            *reg = unit_pair(rng.uniform_angle());
        }
        Ok(DlmPbs {
            y_h: [registers[0], registers[3]],
            y_v: [registers[1], registers[4]],
            y_p: [registers[2], registers[5]],
            x: [r, 1.0 - r],
            alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn internal_vector(&self) -> [f64; 2] {
        self.x
    }

    pub fn register_h(&self, k: usize) -> (f64, f64) {
        self.y_h[k]
    }

    pub fn register_v(&self, k: usize) -> (f64, f64) {
        self.y_v[k]
    }

    pub fn register_p(&self, k: usize) -> (f64, f64) {
        self.y_p[k]
    }

    /// Copy the message into the channel-`k` registers. Only the last
    /// message per channel is kept.
    pub fn store_registers(&mut self, k: usize, m: &Message) {
        debug_assert!(k <= 1);
        self.y_h[k] = m.psi_h_pair();
        self.y_v[k] = m.psi_v_pair();
        self.y_p[k] = m.xi_pair();
    }

    /// Learning rule for an event on channel `k`:
    /// `x_i <- alpha*x_i + (1-alpha)*delta_ik`.
    pub fn update_internal(&mut self, k: usize) {
        debug_assert!(k <= 1);
        for i in 0..2 {
            let target = if i == k { 1.0 } else { 0.0 };
            self.x[i] = self.alpha * self.x[i] + (1.0 - self.alpha) * target;
        }
    }

    /// Transformation stage: registers and internal vector combined into the
    /// four output amplitudes of a polarizing beam splitter. H passes
    /// straight through; V is reflected into the other channel and picks up
    /// a 90-degree phase.
    pub fn transform(&self) -> AmplitudeQuad {
        let sx = [self.x[0].sqrt(), self.x[1].sqrt()];
        let a_h = [
            Complex64::new(self.y_h[0].0, self.y_h[0].1) * self.y_p[0].0 * sx[0],
            Complex64::new(self.y_h[1].0, self.y_h[1].1) * self.y_p[1].0 * sx[1],
        ];
        let a_v = [
            Complex64::new(self.y_v[0].0, self.y_v[0].1) * self.y_p[0].1 * sx[0],
            Complex64::new(self.y_v[1].0, self.y_v[1].1) * self.y_p[1].1 * sx[1],
        ];
        let i = Complex64::i();
        AmplitudeQuad {
            b0_h: a_h[0],
            b0_v: i * a_v[1],
            b1_h: a_h[1],
            b1_v: i * a_v[0],
        }
    }

    /// Candidate output intensities `(u^2, v^2)` of channels 0 and 1.
    /// They sum to 1 whenever the written registers are unit pairs.
    pub fn output_weights(&self) -> (f64, f64) {
        (self.channel_candidate(0).1, self.channel_candidate(1).1)
    }

    /// Raw (unnormalized) four-vector for the message that would leave
    /// through `channel`, plus its total intensity. Components are the real
    /// and imaginary parts of the H amplitude followed by the V amplitude.
    fn channel_candidate(&self, channel: usize) -> ([f64; 4], f64) {
        // Channel c takes H from the channel-c registers and V (reflected,
        // with the 90-degree factor folded in) from the other channel.
        let h = 1 - channel;
        let c = channel;
        let sx_c = self.x[c].sqrt();
        let sx_h = self.x[h].sqrt();
        let raw = [
            self.y_h[c].0 * self.y_p[c].0 * sx_c,
            self.y_h[c].1 * self.y_p[c].0 * sx_c,
            -self.y_v[h].1 * self.y_p[h].1 * sx_h,
            self.y_v[h].0 * self.y_p[h].1 * sx_h,
        ];
        let intensity = raw.iter().map(|t| t * t).sum();
        (raw, intensity)
    }

    /// Output stage: choose the exit channel (channel 0 iff `u^2 > r` for a
    /// uniform `r`) and emit the re-normalized message for that channel.
    ///
    /// Raw components are computed first, then the channel norm, then the
    /// polarization pair, then the normalized phase pairs; a polarization
    /// component with zero amplitude gets the fixed phase pair (1, 0).
    pub fn emit(&self, rng: &mut RngStream) -> Result<(u8, Message)> {
        let (p, u2) = self.channel_candidate(0);
        let (q, v2) = self.channel_candidate(1);
        if u2 + v2 <= f64::EPSILON {
            return Err(Error::DegenerateState);
        }
        let r = rng.uniform();
        if u2 > r {
            Ok((0, Self::normalized_message(&p, u2.sqrt())))
        } else {
            Ok((1, Self::normalized_message(&q, v2.sqrt())))
        }
    }

    fn normalized_message(raw: &[f64; 4], norm: f64) -> Message {
        let amp_h = (raw[0] * raw[0] + raw[1] * raw[1]).sqrt();
        let amp_v = (raw[2] * raw[2] + raw[3] * raw[3]).sqrt();
        let psi_h = if amp_h > 0.0 {
            (raw[0] / amp_h, raw[1] / amp_h)
        } else {
            (1.0, 0.0)
        };
        let psi_v = if amp_v > 0.0 {
            (raw[2] / amp_v, raw[3] / amp_v)
        } else {
            (1.0, 0.0)
        };
        Message::from_pairs_unchecked(psi_h, psi_v, (amp_h / norm, amp_v / norm))
    }

    /// Full per-event pipeline: store, then learn, then emit.
    pub fn process(&mut self, k: usize, m: &Message, rng: &mut RngStream) -> Result<(u8, Message)> {
        self.store_registers(k, m);
        self.update_internal(k);
        self.emit(rng)
    }
}
