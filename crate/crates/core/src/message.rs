//! The message carried by each photon-messenger.
//!
//! A message is a six-component unit vector: one cosine/sine pair for the
//! phase of the horizontal polarization component, one for the vertical
//! component, and one for the polarization angle. It maps one-to-one to a
//! pair of complex field amplitudes (the Jones view), which the passive
//! transforms and the test oracles work in. Angles are never stored raw;
//! only their cosine/sine pairs exist, which keeps the representation free
//! of branch cuts.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance on the unit-norm invariants of the component pairs.
pub const UNIT_TOL: f64 = 1e-12;

/// Six-component message: phases of the H and V field components plus the
/// polarization angle, each stored as a (cos, sin) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    cos_psi_h: f64,
    sin_psi_h: f64,
    cos_psi_v: f64,
    sin_psi_v: f64,
    cos_xi: f64,
    sin_xi: f64,
}

/// Complex H/V field amplitudes equivalent to a [`Message`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesPair {
    pub h: Complex64,
    pub v: Complex64,
}

impl JonesPair {
    pub fn new(h: Complex64, v: Complex64) -> Self {
        JonesPair { h, v }
    }

    /// Total intensity |h|^2 + |v|^2.
    pub fn intensity(&self) -> f64 {
        self.h.norm_sqr() + self.v.norm_sqr()
    }
}

impl Message {
    /// Build a message from the three angles (radians).
    pub fn from_angles(psi_h: f64, psi_v: f64, xi: f64) -> Result<Self> {
        if !(psi_h.is_finite() && psi_v.is_finite() && xi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "message angles must be finite, got ({psi_h}, {psi_v}, {xi})"
            )));
        }
        Ok(Message {
            cos_psi_h: psi_h.cos(),
            sin_psi_h: psi_h.sin(),
            cos_psi_v: psi_v.cos(),
            sin_psi_v: psi_v.sin(),
            cos_xi: xi.cos(),
            sin_xi: xi.sin(),
        })
    }

    /// Build a message from six components, checking the unit-pair invariants.
    pub fn from_components(c: [f64; 6]) -> Result<Self> {
        for pair in c.chunks_exact(2) {
            let norm = pair[0] * pair[0] + pair[1] * pair[1];
            if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidArgument(format!(
                    "component pair ({}, {}) is not a unit vector",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(Message {
            cos_psi_h: c[0],
            sin_psi_h: c[1],
            cos_psi_v: c[2],
            sin_psi_v: c[3],
            cos_xi: c[4],
            sin_xi: c[5],
        })
    }

    /// Internal constructor for pairs already normalized by the caller.
    pub(crate) fn from_pairs_unchecked(
        psi_h: (f64, f64),
        psi_v: (f64, f64),
        xi: (f64, f64),
    ) -> Self {
        Message {
            cos_psi_h: psi_h.0,
            sin_psi_h: psi_h.1,
            cos_psi_v: psi_v.0,
            sin_psi_v: psi_v.1,
            cos_xi: xi.0,
            sin_xi: xi.1,
        }
    }

    /// Reconstruct a message from complex amplitudes.
    ///
    /// The polarization pair is `(|h|, |v|)` after normalization and each
    /// phase pair is the unit vector in the direction of the corresponding
    /// amplitude. A component with zero amplitude gets the fixed phase pair
    /// (1, 0): the phase is unobservable there and a fixed convention keeps
    /// runs deterministic.
    pub fn from_jones(j: &JonesPair) -> Result<Self> {
        let ah = j.h.norm();
        let av = j.v.norm();
        let norm = (ah * ah + av * av).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateMessage);
        }
        let psi_h = if ah > 0.0 {
            (j.h.re / ah, j.h.im / ah)
        } else {
            (1.0, 0.0)
        };
        let psi_v = if av > 0.0 {
            (j.v.re / av, j.v.im / av)
        } else {
            (1.0, 0.0)
        };
        Ok(Message::from_pairs_unchecked(
            psi_h,
            psi_v,
            (ah / norm, av / norm),
        ))
    }

    /// The plane-wave view: `h = cos(xi) e^{i psi_h}`, `v = sin(xi) e^{i psi_v}`.
    pub fn to_jones(&self) -> JonesPair {
        JonesPair {
            h: Complex64::new(self.cos_psi_h, self.sin_psi_h) * self.cos_xi,
            v: Complex64::new(self.cos_psi_v, self.sin_psi_v) * self.sin_xi,
        }
    }

    pub fn psi_h_pair(&self) -> (f64, f64) {
        (self.cos_psi_h, self.sin_psi_h)
    }

    pub fn psi_v_pair(&self) -> (f64, f64) {
        (self.cos_psi_v, self.sin_psi_v)
    }

    pub fn xi_pair(&self) -> (f64, f64) {
        (self.cos_xi, self.sin_xi)
    }

    pub fn components(&self) -> [f64; 6] {
        [
            self.cos_psi_h,
            self.sin_psi_h,
            self.cos_psi_v,
            self.sin_psi_v,
            self.cos_xi,
            self.sin_xi,
        ]
    }

    /// Largest deviation of the three component pairs from unit norm.
    pub fn unit_pair_error(&self) -> f64 {
        let e1 = (self.cos_psi_h * self.cos_psi_h + self.sin_psi_h * self.sin_psi_h - 1.0).abs();
        let e2 = (self.cos_psi_v * self.cos_psi_v + self.sin_psi_v * self.sin_psi_v - 1.0).abs();
        let e3 = (self.cos_xi * self.cos_xi + self.sin_xi * self.sin_xi - 1.0).abs();
        e1.max(e2).max(e3)
    }
}

/// A message plus the bookkeeping carried by one particle: the arm it took
/// through the interferometer (assigned once, at the input beam splitter)
/// and its current channel.
#[derive(Debug, Clone, Copy)]
pub struct Messenger {
    pub message: Message,
    path_label: Option<u8>,
    pub channel: u8,
}

impl Messenger {
    pub fn new(message: Message, channel: u8) -> Self {
        Messenger {
            message,
            path_label: None,
            channel,
        }
    }

    pub fn path_label(&self) -> Option<u8> {
        self.path_label
    }

    /// Assign the path label. May be called exactly once.
    pub fn set_path_label(&mut self, label: u8) {
        assert!(
            self.path_label.is_none(),
            "path label may be assigned only once"
        );
        assert!(label <= 1, "path label must be 0 or 1");
        self.path_label = Some(label);
    }
}
