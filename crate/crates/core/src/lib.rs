//! Event-by-event simulation of a delayed-choice Mach-Zehnder
//! interferometer with a variable output beam splitter.
//!
//! Photons are modeled as messengers that carry a six-component
//! phase/polarization message and traverse a network of processing units
//! one at a time. The polarizing splitters are adaptive units whose internal
//! vector learns from the traffic they see; every other component is a
//! stateless transform. Detection events, together with the per-event path
//! label and modulator choice, form the dataset from which interference
//! visibility and path distinguishability are estimated.

pub mod analysis;
pub mod dlm;
pub mod error;
pub mod experiment;
pub mod message;
pub mod network;
pub mod optics;
pub mod rng;

pub use error::{Error, Result};
pub use message::{JonesPair, Message, Messenger};
