//! Link-level simulator and phase optimizer for active STAR-RIS-assisted
//! wireless systems.
//!
//! A STAR-RIS (Simultaneously Transmitting And Reflecting Reconfigurable
//! Intelligent Surface) is a planar array of controllable elements that
//! serves receivers on both sides of the surface. Each element splits its
//! radiated power budget between a transmission path and a reflection path,
//! applies independent discrete phase shifts to each, and (in the active
//! variant modeled here) amplifies the signal with a current-controlled
//! power amplifier.
//!
//! The crate covers the full chain from geometry to optimizer:
//!
//! * [`geometry`] — uniform planar array element placement, terminal
//!   positions, distances and direction angles.
//! * [`channel`] — free-space channel coefficients, antenna gain patterns,
//!   effective apertures.
//! * [`element`] — per-element model: power split vs. varactor bias,
//!   amplifier gain vs. supply current, m-bit phase codebooks, RCS.
//! * [`link`] — coherent combination into received powers, path losses
//!   and SNRs for both receivers.
//! * [`beamform`] — conjugate, quantized, greedy and exhaustive phase
//!   optimizers plus radiation-pattern sweeps.
//! * [`scenario`] / [`export`] — scenario file parsing and CSV/JSON export.
//! * [`validate`] — the built-in acceptance suite driven by the CLI and the
//!   integration tests.

// `!(x > 0.0)`-style guards are used on purpose: they reject NaN where
// a plain `<=` would let it through validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamform;
pub mod channel;
pub mod element;
pub mod error;
pub mod export;
pub mod geometry;
pub mod link;
pub mod scenario;
pub mod validate;

pub use beamform::{PatternSample, PhaseConfiguration, SteeringTarget};
pub use channel::{AntennaPattern, ChannelCoefficient};
pub use element::{CalibrationCurves, ElementResponse, ElementState, SplitCoefficients};
pub use error::{Error, Result};
pub use geometry::{ArrayLayout, Side, TerminalPosition};
pub use link::{LinkResult, Scenario, Terminal};
pub use scenario::{ParsedScenario, ScenarioFile};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
