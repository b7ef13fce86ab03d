//! Mode-division multiplexed free-space optical link simulator: turbulent
//! phase screens, mode coupling, framed DP-QPSK transmission, and MMSE / SIC
//! receivers with Monte-Carlo outage statistics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channel;
pub mod dsp;
pub mod error;
pub mod framing;
pub mod harness;
pub mod linalg;
pub mod optics;
pub mod par;
pub mod rng;
pub mod screen_file;
pub mod screens;
pub mod signal;

pub use error::{Error, Result};
