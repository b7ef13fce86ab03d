//! Carrier-asynchronous MIMO receiver: per-frame LS channel estimate,
//! pilot-aided phase cancellation, reference-trained LMS equalizer, then
//! MMSE and/or SIC detection on the same samples.

pub mod detect;
pub mod equalizer;
pub mod estimate;

pub use detect::{hard_decision, mmse_decode, mmse_error_covariance, sic_decode, sic_order, stage_sinrs, DecodeResult};
pub use equalizer::{equalize, Equalizer};
pub use estimate::{cancel_phase, estimate_channel, estimate_phase, ChannelEstimate, PhaseEstimate};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::framing::Frame;
use crate::signal::Samples;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DspConfig {
    pub pilot_window: usize,
    pub equalizer: bool,
    pub eq_taps: usize,
    pub eq_step: f64,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self { pilot_window: 8, equalizer: true, eq_taps: equalizer::DEFAULT_TAPS, eq_step: equalizer::DEFAULT_STEP }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Decoders {
    pub mmse: bool,
    pub sic: bool,
}

#[derive(Debug, Clone)]
pub struct Reception {
    /// One estimate per frame.
    pub estimates: Vec<ChannelEstimate>,
    /// SIC order per frame (empty when SIC is not run).
    pub orders: Vec<Vec<usize>>,
    pub phase: Vec<Vec<f64>>,
    pub mmse: Option<DecodeResult>,
    pub sic: Option<DecodeResult>,
}

/// Instants of `frame` (absolute) where every channel is in its training sequence.
pub fn training_instants(frame: &Frame, index: usize) -> Vec<usize> {
    let f = frame.layout.frame_len;
    (index * f..(index + 1) * f).filter(|&t| frame.all_training(t)).collect()
}

/// Instants of `frame` where every channel carries a known symbol.
pub fn known_instants(frame: &Frame, index: usize) -> Vec<usize> {
    let f = frame.layout.frame_len;
    (index * f..(index + 1) * f).filter(|&t| frame.all_known(t)).collect()
}

fn gather(s: &Samples, at: &[usize]) -> Samples {
    let mut out = Vec::with_capacity(at.len() * s.width);
    for &t in at {
        out.extend_from_slice(s.row(t));
    }
    Samples { width: s.width, data: out }
}

/// Runs the receive chain on `y` for the transmitted `frame`.
pub fn receive(y: &Samples, frame: &Frame, n0: f64, config: &DspConfig, decoders: Decoders) -> Result<Reception> {
    if y.len() != frame.len() {
        return Err(Error::Misaligned(format!("{} received vs {} transmitted symbols", y.len(), frame.len())));
    }
    let f_len = frame.layout.frame_len;
    let n_r = y.width;
    let mut estimates = Vec::with_capacity(frame.n_frames);
    let mut phase = vec![Vec::with_capacity(y.len()); n_r];
    let mut rotated = Samples { width: n_r, data: Vec::with_capacity(y.data.len()) };
    let mut known_all = Vec::new();
    for fi in 0..frame.n_frames {
        let ts = training_instants(frame, fi);
        if ts.len() < frame.n_channels() {
            return Err(Error::RankDeficient { rcond: 0.0, rows: frame.n_channels(), cols: ts.len() });
        }
        let est = estimate_channel(&gather(y, &ts), &gather(&frame.symbols, &ts))?;
        let (start, end) = (fi * f_len, (fi + 1) * f_len);
        let seg_y = y.slice(start, end);
        let seg_s = frame.symbols.slice(start, end);
        let known: Vec<usize> = known_instants(frame, fi).into_iter().map(|t| t - start).collect();
        let p = estimate_phase(&seg_y, &seg_s, &known, &est.h_hat, config.pilot_window)?;
        rotated.data.extend(cancel_phase(&seg_y, &p)?.data);
        for (dst, src) in phase.iter_mut().zip(p.phase) {
            dst.extend(src);
        }
        known_all.extend(known.into_iter().map(|t| t + start));
        estimates.push(est);
    }

    let equalized = if config.equalizer {
        let mut eq = Equalizer::new(n_r, config.eq_taps, config.eq_step)?;
        let mut is_known = vec![false; y.len()];
        for &t in &known_all {
            is_known[t] = true;
        }
        eq.run(&rotated, |t, target: &mut [Complex64]| {
            if !is_known[t] {
                return false;
            }
            equalizer::reference_at(&estimates[t / f_len].h_hat, frame.symbols.row(t), target);
            true
        })?
    } else {
        rotated
    };

    let mut mmse = Vec::new();
    let mut sic = Vec::new();
    let mut orders = Vec::new();
    for (fi, est) in estimates.iter().enumerate() {
        let seg = equalized.slice(fi * f_len, (fi + 1) * f_len);
        if decoders.mmse {
            mmse.push(mmse_decode(&seg, &est.h_hat, n0)?);
        }
        if decoders.sic {
            let order = sic_order(&est.h_hat, n0)?;
            sic.push(sic_decode(&seg, &est.h_hat, n0, &order)?);
            orders.push(order);
        }
    }
    Ok(Reception {
        estimates,
        orders,
        phase,
        mmse: if decoders.mmse { Some(DecodeResult::concat(mmse)?) } else { None },
        sic: if decoders.sic { Some(DecodeResult::concat(sic)?) } else { None },
    })
}

