//! BER/EVM, the AWGN reference curve, scintillation statistics and the
//! net spectral-efficiency calculator.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, LogNormal};
use statrs::function::erf::erfc;

use crate::channel::{osnr_to_n0, DEFAULT_BAUD};
use crate::dsp::DecodeResult;
use crate::error::{Error, Result};
use crate::framing::{qpsk_bits, Frame, SymbolKind};

/// Hard-decision FEC limit; a realization above it is in outage.
pub const HD_FEC_THRESHOLD: f64 = 4.7e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMetrics {
    pub ber: Vec<f64>,
    pub evm_pct: Vec<f64>,
    pub errors: Vec<u64>,
    pub bits_per_channel: u64,
}

/// Per-channel BER and EVM over data positions; EVM uses the soft symbols.
pub fn metrics(frame: &Frame, decoded: &DecodeResult) -> Result<ChannelMetrics> {
    let n = frame.n_channels();
    if decoded.hard.width != n || decoded.hard.len() != frame.len() || decoded.soft.len() != frame.len() {
        return Err(Error::Misaligned(format!(
            "decoded {}x{} vs frame {}x{}",
            decoded.hard.len(),
            decoded.hard.width,
            frame.len(),
            n
        )));
    }
    let mut errors = vec![0u64; n];
    let mut err_pow = vec![0.0; n];
    let mut ref_pow = vec![0.0; n];
    let mut count = vec![0u64; n];
    for t in 0..frame.len() {
        let (soft, hard, sent) = (decoded.soft.row(t), decoded.hard.row(t), frame.symbols.row(t));
        for c in 0..n {
            if frame.kind(t, c) != SymbolKind::Data {
                continue;
            }
            let b = qpsk_bits(hard[c]);
            let r = frame.bits_at(t, c);
            errors[c] += (b[0] != r[0]) as u64 + (b[1] != r[1]) as u64;
            err_pow[c] += (soft[c] - sent[c]).norm_sqr();
            ref_pow[c] += sent[c].norm_sqr();
            count[c] += 1;
        }
    }
    let bits = 2 * count[0];
    if count.iter().any(|&c| 2 * c != bits) || bits == 0 {
        return Err(Error::Misaligned("channels carry different data counts".into()));
    }
    Ok(ChannelMetrics {
        ber: errors.iter().map(|&e| e as f64 / bits as f64).collect(),
        evm_pct: err_pow.iter().zip(&ref_pow).map(|(e, r)| 100.0 * (e / r).sqrt()).collect(),
        errors,
        bits_per_channel: bits,
    })
}

/// Gray QPSK bit error probability at linear Es/N0.
pub fn qpsk_ber(esn0: f64) -> f64 {
    0.5 * erfc((esn0 / 2.0).sqrt())
}

/// Per-channel BER of an N_r×N_t unitary-submatrix channel versus OSNR;
/// unitary columns preserve per-channel SNR so `n_t`, `n_r` only need `n_t ≤ n_r`.
pub fn theoretical_reference(osnr_db: &[f64], n_t: usize, n_r: usize) -> Result<Vec<(f64, f64)>> {
    if n_t > n_r {
        return Err(Error::InvalidConfig(format!("n_t = {n_t} > n_r = {n_r}")));
    }
    Ok(osnr_db
        .iter()
        .map(|&o| {
            let n0 = osnr_to_n0(o, DEFAULT_BAUD, 1.0);
            (o, if n0 == 0.0 { 0.0 } else { qpsk_ber(1.0 / n0) })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScintillationStats {
    pub count: usize,
    pub mean_power: f64,
    /// `⟨P²⟩/⟨P⟩² − 1`.
    pub sigma_i2: f64,
    /// Mean and standard deviation of `ln P`.
    pub ln_mean: f64,
    pub ln_std: f64,
    /// Kolmogorov–Smirnov distance between the samples and the fitted lognormal.
    pub ks_distance: f64,
    /// Histogram of `P / ⟨P⟩`.
    pub histogram: Vec<HistogramBin>,
}

pub fn scintillation_stats(powers: &[f64], bins: usize) -> Result<ScintillationStats> {
    if let Some(&p) = powers.iter().find(|&&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::NonPositivePower(p));
    }
    if powers.len() < 2 {
        return Err(Error::InvalidConfig("need at least two power samples".into()));
    }
    let n = powers.len() as f64;
    let mean = powers.iter().sum::<f64>() / n;
    let second = powers.iter().map(|p| p * p).sum::<f64>() / n;
    let sigma_i2 = (second / (mean * mean) - 1.0).max(0.0);
    let logs: Vec<f64> = powers.iter().map(|p| p.ln()).collect();
    let ln_mean = logs.iter().sum::<f64>() / n;
    let ln_std = (logs.iter().map(|l| (l - ln_mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let ks_distance = if ln_std > 1e-12 * ln_mean.abs().max(1.0) {
        let fit = LogNormal::new(ln_mean, ln_std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        ks_statistic(powers, |x| fit.cdf(x))
    } else {
        0.0
    };
    let normalized: Vec<f64> = powers.iter().map(|p| p / mean).collect();
    let lo = normalized.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = normalized.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bins = bins.max(1);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut histogram: Vec<HistogramBin> =
        (0..bins).map(|i| HistogramBin { lo: lo + i as f64 * width, hi: lo + (i + 1) as f64 * width, count: 0 }).collect();
    for v in normalized {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        histogram[i].count += 1;
    }
    Ok(ScintillationStats { count: powers.len(), mean_power: mean, sigma_i2, ln_mean, ln_std, ks_distance, histogram })
}

/// One-sample KS distance against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FecConvention {
    /// Net rate = gross / (1 + overhead).
    Divide,
    /// Net rate = gross · (1 − overhead).
    Subtract,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEfficiencyConfig {
    pub n_channels: usize,
    pub baud: f64,
    pub ts_fraction: f64,
    pub pilot_fraction: f64,
    pub fec_overhead: f64,
    pub fec: FecConvention,
    pub rolloff: f64,
}

impl Default for SpectralEfficiencyConfig {
    fn default() -> Self {
        Self {
            n_channels: 10,
            baud: DEFAULT_BAUD,
            ts_fraction: 1680.0 / 20_000.0,
            pilot_fraction: 0.1,
            fec_overhead: 0.0625,
            fec: FecConvention::Divide,
            rolloff: 0.1,
        }
    }
}

/// Raw QPSK line rate over all channels in bit/s.
pub fn line_rate(n_channels: usize, baud: f64) -> f64 {
    n_channels as f64 * baud * 2.0
}

pub fn net_spectral_efficiency(cfg: &SpectralEfficiencyConfig) -> f64 {
    let fec = match cfg.fec {
        FecConvention::Divide => 1.0 / (1.0 + cfg.fec_overhead),
        FecConvention::Subtract => 1.0 - cfg.fec_overhead,
    };
    line_rate(cfg.n_channels, cfg.baud) * (1.0 - cfg.ts_fraction) * (1.0 - cfg.pilot_fraction) * fec
        / (cfg.baud * (1.0 + cfg.rolloff))
}
