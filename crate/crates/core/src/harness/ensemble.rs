//! Monte-Carlo ensembles over turbulence realizations.

use serde::{Deserialize, Serialize};

use super::metrics::{HistogramBin, HD_FEC_THRESHOLD};
use super::run::{DecoderReport, Experiment, RunReport};
use crate::error::Result;
use crate::par;

/// Lowest histogram edge, `10^-8`; bins are half a decade wide up to 1.
const HISTOGRAM_FLOOR_EXP: i32 = -16;
/// Standard deviations allowed before a paired comparison counts as a reversal.
pub const DOMINANCE_Z: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderSummary {
    /// Mean over realizations of each realization's average BER.
    pub average_ber: f64,
    /// True when no errors were seen at all; `average_ber` is then `1/bits`.
    pub upper_bound: bool,
    pub outage_probability: f64,
    pub outages: usize,
    pub error_free: usize,
    pub min_ber: f64,
    pub max_ber: f64,
    /// Error-free realizations go to the first bin, `[0, 1/bits)`.
    pub histogram: Vec<HistogramBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub realizations: usize,
    pub n_t: usize,
    pub n_r: usize,
    pub osnr_db: Option<f64>,
    pub hd_fec_threshold: f64,
    pub mean_received_power: f64,
    pub mmse: Option<DecoderSummary>,
    pub sic: Option<DecoderSummary>,
    /// Realizations where SIC is worse than MMSE beyond counting tolerance.
    pub sic_reversals: Option<usize>,
}

/// Half-decade log bins; `bits` sets the error-free bin width.
pub fn ber_histogram(bers: &[f64], bits: u64) -> Vec<HistogramBin> {
    let floor = 1.0 / bits.max(1) as f64;
    let mut bins = vec![HistogramBin { lo: 0.0, hi: floor, count: 0 }];
    for k in HISTOGRAM_FLOOR_EXP..0 {
        bins.push(HistogramBin { lo: 10f64.powf(k as f64 / 2.0), hi: 10f64.powf((k + 1) as f64 / 2.0), count: 0 });
    }
    bins[1].lo = bins[1].lo.min(floor);
    for &b in bers {
        let i = if b == 0.0 {
            0
        } else {
            let k = (2.0 * b.log10()).floor() as i32;
            (k.clamp(HISTOGRAM_FLOOR_EXP, -1) - HISTOGRAM_FLOOR_EXP + 1) as usize
        };
        bins[i].count += 1;
    }
    bins
}

fn summarize(reports: &[&DecoderReport]) -> DecoderSummary {
    let n = reports.len() as f64;
    let bers: Vec<f64> = reports.iter().map(|r| r.avg_ber).collect();
    let bits: u64 = reports.iter().map(|r| r.total_bits()).sum();
    let errors: u64 = reports.iter().map(|r| r.total_errors()).sum();
    let outages = reports.iter().filter(|r| r.outage).count();
    let upper_bound = errors == 0;
    DecoderSummary {
        average_ber: if upper_bound { 1.0 / bits as f64 } else { bers.iter().sum::<f64>() / n },
        upper_bound,
        outage_probability: outages as f64 / n,
        outages,
        error_free: reports.iter().filter(|r| r.total_errors() == 0).count(),
        min_ber: bers.iter().cloned().fold(f64::INFINITY, f64::min),
        max_ber: bers.iter().cloned().fold(0.0, f64::max),
        histogram: ber_histogram(&bers, reports.first().map_or(1, |r| r.total_bits())),
    }
}

/// True when `sic` is worse than `mmse` by more than `DOMINANCE_Z` standard
/// deviations of the difference of two binomial estimates.
pub fn is_reversal(mmse: &DecoderReport, sic: &DecoderReport) -> bool {
    let n = mmse.total_bits() as f64;
    let (pm, ps) = (mmse.avg_ber, sic.avg_ber);
    let sd = ((pm * (1.0 - pm) + ps * (1.0 - ps)) / n).sqrt();
    ps - pm > DOMINANCE_Z * sd + 1.0 / n
}

pub fn summarize_ensemble(exp: &Experiment, reports: &[RunReport]) -> EnsembleSummary {
    let collect = |pick: fn(&RunReport) -> Option<&DecoderReport>| -> Option<Vec<&DecoderReport>> {
        reports.iter().map(pick).collect()
    };
    let mmse = collect(|r| r.mmse.as_ref());
    let sic = collect(|r| r.sic.as_ref());
    let sic_reversals = match (&mmse, &sic) {
        (Some(m), Some(s)) => Some(m.iter().zip(s).filter(|(m, s)| is_reversal(m, s)).count()),
        _ => None,
    };
    EnsembleSummary {
        realizations: reports.len(),
        n_t: exp.config.n_t(),
        n_r: exp.config.n_r(),
        osnr_db: exp.operating_osnr(),
        hd_fec_threshold: HD_FEC_THRESHOLD,
        mean_received_power: reports.iter().map(|r| r.received_power).sum::<f64>() / reports.len().max(1) as f64,
        mmse: mmse.filter(|v| !v.is_empty()).map(|v| summarize(&v)),
        sic: sic.filter(|v| !v.is_empty()).map(|v| summarize(&v)),
        sic_reversals,
    }
}

/// Runs `count` realizations (in parallel, reported in index order).
pub fn monte_carlo(exp: &Experiment, count: usize) -> Result<(Vec<RunReport>, EnsembleSummary)> {
    if count == 0 {
        return Err(crate::error::Error::InvalidConfig("realization count must be >= 1".into()));
    }
    let reports = par::try_map_indices(count, |i| exp.run_realization(i, None))?;
    let summary = summarize_ensemble(exp, &reports);
    Ok((reports, summary))
}
