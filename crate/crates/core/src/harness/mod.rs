//! Experiment orchestration: configuration, single runs, OSNR sweeps,
//! Monte-Carlo ensembles, metrics and report files.

pub mod config;
pub mod ensemble;
pub mod metrics;
pub mod report;
pub mod run;

pub use config::{ChannelModel, DecoderChoice, ExperimentConfig, IsiProfile};
pub use ensemble::{is_reversal, monte_carlo, summarize_ensemble, DecoderSummary, EnsembleSummary};
pub use metrics::{
    metrics, net_spectral_efficiency, qpsk_ber, scintillation_stats, theoretical_reference, ScintillationStats,
    SpectralEfficiencyConfig, HD_FEC_THRESHOLD,
};
pub use run::{DecoderReport, Experiment, RunReport, SweepPoint};

use crate::error::Result;
use crate::optics::OpticalLink;
use crate::par;
use crate::screens::{generate_screen, ScreenConfig};
use crate::rng::sub_seed;

/// Received-power proxy for `count` screens of the batch seeded by `config.seed`.
pub fn screen_powers(link: &OpticalLink, config: &ScreenConfig, count: usize) -> Result<Vec<f64>> {
    par::try_map_indices(count, |i| {
        let screen = generate_screen(&config.with_seed(sub_seed(config.seed, i as u64)))?;
        link.received_power(&screen)
    })
}
