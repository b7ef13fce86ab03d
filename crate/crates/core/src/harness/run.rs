//! One realization end to end: screen → coupling → frame → channel → receiver.

use serde::{Deserialize, Serialize};

use super::config::{ChannelModel, ExperimentConfig};
use super::metrics::{metrics, qpsk_ber, ChannelMetrics, HD_FEC_THRESHOLD};
use crate::channel::{osnr_to_esn0_db, osnr_to_n0, propagate, wiener_phase, PhaseNoiseConfig};
use crate::dsp::{receive, DecodeResult, Reception};
use crate::error::{Error, Result};
use crate::framing::{assemble_frames, Frame};
use crate::linalg::{condition_number, unitary_submatrix, CMatrix};
use crate::optics::{ChannelMatrix, OpticalLink, RasterGrid};
use crate::par;
use crate::rng::{rng_for, sub_seed, Stream};
use crate::screens::{generate_screen, PhaseScreen};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderReport {
    pub ber: Vec<f64>,
    pub evm_pct: Vec<f64>,
    pub errors: Vec<u64>,
    pub bits_per_channel: u64,
    pub avg_ber: f64,
    pub min_ber: f64,
    pub max_ber: f64,
    pub outage: bool,
    /// Decode order of the first frame (empty for MMSE).
    pub order: Vec<usize>,
    /// Post-detection SINR per channel in dB (first frame).
    pub sinr_db: Vec<f64>,
    pub regularized: bool,
}

impl DecoderReport {
    fn new(m: ChannelMetrics, d: &DecodeResult, sic: bool) -> Self {
        let total: u64 = m.errors.iter().sum();
        let avg_ber = total as f64 / (m.bits_per_channel * m.errors.len() as u64) as f64;
        Self {
            min_ber: m.ber.iter().cloned().fold(f64::INFINITY, f64::min),
            max_ber: m.ber.iter().cloned().fold(0.0, f64::max),
            outage: avg_ber > HD_FEC_THRESHOLD,
            avg_ber,
            ber: m.ber,
            evm_pct: m.evm_pct,
            errors: m.errors,
            bits_per_channel: m.bits_per_channel,
            order: if sic { d.order.clone() } else { Vec::new() },
            sinr_db: d.sinr.iter().map(|s| 10.0 * s.log10()).collect(),
            regularized: d.regularized,
        }
    }

    pub fn total_errors(&self) -> u64 {
        self.errors.iter().sum()
    }

    pub fn total_bits(&self) -> u64 {
        self.bits_per_channel * self.errors.len() as u64
    }

    /// 1-based position of `channel` in the decode order, if any.
    pub fn rank_of(&self, channel: usize) -> Option<usize> {
        self.order.iter().position(|&c| c == channel).map(|p| p + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub realization: usize,
    pub seed: u64,
    /// `None` when noiseless.
    pub osnr_db: Option<f64>,
    pub n0: f64,
    pub condition_number: f64,
    pub received_power: f64,
    pub mmse: Option<DecoderReport>,
    pub sic: Option<DecoderReport>,
}

/// Everything that is shared by the realizations of one configuration.
#[derive(Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub frame: Frame,
    link: Option<OpticalLink>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let frame = assemble_frames(&config.frame, &config.channel_plans(), config.frames)?;
        let link = match config.channel {
            ChannelModel::Unitary => None,
            _ => {
                let sc = config.screen_config();
                let grid = RasterGrid { size: sc.grid_size, pitch: sc.pitch() };
                Some(OpticalLink::new(grid, &config.tx_specs(), &config.rx_specs(), config.aperture)?)
            }
        };
        Ok(Self { config, frame, link })
    }

    pub fn link(&self) -> Option<&OpticalLink> {
        self.link.as_ref()
    }

    pub fn realization_seed(&self, index: usize) -> u64 {
        sub_seed(self.config.seed, index as u64)
    }

    /// Screen `index` of the batch (`sub_seed(seed, index)`).
    pub fn screen(&self, index: usize) -> Result<PhaseScreen> {
        let sc = self.config.screen_config();
        match self.config.channel {
            ChannelModel::Blank => Ok(PhaseScreen::blank(sc.grid_size, sc.pitch())),
            _ => generate_screen(&sc.with_seed(sub_seed(sc.seed, index as u64))),
        }
    }

    /// Channel matrix of realization `index`; `screen` overrides the batch screen.
    pub fn channel(&self, index: usize, screen: Option<&PhaseScreen>) -> Result<ChannelMatrix> {
        match (&self.link, self.config.channel) {
            (None, _) => {
                let mut rng = rng_for(self.realization_seed(index), Stream::Unitary);
                ChannelMatrix::new(unitary_submatrix(self.config.n_r(), self.config.n_t(), &mut rng), vec![1.0; self.config.n_t()])
            }
            (Some(link), _) => match screen {
                Some(s) => link.channel(s),
                None => link.channel(&self.screen(index)?),
            },
        }
    }

    pub fn n0_at(&self, osnr_db: Option<f64>) -> f64 {
        osnr_db.map_or(0.0, |o| osnr_to_n0(o, self.config.phase_noise.baud, 1.0))
    }

    /// Default operating point (`None` when noiseless).
    pub fn operating_osnr(&self) -> Option<f64> {
        (!self.config.noiseless).then_some(self.config.osnr_db)
    }

    /// Transmits the frame through `h` and runs the receiver; returns the
    /// reception and the noise variance used.
    pub fn receive_on(&self, index: usize, h: &CMatrix, osnr_db: Option<f64>, noise_seed: u64) -> Result<(Reception, f64)> {
        let cfg = &self.config;
        let phase_cfg = PhaseNoiseConfig { seed: self.realization_seed(index), ..cfg.phase_noise };
        let phase = wiener_phase(self.frame.len(), h.nrows(), &phase_cfg)?;
        let n0 = self.n0_at(osnr_db);
        let y = propagate(&self.frame.symbols, h, &phase, n0, noise_seed, &cfg.isi.config())?;
        Ok((receive(&y, &self.frame, n0, &cfg.dsp, cfg.decoder.decoders())?, n0))
    }

    /// Transmits the frame through `h` and decodes it.
    pub fn run_on(&self, index: usize, h: &CMatrix, osnr_db: Option<f64>, noise_seed: u64) -> Result<RunReport> {
        let seed = self.realization_seed(index);
        let (rec, n0) = self.receive_on(index, h, osnr_db, noise_seed)?;
        let report = |d: &Option<DecodeResult>, sic: bool| -> Result<Option<DecoderReport>> {
            d.as_ref().map(|d| Ok(DecoderReport::new(metrics(&self.frame, d)?, d, sic))).transpose()
        };
        Ok(RunReport {
            realization: index,
            seed,
            osnr_db,
            n0,
            condition_number: condition_number(h),
            received_power: h.norm_squared() / h.ncols() as f64,
            mmse: report(&rec.mmse, false)?,
            sic: report(&rec.sic, true)?,
        })
    }

    /// Full pipeline for realization `index` at the configured operating point.
    pub fn run_realization(&self, index: usize, screen: Option<&PhaseScreen>) -> Result<RunReport> {
        let inner = || -> Result<RunReport> {
            let h = self.channel(index, screen)?;
            self.run_on(index, &h.h, self.operating_osnr(), self.realization_seed(index))
        };
        inner().map_err(|e| Error::Realization { index, source: Box::new(e) })
    }

    /// Fixed channel, noise re-drawn at every OSNR point.
    pub fn sweep_osnr(&self, index: usize, grid: &[f64], screen: Option<&PhaseScreen>) -> Result<Vec<SweepPoint>> {
        if grid.is_empty() {
            return Err(Error::InvalidConfig("empty OSNR grid".into()));
        }
        let h = self.channel(index, screen).map_err(|e| Error::Realization { index, source: Box::new(e) })?;
        let seed = self.realization_seed(index);
        par::try_map_indices(grid.len(), |j| {
            let osnr = grid[j];
            let r = self.run_on(index, &h.h, Some(osnr), sub_seed(seed, j as u64 + 1))?;
            Ok(SweepPoint {
                osnr_db: osnr,
                esn0_db: osnr_to_esn0_db(osnr, self.config.phase_noise.baud),
                theory_ber: qpsk_ber(1.0 / r.n0),
                mmse: r.mmse.as_ref().map(BerSpread::of),
                sic: r.sic.as_ref().map(BerSpread::of),
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerSpread {
    pub avg: f64,
    pub min: f64,
    pub max: f64,
    pub errors: u64,
    pub bits: u64,
}

impl BerSpread {
    fn of(d: &DecoderReport) -> Self {
        Self { avg: d.avg_ber, min: d.min_ber, max: d.max_ber, errors: d.total_errors(), bits: d.total_bits() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub osnr_db: f64,
    pub esn0_db: f64,
    pub theory_ber: f64,
    pub mmse: Option<BerSpread>,
    pub sic: Option<BerSpread>,
}
