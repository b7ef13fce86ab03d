//! Experiment configuration, read from TOML.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{IsiConfig, PhaseNoiseConfig};
use crate::dsp::{DspConfig, Decoders};
use crate::error::{Error, Result};
use crate::framing::{ChannelPlan, FrameLayout};
use crate::optics::{ApertureConfig, LpMode, ModeSpec, DEFAULT_WAIST};
use crate::screens::ScreenConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DecoderChoice {
    Mmse,
    Sic,
    #[default]
    Both,
}

impl DecoderChoice {
    pub fn decoders(self) -> Decoders {
        Decoders { mmse: self != DecoderChoice::Sic, sic: self != DecoderChoice::Mmse }
    }
}

impl std::str::FromStr for DecoderChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mmse" => Ok(Self::Mmse),
            "sic" => Ok(Self::Sic),
            "both" => Ok(Self::Both),
            _ => Err(Error::InvalidConfig(format!("unknown decoder {s:?} (expected mmse, sic or both)"))),
        }
    }
}

/// Where the channel matrix comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelModel {
    /// Phase screen through the mode basis.
    #[default]
    Turbulence,
    /// Turbulence-free link (blank screen).
    Blank,
    /// First N_t columns of a random N_r×N_r unitary.
    Unitary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum IsiProfile {
    #[default]
    None,
    /// `[0.05, 1, 0.05]`, energy-normalized.
    ThreeTap,
}

impl IsiProfile {
    pub fn config(self) -> IsiConfig {
        match self {
            IsiProfile::None => IsiConfig::new(vec![Complex64::new(1.0, 0.0)]).unwrap(),
            IsiProfile::ThreeTap => IsiConfig::three_tap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed. Screen `i` uses `sub_seed(seed, i)`, matching `gen-screens`.
    pub seed: u64,
    pub realizations: usize,
    /// Frames transmitted per realization.
    pub frames: usize,
    pub decoder: DecoderChoice,
    pub channel: ChannelModel,
    /// Operating point for `run` and `monte-carlo`.
    pub osnr_db: f64,
    /// Drop the additive noise entirely.
    pub noiseless: bool,
    /// OSNR points for `sweep`.
    pub osnr_grid: Vec<f64>,
    pub tx_modes: Vec<LpMode>,
    pub rx_modes: Vec<LpMode>,
    pub waist: f64,
    pub aperture: ApertureConfig,
    pub screen: ScreenConfig,
    pub frame: FrameLayout,
    pub phase_noise: PhaseNoiseConfig,
    pub dsp: DspConfig,
    pub isi: IsiProfile,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            realizations: 120,
            frames: 3,
            decoder: DecoderChoice::Both,
            channel: ChannelModel::Turbulence,
            osnr_db: 30.0,
            noiseless: false,
            osnr_grid: (0..=12).map(|i| 8.0 + 2.0 * i as f64).collect(),
            tx_modes: LpMode::lowest(5),
            rx_modes: LpMode::ALL.to_vec(),
            waist: DEFAULT_WAIST,
            aperture: ApertureConfig::default(),
            screen: ScreenConfig::default(),
            frame: FrameLayout::default(),
            phase_noise: PhaseNoiseConfig::default(),
            dsp: DspConfig::default(),
            isi: IsiProfile::None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn n_t(&self) -> usize {
        2 * self.tx_modes.len()
    }

    pub fn n_r(&self) -> usize {
        2 * self.rx_modes.len()
    }

    /// Screen parameters with the master seed applied.
    pub fn screen_config(&self) -> ScreenConfig {
        self.screen.with_seed(self.seed)
    }

    pub fn tx_specs(&self) -> Vec<ModeSpec> {
        self.tx_modes.iter().map(|&m| ModeSpec::lp(m, self.waist)).collect()
    }

    pub fn rx_specs(&self) -> Vec<ModeSpec> {
        self.rx_modes.iter().map(|&m| ModeSpec::lp(m, self.waist)).collect()
    }

    /// X/Y channels per transmit mode, mode `m` delayed by `m · ts_len/6`.
    pub fn channel_plans(&self) -> Vec<ChannelPlan> {
        ChannelPlan::mode_pairs(self.tx_modes.len(), self.frame.delay_step(), self.frame.frame_len)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.realizations == 0 || self.frames == 0 {
            return bad("realizations and frames must be >= 1".into());
        }
        if self.tx_modes.is_empty() || self.rx_modes.is_empty() {
            return bad("need at least one transmit and one receive mode".into());
        }
        for (name, set) in [("tx_modes", &self.tx_modes), ("rx_modes", &self.rx_modes)] {
            for (i, m) in set.iter().enumerate() {
                if set[..i].contains(m) {
                    return bad(format!("{name} lists {} twice", m.label()));
                }
            }
        }
        if self.n_t() > self.n_r() {
            return bad(format!("N_t = {} exceeds N_r = {}", self.n_t(), self.n_r()));
        }
        if !(self.waist > 0.0) {
            return bad(format!("waist {}", self.waist));
        }
        if self.osnr_db.is_nan() || self.osnr_grid.iter().any(|v| v.is_nan()) {
            return bad("OSNR values must be numbers".into());
        }
        self.frame.validate()?;
        // every channel must share a training window at least N_t long
        let span = (self.tx_modes.len() - 1) * self.frame.delay_step();
        if span + self.n_t() > self.frame.ts_len {
            return bad(format!("{} modes leave no common training window", self.tx_modes.len()));
        }
        if self.dsp.pilot_window == 0 || self.dsp.eq_taps.is_multiple_of(2) || !(self.dsp.eq_step > 0.0) {
            return bad(format!("bad DSP settings {:?}", self.dsp));
        }
        if self.channel != ChannelModel::Unitary {
            self.screen_config().validate()?;
        }
        Ok(())
    }
}
