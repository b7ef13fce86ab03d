//! Symbol-rate MIMO channel: y[t] = diag(e^{jφ[t]}) · H · (g ∗ s)[t] + n[t].

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::rng::{complex_normal, normal, rng_for, sub_seed, Stream};
use crate::signal::Samples;

/// ASE reference bandwidth for OSNR.
pub const OSNR_REFERENCE_BANDWIDTH: f64 = 12.5e9;
pub const DEFAULT_BAUD: f64 = 34.46e9;
pub const DEFAULT_LINEWIDTH: f64 = 1e5;

/// Noise variance per complex receive sample for a per-channel signal power
/// `p_ch`. Infinite OSNR gives zero.
pub fn osnr_to_n0(osnr_db: f64, baud: f64, p_ch: f64) -> f64 {
    if osnr_db == f64::INFINITY {
        return 0.0;
    }
    p_ch * baud / (10f64.powf(osnr_db / 10.0) * 2.0 * OSNR_REFERENCE_BANDWIDTH)
}

/// Es/N0 in dB for unit-power channels at the given OSNR.
pub fn osnr_to_esn0_db(osnr_db: f64, baud: f64) -> f64 {
    osnr_db + 10.0 * (2.0 * OSNR_REFERENCE_BANDWIDTH / baud).log10()
}

/// Inverse of [`osnr_to_esn0_db`].
pub fn esn0_to_osnr_db(esn0_db: f64, baud: f64) -> f64 {
    esn0_db - 10.0 * (2.0 * OSNR_REFERENCE_BANDWIDTH / baud).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseNoiseConfig {
    pub linewidth: f64,
    pub baud: f64,
    pub per_rx_independent: bool,
    pub seed: u64,
}

impl Default for PhaseNoiseConfig {
    fn default() -> Self {
        Self { linewidth: DEFAULT_LINEWIDTH, baud: DEFAULT_BAUD, per_rx_independent: true, seed: 0 }
    }
}

impl PhaseNoiseConfig {
    pub fn increment_variance(&self) -> f64 {
        2.0 * PI * self.linewidth / self.baud
    }
}

/// Wiener phase trajectories, one per receive channel, each starting at a
/// uniformly random LO phase.
pub fn wiener_phase(n_symbols: usize, n_rx: usize, config: &PhaseNoiseConfig) -> Result<Vec<Vec<f64>>> {
    if !(config.linewidth >= 0.0) || !(config.baud > 0.0) {
        return Err(Error::InvalidConfig(format!("bad phase-noise config {config:?}")));
    }
    let sigma = config.increment_variance().sqrt();
    let independent = if config.per_rx_independent { n_rx } else { n_rx.min(1) };
    let mut trajectories: Vec<Vec<f64>> = (0..independent)
        .map(|k| {
            let mut rng = rng_for(sub_seed(config.seed, k as u64), Stream::PhaseNoise);
            let mut phi = rng.random::<f64>() * 2.0 * PI;
            let mut out = Vec::with_capacity(n_symbols);
            for _ in 0..n_symbols {
                out.push(phi);
                if sigma > 0.0 {
                    phi += sigma * normal(&mut rng);
                }
            }
            out
        })
        .collect();
    while trajectories.len() < n_rx {
        trajectories.push(trajectories[0].clone());
    }
    Ok(trajectories)
}

/// Per-path impulse response applied to every transmit channel.
#[derive(Debug, Clone, PartialEq)]
pub struct IsiConfig {
    taps: Vec<Complex64>,
}

impl Default for IsiConfig {
    fn default() -> Self {
        Self { taps: vec![Complex64::new(1.0, 0.0)] }
    }
}

impl IsiConfig {
    /// Normalizes the taps to unit energy. The main tap is the centre one.
    pub fn new(taps: Vec<Complex64>) -> Result<Self> {
        let energy: f64 = taps.iter().map(|t| t.norm_sqr()).sum();
        if taps.len().is_multiple_of(2) || !(energy > 0.0) || !energy.is_finite() {
            return Err(Error::InvalidConfig("ISI taps need odd length and finite nonzero energy".into()));
        }
        let s = energy.sqrt();
        Ok(Self { taps: taps.into_iter().map(|t| t / s).collect() })
    }

    /// The optional `[0.05, 1, 0.05]` profile.
    pub fn three_tap() -> Self {
        Self::new([0.05, 1.0, 0.05].iter().map(|&v| Complex64::new(v, 0.0)).collect()).unwrap()
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn is_memoryless(&self) -> bool {
        self.taps.len() == 1
    }

    /// Cyclic convolution of every column with the taps.
    pub fn apply(&self, s: &Samples) -> Samples {
        if self.is_memoryless() {
            return s.scale(self.taps[0]);
        }
        let len = s.len();
        let centre = self.taps.len() / 2;
        let mut out = Samples::zeros(s.width, len);
        for t in 0..len {
            for (i, g) in self.taps.iter().enumerate() {
                let src = (t + len + centre - i) % len;
                let (row, dst) = (s.row(src), out.row_mut(t));
                for (d, x) in dst.iter_mut().zip(row) {
                    *d += g * x;
                }
            }
        }
        out
    }
}

/// Passes `symbols` (width N_t) through `h` (N_r × N_t) with receive phase
/// trajectories and AWGN of variance `n0` per complex sample.
pub fn propagate(
    symbols: &Samples,
    h: &CMatrix,
    phase: &[Vec<f64>],
    n0: f64,
    noise_seed: u64,
    isi: &IsiConfig,
) -> Result<Samples> {
    let (n_r, n_t) = h.shape();
    if symbols.width != n_t {
        return Err(Error::ShapeMismatch { expected: format!("{n_t} transmit streams"), actual: symbols.width.to_string() });
    }
    let len = symbols.len();
    if phase.len() != n_r || phase.iter().any(|p| p.len() != len) {
        return Err(Error::ShapeMismatch {
            expected: format!("{n_r} phase trajectories of length {len}"),
            actual: format!("{} trajectories", phase.len()),
        });
    }
    if !(n0 >= 0.0) {
        return Err(Error::InvalidConfig(format!("noise variance {n0}")));
    }
    let x = isi.apply(symbols);
    let mut rng = rng_for(noise_seed, Stream::Awgn);
    let h_rows: Vec<Vec<Complex64>> = (0..n_r).map(|k| (0..n_t).map(|l| h[(k, l)]).collect()).collect();
    let mut y = Samples::zeros(n_r, len);
    for t in 0..len {
        let xt = x.row(t);
        let yt = y.row_mut(t);
        for k in 0..n_r {
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, b) in h_rows[k].iter().zip(xt) {
                acc += a * b;
            }
            yt[k] = acc * Complex64::from_polar(1.0, phase[k][t]);
            if n0 > 0.0 {
                yt[k] += complex_normal(&mut rng, n0);
            }
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framing::{qpsk_bits, QPSK};
    use crate::linalg::random_unitary;

    fn random_qpsk(width: usize, len: usize, seed: u64) -> Samples {
        let mut rng = rng_for(seed, Stream::Scratch);
        Samples { width, data: (0..width * len).map(|_| QPSK[rng.random_range(0..4)]).collect() }
    }

    fn still(n_r: usize, len: usize, c: f64) -> Vec<Vec<f64>> {
        vec![vec![c; len]; n_r]
    }

    #[test]
    fn osnr_conversions() {
        assert_eq!(osnr_to_n0(f64::INFINITY, DEFAULT_BAUD, 1.0), 0.0);
        assert!((osnr_to_n0(0.0, 25e9, 1.0) - 1.0).abs() < 1e-15);
        let n0 = osnr_to_n0(12.0, 34.46e9, 1.0);
        let esn0 = -10.0 * n0.log10();
        // 12 + 10 log10(25/34.46): the wider signal bandwidth costs 1.39 dB
        assert!((esn0 - 10.606_247_355_600_278).abs() < 1e-9, "{esn0}");
        assert!((osnr_to_esn0_db(12.0, 34.46e9) - esn0).abs() < 1e-12);
        assert!((esn0_to_osnr_db(esn0, 34.46e9) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn wiener_increment_variance() {
        let trials = 2000;
        let finals: Vec<f64> = (0..trials)
            .map(|i| {
                let cfg = PhaseNoiseConfig { seed: i, ..PhaseNoiseConfig::default() };
                let p = wiener_phase(1001, 1, &cfg).unwrap();
                p[0][1000] - p[0][0]
            })
            .collect();
        let mean = finals.iter().sum::<f64>() / trials as f64;
        let var = finals.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        assert!((var / 1.823e-2 - 1.0).abs() < 0.1, "{var}");
    }

    #[test]
    fn wiener_zero_linewidth_and_independence() {
        let cfg = PhaseNoiseConfig { linewidth: 0.0, seed: 3, ..PhaseNoiseConfig::default() };
        let p = wiener_phase(100, 2, &cfg).unwrap();
        assert!(p.iter().all(|traj| traj.iter().all(|&v| v == traj[0])));

        let cfg = PhaseNoiseConfig { seed: 4, ..PhaseNoiseConfig::default() };
        let p = wiener_phase(100_001, 2, &cfg).unwrap();
        let inc = |k: usize| -> Vec<f64> { p[k].windows(2).map(|w| w[1] - w[0]).collect() };
        let (a, b) = (inc(0), inc(1));
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| u * v).sum::<f64>();
        let rho = dot(&a, &b) / (dot(&a, &a) * dot(&b, &b)).sqrt();
        assert!(rho.abs() < 0.02, "{rho}");

        let shared = PhaseNoiseConfig { per_rx_independent: false, ..cfg };
        let p = wiener_phase(1000, 3, &shared).unwrap();
        assert_eq!(p[0], p[2]);
        assert!(wiener_phase(10, 1, &PhaseNoiseConfig { linewidth: -1.0, ..cfg }).is_err());
    }

    #[test]
    fn identity_and_constant_phase() {
        let s = random_qpsk(4, 500, 1);
        let eye = CMatrix::identity(4, 4);
        let y = propagate(&s, &eye, &still(4, 500, 0.0), 0.0, 0, &IsiConfig::default()).unwrap();
        assert_eq!(y, s);

        let h = random_unitary(5, &mut rng_for(2, Stream::Unitary)).columns(0, 4).into_owned();
        let c = 0.7;
        let y = propagate(&s, &h, &still(5, 500, c), 0.0, 0, &IsiConfig::default()).unwrap();
        let rot = Complex64::from_polar(1.0, c);
        for t in 0..500 {
            let x = nalgebra::DVector::from_column_slice(s.row(t));
            let expect = &h * x * rot;
            for k in 0..5 {
                assert!((y.row(t)[k] - expect[k]).norm() < 1e-12);
            }
        }
        assert!(propagate(&s, &CMatrix::identity(3, 3), &still(3, 500, 0.0), 0.0, 0, &IsiConfig::default()).is_err());
        assert!(propagate(&s, &eye, &still(4, 499, 0.0), 0.0, 0, &IsiConfig::default()).is_err());
    }

    #[test]
    fn linear_and_rotation_covariant() {
        let s = random_qpsk(2, 300, 5);
        let h = random_unitary(3, &mut rng_for(6, Stream::Unitary)).columns(0, 2).into_owned();
        let phase = wiener_phase(300, 3, &PhaseNoiseConfig { seed: 9, ..PhaseNoiseConfig::default() }).unwrap();
        let isi = IsiConfig::three_tap();
        let alpha = Complex64::new(-1.3, 0.4);
        let y1 = propagate(&s, &h, &phase, 0.0, 0, &isi).unwrap();
        let y2 = propagate(&s.scale(alpha), &h, &phase, 0.0, 0, &isi).unwrap();
        for (a, b) in y1.data.iter().zip(&y2.data) {
            assert!((a * alpha - b).norm() < 1e-12);
        }
    }

    #[test]
    fn isi_taps_are_normalized_and_centred() {
        let isi = IsiConfig::three_tap();
        let e: f64 = isi.taps().iter().map(|t| t.norm_sqr()).sum();
        assert!((e - 1.0).abs() < 1e-15);
        let mut s = Samples::zeros(1, 5);
        s.data[2] = Complex64::new(1.0, 0.0);
        let out = isi.apply(&s);
        assert_eq!(out.data[1], isi.taps()[0]);
        assert_eq!(out.data[2], isi.taps()[1]);
        assert_eq!(out.data[3], isi.taps()[2]);
        assert!(IsiConfig::new(vec![Complex64::new(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn noise_variance_matches_n0() {
        let n0 = 0.37;
        let s = Samples::zeros(4, 250_000);
        let y = propagate(&s, &CMatrix::identity(4, 4), &still(4, 250_000, 0.0), n0, 11, &IsiConfig::default()).unwrap();
        assert!((y.mean_power() / n0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn awgn_qpsk_ber() {
        let n0 = 0.1; // Es/N0 = 10 dB
        let len = 500_000;
        let s = random_qpsk(2, len, 12);
        let y = propagate(&s, &CMatrix::identity(2, 2), &still(2, len, 0.0), n0, 13, &IsiConfig::default()).unwrap();
        let errors: usize = s
            .data
            .iter()
            .zip(&y.data)
            .map(|(a, b)| {
                let (x, z) = (qpsk_bits(*a), qpsk_bits(*b));
                (x[0] != z[0]) as usize + (x[1] != z[1]) as usize
            })
            .sum();
        let ber = errors as f64 / (4 * len) as f64;
        let theory = 0.5 * statrs::function::erf::erfc((0.5f64 / n0).sqrt());
        assert!((theory - 7.827e-4).abs() < 1e-6);
        assert!((ber / theory - 1.0).abs() < 0.15, "{ber} vs {theory}");
    }
}
