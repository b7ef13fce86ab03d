//! Von Kármán phase screens by power-spectrum inversion with subharmonic
//! augmentation.
//!
//! A screen is the real part of a Fourier series whose coefficients are
//! complex circular Gaussian draws shaped by the von Kármán spectrum. The
//! level-0 series lives on the FFT grid (spacing `1/L`); each subharmonic
//! level `p` adds a 3×3 set of frequencies at spacing `1/(3^p L)` that the
//! FFT grid cannot represent, restoring tilt and other large-scale power.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rng::{complex_normal, rng_for, sub_seed, Stream};

/// Amplitude applied on top of the raw coefficients during synthesis.
///
/// The coefficient formula carries `(2/r0)^(5/6)` for unit-variance complex
/// draws. Keeping only the real part of the series halves the variance and the
/// Fried-diameter Kolmogorov spectrum `0.023 r0^(-5/3) f^(-11/3)` has no factor
/// `2^(5/3)`, so the combined correction is `√2 · 2^(-5/6) = 2^(-1/3)`.
pub const SYNTHESIS_GAIN: f64 = 0.793_700_525_984_099_7;

/// Kolmogorov structure-function constant.
pub const KOLMOGOROV_D_COEFF: f64 = 6.88;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreenConfig {
    /// Pixels per side.
    pub grid_size: usize,
    /// Side length of the raster in metres (L).
    pub physical_length: f64,
    /// Fried parameter r0 in metres.
    pub fried: f64,
    /// Outer scale L0 in metres.
    pub outer_scale: f64,
    /// Inner scale l0 in metres.
    pub inner_scale: f64,
    /// Number of subharmonic levels N_p.
    pub subharmonic_levels: usize,
    pub seed: u64,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        Self {
            grid_size: 960,
            physical_length: 8.832e-3,
            fried: 0.8e-3,
            outer_scale: 10.0,
            inner_scale: 1e-4,
            subharmonic_levels: 3,
            seed: 0,
        }
    }
}

impl ScreenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 2 || !self.grid_size.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "grid_size must be even and >= 2, got {}",
                self.grid_size
            )));
        }
        let ok = self.inner_scale > 0.0
            && self.inner_scale < self.physical_length
            && self.physical_length < self.outer_scale;
        if !ok || !self.outer_scale.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "need 0 < l0 ({}) < L ({}) < L0 ({})",
                self.inner_scale, self.physical_length, self.outer_scale
            )));
        }
        if !(self.fried > 0.0 && self.fried.is_finite()) {
            return Err(Error::InvalidConfig(format!("fried must be > 0, got {}", self.fried)));
        }
        Ok(())
    }

    pub fn pitch(&self) -> f64 {
        self.physical_length / self.grid_size as f64
    }

    /// Same configuration at another seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Side length of the period of subharmonic level `level` (`3^p L`).
    fn level_length(&self, level: usize) -> f64 {
        self.physical_length * 3f64.powi(level as i32)
    }

    /// Raw von Kármán coefficient amplitude for a unit draw at frequency
    /// `(fx, fy)` on a grid of cell width `1/level_length`.
    pub fn coefficient_amplitude(&self, fx: f64, fy: f64, level_length: f64) -> f64 {
        let f2 = fx * fx + fy * fy;
        let inner = 2.0 * PI * self.inner_scale / 5.92;
        0.023f64.sqrt() / level_length
            * (2.0 / self.fried).powf(5.0 / 6.0)
            * (f2 + 1.0 / (self.outer_scale * self.outer_scale)).powf(-11.0 / 12.0)
            * (-f2 * inner * inner).exp().sqrt()
    }
}

/// Signed frequency index of array position `i` on a grid of `size` cells
/// (FFT order: `0, 1, …, ⌈size/2⌉-1, -⌊size/2⌋, …, -1`).
pub fn frequency_index(i: usize, size: usize) -> i64 {
    if i < size.div_ceil(2) {
        i as i64
    } else {
        i as i64 - size as i64
    }
}

/// Fourier coefficients for one level, row-major with rows indexing `f_y`
/// and columns `f_x`, both in [`frequency_index`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientGrid {
    pub level: usize,
    pub size: usize,
    /// Frequency spacing in cycles per metre.
    pub spacing: f64,
    pub coeffs: Vec<Complex64>,
}

impl CoefficientGrid {
    pub fn at(&self, n: i64, m: i64) -> Complex64 {
        let idx = |k: i64| if k >= 0 { k as usize } else { (k + self.size as i64) as usize };
        self.coeffs[idx(m) * self.size + idx(n)]
    }
}

/// Shapes the unit complex Gaussian `draws` into the coefficient grid of
/// `level` (level 0 is the `grid_size²` FFT grid, levels ≥ 1 are 3×3).
/// The zero-frequency coefficient is always zero.
pub fn vonkarman_coefficients(
    config: &ScreenConfig,
    level: usize,
    draws: &[Complex64],
) -> Result<CoefficientGrid> {
    config.validate()?;
    if level > config.subharmonic_levels {
        return Err(Error::LevelOutOfRange { level, max: config.subharmonic_levels });
    }
    let size = if level == 0 { config.grid_size } else { 3 };
    if draws.len() != size * size {
        return Err(Error::ShapeMismatch {
            expected: format!("{size}x{size} draws"),
            actual: format!("{} draws", draws.len()),
        });
    }
    if let Some(bad) = draws.iter().position(|w| !(w.re.is_finite() && w.im.is_finite())) {
        return Err(Error::NonFiniteDraw(bad));
    }
    let length = config.level_length(level);
    let spacing = 1.0 / length;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); size * size];
    for row in 0..size {
        let m = frequency_index(row, size);
        for col in 0..size {
            let n = frequency_index(col, size);
            if n == 0 && m == 0 {
                continue;
            }
            let amp = config.coefficient_amplitude(n as f64 * spacing, m as f64 * spacing, length);
            coeffs[row * size + col] = draws[row * size + col] * amp;
        }
    }
    Ok(CoefficientGrid { level, size, spacing, coeffs })
}

/// The random draws behind one screen: `grid_size²` for level 0 followed by
/// nine per subharmonic level.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenDraws {
    pub base: Vec<Complex64>,
    pub subharmonics: Vec<Vec<Complex64>>,
}

impl ScreenDraws {
    pub fn sample(config: &ScreenConfig) -> Self {
        let mut rng = rng_for(config.seed, Stream::Screen);
        let n2 = config.grid_size * config.grid_size;
        let base = (0..n2).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let subharmonics = (0..config.subharmonic_levels)
            .map(|_| (0..9).map(|_| complex_normal(&mut rng, 1.0)).collect())
            .collect();
        Self { base, subharmonics }
    }

    pub fn zeros(config: &ScreenConfig) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            base: vec![z; config.grid_size * config.grid_size],
            subharmonics: vec![vec![z; 9]; config.subharmonic_levels],
        }
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            base: self.base.iter().map(|w| w * t).collect(),
            subharmonics: self.subharmonics.iter().map(|l| l.iter().map(|w| w * t).collect()).collect(),
        }
    }
}

/// Square raster of turbulence phase in radians, row-major (`y` rows, `x` columns).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseScreen {
    pub grid_size: usize,
    /// Metres per pixel.
    pub pitch: f64,
    pub raster: Vec<f64>,
}

impl PhaseScreen {
    pub fn blank(grid_size: usize, pitch: f64) -> Self {
        Self { grid_size, pitch, raster: vec![0.0; grid_size * grid_size] }
    }

    /// Builds a raster from `f(x, y)` evaluated at pixel-centre coordinates in metres.
    pub fn from_fn(grid_size: usize, pitch: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let coords = pixel_centres(grid_size, pitch);
        let mut raster = Vec::with_capacity(grid_size * grid_size);
        for &y in &coords {
            for &x in &coords {
                raster.push(f(x, y));
            }
        }
        Self { grid_size, pitch, raster }
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.raster[iy * self.grid_size + ix]
    }

    pub fn physical_length(&self) -> f64 {
        self.pitch * self.grid_size as f64
    }

    pub fn mean(&self) -> f64 {
        self.raster.iter().sum::<f64>() / self.raster.len() as f64
    }

    pub fn remove_piston(&mut self) {
        let mean = self.mean();
        self.raster.iter_mut().for_each(|v| *v -= mean);
    }

    /// Square sub-raster starting at pixel `(x0, y0)`, piston removed.
    pub fn window(&self, x0: usize, y0: usize, size: usize) -> PhaseScreen {
        let mut raster = Vec::with_capacity(size * size);
        for iy in y0..y0 + size {
            raster.extend_from_slice(&self.raster[iy * self.grid_size + x0..iy * self.grid_size + x0 + size]);
        }
        let mut out = PhaseScreen { grid_size: size, pitch: self.pitch, raster };
        out.remove_piston();
        out
    }
}

/// Pixel-centre coordinates spanning `[-L/2, L/2)`.
pub fn pixel_centres(grid_size: usize, pitch: f64) -> Vec<f64> {
    let half = 0.5 * grid_size as f64 * pitch;
    (0..grid_size).map(|i| -half + (i as f64 + 0.5) * pitch).collect()
}

fn inverse_fft_2d(data: &mut [Complex64], n: usize) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(n);
    fft.process(data);
    transpose_square(data, n);
    fft.process(data);
    transpose_square(data, n);
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in r + 1..n {
            data.swap(r * n + c, c * n + r);
        }
    }
}

/// Evaluates the screen series for the given draws: level-0 FFT synthesis plus
/// every subharmonic level, real part, piston removed.
pub fn synthesize(config: &ScreenConfig, draws: &ScreenDraws) -> Result<PhaseScreen> {
    config.validate()?;
    let n = config.grid_size;
    let pitch = config.pitch();
    let base = vonkarman_coefficients(config, 0, &draws.base)?;

    // exp(j2π n x_i / L) = exp(j2π n i / N) · exp(jπ n (1/N - 1)) on pixel centres
    let offset = PI * (1.0 / n as f64 - 1.0);
    let mut spectrum = base.coeffs;
    for row in 0..n {
        let m = frequency_index(row, n) as f64;
        for col in 0..n {
            let k = frequency_index(col, n) as f64;
            spectrum[row * n + col] *= Complex64::from_polar(SYNTHESIS_GAIN, offset * (k + m));
        }
    }
    inverse_fft_2d(&mut spectrum, n);
    let mut raster: Vec<f64> = spectrum.iter().map(|z| z.re).collect();
    drop(spectrum);

    let coords = pixel_centres(n, pitch);
    for (i, level_draws) in draws.subharmonics.iter().enumerate().take(config.subharmonic_levels) {
        let grid = vonkarman_coefficients(config, i + 1, level_draws)?;
        add_subharmonics(&mut raster, &coords, &grid);
    }

    let mut screen = PhaseScreen { grid_size: n, pitch, raster };
    screen.remove_piston();
    Ok(screen)
}

fn add_subharmonics(raster: &mut [f64], coords: &[f64], grid: &CoefficientGrid) {
    let n = coords.len();
    let tone = |freq: f64| -> Vec<Complex64> {
        coords.iter().map(|&x| Complex64::from_polar(1.0, 2.0 * PI * freq * x)).collect()
    };
    for m in -1..=1i64 {
        let ey = tone(m as f64 * grid.spacing);
        for k in -1..=1i64 {
            if k == 0 && m == 0 {
                continue;
            }
            let c = grid.at(k, m) * SYNTHESIS_GAIN;
            let ex = tone(k as f64 * grid.spacing);
            for (iy, &wy) in ey.iter().enumerate() {
                let cy = c * wy;
                let row = &mut raster[iy * n..(iy + 1) * n];
                for (v, &wx) in row.iter_mut().zip(&ex) {
                    *v += cy.re * wx.re - cy.im * wx.im;
                }
            }
        }
    }
}

/// Draws and synthesizes one screen from `config.seed`.
pub fn generate_screen(config: &ScreenConfig) -> Result<PhaseScreen> {
    config.validate()?;
    synthesize(config, &ScreenDraws::sample(config))
}

/// `count` independent screens; element `i` uses seed `sub_seed(config.seed, i)`.
pub fn batch_generate(config: &ScreenConfig, count: usize) -> Result<Vec<PhaseScreen>> {
    if count == 0 {
        return Err(Error::InvalidConfig("batch count must be >= 1".into()));
    }
    config.validate()?;
    par::try_map_indices(count, |i| generate_screen(&config.with_seed(sub_seed(config.seed, i as u64))))
}

/// Kolmogorov phase structure function `6.88 (r/r0)^(5/3)`.
pub fn kolmogorov_structure(r: f64, fried: f64) -> f64 {
    KOLMOGOROV_D_COEFF * (r / fried).powf(5.0 / 3.0)
}

/// Exact ensemble expectation of the measured structure function for this
/// synthesis (finite FFT grid plus the configured subharmonic levels), at
/// separations along one axis.
pub fn expected_structure_function(config: &ScreenConfig, separations: &[f64]) -> Result<Vec<f64>> {
    config.validate()?;
    let gain2 = SYNTHESIS_GAIN * SYNTHESIS_GAIN;
    let mut terms: Vec<(f64, f64)> = Vec::new();
    for level in 0..=config.subharmonic_levels {
        let size = if level == 0 { config.grid_size } else { 3 };
        let length = config.level_length(level);
        let spacing = 1.0 / length;
        for row in 0..size {
            let fy = frequency_index(row, size) as f64 * spacing;
            for col in 0..size {
                let fx = frequency_index(col, size) as f64 * spacing;
                if fx == 0.0 && fy == 0.0 {
                    continue;
                }
                terms.push((fx, gain2 * config.coefficient_amplitude(fx, fy, length).powi(2)));
            }
        }
    }
    Ok(separations
        .iter()
        .map(|&r| terms.iter().map(|&(fx, var)| var * (1.0 - (2.0 * PI * fx * r).cos())).sum())
        .collect())
}

/// Ensemble phase structure function: mean of `[φ(x+r) − φ(x)]²` over screens,
/// both axes and every non-wrapping position. Returns `(r, D(r))` pairs.
pub fn structure_function(screens: &[PhaseScreen], separations: &[f64]) -> Result<Vec<(f64, f64)>> {
    let first = screens
        .first()
        .ok_or_else(|| Error::InvalidConfig("structure function needs at least one screen".into()))?;
    let (n, pitch) = (first.grid_size, first.pitch);
    if let Some(s) = screens.iter().find(|s| s.grid_size != n || s.pitch != pitch) {
        return Err(Error::ShapeMismatch {
            expected: format!("{n}x{n} @ {pitch}"),
            actual: format!("{}x{} @ {}", s.grid_size, s.grid_size, s.pitch),
        });
    }
    let mut lags = Vec::with_capacity(separations.len());
    for &r in separations {
        let k = (r / pitch).round();
        let ok = k >= 1.0 && (r / pitch - k).abs() <= 1e-6 * k && r < 0.5 * n as f64 * pitch;
        if !ok {
            return Err(Error::BadSeparation(r));
        }
        lags.push(k as usize);
    }
    let per_screen = par::map_slice(screens, |s| lags.iter().map(|&k| squared_increment_mean(s, k)).collect::<Vec<_>>());
    Ok(average_increments(separations, &per_screen))
}

/// Same as [`structure_function`] over the batch `batch_generate(config, count)`,
/// without holding more than one screen per worker in memory.
pub fn batch_structure_function(config: &ScreenConfig, count: usize, separations: &[f64]) -> Result<Vec<(f64, f64)>> {
    if count == 0 {
        return Err(Error::InvalidConfig("batch count must be >= 1".into()));
    }
    config.validate()?;
    let per_screen = par::try_map_indices(count, |i| {
        let screen = generate_screen(&config.with_seed(sub_seed(config.seed, i as u64)))?;
        Ok::<_, Error>(structure_function(std::slice::from_ref(&screen), separations)?.into_iter().map(|(_, d)| d).collect::<Vec<_>>())
    })?;
    Ok(average_increments(separations, &per_screen))
}

fn average_increments(separations: &[f64], per_screen: &[Vec<f64>]) -> Vec<(f64, f64)> {
    separations
        .iter()
        .enumerate()
        .map(|(j, &r)| (r, per_screen.iter().map(|v| v[j]).sum::<f64>() / per_screen.len() as f64))
        .collect()
}

fn squared_increment_mean(s: &PhaseScreen, lag: usize) -> f64 {
    let n = s.grid_size;
    let mut sum_x = 0.0;
    let mut sum_y = 0.0;
    for iy in 0..n {
        let row = &s.raster[iy * n..(iy + 1) * n];
        sum_x += row.windows(lag + 1).map(|w| (w[lag] - w[0]).powi(2)).sum::<f64>();
        if iy + lag < n {
            let next = &s.raster[(iy + lag) * n..(iy + lag + 1) * n];
            sum_y += row.iter().zip(next).map(|(a, b)| (b - a).powi(2)).sum::<f64>();
        }
    }
    let count = (n * (n - lag)) as f64;
    0.5 * (sum_x / count + sum_y / count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streaming_structure_function_matches_batch() {
        let cfg = ScreenConfig { seed: 5, ..small() };
        let seps = [cfg.pitch(), 4.0 * cfg.pitch()];
        let a = structure_function(&batch_generate(&cfg, 6).unwrap(), &seps).unwrap();
        let b = batch_structure_function(&cfg, 6, &seps).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.1 - y.1).abs() < 1e-12 * x.1);
        }
    }

    #[test]
    fn expected_structure_function_matches_oracle() {
        // Independent numpy evaluation of the same finite-grid sum.
        let cfg = ScreenConfig::default();
        let p = cfg.pitch();
        let seps = [5.0 * p, 40.0 * p, 192.0 * p];
        let got = expected_structure_function(&cfg, &seps).unwrap();
        for (g, want) in got.iter().zip([4.3590154949e-02, 1.5748749090e+00, 1.8938798596e+01]) {
            assert!((g / want - 1.0).abs() < 1e-8, "{g} vs {want}");
        }
        let bare = ScreenConfig { subharmonic_levels: 0, ..cfg };
        let got = expected_structure_function(&bare, &seps).unwrap();
        for (g, want) in got.iter().zip([3.7245599657e-02, 1.1689497200e+00, 9.6511074651e+00]) {
            assert!((g / want - 1.0).abs() < 1e-8, "{g} vs {want}");
        }
    }

    #[test]
    fn ensemble_tracks_expected_structure_function() {
        let cfg = ScreenConfig { grid_size: 240, seed: 17, ..ScreenConfig::default() };
        let p = cfg.pitch();
        let seps = [2.0 * p, 10.0 * p, 48.0 * p];
        let expected = expected_structure_function(&cfg, &seps).unwrap();
        for (e, want) in expected.iter().zip([1.0340554330e-01, 1.5748243085e+00, 1.8938746638e+01]) {
            assert!((e / want - 1.0).abs() < 1e-8);
        }
        let measured = batch_structure_function(&cfg, 64, &seps).unwrap();
        for ((_, m), e) in measured.iter().zip(&expected) {
            assert!((m / e - 1.0).abs() < 0.15, "{m} vs {e}");
        }
    }

    fn small() -> ScreenConfig {
        ScreenConfig { grid_size: 64, physical_length: 64.0 * 9.2e-6, ..ScreenConfig::default() }
    }

    /// Straight transcription of the coefficient formula, kept apart from
    /// `coefficient_amplitude` on purpose.
    fn scalar_coefficient(n: f64, m: f64, l: f64, r0: f64, outer: f64, inner: f64, w: f64) -> f64 {
        let fx = n / l;
        let fy = m / l;
        let s = fx * fx + fy * fy;
        w * (0.023f64).sqrt() / l
            * (2.0 / r0).powf(5.0 / 6.0)
            * (s + 1.0 / (outer * outer)).powf(-11.0 / 12.0)
            * ((-s * (2.0 * PI * inner / 5.92).powi(2)).exp()).powf(0.5)
    }

    #[test]
    fn synthesis_gain_constant() {
        assert!((SYNTHESIS_GAIN - 2f64.powf(-1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_draws_give_zero_coefficients() {
        let cfg = small();
        let z = vec![Complex64::new(0.0, 0.0); 64 * 64];
        let grid = vonkarman_coefficients(&cfg, 0, &z).unwrap();
        assert!(grid.coeffs.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn halving_fried_scales_by_power_law() {
        let cfg = small();
        let draws = ScreenDraws::sample(&cfg).base;
        let a = vonkarman_coefficients(&cfg, 0, &draws).unwrap();
        let half = ScreenConfig { fried: cfg.fried / 2.0, ..cfg };
        let b = vonkarman_coefficients(&half, 0, &draws).unwrap();
        let want = 2f64.powf(5.0 / 6.0);
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            if x.norm() > 0.0 {
                assert!((y.norm() / x.norm() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_coefficient_matches_scalar_formula() {
        let cfg = ScreenConfig { fried: 0.8e-3, ..ScreenConfig::default() };
        let n = cfg.grid_size;
        let mut draws = vec![Complex64::new(0.0, 0.0); n * n];
        draws[1] = Complex64::new(1.0, 0.0); // row m=0, column n=1
        let grid = vonkarman_coefficients(&cfg, 0, &draws).unwrap();
        let want = scalar_coefficient(1.0, 0.0, 8.832e-3, 0.8e-3, 10.0, 1e-4, 1.0);
        // frozen from the scalar calculator above
        assert!((want - 1.999_085_980_042_767).abs() / want < 1e-9, "{want}");
        assert!((grid.at(1, 0).re - want).abs() < 1e-12 * want);
        assert_eq!(grid.at(1, 0).im, 0.0);
    }

    #[test]
    fn subharmonic_level_uses_finer_grid() {
        let cfg = small();
        let draws = vec![Complex64::new(1.0, 0.0); 9];
        let g = vonkarman_coefficients(&cfg, 2, &draws).unwrap();
        let l2 = cfg.physical_length * 9.0;
        assert!((g.spacing - 1.0 / l2).abs() < 1e-9);
        assert_eq!(g.at(0, 0).norm(), 0.0);
        let want = scalar_coefficient(-1.0, 1.0, l2, cfg.fried, 10.0, 1e-4, 1.0);
        assert!((g.at(-1, 1).re - want).abs() < 1e-12 * want);
    }

    #[test]
    fn coefficient_errors() {
        let cfg = small();
        let mut d = vec![Complex64::new(0.0, 0.0); 9];
        assert!(matches!(vonkarman_coefficients(&cfg, 4, &d), Err(Error::LevelOutOfRange { .. })));
        d[3] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(vonkarman_coefficients(&cfg, 1, &d), Err(Error::NonFiniteDraw(3))));
    }

    #[test]
    fn config_validation() {
        assert!(ScreenConfig::default().validate().is_ok());
        assert!(ScreenConfig { grid_size: 63, ..small() }.validate().is_err());
        assert!(ScreenConfig { fried: 0.0, ..small() }.validate().is_err());
        assert!(ScreenConfig { inner_scale: 1.0, ..small() }.validate().is_err());
        assert!(ScreenConfig { outer_scale: 1e-4, ..small() }.validate().is_err());
    }

    #[test]
    fn deterministic_and_piston_free() {
        let cfg = small();
        let a = generate_screen(&cfg).unwrap();
        let b = generate_screen(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.mean().abs() < 1e-9);
        assert!(a.raster.iter().all(|v| v.is_finite()));
        assert!((a.pitch - 9.2e-6).abs() < 1e-15);
    }

    #[test]
    fn zero_draws_give_zero_screen() {
        let cfg = small();
        let s = synthesize(&cfg, &ScreenDraws::zeros(&cfg)).unwrap();
        assert!(s.raster.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn synthesis_is_linear_in_draws() {
        let cfg = small();
        let d = ScreenDraws::sample(&cfg);
        let a = synthesize(&cfg, &d).unwrap();
        let b = synthesize(&cfg, &d.scaled(-2.5)).unwrap();
        for (x, y) in a.raster.iter().zip(&b.raster) {
            assert!((y + 2.5 * x).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn fft_synthesis_matches_direct_series() {
        // direct evaluation of the level-0 series on an 8x8 grid
        let cfg = ScreenConfig { grid_size: 8, physical_length: 8e-3, subharmonic_levels: 0, ..ScreenConfig::default() };
        let d = ScreenDraws::sample(&cfg);
        let s = synthesize(&cfg, &d).unwrap();
        let grid = vonkarman_coefficients(&cfg, 0, &d.base).unwrap();
        let xs = pixel_centres(8, cfg.pitch());
        let mut direct = vec![0.0; 64];
        for (iy, &y) in xs.iter().enumerate() {
            for (ix, &x) in xs.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in -4..4i64 {
                    for n in -4..4i64 {
                        let ph = 2.0 * PI * (n as f64 * x + m as f64 * y) / cfg.physical_length;
                        acc += grid.at(n, m) * Complex64::from_polar(1.0, ph);
                    }
                }
                direct[iy * 8 + ix] = SYNTHESIS_GAIN * acc.re;
            }
        }
        let mean = direct.iter().sum::<f64>() / 64.0;
        for (a, b) in s.raster.iter().zip(&direct) {
            assert!((a - (b - mean)).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn batch_elements_match_sub_seeds() {
        let cfg = ScreenConfig { seed: 7, ..small() };
        let batch = batch_generate(&cfg, 5).unwrap();
        for (i, s) in batch.iter().enumerate() {
            assert_eq!(*s, generate_screen(&cfg.with_seed(sub_seed(7, i as u64))).unwrap());
        }
        for i in 0..5 {
            for j in i + 1..5 {
                assert_ne!(batch[i].raster, batch[j].raster);
            }
        }
        assert!(batch_generate(&cfg, 0).is_err());
    }

    #[test]
    fn structure_function_of_zero_and_tilt() {
        let z = PhaseScreen::blank(32, 1e-5);
        let sf = structure_function(&[z], &[1e-5, 5e-5]).unwrap();
        assert!(sf.iter().all(|&(_, d)| d == 0.0));

        // tilt along x only: mean over both axes is a²r²/2
        let a = 300.0;
        let tilt = PhaseScreen::from_fn(32, 1e-5, |x, _| a * x);
        let r = 4e-5;
        let sf = structure_function(std::slice::from_ref(&tilt), &[r]).unwrap();
        assert!((sf[0].1 - 0.5 * a * a * r * r).abs() < 1e-12);
        assert!((squared_increment_mean(&tilt, 4) * 2.0 - a * a * r * r).abs() < 1e-12);
    }

    #[test]
    fn structure_function_rejects_bad_separations() {
        let z = PhaseScreen::blank(32, 1e-5);
        assert!(structure_function(std::slice::from_ref(&z), &[1.5e-5]).is_err());
        assert!(structure_function(std::slice::from_ref(&z), &[16e-5]).is_err());
        assert!(structure_function(&[], &[1e-5]).is_err());
    }
}
