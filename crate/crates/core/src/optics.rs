//! Free-space mode fields and the thin-screen modal coupling model.
//!
//! Transmit and receive modes are the free-space images of the photonic
//! lantern's LP modes, written as Laguerre–Gaussian superpositions. A phase
//! screen couples them through `M_kl = ⟨ψ_k^rx | A·e^{jφ} | ψ_l^tx⟩`, with `A`
//! the hard circular receive aperture.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::screens::{pixel_centres, PhaseScreen};

/// Maximum fraction of a mode's energy allowed outside the raster.
pub const CLIP_TOLERANCE: f64 = 0.01;

pub const DEFAULT_WAIST: f64 = 2.1e-3;
pub const DEFAULT_APERTURE: f64 = 8.4e-3;

/// Lantern mode labels in the transmitter's channel order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LpMode {
    #[serde(rename = "LP01")]
    Lp01,
    #[serde(rename = "LP11a")]
    Lp11a,
    #[serde(rename = "LP11b")]
    Lp11b,
    #[serde(rename = "LP21a")]
    Lp21a,
    #[serde(rename = "LP21b")]
    Lp21b,
    #[serde(rename = "LP02")]
    Lp02,
}

impl LpMode {
    pub const ALL: [LpMode; 6] = [LpMode::Lp01, LpMode::Lp11a, LpMode::Lp11b, LpMode::Lp21a, LpMode::Lp21b, LpMode::Lp02];

    pub fn label(self) -> &'static str {
        match self {
            LpMode::Lp01 => "LP01",
            LpMode::Lp11a => "LP11a",
            LpMode::Lp11b => "LP11b",
            LpMode::Lp21a => "LP21a",
            LpMode::Lp21b => "LP21b",
            LpMode::Lp02 => "LP02",
        }
    }

    /// The first `n` modes in order of increasing mode group.
    pub fn lowest(n: usize) -> Vec<LpMode> {
        Self::ALL.iter().copied().take(n).collect()
    }

    /// LG content of the mode: `(p, ℓ, weight)` terms.
    pub fn composition(self) -> Vec<LgTerm> {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let even = |l: i32| {
            vec![
                LgTerm { p: 0, l, weight: c(FRAC_1_SQRT_2, 0.0) },
                LgTerm { p: 0, l: -l, weight: c(FRAC_1_SQRT_2, 0.0) },
            ]
        };
        // (LG_l − LG_−l)/(j√2)
        let odd = |l: i32| {
            vec![
                LgTerm { p: 0, l, weight: c(0.0, -FRAC_1_SQRT_2) },
                LgTerm { p: 0, l: -l, weight: c(0.0, FRAC_1_SQRT_2) },
            ]
        };
        match self {
            LpMode::Lp01 => vec![LgTerm { p: 0, l: 0, weight: c(1.0, 0.0) }],
            LpMode::Lp11a => even(1),
            LpMode::Lp11b => odd(1),
            LpMode::Lp21a => even(2),
            LpMode::Lp21b => odd(2),
            LpMode::Lp02 => vec![LgTerm { p: 1, l: 0, weight: c(1.0, 0.0) }],
        }
    }
}

impl fmt::Display for LpMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LgTerm {
    /// Radial index.
    pub p: u32,
    /// Azimuthal index.
    pub l: i32,
    pub weight: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpec {
    pub label: String,
    pub composition: Vec<LgTerm>,
    /// Beam waist w0 in metres.
    pub waist: f64,
}

impl ModeSpec {
    pub fn lp(mode: LpMode, waist: f64) -> Self {
        Self { label: mode.label().to_string(), composition: mode.composition(), waist }
    }

    /// A pure LG_{p,ℓ} mode.
    pub fn lg(p: u32, l: i32, waist: f64) -> Self {
        Self {
            label: format!("LG{p},{l}"),
            composition: vec![LgTerm { p, l, weight: Complex64::new(1.0, 0.0) }],
            waist,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.waist > 0.0) {
            return Err(Error::InvalidConfig(format!("mode {} has waist {}", self.label, self.waist)));
        }
        let total: f64 = self.composition.iter().map(|t| t.weight.norm_sqr()).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("mode {} weights have energy {total}", self.label)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApertureConfig {
    /// Receive lens diameter D in metres.
    pub diameter: f64,
}

impl Default for ApertureConfig {
    fn default() -> Self {
        Self { diameter: DEFAULT_APERTURE }
    }
}

/// Square sampling geometry shared by screens and mode fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterGrid {
    pub size: usize,
    pub pitch: f64,
}

impl RasterGrid {
    pub fn of(screen: &PhaseScreen) -> Self {
        Self { size: screen.grid_size, pitch: screen.pitch }
    }

    pub fn physical_length(&self) -> f64 {
        self.size as f64 * self.pitch
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexRaster {
    pub grid: RasterGrid,
    pub data: Vec<Complex64>,
}

/// Generalised Laguerre polynomial `L_p^a(u)` by the three-term recurrence.
pub fn laguerre(p: u32, a: f64, u: f64) -> f64 {
    let mut prev = 1.0;
    if p == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - u;
    for k in 1..p {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + a - u) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Continuum-normalised LG_{p,ℓ} at polar coordinates `(r, θ)`.
pub fn lg_value(p: u32, l: i32, waist: f64, r: f64, theta: f64) -> Complex64 {
    let a = l.unsigned_abs();
    let norm = (2.0 * factorial(p) / (PI * factorial(p + a))).sqrt() / waist;
    let u = 2.0 * r * r / (waist * waist);
    let radial = norm * u.sqrt().powi(a as i32) * laguerre(p, a as f64, u) * (-0.5 * u).exp();
    Complex64::from_polar(radial, l as f64 * theta)
}

/// Samples `spec` at pixel centres and renormalises so `Σ|ψ|²·pitch² = 1`.
pub fn mode_field(spec: &ModeSpec, grid: RasterGrid) -> Result<ComplexRaster> {
    spec.validate()?;
    let coords = pixel_centres(grid.size, grid.pitch);
    let mut data = Vec::with_capacity(grid.size * grid.size);
    for &y in &coords {
        for &x in &coords {
            let (r, theta) = (x.hypot(y), y.atan2(x));
            let v = spec
                .composition
                .iter()
                .map(|t| t.weight * lg_value(t.p, t.l, spec.waist, r, theta))
                .sum::<Complex64>();
            data.push(v);
        }
    }
    let area = grid.pitch * grid.pitch;
    let energy: f64 = data.iter().map(|z| z.norm_sqr()).sum::<f64>() * area;
    let lost = 1.0 - energy;
    if lost > CLIP_TOLERANCE {
        return Err(Error::Clipping { label: spec.label.clone(), lost_fraction: lost });
    }
    let scale = 1.0 / energy.sqrt();
    data.iter_mut().for_each(|z| *z *= scale);
    Ok(ComplexRaster { grid, data })
}

/// Discrete inner product `Σ conj(a)·b·pitch²`.
pub fn overlap(a: &ComplexRaster, b: &ComplexRaster) -> Result<Complex64> {
    if a.grid != b.grid || a.data.len() != b.data.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", a.grid),
            actual: format!("{:?}", b.grid),
        });
    }
    let sum: Complex64 = a.data.iter().zip(&b.data).map(|(x, y)| x.conj() * y).sum();
    Ok(sum * a.grid.pitch * a.grid.pitch)
}

/// Transmit and receive fields restricted to the pixels inside the aperture.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub grid: RasterGrid,
    pub tx_labels: Vec<String>,
    pub rx_labels: Vec<String>,
    support: Vec<usize>,
    /// `tx[l][i]` is transmit mode `l` at support pixel `i`; likewise `rx_conj` (conjugated).
    tx: Vec<Vec<Complex64>>,
    rx_conj: Vec<Vec<Complex64>>,
}

impl ModeBasis {
    pub fn new(grid: RasterGrid, tx: &[ModeSpec], rx: &[ModeSpec], aperture: ApertureConfig) -> Result<Self> {
        if !(aperture.diameter > 0.0) || aperture.diameter > grid.physical_length() * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "aperture diameter {} must be in (0, {}]",
                aperture.diameter,
                grid.physical_length()
            )));
        }
        let coords = pixel_centres(grid.size, grid.pitch);
        let radius2 = 0.25 * aperture.diameter * aperture.diameter;
        let support: Vec<usize> = (0..grid.size * grid.size)
            .filter(|&i| {
                let (x, y) = (coords[i % grid.size], coords[i / grid.size]);
                x * x + y * y <= radius2
            })
            .collect();
        let restrict = |spec: &ModeSpec, conj: bool| -> Result<Vec<Complex64>> {
            let f = mode_field(spec, grid)?;
            Ok(support.iter().map(|&i| if conj { f.data[i].conj() } else { f.data[i] }).collect())
        };
        Ok(Self {
            grid,
            tx_labels: tx.iter().map(|s| s.label.clone()).collect(),
            rx_labels: rx.iter().map(|s| s.label.clone()).collect(),
            tx: tx.iter().map(|s| restrict(s, false)).collect::<Result<_>>()?,
            rx_conj: rx.iter().map(|s| restrict(s, true)).collect::<Result<_>>()?,
            support,
        })
    }

    pub fn n_tx(&self) -> usize {
        self.tx.len()
    }

    pub fn n_rx(&self) -> usize {
        self.rx_conj.len()
    }

    /// Spatial coupling matrix (`n_rx × n_tx`) through `screen`.
    pub fn coupling(&self, screen: &PhaseScreen) -> Result<CMatrix> {
        if RasterGrid::of(screen) != self.grid {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.grid),
                actual: format!("{:?}", RasterGrid::of(screen)),
            });
        }
        let (nt, nr) = (self.n_tx(), self.n_rx());
        let mut acc = vec![Complex64::new(0.0, 0.0); nt * nr];
        let mut field = vec![Complex64::new(0.0, 0.0); nt];
        for (i, &pix) in self.support.iter().enumerate() {
            let (s, c) = screen.raster[pix].sin_cos();
            let rot = Complex64::new(c, s);
            for (l, f) in field.iter_mut().enumerate() {
                *f = rot * self.tx[l][i];
            }
            for k in 0..nr {
                let r = self.rx_conj[k][i];
                let row = &mut acc[k * nt..(k + 1) * nt];
                for (a, f) in row.iter_mut().zip(&field) {
                    *a += r * f;
                }
            }
        }
        let area = self.grid.pitch * self.grid.pitch;
        Ok(CMatrix::from_fn(nr, nt, |k, l| acc[k * nt + l] * area))
    }
}

/// `M_kl = overlap(ψ_k^rx, A·e^{jφ}·ψ_l^tx)` for one screen.
pub fn spatial_coupling_matrix(
    screen: &PhaseScreen,
    tx: &[ModeSpec],
    rx: &[ModeSpec],
    aperture: ApertureConfig,
) -> Result<CMatrix> {
    ModeBasis::new(RasterGrid::of(screen), tx, rx, aperture)?.coupling(screen)
}

/// `M ⊗ I₂`: spatial mode `s` on polarization `p` becomes channel `2s + p`.
pub fn polarization_expand(m: &CMatrix) -> CMatrix {
    let mut h = CMatrix::zeros(2 * m.nrows(), 2 * m.ncols());
    for k in 0..m.nrows() {
        for l in 0..m.ncols() {
            h[(2 * k, 2 * l)] = m[(k, l)];
            h[(2 * k + 1, 2 * l + 1)] = m[(k, l)];
        }
    }
    h
}

/// Per-column scales that bring every blank-screen column to `target` norm.
pub fn calibrate_columns(h_blank: &CMatrix, target: f64) -> Result<Vec<f64>> {
    (0..h_blank.ncols())
        .map(|l| {
            let norm = h_blank.column(l).norm();
            if norm == 0.0 {
                Err(Error::ZeroColumn(l))
            } else {
                Ok(target / norm)
            }
        })
        .collect()
}

/// Polarization-expanded, statically calibrated MIMO channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub h: CMatrix,
    pub n_r: usize,
    pub n_t: usize,
    pub calibration: Vec<f64>,
}

impl ChannelMatrix {
    pub fn new(h: CMatrix, calibration: Vec<f64>) -> Result<Self> {
        if calibration.len() != h.ncols() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} column scales", h.ncols()),
                actual: format!("{}", calibration.len()),
            });
        }
        let mut h = h;
        for (l, s) in calibration.iter().enumerate() {
            h.column_mut(l).scale_mut(*s);
        }
        Ok(Self { n_r: h.nrows(), n_t: h.ncols(), h, calibration })
    }

    pub fn uncalibrated(h: CMatrix) -> Self {
        let n = h.ncols();
        Self { n_r: h.nrows(), n_t: n, h, calibration: vec![1.0; n] }
    }

    /// Mean received power per transmit channel, `‖H‖_F² / N_t`.
    pub fn received_power(&self) -> f64 {
        self.h.norm_squared() / self.n_t as f64
    }
}

/// Mode basis plus the blank-screen calibration, built once per experiment.
#[derive(Debug, Clone)]
pub struct OpticalLink {
    pub basis: ModeBasis,
    pub calibration: Vec<f64>,
}

impl OpticalLink {
    pub fn new(grid: RasterGrid, tx: &[ModeSpec], rx: &[ModeSpec], aperture: ApertureConfig) -> Result<Self> {
        let basis = ModeBasis::new(grid, tx, rx, aperture)?;
        let blank = PhaseScreen::blank(grid.size, grid.pitch);
        let h_blank = polarization_expand(&basis.coupling(&blank)?);
        let calibration = calibrate_columns(&h_blank, 1.0)?;
        Ok(Self { basis, calibration })
    }

    /// Calibrated spatial coupling matrix (no polarization expansion).
    pub fn spatial(&self, screen: &PhaseScreen) -> Result<CMatrix> {
        let mut m = self.basis.coupling(screen)?;
        for l in 0..m.ncols() {
            m.column_mut(l).scale_mut(self.calibration[2 * l]);
        }
        Ok(m)
    }

    pub fn channel(&self, screen: &PhaseScreen) -> Result<ChannelMatrix> {
        ChannelMatrix::new(polarization_expand(&self.basis.coupling(screen)?), self.calibration.clone())
    }

    /// Intensity proxy for scintillation: `‖M_cal‖_F² / N_t,spatial`.
    pub fn received_power(&self, screen: &PhaseScreen) -> Result<f64> {
        Ok(self.spatial(screen)?.norm_squared() / self.basis.n_tx() as f64)
    }
}
