//! `PHSCRN01` binary screen files and their TOML sidecar.
//!
//! Layout (little-endian): 8-byte ASCII magic `PHSCRN01`, `u32` grid size,
//! `f64` pitch, `f64` r0, `f64` L0, `f64` l0, `u64` seed, then `grid_size²`
//! `f64` phases in row-major order.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::screens::{PhaseScreen, ScreenConfig};

pub const MAGIC: &[u8; 8] = b"PHSCRN01";
pub const HEADER_LEN: usize = 8 + 4 + 8 * 4 + 8;

/// Header fields stored alongside the raster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenHeader {
    pub grid_size: u32,
    pub pitch: f64,
    pub fried: f64,
    pub outer_scale: f64,
    pub inner_scale: f64,
    pub seed: u64,
}

impl ScreenHeader {
    pub fn new(config: &ScreenConfig, screen: &PhaseScreen) -> Self {
        Self {
            grid_size: screen.grid_size as u32,
            pitch: screen.pitch,
            fried: config.fried,
            outer_scale: config.outer_scale,
            inner_scale: config.inner_scale,
            seed: config.seed,
        }
    }
}

pub fn encode(header: &ScreenHeader, screen: &PhaseScreen) -> Result<Vec<u8>> {
    if header.grid_size as usize != screen.grid_size || screen.raster.len() != screen.grid_size * screen.grid_size {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0} raster", header.grid_size),
            actual: format!("{} values", screen.raster.len()),
        });
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * screen.raster.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&header.grid_size.to_le_bytes());
    for v in [header.pitch, header.fried, header.outer_scale, header.inner_scale] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&header.seed.to_le_bytes());
    for v in &screen.raster {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(ScreenHeader, PhaseScreen)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::BadScreenFile(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::BadScreenFile("magic mismatch".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let header = ScreenHeader {
        grid_size: u32_at(8),
        pitch: f64_at(12),
        fried: f64_at(20),
        outer_scale: f64_at(28),
        inner_scale: f64_at(36),
        seed: u64_at(44),
    };
    let n = header.grid_size as usize;
    let expected = HEADER_LEN + 8 * n * n;
    if bytes.len() != expected {
        return Err(Error::BadScreenFile(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let raster = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((header, PhaseScreen { grid_size: n, pitch: header.pitch, raster }))
}

pub fn write(path: &Path, header: &ScreenHeader, screen: &PhaseScreen) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(header, screen)?)?;
    Ok(())
}

pub fn read(path: &Path) -> Result<(ScreenHeader, PhaseScreen)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

/// Contents of `screens.toml` written next to a batch of screen files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSidecar {
    pub config: ScreenConfig,
    pub count: usize,
    pub files: Vec<String>,
    pub sub_seeds: Vec<u64>,
}

/// Writes `screen_NNNN.phscrn` files plus `screens.toml` into `dir`.
pub fn write_batch(dir: &Path, config: &ScreenConfig, screens: &[PhaseScreen]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(screens.len());
    let mut seeds = Vec::with_capacity(screens.len());
    let mut paths = Vec::with_capacity(screens.len());
    for (i, screen) in screens.iter().enumerate() {
        let seed = crate::rng::sub_seed(config.seed, i as u64);
        let name = format!("screen_{i:04}.phscrn");
        let path = dir.join(&name);
        write(&path, &ScreenHeader::new(&config.with_seed(seed), screen), screen)?;
        files.push(name);
        seeds.push(seed);
        paths.push(path);
    }
    let sidecar = BatchSidecar { config: config.clone(), count: screens.len(), files, sub_seeds: seeds };
    fs::write(dir.join("screens.toml"), toml::to_string_pretty(&sidecar)?)?;
    Ok(paths)
}
