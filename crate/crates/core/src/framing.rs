//! Pilot-aided DP-QPSK frames: balanced training sequence, one pilot per
//! nine data symbols, PRBS-15 payload, and per-mode decorrelation delays.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::Write;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{mix64, rng_for, Stream};
use crate::signal::Samples;

pub const PRBS15_PERIOD: usize = 32_767;

/// Gray-mapped QPSK points indexed by the two-bit label `b0·2 + b1`.
pub const QPSK: [Complex64; 4] = [
    Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),   // 00
    Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),  // 01
    Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),  // 10
    Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2), // 11
];

/// PRBS-15 generator, polynomial x¹⁵ + x¹⁴ + 1.
#[derive(Debug, Clone)]
pub struct Prbs15 {
    state: u16,
}

impl Prbs15 {
    pub fn new(state: u16) -> Result<Self> {
        if state == 0 || state > 0x7fff {
            return Err(Error::BadPrbsState(state));
        }
        Ok(Self { state })
    }
}

impl Iterator for Prbs15 {
    type Item = u8;

    fn next(&mut self) -> Option<u8> {
        let bit = ((self.state >> 14) ^ (self.state >> 13)) & 1;
        self.state = ((self.state << 1) | bit) & 0x7fff;
        Some(bit as u8)
    }
}

pub fn prbs15(state: u16, n: usize) -> Result<Vec<u8>> {
    Ok(Prbs15::new(state)?.take(n).collect())
}

/// Maps bit pairs `(b0, b1)` to Gray QPSK: `b1` sets the sign of the real
/// part and `b0` the sign of the imaginary part.
pub fn qpsk_map(bits: &[u8]) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!("odd bit count {}", bits.len())));
    }
    Ok(bits.chunks_exact(2).map(|p| QPSK[((p[0] & 1) * 2 + (p[1] & 1)) as usize]).collect())
}

/// Inverse of [`qpsk_map`] for alphabet points (sign decisions).
pub fn qpsk_bits(s: Complex64) -> [u8; 2] {
    [(s.im < 0.0) as u8, (s.re < 0.0) as u8]
}

fn balanced_qpsk(seed: u64, stream: Stream, len: usize) -> Vec<Complex64> {
    let mut symbols: Vec<Complex64> = (0..len).map(|i| QPSK[i % 4]).collect();
    symbols.shuffle(&mut rng_for(seed, stream));
    symbols
}

/// Seeded permutation of `ts_len/4` copies of each QPSK symbol.
pub fn build_training(ts_seed: u64, ts_len: usize) -> Result<Vec<Complex64>> {
    if !ts_len.is_multiple_of(4) {
        return Err(Error::InvalidConfig(format!("training length {ts_len} is not a multiple of 4")));
    }
    Ok(balanced_qpsk(ts_seed, Stream::TrainingSequence, ts_len))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameLayout {
    pub frame_len: usize,
    pub ts_len: usize,
    /// One pilot followed by `pilot_period - 1` data symbols.
    pub pilot_period: usize,
    pub ts_seed: u64,
    pub pilot_seed: u64,
    pub data_seed: u64,
}

impl Default for FrameLayout {
    fn default() -> Self {
        Self { frame_len: 20_000, ts_len: 1680, pilot_period: 10, ts_seed: 1, pilot_seed: 2, data_seed: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    Training,
    Pilot,
    Data,
}

impl SymbolKind {
    pub fn is_known(self) -> bool {
        !matches!(self, SymbolKind::Data)
    }

    pub fn code(self) -> char {
        match self {
            SymbolKind::Training => 'T',
            SymbolKind::Pilot => 'P',
            SymbolKind::Data => 'D',
        }
    }
}

impl FrameLayout {
    pub fn validate(&self) -> Result<()> {
        let ok = self.pilot_period >= 2
            && self.ts_len < self.frame_len
            && (self.frame_len - self.ts_len).is_multiple_of(self.pilot_period)
            && self.ts_len.is_multiple_of(6)
            && self.ts_len.is_multiple_of(4);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("inconsistent frame layout {self:?}")))
        }
    }

    pub fn kind_at(&self, pos: usize) -> SymbolKind {
        let pos = pos % self.frame_len;
        if pos < self.ts_len {
            SymbolKind::Training
        } else if (pos - self.ts_len).is_multiple_of(self.pilot_period) {
            SymbolKind::Pilot
        } else {
            SymbolKind::Data
        }
    }

    pub fn pilots_per_frame(&self) -> usize {
        (self.frame_len - self.ts_len) / self.pilot_period
    }

    pub fn data_per_frame(&self) -> usize {
        self.frame_len - self.ts_len - self.pilots_per_frame()
    }

    /// Delay granularity between adjacent modes (`ts_len / 6`).
    pub fn delay_step(&self) -> usize {
        self.ts_len / 6
    }
}

/// Which tributary a channel carries and how far its copy is delayed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelPlan {
    pub delay: usize,
    /// Transponder tributary (0 = X, 1 = Y); selects the TS/pilot/data seeds.
    pub tributary: usize,
}

impl ChannelPlan {
    /// X and Y channels for `n_modes` modes, mode `m` delayed by `m·step`
    /// (mod `frame_len`).
    pub fn mode_pairs(n_modes: usize, step: usize, frame_len: usize) -> Vec<ChannelPlan> {
        (0..n_modes)
            .flat_map(|m| (0..2).map(move |p| ChannelPlan { delay: (m * step) % frame_len, tributary: p }))
            .collect()
    }
}

/// One tributary before delay: symbols, kinds, data bits, PRBS bit offsets.
#[derive(Debug, Clone)]
struct Tributary {
    symbols: Vec<Complex64>,
    kinds: Vec<SymbolKind>,
    bits: Vec<[u8; 2]>,
    prbs_index: Vec<u32>,
}

fn tributary_seed(seed: u64, tributary: usize) -> u64 {
    mix64(seed ^ (tributary as u64).wrapping_mul(0x9E37_79B9))
}

fn build_tributary(layout: &FrameLayout, tributary: usize, n_frames: usize) -> Result<Tributary> {
    let ts = build_training(tributary_seed(layout.ts_seed, tributary), layout.ts_len)?;
    let pilots = balanced_qpsk(tributary_seed(layout.pilot_seed, tributary), Stream::Pilots, layout.pilots_per_frame());
    let state = (tributary_seed(layout.data_seed, tributary) % PRBS15_PERIOD as u64) as u16 + 1;
    let mut prbs = Prbs15::new(state)?;
    let total = n_frames * layout.frame_len;
    let mut out = Tributary {
        symbols: Vec::with_capacity(total),
        kinds: Vec::with_capacity(total),
        bits: Vec::with_capacity(total),
        prbs_index: Vec::with_capacity(total),
    };
    let mut next_bit = 0u32;
    for t in 0..total {
        let pos = t % layout.frame_len;
        let kind = layout.kind_at(pos);
        let (sym, bits, idx) = match kind {
            SymbolKind::Training => (ts[pos], [0, 0], u32::MAX),
            SymbolKind::Pilot => (pilots[(pos - layout.ts_len) / layout.pilot_period], [0, 0], u32::MAX),
            SymbolKind::Data => {
                let b = [prbs.next().unwrap(), prbs.next().unwrap()];
                let idx = next_bit;
                next_bit += 2;
                (QPSK[(b[0] * 2 + b[1]) as usize], b, idx)
            }
        };
        out.symbols.push(sym);
        out.kinds.push(kind);
        out.bits.push(bits);
        out.prbs_index.push(idx);
    }
    Ok(out)
}

/// Transmitted multi-channel signal with its bookkeeping, time-major.
#[derive(Debug, Clone)]
pub struct Frame {
    pub layout: FrameLayout,
    pub plans: Vec<ChannelPlan>,
    pub n_frames: usize,
    pub symbols: Samples,
    pub kinds: Vec<SymbolKind>,
    pub bits: Vec<[u8; 2]>,
    /// Position of each data symbol's first bit in its tributary's PRBS
    /// stream (`u32::MAX` for TS and pilots).
    pub prbs_index: Vec<u32>,
}

/// Builds every channel as a cyclically delayed copy of its tributary.
pub fn assemble_frames(layout: &FrameLayout, plans: &[ChannelPlan], n_frames: usize) -> Result<Frame> {
    layout.validate()?;
    if n_frames == 0 || plans.is_empty() {
        return Err(Error::InvalidConfig("need at least one frame and one channel".into()));
    }
    for (i, a) in plans.iter().enumerate() {
        if a.delay >= layout.frame_len {
            return Err(Error::InvalidConfig(format!("delay {} >= frame length", a.delay)));
        }
        if let Some(j) = plans[..i].iter().position(|b| b == a) {
            return Err(Error::DuplicateChannel(j, i));
        }
    }
    let n_trib = plans.iter().map(|p| p.tributary).max().unwrap() + 1;
    let tributaries = (0..n_trib).map(|k| build_tributary(layout, k, n_frames)).collect::<Result<Vec<_>>>()?;
    let total = n_frames * layout.frame_len;
    let width = plans.len();
    let mut symbols = Samples::zeros(width, total);
    let mut kinds = Vec::with_capacity(width * total);
    let mut bits = Vec::with_capacity(width * total);
    let mut prbs_index = Vec::with_capacity(width * total);
    for t in 0..total {
        let row = symbols.row_mut(t);
        for (c, plan) in plans.iter().enumerate() {
            let src = &tributaries[plan.tributary];
            let s = (t + total - plan.delay) % total;
            row[c] = src.symbols[s];
            kinds.push(src.kinds[s]);
            bits.push(src.bits[s]);
            prbs_index.push(src.prbs_index[s]);
        }
    }
    Ok(Frame { layout: *layout, plans: plans.to_vec(), n_frames, symbols, kinds, bits, prbs_index })
}

impl Frame {
    pub fn n_channels(&self) -> usize {
        self.plans.len()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn kind(&self, t: usize, c: usize) -> SymbolKind {
        self.kinds[t * self.n_channels() + c]
    }

    pub fn bits_at(&self, t: usize, c: usize) -> [u8; 2] {
        self.bits[t * self.n_channels() + c]
    }

    /// True where every channel carries a known (TS or pilot) symbol.
    pub fn all_known(&self, t: usize) -> bool {
        let n = self.n_channels();
        self.kinds[t * n..(t + 1) * n].iter().all(|k| k.is_known())
    }

    /// True where every channel is inside its training sequence.
    pub fn all_training(&self, t: usize) -> bool {
        let n = self.n_channels();
        self.kinds[t * n..(t + 1) * n].iter().all(|k| *k == SymbolKind::Training)
    }

    pub fn data_count(&self) -> usize {
        self.kinds.iter().filter(|k| **k == SymbolKind::Data).count()
    }

    /// CSV dump: `channel,index,re,im,mask`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["channel", "index", "re", "im", "mask"])?;
        for c in 0..self.n_channels() {
            for t in 0..self.len() {
                let s = self.symbols.row(t)[c];
                w.write_record(&[
                    c.to_string(),
                    t.to_string(),
                    format!("{:.17e}", s.re),
                    format!("{:.17e}", s.im),
                    self.kind(t, c).code().to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
