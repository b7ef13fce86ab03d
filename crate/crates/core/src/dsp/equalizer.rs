//! Symbol-spaced N_r×N_r LMS FIR bank trained only at known instants
//! against the reference `Ĥ s`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::signal::Samples;

pub const DEFAULT_TAPS: usize = 7;
pub const DEFAULT_STEP: f64 = 1e-3;
/// Output-to-input power ratio that aborts equalization.
pub const DIVERGENCE_RATIO: f64 = 10.0;
const GUARD_BLOCK: usize = 1000;

#[derive(Debug, Clone)]
pub struct Equalizer {
    n: usize,
    taps: usize,
    step: f64,
    /// `w[(k * n + j) * taps + i]`: tap `i` from input `j` to output `k`.
    w: Vec<Complex64>,
}

impl Equalizer {
    pub fn new(n: usize, taps: usize, step: f64) -> Result<Self> {
        if taps.is_multiple_of(2) || !(step > 0.0) || n == 0 {
            return Err(Error::InvalidConfig(format!("equalizer needs odd taps and positive step, got {taps}, {step}")));
        }
        let mut w = vec![Complex64::new(0.0, 0.0); n * n * taps];
        for k in 0..n {
            w[(k * n + k) * taps + taps / 2] = Complex64::new(1.0, 0.0);
        }
        Ok(Self { n, taps, step, w })
    }

    pub fn tap(&self, out: usize, input: usize, i: usize) -> Complex64 {
        self.w[(out * self.n + input) * self.taps + i]
    }

    fn input(y: &Samples, t: isize, j: usize) -> Complex64 {
        if t < 0 || t as usize >= y.len() {
            Complex64::new(0.0, 0.0)
        } else {
            y.row(t as usize)[j]
        }
    }

    fn output(&self, y: &Samples, t: usize, out: &mut [Complex64]) {
        let c = (self.taps / 2) as isize;
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..self.n {
                let base = (k * self.n + j) * self.taps;
                for i in 0..self.taps {
                    acc += self.w[base + i] * Self::input(y, t as isize + c - i as isize, j);
                }
            }
            *o = acc;
        }
    }

    /// Filters `y`, adapting at instants where `reference` returns a target.
    pub fn run<F>(&mut self, y: &Samples, mut reference: F) -> Result<Samples>
    where
        F: FnMut(usize, &mut [Complex64]) -> bool,
    {
        if y.width != self.n {
            return Err(Error::ShapeMismatch { expected: format!("{} streams", self.n), actual: y.width.to_string() });
        }
        let c = (self.taps / 2) as isize;
        let mut out = Samples::zeros(self.n, y.len());
        let mut target = vec![Complex64::new(0.0, 0.0); self.n];
        let (mut p_in, mut p_out) = (0.0, 0.0);
        for t in 0..y.len() {
            let row = out.row_mut(t);
            self.output(y, t, row);
            p_in += y.row(t).iter().map(|z| z.norm_sqr()).sum::<f64>();
            p_out += row.iter().map(|z| z.norm_sqr()).sum::<f64>();
            if reference(t, &mut target) {
                for k in 0..self.n {
                    let e = (target[k] - row[k]) * self.step;
                    for j in 0..self.n {
                        let base = (k * self.n + j) * self.taps;
                        for i in 0..self.taps {
                            self.w[base + i] += e * Self::input(y, t as isize + c - i as isize, j).conj();
                        }
                    }
                }
            }
            if (t + 1) % GUARD_BLOCK == 0 || t + 1 == y.len() {
                if !p_out.is_finite() || p_out > DIVERGENCE_RATIO * p_in.max(f64::MIN_POSITIVE) {
                    return Err(Error::Diverged { at: t, output: p_out, input: p_in });
                }
                p_in = 0.0;
                p_out = 0.0;
            }
        }
        Ok(out)
    }
}

/// Fresh equalizer trained at `known` instants against `Ĥ s(t)`.
pub fn equalize(y: &Samples, h_hat: &CMatrix, symbols: &Samples, known: &[usize], taps: usize, step: f64) -> Result<Samples> {
    let mut eq = Equalizer::new(y.width, taps, step)?;
    let mut is_known = vec![false; y.len()];
    for &t in known {
        is_known[t] = true;
    }
    eq.run(y, |t, target| {
        if !is_known[t] {
            return false;
        }
        reference_at(h_hat, symbols.row(t), target);
        true
    })
}

/// `target = Ĥ s`.
pub fn reference_at(h_hat: &CMatrix, s: &[Complex64], target: &mut [Complex64]) {
    for (k, v) in target.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (l, sl) in s.iter().enumerate() {
            acc += h_hat[(k, l)] * sl;
        }
        *v = acc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{propagate, IsiConfig};
    use crate::framing::QPSK;
    use crate::rng::{complex_normal, rng_for, Stream};
    use rand::Rng;

    fn qpsk(width: usize, len: usize, seed: u64) -> Samples {
        let mut rng = rng_for(seed, Stream::Scratch);
        Samples { width, data: (0..width * len).map(|_| QPSK[rng.random_range(0..4)]).collect() }
    }

    #[test]
    fn memoryless_noiseless_stays_identity() {
        let mut rng = rng_for(1, Stream::Unitary);
        let h = CMatrix::from_fn(4, 3, |_, _| complex_normal(&mut rng, 0.3));
        let s = qpsk(3, 5000, 2);
        let y = propagate(&s, &h, &vec![vec![0.0; 5000]; 4], 0.0, 0, &IsiConfig::default()).unwrap();
        let known: Vec<usize> = (0..5000).step_by(10).collect();
        let out = equalize(&y, &h, &s, &known, 7, 1e-3).unwrap();
        for (a, b) in out.data.iter().zip(&y.data).skip(4 * 1000) {
            assert!((a - b).norm() < 1e-3);
        }
    }

    #[test]
    fn reduces_isi() {
        // Es/N0 = 15 dB; three-tap ISI on a 2x2 channel
        let len = 40_000;
        let n0 = 10f64.powf(-1.5);
        let mut rng = rng_for(3, Stream::Unitary);
        let h = crate::linalg::random_unitary(2, &mut rng);
        let s = qpsk(2, len, 4);
        let isi = IsiConfig::new([0.3, 1.0, 0.3].iter().map(|&v| Complex64::new(v, 0.0)).collect()).unwrap();
        let y = propagate(&s, &h, &vec![vec![0.0; len]; 2], n0, 5, &isi).unwrap();
        let h_hat = &h * Complex64::new(isi.taps()[1].re, 0.0);
        let known: Vec<usize> = (0..len).step_by(10).collect();
        let eq = equalize(&y, &h_hat, &s, &known, 7, 1e-2).unwrap();
        let evm = |z: &Samples| -> f64 {
            let mut e = 0.0;
            let mut target = vec![Complex64::new(0.0, 0.0); 2];
            for t in len / 2..len {
                reference_at(&h_hat, s.row(t), &mut target);
                e += z.row(t).iter().zip(&target).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
            }
            e.sqrt()
        };
        let (before, after) = (evm(&y), evm(&eq));
        assert!(after < 0.7 * before, "{before} -> {after}");
    }

    #[test]
    fn divergence_is_caught() {
        let s = qpsk(2, 3000, 6);
        let h = CMatrix::identity(2, 2) * Complex64::new(10.0, 0.0);
        let known: Vec<usize> = (0..3000).collect();
        let r = equalize(&s, &h, &s, &known, 3, 1.5);
        assert!(matches!(r, Err(Error::Diverged { .. })));
        assert!(Equalizer::new(2, 4, 1e-3).is_err());
        assert!(Equalizer::new(2, 3, 0.0).is_err());
    }
}
