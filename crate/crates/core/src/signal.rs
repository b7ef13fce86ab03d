//! Time-major blocks of complex samples shared by the channel and DSP stages.

use num_complex::Complex64;

/// `len × width` samples stored time-major: `data[t * width + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub width: usize,
    pub data: Vec<Complex64>,
}

impl Samples {
    pub fn zeros(width: usize, len: usize) -> Self {
        Self { width, data: vec![Complex64::new(0.0, 0.0); width * len] }
    }

    pub fn from_columns(columns: &[Vec<Complex64>]) -> Self {
        let width = columns.len();
        let len = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(width * len);
        for t in 0..len {
            data.extend(columns.iter().map(|c| c[t]));
        }
        Self { width, data }
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.width..(t + 1) * self.width]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [Complex64] {
        &mut self.data[t * self.width..(t + 1) * self.width]
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        self.data.iter().skip(c).step_by(self.width).copied().collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks_exact(self.width.max(1))
    }

    /// Rows `start..end` as a new block.
    pub fn slice(&self, start: usize, end: usize) -> Samples {
        Samples { width: self.width, data: self.data[start * self.width..end * self.width].to_vec() }
    }

    pub fn mean_power(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.data.len() as f64
    }

    /// Multiplies every sample by `s`.
    pub fn scale(&self, s: Complex64) -> Samples {
        Samples { width: self.width, data: self.data.iter().map(|z| z * s).collect() }
    }
}
