//! Training-based channel estimation and pilot-aided phase tracking.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{condition_number, hermitian_inverse, CMatrix};
use crate::signal::Samples;

/// Minimum reciprocal condition number accepted for `S Sᴴ`.
pub const MIN_RCOND: f64 = 1e-10;
/// Pilots whose expected amplitude `|(Ĥ s_p)_k|` is below this are skipped.
pub const PILOT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h_hat: CMatrix,
    /// Mean `|Y − Ĥ S|²` per receive sample.
    pub residual: f64,
}

/// Least-squares `Ĥ = Y Sᴴ (S Sᴴ)⁻¹` from aligned received and known blocks.
pub fn estimate_channel(received: &Samples, known: &Samples) -> Result<ChannelEstimate> {
    let (n_r, n_t, len) = (received.width, known.width, known.len());
    if received.len() != len {
        return Err(Error::Misaligned(format!("{} received vs {len} known symbols", received.len())));
    }
    if len < n_t {
        return Err(Error::RankDeficient { rcond: 0.0, rows: n_t, cols: len });
    }
    // column-major storage of Y (n_r × len) and S (n_t × len) is the transpose of the row data
    let y = CMatrix::from_column_slice(n_r, len, &received.data);
    let s = CMatrix::from_column_slice(n_t, len, &known.data);
    let gram = &s * s.adjoint();
    let rcond = 1.0 / condition_number(&gram);
    if !(rcond >= MIN_RCOND) {
        return Err(Error::RankDeficient { rcond, rows: n_t, cols: len });
    }
    let (inv, _) = hermitian_inverse(&gram, 0.0);
    let h_hat = &y * s.adjoint() * inv;
    let resid = &y - &h_hat * &s;
    let residual = resid.iter().map(|z| z.norm_sqr()).sum::<f64>() / (n_r * len) as f64;
    Ok(ChannelEstimate { h_hat, residual })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseEstimate {
    /// `phase[k][t]`, unwrapped, relative to the reference absorbed in Ĥ.
    pub phase: Vec<Vec<f64>>,
    pub window: usize,
}

/// Estimates each receive channel's phase at the `known` instants from
/// `arg Σ_W y_k · conj((Ĥ s)_k)` over `window` consecutive known instants,
/// then unwraps and interpolates linearly to every instant of `y`.
pub fn estimate_phase(y: &Samples, symbols: &Samples, known: &[usize], h_hat: &CMatrix, window: usize) -> Result<PhaseEstimate> {
    if y.len() != symbols.len() {
        return Err(Error::Misaligned(format!("{} received vs {} transmitted symbols", y.len(), symbols.len())));
    }
    if h_hat.nrows() != y.width || h_hat.ncols() != symbols.width {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} estimate", y.width, symbols.width),
            actual: format!("{}x{}", h_hat.nrows(), h_hat.ncols()),
        });
    }
    if window == 0 {
        return Err(Error::InvalidConfig("phase window must be positive".into()));
    }
    let n_r = y.width;
    let len = y.len();
    if known.is_empty() {
        return Ok(PhaseEstimate { phase: vec![vec![0.0; len]; n_r], window });
    }
    // per-instant correlations
    let mut z = vec![Complex64::new(0.0, 0.0); known.len() * n_r];
    for (i, &t) in known.iter().enumerate() {
        let s = symbols.row(t);
        for k in 0..n_r {
            let mut r = Complex64::new(0.0, 0.0);
            for (l, sl) in s.iter().enumerate() {
                r += h_hat[(k, l)] * sl;
            }
            if r.norm() >= PILOT_FLOOR {
                z[i * n_r + k] = y.row(t)[k] * r.conj();
            }
        }
    }
    let m = known.len();
    let w = window.min(m);
    let mut phase = vec![vec![0.0; len]; n_r];
    for (k, traj) in phase.iter_mut().enumerate() {
        let mut prefix = vec![Complex64::new(0.0, 0.0); m + 1];
        for i in 0..m {
            prefix[i + 1] = prefix[i] + z[i * n_r + k];
        }
        let mut est = Vec::with_capacity(m);
        let mut prev: Option<f64> = None;
        for i in 0..m {
            let lo = i.saturating_sub(w / 2).min(m - w);
            let acc = prefix[lo + w] - prefix[lo];
            let mut phi = if acc.norm() > 0.0 { acc.arg() } else { prev.unwrap_or(0.0) };
            if let Some(p) = prev {
                phi += 2.0 * PI * ((p - phi) / (2.0 * PI)).round();
            }
            est.push(phi);
            prev = Some(phi);
        }
        interpolate(known, &est, traj);
    }
    Ok(PhaseEstimate { phase, window })
}

fn interpolate(at: &[usize], values: &[f64], out: &mut [f64]) {
    let first = at[0];
    let last = *at.last().unwrap();
    let head = first.min(out.len());
    for v in out[..head].iter_mut() {
        *v = values[0];
    }
    for (seg, pair) in at.windows(2).enumerate() {
        let (t0, t1) = (pair[0], pair[1]);
        let (v0, v1) = (values[seg], values[seg + 1]);
        for t in t0..t1 {
            out[t] = v0 + (v1 - v0) * (t - t0) as f64 / (t1 - t0) as f64;
        }
    }
    for v in out[last..].iter_mut() {
        *v = *values.last().unwrap();
    }
}

/// `y[t] = diag(e^{−jφ̂_k[t]}) · y_r[t]`.
pub fn cancel_phase(y: &Samples, estimate: &PhaseEstimate) -> Result<Samples> {
    if estimate.phase.len() != y.width || estimate.phase.iter().any(|p| p.len() != y.len()) {
        return Err(Error::Misaligned("phase estimate does not cover the received block".into()));
    }
    let mut out = y.clone();
    for t in 0..y.len() {
        for (k, v) in out.row_mut(t).iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, -estimate.phase[k][t]);
        }
    }
    Ok(out)
}
