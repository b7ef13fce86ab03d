//! CSV and TOML emitters for runs, sweeps, ensembles and statistics.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::ensemble::EnsembleSummary;
use super::metrics::HistogramBin;
use super::run::{RunReport, SweepPoint};
use crate::error::Result;
use crate::linalg::CMatrix;

fn num(v: f64) -> String {
    format!("{v:e}")
}

/// Per-channel rows: `realization,decoder,channel,ber,evm_pct,sic_rank,outage`.
pub fn write_runs_csv<W: Write>(out: W, reports: &[RunReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["realization", "decoder", "channel", "ber", "evm_pct", "sic_rank", "outage"])?;
    for r in reports {
        for (name, d) in [("mmse", &r.mmse), ("sic", &r.sic)] {
            let Some(d) = d else { continue };
            for c in 0..d.ber.len() {
                w.write_record(&[
                    r.realization.to_string(),
                    name.to_string(),
                    c.to_string(),
                    num(d.ber[c]),
                    num(d.evm_pct[c]),
                    d.rank_of(c).map_or(String::new(), |k| k.to_string()),
                    d.outage.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram_csv<W: Write>(out: W, summary: &EnsembleSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["decoder", "ber_lo", "ber_hi", "count"])?;
    for (name, d) in [("mmse", &summary.mmse), ("sic", &summary.sic)] {
        if let Some(d) = d {
            write_bins(&mut w, name, &d.histogram)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_bins<W: Write>(w: &mut csv::Writer<W>, label: &str, bins: &[HistogramBin]) -> Result<()> {
    for b in bins {
        w.write_record(&[label.to_string(), num(b.lo), num(b.hi), b.count.to_string()])?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(out: W, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["osnr_db", "esn0_db", "decoder", "avg_ber", "min_ber", "max_ber", "errors", "bits", "theory_ber"])?;
    for p in points {
        for (name, s) in [("mmse", &p.mmse), ("sic", &p.sic)] {
            if let Some(s) = s {
                w.write_record(&[
                    num(p.osnr_db),
                    num(p.esn0_db),
                    name.to_string(),
                    num(s.avg),
                    num(s.min),
                    num(s.max),
                    s.errors.to_string(),
                    s.bits.to_string(),
                    num(p.theory_ber),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Matrix dump: `row,col,re,im`.
pub fn write_matrix_csv<W: Write>(out: W, m: &CMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "col", "re", "im"])?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            w.write_record(&[r.to_string(), c.to_string(), num(m[(r, c)].re), num(m[(r, c)].im)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, toml::to_string_pretty(value)?)?;
    Ok(())
}
