//! CSV and JSON writers for densities, traces and CLT samples.

use std::io::Write;

use serde::Serialize;

use crate::clt::{normal_pdf, CltResult};
use crate::error::Result;
use crate::transfer::{InvariantDensity, UlamOperator};

/// Version of every JSON document written by this crate.
pub const SCHEMA_VERSION: u32 = 1;

/// Wraps a report with a top-level `"schema"` field.
#[derive(Clone, Debug, Serialize)]
pub struct Versioned<T> {
    pub schema: u32,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Versioned<T> {
    pub fn new(body: T) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            body,
        }
    }
}

pub fn write_json<T: Serialize, W: Write>(mut out: W, body: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, &Versioned::new(body))?;
    writeln!(out)?;
    Ok(())
}

/// `bin_center,value`, one row per bin.
pub fn write_density_csv<W: Write>(
    mut out: W,
    op: &UlamOperator,
    density: &InvariantDensity,
) -> Result<()> {
    writeln!(out, "bin_center,value")?;
    for (i, v) in density.values.iter().enumerate() {
        writeln!(out, "{},{}", op.bin_center(i), v)?;
    }
    Ok(())
}

/// `index,value` for standardized Birkhoff sums.
pub fn write_samples_csv<W: Write>(mut out: W, samples: &[f64]) -> Result<()> {
    writeln!(out, "index,value")?;
    for (i, v) in samples.iter().enumerate() {
        writeln!(out, "{i},{v}")?;
    }
    Ok(())
}

/// Histogram row of standardized samples against the normal density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HistogramRow {
    pub bin_center: f64,
    pub empirical_density: f64,
    pub normal_density: f64,
}

/// Histogram of `samples` on `bins` equal cells of `[-range, range]`.
/// Samples outside the range are counted in the total but not binned.
pub fn histogram(samples: &[f64], bins: usize, range: f64) -> Vec<HistogramRow> {
    let width = 2.0 * range / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in samples {
        let k = ((x + range) / width).floor();
        if k >= 0.0 && (k as usize) < bins {
            counts[k as usize] += 1;
        }
    }
    let n = samples.len().max(1) as f64;
    counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let center = -range + (k as f64 + 0.5) * width;
            HistogramRow {
                bin_center: center,
                empirical_density: c as f64 / (n * width),
                normal_density: normal_pdf(center),
            }
        })
        .collect()
}

/// `bin_center,empirical_density,normal_density`.
pub fn write_histogram_csv<W: Write>(mut out: W, rows: &[HistogramRow]) -> Result<()> {
    writeln!(out, "bin_center,empirical_density,normal_density")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{}",
            r.bin_center, r.empirical_density, r.normal_density
        )?;
    }
    Ok(())
}

/// Plot data for a CLT run: 60 cells on `[-4, 4]`.
pub fn clt_histogram(result: &CltResult) -> Vec<HistogramRow> {
    histogram(&result.standardized, 60, 4.0)
}
