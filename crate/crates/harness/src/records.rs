//! Detection output records: one row per retained component with its
//! frequency, complex amplitude, integrated amplitude in dB, margin,
//! threshold and noise floor. CSV and JSON renderings share the fields.

use std::io::Write;

use lse_core::pursuit::DetectionReport;
use serde::Serialize;

use crate::Result;

/// One emitted detection.
#[derive(Debug, Clone, Serialize)]
pub struct DetectionRecord {
    /// Caller-chosen run identifier.
    pub run_id: String,
    /// Component index.
    pub k: usize,
    /// Frequency per dimension (rad).
    pub freq_rad: Vec<f64>,
    /// Amplitude, real part.
    pub amplitude_re: f64,
    /// Amplitude, imaginary part.
    pub amplitude_im: f64,
    /// Integrated amplitude 10·log10(N|x̂|²/σ̂²) dB.
    pub amplitude_db: f64,
    /// Detection margin (dB).
    pub delta_db: f64,
    /// Threshold (dB).
    pub threshold_db: f64,
    /// Noise floor estimate (dB).
    pub noise_floor_db: f64,
}

/// Flattens a report into records.
pub fn records_from_report(
    run_id: &str,
    report: &DetectionReport<f64>,
    n_cells: usize,
) -> Vec<DetectionRecord> {
    report
        .components
        .components
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let noise = report.noise_floors.get(k).copied().unwrap_or(f64::NAN);
            let integrated = n_cells as f64 * c.amplitude.norm_sqr() / noise;
            DetectionRecord {
                run_id: run_id.to_string(),
                k,
                freq_rad: c.freq.angles().to_vec(),
                amplitude_re: c.amplitude.re,
                amplitude_im: c.amplitude.im,
                amplitude_db: 10.0 * integrated.log10(),
                delta_db: report.margins.get(k).copied().unwrap_or(f64::NAN),
                threshold_db: 10.0 * report.thresholds.get(k).copied().unwrap_or(f64::NAN).log10(),
                noise_floor_db: 10.0 * noise.log10(),
            }
        })
        .collect()
}

/// CSV header for `ndim` frequency columns.
pub fn csv_header(ndim: usize) -> String {
    let freq_cols: Vec<String> = (1..=ndim).map(|d| format!("freq_rad_{d}")).collect();
    format!(
        "run_id,k,{},amplitude_re,amplitude_im,amplitude_db,delta_db,threshold_db,noise_floor_db",
        freq_cols.join(",")
    )
}

/// Writes records as CSV with a header row.
pub fn write_csv<W: Write>(w: &mut W, records: &[DetectionRecord], ndim: usize) -> Result<()> {
    writeln!(w, "{}", csv_header(ndim))?;
    for r in records {
        let freqs: Vec<String> = r.freq_rad.iter().map(|f| f.to_string()).collect();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.run_id,
            r.k,
            freqs.join(","),
            r.amplitude_re,
            r.amplitude_im,
            r.amplitude_db,
            r.delta_db,
            r.threshold_db,
            r.noise_floor_db
        )?;
    }
    Ok(())
}

/// Writes records as a JSON array.
pub fn write_json<W: Write>(w: &mut W, records: &[DetectionRecord]) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, records)
        .map_err(|e| crate::HarnessError::Config(format!("json encoding: {e}")))?;
    writeln!(w)?;
    Ok(())
}
