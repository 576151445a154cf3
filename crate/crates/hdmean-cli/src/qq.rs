//! QQ-plot data export: pairs sorted empirical p-values with uniform
//! theoretical quantiles (k − 0.5)/R for external plotting.

use hdmean::io::format_f64;
use hdmean::{Error, Result};
use std::fmt::Write as _;

/// (theoretical, empirical) rows, sorted by the empirical p-values.
pub fn qq_rows(p_values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if p_values.is_empty() {
        return Err(Error::config("QQ export needs at least one p-value"));
    }
    for (idx, &p) in p_values.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::config(format!(
                "p-value {idx} is {p}, outside [0, 1]"
            )));
        }
    }
    let mut sorted = p_values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("validated finite values"));
    let count = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(k, p)| ((k as f64 + 0.5) / count, p))
        .collect())
}

pub const QQ_HEADER: &str = "theoretical,empirical";

/// The CSV written by [`qq_export`].
pub fn qq_csv(p_values: &[f64]) -> Result<String> {
    let rows = qq_rows(p_values)?;
    let mut out = String::from(QQ_HEADER);
    out.push('\n');
    for (theoretical, empirical) in rows {
        let _ = writeln!(out, "{},{}", format_f64(theoretical), format_f64(empirical));
    }
    Ok(out)
}

/// Writes QQ-plot data for a p-value sample.
pub fn qq_export(p_values: &[f64], path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let csv = qq_csv(p_values)?;
    std::fs::write(path, csv)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Largest |empirical − theoretical| over the QQ rows — a
/// Kolmogorov–Smirnov-style uniformity distance.
pub fn max_uniform_deviation(p_values: &[f64]) -> Result<f64> {
    Ok(qq_rows(p_values)?
        .into_iter()
        .map(|(t, e)| (e - t).abs())
        .fold(0.0, f64::max))
}
