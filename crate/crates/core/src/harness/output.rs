//! CSV and JSON output.
//!
//! The CSV starts with a version line, then a fixed header. Floats carry 12
//! significant digits and absent values are empty fields.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

use super::runner::RoundRecord;

pub const CSV_VERSION: &str = "olkm_v1";

pub const CSV_COLUMNS: &[&str] = &[
    "t",
    "n_points",
    "d_t",
    "opt_t",
    "opt_exact",
    "cost_fractional",
    "cost_det",
    "cost_rand",
    "ratio_fractional",
    "ratio_det",
    "ratio_rand",
    "cumulative_ratio_fractional",
    "cumulative_ratio_det",
    "cumulative_ratio_rand",
    "cumulative_ratio_benchmark",
    "cumulative_dynamic_benchmark",
    "reduced_cost_fractional",
    "reduced_cost_benchmark",
    "det_size",
    "rand_size",
    "det_threshold",
    "rand_threshold",
    "G_t",
    "eta_t",
    "mass_by_region",
];

/// `x` with 12 significant digits, in plain notation for moderate exponents. NaN marks
/// a column that does not apply and prints as an empty field.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return String::new();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt_f(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn opt_u(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn csv_row(r: &RoundRecord) -> Vec<String> {
    let mass = r
        .mass_by_region
        .iter()
        .map(|&m| format_float(m))
        .collect::<Vec<_>>()
        .join(";");
    [
        r.t.to_string(),
        r.n_points.to_string(),
        r.d_t.to_string(),
        format_float(r.opt_t),
        r.opt_exact.to_string(),
        format_float(r.cost_fractional),
        opt_f(r.cost_det),
        opt_f(r.cost_rand),
        format_float(r.ratio_fractional),
        opt_f(r.ratio_det),
        opt_f(r.ratio_rand),
        format_float(r.cumulative_ratio_fractional),
        opt_f(r.cumulative_ratio_det),
        opt_f(r.cumulative_ratio_rand),
        opt_f(r.cumulative_ratio_benchmark),
        opt_f(r.cumulative_dynamic_benchmark),
        format_float(r.reduced_cost_fractional),
        opt_f(r.reduced_cost_benchmark),
        opt_u(r.det_size),
        opt_u(r.rand_size),
        opt_f(r.det_threshold),
        opt_f(r.rand_threshold),
        format_float(r.g_t),
        format_float(r.eta_t),
        mass,
    ]
    .into()
}

pub fn write_csv<'a>(out: impl Write, records: impl IntoIterator<Item = &'a RoundRecord>) -> Result<()> {
    // the version line has a single field
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record([CSV_VERSION])?;
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.write_record(csv_row(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes pretty JSON to `path`, creating parent directories.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

/// Writes the CSV to `csv_path` and the summary to `summary.json` next to it.
pub fn write_run<'a>(
    csv_path: &Path,
    records: impl IntoIterator<Item = &'a RoundRecord>,
    summary: &impl Serialize,
) -> Result<std::path::PathBuf> {
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let f = std::io::BufWriter::new(std::fs::File::create(csv_path)?);
    write_csv(f, records)?;
    let summary_path = csv_path.with_file_name("summary.json");
    write_json(&summary_path, summary)?;
    Ok(summary_path)
}
