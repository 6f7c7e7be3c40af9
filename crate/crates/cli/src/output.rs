//! CSV/JSON emission with write-then-rename semantics.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use speedlimit_core::bounds::{ReportRow, SpeedLimitReport};

pub const REPORT_COLUMNS: [&str; 17] = [
    "t",
    "T_wigner",
    "T_classical",
    "B",
    "H2",
    "v_qsl",
    "v_ssl",
    "v_csl",
    "v_csl_analytic",
    "v_mt",
    "tau_qsl",
    "tau_ssl",
    "tau_csl",
    "energy_cap",
    "slack_qsl",
    "slack_ssl",
    "slack_csl",
];

pub const FIG1_COLUMNS: [&str; 5] = ["t", "abs_dB_dt", "v_mt", "v_csl_ermakov", "v_csl_paper"];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt_f64).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn report_values(r: &ReportRow) -> Vec<f64> {
    vec![
        r.t,
        r.t_wigner,
        r.t_classical,
        r.bhattacharyya,
        r.hellinger_sq,
        r.v_qsl,
        r.v_ssl,
        r.v_csl,
        r.v_csl_analytic,
        r.v_mt,
        r.tau_qsl,
        r.tau_ssl,
        r.tau_csl,
        r.energy_cap,
        r.slack_qsl,
        r.slack_ssl,
        r.slack_csl,
    ]
}

pub fn report_csv(report: &SpeedLimitReport) -> String {
    csv_table(&REPORT_COLUMNS, report.rows.iter().map(report_values))
}

/// Write `contents` to a temporary file next to `path`, then rename it into
/// place. Readers see either the old file or the complete new one.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::Builder::new()
        .prefix(".speedlimit-")
        .tempfile_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
