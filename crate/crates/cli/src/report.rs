//! CSV and text outputs. Floats use Rust's shortest round-trip formatting,
//! so outputs are byte-stable across runs.

use std::fs;
use std::path::Path;

use rank_odo_core::eval::{CorrelationReport, DriftReport, LatentDump};
use rank_odo_core::pose::EulerPose6D;

use crate::CliError;

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_csv<R, I, S>(path: &Path, header: &[&str], rows: R) -> Result<(), CliError>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::data(path, e);
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::data(path, e.error()))?;
    write_text(path, &String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub(crate) fn loss_trace(path: &Path, trace: &[f64]) -> Result<(), CliError> {
    write_csv(path, &["step", "loss"], trace.iter().enumerate().map(|(k, l)| [k.to_string(), l.to_string()]))
}

pub(crate) fn correlations(path: &Path, rows: &[(usize, CorrelationReport)]) -> Result<(), CliError> {
    write_csv(
        path,
        &["dof", "name", "r_s", "r_k", "n"],
        rows.iter().map(|(d, c)| {
            [
                d.to_string(),
                EulerPose6D::DOF_NAMES[*d].to_string(),
                c.r_s.value.to_string(),
                c.r_k.value.to_string(),
                c.n.to_string(),
            ]
        }),
    )
}

/// One row per segment length plus a final `all` row with the overall
/// `t_rel`, `r_rel` and segment count.
pub(crate) fn drift(path: &Path, report: &DriftReport) -> Result<(), CliError> {
    let mut rows: Vec<[String; 4]> = report
        .per_length
        .iter()
        .map(|s| [s.length.to_string(), s.t_err.to_string(), s.r_err.to_string(), s.count.to_string()])
        .collect();
    rows.push(["all".into(), report.t_rel.to_string(), report.r_rel.to_string(), report.segments.to_string()]);
    write_csv(path, &["length", "t_err", "r_err", "count"], rows)
}

pub(crate) fn latent(path: &Path, dump: &LatentDump) -> Result<(), CliError> {
    let dim = dump.feature_dim();
    let mut header: Vec<String> = (0..dim).map(|k| format!("f{k}")).collect();
    header.push("label".into());
    header.push("prediction".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        path,
        &header,
        dump.rows
            .iter()
            .map(|r| r.feature.iter().chain([&r.label, &r.prediction]).map(|v| v.to_string()).collect::<Vec<_>>()),
    )
}
