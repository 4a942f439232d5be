//! CSV run logs. One row per checkpoint; `model_size`, `step` and `domain`
//! may be empty. The header is fixed and checked verbatim.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::RunObservation;

pub const RUNLOG_HEADER: [&str; 8] =
    ["run_id", "model_size", "d_target", "h", "d_total", "loss", "step", "domain"];

fn parse_f64(field: &str, name: &str, line: Option<u64>) -> Result<f64> {
    field.parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("{name} '{field}' is not a number"),
    })
}

fn parse_opt_f64(field: &str, name: &str, line: Option<u64>) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_f64(field, name, line).map(Some)
    }
}

fn parse_opt_u64(field: &str, name: &str, line: Option<u64>) -> Result<Option<u64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<u64>()
        .map(Some)
        .map_err(|_| Error::Parse { line, msg: format!("{name} '{field}' is not a non-negative integer") })
}

pub fn read_runs_from(reader: impl Read) -> Result<Vec<RunObservation>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    {
        let headers = rdr.headers().map_err(csv_error)?;
        if headers.iter().ne(RUNLOG_HEADER) {
            return Err(Error::Parse {
                line: Some(1),
                msg: format!(
                    "expected header '{}', got '{}'",
                    RUNLOG_HEADER.join(","),
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line());
        if record.len() != RUNLOG_HEADER.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, got {}", RUNLOG_HEADER.len(), record.len()),
            });
        }
        let obs = RunObservation {
            run_id: record[0].to_string(),
            model_size: parse_opt_f64(&record[1], "model_size", line)?,
            d_target: parse_f64(&record[2], "d_target", line)?,
            h: parse_f64(&record[3], "h", line)?,
            d_total: parse_f64(&record[4], "d_total", line)?,
            loss: parse_f64(&record[5], "loss", line)?,
            step: parse_opt_u64(&record[6], "step", line)?,
            domain: if record[7].is_empty() { None } else { Some(record[7].to_string()) },
        };
        obs.validate().map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        out.push(obs);
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset("run log has a header but no rows".into()));
    }
    Ok(out)
}

pub fn read_runs(path: &Path) -> Result<Vec<RunObservation>> {
    let file = std::fs::File::open(path)?;
    read_runs_from(file)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line());
    Error::Parse { line, msg: e.to_string() }
}

/// Serializes runs back to CSV. Numbers use shortest round-trip formatting,
/// so read/write cycles are lossless and byte-stable.
pub fn runs_to_csv(runs: &[RunObservation]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RUNLOG_HEADER).map_err(csv_error)?;
    for o in runs {
        w.write_record([
            o.run_id.as_str(),
            &o.model_size.map(|v| format!("{v}")).unwrap_or_default(),
            &format!("{}", o.d_target),
            &format!("{}", o.h),
            &format!("{}", o.d_total),
            &format!("{}", o.loss),
            &o.step.map(|v| format!("{v}")).unwrap_or_default(),
            o.domain.as_deref().unwrap_or(""),
        ])
        .map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse { line: None, msg: e.to_string() })?;
    String::from_utf8(bytes).map_err(|e| Error::Parse { line: None, msg: e.to_string() })
}

pub fn write_runs(path: &Path, runs: &[RunObservation]) -> Result<()> {
    let csv = runs_to_csv(runs)?;
    super::atomic_write(path, csv.as_bytes())
}
