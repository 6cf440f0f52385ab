//! Reading and writing the `sample_id,value` delimited data format.

use crate::{CliError, CliResult};
use drmel::MultiSample;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// Read a delimited file with header `sample_id,value` into a MultiSample.
/// Sample ids must be the integers 0..=m with no gaps; row order is free.
pub fn ingest(path: &Path) -> CliResult<MultiSample> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;

    {
        let headers = reader
            .headers()
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let names: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
        if names != ["sample_id", "value"] {
            return Err(CliError::Data(format!(
                "{}: expected header `sample_id,value`, found `{}`",
                path.display(),
                names.join(",")
            )));
        }
    }

    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or_default();
        let parse = |field: Option<&str>, what: &str| -> CliResult<String> {
            field.map(str::to_string).ok_or_else(|| {
                CliError::Data(format!(
                    "{}: line {line}: missing {what} field",
                    path.display()
                ))
            })
        };
        let id_raw = parse(record.get(0), "sample_id")?;
        let value_raw = parse(record.get(1), "value")?;
        let id: usize = id_raw.parse().map_err(|_| {
            CliError::Data(format!(
                "{}: line {line}: invalid sample_id `{id_raw}`",
                path.display()
            ))
        })?;
        let value: f64 = value_raw.parse().map_err(|_| {
            CliError::Data(format!(
                "{}: line {line}: invalid value `{value_raw}`",
                path.display()
            ))
        })?;
        if !value.is_finite() {
            return Err(CliError::Data(format!(
                "{}: line {line}: non-finite value `{value_raw}`",
                path.display()
            )));
        }
        groups.entry(id).or_default().push(value);
    }

    if groups.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no data rows (empty sample)",
            path.display()
        )));
    }
    let max_id = *groups.keys().last().unwrap();
    for id in 0..=max_id {
        if !groups.contains_key(&id) {
            return Err(CliError::Data(format!(
                "{}: missing sample {id} (ids must be contiguous 0..={max_id})",
                path.display()
            )));
        }
    }
    let samples: Vec<Vec<f64>> = groups.into_values().collect();
    Ok(MultiSample::new(samples)?)
}

/// Write a MultiSample in the same format; floats round-trip exactly.
pub fn emit<W: Write>(sample: &MultiSample, mut writer: W) -> CliResult<()> {
    writeln!(writer, "sample_id,value")?;
    for (k, x) in sample.iter_pooled() {
        writeln!(writer, "{k},{x}")?;
    }
    Ok(())
}
