//! File formats: CSV inputs with a header row, atomic output writes.
//!
//! * Sample CSV: one column per covariate plus a column named `y`.
//! * Dictionary CSV: one row per hypothesis, one coefficient column per
//!   covariate and an optional `offset` column.
//! * Evaluation CSV: one column per hypothesis plus a column named `y`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Affine, Dictionary, EvaluationMatrix, SampleSet};

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn parse_table<R: Read>(reader: R, source_name: &str) -> Result<Table> {
    let parse_err = |line: usize, reason: String| Error::Parse { source_name: source_name.to_string(), line, reason };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(parse_err(1, "missing header row".into()));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", header.len(), record.len())));
        }
        let row = record
            .iter()
            .zip(&header)
            .map(|(field, name)| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("column `{name}`: `{field}` is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn split_column(table: Table, name: &str, source_name: &str) -> Result<(Vec<String>, Vec<Vec<f64>>, Vec<f64>)> {
    let idx = table.header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
        source_name: source_name.to_string(),
        line: 1,
        reason: format!("header has no `{name}` column"),
    })?;
    let mut header = table.header;
    header.remove(idx);
    let mut picked = Vec::with_capacity(table.rows.len());
    let rest = table
        .rows
        .into_iter()
        .map(|mut r| {
            picked.push(r.remove(idx));
            r
        })
        .collect();
    Ok((header, rest, picked))
}

pub fn parse_sample<R: Read>(reader: R, source_name: &str) -> Result<SampleSet> {
    let (header, rows, ys) = split_column(parse_table(reader, source_name)?, "y", source_name)?;
    if header.is_empty() {
        return Err(Error::Parse { source_name: source_name.into(), line: 1, reason: "no covariate columns".into() });
    }
    SampleSet::from_rows(&rows, ys)
}

pub fn parse_dictionary<R: Read>(reader: R, source_name: &str) -> Result<Dictionary> {
    let table = parse_table(reader, source_name)?;
    let hyps = if table.header.iter().any(|h| h == "offset") {
        let (_, rows, offsets) = split_column(table, "offset", source_name)?;
        rows.into_iter().zip(offsets).map(|(c, o)| Affine::new(c, o)).collect()
    } else {
        table.rows.into_iter().map(Affine::linear).collect()
    };
    Dictionary::new(hyps)
}

pub fn parse_evaluations<R: Read>(reader: R, source_name: &str) -> Result<(EvaluationMatrix, Vec<f64>)> {
    let (header, rows, ys) = split_column(parse_table(reader, source_name)?, "y", source_name)?;
    let columns = (0..header.len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    Ok((EvaluationMatrix::from_columns(columns)?, ys))
}

/// Parses TOML into `T`. Syntax errors are parse errors with a line number;
/// missing, unknown or mistyped fields are configuration errors naming the
/// field.
pub fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, source_name: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let reason = e.message().trim().to_string();
        let line = e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1);
        let schema = ["missing field", "unknown field", "unknown variant", "invalid type", "invalid value"];
        if schema.iter().any(|p| reason.starts_with(p)) {
            let field = reason.split('`').nth(1).unwrap_or("config").to_string();
            Error::config(field, format!("{reason} (line {line})"))
        } else {
            Error::Parse { source_name: source_name.to_string(), line, reason }
        }
    })
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::Parse { source_name: path.display().to_string(), line: 0, reason: e.to_string() })
}

pub fn read_sample(path: &Path) -> Result<SampleSet> {
    parse_sample(open(path)?, &path.display().to_string())
}

pub fn read_dictionary(path: &Path) -> Result<Dictionary> {
    parse_dictionary(open(path)?, &path.display().to_string())
}

pub fn read_evaluations(path: &Path) -> Result<(EvaluationMatrix, Vec<f64>)> {
    parse_evaluations(open(path)?, &path.display().to_string())
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}
