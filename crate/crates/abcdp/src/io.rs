//! File formats: datasets, persisted proposal sets, result tables.
//!
//! Every file is UTF-8 with LF line endings. Floats are written with Rust's
//! shortest round-trip formatting, so a reloaded file parses to the same
//! bits and re-saving it reproduces the same bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use abcdp_core::distance::Dataset;
use abcdp_core::engine::ProposalRecord;
use serde::Serialize;

use crate::error::{HarnessError, Result};

/// Name of the index table inside a proposal directory.
pub const PROPOSAL_INDEX: &str = "index.csv";
/// Subdirectory holding one headerless CSV per pseudo-dataset.
pub const PROPOSAL_DATA_DIR: &str = "data";

fn csv_err(path: &Path, source: csv::Error) -> HarnessError {
    HarnessError::Csv { path: path.to_path_buf(), source }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_err(path, e))
}

fn parse_float(path: &Path, line: u64, field: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        HarnessError::validation(
            format!("{}:{line}", path.display()),
            format!("{field:?} is not a number"),
        )
    })
}

/// Writes a headered table; every row must have as many cells as `header`.
pub fn write_table<S: AsRef<str>>(path: &Path, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        w.write_record(row.iter().map(AsRef::as_ref)).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Reads a headered table as strings.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(|e| csv_err(path, e))?.iter().map(str::to_owned).collect());
    }
    Ok((header, rows))
}

/// Reads a headerless CSV of `d`-dimensional points, one per row.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut dim = None;
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        match dim {
            None => dim = Some(rec.len()),
            Some(d) if d != rec.len() => {
                return Err(HarnessError::validation(
                    format!("{}:{line}", path.display()),
                    format!("expected {d} columns, found {}", rec.len()),
                ))
            }
            _ => {}
        }
        for field in rec.iter() {
            values.push(parse_float(path, line, field)?);
        }
    }
    let dim = dim.ok_or_else(|| HarnessError::validation(path.display().to_string(), "dataset is empty"))?;
    Ok(Dataset::new(dim, values)?)
}

/// Writes a dataset as a headerless CSV.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = writer(path)?;
    for p in data.points() {
        w.write_record(p.iter().map(|v| v.to_string())).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn data_file(index: usize) -> PathBuf {
    Path::new(PROPOSAL_DATA_DIR).join(format!("{index:06}.csv"))
}

/// Persists a proposal set: `index.csv` with columns `t,theta_1..theta_d,data_path`
/// and one headerless CSV per pseudo-dataset under `data/`.
pub fn save_proposals(dir: &Path, proposals: &[ProposalRecord]) -> Result<()> {
    let d = proposals.first().map_or(0, |p| p.theta.len());
    let mut header = vec!["t".to_owned()];
    header.extend((1..=d).map(|j| format!("theta_{j}")));
    header.push("data_path".to_owned());
    let mut rows = Vec::with_capacity(proposals.len());
    for p in proposals {
        if p.theta.len() != d {
            return Err(abcdp_core::Error::DimensionMismatch { expected: d, found: p.theta.len() }.into());
        }
        let rel = data_file(p.index);
        write_dataset(&dir.join(&rel), &p.pseudo_data)?;
        let mut row = vec![p.index.to_string()];
        row.extend(p.theta.iter().map(|v| v.to_string()));
        row.push(rel.to_string_lossy().replace('\\', "/"));
        rows.push(row);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(&dir.join(PROPOSAL_INDEX), &header, &rows)
}

/// Reloads a proposal set written by [`save_proposals`].
pub fn load_proposals(dir: &Path) -> Result<Vec<ProposalRecord>> {
    let index = dir.join(PROPOSAL_INDEX);
    let (header, rows) = read_table(&index)?;
    if header.len() < 3 || header[0] != "t" || header[header.len() - 1] != "data_path" {
        return Err(HarnessError::validation(index.display().to_string(), "expected columns t,theta_1..,data_path"));
    }
    let d = header.len() - 2;
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let line = i as u64 + 2;
        let t = row[0].parse::<usize>().map_err(|_| {
            HarnessError::validation(format!("{}:{line}", index.display()), "t must be a positive integer")
        })?;
        let theta = row[1..=d].iter().map(|f| parse_float(&index, line, f)).collect::<Result<Vec<_>>>()?;
        let pseudo_data = read_dataset(&dir.join(&row[d + 1]))?;
        out.push(ProposalRecord { index: t, theta, pseudo_data });
    }
    abcdp_core::engine::validate_proposals(&out)?;
    Ok(out)
}

/// Pretty-printed JSON followed by a newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|source| HarnessError::Json { context: path.display().to_string(), source })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| HarnessError::io(path, e))
}

/// Formats an optional number, leaving the cell empty when absent.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("y.csv");
        let data = Dataset::new(2, vec![0.1, -3.0, 1e-300, std::f64::consts::PI, 2.5, 7.0]).unwrap();
        write_dataset(&path, &data).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back, data);
        let bytes = fs::read(&path).unwrap();
        assert!(!bytes.contains(&b'\r'));
        write_dataset(&path, &back).unwrap();
        assert_eq!(fs::read(&path).unwrap(), bytes);
    }

    #[test]
    fn ragged_or_bad_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "1,2\n3\n").unwrap();
        assert!(read_dataset(&path).is_err());
        fs::write(&path, "1,x\n").unwrap();
        assert!(matches!(read_dataset(&path), Err(HarnessError::Validation { .. })));
        fs::write(&path, "").unwrap();
        assert!(read_dataset(&path).is_err());
    }

    #[test]
    fn proposals_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = abcdp_core::simulators::SimulatorSpec::uniform_mixture(7);
        let props = abcdp_core::simulators::build_proposals(&spec, 12, 5).unwrap();
        save_proposals(dir.path(), &props).unwrap();
        let back = load_proposals(dir.path()).unwrap();
        assert_eq!(back, props);
        let index = fs::read(dir.path().join(PROPOSAL_INDEX)).unwrap();
        let other = tempfile::tempdir().unwrap();
        save_proposals(other.path(), &back).unwrap();
        assert_eq!(fs::read(other.path().join(PROPOSAL_INDEX)).unwrap(), index);
        assert_eq!(
            fs::read(other.path().join("data/000012.csv")).unwrap(),
            fs::read(dir.path().join("data/000012.csv")).unwrap()
        );
    }
}
