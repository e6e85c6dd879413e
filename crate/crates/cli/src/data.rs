use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use tnbs_core::model_file::write_atomic;

/// Paired input/output record.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
}

impl Record {
    pub fn len(&self) -> usize {
        self.u.len()
    }
}

pub fn read_record(path: &Path) -> Result<Record> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let header: Vec<String> = rdr
        .headers()
        .with_context(|| format!("{}: cannot read header", path.display()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != ["u", "y"] {
        bail!("{}: expected header `u,y`, found `{}`", path.display(), header.join(","));
    }
    let mut rec = Record { u: Vec::new(), y: Vec::new() };
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.with_context(|| format!("{}: row {line}: malformed CSV", path.display()))?;
        if row.len() != 2 {
            bail!("{}: row {line}: expected 2 fields, found {}", path.display(), row.len());
        }
        let mut vals = [0.0; 2];
        for (slot, (field, name)) in vals.iter_mut().zip(row.iter().zip(["u", "y"])) {
            let v: f64 = field
                .parse()
                .map_err(|_| anyhow::anyhow!("{}: row {line}: `{field}` is not a number ({name})", path.display()))?;
            if !v.is_finite() {
                bail!("{}: row {line}: non-finite {name} value", path.display());
            }
            *slot = v;
        }
        rec.u.push(vals[0]);
        rec.y.push(vals[1]);
    }
    if rec.u.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(rec)
}

pub fn write_record(path: &Path, u: &[f64], y: &[f64]) -> Result<()> {
    let mut s = String::from("u,y\n");
    for (a, b) in u.iter().zip(y) {
        writeln!(s, "{a},{b}").expect("string write");
    }
    write_atomic(path, s.as_bytes()).with_context(|| format!("cannot write {}", path.display()))
}

/// `n,y,yhat` rows for samples `start..start + yhat.len()`.
pub fn write_samples(path: &Path, start: usize, y: &[f64], yhat: &[f64]) -> Result<()> {
    let mut s = String::from("n,y,yhat\n");
    for (i, p) in yhat.iter().enumerate() {
        writeln!(s, "{},{},{p}", start + i, y[start + i]).expect("string write");
    }
    write_atomic(path, s.as_bytes()).with_context(|| format!("cannot write {}", path.display()))
}
