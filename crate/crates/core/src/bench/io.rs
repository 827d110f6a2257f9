//! CSV and JSON persistence.

use super::report::StudyReport;
use crate::cogarch::{ReturnsSeries, VolatilityPath};
use crate::error::{invalid, Result};
use crate::estimators::Method;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize, Deserialize)]
struct ReturnRow {
    index: usize,
    #[serde(rename = "G_i")]
    g: f64,
}

#[derive(Debug, Serialize)]
struct PathRow {
    t: f64,
    sigma2: f64,
}

#[derive(Debug, Serialize)]
struct EstimateRow {
    rep: usize,
    method: Method,
    beta: Option<f64>,
    eta: Option<f64>,
    phi: Option<f64>,
    objective: Option<f64>,
    feasible: bool,
}

pub fn write_returns_csv<W: Write>(series: &ReturnsSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (i, &g) in series.values.iter().enumerate() {
        w.serialize(ReturnRow { index: i + 1, g })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_path_csv<W: Write>(path: &VolatilityPath, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (&t, &sigma2) in path.times.iter().zip(&path.sigma2) {
        w.serialize(PathRow { t, sigma2 })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads returns from a CSV with a `G_i` column, or from the last column of
/// a headerless file.
pub fn read_returns_csv<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut values = Vec::new();
    let mut column = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if i == 0 {
            if let Some(pos) = rec.iter().position(|h| h.trim() == "G_i") {
                column = Some(pos);
                continue;
            }
        }
        let col = column.unwrap_or(rec.len().saturating_sub(1));
        let field = rec.get(col).ok_or_else(|| invalid(format!("row {} is empty", i + 1)))?;
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|_| invalid(format!("row {}: cannot parse {field:?} as a number", i + 1)))?;
        if !v.is_finite() {
            return Err(invalid(format!("row {}: non-finite return", i + 1)));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(invalid("no returns in input"));
    }
    Ok(values)
}

/// Writes `report.json`, `estimates.csv` and `qq.csv` into `dir`.
pub fn write_study_outputs(report: &StudyReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let json = dir.join("report.json");
    let mut f = BufWriter::new(File::create(&json)?);
    serde_json::to_writer_pretty(&mut f, report)?;
    f.write_all(b"\n")?;
    f.flush()?;

    let estimates = dir.join("estimates.csv");
    let mut w = csv::Writer::from_path(&estimates)?;
    for e in &report.estimates {
        w.serialize(EstimateRow {
            rep: e.rep,
            method: e.method,
            beta: e.theta.map(|t| t.beta),
            eta: e.theta.map(|t| t.eta),
            phi: e.theta.map(|t| t.phi),
            objective: e.objective,
            feasible: e.feasible,
        })?;
    }
    w.flush()?;

    let qq = dir.join("qq.csv");
    let mut w = csv::Writer::from_path(&qq)?;
    for row in &report.qq {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(vec![json, estimates, qq])
}
