//! CSV formats for observed data.
//!
//! Summary files have a header naming each summary and a single row of values.
//! Daycare snapshot files have the header `snapshot,child,<strain…>` and one
//! row per child per snapshot with 0/1 carriage indicators.

use std::path::Path;

use super::daycare::ColonizationMatrix;
use crate::error::{Error, Result};

pub fn write_summary_csv<P: AsRef<Path>>(path: P, names: &[String], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(names)?;
    w.write_record(values.iter().map(|v| v.to_string()))?;
    w.flush()?;
    Ok(())
}

/// Reads a summary file and reorders its values to `expected` names.
pub fn read_summary_csv<P: AsRef<Path>>(path: P, expected: &[String]) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let row = r
        .records()
        .next()
        .ok_or_else(|| Error::InvalidInput("summary file has no data row".into()))??;
    expected
        .iter()
        .map(|name| {
            let idx = header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::InvalidInput(format!("summary file lacks column `{name}`")))?;
            row.get(idx)
                .unwrap_or("")
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("column `{name}`: {e}")))
        })
        .collect()
}

pub fn write_snapshots_csv<P: AsRef<Path>>(path: P, strain_names: &[String], snapshots: &[ColonizationMatrix]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["snapshot".to_string(), "child".to_string()];
    header.extend(strain_names.iter().cloned());
    w.write_record(&header)?;
    for (t, snap) in snapshots.iter().enumerate() {
        for i in 0..snap.n_children() {
            let mut rec = vec![t.to_string(), i.to_string()];
            rec.extend(snap.row(i).iter().map(|&c| if c { "1" } else { "0" }.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Returns the strain names and the snapshots in file order of first appearance.
pub fn read_snapshots_csv<P: AsRef<Path>>(path: P) -> Result<(Vec<String>, Vec<ColonizationMatrix>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.len() < 3 || header[0] != "snapshot" || header[1] != "child" {
        return Err(Error::InvalidInput("snapshot file header must start with `snapshot,child`".into()));
    }
    let strains = header[2..].to_vec();
    let mut order: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<Vec<bool>>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let key = rec.get(0).unwrap_or("").to_string();
        let slot = match order.iter().position(|k| *k == key) {
            Some(p) => p,
            None => {
                order.push(key);
                rows.push(Vec::new());
                order.len() - 1
            }
        };
        let flags = (2..header.len())
            .map(|c| match rec.get(c).map(str::trim) {
                Some("1") => Ok(true),
                Some("0") => Ok(false),
                other => Err(Error::InvalidInput(format!("carriage indicator must be 0 or 1, got {other:?}"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        rows[slot].push(flags);
    }
    let snaps = rows.into_iter().map(ColonizationMatrix::from_rows).collect::<Result<Vec<_>>>()?;
    if snaps.is_empty() {
        return Err(Error::InvalidInput("snapshot file has no rows".into()));
    }
    Ok((strains, snaps))
}
