//! File writers. Numbers are written with 17 significant digits and no
//! locale dependence so repeated runs produce identical bytes.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use llblow_core::RadialGrid;
use serde::Serialize;

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// CSV with a header row and one record per row.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|&v| num(v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Radial field as `y,<name>[grid=<hash>]`.
pub fn write_field(path: &Path, name: &str, grid: &RadialGrid, values: &[f64]) -> Result<()> {
    let col = format!("{name}[grid={:016x}]", grid.hash());
    write_table(path, &["y", &col], grid.nodes().iter().zip(values).map(|(&y, &v)| vec![y, v]))
}

/// Whitespace-separated columns for gnuplot, with a commented header.
pub fn write_dat(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut s = format!("# {}\n", header.join(" "));
    for r in rows {
        let cols: Vec<String> = r.iter().map(|&v| num(v)).collect();
        s.push_str(&cols.join(" "));
        s.push('\n');
    }
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

/// Read named numeric columns from a CSV with a header row. Header names are
/// matched up to an optional `[...]` suffix.
pub fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Option<Vec<f64>>>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers: Vec<String> =
        r.headers()?.iter().map(|h| h.split('[').next().unwrap_or("").trim().to_string()).collect();
    let idx: Vec<Option<usize>> = names.iter().map(|n| headers.iter().position(|h| h == n)).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        for (k, i) in idx.iter().enumerate() {
            if let Some(i) = *i {
                let field = rec.get(i).unwrap_or("");
                let v: f64 = field
                    .trim()
                    .parse()
                    .with_context(|| format!("{}: row {} column {}: {field:?}", path.display(), line + 2, names[k]))?;
                cols[k].push(v);
            }
        }
    }
    Ok(idx.iter().zip(cols).map(|(i, c)| i.map(|_| c)).collect())
}
