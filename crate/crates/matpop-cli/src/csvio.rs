//! Minimal RFC-4180-style CSV reading and writing: header row, 64-bit
//! floats printed with 17 significant digits so values round-trip exactly.

use anyhow::{bail, Context, Result};
use std::io::Write;
use std::path::Path;

/// Format a float with 17 significant digits (exact f64 round trip).
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct CsvWriter {
    out: std::io::BufWriter<std::fs::File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = std::fs::File::create(path)
            .with_context(|| format!("creating {}", path.display()))?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(out, "{}", header.join(","))?;
        Ok(CsvWriter { out })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        let line = values.iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(",");
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Read a long-format `(m, a, gamma)` table into a rectangular grid.
/// Rows may come in any order but must cover the full rectangle.
pub fn read_gamma_table(path: &Path) -> Result<matpop::model::Gamma2d> {
    let (ms_raw, ages_raw) = read_columns(path, "m", "a")?;
    let (_, gs_raw) = read_columns(path, "m", "gamma")?;
    let mut ms: Vec<f64> = ms_raw.clone();
    ms.sort_by(f64::total_cmp);
    ms.dedup();
    let mut ages: Vec<f64> = ages_raw.clone();
    ages.sort_by(f64::total_cmp);
    ages.dedup();
    if ms.len() * ages.len() != gs_raw.len() {
        bail!(
            "gamma table is not a full rectangle: {} x {} grid vs {} rows",
            ms.len(),
            ages.len(),
            gs_raw.len()
        );
    }
    let mut values = vec![f64::NAN; gs_raw.len()];
    for ((m, a), g) in ms_raw.iter().zip(ages_raw.iter()).zip(gs_raw.iter()) {
        let i = ms.iter().position(|v| v == m).unwrap();
        let j = ages.iter().position(|v| v == a).unwrap();
        values[i * ages.len() + j] = *g;
    }
    if values.iter().any(|v| v.is_nan()) {
        bail!("gamma table has duplicate or missing (m, a) entries");
    }
    Ok(matpop::model::Gamma2d::new(ms, ages, values)?)
}

/// Read two named columns from a headered CSV file.
pub fn read_columns(path: &Path, xcol: &str, ycol: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .context("empty CSV")?
        .split(',')
        .map(str::trim)
        .collect();
    let xi = header
        .iter()
        .position(|h| *h == xcol)
        .with_context(|| format!("column '{xcol}' not found in {header:?}"))?;
    let yi = header
        .iter()
        .position(|h| *h == ycol)
        .with_context(|| format!("column '{ycol}' not found in {header:?}"))?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() <= xi.max(yi) {
            bail!("line {}: expected {} fields", ln + 2, header.len());
        }
        xs.push(fields[xi].trim().parse::<f64>().with_context(|| format!("line {}", ln + 2))?);
        ys.push(fields[yi].trim().parse::<f64>().with_context(|| format!("line {}", ln + 2))?);
    }
    Ok((xs, ys))
}
