//! CSV input and output. Comma separated, header row required, '.' as the
//! decimal point regardless of locale.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use orthoreg::Dataset;

use crate::CliError;

/// Columns of a numeric table, addressed by header name.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
    index: HashMap<String, usize>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::Input(format!("cannot read header of {}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut index = HashMap::new();
        for (j, h) in headers.iter().enumerate() {
            if h.is_empty() {
                return Err(CliError::Input(format!(
                    "column {} has an empty header",
                    j + 1
                )));
            }
            if index.insert(h.clone(), j).is_some() {
                return Err(CliError::Input(format!(
                    "duplicate column \"{h}\" in header"
                )));
            }
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| CliError::Input(format!("data row {}: {e}", i + 1)))?;
            rows.push(rec);
        }
        Ok(Table {
            headers,
            rows,
            index,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn has(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Parses one column. Rows are reported 1-based, counting data rows
    /// only (the header is not row 1).
    pub fn column(&self, name: &str) -> Result<Array1<f64>, CliError> {
        let j = *self
            .index
            .get(name)
            .ok_or_else(|| CliError::Input(format!("column \"{name}\" not found in header")))?;
        let mut out = Array1::zeros(self.rows.len());
        for (i, rec) in self.rows.iter().enumerate() {
            let raw = rec.get(j).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| {
                CliError::Input(format!(
                    "column \"{name}\", data row {}: \"{raw}\" is not a number",
                    i + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::Input(format!(
                    "column \"{name}\", data row {}: non-finite value \"{raw}\"",
                    i + 1
                )));
            }
            out[i] = v;
        }
        Ok(out)
    }

    pub fn columns(&self, names: &[String]) -> Result<Array2<f64>, CliError> {
        let mut out = Array2::zeros((self.rows.len(), names.len()));
        for (j, name) in names.iter().enumerate() {
            out.column_mut(j).assign(&self.column(name)?);
        }
        Ok(out)
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `y, d1.., x1..` with the given names.
pub fn write_dataset(
    path: &Path,
    data: &Dataset<f64>,
    outcome: &str,
    treatments: &[String],
    controls: &[String],
) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<&str> = std::iter::once(outcome)
        .chain(treatments.iter().map(String::as_str))
        .chain(controls.iter().map(String::as_str))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for i in 0..data.n() {
        let mut fields = vec![fmt_f64(data.y()[i])];
        fields.extend(data.d().row(i).iter().map(|v| fmt_f64(*v)));
        fields.extend(data.x().row(i).iter().map(|v| fmt_f64(*v)));
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()
}
