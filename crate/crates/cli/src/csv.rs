//! Plot-ready CSV: comma separated, LF endings, 17 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::CliError;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Empty cell for a missing value.
pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct CsvWriter {
    out: BufWriter<File>,
    path: String,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
        let mut w = CsvWriter { out: BufWriter::new(file), path: path.display().to_string() };
        w.row(header.iter().map(|s| s.to_string()))?;
        Ok(w)
    }

    /// Appends to an existing file without writing a header.
    pub fn append(path: &Path) -> Result<Self, CliError> {
        let file = File::options().append(true).open(path).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
        Ok(CsvWriter { out: BufWriter::new(file), path: path.display().to_string() })
    }

    pub fn row(&mut self, cells: impl IntoIterator<Item = String>) -> Result<(), CliError> {
        let line = cells.into_iter().collect::<Vec<_>>().join(",");
        writeln!(self.out, "{line}").map_err(|e| CliError::Failed(format!("{}: {e}", self.path)))
    }

    pub fn flush(&mut self) -> Result<(), CliError> {
        self.out.flush().map_err(|e| CliError::Failed(format!("{}: {e}", self.path)))
    }
}
