use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One metric written as CSV. The first line is a `# schema:` comment
/// naming each column; the header row follows.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl MetricTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I, T>(&mut self, row: I) -> Result<()>
    where
        I: IntoIterator<Item = T>,
        T: ToString,
    {
        let row: Vec<String> = row.into_iter().map(|v| v.to_string()).collect();
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                found: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    /// Writes `<dir>/<name>.csv` and returns its path.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.csv", self.name));
        let mut out = BufWriter::new(File::create(&path)?);
        writeln!(out, "# schema: {}", self.columns.join(","))?;
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.columns)?;
            for row in &self.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        out.flush()?;
        Ok(path)
    }

    /// Reads a table written by [`MetricTable::write_to`].
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let body = text
            .strip_prefix("# schema:")
            .and_then(|t| t.split_once('\n').map(|(_, rest)| rest))
            .ok_or_else(|| Error::Format(format!("{} has no schema line", path.display())))?;
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let columns = r.headers()?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(String::from).collect());
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Self {
            name,
            columns,
            rows,
        })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = MetricTable::new("rse", &["r", "error"]);
        t.push([1.to_string(), 0.5.to_string()]).unwrap();
        assert!(t.push(["1"]).is_err());
        let p = t.write_to(dir.path()).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# schema: r,error\nr,error\n1,0.5\n"));
        assert_eq!(MetricTable::read(&p).unwrap(), t);
    }
}
