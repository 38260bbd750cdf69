use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::MetricTable;

/// One metric value present in both runs.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub table: String,
    /// `column=value` pairs identifying the row, `;`-separated.
    pub key: String,
    pub metric: String,
    pub a: f64,
    /// NaN when run B has no matching row.
    pub b: f64,
}

impl ComparisonRow {
    pub fn ratio(&self) -> f64 {
        self.a / self.b
    }
}

const INDEX_COLUMNS: [&str; 3] = ["r", "rows", "index"];

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| {
            p.extension().is_some_and(|e| e == "csv")
                && p.file_stem().is_some_and(|s| s != "compare")
        })
        .collect();
    v.sort();
    Ok(v)
}

/// Columns that identify a row: the integer indices plus anything that
/// does not parse as a number in run A.
fn key_columns(t: &MetricTable) -> Vec<usize> {
    (0..t.columns.len())
        .filter(|&c| {
            INDEX_COLUMNS.contains(&t.columns[c].as_str())
                || t.rows.iter().any(|row| row[c].parse::<f64>().is_err())
        })
        .collect()
}

fn row_key(t: &MetricTable, row: &[String], keys: &[usize]) -> String {
    keys.iter()
        .map(|&c| format!("{}={}", t.columns[c], row[c]))
        .collect::<Vec<_>>()
        .join(";")
}

/// Pairs every numeric value in run A's tables with run B's. Each table of
/// A must exist in B with the same columns.
pub fn compare_runs(a: &Path, b: &Path) -> Result<Vec<ComparisonRow>> {
    let files = csv_files(a)?;
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no result tables in {}",
            a.display()
        )));
    }
    let mut out = Vec::new();
    for path in files {
        let name = path.file_name().expect("listed file has a name");
        let other = b.join(name);
        if !other.exists() {
            return Err(Error::Config(format!(
                "{} has no counterpart {}",
                path.display(),
                other.display()
            )));
        }
        let ta = MetricTable::read(&path)?;
        let tb = MetricTable::read(&other)?;
        if ta.columns != tb.columns {
            return Err(Error::Format(format!(
                "{} and {} have different columns",
                path.display(),
                other.display()
            )));
        }
        let keys = key_columns(&ta);
        let b_rows: BTreeMap<String, &Vec<String>> = tb
            .rows
            .iter()
            .map(|r| (row_key(&tb, r, &keys), r))
            .collect();
        for row in &ta.rows {
            let key = row_key(&ta, row, &keys);
            let matched = b_rows.get(&key);
            for c in (0..ta.columns.len()).filter(|c| !keys.contains(c)) {
                let va: f64 = row[c].parse().expect("non-key columns are numeric");
                let vb = matched.and_then(|r| r[c].parse().ok()).unwrap_or(f64::NAN);
                out.push(ComparisonRow {
                    table: ta.name.clone(),
                    key: key.clone(),
                    metric: ta.columns[c].clone(),
                    a: va,
                    b: vb,
                });
            }
        }
    }
    Ok(out)
}

/// The comparison as a table with columns `table, key, metric, a, b, ratio`.
pub fn comparison_table(rows: &[ComparisonRow]) -> Result<MetricTable> {
    let mut t = MetricTable::new("compare", &["table", "key", "metric", "a", "b", "ratio"]);
    for r in rows {
        t.push([
            r.table.clone(),
            r.key.clone(),
            r.metric.clone(),
            r.a.to_string(),
            r.b.to_string(),
            r.ratio().to_string(),
        ])?;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(values: &[(&str, &str, &str)]) -> MetricTable {
        let mut t = MetricTable::new("final_rse", &["method", "r", "error"]);
        for (m, r, e) in values {
            t.push([*m, *r, *e]).unwrap();
        }
        t
    }

    #[test]
    fn ratios_and_missing_rows() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        table(&[("ls", "1", "0.2"), ("ls", "2", "0.1")])
            .write_to(a.path())
            .unwrap();
        table(&[("ls", "2", "0.05"), ("ls", "1", "0.4")])
            .write_to(b.path())
            .unwrap();
        let rows = compare_runs(a.path(), b.path()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].key, "method=ls;r=1");
        assert_eq!(rows[0].ratio(), 0.5);
        assert_eq!(rows[1].ratio(), 2.0);
        comparison_table(&rows).unwrap().write_to(a.path()).unwrap();
        // compare.csv itself is not compared.
        assert_eq!(compare_runs(a.path(), b.path()).unwrap().len(), 2);

        let c = tempfile::tempdir().unwrap();
        table(&[("ls", "3", "1")]).write_to(c.path()).unwrap();
        assert!(compare_runs(a.path(), c.path()).unwrap()[0].b.is_nan());
        assert!(matches!(
            compare_runs(a.path(), tempfile::tempdir().unwrap().path()),
            Err(Error::Config(_))
        ));
    }
}
