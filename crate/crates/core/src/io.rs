//! SROM column files and their metadata sidecars.
//!
//! Layout (little-endian): `b"SROM"`, version `u32`, rows `u64`, columns
//! `u64`, dtype tag `u32` (1 = f64), then each column as `rows` f64 values.
//! Snapshot files hold one state per column; operator files hold a `d × r`
//! matrix the same way.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::snapshots::{Snapshot, SnapshotSource};

pub const MAGIC: &[u8; 4] = b"SROM";
pub const VERSION: u32 = 1;
pub const DTYPE_F64_LE: u32 = 1;
pub const HEADER_BYTES: u64 = 28;
const COLS_OFFSET: u64 = 16;

/// Bytes taken by a file of `rows × cols` values.
pub fn file_bytes(rows: usize, cols: usize) -> u64 {
    HEADER_BYTES + 8 * rows as u64 * cols as u64
}

/// Appends columns and patches the column count on [`SromWriter::finish`].
pub struct SromWriter {
    out: BufWriter<File>,
    rows: usize,
    cols: u64,
}

impl SromWriter {
    pub fn create(path: &Path, rows: usize) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(rows as u64).to_le_bytes())?;
        out.write_all(&0u64.to_le_bytes())?;
        out.write_all(&DTYPE_F64_LE.to_le_bytes())?;
        Ok(Self { out, rows, cols: 0 })
    }

    pub fn push(&mut self, column: &[f64]) -> Result<()> {
        if column.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: column.len(),
            });
        }
        for v in column {
            self.out.write_all(&v.to_le_bytes())?;
        }
        self.cols += 1;
        Ok(())
    }

    /// Patches the column count into the header; returns it.
    pub fn finish(mut self) -> Result<u64> {
        self.out.flush()?;
        let mut f = self.out.into_inner().map_err(|e| e.into_error())?;
        f.seek(SeekFrom::Start(COLS_OFFSET))?;
        f.write_all(&self.cols.to_le_bytes())?;
        f.sync_all()?;
        Ok(self.cols)
    }
}

/// Sequential column reader; never loads more than one column.
pub struct SromReader {
    path: PathBuf,
    input: BufReader<File>,
    rows: usize,
    cols: usize,
    next: usize,
    buf: Vec<u8>,
}

impl SromReader {
    pub fn open(path: &Path) -> Result<Self> {
        let mut input = BufReader::new(File::open(path)?);
        let mut h = [0u8; HEADER_BYTES as usize];
        input
            .read_exact(&mut h)
            .map_err(|_| Error::Format(format!("{}: truncated header", path.display())))?;
        if &h[0..4] != MAGIC {
            return Err(Error::Format(format!("{}: bad magic", path.display())));
        }
        let word = |a: usize| u32::from_le_bytes(h[a..a + 4].try_into().unwrap());
        let long = |a: usize| u64::from_le_bytes(h[a..a + 8].try_into().unwrap());
        if word(4) != VERSION {
            return Err(Error::Format(format!(
                "{}: unsupported version {}",
                path.display(),
                word(4)
            )));
        }
        if word(24) != DTYPE_F64_LE {
            return Err(Error::Format(format!(
                "{}: unsupported dtype tag {}",
                path.display(),
                word(24)
            )));
        }
        let (rows, cols) = (long(8) as usize, long(16) as usize);
        let expected = file_bytes(rows, cols);
        let actual = std::fs::metadata(path)?.len();
        if actual != expected {
            return Err(Error::Format(format!(
                "{}: {} bytes, header implies {}",
                path.display(),
                actual,
                expected
            )));
        }
        Ok(Self {
            path: path.to_path_buf(),
            input,
            rows,
            cols,
            next: 0,
            buf: vec![0; 8 * rows],
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn next_column(&mut self) -> Result<Option<Vec<f64>>> {
        if self.next >= self.cols {
            return Ok(None);
        }
        self.input.read_exact(&mut self.buf)?;
        self.next += 1;
        Ok(Some(
            self.buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ))
    }

    pub fn skip(&mut self, count: usize) -> Result<()> {
        let count = count.min(self.cols - self.next);
        self.input
            .seek_relative(8 * self.rows as i64 * count as i64)?;
        self.next += count;
        Ok(())
    }

    pub fn rewind(&mut self) -> Result<()> {
        self.input.seek(SeekFrom::Start(HEADER_BYTES))?;
        self.next = 0;
        Ok(())
    }
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = SromWriter::create(path, m.nrows())?;
    for c in 0..m.ncols() {
        w.push(m.column(c).as_slice())?;
    }
    w.finish()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = SromReader::open(path)?;
    let mut m = DMatrix::zeros(r.rows(), r.cols());
    let mut c = 0;
    while let Some(col) = r.next_column()? {
        m.column_mut(c).copy_from_slice(&col);
        c += 1;
    }
    Ok(m)
}

/// `key=value` metadata written next to a data file as `<file>.meta`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metadata(pub BTreeMap<String, String>);

impl Metadata {
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.insert(key.into(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn sidecar(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".meta");
        PathBuf::from(s)
    }

    pub fn write_for(&self, data: &Path) -> Result<()> {
        let mut text = String::new();
        for (k, v) in &self.0 {
            text.push_str(&format!("{k}={v}\n"));
        }
        std::fs::write(Self::sidecar(data), text)?;
        Ok(())
    }

    pub fn read_for(data: &Path) -> Result<Self> {
        let path = Self::sidecar(data);
        let mut map = BTreeMap::new();
        for (i, line) in std::fs::read_to_string(&path)?.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("{}:{}: expected key=value", path.display(), i + 1))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self(map))
    }
}

/// The files of one stored trajectory. The first `skip` columns are not
/// streamed (used to drop an initial condition already stored elsewhere).
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryFiles {
    pub states: PathBuf,
    pub inputs: Option<PathBuf>,
    pub derivatives: Option<PathBuf>,
    pub skip: usize,
}

struct OpenTrajectory {
    states: SromReader,
    inputs: Option<SromReader>,
    derivatives: Option<SromReader>,
}

/// Snapshot source streaming a list of trajectory files in order; each file
/// is one segment.
pub struct FileSource {
    files: Vec<TrajectoryFiles>,
    lens: Vec<usize>,
    n: usize,
    m: usize,
    has_derivatives: bool,
    cur: usize,
    open: Option<OpenTrajectory>,
}

impl FileSource {
    pub fn new(files: Vec<TrajectoryFiles>) -> Result<Self> {
        let first = files
            .first()
            .ok_or_else(|| Error::InvalidArgument("no trajectory files".into()))?;
        let has_derivatives = first.derivatives.is_some();
        let mut n = None;
        let mut m = None;
        let mut lens = Vec::with_capacity(files.len());
        for f in &files {
            let s = SromReader::open(&f.states)?;
            if *n.get_or_insert(s.rows()) != s.rows() {
                return Err(Error::InconsistentDimensions(format!(
                    "{} has {} rows",
                    f.states.display(),
                    s.rows()
                )));
            }
            if f.skip > s.cols() {
                return Err(Error::InvalidArgument(format!(
                    "skip {} exceeds {} columns",
                    f.skip,
                    s.cols()
                )));
            }
            let fm = match &f.inputs {
                Some(p) => {
                    let u = SromReader::open(p)?;
                    if u.cols() != s.cols() {
                        return Err(Error::DimensionMismatch {
                            expected: s.cols(),
                            found: u.cols(),
                        });
                    }
                    u.rows()
                }
                None => 0,
            };
            if *m.get_or_insert(fm) != fm {
                return Err(Error::InconsistentDimensions(
                    "input dimension differs between files".into(),
                ));
            }
            if f.derivatives.is_some() != has_derivatives {
                return Err(Error::InconsistentDimensions(
                    "derivatives present for only some files".into(),
                ));
            }
            if let Some(p) = &f.derivatives {
                let d = SromReader::open(p)?;
                if (d.rows(), d.cols()) != (s.rows(), s.cols()) {
                    return Err(Error::ShapeMismatch(format!(
                        "{} does not match its states",
                        p.display()
                    )));
                }
            }
            lens.push(s.cols() - f.skip);
        }
        Ok(Self {
            files,
            lens,
            n: n.unwrap(),
            m: m.unwrap(),
            has_derivatives,
            cur: 0,
            open: None,
        })
    }
}

impl SnapshotSource for FileSource {
    fn dim(&self) -> usize {
        self.n
    }

    fn len(&self) -> usize {
        self.lens.iter().sum()
    }

    fn input_dim(&self) -> usize {
        self.m
    }

    fn has_derivatives(&self) -> bool {
        self.has_derivatives
    }

    fn segments(&self) -> Vec<Vec<usize>> {
        let mut start = 0;
        self.lens
            .iter()
            .map(|&l| {
                let s = (start..start + l).collect();
                start += l;
                s
            })
            .collect()
    }

    fn rewind(&mut self) -> Result<()> {
        self.cur = 0;
        self.open = None;
        Ok(())
    }

    fn next_snapshot(&mut self) -> Result<Option<Snapshot>> {
        loop {
            if self.cur >= self.files.len() {
                return Ok(None);
            }
            if self.open.is_none() {
                let f = &self.files[self.cur];
                let mut t = OpenTrajectory {
                    states: SromReader::open(&f.states)?,
                    inputs: f.inputs.as_deref().map(SromReader::open).transpose()?,
                    derivatives: f.derivatives.as_deref().map(SromReader::open).transpose()?,
                };
                t.states.skip(f.skip)?;
                if let Some(u) = t.inputs.as_mut() {
                    u.skip(f.skip)?;
                }
                if let Some(d) = t.derivatives.as_mut() {
                    d.skip(f.skip)?;
                }
                self.open = Some(t);
            }
            let t = self.open.as_mut().unwrap();
            match t.states.next_column()? {
                Some(state) => {
                    let input = match t.inputs.as_mut() {
                        Some(u) => u
                            .next_column()?
                            .ok_or_else(|| Error::Format("inputs ended early".into()))?,
                        None => Vec::new(),
                    };
                    let derivative = match t.derivatives.as_mut() {
                        Some(d) => Some(
                            d.next_column()?
                                .ok_or_else(|| Error::Format("derivatives ended early".into()))?,
                        ),
                        None => None,
                    };
                    return Ok(Some(Snapshot {
                        state,
                        derivative,
                        input,
                    }));
                }
                None => {
                    self.cur += 1;
                    self.open = None;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.srom");
        let m = DMatrix::from_fn(3, 4, |i, j| i as f64 - 0.5 * j as f64);
        write_matrix(&p, &m).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len(), file_bytes(3, 4));
        assert_eq!(read_matrix(&p).unwrap(), m);
    }

    #[test]
    fn rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.srom");
        write_matrix(&p, &DMatrix::from_element(2, 2, 1.0)).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.pop();
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(SromReader::open(&p), Err(Error::Format(_))));
        bytes[0] = b'X';
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(SromReader::open(&p), Err(Error::Format(_))));
    }

    #[test]
    fn metadata_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.srom");
        let mut m = Metadata::default();
        m.set("dt", 1e-4).set("mu", 0.3);
        m.write_for(&p).unwrap();
        assert_eq!(Metadata::read_for(&p).unwrap(), m);
    }

    #[test]
    fn file_source_skips_and_segments() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.srom");
        let b = dir.path().join("b.srom");
        let ua = dir.path().join("ua.srom");
        let ub = dir.path().join("ub.srom");
        write_matrix(&a, &DMatrix::from_fn(2, 3, |_, j| j as f64)).unwrap();
        write_matrix(&b, &DMatrix::from_fn(2, 3, |_, j| 10.0 + j as f64)).unwrap();
        write_matrix(&ua, &DMatrix::from_fn(1, 3, |_, j| j as f64)).unwrap();
        write_matrix(&ub, &DMatrix::from_fn(1, 3, |_, j| 10.0 + j as f64)).unwrap();
        let mut src = FileSource::new(vec![
            TrajectoryFiles {
                states: a,
                inputs: Some(ua),
                derivatives: None,
                skip: 0,
            },
            TrajectoryFiles {
                states: b,
                inputs: Some(ub),
                derivatives: None,
                skip: 1,
            },
        ])
        .unwrap();
        assert_eq!(src.len(), 5);
        assert_eq!(src.segments(), vec![vec![0, 1, 2], vec![3, 4]]);
        let got: Vec<(f64, f64)> = std::iter::from_fn(|| src.next_snapshot().unwrap())
            .map(|s| (s.state[1], s.input[0]))
            .collect();
        assert_eq!(
            got,
            vec![
                (0.0, 0.0),
                (1.0, 1.0),
                (2.0, 2.0),
                (11.0, 11.0),
                (12.0, 12.0)
            ]
        );
        src.rewind().unwrap();
        assert_eq!(src.next_snapshot().unwrap().unwrap().state, vec![0.0, 0.0]);
    }
}
