//! Sequential snapshot sources. A source can be rewound for another pass;
//! nothing here requires the whole snapshot matrix in memory.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// One column of the snapshot stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub state: Vec<f64>,
    pub derivative: Option<Vec<f64>>,
    pub input: Vec<f64>,
}

pub trait SnapshotSource {
    /// State dimension `n`.
    fn dim(&self) -> usize;
    /// Number of snapshots `K`.
    fn len(&self) -> usize;
    fn input_dim(&self) -> usize {
        0
    }
    fn has_derivatives(&self) -> bool {
        false
    }
    /// Trajectories as lists of global snapshot indices in time order.
    fn segments(&self) -> Vec<Vec<usize>> {
        vec![(0..self.len()).collect()]
    }
    /// Restarts the stream at snapshot 0.
    fn rewind(&mut self) -> Result<()>;
    fn next_snapshot(&mut self) -> Result<Option<Snapshot>>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// In-memory source over the columns of dense matrices.
#[derive(Clone, Debug)]
pub struct MatrixSource {
    states: DMatrix<f64>,
    derivatives: Option<DMatrix<f64>>,
    inputs: Option<DMatrix<f64>>,
    segments: Option<Vec<Vec<usize>>>,
    pos: usize,
}

impl MatrixSource {
    pub fn new(states: DMatrix<f64>) -> Self {
        Self {
            states,
            derivatives: None,
            inputs: None,
            segments: None,
            pos: 0,
        }
    }

    pub fn with_derivatives(mut self, xdot: DMatrix<f64>) -> Result<Self> {
        if xdot.shape() != self.states.shape() {
            return Err(Error::ShapeMismatch(format!(
                "derivatives are {:?}, states are {:?}",
                xdot.shape(),
                self.states.shape()
            )));
        }
        self.derivatives = Some(xdot);
        Ok(self)
    }

    pub fn with_inputs(mut self, u: DMatrix<f64>) -> Result<Self> {
        if u.ncols() != self.states.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.states.ncols(),
                found: u.ncols(),
            });
        }
        self.inputs = Some(u);
        Ok(self)
    }

    pub fn with_segments(mut self, segments: Vec<Vec<usize>>) -> Self {
        self.segments = Some(segments);
        self
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }
}

impl SnapshotSource for MatrixSource {
    fn dim(&self) -> usize {
        self.states.nrows()
    }

    fn len(&self) -> usize {
        self.states.ncols()
    }

    fn input_dim(&self) -> usize {
        self.inputs.as_ref().map_or(0, |u| u.nrows())
    }

    fn has_derivatives(&self) -> bool {
        self.derivatives.is_some()
    }

    fn segments(&self) -> Vec<Vec<usize>> {
        self.segments
            .clone()
            .unwrap_or_else(|| vec![(0..self.len()).collect()])
    }

    fn rewind(&mut self) -> Result<()> {
        self.pos = 0;
        Ok(())
    }

    fn next_snapshot(&mut self) -> Result<Option<Snapshot>> {
        if self.pos >= self.len() {
            return Ok(None);
        }
        let k = self.pos;
        self.pos += 1;
        Ok(Some(Snapshot {
            state: self.states.column(k).iter().cloned().collect(),
            derivative: self
                .derivatives
                .as_ref()
                .map(|d| d.column(k).iter().cloned().collect()),
            input: self
                .inputs
                .as_ref()
                .map_or_else(Vec::new, |u| u.column(k).iter().cloned().collect()),
        }))
    }
}

/// Concatenation of sources with equal state and input dimensions; segment
/// indices of later parts are shifted by the lengths before them.
pub struct ChainSource<'a> {
    parts: Vec<Box<dyn SnapshotSource + 'a>>,
    cur: usize,
}

impl<'a> ChainSource<'a> {
    pub fn new(parts: Vec<Box<dyn SnapshotSource + 'a>>) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty chain".into()))?;
        let (n, m, d) = (first.dim(), first.input_dim(), first.has_derivatives());
        for p in &parts {
            if p.dim() != n || p.input_dim() != m || p.has_derivatives() != d {
                return Err(Error::InconsistentDimensions(
                    "chained sources differ in shape".into(),
                ));
            }
        }
        Ok(Self { parts, cur: 0 })
    }
}

impl SnapshotSource for ChainSource<'_> {
    fn dim(&self) -> usize {
        self.parts[0].dim()
    }

    fn len(&self) -> usize {
        self.parts.iter().map(|p| p.len()).sum()
    }

    fn input_dim(&self) -> usize {
        self.parts[0].input_dim()
    }

    fn has_derivatives(&self) -> bool {
        self.parts[0].has_derivatives()
    }

    fn segments(&self) -> Vec<Vec<usize>> {
        let mut offset = 0;
        let mut out = Vec::new();
        for p in &self.parts {
            out.extend(
                p.segments()
                    .into_iter()
                    .map(|s| s.into_iter().map(|i| i + offset).collect()),
            );
            offset += p.len();
        }
        out
    }

    fn rewind(&mut self) -> Result<()> {
        for p in &mut self.parts {
            p.rewind()?;
        }
        self.cur = 0;
        Ok(())
    }

    fn next_snapshot(&mut self) -> Result<Option<Snapshot>> {
        while self.cur < self.parts.len() {
            if let Some(s) = self.parts[self.cur].next_snapshot()? {
                return Ok(Some(s));
            }
            self.cur += 1;
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_source_streams_and_rewinds() {
        let x = DMatrix::from_fn(2, 3, |i, j| (i + 10 * j) as f64);
        let mut src = MatrixSource::new(x.clone())
            .with_inputs(DMatrix::from_element(1, 3, 7.0))
            .unwrap();
        let mut n = 0;
        while let Some(s) = src.next_snapshot().unwrap() {
            assert_eq!(s.state, vec![x[(0, n)], x[(1, n)]]);
            assert_eq!(s.input, vec![7.0]);
            n += 1;
        }
        assert_eq!(n, 3);
        src.rewind().unwrap();
        assert!(src.next_snapshot().unwrap().is_some());
    }

    #[test]
    fn chain_offsets_segments() {
        let a = MatrixSource::new(DMatrix::zeros(2, 3));
        let b = MatrixSource::new(DMatrix::from_element(2, 2, 1.0));
        let mut c = ChainSource::new(vec![Box::new(a), Box::new(b)]).unwrap();
        assert_eq!(c.len(), 5);
        assert_eq!(c.segments(), vec![vec![0, 1, 2], vec![3, 4]]);
        let states: Vec<f64> = std::iter::from_fn(|| c.next_snapshot().unwrap())
            .map(|s| s.state[0])
            .collect();
        assert_eq!(states, vec![0.0, 0.0, 0.0, 1.0, 1.0]);
    }
}
