use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdScheme {
    /// `(x_{j+1} − x_j)/δt`, one row per snapshot except the last.
    Forward1,
    /// Fourth-order: centered in the interior, one-sided five-point at the
    /// two snapshots nearest each end. One row per snapshot.
    Central4,
}

impl FdScheme {
    pub fn width(self) -> usize {
        match self {
            FdScheme::Forward1 => 2,
            FdScheme::Central4 => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FdScheme::Forward1 => "forward1",
            FdScheme::Central4 => "central4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "forward1" => Some(FdScheme::Forward1),
            "central4" => Some(FdScheme::Central4),
            _ => None,
        }
    }

    /// Stencil for local row `j` of a segment of length `len`, as
    /// `(offset from segment start, weight × δt)`.
    fn stencil(self, j: usize, len: usize) -> Vec<(usize, f64)> {
        match self {
            FdScheme::Forward1 => vec![(j, -1.0), (j + 1, 1.0)],
            FdScheme::Central4 => {
                let (start, w): (usize, [f64; 5]) = if j == 0 {
                    (0, [-25.0, 48.0, -36.0, 16.0, -3.0])
                } else if j == 1 {
                    (0, [-3.0, -10.0, 18.0, -6.0, 1.0])
                } else if j + 2 == len {
                    (len - 5, [-1.0, 6.0, -18.0, 10.0, 3.0])
                } else if j + 1 == len {
                    (len - 5, [3.0, -16.0, 36.0, -48.0, 25.0])
                } else {
                    (j - 2, [1.0, -8.0, 0.0, 8.0, -1.0])
                };
                w.iter()
                    .enumerate()
                    .filter(|(_, &wi)| wi != 0.0)
                    .map(|(i, &wi)| (start + i, wi / 12.0))
                    .collect()
            }
        }
    }

    fn rows_for(self, len: usize) -> usize {
        match self {
            FdScheme::Forward1 => len.saturating_sub(1),
            FdScheme::Central4 => len,
        }
    }

    fn min_len(self) -> usize {
        match self {
            FdScheme::Forward1 => 2,
            FdScheme::Central4 => 5,
        }
    }
}

/// One regression row: the derivative at snapshot `at` from `stencil`.
#[derive(Clone, Debug, PartialEq)]
pub struct FdRow {
    pub at: usize,
    pub stencil: Vec<(usize, f64)>,
}

/// Difference operator `Δ` and selector `S` over a snapshot stream that may
/// hold several trajectories.
///
/// Each segment lists the global snapshot indices of one trajectory in time
/// order; segments may share indices (a common initial condition).
#[derive(Clone, Debug)]
pub struct FiniteDiffOp {
    pub scheme: FdScheme,
    pub dt: f64,
    rows: Vec<FdRow>,
}

impl FiniteDiffOp {
    pub fn new(scheme: FdScheme, dt: f64, segments: &[Vec<usize>]) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let mut rows = Vec::new();
        for seg in segments {
            if seg.len() < scheme.min_len() {
                return Err(Error::InvalidArgument(format!(
                    "{} needs segments of at least {} snapshots, got {}",
                    scheme.name(),
                    scheme.min_len(),
                    seg.len()
                )));
            }
            for j in 0..scheme.rows_for(seg.len()) {
                let stencil = scheme
                    .stencil(j, seg.len())
                    .into_iter()
                    .map(|(o, w)| (seg[o], w / dt))
                    .collect();
                rows.push(FdRow {
                    at: seg[j],
                    stencil,
                });
            }
        }
        Ok(Self { scheme, dt, rows })
    }

    /// Single contiguous trajectory `0..k`.
    pub fn contiguous(scheme: FdScheme, dt: f64, k: usize) -> Result<Self> {
        Self::new(scheme, dt, &[(0..k).collect()])
    }

    pub fn rows(&self) -> &[FdRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Restriction to rows whose stencils only touch snapshots `< k`.
    pub fn truncated(&self, k: usize) -> Self {
        let rows = self
            .rows
            .iter()
            .filter(|r| r.stencil.iter().all(|&(i, _)| i < k))
            .cloned()
            .collect();
        Self {
            scheme: self.scheme,
            dt: self.dt,
            rows,
        }
    }

    /// Dense `Δ` (`k × k̃`): column `c` holds the stencil of row `c`.
    pub fn delta_matrix(&self, k: usize) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(k, self.rows.len());
        for (c, row) in self.rows.iter().enumerate() {
            for &(i, w) in &row.stencil {
                d[(i, c)] += w;
            }
        }
        d
    }

    /// Dense selector `S` (`k × k̃`).
    pub fn selector_matrix(&self, k: usize) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(k, self.rows.len());
        for (c, row) in self.rows.iter().enumerate() {
            s[(row.at, c)] = 1.0;
        }
        s
    }

    /// Applies the stencils to the columns of `x` (one column per snapshot):
    /// returns `(X S, X Δ)`.
    pub fn apply(&self, x: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut sel = DMatrix::zeros(x.nrows(), self.rows.len());
        let mut der = DMatrix::zeros(x.nrows(), self.rows.len());
        for (c, row) in self.rows.iter().enumerate() {
            sel.column_mut(c).copy_from(&x.column(row.at));
            for &(i, w) in &row.stencil {
                der.column_mut(c).axpy(w, &x.column(i), 1.0);
            }
        }
        (sel, der)
    }
}

/// Sliding window that turns one trajectory's reduced states into
/// `(local index, state, derivative)` rows, buffering only the stencil width.
///
/// Rows come out in the same order as [`FiniteDiffOp`] lists them.
#[derive(Clone, Debug)]
pub struct FdWindow {
    scheme: FdScheme,
    dt: f64,
    buf: Vec<DVector<f64>>,
    seen: usize,
}

pub type FdSample = (usize, DVector<f64>, DVector<f64>);

impl FdWindow {
    pub fn new(scheme: FdScheme, dt: f64) -> Self {
        Self {
            scheme,
            dt,
            buf: Vec::with_capacity(scheme.width()),
            seen: 0,
        }
    }

    fn combine(&self, weights: &[(usize, f64)], first: usize) -> DVector<f64> {
        let mut d = DVector::zeros(self.buf[0].len());
        for &(o, w) in weights {
            d.axpy(w / self.dt, &self.buf[o - first], 1.0);
        }
        d
    }

    pub fn push(&mut self, x: DVector<f64>) -> Vec<FdSample> {
        let width = self.scheme.width();
        if self.buf.len() == width {
            self.buf.remove(0);
        }
        self.buf.push(x);
        let t = self.seen;
        self.seen += 1;
        let first = self.seen - self.buf.len();
        match self.scheme {
            FdScheme::Forward1 => {
                if t == 0 {
                    return Vec::new();
                }
                let j = t - 1;
                let d = self.combine(&self.scheme.stencil(j, usize::MAX), first);
                vec![(j, self.buf[0].clone(), d)]
            }
            FdScheme::Central4 => {
                let rows: Vec<usize> = match t {
                    0..=3 => Vec::new(),
                    4 => vec![0, 1, 2],
                    _ => vec![t - 2],
                };
                rows.into_iter()
                    .map(|j| {
                        let d = self.combine(&self.scheme.stencil(j, usize::MAX), first);
                        (j, self.buf[j - first].clone(), d)
                    })
                    .collect()
            }
        }
    }

    /// Ends the trajectory and emits the rows that needed its last snapshot.
    pub fn finish(&mut self) -> Result<Vec<FdSample>> {
        let len = self.seen;
        let out = if len < self.scheme.min_len() {
            Err(Error::InvalidArgument(format!(
                "{} needs segments of at least {} snapshots, got {}",
                self.scheme.name(),
                self.scheme.min_len(),
                len
            )))
        } else {
            match self.scheme {
                FdScheme::Forward1 => Ok(Vec::new()),
                FdScheme::Central4 => {
                    let first = len - 5;
                    Ok([len - 2, len - 1]
                        .into_iter()
                        .map(|j| {
                            let d = self.combine(&self.scheme.stencil(j, len), first);
                            (j, self.buf[j - first].clone(), d)
                        })
                        .collect())
                }
            }
        };
        self.buf.clear();
        self.seen = 0;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_matrix_is_banded_difference() {
        let op = FiniteDiffOp::contiguous(FdScheme::Forward1, 0.1, 5).unwrap();
        let d = op.delta_matrix(5);
        assert_eq!(d.shape(), (5, 4));
        for c in 0..4 {
            for i in 0..5 {
                let expect = if i == c {
                    -10.0
                } else if i == c + 1 {
                    10.0
                } else {
                    0.0
                };
                assert!((d[(i, c)] - expect).abs() < 1e-12);
            }
        }
        assert_eq!(op.selector_matrix(5), DMatrix::identity(5, 4));
    }

    #[test]
    fn constants_have_zero_derivative() {
        for scheme in [FdScheme::Forward1, FdScheme::Central4] {
            let op = FiniteDiffOp::contiguous(scheme, 0.01, 12).unwrap();
            let ones = DMatrix::from_element(1, 12, 3.0);
            assert!(op.apply(&ones).1.amax() <= 1e-12);
        }
    }

    #[test]
    fn central4_is_exact_on_quartics() {
        let dt = 0.1;
        let t: Vec<f64> = (0..9).map(|k| k as f64 * dt).collect();
        let x = DMatrix::from_fn(1, 9, |_, k| t[k].powi(4) - 2.0 * t[k].powi(3) + t[k]);
        let op = FiniteDiffOp::contiguous(FdScheme::Central4, dt, 9).unwrap();
        let (_, d) = op.apply(&x);
        for (c, row) in op.rows().iter().enumerate() {
            let tt = t[row.at];
            let exact = 4.0 * tt.powi(3) - 6.0 * tt.powi(2) + 1.0;
            assert!((d[c] - exact).abs() < 1e-11, "row {c}");
        }
    }

    #[test]
    fn window_reproduces_operator_rows() {
        for scheme in [FdScheme::Forward1, FdScheme::Central4] {
            let len = 9;
            let x = DMatrix::from_fn(2, len, |i, k| ((i + 1) as f64 * k as f64 * 0.3).sin());
            let op = FiniteDiffOp::contiguous(scheme, 0.05, len).unwrap();
            let (sel, der) = op.apply(&x);
            let mut w = FdWindow::new(scheme, 0.05);
            let mut got = Vec::new();
            for c in x.column_iter() {
                got.extend(w.push(c.into_owned()));
            }
            got.extend(w.finish().unwrap());
            assert_eq!(got.len(), op.len());
            for (c, (j, s, d)) in got.into_iter().enumerate() {
                assert_eq!(j, op.rows()[c].at);
                assert!((s - sel.column(c)).norm() < 1e-15);
                assert!((d - der.column(c)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn shared_initial_condition_segments() {
        let op =
            FiniteDiffOp::new(FdScheme::Forward1, 1.0, &[vec![0, 1, 2], vec![0, 3, 4]]).unwrap();
        assert_eq!(op.rows()[2].stencil, vec![(0, -1.0), (3, 1.0)]);
        assert_eq!(op.truncated(3).len(), 2);
    }
}
