use nalgebra::DMatrix;

/// Compressed sparse rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; nrows + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in t {
            assert!(i < nrows && j < ncols, "triplet out of bounds");
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            cols.push(j);
            vals.push(v);
            row_ptr[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `A M` for dense `M`.
    pub fn mul_dense(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, m.ncols());
        for c in 0..m.ncols() {
            for i in 0..self.nrows {
                out[(i, c)] = self.row(i).map(|(j, v)| v * m[(j, c)]).sum();
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }
}

/// Sparse `A2` as entries `(i, j, k, c)`, each contributing `c x_j x_k` to
/// row `i`. Off-diagonal pairs are stored symmetrized: `(i, j, k, c/2)` and
/// `(i, k, j, c/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticOperator {
    n: usize,
    entries: Vec<(u32, u32, u32, f64)>,
}

impl QuadraticOperator {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Adds `c x_j x_k` to row `i`.
    pub fn add(&mut self, i: usize, j: usize, k: usize, c: f64) {
        let (i, j, k) = (i as u32, j as u32, k as u32);
        if j == k {
            self.entries.push((i, j, k, c));
        } else {
            self.entries.push((i, j, k, 0.5 * c));
            self.entries.push((i, k, j, 0.5 * c));
        }
    }

    pub fn entries(&self) -> &[(u32, u32, u32, f64)] {
        &self.entries
    }

    /// `f += A2 (x ⊗ x)`.
    pub fn accumulate(&self, x: &[f64], f: &mut [f64]) {
        for &(i, j, k, c) in &self.entries {
            f[i as usize] += c * x[j as usize] * x[k as usize];
        }
    }

    /// `f += A2 (x ⊗ v + v ⊗ x)`, the derivative of `A2 (x ⊗ x)` along `v`.
    pub fn accumulate_jvp(&self, x: &[f64], v: &[f64], f: &mut [f64]) {
        for &(i, j, k, c) in &self.entries {
            let (j, k) = (j as usize, k as usize);
            f[i as usize] += c * (x[j] * v[k] + v[j] * x[k]);
        }
    }

    /// Dense `n × n²` matrix, column `j n + k`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut d = DMatrix::zeros(n, n * n);
        for &(i, j, k, c) in &self.entries {
            d[(i as usize, j as usize * n + k as usize)] += c;
        }
        d
    }
}

/// LU factors of a tridiagonal matrix, for repeated solves.
#[derive(Clone, Debug)]
pub struct TridiagonalLu {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl TridiagonalLu {
    /// `sub[i]` is entry `(i+1, i)`, `sup[i]` is entry `(i, i+1)`.
    pub fn new(sub: &[f64], diag: &[f64], sup: &[f64]) -> Self {
        let n = diag.len();
        assert!(sub.len() + 1 == n && sup.len() + 1 == n);
        let mut d = diag.to_vec();
        let mut l = vec![0.0; n.saturating_sub(1)];
        for i in 1..n {
            l[i - 1] = sub[i - 1] / d[i - 1];
            d[i] -= l[i - 1] * sup[i - 1];
        }
        Self {
            lower: l,
            diag: d,
            upper: sup.to_vec(),
        }
    }

    /// Factors the tridiagonal part of a CSR matrix.
    pub fn from_csr_shifted(a: &CsrMatrix, alpha: f64, beta: f64) -> Self {
        // Factors alpha I + beta A.
        let n = a.nrows();
        let diag: Vec<f64> = (0..n).map(|i| alpha + beta * a.get(i, i)).collect();
        let sub: Vec<f64> = (1..n).map(|i| beta * a.get(i, i - 1)).collect();
        let sup: Vec<f64> = (0..n - 1).map(|i| beta * a.get(i, i + 1)).collect();
        Self::new(&sub, &diag, &sup)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.diag.len();
        for i in 1..n {
            b[i] -= self.lower[i - 1] * b[i - 1];
        }
        b[n - 1] /= self.diag[n - 1];
        for i in (0..n - 1).rev() {
            b[i] = (b[i] - self.upper[i] * b[i + 1]) / self.diag[i];
        }
    }
}
