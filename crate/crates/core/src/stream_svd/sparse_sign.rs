use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Recipe for a sparse sign map: every column has exactly `zeta` nonzeros
/// of value `±1/√zeta` at distinct rows.
///
/// Column `c` depends only on `(seed, tag, c)`, so columns can be drawn in
/// any order, or regenerated on demand instead of stored.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SparseSignMap {
    pub rows: usize,
    pub cols: usize,
    pub zeta: usize,
    seed: u64,
    tag: u8,
}

impl SparseSignMap {
    pub fn new(rows: usize, cols: usize, zeta: usize, seed: u64, tag: u8) -> Self {
        assert!(zeta >= 1 && zeta <= rows, "need 1 <= zeta <= rows");
        Self {
            rows,
            cols,
            zeta,
            seed,
            tag,
        }
    }

    pub fn scale(&self) -> f64 {
        1.0 / (self.zeta as f64).sqrt()
    }

    /// Row indices and signed values of column `c`, written into `out`.
    pub fn column_into(&self, c: usize, out: &mut Vec<(u32, f64)>) {
        debug_assert!(c < self.cols);
        out.clear();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((self.tag as u64) << 56) | c as u64);
        let a = self.scale();
        for row in index::sample(&mut rng, self.rows, self.zeta) {
            let v = if rng.gen::<bool>() { a } else { -a };
            out.push((row as u32, v));
        }
    }

    pub fn materialize(&self) -> SparseSignMatrix {
        let mut index = Vec::with_capacity(self.cols * self.zeta);
        let mut negative = Vec::with_capacity(self.cols * self.zeta);
        let mut buf = Vec::with_capacity(self.zeta);
        for c in 0..self.cols {
            self.column_into(c, &mut buf);
            for &(i, v) in &buf {
                index.push(i);
                negative.push(v < 0.0);
            }
        }
        SparseSignMatrix {
            rows: self.rows,
            cols: self.cols,
            zeta: self.zeta,
            index,
            negative,
        }
    }
}

/// Column-compressed sparse sign matrix with a fixed nonzero count per column.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSignMatrix {
    pub rows: usize,
    pub cols: usize,
    pub zeta: usize,
    index: Vec<u32>,
    negative: Vec<bool>,
}

impl SparseSignMatrix {
    fn value(&self, k: usize) -> f64 {
        let a = 1.0 / (self.zeta as f64).sqrt();
        if self.negative[k] {
            -a
        } else {
            a
        }
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let base = c * self.zeta;
        (base..base + self.zeta).map(move |k| (self.index[k] as usize, self.value(k)))
    }

    /// `y = M x` in `O(cols · zeta)`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for (c, &xc) in x.iter().enumerate() {
            if xc == 0.0 {
                continue;
            }
            for (i, v) in self.column(c) {
                y[i] += v * xc;
            }
        }
        y
    }

    /// `M A` for a dense `A` with `cols` rows.
    pub fn mul_dense(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(a.nrows(), self.cols);
        let mut out = DMatrix::zeros(self.rows, a.ncols());
        for j in 0..a.ncols() {
            for c in 0..self.cols {
                let acj = a[(c, j)];
                if acj == 0.0 {
                    continue;
                }
                for (i, v) in self.column(c) {
                    out[(i, j)] += v * acj;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for c in 0..self.cols {
            for (i, v) in self.column(c) {
                m[(i, c)] = v;
            }
        }
        m
    }

    /// Stored entries, counting one index and one sign flag per nonzero.
    pub fn nnz(&self) -> usize {
        self.index.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_have_zeta_distinct_scaled_entries() {
        let m = SparseSignMap::new(9, 40, 8, 7, 1).materialize();
        let a = 1.0 / 8f64.sqrt();
        for c in 0..m.cols {
            let mut rows: Vec<usize> = m.column(c).map(|(i, _)| i).collect();
            assert!(m.column(c).all(|(_, v)| v == a || v == -a));
            rows.sort_unstable();
            rows.dedup();
            assert_eq!(rows.len(), 8);
        }
    }

    #[test]
    fn deterministic_per_seed_and_tag() {
        let a = SparseSignMap::new(19, 30, 8, 42, 2).materialize();
        let b = SparseSignMap::new(19, 30, 8, 42, 2).materialize();
        let c = SparseSignMap::new(19, 30, 8, 42, 3).materialize();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn products_match_dense_expansion() {
        let m = SparseSignMap::new(11, 25, 5, 3, 0).materialize();
        let x: Vec<f64> = (0..25).map(|i| (i as f64 * 0.37).sin()).collect();
        let dense = m.to_dense();
        let y = m.mul_vec(&x);
        let yd = &dense * nalgebra::DVector::from_column_slice(&x);
        for i in 0..11 {
            assert!((y[i] - yd[i]).abs() < 1e-14);
        }
        let a = DMatrix::from_fn(25, 3, |i, j| ((i + 2 * j) as f64).cos());
        assert!((m.mul_dense(&a) - &dense * &a).norm() < 1e-13);
    }
}
