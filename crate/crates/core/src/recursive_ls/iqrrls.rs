use nalgebra::{DMatrix, DVector};

use super::rls::RlsStep;
use super::Regularizer;
use crate::error::{Error, Result};

/// Inverse-QR recursive least squares.
///
/// Propagates the upper-triangular factor `U` with `P = Uᵀ U` instead of
/// `P` itself. Each row rotates the pre-array
///
/// ```text
/// [ 1     0 ]
/// [ U dᵀ  U ]
/// ```
///
/// back to upper-triangular form. Row 0 collects `[c^{-1/2}, c^{-1/2} gᵀ]`
/// and the lower block becomes the next `U`. Rotations pair row 0 with rows
/// `d, d-1, …, 1`, so every rotated row keeps its leading zeros and one step
/// costs `O(d²)`.
///
/// `U` is stored packed by rows, so only `d(d+1)/2` floats are kept.
#[derive(Clone, Debug)]
pub struct SqrtRls {
    dim: usize,
    u: Vec<f64>,
    o: DMatrix<f64>,
    k: usize,
    flops: u64,
    work: Vec<f64>,
}

impl SqrtRls {
    /// `U₀ = Γ^{-1/2}`, `Ω₀ = 0`.
    pub fn new(reg: &Regularizer, r: usize) -> Self {
        let dim = reg.dim();
        let mut u = vec![0.0; dim * (dim + 1) / 2];
        for (i, g) in reg.diagonal().iter().enumerate() {
            u[packed(dim, i, i)] = 1.0 / g.sqrt();
        }
        Self {
            dim,
            u,
            o: DMatrix::zeros(dim, r),
            k: 0,
            flops: 0,
            work: vec![0.0; dim + 1],
        }
    }

    pub fn rows_seen(&self) -> usize {
        self.k
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.o
    }

    pub fn into_operator(self) -> DMatrix<f64> {
        self.o
    }

    /// Floating-point multiplies and adds spent in updates so far.
    pub fn flops(&self) -> u64 {
        self.flops
    }

    /// Dense copy of the factor `U`.
    pub fn factor(&self) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_fn(
            d,
            d,
            |i, j| if j >= i { self.u[packed(d, i, j)] } else { 0.0 },
        )
    }

    /// `P = Uᵀ U`.
    pub fn p(&self) -> DMatrix<f64> {
        let u = self.factor();
        u.tr_mul(&u)
    }

    pub fn update(&mut self, d_row: &[f64], r_row: &[f64]) -> Result<RlsStep> {
        let (dim, r) = self.o.shape();
        if d_row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: d_row.len(),
            });
        }
        if r_row.len() != r {
            return Err(Error::DimensionMismatch {
                expected: r,
                found: r_row.len(),
            });
        }

        // a = U dᵀ
        let mut a = vec![0.0; dim];
        for (i, ai) in a.iter_mut().enumerate() {
            let row = &self.u[packed(dim, i, i)..packed(dim, i, dim - 1) + 1];
            *ai = row.iter().zip(&d_row[i..]).map(|(x, y)| x * y).sum();
        }
        self.flops += (dim * (dim + 1)) as u64;

        // Work row: w[0] is the leading column, w[1 + j] pairs with column j of U.
        let w = &mut self.work;
        w.iter_mut().for_each(|x| *x = 0.0);
        w[0] = 1.0;
        for i in (0..dim).rev() {
            let ai = a[i];
            if ai == 0.0 {
                continue;
            }
            let rho = w[0].hypot(ai);
            let (c, s) = (w[0] / rho, ai / rho);
            w[0] = rho;
            let base = packed(dim, i, i);
            for j in i..dim {
                let uij = self.u[base + j - i];
                let wj = w[1 + j];
                w[1 + j] = c * wj + s * uij;
                self.u[base + j - i] = -s * wj + c * uij;
            }
            self.flops += 6 * (dim - i) as u64 + 6;
        }

        let beta = w[0];
        if !beta.is_finite() || beta <= 0.0 || w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonfiniteUpdate { row: self.k });
        }
        let gain = DVector::from_iterator(dim, w[1..].iter().map(|x| x / beta));
        let dv = DVector::from_column_slice(d_row);
        let xi = DVector::from_column_slice(r_row) - self.o.tr_mul(&dv);
        self.o.ger(1.0, &gain, &xi, 1.0);
        self.flops += (2 * dim * r + dim) as u64;
        self.k += 1;
        Ok(RlsStep {
            gain,
            apriori_error: xi,
        })
    }
}

fn packed(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(j >= i);
    i * d - (i * i - i) / 2 + j - i
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_index_is_row_major_upper() {
        let d = 4;
        let mut expect = 0;
        for i in 0..d {
            for j in i..d {
                assert_eq!(packed(d, i, j), expect);
                expect += 1;
            }
        }
    }

    #[test]
    fn initial_factor_is_diagonal_root() {
        let s = SqrtRls::new(&Regularizer::uniform(4.0, 3).unwrap(), 1);
        assert_eq!(s.factor(), DMatrix::identity(3, 3) * 0.5);
        let s = SqrtRls::new(&Regularizer::uniform(1e-9, 2).unwrap(), 1);
        assert!((s.factor()[(0, 0)] - 31622.776601683792).abs() < 1e-9);
    }

    #[test]
    fn zero_row_keeps_factor() {
        let mut s = SqrtRls::new(&Regularizer::uniform(1.0, 3).unwrap(), 1);
        s.update(&[1.0, -2.0, 0.5], &[1.0]).unwrap();
        let p = s.p();
        let o = s.operator().clone();
        s.update(&[0.0; 3], &[3.0]).unwrap();
        assert!((s.p() - p).norm() < 1e-12);
        assert_eq!(s.operator(), &o);
    }

    #[test]
    fn factor_stays_upper_triangular() {
        let mut s = SqrtRls::new(&Regularizer::uniform(0.5, 4).unwrap(), 2);
        for k in 0..10 {
            let x = k as f64;
            s.update(&[1.0, x.sin(), x.cos(), 0.1 * x], &[x, -x])
                .unwrap();
        }
        let u = s.factor();
        for i in 0..4 {
            for j in 0..i {
                assert_eq!(u[(i, j)], 0.0);
            }
        }
    }
}
