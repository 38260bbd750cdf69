use nalgebra::{DMatrix, DVector};

use super::Regularizer;
use crate::error::{Error, Result};

/// Gain and a-priori error of one recursive step; `Ω` moved by `g ξᵀ`.
#[derive(Clone, Debug)]
pub struct RlsStep {
    pub gain: DVector<f64>,
    pub apriori_error: DVector<f64>,
}

/// Growing-window recursive least squares on the inverse correlation matrix.
#[derive(Clone, Debug)]
pub struct Rls {
    p: DMatrix<f64>,
    o: DMatrix<f64>,
    k: usize,
}

impl Rls {
    /// `P₀ = Γ⁻¹`, `Ω₀ = 0` with `r` right-hand-side columns.
    pub fn new(reg: &Regularizer, r: usize) -> Self {
        let d = reg.dim();
        let p = DMatrix::from_fn(
            d,
            d,
            |i, j| if i == j { 1.0 / reg.diagonal()[i] } else { 0.0 },
        );
        Self {
            p,
            o: DMatrix::zeros(d, r),
            k: 0,
        }
    }

    pub fn rows_seen(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.o
    }

    pub fn into_operator(self) -> DMatrix<f64> {
        self.o
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
        let dv = DVector::from_column_slice(d_row);
        let pd = &self.p * &dv;
        // 1 + dᵀPd ≥ 1 in exact arithmetic. Once rounding has cost P its
        // definiteness the denominator can drop below 1 or go negative; the
        // update is still applied, as the recursion prescribes, and shows up
        // as a spike in the operator error.
        let denom = 1.0 + dv.dot(&pd);
        if !denom.is_finite() || denom == 0.0 {
            return Err(Error::NonfiniteUpdate { row: self.k });
        }
        let c = 1.0 / denom;
        let gain = &pd * c;
        self.p.ger(-c, &pd, &pd, 1.0);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let s = 0.5 * (self.p[(i, j)] + self.p[(j, i)]);
                self.p[(i, j)] = s;
                self.p[(j, i)] = s;
            }
        }
        // A-priori error uses Ω before this row's correction.
        let xi = DVector::from_column_slice(r_row) - self.o.tr_mul(&dv);
        self.o.ger(1.0, &gain, &xi, 1.0);
        self.k += 1;
        Ok(RlsStep {
            gain,
            apriori_error: xi,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_state_inverts_gamma() {
        let rls = Rls::new(&Regularizer::blocks(2.0, 2, 8.0, 1).unwrap(), 1);
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.5, 0.125]));
        assert_eq!(rls.p(), &expect);
        let rls = Rls::new(&Regularizer::uniform(1e-9, 3).unwrap(), 1);
        assert!((rls.p()[(0, 0)] - 1e9).abs() < 1e-6);
    }

    #[test]
    fn single_row_closed_form() {
        let mut rls = Rls::new(&Regularizer::uniform(1e-9, 2).unwrap(), 1);
        rls.update(&[1.0, 0.0], &[2.0]).unwrap();
        assert!((rls.operator()[(0, 0)] - 2.0 / (1.0 + 1e-9)).abs() < 1e-15);
        assert_eq!(rls.operator()[(1, 0)], 0.0);
    }

    #[test]
    fn zero_row_only_advances_count() {
        let mut rls = Rls::new(&Regularizer::uniform(1.0, 2).unwrap(), 1);
        rls.update(&[1.0, 2.0], &[1.0]).unwrap();
        let (p, o) = (rls.p().clone(), rls.operator().clone());
        rls.update(&[0.0, 0.0], &[5.0]).unwrap();
        assert_eq!(rls.p(), &p);
        assert_eq!(rls.operator(), &o);
        assert_eq!(rls.rows_seen(), 2);
    }
}
