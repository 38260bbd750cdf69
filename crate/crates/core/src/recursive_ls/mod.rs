//! Regularized operator least squares, solved in one shot or one data row
//! at a time.

mod iqrrls;
mod rls;

pub use iqrrls::SqrtRls;
pub use rls::{Rls, RlsStep};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::HouseholderQr;

/// Diagonal Tikhonov weights `Γ = diag(γ_1, …, γ_d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Regularizer {
    gamma: Vec<f64>,
}

impl Regularizer {
    pub fn from_diagonal(gamma: Vec<f64>) -> Result<Self> {
        if let Some(&g) = gamma.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
            return Err(Error::NonpositiveGamma(g));
        }
        Ok(Self { gamma })
    }

    pub fn uniform(gamma: f64, d: usize) -> Result<Self> {
        Self::from_diagonal(vec![gamma; d])
    }

    /// `diag(γ1 I_{d1}, γ2 I_{d2})`.
    pub fn blocks(gamma1: f64, d1: usize, gamma2: f64, d2: usize) -> Result<Self> {
        let mut g = vec![gamma1; d1];
        g.extend(std::iter::repeat_n(gamma2, d2));
        Self::from_diagonal(g)
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.gamma
    }

    pub fn min(&self) -> f64 {
        self.gamma.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// The `d × d` block `Γ^{1/2}` appended under the data matrix.
    pub fn sqrt_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| if i == j { self.gamma[i].sqrt() } else { 0.0 })
    }
}

/// `[D; Γ^{1/2}]` and `[R; 0]`.
pub fn augment(
    d: &DMatrix<f64>,
    r: &DMatrix<f64>,
    reg: &Regularizer,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if d.ncols() != reg.dim() {
        return Err(Error::DimensionMismatch {
            expected: reg.dim(),
            found: d.ncols(),
        });
    }
    if d.nrows() != r.nrows() {
        return Err(Error::DimensionMismatch {
            expected: d.nrows(),
            found: r.nrows(),
        });
    }
    let (k, dim) = d.shape();
    let mut dbar = DMatrix::zeros(k + dim, dim);
    dbar.view_mut((0, 0), (k, dim)).copy_from(d);
    for (i, g) in reg.diagonal().iter().enumerate() {
        dbar[(k + i, i)] = g.sqrt();
    }
    let mut rbar = DMatrix::zeros(k + dim, r.ncols());
    rbar.view_mut((0, 0), r.shape()).copy_from(r);
    Ok((dbar, rbar))
}

/// Minimizer of `‖R̄ − D̄ Ω‖_F` by column-pivoted Householder QR.
///
/// The rank cut is `max(m, n) · ε · |R₀₀|`; anything below it means the
/// regularization block is missing or negligible.
pub fn batch_ls(dbar: &DMatrix<f64>, rbar: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, d) = dbar.shape();
    if rbar.nrows() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: rbar.nrows(),
        });
    }
    let qr = HouseholderQr::with_pivoting(dbar.clone());
    let rank = qr.rank(m.max(d) as f64 * f64::EPSILON);
    if rank < d {
        return Err(Error::RankDeficient { rank, cols: d });
    }
    Ok(qr.solve(rbar, d))
}

/// `Ω_batch − Ω_k`.
pub fn streaming_operator_error(
    o_batch: &DMatrix<f64>,
    o_k: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if o_batch.shape() != o_k.shape() {
        return Err(Error::ShapeMismatch(format!(
            "batch operator is {:?}, streaming operator is {:?}",
            o_batch.shape(),
            o_k.shape()
        )));
    }
    Ok(o_batch - o_k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn regularizer_validation_and_blocks() {
        assert!(matches!(
            Regularizer::uniform(0.0, 3),
            Err(Error::NonpositiveGamma(_))
        ));
        assert!(matches!(
            Regularizer::blocks(1.0, 2, -1.0, 1),
            Err(Error::NonpositiveGamma(_))
        ));
        let reg = Regularizer::blocks(2.0, 2, 8.0, 1).unwrap();
        assert_eq!(reg.diagonal(), &[2.0, 2.0, 8.0]);
    }

    #[test]
    fn identity_system_returns_rhs() {
        let r = random(4, 2, 1);
        let o = batch_ls(&DMatrix::identity(4, 4), &r).unwrap();
        assert!((o - r).norm() < 1e-15);
    }

    #[test]
    fn matches_normal_equations() {
        let d = random(30, 5, 2);
        let r = random(30, 3, 3);
        let reg = Regularizer::uniform(0.1, 5).unwrap();
        let (dbar, rbar) = augment(&d, &r, &reg).unwrap();
        let o = batch_ls(&dbar, &rbar).unwrap();
        let g = DMatrix::from_diagonal(&nalgebra::DVector::from_element(5, 0.1));
        let oracle = (d.tr_mul(&d) + g).try_inverse().unwrap() * d.tr_mul(&r);
        assert!((o - oracle).norm() < 1e-10);
    }

    #[test]
    fn heavier_regularization_shrinks() {
        let d = random(20, 4, 4);
        let r = random(20, 2, 5);
        let mut last = f64::INFINITY;
        for g in [1e-3, 1e-1, 1e1, 1e3, 1e6] {
            let (dbar, rbar) = augment(&d, &r, &Regularizer::uniform(g, 4).unwrap()).unwrap();
            let n = batch_ls(&dbar, &rbar).unwrap().norm();
            assert!(n < last);
            last = n;
        }
        assert!(last < 1e-4);
    }

    #[test]
    fn missing_regularization_is_detected() {
        let mut d = random(10, 3, 6);
        let c0 = d.column(0).into_owned();
        d.set_column(2, &c0);
        let r = random(10, 1, 7);
        assert!(matches!(
            batch_ls(&d, &r),
            Err(Error::RankDeficient { rank: 2, cols: 3 })
        ));
    }

    #[test]
    fn operator_error_shapes() {
        let a = random(3, 2, 8);
        assert_eq!(streaming_operator_error(&a, &a).unwrap().norm(), 0.0);
        assert!(streaming_operator_error(&a, &random(2, 3, 9)).is_err());
    }
}
