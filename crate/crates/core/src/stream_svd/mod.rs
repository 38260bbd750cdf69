//! One-pass low-rank factorizations of a snapshot matrix whose columns
//! arrive one at a time.

mod baker;
mod sketchy;
mod sparse_sign;

pub use baker::BakerIsvd;
pub use sketchy::{sketch_sizes, sketchy_error_bound, sketchy_error_bound_at, SketchySvd};
pub use sparse_sign::{SparseSignMap, SparseSignMatrix};

use nalgebra::{DMatrix, DVector};

use crate::linalg::HouseholderQr;

/// `X ≈ V diag(S) Wᵀ` with orthonormal `V` (`n × rank`) and `W` (`K × rank`).
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    pub v: DMatrix<f64>,
    pub s: DVector<f64>,
    /// Absent when the producer was asked not to track right singular vectors.
    pub w: Option<DMatrix<f64>>,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Leading `r` triplets.
    pub fn truncate(&self, r: usize) -> TruncatedSvd {
        let r = r.min(self.rank());
        TruncatedSvd {
            v: self.v.columns(0, r).into_owned(),
            s: self.s.rows(0, r).into_owned(),
            w: self.w.as_ref().map(|w| w.columns(0, r).into_owned()),
        }
    }

    /// Dense `V diag(S) Wᵀ`; panics when `W` was not tracked.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let w = self.w.as_ref().expect("right singular vectors not tracked");
        let mut vs = self.v.clone();
        for (j, &sj) in self.s.iter().enumerate() {
            vs.column_mut(j).scale_mut(sj);
        }
        vs * w.transpose()
    }

    /// Reduced snapshots `diag(S) Wᵀ`, one column per snapshot.
    pub fn reduced_snapshots(&self) -> DMatrix<f64> {
        let w = self.w.as_ref().expect("right singular vectors not tracked");
        let mut x = w.transpose();
        for (i, &si) in self.s.iter().enumerate() {
            x.row_mut(i).scale_mut(si);
        }
        x
    }
}

/// Dense rank-`r` SVD of an in-memory snapshot matrix, the batch baseline.
/// Wide matrices go through a QR of `Xᵀ` so the inner SVD is `n × n`.
pub fn batch_svd(x: &DMatrix<f64>, r: usize) -> TruncatedSvd {
    let (n, k) = x.shape();
    let full = if k > n {
        let qr = HouseholderQr::new(x.transpose());
        let rt = qr.r().transpose();
        let q = qr.into_thin_q();
        let svd = rt.svd(true, true);
        let w = q * svd.v_t.expect("requested").transpose();
        TruncatedSvd {
            v: svd.u.expect("requested"),
            s: svd.singular_values,
            w: Some(w),
        }
    } else {
        let svd = x.clone().svd(true, true);
        TruncatedSvd {
            v: svd.u.expect("requested"),
            s: svd.singular_values,
            w: Some(svd.v_t.expect("requested").transpose()),
        }
    };
    full.truncate(r)
}
