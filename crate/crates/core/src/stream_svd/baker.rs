use nalgebra::{DMatrix, DVector};

use super::TruncatedSvd;
use crate::error::{Error, Result};

/// Snapshots with norm below this never initialize the factorization.
const ZERO_SNAPSHOT: f64 = 1e-14;
/// Residuals below this fraction of `‖x‖` carry no usable direction.
const DEGENERATE_RESIDUAL: f64 = 1e-12;
/// Rows per block of the lazily updated right factor.
const W_CHUNK: usize = 64;

/// Incremental truncated SVD with one rank-one column append per snapshot.
///
/// Each update costs `O(n r + r³)` and keeps only `V`, `S` and, when
/// requested, the right factor `W` (which grows by one row per snapshot).
#[derive(Clone, Debug)]
pub struct BakerIsvd {
    n: usize,
    r_max: usize,
    v: DMatrix<f64>,
    s: DVector<f64>,
    k: usize,
    leading_zeros: usize,
    w: Option<RightFactor>,
    track_w: bool,
}

impl BakerIsvd {
    /// Empty factorization; zero snapshots are absorbed until the first
    /// nonzero one arrives.
    pub fn new(n: usize, r_max: usize, track_w: bool) -> Self {
        assert!(n >= 1 && r_max >= 1, "need n >= 1 and r >= 1");
        Self {
            n,
            r_max,
            v: DMatrix::zeros(n, 0),
            s: DVector::zeros(0),
            k: 0,
            leading_zeros: 0,
            w: None,
            track_w,
        }
    }

    /// Factorization of the single column `x1`.
    pub fn from_first(x1: &[f64], r_max: usize, track_w: bool) -> Result<Self> {
        let norm = DVector::from_column_slice(x1).norm();
        if norm < ZERO_SNAPSHOT {
            return Err(Error::ZeroSnapshot { norm });
        }
        let mut svd = Self::new(x1.len(), r_max, track_w);
        svd.push(x1)?;
        Ok(svd)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r_max(&self) -> usize {
        self.r_max
    }

    /// Snapshots consumed so far.
    pub fn count(&self) -> usize {
        self.k
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn s(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        let x = DVector::from_column_slice(x);
        if self.s.is_empty() {
            let norm = x.norm();
            self.k += 1;
            if norm < ZERO_SNAPSHOT {
                self.leading_zeros += 1;
                return Ok(());
            }
            self.v = DMatrix::from_column_slice(self.n, 1, (x / norm).as_slice());
            self.s = DVector::from_element(1, norm);
            if self.track_w {
                self.w = Some(RightFactor::new());
            }
            return Ok(());
        }
        self.update(x);
        self.k += 1;
        Ok(())
    }

    fn update(&mut self, x: DVector<f64>) {
        let rk = self.s.len();
        let mut q = self.v.tr_mul(&x);
        let mut resid = &x - &self.v * &q;
        // Second Gram-Schmidt pass: one pass loses orthogonality when x is
        // nearly inside span(V).
        let q2 = self.v.tr_mul(&resid);
        resid -= &self.v * &q2;
        q += q2;
        let p = resid.norm();

        let ext = usize::from(rk < self.n);
        let e = if ext == 1 {
            if p > DEGENERATE_RESIDUAL * x.norm() && p > 0.0 {
                Some(resid / p)
            } else {
                Some(self.orthogonal_completion())
            }
        } else {
            None
        };

        let mut j = DMatrix::zeros(rk + ext, rk + 1);
        for i in 0..rk {
            j[(i, i)] = self.s[i];
            j[(i, rk)] = q[i];
        }
        if ext == 1 {
            j[(rk, rk)] = p;
        }
        let svd = j.svd(true, true);
        let u = svd.u.expect("requested U");
        let vt = svd.v_t.expect("requested Vᵀ");
        let rk_new = (rk + ext).min(self.r_max);

        let mut v_new = &self.v * u.view((0, 0), (rk, rk_new));
        if let Some(e) = e {
            v_new.ger(1.0, &e, &u.row(rk).columns(0, rk_new).transpose(), 1.0);
        }
        self.v = v_new;
        self.s = svd.singular_values.rows(0, rk_new).into_owned();

        if let Some(w) = self.w.as_mut() {
            // Right singular vectors of J, as columns.
            let top = vt.view((0, 0), (rk_new, rk)).transpose();
            let row = vt.view((0, rk), (rk_new, 1)).transpose();
            w.apply(&top, &row);
        }
    }

    /// Unit vector orthogonal to `span(V)`, built from the canonical axis
    /// least represented in `V`.
    fn orthogonal_completion(&self) -> DVector<f64> {
        let axis = (0..self.n)
            .min_by(|&a, &b| {
                let na = self.v.row(a).norm_squared();
                let nb = self.v.row(b).norm_squared();
                na.partial_cmp(&nb).unwrap()
            })
            .unwrap();
        let mut e = DVector::zeros(self.n);
        e[axis] = 1.0;
        for _ in 0..2 {
            let c = self.v.tr_mul(&e);
            e -= &self.v * c;
        }
        let norm = e.norm();
        e / norm
    }

    /// Current factorization. `W` is assembled here when tracked.
    pub fn snapshot(&self) -> TruncatedSvd {
        TruncatedSvd {
            v: self.v.clone(),
            s: self.s.clone(),
            w: self.materialize_w(),
        }
    }

    pub fn into_svd(self) -> TruncatedSvd {
        let w = self.materialize_w();
        TruncatedSvd {
            v: self.v,
            s: self.s,
            w,
        }
    }

    fn materialize_w(&self) -> Option<DMatrix<f64>> {
        if !self.track_w {
            return None;
        }
        let rk = self.s.len();
        match &self.w {
            None => Some(DMatrix::zeros(self.k, rk)),
            Some(w) => {
                let body = w.materialize();
                let mut out = DMatrix::zeros(self.leading_zeros + body.nrows(), rk);
                out.view_mut((self.leading_zeros, 0), body.shape())
                    .copy_from(&body);
                Some(out)
            }
        }
    }
}

/// Right factor under the recurrence `W ← [W T; w]`.
///
/// Rows are grouped in blocks. Only the newest block is kept current; each
/// closed block remembers the product of the transforms applied between its
/// closing and the next block's closing, and the transforms since the last
/// closing sit in `acc`. Per update this costs `O(L r² + r³)` instead of
/// `O(k r²)`.
#[derive(Clone, Debug)]
struct RightFactor {
    closed: Vec<DMatrix<f64>>,
    /// `links[j]` carries block `j` to the frame in which block `j + 1` closed.
    links: Vec<DMatrix<f64>>,
    acc: DMatrix<f64>,
    open: DMatrix<f64>,
}

impl RightFactor {
    fn new() -> Self {
        Self {
            closed: Vec::new(),
            links: Vec::new(),
            acc: DMatrix::identity(1, 1),
            open: DMatrix::from_element(1, 1, 1.0),
        }
    }

    fn apply(&mut self, t: &DMatrix<f64>, row: &DMatrix<f64>) {
        let rows = self.open.nrows();
        let mut open = DMatrix::zeros(rows + 1, t.ncols());
        open.view_mut((0, 0), (rows, t.ncols()))
            .copy_from(&(&self.open * t));
        open.view_mut((rows, 0), (1, t.ncols())).copy_from(row);
        self.open = open;
        if !self.closed.is_empty() {
            self.acc = &self.acc * t;
        }
        if self.open.nrows() == W_CHUNK {
            let width = t.ncols();
            let block = std::mem::replace(&mut self.open, DMatrix::zeros(0, width));
            if !self.closed.is_empty() {
                let link = std::mem::replace(&mut self.acc, DMatrix::identity(width, width));
                self.links.push(link);
            } else {
                self.acc = DMatrix::identity(width, width);
            }
            self.closed.push(block);
        }
    }

    fn materialize(&self) -> DMatrix<f64> {
        let width = self.open.ncols();
        let total: usize = self.closed.iter().map(|b| b.nrows()).sum::<usize>() + self.open.nrows();
        let mut out = DMatrix::zeros(total, width);
        let mut end = total;
        let open_rows = self.open.nrows();
        out.view_mut((end - open_rows, 0), (open_rows, width))
            .copy_from(&self.open);
        end -= open_rows;
        let mut carry = self.acc.clone();
        for j in (0..self.closed.len()).rev() {
            let block = &self.closed[j] * &carry;
            out.view_mut((end - block.nrows(), 0), block.shape())
                .copy_from(&block);
            end -= block.nrows();
            if j > 0 {
                carry = &self.links[j - 1] * carry;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orthonormality_defect, singular_values};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn stream(x: &DMatrix<f64>, r: usize) -> BakerIsvd {
        let mut svd = BakerIsvd::new(x.nrows(), r, true);
        for c in x.column_iter() {
            svd.push(c.as_slice()).unwrap();
        }
        svd
    }

    #[test]
    fn init_normalizes() {
        let svd = BakerIsvd::from_first(&[3.0, 4.0, 0.0, 0.0], 2, true).unwrap();
        let t = svd.snapshot();
        assert_eq!(t.v.as_slice(), &[0.6, 0.8, 0.0, 0.0]);
        assert_eq!(t.s[0], 5.0);
        assert_eq!(t.w.unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn zero_first_snapshot_is_rejected_or_deferred() {
        assert!(matches!(
            BakerIsvd::from_first(&[0.0; 3], 2, false),
            Err(Error::ZeroSnapshot { .. })
        ));
        let x = DMatrix::from_column_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 0.0, 1.0, 1.0]);
        let t = stream(&x, 3).into_svd();
        assert!((t.reconstruct() - &x).norm() < 1e-13);
    }

    #[test]
    fn orthogonal_and_collinear_updates() {
        let mut svd = BakerIsvd::from_first(&[1.0, 0.0, 0.0], 3, true).unwrap();
        svd.push(&[0.0, 1.0, 0.0]).unwrap();
        assert!((svd.s()[0] - 1.0).abs() < 1e-15 && (svd.s()[1] - 1.0).abs() < 1e-15);
        assert!(svd.v().row(2).norm() < 1e-15);

        let mut svd = BakerIsvd::from_first(&[1.0, 0.0, 0.0], 3, true).unwrap();
        svd.push(&[2.0, 0.0, 0.0]).unwrap();
        assert!((svd.s()[0] - 5f64.sqrt()).abs() < 1e-14);
        assert!(svd.s()[1] <= 1e-12);
        assert!(orthonormality_defect(svd.v()) < 1e-14);
    }

    #[test]
    fn full_rank_stream_matches_dense_svd() {
        let x = random(8, 10, 11);
        let t = stream(&x, 8).into_svd();
        let sv = singular_values(&x);
        for i in 0..8 {
            assert!((t.s[i] - sv[i]).abs() < 1e-10);
        }
        assert!(orthonormality_defect(t.w.as_ref().unwrap()) < 1e-12);
        assert!((t.reconstruct() - &x).norm() < 1e-12);
    }

    #[test]
    fn chunked_right_factor_survives_many_blocks() {
        let x = random(6, 3 * W_CHUNK + 17, 5);
        let t = stream(&x, 6).into_svd();
        let w = t.w.as_ref().unwrap();
        assert_eq!(w.nrows(), x.ncols());
        assert!(orthonormality_defect(w) < 1e-12);
        assert!((t.reconstruct() - &x).norm() < 1e-11 * x.norm());
    }

    #[test]
    fn truncation_bounds_rank() {
        let x = random(12, 30, 9);
        let svd = stream(&x, 4);
        assert_eq!(svd.rank(), 4);
        assert!(orthonormality_defect(svd.v()) < 1e-12);
    }
}
