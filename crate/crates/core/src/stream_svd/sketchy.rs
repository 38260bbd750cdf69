use nalgebra::{DMatrix, DVector};

use super::sparse_sign::{SparseSignMap, SparseSignMatrix};
use super::TruncatedSvd;
use crate::error::{Error, Result};
use crate::linalg::{pinv_solve, HouseholderQr};

const RANK_TOL: f64 = 1e-12;

const TAG_UPSILON: u8 = 0;
const TAG_OMEGA: u8 = 1;
const TAG_XI: u8 = 2;
const TAG_PSI: u8 = 3;

/// Default sketch sizes `(q, s, zeta)` for target rank `r`.
pub fn sketch_sizes(r: usize) -> (usize, usize, usize) {
    let q = 4 * r + 1;
    let s = 2 * q + 1;
    (q, s, q.min(8))
}

/// Bound on `E‖X − X̂‖_F²` for the untruncated rank-`q` sketch
/// approximation at a fixed `rho < q − 1`, given the singular values of `X`.
/// The tail sum starts at the `(rho + 1)`-th singular value.
pub fn sketchy_error_bound_at(sigma: &[f64], q: usize, s: usize, rho: usize) -> f64 {
    assert!(rho + 1 < q && s > q + 1, "need rho < q - 1 and s > q + 1");
    let tail: f64 = sigma.iter().skip(rho).map(|x| x * x).sum();
    let (q, s, rho) = (q as f64, s as f64, rho as f64);
    (s - 1.0) / (s - q - 1.0) * (q + rho - 1.0) / (q - rho - 1.0) * tail
}

/// [`sketchy_error_bound_at`] minimized over admissible `rho`.
pub fn sketchy_error_bound(sigma: &[f64], q: usize, s: usize) -> f64 {
    (0..q - 1)
        .map(|rho| sketchy_error_bound_at(sigma, q, s, rho))
        .fold(f64::INFINITY, f64::min)
}

/// One-pass randomized SVD built from range, co-range and core sketches.
///
/// Memory is `n q + K q + s²` floats for the sketches plus `2 n ζ` stored
/// map entries; the two maps indexed by snapshot are regenerated per column.
#[derive(Clone, Debug)]
pub struct SketchySvd {
    n: usize,
    k_total: usize,
    r: usize,
    q: usize,
    s: usize,
    upsilon: SparseSignMatrix,
    xi: SparseSignMatrix,
    omega: SparseSignMap,
    psi: SparseSignMap,
    range: DMatrix<f64>,
    /// Stored transposed (`K × q`) so finalization can factor it in place.
    corange_t: DMatrix<f64>,
    core: DMatrix<f64>,
    seen: Vec<u64>,
    processed: usize,
    next: usize,
    buf: Vec<(u32, f64)>,
}

impl SketchySvd {
    pub fn new(n: usize, k_total: usize, r: usize, seed: u64) -> Self {
        let (q, s, _) = sketch_sizes(r);
        Self::with_sizes(n, k_total, r, q, s, seed)
    }

    pub fn with_sizes(n: usize, k_total: usize, r: usize, q: usize, s: usize, seed: u64) -> Self {
        assert!(r >= 1 && k_total >= 1 && n >= 1, "need n, K, r >= 1");
        assert!(r < q && q <= s, "need r < q <= s");
        let zeta = q.min(8);
        Self {
            n,
            k_total,
            r,
            q,
            s,
            upsilon: SparseSignMap::new(q, n, zeta, seed, TAG_UPSILON).materialize(),
            xi: SparseSignMap::new(s, n, zeta, seed, TAG_XI).materialize(),
            omega: SparseSignMap::new(q, k_total, zeta, seed, TAG_OMEGA),
            psi: SparseSignMap::new(s, k_total, zeta, seed, TAG_PSI),
            range: DMatrix::zeros(n, q),
            corange_t: DMatrix::zeros(k_total, q),
            core: DMatrix::zeros(s, s),
            seen: vec![0; k_total.div_ceil(64)],
            processed: 0,
            next: 0,
            buf: Vec::with_capacity(zeta),
        }
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.q, self.s, self.q.min(8))
    }

    pub fn processed(&self) -> usize {
        self.processed
    }

    /// True when the core sketch is larger than the matrix it compresses.
    pub fn oversized(&self) -> bool {
        self.s > self.n.min(self.k_total)
    }

    pub fn range_map(&self) -> SparseSignMap {
        self.omega
    }

    pub fn corange_map(&self) -> &SparseSignMatrix {
        &self.upsilon
    }

    pub fn core_maps(&self) -> (&SparseSignMatrix, SparseSignMap) {
        (&self.xi, self.psi)
    }

    pub fn range_sketch(&self) -> &DMatrix<f64> {
        &self.range
    }

    pub fn corange_sketch(&self) -> DMatrix<f64> {
        self.corange_t.transpose()
    }

    pub fn core_sketch(&self) -> &DMatrix<f64> {
        &self.core
    }

    /// Streams the next snapshot index.
    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        let k = self.next;
        self.update(x, k)
    }

    /// Streams snapshot `k` (0-based). Each index may be used once.
    pub fn update(&mut self, x: &[f64], k: usize) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        if k >= self.k_total {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.k_total,
            });
        }
        let (word, bit) = (k / 64, 1u64 << (k % 64));
        if self.seen[word] & bit != 0 {
            return Err(Error::DuplicateIndex(k));
        }
        self.seen[word] |= bit;
        self.processed += 1;
        self.next = k + 1;

        let xv = nalgebra::DVectorView::from_slice(x, self.n);
        self.omega.column_into(k, &mut self.buf);
        for &(i, v) in &self.buf {
            self.range.column_mut(i as usize).axpy(v, &xv, 1.0);
        }

        let y = self.upsilon.mul_vec(x);
        for (j, yj) in y.into_iter().enumerate() {
            self.corange_t[(k, j)] = yj;
        }

        let z = DVector::from_vec(self.xi.mul_vec(x));
        self.psi.column_into(k, &mut self.buf);
        for &(i, v) in &self.buf {
            self.core.column_mut(i as usize).axpy(v, &z, 1.0);
        }
        Ok(())
    }

    /// Rank-`r` factorization; consumes the sketches to reuse their storage.
    pub fn finalize(self) -> Result<TruncatedSvd> {
        let r = self.r;
        self.finalize_rank(r)
    }

    /// Factorization without consuming the sketches, for checkpoints.
    pub fn snapshot(&self) -> Result<TruncatedSvd> {
        self.clone().finalize()
    }

    /// Factorization of rank `rank ≤ q`. With `rank = q` this is the
    /// untruncated sketch approximation.
    pub fn finalize_rank(self, rank: usize) -> Result<TruncatedSvd> {
        let Self {
            range,
            corange_t,
            core,
            xi,
            psi,
            k_total,
            ..
        } = self;

        let qr_range = HouseholderQr::new(range);
        let numerical_rank = HouseholderQr::with_pivoting(qr_range.r()).rank(RANK_TOL);
        if numerical_rank > 0 && numerical_rank < rank {
            return Err(Error::RankDeficientSketch {
                rank: numerical_rank,
                requested: rank,
            });
        }
        let q_range = qr_range.into_thin_q();
        let q_corange = HouseholderQr::new(corange_t).into_thin_q();

        let a = xi.mul_dense(&q_range);
        let mut b = DMatrix::zeros(psi.rows, q_corange.ncols());
        let mut buf = Vec::with_capacity(psi.zeta);
        for k in 0..k_total {
            psi.column_into(k, &mut buf);
            for j in 0..q_corange.ncols() {
                let qkj = q_corange[(k, j)];
                for &(i, v) in &buf {
                    b[(i as usize, j)] += v * qkj;
                }
            }
        }

        let y = pinv_solve(&a, &core, RANK_TOL);
        let c = pinv_solve(&b, &y.transpose(), RANK_TOL).transpose();
        let svd = c.svd(true, true);
        let u = svd.u.expect("requested U");
        let vt = svd.v_t.expect("requested Vᵀ");
        let keep = rank.min(svd.singular_values.len());

        Ok(TruncatedSvd {
            v: &q_range * u.columns(0, keep),
            s: svd.singular_values.rows(0, keep).into_owned(),
            w: Some(&q_corange * vt.rows(0, keep).transpose()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_defect;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn sketch(x: &DMatrix<f64>, r: usize, seed: u64) -> SketchySvd {
        let mut sk = SketchySvd::new(x.nrows(), x.ncols(), r, seed);
        for c in x.column_iter() {
            sk.push(c.as_slice()).unwrap();
        }
        sk
    }

    #[test]
    fn sizes_follow_rank() {
        assert_eq!(sketch_sizes(2), (9, 19, 8));
        assert_eq!(sketch_sizes(1), (5, 11, 5));
    }

    #[test]
    fn sketches_match_dense_products() {
        let x = random(30, 25, 1);
        let sk = sketch(&x, 2, 4);
        let omega = sk.range_map().materialize().to_dense();
        let upsilon = sk.corange_map().to_dense();
        let (xi, psi) = sk.core_maps();
        let (xi, psi) = (xi.to_dense(), psi.materialize().to_dense());
        assert!((sk.range_sketch() - &x * omega.transpose()).norm() < 1e-12);
        assert!((sk.corange_sketch() - &upsilon * &x).norm() < 1e-12);
        assert!((sk.core_sketch() - &xi * &x * psi.transpose()).norm() < 1e-12);
    }

    #[test]
    fn index_contract() {
        let mut sk = SketchySvd::new(4, 3, 1, 0);
        assert!(matches!(
            sk.update(&[1.0; 4], 3),
            Err(Error::IndexOutOfRange { .. })
        ));
        sk.update(&[1.0; 4], 0).unwrap();
        assert!(matches!(
            sk.update(&[1.0; 4], 0),
            Err(Error::DuplicateIndex(0))
        ));
        assert!(matches!(
            sk.update(&[1.0; 3], 1),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(sk.corange_sketch().columns(1, 2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_snapshot_leaves_sketches_untouched() {
        let mut sk = SketchySvd::new(5, 4, 1, 0);
        sk.push(&[0.0; 5]).unwrap();
        assert_eq!(sk.range_sketch().norm(), 0.0);
        assert_eq!(sk.core_sketch().norm(), 0.0);
        let t = sk.finalize().unwrap();
        assert!(t.s.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn exact_rank_one_recovery() {
        let u = random(50, 1, 2);
        let v = random(40, 1, 3);
        let x = &u * v.transpose();
        let t = sketch(&x, 1, 9).finalize().unwrap();
        assert!((t.reconstruct() - &x).norm() / x.norm() < 1e-10);
        assert!(orthonormality_defect(&t.v) < 1e-12);
    }

    #[test]
    fn rank_deficient_request_is_reported() {
        let u = random(40, 1, 2);
        let v = random(40, 1, 3);
        let x = &u * v.transpose();
        let err = sketch(&x, 3, 9).finalize().unwrap_err();
        assert!(matches!(
            err,
            Error::RankDeficientSketch {
                rank: 1,
                requested: 3
            }
        ));
    }

    #[test]
    fn bound_decreases_with_lighter_tail() {
        let heavy = [1.0; 20];
        let mut light = [1e-3; 20];
        light[0] = 10.0;
        assert!(sketchy_error_bound(&light, 9, 19) < sketchy_error_bound(&heavy, 9, 19));
    }
}
