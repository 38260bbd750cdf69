//! Dense kernels shared by the streaming algorithms.
//!
//! Householder QR lives here instead of going through nalgebra because the
//! sketch finalization needs to overwrite the sketch with its own Q factor,
//! and the pseudoinverses need column pivoting with an explicit rank cut.

use nalgebra::{DMatrix, DVector};

/// Neumaier compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `x ⊗ x` with entry `x[i] * x[j]` at `i * r + j`.
pub fn kron_self(x: &[f64]) -> Vec<f64> {
    let r = x.len();
    let mut out = vec![0.0; r * r];
    for (i, &xi) in x.iter().enumerate() {
        for (j, &xj) in x.iter().enumerate() {
            out[i * r + j] = xi * xj;
        }
    }
    out
}

/// `‖VᵀV − I‖_F`.
pub fn orthonormality_defect(v: &DMatrix<f64>) -> f64 {
    let g = v.tr_mul(v);
    let k = g.nrows();
    (g - DMatrix::<f64>::identity(k, k)).norm()
}

/// Singular values of `a`, descending.
pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    if a.is_empty() {
        return DVector::zeros(0);
    }
    a.clone().svd(false, false).singular_values
}

pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    singular_values(a).iter().cloned().fold(0.0, f64::max)
}

/// Householder QR stored LAPACK-style: `R` on and above the diagonal,
/// reflector tails below it, `tau` alongside.
#[derive(Clone, Debug)]
pub struct HouseholderQr {
    qr: DMatrix<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
}

impl HouseholderQr {
    pub fn new(a: DMatrix<f64>) -> Self {
        Self::factor(a, false)
    }

    /// Column-pivoted variant: `A P = Q R` with `|R_jj|` non-increasing.
    pub fn with_pivoting(a: DMatrix<f64>) -> Self {
        Self::factor(a, true)
    }

    fn factor(mut a: DMatrix<f64>, pivot: bool) -> Self {
        let (m, n) = a.shape();
        let k = m.min(n);
        let mut tau = vec![0.0; k];
        let mut perm: Vec<usize> = (0..n).collect();
        for j in 0..k {
            if pivot {
                let mut best = j;
                let mut best_norm = -1.0;
                for c in j..n {
                    let s: f64 = a.view((j, c), (m - j, 1)).norm_squared();
                    if s > best_norm {
                        best_norm = s;
                        best = c;
                    }
                }
                if best != j {
                    a.swap_columns(j, best);
                    perm.swap(j, best);
                }
            }
            tau[j] = reflect_column(&mut a, j);
            if tau[j] != 0.0 {
                for c in (j + 1)..n {
                    apply_reflector(&mut a, j, tau[j], c);
                }
            }
        }
        Self { qr: a, tau, perm }
    }

    pub fn nrows(&self) -> usize {
        self.qr.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.qr.ncols()
    }

    /// Column permutation: column `j` of `A P` is column `perm[j]` of `A`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Number of diagonal entries with `|R_jj| > rel_tol · |R_00|`.
    /// Meaningful only for the pivoted factorization.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let k = self.tau.len();
        if k == 0 {
            return 0;
        }
        let lead = self.qr[(0, 0)].abs();
        if lead == 0.0 {
            return 0;
        }
        (0..k)
            .take_while(|&j| self.qr[(j, j)].abs() > rel_tol * lead)
            .count()
    }

    /// Upper-trapezoidal `R`, `min(m,n) × n`.
    pub fn r(&self) -> DMatrix<f64> {
        let (m, n) = self.qr.shape();
        let k = m.min(n);
        DMatrix::from_fn(k, n, |i, j| if i <= j { self.qr[(i, j)] } else { 0.0 })
    }

    /// `b ← Qᵀ b`.
    pub fn qt_mul(&self, b: &mut DMatrix<f64>) {
        assert_eq!(b.nrows(), self.qr.nrows());
        for (j, &t) in self.tau.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            for c in 0..b.ncols() {
                let mut w = b[(j, c)];
                for i in (j + 1)..self.qr.nrows() {
                    w += self.qr[(i, j)] * b[(i, c)];
                }
                w *= t;
                b[(j, c)] -= w;
                for i in (j + 1)..self.qr.nrows() {
                    b[(i, c)] -= w * self.qr[(i, j)];
                }
            }
        }
    }

    /// Overwrites the factor storage with the thin `Q` (`m × min(m,n)`).
    pub fn into_thin_q(self) -> DMatrix<f64> {
        let Self { mut qr, tau, .. } = self;
        let (m, n) = qr.shape();
        let k = m.min(n);
        if n > k {
            qr = qr.remove_columns(k, n - k);
        }
        for j in (0..k).rev() {
            let t = tau[j];
            if j + 1 < k {
                qr[(j, j)] = 1.0;
                for c in (j + 1)..k {
                    let mut w = 0.0;
                    for i in j..m {
                        w += qr[(i, j)] * qr[(i, c)];
                    }
                    w *= t;
                    for i in j..m {
                        let vi = qr[(i, j)];
                        qr[(i, c)] -= w * vi;
                    }
                }
            }
            for i in (j + 1)..m {
                qr[(i, j)] *= -t;
            }
            qr[(j, j)] = 1.0 - t;
            for i in 0..j {
                qr[(i, j)] = 0.0;
            }
        }
        qr
    }

    /// Basic least-squares solution of `A X = B` keeping the leading `rank`
    /// pivoted columns; the remaining unknowns are zero.
    pub fn solve(&self, b: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
        let n = self.qr.ncols();
        let mut qtb = b.clone();
        self.qt_mul(&mut qtb);
        let mut x = DMatrix::zeros(n, b.ncols());
        for c in 0..b.ncols() {
            for i in (0..rank).rev() {
                let mut s = qtb[(i, c)];
                for j in (i + 1)..rank {
                    s -= self.qr[(i, j)] * x[(self.perm[j], c)];
                }
                x[(self.perm[i], c)] = s / self.qr[(i, i)];
            }
        }
        x
    }
}

/// Builds the reflector annihilating column `j` below the diagonal.
/// Returns `tau`; `a[j,j]` receives `beta`, the tail receives `v[1..]`.
fn reflect_column(a: &mut DMatrix<f64>, j: usize) -> f64 {
    let m = a.nrows();
    let alpha = a[(j, j)];
    let mut tail = 0.0;
    for i in (j + 1)..m {
        tail += a[(i, j)] * a[(i, j)];
    }
    if tail == 0.0 {
        return 0.0;
    }
    let norm = (alpha * alpha + tail).sqrt();
    let beta = if alpha >= 0.0 { -norm } else { norm };
    let scale = 1.0 / (alpha - beta);
    for i in (j + 1)..m {
        a[(i, j)] *= scale;
    }
    a[(j, j)] = beta;
    (beta - alpha) / beta
}

fn apply_reflector(a: &mut DMatrix<f64>, j: usize, tau: f64, c: usize) {
    let m = a.nrows();
    let mut w = a[(j, c)];
    for i in (j + 1)..m {
        w += a[(i, j)] * a[(i, c)];
    }
    w *= tau;
    a[(j, c)] -= w;
    for i in (j + 1)..m {
        let vi = a[(i, j)];
        a[(i, c)] -= w * vi;
    }
}

/// Pseudoinverse solve `A⁺ B` through pivoted QR with rank cut `rel_tol`.
pub fn pinv_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let qr = HouseholderQr::with_pivoting(a.clone());
    let rank = qr.rank(rel_tol);
    qr.solve(b, rank)
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
    fn compensated_sum_recovers_lost_bits() {
        let mut s = CompensatedSum::new();
        s.add(1.0);
        for _ in 0..10_000 {
            s.add(1e-16);
        }
        assert!((s.value() - (1.0 + 1e-12)).abs() < 1e-24 + 1e-16);
    }

    #[test]
    fn kron_layout() {
        assert_eq!(kron_self(&[2.0, 3.0]), vec![4.0, 6.0, 6.0, 9.0]);
    }

    #[test]
    fn thin_q_reconstructs() {
        for &(m, n) in &[(7, 3), (5, 5), (3, 6)] {
            let a = random(m, n, (m * 10 + n) as u64);
            let qr = HouseholderQr::new(a.clone());
            let r = qr.r();
            let q = qr.into_thin_q();
            assert!(orthonormality_defect(&q) < 1e-14);
            assert!((&q * r - &a).norm() < 1e-13);
        }
    }

    #[test]
    fn pivoted_rank_and_solve() {
        let u = random(9, 2, 1);
        let v = random(2, 5, 2);
        let a = &u * &v;
        let qr = HouseholderQr::with_pivoting(a.clone());
        assert_eq!(qr.rank(1e-12), 2);

        let full = random(9, 4, 3);
        let b = random(9, 2, 4);
        let x = pinv_solve(&full, &b, 1e-12);
        let normal = (full.tr_mul(&full)).try_inverse().unwrap() * full.tr_mul(&b);
        assert!((x - normal).norm() < 1e-12);
    }

    #[test]
    fn qt_mul_matches_explicit_q() {
        let a = random(6, 3, 5);
        let qr = HouseholderQr::new(a);
        let mut b = random(6, 2, 6);
        let b0 = b.clone();
        qr.qt_mul(&mut b);
        let q = qr.into_thin_q();
        assert!((b.rows(0, 3) - q.tr_mul(&b0)).norm() < 1e-14);
    }
}
