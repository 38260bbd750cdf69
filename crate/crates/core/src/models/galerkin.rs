use nalgebra::DMatrix;

use super::FullModel;
use crate::error::{Error, Result};
use crate::linalg::orthonormality_defect;
use crate::opinf::ReducedModel;

/// `Â1 = VᵀA1V`, `Â2 = VᵀA2(V ⊗ V)`, `B̂ = VᵀB` for orthonormal `V`.
pub fn intrusive_galerkin(v: &DMatrix<f64>, model: &FullModel) -> Result<ReducedModel> {
    let (n, r) = v.shape();
    if n != model.n() {
        return Err(Error::DimensionMismatch {
            expected: model.n(),
            found: n,
        });
    }
    let defect = orthonormality_defect(v);
    if defect > 1e-8 {
        return Err(Error::NotOrthonormal { defect });
    }
    let a1 = v.tr_mul(&model.a1.mul_dense(v));

    // Each entry (i, j, k, c) adds c V[i,:]ᵀ ⊗ (V[j,:] ⊗ V[k,:]).
    let mut a2 = DMatrix::zeros(r, r * r);
    let mut outer = vec![0.0; r * r];
    for &(i, j, k, c) in model.a2.entries() {
        let (i, j, k) = (i as usize, j as usize, k as usize);
        for a in 0..r {
            let vja = c * v[(j, a)];
            for b in 0..r {
                outer[a * r + b] = vja * v[(k, b)];
            }
        }
        for (col, &w) in outer.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for p in 0..r {
                a2[(p, col)] += v[(i, p)] * w;
            }
        }
    }
    let b = model.b.as_ref().map(|b| v.tr_mul(b));
    Ok(ReducedModel {
        a1,
        a2: Some(a2),
        b,
        c: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{burgers_model, kse_model};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_basis_returns_full_operators() {
        let m = burgers_model(6, 0.3).unwrap();
        let rom = intrusive_galerkin(&DMatrix::identity(6, 6), &m).unwrap();
        assert_eq!(rom.a1, m.a1.to_dense());
        assert_eq!(rom.a2.unwrap(), m.a2.to_dense());
        assert_eq!(rom.b.unwrap(), m.b.unwrap());
    }

    #[test]
    fn first_unit_vector() {
        let m = burgers_model(6, 0.3).unwrap();
        let mut v = DMatrix::zeros(6, 1);
        v[(0, 0)] = 1.0;
        let rom = intrusive_galerkin(&v, &m).unwrap();
        assert_eq!(rom.a1[(0, 0)], m.a1.get(0, 0));
    }

    #[test]
    fn reduced_rhs_is_projected_full_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for model in [
            burgers_model(20, 0.2).unwrap(),
            kse_model(20, 22.0, 1.0).unwrap(),
        ] {
            let raw = DMatrix::from_fn(20, 4, |_, _| rng.gen_range(-1.0..1.0));
            let v = raw.qr().q();
            let rom = intrusive_galerkin(&v, &model).unwrap();
            let xhat = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let u = vec![0.4; model.m()];
            let full = model.rhs((&v * &xhat).as_slice(), &u);
            let projected = v.tr_mul(&DVector::from_vec(full));
            let reduced = rom.rhs(&xhat, &u);
            assert!((projected - reduced).norm() < 1e-12 * (1.0 + rom.a1.norm()));
        }
    }

    #[test]
    fn rejects_non_orthonormal() {
        let m = burgers_model(6, 0.3).unwrap();
        assert!(intrusive_galerkin(&DMatrix::from_element(6, 1, 1.0), &m).is_err());
    }
}
