//! Evaluation metrics, chaos diagnostics, perturbation bounds and memory
//! accounting.

mod bounds;
mod lyapunov;
mod memory;
mod table;

pub use bounds::{alpha, beta1, beta2, bound_rhs_projection, bound_rhs_reformulation};
pub use lyapunov::{kaplan_yorke, lyapunov_spectrum, LyapunovConfig};
pub use memory::{memory_cost, MemoryBudget, MemoryCost, MemoryReport, SketchAccounting};
pub use table::MetricTable;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{orthonormality_defect, singular_values, CompensatedSum};
use crate::snapshots::SnapshotSource;

const ORTHONORMAL_TOL: f64 = 1e-8;

/// Principal-angle cosines (descending) and sines (matching order). The
/// sines come from `(I − Vb Vbᵀ) Vi`, so small angles keep full relative
/// accuracy instead of being lost in `1 − cos θ`.
fn principal_angles(vb: &DMatrix<f64>, vi: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    if vb.shape() != vi.shape() {
        return Err(Error::ShapeMismatch(format!(
            "bases are {:?} and {:?}",
            vb.shape(),
            vi.shape()
        )));
    }
    for v in [vb, vi] {
        let defect = orthonormality_defect(v);
        if defect > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal { defect });
        }
    }
    let overlap = vb.tr_mul(vi);
    let cos: Vec<f64> = singular_values(&overlap)
        .iter()
        .map(|c| c.clamp(0.0, 1.0))
        .collect();
    let mut sin: Vec<f64> = singular_values(&(vi - vb * &overlap))
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    // Rows beyond n produce no sine; pad, then pair smallest sine with largest cosine.
    sin.resize(cos.len(), 0.0);
    sin.sort_by(f64::total_cmp);
    Ok((cos, sin))
}

/// `‖(I − cos Θ)^{1/2}‖_F` over the principal angles between the column
/// spaces. Equals `min_Q ‖Vb − Vi Q‖_F / √2` over orthogonal `Q`.
pub fn subspace_angle_error(vb: &DMatrix<f64>, vi: &DMatrix<f64>) -> Result<f64> {
    let (cos, sin) = principal_angles(vb, vi)?;
    let mut acc = CompensatedSum::new();
    for (c, s) in cos.into_iter().zip(sin) {
        // 1 − cos θ = sin²θ / (1 + cos θ), exact in the small-angle regime.
        acc.add(if c > 0.5 { s * s / (1.0 + c) } else { 1.0 - c });
    }
    Ok(acc.value().max(0.0).sqrt())
}

/// `‖Vb Vbᵀ − Vi Viᵀ‖_F / √2 = ‖sin Θ‖_F`.
pub fn projector_distance(vb: &DMatrix<f64>, vi: &DMatrix<f64>) -> Result<f64> {
    let (cos, sin) = principal_angles(vb, vi)?;
    let mut acc = CompensatedSum::new();
    for (c, s) in cos.into_iter().zip(sin) {
        acc.add(if c > 0.5 {
            s * s
        } else {
            (1.0 - c) * (1.0 + c)
        });
    }
    Ok(acc.value().max(0.0).sqrt())
}

/// `‖X − V Vᵀ X‖_F / ‖X‖_F`, one pass over the stream.
pub fn relative_projection_error(source: &mut dyn SnapshotSource, v: &DMatrix<f64>) -> Result<f64> {
    if source.dim() != v.nrows() {
        return Err(Error::DimensionMismatch {
            expected: v.nrows(),
            found: source.dim(),
        });
    }
    source.rewind()?;
    let (mut num, mut den) = (CompensatedSum::new(), CompensatedSum::new());
    while let Some(s) = source.next_snapshot()? {
        let x = nalgebra::DVector::from_vec(s.state);
        let resid = &x - v * v.tr_mul(&x);
        for (xi, ri) in x.iter().zip(resid.iter()) {
            den.add(xi * xi);
            num.add(ri * ri);
        }
    }
    let den = den.value();
    if den == 0.0 {
        return Err(Error::InvalidArgument(
            "snapshot stream has zero norm".into(),
        ));
    }
    Ok((num.value() / den).sqrt())
}

/// [`relative_projection_error`] for the leading `ranks[i]` columns of `v`,
/// all from one pass.
pub fn relative_projection_errors(
    source: &mut dyn SnapshotSource,
    v: &DMatrix<f64>,
    ranks: &[usize],
) -> Result<Vec<f64>> {
    if v.nrows() != source.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            found: v.nrows(),
        });
    }
    if let Some(&r) = ranks.iter().find(|&&r| r > v.ncols()) {
        return Err(Error::InvalidArgument(format!(
            "rank {r} exceeds the {} basis columns",
            v.ncols()
        )));
    }
    source.rewind()?;
    let mut num = vec![CompensatedSum::new(); v.ncols() + 1];
    let mut den = CompensatedSum::new();
    while let Some(s) = source.next_snapshot()? {
        let mut resid = nalgebra::DVector::from_vec(s.state);
        for xi in resid.iter() {
            den.add(xi * xi);
        }
        let c = v.tr_mul(&resid);
        for (j, acc) in num.iter_mut().enumerate() {
            if j > 0 {
                resid.axpy(-c[j - 1], &v.column(j - 1), 1.0);
            }
            acc.add(resid.norm_squared());
        }
    }
    let den = den.value();
    if den == 0.0 {
        return Err(Error::InvalidArgument(
            "snapshot stream has zero norm".into(),
        ));
    }
    Ok(ranks
        .iter()
        .map(|&r| (num[r].value() / den).sqrt())
        .collect())
}

/// `‖Ω − Ω_k‖_F / (d r ‖Ω‖_F)` averaged over parameters; `Ω` is `d × r`.
pub fn mr_soe(batch: &[DMatrix<f64>], stream: &[DMatrix<f64>]) -> Result<f64> {
    if batch.len() != stream.len() || batch.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "need matching non-empty operator lists, got {} and {}",
            batch.len(),
            stream.len()
        )));
    }
    let mut acc = CompensatedSum::new();
    for (o, ok) in batch.iter().zip(stream) {
        if o.shape() != ok.shape() {
            return Err(Error::ShapeMismatch(format!(
                "operators are {:?} and {:?}",
                o.shape(),
                ok.shape()
            )));
        }
        let (d, r) = o.shape();
        acc.add((o - ok).norm() / (d as f64 * r as f64 * o.norm()));
    }
    Ok(acc.value() / batch.len() as f64)
}

/// `‖X − V X̃‖_F / ‖X‖_F`. A non-finite reduced trajectory gives `+∞`.
pub fn relative_state_error(
    full: &DMatrix<f64>,
    v: &DMatrix<f64>,
    reduced: &DMatrix<f64>,
) -> Result<f64> {
    if full.ncols() != reduced.ncols() || v.ncols() != reduced.nrows() || v.nrows() != full.nrows()
    {
        return Err(Error::ShapeMismatch(format!(
            "full {:?}, basis {:?}, reduced {:?}",
            full.shape(),
            v.shape(),
            reduced.shape()
        )));
    }
    if reduced.iter().any(|x| !x.is_finite()) {
        return Ok(f64::INFINITY);
    }
    let (mut num, mut den) = (CompensatedSum::new(), CompensatedSum::new());
    for c in 0..full.ncols() {
        let rec = v * reduced.column(c);
        for (xi, yi) in full.column(c).iter().zip(rec.iter()) {
            den.add(xi * xi);
            num.add((xi - yi) * (xi - yi));
        }
    }
    Ok((num.value() / den.value()).sqrt())
}

/// Mean of [`relative_state_error`] over parameters; with the final
/// operators this is the final relative state error.
pub fn mr_sse(full: &[DMatrix<f64>], v: &DMatrix<f64>, reduced: &[DMatrix<f64>]) -> Result<f64> {
    if full.len() != reduced.len() || full.is_empty() {
        return Err(Error::InvalidArgument(
            "need matching non-empty trajectory lists".into(),
        ));
    }
    let mut total = 0.0;
    for (x, y) in full.iter().zip(reduced) {
        total += relative_state_error(x, v, y)?;
    }
    Ok(total / full.len() as f64)
}
