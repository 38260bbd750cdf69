use nalgebra::{DMatrix, DVector};

use super::finite_diff::FiniteDiffOp;
use super::model::Layout;
use crate::error::{Error, Result};
use crate::recursive_ls::{augment, Regularizer};

/// Stacks rows `layout.row(x̂_k, u_k)` for the columns of `xhat`.
pub fn data_matrix(
    xhat: &DMatrix<f64>,
    inputs: Option<&DMatrix<f64>>,
    layout: &Layout,
) -> Result<DMatrix<f64>> {
    let (r, k) = xhat.shape();
    if r != layout.r {
        return Err(Error::DimensionMismatch {
            expected: layout.r,
            found: r,
        });
    }
    check_inputs(inputs, layout, k)?;
    let mut d = DMatrix::zeros(k, layout.dim());
    let mut row = vec![0.0; layout.dim()];
    let empty: [f64; 0] = [];
    for c in 0..k {
        let x: Vec<f64> = xhat.column(c).iter().cloned().collect();
        let u: Vec<f64> =
            inputs.map_or_else(|| empty.to_vec(), |u| u.column(c).iter().cloned().collect());
        layout.fill_row(&x, &u, &mut row);
        d.row_mut(c).copy_from_slice(&row);
    }
    Ok(d)
}

fn check_inputs(inputs: Option<&DMatrix<f64>>, layout: &Layout, k: usize) -> Result<()> {
    match inputs {
        Some(u) if u.nrows() != layout.m => Err(Error::DimensionMismatch {
            expected: layout.m,
            found: u.nrows(),
        }),
        Some(u) if u.ncols() != k => Err(Error::DimensionMismatch {
            expected: k,
            found: u.ncols(),
        }),
        None if layout.m > 0 => Err(Error::DimensionMismatch {
            expected: layout.m,
            found: 0,
        }),
        _ => Ok(()),
    }
}

/// Unregularized `(D, R)` from the singular values and right singular
/// vectors alone: `X̂ = diag(S) Wᵀ`, rows at `X̂ S_k`, right-hand side
/// `(X̂ Δ)ᵀ`. `inputs` holds one column per snapshot.
pub fn reformulated_data(
    s: &DVector<f64>,
    w: &DMatrix<f64>,
    inputs: Option<&DMatrix<f64>>,
    fd: &FiniteDiffOp,
    layout: &Layout,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if s.len() != w.ncols() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            found: w.ncols(),
        });
    }
    let k = w.nrows();
    if let Some(max) = fd
        .rows()
        .iter()
        .flat_map(|r| r.stencil.iter().map(|&(i, _)| i))
        .max()
    {
        if max >= k {
            return Err(Error::DimensionMismatch {
                expected: max + 1,
                found: k,
            });
        }
    }
    let mut xhat = w.transpose();
    for (i, &si) in s.iter().enumerate() {
        xhat.row_mut(i).scale_mut(si);
    }
    let (sel, der) = fd.apply(&xhat);
    let u_sel = inputs.map(|u| {
        let mut out = DMatrix::zeros(u.nrows(), fd.len());
        for (c, row) in fd.rows().iter().enumerate() {
            out.column_mut(c).copy_from(&u.column(row.at));
        }
        out
    });
    if let Some(u) = inputs {
        check_inputs(Some(u), layout, k)?;
    }
    let d = data_matrix(&sel, u_sel.as_ref(), layout)?;
    Ok((d, der.transpose()))
}

/// Regularized reformulated system `(D̄, R̄)`.
pub fn build_reformulated(
    s: &DVector<f64>,
    w: &DMatrix<f64>,
    inputs: Option<&DMatrix<f64>>,
    fd: &FiniteDiffOp,
    layout: &Layout,
    reg: &Regularizer,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (d, r) = reformulated_data(s, w, inputs, fd, layout)?;
    augment(&d, &r, reg)
}

/// One projected regression row and its right-hand side.
pub fn projected_row(
    v: &DMatrix<f64>,
    x: &[f64],
    xdot: &[f64],
    u: &[f64],
    layout: &Layout,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = v.nrows();
    if x.len() != n || xdot.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.len().min(xdot.len()),
        });
    }
    let xhat = v.tr_mul(&DVector::from_column_slice(x));
    let rhs = v.tr_mul(&DVector::from_column_slice(xdot));
    Ok((
        layout.row(xhat.as_slice(), u),
        rhs.iter().cloned().collect(),
    ))
}

/// Regularized projected system from states and matching derivatives, one
/// column each.
pub fn build_projected(
    v: &DMatrix<f64>,
    states: &DMatrix<f64>,
    derivatives: &DMatrix<f64>,
    inputs: Option<&DMatrix<f64>>,
    layout: &Layout,
    reg: &Regularizer,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if states.ncols() != derivatives.ncols() {
        return Err(Error::DimensionMismatch {
            expected: states.ncols(),
            found: derivatives.ncols(),
        });
    }
    let xhat = v.tr_mul(states);
    let d = data_matrix(&xhat, inputs, layout)?;
    let r = v.tr_mul(derivatives).transpose();
    augment(&d, &r, reg)
}
