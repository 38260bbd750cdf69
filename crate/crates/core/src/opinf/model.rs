use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::kron_self;
use crate::recursive_ls::Regularizer;

/// How the quadratic regressors `x̂ ⊗ x̂` enter a data row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quadratic {
    None,
    /// All `r²` products, `x̂_i x̂_j` at `i r + j`.
    Full,
    /// The `r(r+1)/2` distinct products `x̂_i x̂_j`, `i ≤ j`, row-major.
    Unique,
}

impl Quadratic {
    pub fn count(self, r: usize) -> usize {
        match self {
            Quadratic::None => 0,
            Quadratic::Full => r * r,
            Quadratic::Unique => r * (r + 1) / 2,
        }
    }
}

/// Column layout of a data row: `[x̂ | quadratic | u | 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub r: usize,
    pub quadratic: Quadratic,
    pub m: usize,
    pub constant: bool,
}

impl Layout {
    /// Linear, full quadratic, `m` inputs and a constant.
    pub fn full(r: usize, m: usize) -> Self {
        Self {
            r,
            quadratic: Quadratic::Full,
            m,
            constant: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.r + self.quadratic.count(self.r) + self.m + usize::from(self.constant)
    }

    pub fn quadratic_offset(&self) -> usize {
        self.r
    }

    pub fn input_offset(&self) -> usize {
        self.r + self.quadratic.count(self.r)
    }

    pub fn constant_index(&self) -> Option<usize> {
        self.constant.then(|| self.dim() - 1)
    }

    pub fn fill_row(&self, xhat: &[f64], u: &[f64], out: &mut [f64]) {
        let r = self.r;
        debug_assert_eq!(xhat.len(), r);
        debug_assert_eq!(u.len(), self.m);
        debug_assert_eq!(out.len(), self.dim());
        out[..r].copy_from_slice(xhat);
        let mut at = r;
        match self.quadratic {
            Quadratic::None => {}
            Quadratic::Full => {
                for &xi in xhat {
                    for &xj in xhat {
                        out[at] = xi * xj;
                        at += 1;
                    }
                }
            }
            Quadratic::Unique => {
                for i in 0..r {
                    for j in i..r {
                        out[at] = xhat[i] * xhat[j];
                        at += 1;
                    }
                }
            }
        }
        out[at..at + self.m].copy_from_slice(u);
        at += self.m;
        if self.constant {
            out[at] = 1.0;
        }
    }

    pub fn row(&self, xhat: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.fill_row(xhat, u, &mut out);
        out
    }

    /// `γ2` on the quadratic columns, `γ1` on everything else.
    pub fn regularizer(&self, gamma1: f64, gamma2: f64) -> Result<Regularizer> {
        let q0 = self.quadratic_offset();
        let q1 = self.input_offset();
        let diag = (0..self.dim())
            .map(|c| {
                if (q0..q1).contains(&c) {
                    gamma2
                } else {
                    gamma1
                }
            })
            .collect();
        Regularizer::from_diagonal(diag)
    }
}

/// Data row `[x̂, x̂ ⊗ x̂, u, 1]`.
pub fn assemble_row(xhat: &[f64], u: &[f64]) -> Vec<f64> {
    Layout::full(xhat.len(), u.len()).row(xhat, u)
}

/// `dx̂/dt = A1 x̂ + A2 (x̂ ⊗ x̂) + B u + c`.
///
/// `A2` is kept in the full `r × r²` Kronecker form whatever layout it was
/// learned with; products learned once for `i < j` are split evenly between
/// columns `i r + j` and `j r + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedModel {
    pub a1: DMatrix<f64>,
    pub a2: Option<DMatrix<f64>>,
    pub b: Option<DMatrix<f64>>,
    pub c: Option<DVector<f64>>,
}

impl ReducedModel {
    pub fn linear(a1: DMatrix<f64>) -> Self {
        Self {
            a1,
            a2: None,
            b: None,
            c: None,
        }
    }

    pub fn r(&self) -> usize {
        self.a1.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.as_ref().map_or(0, |b| b.ncols())
    }

    /// Unpacks `Ω` (`d × r`, one column per reduced state) under `layout`.
    pub fn from_operator(omega: &DMatrix<f64>, layout: &Layout) -> Result<Self> {
        let r = layout.r;
        if omega.shape() != (layout.dim(), r) {
            return Err(Error::ShapeMismatch(format!(
                "operator matrix is {:?}, layout needs ({}, {})",
                omega.shape(),
                layout.dim(),
                r
            )));
        }
        let ot = omega.transpose();
        let a1 = ot.columns(0, r).into_owned();
        let q0 = layout.quadratic_offset();
        let a2 = match layout.quadratic {
            Quadratic::None => None,
            Quadratic::Full => Some(ot.columns(q0, r * r).into_owned()),
            Quadratic::Unique => {
                let mut a2 = DMatrix::zeros(r, r * r);
                let mut at = q0;
                for i in 0..r {
                    for j in i..r {
                        let col = ot.column(at);
                        if i == j {
                            a2.column_mut(i * r + j).copy_from(&col);
                        } else {
                            a2.column_mut(i * r + j).copy_from(&(col * 0.5));
                            a2.column_mut(j * r + i).copy_from(&(col * 0.5));
                        }
                        at += 1;
                    }
                }
                Some(a2)
            }
        };
        let b = (layout.m > 0).then(|| ot.columns(layout.input_offset(), layout.m).into_owned());
        let c = layout.constant_index().map(|i| ot.column(i).into_owned());
        Ok(Self { a1, a2, b, c })
    }

    /// Packs the operators into `Ω` under `layout`; absent terms become zeros.
    pub fn to_operator(&self, layout: &Layout) -> Result<DMatrix<f64>> {
        let r = self.r();
        if layout.r != r || (layout.m != self.m() && self.b.is_some()) {
            return Err(Error::InconsistentDimensions(format!(
                "model has r={}, m={}; layout has r={}, m={}",
                r,
                self.m(),
                layout.r,
                layout.m
            )));
        }
        let mut ot = DMatrix::zeros(r, layout.dim());
        ot.columns_mut(0, r).copy_from(&self.a1);
        if let Some(a2) = &self.a2 {
            let q0 = layout.quadratic_offset();
            match layout.quadratic {
                Quadratic::None => {}
                Quadratic::Full => ot.columns_mut(q0, r * r).copy_from(a2),
                Quadratic::Unique => {
                    let mut at = q0;
                    for i in 0..r {
                        for j in i..r {
                            let col = if i == j {
                                a2.column(i * r + j).into_owned()
                            } else {
                                a2.column(i * r + j) + a2.column(j * r + i)
                            };
                            ot.column_mut(at).copy_from(&col);
                            at += 1;
                        }
                    }
                }
            }
        }
        if let Some(b) = &self.b {
            ot.columns_mut(layout.input_offset(), layout.m).copy_from(b);
        }
        if let (Some(c), Some(i)) = (&self.c, layout.constant_index()) {
            ot.column_mut(i).copy_from(c);
        }
        Ok(ot.transpose())
    }

    pub fn rhs(&self, xhat: &DVector<f64>, u: &[f64]) -> DVector<f64> {
        let mut f = &self.a1 * xhat;
        if let Some(a2) = &self.a2 {
            let kx = DVector::from_vec(kron_self(xhat.as_slice()));
            f.gemv(1.0, a2, &kx, 1.0);
        }
        if let Some(b) = &self.b {
            f.gemv(1.0, b, &DVector::from_column_slice(u), 1.0);
        }
        if let Some(c) = &self.c {
            f += c;
        }
        f
    }

    /// `A1 + A2 (I ⊗ x̂ + x̂ ⊗ I)`.
    pub fn jacobian(&self, xhat: &DVector<f64>) -> DMatrix<f64> {
        let r = self.r();
        let mut j = self.a1.clone();
        if let Some(a2) = &self.a2 {
            for l in 0..r {
                for s in 0..r {
                    let xs = xhat[s];
                    if xs == 0.0 {
                        continue;
                    }
                    for i in 0..r {
                        j[(i, l)] += (a2[(i, l * r + s)] + a2[(i, s * r + l)]) * xs;
                    }
                }
            }
        }
        j
    }

    /// Replaces `A2` by its symmetrization over `(i, j)` and `(j, i)`,
    /// which leaves `A2 (x̂ ⊗ x̂)` unchanged.
    pub fn symmetrize_quadratic(&mut self) {
        let r = self.r();
        if let Some(a2) = self.a2.as_mut() {
            for i in 0..r {
                for j in (i + 1)..r {
                    let avg = (a2.column(i * r + j) + a2.column(j * r + i)) * 0.5;
                    a2.column_mut(i * r + j).copy_from(&avg);
                    a2.column_mut(j * r + i).copy_from(&avg);
                }
            }
        }
    }
}
