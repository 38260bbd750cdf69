use nalgebra::{DMatrix, DVector};

use super::model::ReducedModel;
use crate::error::{Error, Result};

/// Weights `w_i(μ)` of the not-a-knot cubic spline through the nodes `mus`,
/// so that the interpolant of values `f_i` is `Σ w_i f_i`.
///
/// The not-a-knot spline reproduces cubic polynomials exactly, and is the
/// cubic B-spline interpolant with knots at the interior data sites.
pub fn spline_weights(mus: &[f64], mu: f64) -> Result<Vec<f64>> {
    let n = mus.len();
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "cubic interpolation needs at least 4 nodes, got {n}"
        )));
    }
    if mus.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "interpolation nodes must be strictly increasing".into(),
        ));
    }
    let (lo, hi) = (mus[0], mus[n - 1]);
    if !(lo..=hi).contains(&mu) {
        return Err(Error::Extrapolation { query: mu, lo, hi });
    }
    let h: Vec<f64> = mus.windows(2).map(|w| w[1] - w[0]).collect();

    // Second derivatives M satisfy A M = Bmat f; the weights are the row of
    // the evaluation functional applied to the solution operator.
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for i in 1..n - 1 {
        a[(i, i - 1)] = h[i - 1];
        a[(i, i)] = 2.0 * (h[i - 1] + h[i]);
        a[(i, i + 1)] = h[i];
        b[(i, i - 1)] = 6.0 / h[i - 1];
        b[(i, i)] = -6.0 / h[i - 1] - 6.0 / h[i];
        b[(i, i + 1)] = 6.0 / h[i];
    }
    // Not-a-knot: third derivative continuous across the second and the
    // second-to-last node.
    a[(0, 0)] = h[1];
    a[(0, 1)] = -(h[0] + h[1]);
    a[(0, 2)] = h[0];
    a[(n - 1, n - 3)] = h[n - 2];
    a[(n - 1, n - 2)] = -(h[n - 3] + h[n - 2]);
    a[(n - 1, n - 1)] = h[n - 3];
    let second = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::InvalidArgument("singular spline system".into()))?;

    let seg = (0..n - 1).find(|&i| mu <= mus[i + 1]).unwrap_or(n - 2);
    let (x0, x1, hs) = (mus[seg], mus[seg + 1], h[seg]);
    let (t0, t1) = (x1 - mu, mu - x0);
    let mut w = DVector::zeros(n);
    w[seg] += t0 / hs;
    w[seg + 1] += t1 / hs;
    let c0 = (t0.powi(3) / hs - hs * t0) / 6.0;
    let c1 = (t1.powi(3) / hs - hs * t1) / 6.0;
    w += second.row(seg).transpose() * c0 + second.row(seg + 1).transpose() * c1;
    Ok(w.iter().cloned().collect())
}

/// Entrywise cubic-spline interpolation of operators over a scalar parameter.
pub fn interpolate_operators(
    mus: &[f64],
    models: &[ReducedModel],
    mu: f64,
) -> Result<ReducedModel> {
    if mus.len() != models.len() {
        return Err(Error::InconsistentDimensions(format!(
            "{} parameters but {} models",
            mus.len(),
            models.len()
        )));
    }
    let first = models
        .first()
        .ok_or_else(|| Error::InvalidArgument("no models to interpolate".into()))?;
    for m in models {
        let same = m.a1.shape() == first.a1.shape()
            && m.a2.as_ref().map(|x| x.shape()) == first.a2.as_ref().map(|x| x.shape())
            && m.b.as_ref().map(|x| x.shape()) == first.b.as_ref().map(|x| x.shape())
            && m.c.as_ref().map(|x| x.len()) == first.c.as_ref().map(|x| x.len());
        if !same {
            return Err(Error::InconsistentDimensions(
                "models differ in shape or terms".into(),
            ));
        }
    }
    let w = spline_weights(mus, mu)?;
    let combine = |get: &dyn Fn(&ReducedModel) -> DMatrix<f64>| {
        let mut acc = get(first) * w[0];
        for (m, wi) in models.iter().zip(&w).skip(1) {
            acc += get(m) * *wi;
        }
        acc
    };
    Ok(ReducedModel {
        a1: combine(&|m| m.a1.clone()),
        a2: first
            .a2
            .as_ref()
            .map(|_| combine(&|m| m.a2.clone().unwrap())),
        b: first.b.as_ref().map(|_| combine(&|m| m.b.clone().unwrap())),
        c: first.c.as_ref().map(|_| {
            let c = combine(&|m| {
                DMatrix::from_column_slice(m.r(), 1, m.c.as_ref().unwrap().as_slice())
            });
            c.column(0).into_owned()
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_reproduced() {
        let mus = [0.1, 0.2, 0.4, 0.5, 0.9];
        for (i, &mu) in mus.iter().enumerate() {
            let w = spline_weights(&mus, mu).unwrap();
            for (j, wj) in w.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((wj - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cubics_are_exact() {
        let mus = [0.1, 0.25, 0.3, 0.55, 0.7, 1.0];
        let f = |x: f64| 2.0 * x.powi(3) - x * x + 0.5 * x - 3.0;
        let vals: Vec<f64> = mus.iter().map(|&m| f(m)).collect();
        for q in [0.1, 0.13, 0.42, 0.77, 0.99, 1.0] {
            let w = spline_weights(&mus, q).unwrap();
            let v: f64 = w.iter().zip(&vals).map(|(a, b)| a * b).sum();
            assert!((v - f(q)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_extrapolation_and_few_nodes() {
        assert!(matches!(
            spline_weights(&[0.0, 1.0, 2.0, 3.0], 3.5),
            Err(Error::Extrapolation { .. })
        ));
        assert!(spline_weights(&[0.0, 1.0, 2.0], 0.5).is_err());
    }
}
