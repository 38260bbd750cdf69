use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::models::SplitSystem;

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovConfig {
    /// Number of exponents.
    pub count: usize,
    pub dt: f64,
    pub t_total: f64,
    /// Time integrated before log growth is accumulated.
    pub t_transient: f64,
    /// Steps between QR renormalizations.
    pub renorm_every: usize,
    /// Seed of the random initial tangent frame.
    pub seed: u64,
}

impl LyapunovConfig {
    /// Renormalize every 10 steps, discard the first 20% of `t_total`.
    pub fn new(count: usize, dt: f64, t_total: f64) -> Self {
        Self {
            count,
            dt,
            t_total,
            t_transient: 0.2 * t_total,
            renorm_every: 10,
            seed: 0,
        }
    }
}

/// Leading Lyapunov exponents by integrating `count` tangent vectors with
/// the same CNAB2 splitting as the state and re-orthonormalizing them with
/// QR every `renorm_every` steps; `λ_i` is the time average of `ln R_ii`
/// after the transient.
pub fn lyapunov_spectrum<S: SplitSystem>(
    mut sys: S,
    x0: &[f64],
    cfg: &LyapunovConfig,
) -> Result<Vec<f64>> {
    let n = sys.dim();
    let p = cfg.count;
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    if p == 0 || p > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= count <= {n}, got {p}"
        )));
    }
    if !(cfg.dt > 0.0) || cfg.renorm_every == 0 || !(cfg.t_total > cfg.t_transient) {
        return Err(Error::InvalidArgument(
            "need dt > 0, renorm_every > 0 and t_total > t_transient".into(),
        ));
    }
    let dt = cfg.dt;
    sys.prepare(0.5 * dt)?;
    let steps = (cfg.t_total / dt).round() as usize;
    let transient_steps = (cfg.t_transient / dt).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let frame = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut v = frame.qr().q();

    let mut x = x0.to_vec();
    let mut lin = vec![0.0; n];
    let mut nx = vec![0.0; n];
    let mut prev_nx: Option<Vec<f64>> = None;
    let mut jv = DMatrix::zeros(n, p);
    let mut prev_jv: Option<DMatrix<f64>> = None;
    let mut col = vec![0.0; n];
    let mut lin_v = vec![0.0; n];
    let mut logs = vec![0.0; p];
    let mut elapsed = 0.0;

    for k in 0..steps {
        sys.linear(&x, &mut lin);
        sys.explicit(&x, &[], &mut nx);
        sys.explicit_jvp(&x, &v, &mut jv);

        let mut xn = vec![0.0; n];
        for i in 0..n {
            let e = match &prev_nx {
                None => nx[i],
                Some(pn) => 1.5 * nx[i] - 0.5 * pn[i],
            };
            xn[i] = x[i] + 0.5 * dt * lin[i] + dt * e;
        }
        sys.solve_implicit(&mut xn);

        for c in 0..p {
            let vc = v.column(c);
            sys.linear(vc.as_slice(), &mut lin_v);
            for i in 0..n {
                let e = match &prev_jv {
                    None => jv[(i, c)],
                    Some(pj) => 1.5 * jv[(i, c)] - 0.5 * pj[(i, c)],
                };
                col[i] = vc[i] + 0.5 * dt * lin_v[i] + dt * e;
            }
            sys.solve_implicit(&mut col);
            v.column_mut(c).copy_from_slice(&col);
        }

        if xn.iter().any(|z| !z.is_finite()) || v.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonfiniteState { step: k + 1 });
        }
        x = xn;
        prev_nx = Some(nx.clone());
        prev_jv = Some(jv.clone());

        if (k + 1) % cfg.renorm_every == 0 {
            let qr = v.clone().qr();
            let mut q = qr.q();
            let mut r = qr.r();
            for i in 0..p {
                if r[(i, i)] < 0.0 {
                    q.column_mut(i).neg_mut();
                    r.row_mut(i).neg_mut();
                }
            }
            if k + 1 > transient_steps {
                for (i, l) in logs.iter_mut().enumerate() {
                    *l += r[(i, i)].ln();
                }
                elapsed += cfg.renorm_every as f64 * dt;
            }
            // The cached explicit tangent terms belong to the old frame;
            // map them with the same R⁻¹ so AB2 stays consistent.
            if let Some(pj) = prev_jv.as_mut() {
                let rt = r.transpose();
                let mut t = pj.transpose();
                if !rt.solve_lower_triangular_mut(&mut t) {
                    return Err(Error::NonfiniteState { step: k + 1 });
                }
                *pj = t.transpose();
            }
            v = q;
        }
    }
    if elapsed == 0.0 {
        return Err(Error::InvalidArgument(
            "no renormalization after the transient".into(),
        ));
    }
    Ok(logs.into_iter().map(|l| l / elapsed).collect())
}

/// `j + Σ_{i≤j} λ_i / |λ_{j+1}|` with `j` the largest index whose partial
/// sum is non-negative; `0` when `λ_1 < 0`.
pub fn kaplan_yorke(lambdas: &[f64]) -> Result<f64> {
    if lambdas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument(
            "exponents must be sorted in descending order".into(),
        ));
    }
    let mut sum = 0.0;
    let mut j = 0;
    let mut sum_j = 0.0;
    for (i, &l) in lambdas.iter().enumerate() {
        sum += l;
        if sum >= 0.0 {
            j = i + 1;
            sum_j = sum;
        }
    }
    if j == 0 {
        return Ok(0.0);
    }
    if j == lambdas.len() {
        return Err(Error::UndefinedDimension);
    }
    Ok(j as f64 + sum_j / lambdas[j].abs())
}
