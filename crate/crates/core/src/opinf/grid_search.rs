use crate::error::{Error, Result};

/// `count` log-equidistant points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count >= 1);
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Regularization grids used for wall-bounded flow data: 25 points over
/// `[1e6, 1e12]` for `γ1` and 20 over `[1e12, 1e16]` for `γ2`.
pub fn channel_flow_grids() -> (Vec<f64>, Vec<f64>) {
    (log_grid(1e6, 1e12, 25), log_grid(1e12, 1e16, 20))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridChoice {
    pub gamma1: f64,
    pub gamma2: f64,
    pub error: f64,
}

/// Exhaustive search over `gamma1 × gamma2`. `evaluate` returns a
/// validation error; non-finite values and `Err` count as unstable.
/// Ties go to the larger `(γ1, γ2)` in lexicographic order.
pub fn grid_search<F>(gamma1: &[f64], gamma2: &[f64], mut evaluate: F) -> Result<GridChoice>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    if gamma1.is_empty() || gamma2.is_empty() {
        return Err(Error::InvalidArgument("empty regularization grid".into()));
    }
    let mut best: Option<GridChoice> = None;
    for &g1 in gamma1 {
        for &g2 in gamma2 {
            let err = match evaluate(g1, g2) {
                Ok(e) if e.is_finite() => e,
                _ => continue,
            };
            let better = match best {
                None => true,
                Some(b) => err < b.error || (err == b.error && (g1, g2) > (b.gamma1, b.gamma2)),
            };
            if better {
                best = Some(GridChoice {
                    gamma1: g1,
                    gamma2: g2,
                    error: err,
                });
            }
        }
    }
    best.ok_or(Error::AllUnstable)
}
