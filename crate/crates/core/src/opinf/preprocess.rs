use crate::error::{Error, Result};
use crate::linalg::CompensatedSum;

/// Per-component centering and min-max scaling to `[-1, 1]`.
///
/// Components whose centered range is empty are only centered.
#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessor {
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Single-pass accumulator for [`Preprocessor`].
#[derive(Clone, Debug)]
pub struct PreprocessorFit {
    sum: Vec<CompensatedSum>,
    min: Vec<f64>,
    max: Vec<f64>,
    count: usize,
}

impl PreprocessorFit {
    pub fn new(n: usize) -> Self {
        Self {
            sum: vec![CompensatedSum::new(); n],
            min: vec![f64::INFINITY; n],
            max: vec![f64::NEG_INFINITY; n],
            count: 0,
        }
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.sum.len() {
            return Err(Error::DimensionMismatch {
                expected: self.sum.len(),
                found: x.len(),
            });
        }
        for (i, &xi) in x.iter().enumerate() {
            self.sum[i].add(xi);
            self.min[i] = self.min[i].min(xi);
            self.max[i] = self.max[i].max(xi);
        }
        self.count += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<Preprocessor> {
        if self.count == 0 {
            return Err(Error::InvalidArgument("no snapshots to fit".into()));
        }
        let k = self.count as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s.value() / k).collect();
        // Min and max commute with the shift, so raw extremes suffice.
        let lo = self.min.iter().zip(&mean).map(|(a, m)| a - m).collect();
        let hi = self.max.iter().zip(&mean).map(|(a, m)| a - m).collect();
        Ok(Preprocessor { mean, lo, hi })
    }
}

impl Preprocessor {
    pub fn fit<'a>(snapshots: impl IntoIterator<Item = &'a [f64]>, n: usize) -> Result<Self> {
        let mut fit = PreprocessorFit::new(n);
        for x in snapshots {
            fit.push(x)?;
        }
        fit.finish()
    }

    fn scale(&self, i: usize) -> Option<(f64, f64)> {
        let (lo, hi) = (self.lo[i], self.hi[i]);
        (hi > lo).then_some((lo, hi - lo))
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &xi)| {
                let c = xi - self.mean[i];
                match self.scale(i) {
                    Some((lo, w)) => 2.0 * (c - lo) / w - 1.0,
                    None => c,
                }
            })
            .collect()
    }

    pub fn invert(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(i, &yi)| {
                let c = match self.scale(i) {
                    Some((lo, w)) => (yi + 1.0) * w / 2.0 + lo,
                    None => yi,
                };
                c + self.mean[i]
            })
            .collect()
    }

    /// Time derivatives transform by the scale only.
    pub fn apply_derivative(&self, xdot: &[f64]) -> Vec<f64> {
        xdot.iter()
            .enumerate()
            .map(|(i, &v)| match self.scale(i) {
                Some((_, w)) => 2.0 * v / w,
                None => v,
            })
            .collect()
    }
}
