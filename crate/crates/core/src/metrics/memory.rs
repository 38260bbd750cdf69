use crate::error::{Error, Result};
use crate::opinf::{Layout, Paradigm, Quadratic, SvdMethod};

/// Which sketch storage is charged to the streaming SVD.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SketchAccounting {
    /// Leading terms only: `n r` (Baker) or `n (q + ζ)` (sketching).
    Leading,
    /// Everything held during the pass: adds the `q × K` co-range sketch,
    /// the `s × s` core sketch, the materialized sparse maps, and the `K × r`
    /// right factor when the paradigm reformulates from it.
    Full,
}

/// Problem sizes for the float-count model. `k_svd` snapshots feed the
/// SVD; `k_ls` rows feed each least-squares problem.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryBudget {
    pub paradigm: Paradigm,
    pub svd_method: SvdMethod,
    pub n: usize,
    pub k_svd: usize,
    pub k_ls: usize,
    pub r: usize,
    pub m: usize,
    pub quadratic: Quadratic,
    pub constant: bool,
    /// Sketch sizes; ignored for Baker.
    pub q: usize,
    pub s: usize,
    pub accounting: SketchAccounting,
}

impl MemoryBudget {
    pub fn layout(&self) -> Layout {
        Layout {
            r: self.r,
            quadratic: self.quadratic,
            m: self.m,
            constant: self.constant,
        }
    }

    /// Operator dimension `d`.
    pub fn d(&self) -> usize {
        self.layout().dim()
    }

    pub fn zeta(&self) -> usize {
        self.q.min(8)
    }
}

/// Float counts (8-byte values).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MemoryCost {
    pub svd_floats: f64,
    pub ls_floats: f64,
}

impl MemoryCost {
    pub fn total(&self) -> f64 {
        self.svd_floats + self.ls_floats
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MemoryReport {
    pub batch: MemoryCost,
    pub streaming: MemoryCost,
}

impl MemoryReport {
    fn pct(batch: f64, streaming: f64) -> f64 {
        100.0 * (1.0 - streaming / batch)
    }

    pub fn svd_reduction_pct(&self) -> f64 {
        Self::pct(self.batch.svd_floats, self.streaming.svd_floats)
    }

    pub fn ls_reduction_pct(&self) -> f64 {
        Self::pct(self.batch.ls_floats, self.streaming.ls_floats)
    }

    pub fn total_reduction_pct(&self) -> f64 {
        Self::pct(self.batch.total(), self.streaming.total())
    }
}

/// Batch: `n (K + r)` for the SVD and `d (K_ls + d)` for one LS solve.
/// Streaming: the streaming SVD storage, plus `d²` for recursive paradigms
/// or the batch LS storage for paradigms that solve once.
pub fn memory_cost(b: &MemoryBudget) -> Result<MemoryReport> {
    if b.n == 0 || b.k_svd == 0 {
        return Err(Error::InvalidArgument(
            "memory budget needs n > 0 and K > 0".into(),
        ));
    }
    if b.svd_method == SvdMethod::Sketchy && b.q <= b.r {
        return Err(Error::InvalidArgument(format!(
            "sketch size q={} must exceed r={}",
            b.q, b.r
        )));
    }
    let (n, k, r) = (b.n as f64, b.k_svd as f64, b.r as f64);
    let d = b.d() as f64;
    let k_ls = b.k_ls as f64;
    let batch_ls = d * (k_ls + d);
    let batch = MemoryCost {
        svd_floats: n * (k + r),
        ls_floats: batch_ls,
    };

    let (q, s, zeta) = (b.q as f64, b.s as f64, b.zeta() as f64);
    let reformulated = !b.paradigm.is_projected();
    let svd = match (b.svd_method, b.accounting) {
        (SvdMethod::Baker, SketchAccounting::Leading) => n * r,
        (SvdMethod::Sketchy, SketchAccounting::Leading) => n * (q + zeta),
        (SvdMethod::Baker, SketchAccounting::Full) => {
            n * r + if reformulated { k * r } else { 0.0 }
        }
        (SvdMethod::Sketchy, SketchAccounting::Full) => {
            // Range n×q, co-range q×K, core s×s, Υ and Ξ with ζ entries per
            // column (value and index).
            n * q + q * k + s * s + 2.0 * zeta * n * 2.0 + if reformulated { k * r } else { 0.0 }
        }
    };
    let ls = if b.paradigm.is_recursive() {
        d * d
    } else {
        batch_ls
    };
    Ok(MemoryReport {
        batch,
        streaming: MemoryCost {
            svd_floats: svd,
            ls_floats: ls,
        },
    })
}
