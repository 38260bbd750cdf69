use nalgebra::{DMatrix, DVector};

use super::assemble::{build_reformulated, projected_row};
use super::finite_diff::{FdScheme, FdWindow, FiniteDiffOp};
use super::model::{Layout, Quadratic, ReducedModel};
use crate::error::{Error, Result};
use crate::recursive_ls::{augment, batch_ls, Regularizer, Rls, RlsStep, SqrtRls};
use crate::snapshots::SnapshotSource;
use crate::stream_svd::{BakerIsvd, SketchySvd, TruncatedSvd};

/// Progress callback: `(stage, snapshots or rows done)`.
pub type Progress<'a> = &'a mut dyn FnMut(&str, usize);

/// Progress callback that ignores its arguments.
pub fn no_progress(_: &str, _: usize) {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Paradigm {
    /// Streaming SVD, reformulated data, one batch solve.
    IsvdLs,
    /// Streaming SVD, reformulated data, recursive solve.
    IsvdRls,
    /// Streaming SVD, second projection pass, one batch solve.
    IsvdProjectLs,
    /// Streaming SVD, second projection pass, recursive solve.
    IsvdProjectRls,
}

impl Paradigm {
    pub const ALL: [Paradigm; 4] = [
        Paradigm::IsvdLs,
        Paradigm::IsvdRls,
        Paradigm::IsvdProjectLs,
        Paradigm::IsvdProjectRls,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Paradigm::IsvdLs => "isvd-ls",
            Paradigm::IsvdRls => "isvd-rls",
            Paradigm::IsvdProjectLs => "isvd-project-ls",
            Paradigm::IsvdProjectRls => "isvd-project-rls",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn is_projected(self) -> bool {
        matches!(self, Paradigm::IsvdProjectLs | Paradigm::IsvdProjectRls)
    }

    pub fn is_recursive(self) -> bool {
        matches!(self, Paradigm::IsvdRls | Paradigm::IsvdProjectRls)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SvdMethod {
    Baker,
    Sketchy,
}

impl SvdMethod {
    pub fn name(self) -> &'static str {
        match self {
            SvdMethod::Baker => "baker",
            SvdMethod::Sketchy => "sketchy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "baker" => Some(SvdMethod::Baker),
            "sketchy" => Some(SvdMethod::Sketchy),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RlsMethod {
    Standard,
    InverseQr,
}

impl RlsMethod {
    pub fn name(self) -> &'static str {
        match self {
            RlsMethod::Standard => "standard",
            RlsMethod::InverseQr => "iqr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "standard" => Some(RlsMethod::Standard),
            "iqr" => Some(RlsMethod::InverseQr),
            _ => None,
        }
    }
}

/// Which operator terms the reduced model carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Terms {
    pub quadratic: Quadratic,
    pub input: bool,
    pub constant: bool,
}

impl Terms {
    pub fn layout(&self, r: usize, m: usize) -> Layout {
        Layout {
            r,
            quadratic: self.quadratic,
            m: if self.input { m } else { 0 },
            constant: self.constant,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub paradigm: Paradigm,
    pub svd_method: SvdMethod,
    pub rls_method: RlsMethod,
    pub r: usize,
    pub terms: Terms,
    pub gamma1: f64,
    pub gamma2: f64,
    pub fd_scheme: FdScheme,
    pub dt: f64,
    /// Snapshot counts (batch paradigms) or row counts (recursive paradigms)
    /// at which intermediate models are kept.
    pub checkpoints: Vec<usize>,
    pub seed: u64,
    /// Record `‖Ω_batch − Ω_k‖_F` after every recursive row.
    pub trace: bool,
}

/// Default checkpoint schedule `K/16, K/8, K/4, K/2, K`.
pub fn default_checkpoints(k: usize) -> Vec<usize> {
    let mut c: Vec<usize> = [16, 8, 4, 2, 1].iter().map(|d| (k / d).max(1)).collect();
    c.dedup();
    c
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub k: usize,
    pub model: ReducedModel,
    pub basis: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub model: ReducedModel,
    pub operator: DMatrix<f64>,
    pub layout: Layout,
    pub basis: TruncatedSvd,
    /// Batch solution on the same rows, present when a trace was requested.
    pub batch_operator: Option<DMatrix<f64>>,
    pub trace: Option<Vec<f64>>,
    pub checkpoints: Vec<Checkpoint>,
    pub rows: usize,
}

enum Recursive {
    Standard(Rls),
    Sqrt(SqrtRls),
}

impl Recursive {
    fn new(method: RlsMethod, reg: &Regularizer, r: usize) -> Self {
        match method {
            RlsMethod::Standard => Recursive::Standard(Rls::new(reg, r)),
            RlsMethod::InverseQr => Recursive::Sqrt(SqrtRls::new(reg, r)),
        }
    }

    fn update(&mut self, d: &[f64], r: &[f64]) -> Result<RlsStep> {
        match self {
            Recursive::Standard(s) => s.update(d, r),
            Recursive::Sqrt(s) => s.update(d, r),
        }
    }

    fn operator(&self) -> &DMatrix<f64> {
        match self {
            Recursive::Standard(s) => s.operator(),
            Recursive::Sqrt(s) => s.operator(),
        }
    }
}

/// Result of the streaming basis pass.
#[derive(Clone, Debug)]
pub struct BasisPass {
    pub svd: TruncatedSvd,
    /// Inputs seen during the pass, one column per snapshot.
    pub inputs: Option<DMatrix<f64>>,
    /// Factorizations after the first `k` snapshots.
    pub checkpoints: Vec<(usize, TruncatedSvd)>,
}

/// One pass over `source` building a rank-`r` factorization.
pub fn stream_basis(
    source: &mut dyn SnapshotSource,
    method: SvdMethod,
    r: usize,
    seed: u64,
    track_w: bool,
    checkpoints: &[usize],
    progress: Progress,
) -> Result<BasisPass> {
    let (n, k_total, m) = (source.dim(), source.len(), source.input_dim());
    source.rewind()?;
    let mut inputs = (m > 0).then(|| DMatrix::zeros(m, k_total));
    let mut marks = Vec::new();

    enum Svd {
        Baker(Box<BakerIsvd>),
        Sketchy(Box<SketchySvd>),
    }
    let mut svd = match method {
        SvdMethod::Baker => Svd::Baker(Box::new(BakerIsvd::new(n, r, track_w))),
        SvdMethod::Sketchy => Svd::Sketchy(Box::new(SketchySvd::new(n, k_total, r, seed))),
    };
    let mut k = 0;
    while let Some(snap) = source.next_snapshot()? {
        if k >= k_total {
            return Err(Error::InvalidArgument(
                "source produced more snapshots than it declared".into(),
            ));
        }
        match &mut svd {
            Svd::Baker(b) => b.push(&snap.state)?,
            Svd::Sketchy(s) => s.push(&snap.state)?,
        }
        if let Some(u) = inputs.as_mut() {
            if snap.input.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: snap.input.len(),
                });
            }
            u.column_mut(k).copy_from_slice(&snap.input);
        }
        k += 1;
        if checkpoints.contains(&k) && k < k_total {
            let t = match &svd {
                Svd::Baker(b) => b.snapshot(),
                Svd::Sketchy(s) => s.snapshot()?,
            };
            marks.push((k, t));
        }
        progress("basis", k);
    }
    if k != k_total {
        return Err(Error::DimensionMismatch {
            expected: k_total,
            found: k,
        });
    }
    let svd = match svd {
        Svd::Baker(b) => b.into_svd(),
        Svd::Sketchy(s) => s.finalize()?,
    };
    Ok(BasisPass {
        svd,
        inputs,
        checkpoints: marks,
    })
}

/// Runs one of the four streaming pipelines on `source`.
pub fn solve_paradigm(
    source: &mut dyn SnapshotSource,
    cfg: &SolverConfig,
    progress: Progress,
) -> Result<SolveOutput> {
    if cfg.r == 0 {
        return Err(Error::InvalidArgument(
            "reduced dimension must be positive".into(),
        ));
    }
    if cfg.paradigm.is_projected() && !source.has_derivatives() {
        return Err(Error::MissingDerivatives);
    }
    let m = source.input_dim();
    cfg.terms
        .layout(cfg.r, m)
        .regularizer(cfg.gamma1, cfg.gamma2)?;
    let need_w = !cfg.paradigm.is_projected();
    let basis_marks: &[usize] = if cfg.paradigm.is_recursive() {
        &[]
    } else {
        &cfg.checkpoints
    };
    let pass = stream_basis(
        source,
        cfg.svd_method,
        cfg.r,
        cfg.seed,
        need_w,
        basis_marks,
        &mut *progress,
    )?;
    if cfg.paradigm.is_projected() {
        fit_projected(source, &pass.svd, &pass.checkpoints, cfg, progress)
    } else {
        let segments = source.segments();
        fit_reformulated(
            &pass.svd,
            pass.inputs.as_ref(),
            &segments,
            &pass.checkpoints,
            cfg,
            progress,
        )
    }
}

/// Operator fit for the reformulated paradigms from an existing
/// factorization. Row `j` of `svd.w` is snapshot `j`; `segments` and the
/// columns of `inputs` use the same indexing. `marks` are factorizations of
/// leading snapshot prefixes, each fitted as a checkpoint (batch solve only).
pub fn fit_reformulated(
    svd: &TruncatedSvd,
    inputs: Option<&DMatrix<f64>>,
    segments: &[Vec<usize>],
    marks: &[(usize, TruncatedSvd)],
    cfg: &SolverConfig,
    progress: Progress,
) -> Result<SolveOutput> {
    if cfg.paradigm.is_projected() {
        return Err(Error::InvalidArgument(format!(
            "{} is not a reformulated paradigm",
            cfg.paradigm.name()
        )));
    }
    let w = svd
        .w
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("right singular vectors not tracked".into()))?;
    let m = inputs.map_or(0, |u| u.nrows());
    let layout = cfg.terms.layout(svd.rank(), m);
    let reg = layout.regularizer(cfg.gamma1, cfg.gamma2)?;
    let inputs = if cfg.terms.input { inputs } else { None };
    if let Some(u) = inputs {
        if u.ncols() != w.nrows() {
            return Err(Error::DimensionMismatch {
                expected: w.nrows(),
                found: u.ncols(),
            });
        }
    }

    let mut out = if cfg.paradigm == Paradigm::IsvdLs {
        let fd = FiniteDiffOp::new(cfg.fd_scheme, cfg.dt, segments)?;
        let (dbar, rbar) = build_reformulated(&svd.s, w, inputs, &fd, &layout, &reg)?;
        let omega = batch_ls(&dbar, &rbar)?;
        let mut checkpoints = Vec::new();
        for (k, t) in marks {
            let fd_k = fd.truncated(*k);
            if fd_k.is_empty() {
                continue;
            }
            let lay = Layout {
                r: t.rank(),
                ..layout
            };
            let reg_k = lay.regularizer(cfg.gamma1, cfg.gamma2)?;
            let w_k =
                t.w.as_ref()
                    .expect("right factor tracked")
                    .rows(0, *k)
                    .into_owned();
            let u_k = inputs.map(|u| u.columns(0, *k).into_owned());
            let (db, rb) = build_reformulated(&t.s, &w_k, u_k.as_ref(), &fd_k, &lay, &reg_k)?;
            let o = batch_ls(&db, &rb)?;
            checkpoints.push(Checkpoint {
                k: *k,
                model: ReducedModel::from_operator(&o, &lay)?,
                basis: t.v.clone(),
            });
        }
        SolveOutput {
            model: ReducedModel::from_operator(&omega, &layout)?,
            operator: omega,
            layout,
            basis: svd.clone(),
            batch_operator: None,
            trace: None,
            checkpoints,
            rows: fd.len(),
        }
    } else {
        let batch = if cfg.trace {
            let fd = FiniteDiffOp::new(cfg.fd_scheme, cfg.dt, segments)?;
            let (dbar, rbar) = build_reformulated(&svd.s, w, inputs, &fd, &layout, &reg)?;
            Some(batch_ls(&dbar, &rbar)?)
        } else {
            None
        };
        let mut rec = Recursive::new(cfg.rls_method, &reg, layout.r);
        let mut tracker = RowTracker::new(batch.clone(), &cfg.checkpoints);
        let mut row = vec![0.0; layout.dim()];
        let empty = Vec::new();
        let mut window = FdWindow::new(cfg.fd_scheme, cfg.dt);
        for seg in segments {
            let mut samples = Vec::new();
            for &idx in seg {
                let xhat =
                    DVector::from_iterator(layout.r, (0..layout.r).map(|i| svd.s[i] * w[(idx, i)]));
                samples.extend(window.push(xhat));
                drain(
                    &mut samples,
                    seg,
                    inputs,
                    &empty,
                    &layout,
                    &mut row,
                    &mut rec,
                    &mut tracker,
                    &mut *progress,
                )?;
            }
            samples.extend(window.finish()?);
            drain(
                &mut samples,
                seg,
                inputs,
                &empty,
                &layout,
                &mut row,
                &mut rec,
                &mut tracker,
                &mut *progress,
            )?;
        }
        finish_recursive(rec, tracker, batch, layout, svd.clone())?
    };
    if cfg.paradigm.is_recursive() {
        for c in &mut out.checkpoints {
            c.basis = out.basis.v.clone();
        }
    }
    Ok(out)
}

/// Operator fit for the projection paradigms: one more pass over `source`
/// projecting states and derivatives onto `basis.v`. `marks` as in
/// [`fit_reformulated`].
pub fn fit_projected(
    source: &mut dyn SnapshotSource,
    basis: &TruncatedSvd,
    marks: &[(usize, TruncatedSvd)],
    cfg: &SolverConfig,
    progress: Progress,
) -> Result<SolveOutput> {
    if !cfg.paradigm.is_projected() {
        return Err(Error::InvalidArgument(format!(
            "{} is not a projection paradigm",
            cfg.paradigm.name()
        )));
    }
    if !source.has_derivatives() {
        return Err(Error::MissingDerivatives);
    }
    if basis.v.nrows() != source.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            found: basis.v.nrows(),
        });
    }
    let layout = cfg.terms.layout(basis.rank(), source.input_dim());
    let reg = layout.regularizer(cfg.gamma1, cfg.gamma2)?;
    let v = &basis.v;
    let mut out = if cfg.paradigm == Paradigm::IsvdProjectLs {
        let omega = projected_batch(source, v, &layout, &reg, usize::MAX)?;
        let mut checkpoints = Vec::new();
        for (k, t) in marks {
            let lay = Layout {
                r: t.rank(),
                ..layout
            };
            let reg_k = lay.regularizer(cfg.gamma1, cfg.gamma2)?;
            let o = projected_batch(source, &t.v, &lay, &reg_k, *k)?;
            checkpoints.push(Checkpoint {
                k: *k,
                model: ReducedModel::from_operator(&o, &lay)?,
                basis: t.v.clone(),
            });
        }
        SolveOutput {
            model: ReducedModel::from_operator(&omega, &layout)?,
            operator: omega,
            layout,
            basis: basis.clone(),
            batch_operator: None,
            trace: None,
            checkpoints,
            rows: source.len(),
        }
    } else {
        let batch = if cfg.trace {
            Some(projected_batch(source, v, &layout, &reg, usize::MAX)?)
        } else {
            None
        };
        let mut rec = Recursive::new(cfg.rls_method, &reg, layout.r);
        let mut tracker = RowTracker::new(batch.clone(), &cfg.checkpoints);
        source.rewind()?;
        while let Some(snap) = source.next_snapshot()? {
            let xdot = snap.derivative.as_ref().ok_or(Error::MissingDerivatives)?;
            let u: &[f64] = if layout.m > 0 { &snap.input } else { &[] };
            let (d, r) = projected_row(v, &snap.state, xdot, u, &layout)?;
            rec.update(&d, &r)?;
            tracker.after_row(rec.operator());
            progress("rows", tracker.rows);
        }
        finish_recursive(rec, tracker, batch, layout, basis.clone())?
    };
    if cfg.paradigm.is_recursive() {
        for c in &mut out.checkpoints {
            c.basis = out.basis.v.clone();
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn drain(
    samples: &mut Vec<(usize, DVector<f64>, DVector<f64>)>,
    seg: &[usize],
    inputs: Option<&DMatrix<f64>>,
    empty: &Vec<f64>,
    layout: &Layout,
    row: &mut [f64],
    rec: &mut Recursive,
    tracker: &mut RowTracker,
    progress: Progress,
) -> Result<()> {
    for (j, xs, deriv) in samples.drain(..) {
        let u: Vec<f64> = match inputs {
            Some(u) => u.column(seg[j]).iter().cloned().collect(),
            None => empty.clone(),
        };
        layout.fill_row(xs.as_slice(), &u, row);
        rec.update(row, deriv.as_slice())?;
        tracker.after_row(rec.operator());
        progress("rows", tracker.rows);
    }
    Ok(())
}

struct RowTracker<'a> {
    batch: Option<DMatrix<f64>>,
    marks: &'a [usize],
    trace: Vec<f64>,
    kept: Vec<(usize, DMatrix<f64>)>,
    rows: usize,
}

impl<'a> RowTracker<'a> {
    fn new(batch: Option<DMatrix<f64>>, marks: &'a [usize]) -> Self {
        Self {
            batch,
            marks,
            trace: Vec::new(),
            kept: Vec::new(),
            rows: 0,
        }
    }

    fn after_row(&mut self, o: &DMatrix<f64>) {
        self.rows += 1;
        if let Some(b) = &self.batch {
            self.trace.push((b - o).norm());
        }
        if self.marks.contains(&self.rows) {
            self.kept.push((self.rows, o.clone()));
        }
    }
}

fn finish_recursive(
    rec: Recursive,
    tracker: RowTracker,
    batch: Option<DMatrix<f64>>,
    layout: Layout,
    basis: TruncatedSvd,
) -> Result<SolveOutput> {
    let omega = rec.operator().clone();
    let checkpoints = tracker
        .kept
        .iter()
        .map(|(k, o)| {
            Ok(Checkpoint {
                k: *k,
                model: ReducedModel::from_operator(o, &layout)?,
                basis: DMatrix::zeros(0, 0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SolveOutput {
        model: ReducedModel::from_operator(&omega, &layout)?,
        operator: omega,
        layout,
        basis,
        trace: batch.is_some().then_some(tracker.trace),
        batch_operator: batch,
        checkpoints,
        rows: tracker.rows,
    })
}

/// Second pass: projects the first `limit` snapshots and solves in batch.
fn projected_batch(
    source: &mut dyn SnapshotSource,
    v: &DMatrix<f64>,
    layout: &Layout,
    reg: &Regularizer,
    limit: usize,
) -> Result<DMatrix<f64>> {
    let rows = source.len().min(limit);
    let mut d = DMatrix::zeros(rows, layout.dim());
    let mut r = DMatrix::zeros(rows, layout.r);
    source.rewind()?;
    let mut k = 0;
    while k < rows {
        let snap = source.next_snapshot()?.ok_or(Error::DimensionMismatch {
            expected: rows,
            found: k,
        })?;
        let xdot = snap.derivative.as_ref().ok_or(Error::MissingDerivatives)?;
        let u: &[f64] = if layout.m > 0 { &snap.input } else { &[] };
        let (dr, rr) = projected_row(v, &snap.state, xdot, u, layout)?;
        d.row_mut(k).copy_from_slice(&dr);
        r.row_mut(k).copy_from_slice(&rr);
        k += 1;
    }
    let (dbar, rbar) = augment(&d, &r, reg)?;
    batch_ls(&dbar, &rbar)
}
