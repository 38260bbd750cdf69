use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::config::ExperimentConfig;
use super::generate::kse_paths;
use super::{
    memory_table, method_label, method_variants, par_map, save_matrix, solver_config, Reporter,
};
use crate::error::{Error, Result};
use crate::io::{FileSource, TrajectoryFiles};
use crate::metrics::{
    kaplan_yorke, lyapunov_spectrum, relative_projection_errors, subspace_angle_error,
    LyapunovConfig, MetricTable,
};
use crate::models::{
    intrusive_galerkin, kse_initial_condition, kse_model, FullModel, KseSolver, KseTrainingSource,
    RomCnab,
};
use crate::opinf::{fit_projected, no_progress, stream_basis, Paradigm, ReducedModel, SvdMethod};
use crate::snapshots::{MatrixSource, SnapshotSource};
use crate::stream_svd::{batch_svd, TruncatedSvd};

/// Averaged Lyapunov spectrum of one model.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovEntry {
    pub method: String,
    /// Reduced dimension; the state dimension for the full model.
    pub r: usize,
    /// Descending. Empty when every run blew up.
    pub exponents: Vec<f64>,
    pub kaplan_yorke: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct KseReport {
    pub tables: Vec<MetricTable>,
    pub lyapunov: Vec<LyapunovEntry>,
    pub snapshots: usize,
}

impl KseReport {
    pub fn entry(&self, method: &str, r: usize) -> Option<&LyapunovEntry> {
        self.lyapunov
            .iter()
            .find(|e| e.method == method && e.r == r)
    }

    pub fn full_model(&self) -> Option<&LyapunovEntry> {
        self.lyapunov.iter().find(|e| e.method == "full")
    }
}

/// `(a, b)` amplitude pairs, `a` outermost.
pub fn kse_initial_conditions(cfg: &ExperimentConfig) -> Vec<(f64, f64)> {
    cfg.ic_a
        .iter()
        .flat_map(|&a| cfg.ic_b.iter().map(move |&b| (a, b)))
        .collect()
}

/// The full model and the training stream (simulated or read from `data_dir`).
pub fn kse_sources(cfg: &ExperimentConfig) -> Result<(FullModel, Box<dyn SnapshotSource>)> {
    let model = kse_model(cfg.n, cfg.length, cfg.mu[0])?;
    let pairs = kse_initial_conditions(cfg);
    let src: Box<dyn SnapshotSource> = match &cfg.data_dir {
        Some(dir) => {
            let files = (0..pairs.len())
                .map(|j| {
                    let (states, deriv) = kse_paths(dir, j);
                    TrajectoryFiles {
                        states,
                        inputs: None,
                        derivatives: Some(deriv),
                        skip: 0,
                    }
                })
                .collect();
            let src = FileSource::new(files)?;
            if src.dim() != cfg.n {
                return Err(Error::Config(format!(
                    "stored states have n = {}, config has {}",
                    src.dim(),
                    cfg.n
                )));
            }
            Box::new(src)
        }
        None => {
            let ics = pairs
                .iter()
                .map(|&(a, b)| kse_initial_condition(cfg.n, cfg.length, a, b))
                .collect();
            Box::new(KseTrainingSource::new(
                &model,
                ics,
                cfg.sim_dt,
                cfg.save_every,
                cfg.saves(),
            )?)
        }
    };
    Ok((model, src))
}

fn averaged_spectrum(runs: Vec<Result<Vec<f64>>>) -> Vec<f64> {
    let ok: Vec<Vec<f64>> = runs.into_iter().filter_map(|r| r.ok()).collect();
    let Some(first) = ok.first() else {
        return Vec::new();
    };
    let mut mean = vec![0.0; first.len()];
    for s in &ok {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v / ok.len() as f64;
        }
    }
    mean.sort_by(|a, b| b.total_cmp(a));
    mean
}

fn entry(method: &str, r: usize, exponents: Vec<f64>) -> LyapunovEntry {
    let kaplan_yorke = if exponents.is_empty() {
        None
    } else {
        kaplan_yorke(&exponents).ok()
    };
    LyapunovEntry {
        method: method.to_string(),
        r,
        exponents,
        kaplan_yorke,
    }
}

/// Projection-paradigm pipeline on chaotic data: streaming basis, recursive
/// fits per rank, intrusive and batch baselines, and Lyapunov spectra of
/// every model against the full model.
pub fn run_kse(cfg: &ExperimentConfig, out: Option<&Path>, rep: &Reporter) -> Result<KseReport> {
    let (model, mut src) = kse_sources(cfg)?;
    let (n, k_total) = (src.dim(), src.len());
    let segments = src.segments();
    let r_max = cfg.r_max();
    if r_max > n {
        return Err(Error::Config(format!(
            "largest r = {r_max} exceeds the state dimension {n}"
        )));
    }
    rep.message(&format!(
        "kse: {} trajectories, {k_total} snapshots, n = {n}",
        segments.len()
    ));

    let main = stream_basis(
        src.as_mut(),
        cfg.svd_method,
        r_max,
        cfg.seed,
        false,
        &[],
        &mut rep.hook(cfg.svd_method.name()),
    )?;
    let other_method = match cfg.svd_method {
        SvdMethod::Baker => SvdMethod::Sketchy,
        SvdMethod::Sketchy => SvdMethod::Baker,
    };
    let other = stream_basis(
        src.as_mut(),
        other_method,
        r_max,
        cfg.seed,
        false,
        &[],
        &mut rep.hook(other_method.name()),
    )?;
    for b in [&main.svd, &other.svd] {
        if b.rank() < r_max {
            return Err(Error::Config(format!(
                "snapshots have rank {} < largest r = {r_max}",
                b.rank()
            )));
        }
    }

    // Batch baseline: states and derivatives in memory.
    let mut x = DMatrix::zeros(n, k_total);
    let mut xdot = DMatrix::zeros(n, k_total);
    src.rewind()?;
    let mut k = 0;
    let mut hook = rep.hook("batch collect");
    while let Some(s) = src.next_snapshot()? {
        x.column_mut(k).copy_from_slice(&s.state);
        xdot.column_mut(k)
            .copy_from_slice(s.derivative.as_ref().ok_or(Error::MissingDerivatives)?);
        k += 1;
        hook("snapshots", k);
    }
    drop(src);
    let batch = batch_svd(&x, r_max);
    let starts: Vec<Vec<f64>> = segments
        .iter()
        .take(cfg.lyapunov_ics)
        .map(|s| {
            x.column(*s.last().expect("non-empty trajectory"))
                .iter()
                .copied()
                .collect()
        })
        .collect();

    let project = |v: &DMatrix<f64>| (v.tr_mul(&x), v.tr_mul(&xdot));
    let (main_x, main_dx) = project(&main.svd.v);
    let (batch_x, batch_dx) = project(&batch.v);
    drop(xdot);

    let mut svd_table = MetricTable::new(
        "svd_assessment",
        &[
            "method",
            "r",
            "subspace_angle_error",
            "relative_projection_error",
        ],
    );
    let mut xsrc = MatrixSource::new(x);
    let batch_rpe = relative_projection_errors(&mut xsrc, &batch.v, &cfg.r)?;
    for (i, &r) in cfg.r.iter().enumerate() {
        svd_table.push([
            "batch".to_string(),
            r.to_string(),
            "0".into(),
            batch_rpe[i].to_string(),
        ])?;
    }
    for (method, basis) in [(cfg.svd_method, &main.svd), (other_method, &other.svd)] {
        let rpe = relative_projection_errors(&mut xsrc, &basis.v, &cfg.r)?;
        for (i, &r) in cfg.r.iter().enumerate() {
            let angle = subspace_angle_error(
                &batch.v.columns(0, r).into_owned(),
                &basis.v.columns(0, r).into_owned(),
            )?;
            svd_table.push([
                method.name().to_string(),
                r.to_string(),
                angle.to_string(),
                rpe[i].to_string(),
            ])?;
        }
    }
    drop(xsrc);

    // Reduced streams: the leading r coordinates of a rank-r_max projection
    // are the rank-r projection, so one pass serves every r.
    let reduced_source =
        |xr: &DMatrix<f64>, dxr: &DMatrix<f64>, r: usize| -> Result<MatrixSource> {
            Ok(MatrixSource::new(xr.rows(0, r).into_owned())
                .with_derivatives(dxr.rows(0, r).into_owned())?
                .with_segments(segments.clone()))
        };
    let identity = |svd: &TruncatedSvd, r: usize| TruncatedSvd {
        v: DMatrix::identity(r, r),
        s: svd.s.rows(0, r).into_owned(),
        w: None,
    };

    let lyap = |count: usize, seed: u64| LyapunovConfig {
        count,
        dt: cfg.lyapunov_dt,
        t_total: cfg.lyapunov_t_total,
        t_transient: 0.2 * cfg.lyapunov_t_total,
        renorm_every: 10,
        seed,
    };
    let mut lyapunov = Vec::new();
    if cfg.lyapunov_count > 0 {
        rep.message("kse: full-model Lyapunov spectrum");
        let solver = KseSolver::new(&model)?;
        let runs = par_map(&starts, |x0| {
            lyapunov_spectrum(
                solver.clone(),
                x0,
                &lyap(cfg.lyapunov_count.min(n), cfg.seed),
            )
        });
        lyapunov.push(entry("full", n, averaged_spectrum(runs)));
    }

    let mut trace_table = MetricTable::new("streaming_trace", &["method", "r", "rows", "mr_soe"]);
    let mut failed: Vec<(String, usize)> = Vec::new();
    let op_dir = out.map(|o| o.join("operators"));
    for &r in &cfg.r {
        rep.message(&format!("kse: r = {r}"));
        let vb = batch.v.columns(0, r).into_owned();
        let vs = main.svd.v.columns(0, r).into_owned();
        let mut roms: Vec<(String, ReducedModel, DMatrix<f64>)> = Vec::new();
        roms.push((
            "intrusive".into(),
            intrusive_galerkin(&vb, &model)?,
            vb.clone(),
        ));

        let gamma = (cfg.gamma1, cfg.gamma2);
        let scfg = solver_config(
            cfg,
            Paradigm::IsvdProjectLs,
            None,
            r,
            gamma,
            Vec::new(),
            false,
        );
        let mut bsrc = reduced_source(&batch_x, &batch_dx, r)?;
        let fit = fit_projected(
            &mut bsrc,
            &identity(&batch, r),
            &[],
            &scfg,
            &mut no_progress,
        )?;
        if let Some(dir) = &op_dir {
            save_matrix(&dir.join("batch-opinf"), &format!("r{r:02}"), &fit.operator)?;
        }
        roms.push(("batch-opinf".into(), fit.model, vb.clone()));

        for (paradigm, rls) in method_variants(cfg) {
            let label = method_label(paradigm, rls);
            let tracing = cfg.trace && paradigm.is_recursive();
            let scfg = solver_config(cfg, paradigm, rls, r, gamma, Vec::new(), tracing);
            let mut msrc = reduced_source(&main_x, &main_dx, r)?;
            let mut hook = rep.hook(format!("{label} r={r}"));
            let fit = match fit_projected(&mut msrc, &identity(&main.svd, r), &[], &scfg, &mut hook)
            {
                Ok(f) => f,
                // A diverged recursive solve is a result, not a reason to stop.
                Err(e) if super::exit_code(&e) == 3 => {
                    rep.message(&format!("kse: {label} r = {r} failed: {e}"));
                    failed.push((label, r));
                    continue;
                }
                Err(e) => return Err(e),
            };
            if let (Some(trace), Some(b)) = (&fit.trace, &fit.batch_operator) {
                let scale = (fit.layout.dim() * r) as f64 * b.norm();
                let stride = (trace.len() / 200).max(1);
                for (i, e) in trace.iter().enumerate() {
                    if (i + 1) % stride == 0 || i + 1 == trace.len() {
                        trace_table.push([
                            label.clone(),
                            r.to_string(),
                            (i + 1).to_string(),
                            (e / scale).to_string(),
                        ])?;
                    }
                }
            }
            if let Some(dir) = &op_dir {
                save_matrix(&dir.join(&label), &format!("r{r:02}"), &fit.operator)?;
            }
            roms.push((label, fit.model, vs.clone()));
        }

        if cfg.lyapunov_count > 0 {
            let count = cfg.lyapunov_count.min(r);
            let spectra = par_map(&roms, |(_, m, v)| {
                let runs: Vec<Result<Vec<f64>>> = starts
                    .iter()
                    .map(|x0| {
                        let xh0 = v.tr_mul(&DVector::from_column_slice(x0));
                        lyapunov_spectrum(
                            RomCnab::new(m.clone()),
                            xh0.as_slice(),
                            &lyap(count, cfg.seed),
                        )
                    })
                    .collect();
                averaged_spectrum(runs)
            });
            for ((label, _, _), s) in roms.iter().zip(spectra) {
                lyapunov.push(entry(label, r, s));
            }
        }
    }

    lyapunov.extend(failed.iter().map(|(label, r)| entry(label, *r, Vec::new())));
    let mut le_table = MetricTable::new("lyapunov", &["method", "r", "index", "lambda"]);
    let mut ky_table = MetricTable::new("kaplan_yorke", &["method", "r", "d_ky", "stable"]);
    for e in &lyapunov {
        for (i, l) in e.exponents.iter().enumerate() {
            le_table.push([
                e.method.clone(),
                e.r.to_string(),
                (i + 1).to_string(),
                l.to_string(),
            ])?;
        }
        ky_table.push([
            e.method.clone(),
            e.r.to_string(),
            e.kaplan_yorke.map_or("nan".to_string(), |d| d.to_string()),
            (!e.exponents.is_empty()).to_string(),
        ])?;
    }
    let memory = memory_table(cfg, n, k_total, segments[0].len(), 0)?;
    let mut tables = vec![svd_table];
    if cfg.trace {
        tables.push(trace_table);
    }
    if cfg.lyapunov_count > 0 {
        tables.push(le_table);
        tables.push(ky_table);
    }
    tables.push(memory);
    if let Some(dir) = out {
        super::write_tables(&tables, dir)?;
        if let Some(od) = &op_dir {
            save_matrix(od, &format!("basis_{}", cfg.svd_method.name()), &main.svd.v)?;
            save_matrix(od, "basis_batch", &batch.v)?;
        }
        std::fs::write(dir.join("config.txt"), cfg.serialize())?;
    }
    Ok(KseReport {
        tables,
        lyapunov,
        snapshots: k_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_run() {
        let cfg = ExperimentConfig::parse(
            "experiment = kse\nn = 32\nic_a = 0.5\nic_b = 0.3,0.6\nt_final = 4\nsim_dt = 0.01\nsave_every = 10\n\
             r = 4,6\nlyapunov_count = 2\nlyapunov_dt = 0.01\nlyapunov_t_total = 5\n",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let rep = run_kse(&cfg, Some(dir.path()), &Reporter::quiet()).unwrap();
        assert_eq!(rep.snapshots, 80);
        for name in [
            "svd_assessment",
            "streaming_trace",
            "lyapunov",
            "kaplan_yorke",
            "memory",
        ] {
            assert!(dir.path().join(format!("{name}.csv")).exists(), "{name}");
        }
        assert!(dir
            .path()
            .join("operators/isvd-project-rls-iqr/r06.srom")
            .exists());
        assert_eq!(rep.full_model().unwrap().exponents.len(), 2);
        let t = MetricTable::read(&dir.path().join("streaming_trace.csv")).unwrap();
        let soe = t.column_index("mr_soe").unwrap();
        let last: f64 = t
            .rows
            .iter()
            .rev()
            .find(|row| row[0] == "isvd-project-rls-iqr")
            .unwrap()[soe]
            .parse()
            .unwrap();
        assert!(last < 1e-8, "{last}");
    }
}
