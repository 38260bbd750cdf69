use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use super::generate::burgers_paths;
use super::{
    checkpoint_schedule, derived_seed, memory_table, method_label, method_variants, par_map,
    save_matrix, solver_config, Reporter,
};
use crate::error::{Error, Result};
use crate::io::{FileSource, Metadata, TrajectoryFiles};
use crate::metrics::{
    mr_soe, mr_sse, relative_projection_errors, subspace_angle_error, MetricTable,
};
use crate::models::{
    burgers_model, integrate_rom, intrusive_galerkin, simulate_burgers, BurgersTrainingSource,
    FullModel,
};
use crate::opinf::{
    fit_reformulated, grid_search, interpolate_operators, no_progress, stream_basis, Paradigm,
    ReducedModel, RlsMethod, SolveOutput, SvdMethod,
};
use crate::snapshots::{ChainSource, MatrixSource, SnapshotSource};
use crate::stream_svd::{batch_svd, TruncatedSvd};

/// One Final RSE value.
#[derive(Clone, Debug, PartialEq)]
pub struct RseEntry {
    pub dataset: &'static str,
    pub method: String,
    pub r: usize,
    pub error: f64,
}

#[derive(Clone, Debug)]
pub struct BurgersReport {
    pub tables: Vec<MetricTable>,
    pub final_rse: Vec<RseEntry>,
    pub test_mu: Vec<f64>,
    /// Pooled snapshot count.
    pub snapshots: usize,
}

impl BurgersReport {
    /// `dataset` is `"train"` or `"test"`; `method` a label such as
    /// `"intrusive"`, `"batch-opinf"` or `"isvd-rls-iqr"`.
    pub fn final_rse(&self, dataset: &str, method: &str, r: usize) -> Option<f64> {
        self.final_rse
            .iter()
            .find(|e| e.dataset == dataset && e.method == method && e.r == r)
            .map(|e| e.error)
    }
}

/// One training source and full model per viscosity, simulated on the fly
/// or read from `data_dir`.
pub fn burgers_sources(
    cfg: &ExperimentConfig,
) -> Result<(Vec<FullModel>, Vec<Box<dyn SnapshotSource>>)> {
    let models = cfg
        .mu
        .iter()
        .map(|&mu| burgers_model(cfg.n, mu))
        .collect::<Result<Vec<_>>>()?;
    let mut sources: Vec<Box<dyn SnapshotSource>> = Vec::new();
    match &cfg.data_dir {
        Some(dir) => {
            for (i, &mu) in cfg.mu.iter().enumerate() {
                let files: Vec<TrajectoryFiles> = (0..cfg.trajectories)
                    .map(|t| {
                        let (states, inputs) = burgers_paths(dir, i, t);
                        TrajectoryFiles {
                            states,
                            inputs: Some(inputs),
                            derivatives: None,
                            skip: 0,
                        }
                    })
                    .collect();
                let meta = Metadata::read_for(&files[0].states)?;
                let stored: f64 = meta
                    .get("mu")
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(f64::NAN);
                if stored != mu {
                    return Err(Error::Config(format!(
                        "{} holds mu = {stored}, config expects {mu}",
                        files[0].states.display()
                    )));
                }
                sources.push(Box::new(FileSource::new(files)?));
            }
        }
        None => {
            let x0 = BurgersTrainingSource::sine_initial_condition(cfg.n);
            for (i, model) in models.iter().enumerate() {
                let seeds: Vec<u64> = (0..cfg.trajectories)
                    .map(|t| derived_seed(cfg.seed, i, t))
                    .collect();
                let src = BurgersTrainingSource::new(
                    model.clone(),
                    x0.clone(),
                    &seeds,
                    cfg.sim_dt,
                    cfg.save_every,
                    cfg.saves(),
                )?;
                sources.push(Box::new(src));
            }
        }
    }
    Ok((models, sources))
}

/// Held-out viscosities drawn uniformly inside the training range.
fn test_viscosities(cfg: &ExperimentConfig) -> Vec<f64> {
    let lo = cfg.mu.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = cfg.mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(cfg.seed, usize::MAX, 0));
    let mut v: Vec<f64> = (0..cfg.test_count)
        .map(|_| rng.gen_range(lo..=hi))
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

struct Evaluator<'a> {
    cfg: &'a ExperimentConfig,
    x0: Vec<f64>,
    train: Vec<DMatrix<f64>>,
    test: Vec<DMatrix<f64>>,
    test_models: Vec<FullModel>,
}

impl Evaluator<'_> {
    fn reduced_trajectory(&self, model: &ReducedModel, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let xh0 = v.tr_mul(&DVector::from_column_slice(&self.x0));
        let u = if model.m() > 0 {
            vec![self.cfg.reference_input]
        } else {
            Vec::new()
        };
        let t = integrate_rom(
            model,
            xh0.as_slice(),
            &mut |_| u.clone(),
            self.cfg.sim_dt,
            self.cfg.t_final,
            self.cfg.save_every,
            self.cfg.rom_scheme,
        )?;
        Ok(t.states)
    }

    /// Mean relative state error of `models[i]` against `full[i]`.
    fn mean_error(
        &self,
        models: &[ReducedModel],
        v: &DMatrix<f64>,
        full: &[DMatrix<f64>],
    ) -> Result<f64> {
        let reduced = par_map(models, |m| self.reduced_trajectory(m, v));
        let reduced = reduced.into_iter().collect::<Result<Vec<_>>>()?;
        mr_sse(full, v, &reduced)
    }

    fn test_error(
        &self,
        mus: &[f64],
        models: &[ReducedModel],
        v: &DMatrix<f64>,
        test_mu: &[f64],
    ) -> Result<f64> {
        let interp = test_mu
            .iter()
            .map(|&mu| interpolate_operators(mus, models, mu))
            .collect::<Result<Vec<_>>>()?;
        self.mean_error(&interp, v, &self.test)
    }
}

/// Pooled-basis parametric pipeline: one streaming SVD over every viscosity,
/// one operator fit per viscosity, intrusive and batch baselines, and CSV
/// output when `out` is given.
pub fn run_burgers(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
    rep: &Reporter,
) -> Result<BurgersReport> {
    let (models, sources) = burgers_sources(cfg)?;
    let lens: Vec<usize> = sources.iter().map(|s| s.len()).collect();
    let segments: Vec<Vec<Vec<usize>>> = sources.iter().map(|s| s.segments()).collect();
    let offsets: Vec<usize> = lens
        .iter()
        .scan(0, |acc, &l| Some(std::mem::replace(acc, *acc + l)))
        .collect();
    let mut chain = ChainSource::new(sources)?;
    let (n, k_total, m) = (chain.dim(), chain.len(), chain.input_dim());
    let r_max = cfg.r_max();
    if r_max > n {
        return Err(Error::Config(format!(
            "largest r = {r_max} exceeds the state dimension {n}"
        )));
    }
    rep.message(&format!(
        "burgers: {} viscosities, {k_total} snapshots, n = {n}",
        cfg.mu.len()
    ));

    let main = stream_basis(
        &mut chain,
        cfg.svd_method,
        r_max,
        cfg.seed,
        true,
        &[],
        &mut rep.hook(cfg.svd_method.name()),
    )?;
    let other_method = match cfg.svd_method {
        SvdMethod::Baker => SvdMethod::Sketchy,
        SvdMethod::Sketchy => SvdMethod::Baker,
    };
    let other = stream_basis(
        &mut chain,
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

    // Batch baseline: the full snapshot matrix in memory.
    let mut x = DMatrix::zeros(n, k_total);
    chain.rewind()?;
    let mut k = 0;
    while let Some(s) = chain.next_snapshot()? {
        x.column_mut(k).copy_from_slice(&s.state);
        k += 1;
    }
    let batch = batch_svd(&x, r_max);
    let mut xsrc = MatrixSource::new(x);

    let mut svd_table = MetricTable::new(
        "svd_assessment",
        &[
            "method",
            "r",
            "subspace_angle_error",
            "relative_projection_error",
        ],
    );
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

    let test_mu = test_viscosities(cfg);
    let x0 = BurgersTrainingSource::sine_initial_condition(n);
    let test_models = test_mu
        .iter()
        .map(|&mu| burgers_model(n, mu))
        .collect::<Result<Vec<_>>>()?;
    let reference = |model: &FullModel| -> Result<DMatrix<f64>> {
        let u = vec![cfg.reference_input];
        Ok(simulate_burgers(
            model,
            &x0,
            &mut |_| u.clone(),
            cfg.sim_dt,
            cfg.t_final,
            cfg.save_every,
        )?
        .states)
    };
    let train = par_map(&models, reference)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let test = par_map(&test_models, reference)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let eval = Evaluator {
        cfg,
        x0: x0.clone(),
        train,
        test,
        test_models,
    };

    let inputs = main.inputs.as_ref();
    let fit_all = |svd: &TruncatedSvd,
                   paradigm: Paradigm,
                   rls: Option<RlsMethod>,
                   gamma: (f64, f64),
                   checkpoints: Vec<usize>,
                   trace: bool|
     -> Result<Vec<SolveOutput>> {
        let w = svd.w.as_ref().expect("right factor tracked");
        let scfg = solver_config(cfg, paradigm, rls, svd.rank(), gamma, checkpoints, trace);
        let blocks: Vec<usize> = (0..lens.len()).collect();
        par_map(&blocks, |&i| {
            let t = TruncatedSvd {
                v: svd.v.clone(),
                s: svd.s.clone(),
                w: Some(w.rows(offsets[i], lens[i]).into_owned()),
            };
            let u = inputs.map(|u| u.columns(offsets[i], lens[i]).into_owned());
            fit_reformulated(&t, u.as_ref(), &segments[i], &[], &scfg, &mut no_progress)
        })
        .into_iter()
        .collect()
    };

    let mut rse_table = MetricTable::new(
        "final_rse",
        &["dataset", "method", "r", "final_rse", "gamma1", "gamma2"],
    );
    let mut trace_table = MetricTable::new(
        "streaming_trace",
        &["method", "r", "rows", "mr_soe", "mr_sse"],
    );
    let mut entries = Vec::new();
    let mut record =
        |method: &str, r: usize, gamma: (f64, f64), train: f64, test: Option<f64>| -> Result<()> {
            for (dataset, e) in [("train", Some(train)), ("test", test)] {
                if let Some(e) = e {
                    rse_table.push([
                        dataset.to_string(),
                        method.to_string(),
                        r.to_string(),
                        e.to_string(),
                        gamma.0.to_string(),
                        gamma.1.to_string(),
                    ])?;
                    entries.push(RseEntry {
                        dataset,
                        method: method.to_string(),
                        r,
                        error: e,
                    });
                }
            }
            Ok(())
        };
    let has_test = !test_mu.is_empty();
    let op_dir = out.map(|o| o.join("operators"));

    for &r in &cfg.r {
        rep.message(&format!("burgers: r = {r}"));
        let vb = batch.truncate(r);

        let intrusive = models
            .iter()
            .map(|fm| intrusive_galerkin(&vb.v, fm))
            .collect::<Result<Vec<_>>>()?;
        let intrusive_test = eval
            .test_models
            .iter()
            .map(|fm| intrusive_galerkin(&vb.v, fm))
            .collect::<Result<Vec<_>>>()?;
        let tr = eval.mean_error(&intrusive, &vb.v, &eval.train)?;
        let te = if has_test {
            Some(eval.mean_error(&intrusive_test, &vb.v, &eval.test)?)
        } else {
            None
        };
        record("intrusive", r, (f64::NAN, f64::NAN), tr, te)?;

        let gamma = (cfg.gamma1, cfg.gamma2);
        let batch_fit = fit_all(&vb, Paradigm::IsvdLs, None, gamma, Vec::new(), false)?;
        let batch_models: Vec<ReducedModel> = batch_fit.iter().map(|o| o.model.clone()).collect();
        let tr = eval.mean_error(&batch_models, &vb.v, &eval.train)?;
        let te = if has_test {
            Some(eval.test_error(&cfg.mu, &batch_models, &vb.v, &test_mu)?)
        } else {
            None
        };
        record("batch-opinf", r, gamma, tr, te)?;
        if let Some(dir) = &op_dir {
            for (i, o) in batch_fit.iter().enumerate() {
                save_matrix(
                    &dir.join("batch-opinf"),
                    &format!("r{r:02}_mu{i:02}"),
                    &o.operator,
                )?;
            }
        }

        let vs = main.svd.truncate(r);
        for (paradigm, rls) in method_variants(cfg) {
            let label = method_label(paradigm, rls);
            let gamma = if cfg.gamma1_grid.is_empty() {
                (cfg.gamma1, cfg.gamma2)
            } else {
                let choice = grid_search(&cfg.gamma1_grid, &cfg.gamma2_grid, |g1, g2| {
                    let fit = fit_all(&vs, paradigm, rls, (g1, g2), Vec::new(), false)?;
                    let ms: Vec<ReducedModel> = fit.into_iter().map(|o| o.model).collect();
                    eval.mean_error(&ms, &vs.v, &eval.train)
                })?;
                (choice.gamma1, choice.gamma2)
            };
            let tracing = cfg.trace && paradigm.is_recursive();
            let rows = lens[0] - segments[0].len();
            let schedule = if tracing {
                checkpoint_schedule(cfg, rows)
            } else {
                Vec::new()
            };
            let fit = fit_all(&vs, paradigm, rls, gamma, schedule, tracing)?;
            let final_models: Vec<ReducedModel> = fit.iter().map(|o| o.model.clone()).collect();
            let tr = eval.mean_error(&final_models, &vs.v, &eval.train)?;
            let te = if has_test {
                Some(eval.test_error(&cfg.mu, &final_models, &vs.v, &test_mu)?)
            } else {
                None
            };
            record(&label, r, gamma, tr, te)?;

            if tracing {
                let batch_ops: Vec<DMatrix<f64>> = fit
                    .iter()
                    .map(|o| o.batch_operator.clone().expect("trace requested"))
                    .collect();
                let marks = fit[0].checkpoints.len();
                for j in 0..marks {
                    let rows_j = fit[0].checkpoints[j].k;
                    let mut ops = Vec::with_capacity(fit.len());
                    let mut ms = Vec::with_capacity(fit.len());
                    for o in &fit {
                        let c = &o.checkpoints[j];
                        ops.push(c.model.to_operator(&o.layout)?);
                        ms.push(c.model.clone());
                    }
                    let soe = mr_soe(&batch_ops, &ops)?;
                    let sse = eval.mean_error(&ms, &vs.v, &eval.train)?;
                    trace_table.push([
                        label.clone(),
                        r.to_string(),
                        rows_j.to_string(),
                        soe.to_string(),
                        sse.to_string(),
                    ])?;
                }
            }
            if let Some(dir) = &op_dir {
                for (i, o) in fit.iter().enumerate() {
                    save_matrix(&dir.join(&label), &format!("r{r:02}_mu{i:02}"), &o.operator)?;
                }
            }
        }
    }

    let mut test_table = MetricTable::new("test_parameters", &["index", "mu"]);
    for (i, mu) in test_mu.iter().enumerate() {
        test_table.push([i.to_string(), mu.to_string()])?;
    }
    let memory = memory_table(cfg, n, k_total, lens[0], m)?;
    let mut tables = vec![svd_table, rse_table, memory, test_table];
    if cfg.trace {
        tables.insert(2, trace_table);
    }
    if let Some(dir) = out {
        super::write_tables(&tables, dir)?;
        if let Some(od) = &op_dir {
            save_matrix(od, &format!("basis_{}", cfg.svd_method.name()), &main.svd.v)?;
            save_matrix(od, "basis_batch", &batch.v)?;
        }
        std::fs::write(dir.join("config.txt"), cfg.serialize())?;
    }
    Ok(BurgersReport {
        tables,
        final_rse: entries,
        test_mu,
        snapshots: k_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig::parse(
            "experiment = burgers\nn = 16\nmu = 0.2,0.4,0.6,0.8\ntrajectories = 2\nt_final = 0.05\nr = 2,3\ntest_count = 2\n",
        )
        .unwrap()
    }

    #[test]
    fn tiny_run_produces_tables_and_sane_errors() {
        let cfg = tiny();
        let dir = tempfile::tempdir().unwrap();
        let rep = run_burgers(&cfg, Some(dir.path()), &Reporter::quiet()).unwrap();
        assert_eq!(rep.snapshots, 4 * (1 + 2 * 50));
        for name in [
            "svd_assessment",
            "final_rse",
            "streaming_trace",
            "memory",
            "test_parameters",
        ] {
            assert!(dir.path().join(format!("{name}.csv")).exists(), "{name}");
        }
        assert!(dir
            .path()
            .join("operators/isvd-rls-iqr/r03_mu03.srom")
            .exists());
        for method in [
            "intrusive",
            "batch-opinf",
            "isvd-ls",
            "isvd-rls-standard",
            "isvd-rls-iqr",
        ] {
            for ds in ["train", "test"] {
                let e = rep.final_rse(ds, method, 3).unwrap();
                assert!(e.is_finite() && e < 0.5, "{method} {ds} {e}");
            }
        }
        // The recursive fit ends at the batch solution on the same rows.
        let ls = rep.final_rse("train", "isvd-ls", 3).unwrap();
        let rls = rep.final_rse("train", "isvd-rls-iqr", 3).unwrap();
        assert!((ls - rls).abs() <= 1e-6 * ls.max(1e-12), "{ls} {rls}");
    }

    #[test]
    fn deterministic_tables() {
        let mut cfg = tiny();
        cfg.trace = false;
        cfg.r = vec![2];
        let a = run_burgers(&cfg, None, &Reporter::quiet()).unwrap();
        let b = run_burgers(&cfg, None, &Reporter::quiet()).unwrap();
        assert_eq!(a.tables, b.tables);
    }
}
