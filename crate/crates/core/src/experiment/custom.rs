use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::{memory_table, method_label, method_variants, save_matrix, solver_config, Reporter};
use crate::error::{Error, Result};
use crate::io::{FileSource, TrajectoryFiles};
use crate::metrics::{relative_projection_errors, MetricTable};
use crate::opinf::{fit_projected, fit_reformulated, stream_basis};
use crate::snapshots::SnapshotSource;

/// State files in `dir`, sorted by name, each with whichever of the
/// `.inputs.srom` / `.deriv.srom` companions exist.
fn discover(dir: &Path) -> Result<Vec<TrajectoryFiles>> {
    let mut states: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| {
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            name.ends_with(".srom")
                && !name.ends_with(".inputs.srom")
                && !name.ends_with(".deriv.srom")
        })
        .collect();
    states.sort();
    if states.is_empty() {
        return Err(Error::Config(format!(
            "no .srom state files in {}",
            dir.display()
        )));
    }
    Ok(states
        .into_iter()
        .map(|s| {
            let companion = |ext: &str| {
                let p = s.with_extension(ext);
                p.exists().then_some(p)
            };
            TrajectoryFiles {
                inputs: companion("inputs.srom"),
                derivatives: companion("deriv.srom"),
                states: s,
                skip: 0,
            }
        })
        .collect())
}

/// Fits every configured method and rank to snapshot files on disk, one
/// trajectory per file. Nothing beyond the factors and the operators is
/// held in memory.
pub fn run_custom(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
    rep: &Reporter,
) -> Result<Vec<MetricTable>> {
    let dir = cfg
        .data_dir
        .as_ref()
        .ok_or_else(|| Error::Config("custom-stream needs data_dir".into()))?;
    let mut src = FileSource::new(discover(dir)?)?;
    let (n, k) = (src.dim(), src.len());
    let segments = src.segments();
    let r_max = cfg.r_max();
    rep.message(&format!(
        "custom-stream: {} files, {k} snapshots, n = {n}",
        segments.len()
    ));

    let need_w = cfg.paradigms.iter().any(|p| !p.is_projected());
    let pass = stream_basis(
        &mut src,
        cfg.svd_method,
        r_max,
        cfg.seed,
        need_w,
        &[],
        &mut rep.hook("basis"),
    )?;
    if pass.svd.rank() < r_max {
        return Err(Error::Config(format!(
            "snapshots have rank {} < largest r = {r_max}",
            pass.svd.rank()
        )));
    }
    let rpe = relative_projection_errors(&mut src, &pass.svd.v, &cfg.r)?;

    let mut summary = MetricTable::new(
        "fit_summary",
        &[
            "method",
            "r",
            "snapshots",
            "sigma_r",
            "relative_projection_error",
            "operator_norm",
        ],
    );
    let op_dir = out.map(|o| o.join("operators"));
    for (i, &r) in cfg.r.iter().enumerate() {
        let basis = pass.svd.truncate(r);
        for (paradigm, rls) in method_variants(cfg) {
            let label = method_label(paradigm, rls);
            let scfg = solver_config(
                cfg,
                paradigm,
                rls,
                r,
                (cfg.gamma1, cfg.gamma2),
                Vec::new(),
                false,
            );
            let mut hook = rep.hook(format!("{label} r={r}"));
            let fit = if paradigm.is_projected() {
                fit_projected(&mut src, &basis, &[], &scfg, &mut hook)?
            } else {
                fit_reformulated(
                    &basis,
                    pass.inputs.as_ref(),
                    &segments,
                    &[],
                    &scfg,
                    &mut hook,
                )?
            };
            summary.push([
                label.clone(),
                r.to_string(),
                k.to_string(),
                basis.s[r - 1].to_string(),
                rpe[i].to_string(),
                fit.operator.norm().to_string(),
            ])?;
            if let Some(d) = &op_dir {
                save_matrix(&d.join(&label), &format!("r{r:02}"), &fit.operator)?;
            }
        }
    }
    let m = if cfg.input { src.input_dim() } else { 0 };
    let tables = vec![summary, memory_table(cfg, n, k, segments[0].len(), m)?];
    if let Some(o) = out {
        super::write_tables(&tables, o)?;
        if let Some(d) = &op_dir {
            save_matrix(d, &format!("basis_{}", cfg.svd_method.name()), &pass.svd.v)?;
        }
        std::fs::write(o.join("config.txt"), cfg.serialize())?;
    }
    Ok(tables)
}
