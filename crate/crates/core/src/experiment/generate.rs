use std::path::{Path, PathBuf};

use super::config::{Experiment, ExperimentConfig};
use super::{burgers_sources, derived_seed, kse_initial_conditions, kse_sources, Reporter};
use crate::error::{Error, Result};
use crate::io::{file_bytes, Metadata, SromWriter};
use crate::snapshots::SnapshotSource;

/// `(states, inputs)` for trajectory `t` of viscosity index `i`.
pub fn burgers_paths(root: &Path, i: usize, t: usize) -> (PathBuf, PathBuf) {
    let dir = root.join("burgers").join(format!("mu_{i:02}"));
    (
        dir.join(format!("traj_{t:02}.srom")),
        dir.join(format!("traj_{t:02}.inputs.srom")),
    )
}

/// `(states, derivatives)` for trajectory `j`.
pub fn kse_paths(root: &Path, j: usize) -> (PathBuf, PathBuf) {
    let dir = root.join("kse");
    (
        dir.join(format!("traj_{j:02}.srom")),
        dir.join(format!("traj_{j:02}.deriv.srom")),
    )
}

/// One file `generate` would write.
#[derive(Clone, Debug, PartialEq)]
pub struct PlannedFile {
    pub path: PathBuf,
    pub rows: usize,
    pub cols: usize,
}

impl PlannedFile {
    pub fn bytes(&self) -> u64 {
        file_bytes(self.rows, self.cols)
    }
}

/// Files and sizes for the configured data set, without simulating.
pub fn planned_files(cfg: &ExperimentConfig, root: &Path) -> Result<Vec<PlannedFile>> {
    let saves = cfg.saves();
    let mut out = Vec::new();
    match cfg.experiment {
        Experiment::Burgers => {
            for i in 0..cfg.mu.len() {
                for t in 0..cfg.trajectories {
                    // The shared initial condition is stored once, in trajectory 0.
                    let cols = saves + usize::from(t == 0);
                    let (s, u) = burgers_paths(root, i, t);
                    out.push(PlannedFile {
                        path: s,
                        rows: cfg.n,
                        cols,
                    });
                    out.push(PlannedFile {
                        path: u,
                        rows: 1,
                        cols,
                    });
                }
            }
        }
        Experiment::Kse => {
            for j in 0..kse_initial_conditions(cfg).len() {
                let (s, d) = kse_paths(root, j);
                out.push(PlannedFile {
                    path: s,
                    rows: cfg.n,
                    cols: saves,
                });
                out.push(PlannedFile {
                    path: d,
                    rows: cfg.n,
                    cols: saves,
                });
            }
        }
        Experiment::CustomStream => {
            return Err(Error::Config(
                "custom-stream reads existing data; nothing to generate".into(),
            ))
        }
    }
    Ok(out)
}

/// Streams `src` into one file set per segment. `paths(j)` gives the state
/// file and the companion (inputs or derivatives) for segment `j`.
fn write_segments(
    src: &mut dyn SnapshotSource,
    paths: impl Fn(usize) -> (PathBuf, PathBuf),
    meta: impl Fn(usize) -> Metadata,
    rep: &Reporter,
) -> Result<()> {
    let segments = src.segments();
    src.rewind()?;
    for (j, seg) in segments.iter().enumerate() {
        let (sp, cp) = paths(j);
        if let Some(parent) = sp.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut states = SromWriter::create(&sp, src.dim())?;
        let companion_rows = if src.has_derivatives() {
            src.dim()
        } else {
            src.input_dim()
        };
        let mut companion = SromWriter::create(&cp, companion_rows)?;
        let mut hook = rep.hook(sp.display().to_string());
        for k in 0..seg.len() {
            let s = src
                .next_snapshot()?
                .ok_or_else(|| Error::Format("source ended early".into()))?;
            states.push(&s.state)?;
            match &s.derivative {
                Some(d) if src.has_derivatives() => companion.push(d)?,
                _ => companion.push(&s.input)?,
            }
            hook("snapshots", k + 1);
        }
        states.finish()?;
        companion.finish()?;
        meta(j).write_for(&sp)?;
    }
    Ok(())
}

/// Simulates the configured training data into `root`. With `dry_run` only
/// the plan is returned.
pub fn generate(
    cfg: &ExperimentConfig,
    root: &Path,
    dry_run: bool,
    rep: &Reporter,
) -> Result<Vec<PlannedFile>> {
    let plan = planned_files(cfg, root)?;
    if dry_run {
        return Ok(plan);
    }
    let mut cfg = cfg.clone();
    cfg.data_dir = None;
    let common = |m: &mut Metadata| {
        m.set("n", cfg.n)
            .set("sim_dt", cfg.sim_dt)
            .set("save_every", cfg.save_every)
            .set("dt", cfg.dt)
            .set("seed", cfg.seed);
    };
    match cfg.experiment {
        Experiment::Burgers => {
            let (_, mut sources) = burgers_sources(&cfg)?;
            for (i, src) in sources.iter_mut().enumerate() {
                rep.message(&format!("generate: burgers mu = {}", cfg.mu[i]));
                let meta = |t: usize| {
                    let mut m = Metadata::default();
                    common(&mut m);
                    m.set("kind", "burgers")
                        .set("mu", cfg.mu[i])
                        .set("trajectory", t)
                        .set("input_seed", derived_seed(cfg.seed, i, t))
                        .set("initial_condition", "0.1 sin(2 pi w)")
                        .set("includes_initial_condition", t == 0);
                    m
                };
                write_segments(src.as_mut(), |t| burgers_paths(root, i, t), meta, rep)?;
            }
        }
        Experiment::Kse => {
            let (_, mut src) = kse_sources(&cfg)?;
            let pairs = kse_initial_conditions(&cfg);
            rep.message(&format!("generate: kse, {} trajectories", pairs.len()));
            let meta = |j: usize| {
                let mut m = Metadata::default();
                common(&mut m);
                m.set("kind", "kse")
                    .set("mu", cfg.mu[0])
                    .set("length", cfg.length)
                    .set("trajectory", j)
                    .set("ic_a", pairs[j].0)
                    .set("ic_b", pairs[j].1)
                    .set("includes_initial_condition", true);
                m
            };
            write_segments(src.as_mut(), |j| kse_paths(root, j), meta, rep)?;
        }
        Experiment::CustomStream => unreachable!("rejected by planned_files"),
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::SromReader;

    #[test]
    fn generated_files_match_plan_and_stream() {
        let cfg = ExperimentConfig::parse(
            "experiment = burgers\nn = 8\nmu = 0.2,0.4,0.6,0.8\ntrajectories = 2\nt_final = 0.01\nsim_dt = 0.001\nsave_every = 2\n\
             dt = 0.002\nr = 2\n",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let dry = generate(&cfg, dir.path(), true, &Reporter::quiet()).unwrap();
        assert!(!dir.path().join("burgers").exists());
        let plan = generate(&cfg, dir.path(), false, &Reporter::quiet()).unwrap();
        assert_eq!(dry, plan);
        for f in &plan {
            let r = SromReader::open(&f.path).unwrap();
            assert_eq!(
                (r.rows(), r.cols()),
                (f.rows, f.cols),
                "{}",
                f.path.display()
            );
            assert_eq!(std::fs::metadata(&f.path).unwrap().len(), f.bytes());
        }

        // Reading back reproduces the simulated stream exactly.
        let mut from_disk = cfg.clone();
        from_disk.data_dir = Some(dir.path().to_path_buf());
        let (_, mut a) = burgers_sources(&cfg).unwrap();
        let (_, mut b) = burgers_sources(&from_disk).unwrap();
        for (x, y) in a.iter_mut().zip(b.iter_mut()) {
            assert_eq!(x.len(), y.len());
            assert_eq!(x.segments(), y.segments());
            while let Some(s) = x.next_snapshot().unwrap() {
                assert_eq!(Some(s), y.next_snapshot().unwrap());
            }
        }
        let meta = Metadata::read_for(&burgers_paths(dir.path(), 1, 0).0).unwrap();
        assert_eq!(meta.get("mu"), Some("0.4"));
    }

    #[test]
    fn custom_stream_has_nothing_to_generate() {
        let mut cfg = ExperimentConfig::kse();
        cfg.experiment = Experiment::CustomStream;
        assert!(matches!(
            planned_files(&cfg, Path::new("x")),
            Err(Error::Config(_))
        ));
    }
}
