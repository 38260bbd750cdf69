use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::models::RomScheme;
use crate::opinf::{FdScheme, Paradigm, Quadratic, RlsMethod, SvdMethod};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Burgers,
    Kse,
    /// SROM files already on disk, listed through `data_dir`.
    CustomStream,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Burgers => "burgers",
            Experiment::Kse => "kse",
            Experiment::CustomStream => "custom-stream",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Experiment::Burgers,
            Experiment::Kse,
            Experiment::CustomStream,
        ]
        .into_iter()
        .find(|e| e.name() == s)
    }
}

pub fn quadratic_name(q: Quadratic) -> &'static str {
    match q {
        Quadratic::None => "none",
        Quadratic::Full => "full",
        Quadratic::Unique => "unique",
    }
}

pub fn parse_quadratic(s: &str) -> Option<Quadratic> {
    [Quadratic::None, Quadratic::Full, Quadratic::Unique]
        .into_iter()
        .find(|q| quadratic_name(*q) == s)
}

/// Everything one `generate` or `run` invocation needs. Keys not relevant
/// to the chosen experiment are carried but unused.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub paradigms: Vec<Paradigm>,
    /// Factorization feeding the operator fit.
    pub svd_method: SvdMethod,
    pub rls_methods: Vec<RlsMethod>,
    pub r: Vec<usize>,
    pub gamma1: f64,
    pub gamma2: f64,
    /// When both are non-empty, `(gamma1, gamma2)` is chosen per rank and
    /// method by grid search on the training error.
    pub gamma1_grid: Vec<f64>,
    pub gamma2_grid: Vec<f64>,
    pub quadratic: Quadratic,
    pub input: bool,
    pub constant: bool,
    pub fd_scheme: FdScheme,
    /// Spacing of the stored snapshots.
    pub dt: f64,
    /// LS rows at which streaming operators are evaluated; empty picks a
    /// log-spaced schedule.
    pub checkpoints: Vec<usize>,
    /// Emit streaming error traces (one ROM solve per checkpoint).
    pub trace: bool,
    pub rom_scheme: RomScheme,
    pub seed: u64,
    pub output: PathBuf,
    /// Read snapshots written by `generate` instead of simulating.
    pub data_dir: Option<PathBuf>,
    pub n: usize,
    /// Viscosities (Burgers training values; KSE uses the first).
    pub mu: Vec<f64>,
    pub trajectories: usize,
    pub t_final: f64,
    pub sim_dt: f64,
    pub save_every: usize,
    /// Held-out parameter draws (Burgers).
    pub test_count: usize,
    pub reference_input: f64,
    pub length: f64,
    pub ic_a: Vec<f64>,
    pub ic_b: Vec<f64>,
    pub lyapunov_count: usize,
    pub lyapunov_dt: f64,
    pub lyapunov_t_total: f64,
    /// Training trajectories whose final states start Lyapunov runs.
    pub lyapunov_ics: usize,
}

const KEYS: &[&str] = &[
    "experiment",
    "paradigm",
    "svd_method",
    "rls_method",
    "r",
    "gamma1",
    "gamma2",
    "gamma1_grid",
    "gamma2_grid",
    "quadratic",
    "input",
    "constant",
    "fd_scheme",
    "dt",
    "checkpoints",
    "trace",
    "rom_scheme",
    "seed",
    "output",
    "data_dir",
    "n",
    "mu",
    "trajectories",
    "t_final",
    "sim_dt",
    "save_every",
    "test_count",
    "reference_input",
    "length",
    "ic_a",
    "ic_b",
    "lyapunov_count",
    "lyapunov_dt",
    "lyapunov_t_total",
    "lyapunov_ics",
];

impl ExperimentConfig {
    /// Viscous Burgers: 10 viscosities, 10 forced trajectories each.
    pub fn burgers() -> Self {
        Self {
            experiment: Experiment::Burgers,
            paradigms: vec![Paradigm::IsvdLs, Paradigm::IsvdRls],
            svd_method: SvdMethod::Sketchy,
            rls_methods: vec![RlsMethod::Standard, RlsMethod::InverseQr],
            r: (1..=14).collect(),
            gamma1: 1e-9,
            gamma2: 1e-9,
            gamma1_grid: Vec::new(),
            gamma2_grid: Vec::new(),
            quadratic: Quadratic::Unique,
            input: true,
            constant: false,
            fd_scheme: FdScheme::Forward1,
            dt: 1e-3,
            checkpoints: Vec::new(),
            trace: true,
            rom_scheme: RomScheme::SemiImplicitEuler,
            seed: 0,
            output: PathBuf::from("results/burgers"),
            data_dir: None,
            n: 128,
            mu: (1..=10).map(|i| i as f64 / 10.0).collect(),
            trajectories: 10,
            t_final: 1.0,
            sim_dt: 1e-4,
            save_every: 10,
            test_count: 5,
            reference_input: 1.0,
            length: 1.0,
            ic_a: Vec::new(),
            ic_b: Vec::new(),
            lyapunov_count: 0,
            lyapunov_dt: 1e-3,
            lyapunov_t_total: 0.0,
            lyapunov_ics: 0,
        }
    }

    /// Kuramoto-Sivashinsky on `[0, 22)`: 9 trajectories from a 3 × 3 grid
    /// of initial amplitudes, learned by projection with exact derivatives.
    pub fn kse() -> Self {
        Self {
            experiment: Experiment::Kse,
            paradigms: vec![Paradigm::IsvdProjectRls],
            svd_method: SvdMethod::Baker,
            rls_methods: vec![RlsMethod::Standard, RlsMethod::InverseQr],
            r: vec![9, 12, 15, 18, 21, 24],
            gamma1: 1e-9,
            gamma2: 1e-9,
            gamma1_grid: Vec::new(),
            gamma2_grid: Vec::new(),
            quadratic: Quadratic::Unique,
            input: false,
            constant: false,
            fd_scheme: FdScheme::Forward1,
            dt: 0.1,
            checkpoints: Vec::new(),
            trace: true,
            rom_scheme: RomScheme::Cnab2,
            seed: 0,
            output: PathBuf::from("results/kse"),
            data_dir: None,
            n: 512,
            mu: vec![1.0],
            trajectories: 9,
            t_final: 300.0,
            sim_dt: 1e-3,
            save_every: 100,
            test_count: 0,
            reference_input: 0.0,
            length: 22.0,
            ic_a: vec![0.2, 0.7, 1.2],
            ic_b: vec![0.1, 0.5, 0.9],
            lyapunov_count: 10,
            lyapunov_dt: 1e-3,
            lyapunov_t_total: 1000.0,
            lyapunov_ics: 1,
        }
    }

    /// Streams SROM files from `data_dir` with a one-shot fit.
    pub fn custom_stream() -> Self {
        Self {
            experiment: Experiment::CustomStream,
            paradigms: vec![Paradigm::IsvdLs],
            svd_method: SvdMethod::Baker,
            rls_methods: vec![RlsMethod::InverseQr],
            r: vec![10],
            quadratic: Quadratic::Unique,
            input: false,
            trace: false,
            output: PathBuf::from("results/custom"),
            n: 0,
            mu: Vec::new(),
            trajectories: 0,
            t_final: 0.0,
            sim_dt: 0.0,
            save_every: 1,
            test_count: 0,
            length: 0.0,
            lyapunov_count: 0,
            lyapunov_t_total: 0.0,
            lyapunov_ics: 0,
            ..Self::kse()
        }
        .with_experiment(Experiment::CustomStream)
    }

    fn with_experiment(mut self, e: Experiment) -> Self {
        self.experiment = e;
        self
    }

    pub fn defaults(e: Experiment) -> Self {
        match e {
            Experiment::Burgers => Self::burgers(),
            Experiment::Kse => Self::kse(),
            Experiment::CustomStream => Self::custom_stream(),
        }
    }

    /// Parses `key = value` lines. `#` starts a comment line. Keys missing
    /// from the text keep the defaults of the named experiment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key `{k}`", i + 1)));
            }
            if !seen.insert(k.to_string()) {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{k}`",
                    i + 1
                )));
            }
            pairs.push((i + 1, k, v));
        }
        let experiment = match pairs.iter().find(|p| p.1 == "experiment") {
            Some(&(line, _, v)) => Experiment::parse(v)
                .ok_or_else(|| Error::Config(format!("line {line}: unknown experiment `{v}`")))?,
            None => return Err(Error::Config("missing key `experiment`".into())),
        };
        let mut c = Self::defaults(experiment);
        for (line, k, v) in pairs {
            c.set(k, v)
                .map_err(|e| Error::Config(format!("line {line}: `{k}`: {e}")))?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn set(&mut self, k: &str, v: &str) -> std::result::Result<(), String> {
        match k {
            "experiment" => {}
            "paradigm" => {
                self.paradigms = list(v, |s| {
                    Paradigm::parse(s).ok_or(format!("unknown paradigm `{s}`"))
                })?
            }
            "svd_method" => {
                self.svd_method = SvdMethod::parse(v).ok_or(format!("unknown method `{v}`"))?
            }
            "rls_method" => {
                self.rls_methods = list(v, |s| {
                    RlsMethod::parse(s).ok_or(format!("unknown method `{s}`"))
                })?
            }
            "r" => self.r = list(v, num)?,
            "gamma1" => self.gamma1 = num(v)?,
            "gamma2" => self.gamma2 = num(v)?,
            "gamma1_grid" => self.gamma1_grid = list(v, num)?,
            "gamma2_grid" => self.gamma2_grid = list(v, num)?,
            "quadratic" => {
                self.quadratic =
                    parse_quadratic(v).ok_or(format!("unknown quadratic form `{v}`"))?
            }
            "input" => self.input = num(v)?,
            "constant" => self.constant = num(v)?,
            "fd_scheme" => {
                self.fd_scheme = FdScheme::parse(v).ok_or(format!("unknown scheme `{v}`"))?
            }
            "dt" => self.dt = num(v)?,
            "checkpoints" => self.checkpoints = list(v, num)?,
            "trace" => self.trace = num(v)?,
            "rom_scheme" => {
                self.rom_scheme = RomScheme::parse(v).ok_or(format!("unknown scheme `{v}`"))?
            }
            "seed" => self.seed = num(v)?,
            "output" => self.output = PathBuf::from(v),
            "data_dir" => self.data_dir = (!v.is_empty()).then(|| PathBuf::from(v)),
            "n" => self.n = num(v)?,
            "mu" => self.mu = list(v, num)?,
            "trajectories" => self.trajectories = num(v)?,
            "t_final" => self.t_final = num(v)?,
            "sim_dt" => self.sim_dt = num(v)?,
            "save_every" => self.save_every = num(v)?,
            "test_count" => self.test_count = num(v)?,
            "reference_input" => self.reference_input = num(v)?,
            "length" => self.length = num(v)?,
            "ic_a" => self.ic_a = list(v, num)?,
            "ic_b" => self.ic_b = list(v, num)?,
            "lyapunov_count" => self.lyapunov_count = num(v)?,
            "lyapunov_dt" => self.lyapunov_dt = num(v)?,
            "lyapunov_t_total" => self.lyapunov_t_total = num(v)?,
            "lyapunov_ics" => self.lyapunov_ics = num(v)?,
            _ => unreachable!("key list checked by the caller"),
        }
        Ok(())
    }

    /// Rejects configurations no command can run.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.r.is_empty() {
            return bad("`r` lists no reduced dimensions");
        }
        if self.r.contains(&0) {
            return bad("`r` entries must be positive");
        }
        if self.paradigms.is_empty() {
            return bad("`paradigm` lists no paradigms");
        }
        if self.paradigms.iter().any(|p| p.is_recursive()) && self.rls_methods.is_empty() {
            return bad("recursive paradigms need at least one `rls_method`");
        }
        if !(self.gamma1 > 0.0 && self.gamma2 > 0.0)
            || self
                .gamma1_grid
                .iter()
                .chain(&self.gamma2_grid)
                .any(|g| !(*g > 0.0))
        {
            return bad("regularization weights must be positive");
        }
        if self.gamma1_grid.is_empty() != self.gamma2_grid.is_empty() {
            return bad("set both `gamma1_grid` and `gamma2_grid` or neither");
        }
        if !(self.dt > 0.0) {
            return bad("`dt` must be positive");
        }
        match self.experiment {
            Experiment::Burgers | Experiment::Kse => {
                if self.n < 3 || self.mu.is_empty() || self.mu.iter().any(|m| !(*m > 0.0)) {
                    return bad("need n >= 3 and positive viscosities");
                }
                if !(self.sim_dt > 0.0 && self.t_final > 0.0) || self.save_every == 0 {
                    return bad("need positive sim_dt, t_final and save_every");
                }
                let snap_dt = self.sim_dt * self.save_every as f64;
                if ((snap_dt - self.dt) / self.dt).abs() > 1e-9 {
                    return bad("`dt` must equal sim_dt * save_every");
                }
            }
            Experiment::CustomStream => {
                if self.data_dir.is_none() {
                    return bad("custom-stream needs `data_dir`");
                }
            }
        }
        match self.experiment {
            Experiment::Burgers => {
                if self.trajectories == 0 {
                    return bad("need at least one trajectory");
                }
                if self.test_count > 0 && self.mu.len() < 4 {
                    return bad("held-out interpolation needs at least 4 training viscosities");
                }
            }
            Experiment::Kse => {
                if self.ic_a.is_empty() || self.ic_b.is_empty() || !(self.length > 0.0) {
                    return bad("need initial amplitudes and a positive length");
                }
                if self.paradigms.iter().any(|p| !p.is_projected()) {
                    return bad("kse snapshots carry derivatives; use projection paradigms");
                }
                if self.lyapunov_count > 0
                    && !(self.lyapunov_t_total > 0.0 && self.lyapunov_dt > 0.0)
                {
                    return bad("Lyapunov runs need positive lyapunov_dt and lyapunov_t_total");
                }
                if self.lyapunov_count > 0 && self.lyapunov_ics == 0 {
                    return bad("Lyapunov runs need lyapunov_ics >= 1");
                }
            }
            Experiment::CustomStream => {}
        }
        Ok(())
    }

    pub fn r_max(&self) -> usize {
        self.r.iter().copied().max().unwrap_or(0)
    }

    /// Text that [`ExperimentConfig::parse`] maps back to `self`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let names = |v: Vec<&str>| v.join(",");
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("experiment", self.experiment.name().into());
        put(
            "paradigm",
            names(self.paradigms.iter().map(|p| p.name()).collect()),
        );
        put("svd_method", self.svd_method.name().into());
        put(
            "rls_method",
            names(self.rls_methods.iter().map(|m| m.name()).collect()),
        );
        put("r", join(&self.r));
        put("gamma1", self.gamma1.to_string());
        put("gamma2", self.gamma2.to_string());
        put("gamma1_grid", join(&self.gamma1_grid));
        put("gamma2_grid", join(&self.gamma2_grid));
        put("quadratic", quadratic_name(self.quadratic).into());
        put("input", self.input.to_string());
        put("constant", self.constant.to_string());
        put("fd_scheme", self.fd_scheme.name().into());
        put("dt", self.dt.to_string());
        put("checkpoints", join(&self.checkpoints));
        put("trace", self.trace.to_string());
        put("rom_scheme", self.rom_scheme.name().into());
        put("seed", self.seed.to_string());
        put("output", self.output.display().to_string());
        put(
            "data_dir",
            self.data_dir
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        put("n", self.n.to_string());
        put("mu", join(&self.mu));
        put("trajectories", self.trajectories.to_string());
        put("t_final", self.t_final.to_string());
        put("sim_dt", self.sim_dt.to_string());
        put("save_every", self.save_every.to_string());
        put("test_count", self.test_count.to_string());
        put("reference_input", self.reference_input.to_string());
        put("length", self.length.to_string());
        put("ic_a", join(&self.ic_a));
        put("ic_b", join(&self.ic_b));
        put("lyapunov_count", self.lyapunov_count.to_string());
        put("lyapunov_dt", self.lyapunov_dt.to_string());
        put("lyapunov_t_total", self.lyapunov_t_total.to_string());
        put("lyapunov_ics", self.lyapunov_ics.to_string());
        s
    }

    /// Stored snapshots per trajectory after `t = 0`.
    pub fn saves(&self) -> usize {
        let steps = (self.t_final / self.sim_dt).round() as usize;
        steps / self.save_every
    }
}

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse `{v}`"))
}

fn list<T>(
    v: &str,
    f: impl Fn(&str) -> std::result::Result<T, String>,
) -> std::result::Result<Vec<T>, String> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| f(s.trim())).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}
