use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Boundary, CsrMatrix, FullModel, QuadraticOperator, Trajectory, TridiagonalLu};
use crate::error::{Error, Result};
use crate::snapshots::{Snapshot, SnapshotSource};

/// Viscous Burgers on `n` interior nodes of `[0, 1]` with `x(0) = u`,
/// `x(1) = −u`.
///
/// Diffusion is the three-point Laplacian with the boundary values folded
/// into `B`. Advection `−x ∂x/∂ω` is centered in the interior and one-sided
/// at the two nodes next to the boundary, so no `x·u` cross term appears and
/// the model stays in `(A1, A2, B)` form.
pub fn burgers_model(n: usize, mu: f64) -> Result<FullModel> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "burgers needs n >= 3, got {n}"
        )));
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "viscosity must be positive, got {mu}"
        )));
    }
    let h = 1.0 / (n + 1) as f64;
    let c = mu / (h * h);
    let mut t = Vec::with_capacity(3 * n);
    for i in 0..n {
        t.push((i, i, -2.0 * c));
        if i > 0 {
            t.push((i, i - 1, c));
        }
        if i + 1 < n {
            t.push((i, i + 1, c));
        }
    }
    let a1 = CsrMatrix::from_triplets(n, n, t);

    let mut a2 = QuadraticOperator::new(n);
    a2.add(0, 0, 1, -1.0 / h);
    a2.add(0, 0, 0, 1.0 / h);
    for i in 1..n - 1 {
        a2.add(i, i, i + 1, -0.5 / h);
        a2.add(i, i, i - 1, 0.5 / h);
    }
    a2.add(n - 1, n - 1, n - 1, -1.0 / h);
    a2.add(n - 1, n - 1, n - 2, 1.0 / h);

    let mut b = DMatrix::zeros(n, 1);
    b[(0, 0)] = c;
    b[(n - 1, 0)] = -c;
    Ok(FullModel {
        a1,
        a2,
        b: Some(b),
        spacing: h,
        boundary: Boundary::DirichletInput,
    })
}

/// Interior grid nodes `ω_i = i h`.
pub(crate) fn burgers_grid(n: usize) -> Vec<f64> {
    let h = 1.0 / (n + 1) as f64;
    (1..=n).map(|i| i as f64 * h).collect()
}

/// Semi-implicit Euler: `(I − dt A1) x⁺ = x + dt (A2 (x ⊗ x) + B u)`.
#[derive(Clone, Debug)]
pub struct BurgersSimulator {
    model: FullModel,
    lu: TridiagonalLu,
    dt: f64,
    x: Vec<f64>,
    steps: usize,
}

impl BurgersSimulator {
    pub fn new(model: &FullModel, x0: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {dt}"
            )));
        }
        if x0.len() != model.n() {
            return Err(Error::DimensionMismatch {
                expected: model.n(),
                found: x0.len(),
            });
        }
        let lu = TridiagonalLu::from_csr_shifted(&model.a1, 1.0, -dt);
        Ok(Self {
            model: model.clone(),
            lu,
            dt,
            x: x0,
            steps: 0,
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&mut self, u: &[f64]) -> Result<()> {
        let mut rhs = vec![0.0; self.x.len()];
        self.model.a2.accumulate(&self.x, &mut rhs);
        if let Some(b) = &self.model.b {
            for (i, ri) in rhs.iter_mut().enumerate() {
                for (j, uj) in u.iter().enumerate() {
                    *ri += b[(i, j)] * uj;
                }
            }
        }
        for (ri, xi) in rhs.iter_mut().zip(&self.x) {
            *ri = xi + self.dt * *ri;
        }
        self.lu.solve_in_place(&mut rhs);
        self.steps += 1;
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonfiniteState { step: self.steps });
        }
        self.x = rhs;
        Ok(())
    }
}

/// Runs `round(t_final / dt)` steps, saving every `save_every` steps.
/// `u_fn(k)` is the input applied during step `k`.
pub fn simulate_burgers(
    model: &FullModel,
    x0: &[f64],
    u_fn: &mut dyn FnMut(usize) -> Vec<f64>,
    dt: f64,
    t_final: f64,
    save_every: usize,
) -> Result<Trajectory> {
    let steps = (t_final / dt).round() as usize;
    let save_every = save_every.max(1);
    let saves = steps / save_every + 1;
    let (n, m) = (model.n(), model.m());
    let mut sim = BurgersSimulator::new(model, x0.to_vec(), dt)?;
    let mut states = DMatrix::zeros(n, saves);
    let mut inputs = DMatrix::zeros(m, saves);
    let mut times = Vec::with_capacity(saves);
    for k in 0..=steps {
        let u = u_fn(k);
        if k % save_every == 0 && k / save_every < saves {
            let c = k / save_every;
            states.column_mut(c).copy_from_slice(sim.state());
            for (j, uj) in u.iter().take(m).enumerate() {
                inputs[(j, c)] = *uj;
            }
            times.push(k as f64 * dt);
        }
        if k < steps {
            sim.step(&u)?;
        }
    }
    Ok(Trajectory {
        times,
        states,
        inputs: (m > 0).then_some(inputs),
        derivatives: None,
    })
}

/// Scalar input drawn uniformly from `[lo, hi]` once per `hold` steps.
#[derive(Clone, Debug)]
pub struct PiecewiseConstantInput {
    values: Vec<f64>,
    hold: usize,
}

impl PiecewiseConstantInput {
    pub fn uniform(seed: u64, intervals: usize, hold: usize, lo: f64, hi: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..intervals).map(|_| rng.gen_range(lo..=hi)).collect();
        Self {
            values,
            hold: hold.max(1),
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            values: vec![value],
            hold: usize::MAX,
        }
    }

    /// Input applied during step `k`; the last value is held past the end.
    pub fn at_step(&self, k: usize) -> f64 {
        let i = (k / self.hold).min(self.values.len() - 1);
        self.values[i]
    }
}

/// Pooled training stream for one viscosity: the shared initial condition
/// followed by the saved states of each trajectory after `t = 0`. Segment `0`
/// starts at the initial condition; later trajectories start at their first
/// saved step, so no snapshot index is shared. States are re-simulated on
/// every pass instead of being held in memory.
#[derive(Clone, Debug)]
pub struct BurgersTrainingSource {
    model: FullModel,
    x0: Vec<f64>,
    inputs: Vec<PiecewiseConstantInput>,
    dt: f64,
    save_every: usize,
    saves: usize,
    traj: usize,
    pos: usize,
    sim: Option<BurgersSimulator>,
}

impl BurgersTrainingSource {
    /// `saves` snapshots after the initial condition per trajectory, one
    /// input draw per saving interval, one seed per trajectory.
    pub fn new(
        model: FullModel,
        x0: Vec<f64>,
        seeds: &[u64],
        dt: f64,
        save_every: usize,
        saves: usize,
    ) -> Result<Self> {
        if x0.len() != model.n() {
            return Err(Error::DimensionMismatch {
                expected: model.n(),
                found: x0.len(),
            });
        }
        if seeds.is_empty() || save_every == 0 || saves == 0 {
            return Err(Error::InvalidArgument(
                "need at least one trajectory, step and save".into(),
            ));
        }
        let inputs = seeds
            .iter()
            .map(|&s| PiecewiseConstantInput::uniform(s, saves + 1, save_every, 0.0, 1.0))
            .collect();
        Ok(Self {
            model,
            x0,
            inputs,
            dt,
            save_every,
            saves,
            traj: 0,
            pos: 0,
            sim: None,
        })
    }

    /// Initial condition `0.1 sin(2πω)` on the interior grid.
    pub fn sine_initial_condition(n: usize) -> Vec<f64> {
        burgers_grid(n)
            .iter()
            .map(|w| 0.1 * (2.0 * std::f64::consts::PI * w).sin())
            .collect()
    }

    pub fn trajectories(&self) -> usize {
        self.inputs.len()
    }

    pub fn model(&self) -> &FullModel {
        &self.model
    }
}

impl SnapshotSource for BurgersTrainingSource {
    fn dim(&self) -> usize {
        self.model.n()
    }

    fn len(&self) -> usize {
        1 + self.inputs.len() * self.saves
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn segments(&self) -> Vec<Vec<usize>> {
        (0..self.inputs.len())
            .map(|t| {
                let start = 1 + t * self.saves;
                let mut s: Vec<usize> = if t == 0 { vec![0] } else { Vec::new() };
                s.extend(start..start + self.saves);
                s
            })
            .collect()
    }

    fn rewind(&mut self) -> Result<()> {
        self.traj = 0;
        self.pos = 0;
        self.sim = None;
        Ok(())
    }

    fn next_snapshot(&mut self) -> Result<Option<Snapshot>> {
        if self.traj >= self.inputs.len() {
            return Ok(None);
        }
        if self.sim.is_none() {
            self.sim = Some(BurgersSimulator::new(
                &self.model,
                self.x0.clone(),
                self.dt,
            )?);
            self.pos = 0;
            if self.traj == 0 {
                let u = self.inputs[0].at_step(0);
                return Ok(Some(Snapshot {
                    state: self.x0.clone(),
                    derivative: None,
                    input: vec![u],
                }));
            }
        }
        let input = &self.inputs[self.traj];
        let sim = self.sim.as_mut().expect("simulator initialized above");
        for _ in 0..self.save_every {
            let k = sim.steps();
            sim.step(&[input.at_step(k)])?;
        }
        self.pos += 1;
        let snap = Snapshot {
            state: sim.state().to_vec(),
            derivative: None,
            input: vec![input.at_step(sim.steps())],
        };
        if self.pos == self.saves {
            self.traj += 1;
            self.sim = None;
        }
        Ok(Some(snap))
    }
}
