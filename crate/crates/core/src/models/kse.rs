use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::integrate::{Cnab2, SplitSystem};
use super::{Boundary, CsrMatrix, FullModel, QuadraticOperator, Trajectory};
use crate::error::{Error, Result};
use crate::snapshots::{Snapshot, SnapshotSource};

/// Kuramoto-Sivashinsky `x_t = −x_ωω − μ x_ωωωω − x x_ω` on a periodic grid of
/// `n` points over `[0, length)`.
///
/// `A1` is the circulant five-point stencil for `−∂² − μ∂⁴`; the advection
/// is centered, `−x_i (x_{i+1} − x_{i−1}) / 2h`, which conserves the mean.
pub fn kse_model(n: usize, length: f64, mu: f64) -> Result<FullModel> {
    if n < 5 {
        return Err(Error::InvalidArgument(format!("kse needs n >= 5, got {n}")));
    }
    if !(length > 0.0 && mu > 0.0) {
        return Err(Error::InvalidArgument(
            "domain length and μ must be positive".into(),
        ));
    }
    let h = length / n as f64;
    let (h2, h4) = (h * h, h.powi(4));
    // −D2 − μ D4 with D2 = [1, −2, 1]/h², D4 = [1, −4, 6, −4, 1]/h⁴.
    let stencil = [
        (-2isize, -mu / h4),
        (-1, -1.0 / h2 + 4.0 * mu / h4),
        (0, 2.0 / h2 - 6.0 * mu / h4),
        (1, -1.0 / h2 + 4.0 * mu / h4),
        (2, -mu / h4),
    ];
    let wrap = |i: usize, o: isize| (i as isize + o).rem_euclid(n as isize) as usize;
    let mut t = Vec::with_capacity(5 * n);
    for i in 0..n {
        for &(o, v) in &stencil {
            t.push((i, wrap(i, o), v));
        }
    }
    let a1 = CsrMatrix::from_triplets(n, n, t);
    let mut a2 = QuadraticOperator::new(n);
    for i in 0..n {
        a2.add(i, i, wrap(i, 1), -0.5 / h);
        a2.add(i, i, wrap(i, -1), 0.5 / h);
    }
    Ok(FullModel {
        a1,
        a2,
        b: None,
        spacing: h,
        boundary: Boundary::Periodic,
    })
}

/// `a cos(2πω/L) + b cos(4πω/L)` at `ω_i = i L / n`.
pub fn kse_initial_condition(n: usize, length: f64, a: f64, b: f64) -> Vec<f64> {
    let h = length / n as f64;
    (0..n)
        .map(|i| {
            let w = i as f64 * h;
            a * (2.0 * PI * w / length).cos() + b * (4.0 * PI * w / length).cos()
        })
        .collect()
}

/// The full KSE model split for CNAB2. Implicit solves diagonalize the
/// circulant `A1` with an FFT.
#[derive(Clone)]
pub struct KseSolver {
    model: FullModel,
    eig: Vec<f64>,
    inv: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    bwd: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for KseSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KseSolver")
            .field("n", &self.eig.len())
            .finish()
    }
}

impl KseSolver {
    pub fn new(model: &FullModel) -> Result<Self> {
        if model.boundary != Boundary::Periodic {
            return Err(Error::InvalidArgument(
                "FFT solver needs a periodic model".into(),
            ));
        }
        let n = model.n();
        // Eigenvalues of a symmetric circulant: Σ_o c_o cos(2π k o / n).
        let row: Vec<(usize, f64)> = model.a1.row(0).collect();
        let eig = (0..n)
            .map(|k| {
                row.iter()
                    .map(|&(j, c)| c * (2.0 * PI * (k * j) as f64 / n as f64).cos())
                    .sum::<f64>()
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            model: model.clone(),
            eig,
            inv: vec![1.0; n],
            fwd: planner.plan_fft_forward(n),
            bwd: planner.plan_fft_inverse(n),
        })
    }

    /// Eigenvalues of `A1` by Fourier index.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig
    }

    pub fn model(&self) -> &FullModel {
        &self.model
    }
}

impl SplitSystem for KseSolver {
    fn dim(&self) -> usize {
        self.eig.len()
    }

    fn linear(&self, x: &[f64], out: &mut [f64]) {
        self.model.a1.mul_vec_into(x, out);
    }

    fn explicit(&self, x: &[f64], _u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.model.a2.accumulate(x, out);
    }

    fn explicit_jvp(&self, x: &[f64], v: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        out.fill(0.0);
        for c in 0..v.ncols() {
            let vc = v.column(c);
            let mut oc = out.column_mut(c);
            self.model
                .a2
                .accumulate_jvp(x, vc.as_slice(), oc.as_mut_slice());
        }
    }

    fn prepare(&mut self, alpha: f64) -> Result<()> {
        for (inv, &l) in self.inv.iter_mut().zip(&self.eig) {
            let d = 1.0 - alpha * l;
            if d == 0.0 {
                return Err(Error::InvalidArgument("I − α A1 is singular".into()));
            }
            *inv = 1.0 / d;
        }
        Ok(())
    }

    fn solve_implicit(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        let mut buf: Vec<Complex64> = rhs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        for (b, &s) in buf.iter_mut().zip(&self.inv) {
            *b *= s;
        }
        self.bwd.process(&mut buf);
        let scale = 1.0 / n as f64;
        for (r, b) in rhs.iter_mut().zip(&buf) {
            *r = b.re * scale;
        }
    }
}

/// CNAB2 time stepper for the full KSE model.
pub type KseSimulator = Cnab2<KseSolver>;

/// Runs `round(t_final / dt)` steps and saves every `save_every`-th state
/// strictly before `t_final`, each with the forward difference
/// `(x(t + dt) − x(t)) / dt` over one fine step as its derivative.
pub fn simulate_kse(
    model: &FullModel,
    x0: &[f64],
    dt: f64,
    t_final: f64,
    save_every: usize,
) -> Result<Trajectory> {
    let steps = (t_final / dt).round() as usize;
    let save_every = save_every.max(1);
    let saves = steps.div_ceil(save_every);
    let n = model.n();
    let mut sim = KseSimulator::new(KseSolver::new(model)?, x0.to_vec(), dt)?;
    let mut states = DMatrix::zeros(n, saves);
    let mut derivs = DMatrix::zeros(n, saves);
    let mut times = Vec::with_capacity(saves);
    for c in 0..saves {
        while sim.steps() < c * save_every {
            sim.step(&[])?;
        }
        states.column_mut(c).copy_from_slice(sim.state());
        times.push(sim.steps() as f64 * dt);
        sim.step(&[])?;
        for i in 0..n {
            derivs[(i, c)] = (sim.state()[i] - states[(i, c)]) / dt;
        }
    }
    Ok(Trajectory {
        times,
        states,
        inputs: None,
        derivatives: Some(derivs),
    })
}

/// Training stream over one KSE trajectory per initial condition, with
/// derivatives. Trajectories are re-simulated on every pass.
pub struct KseTrainingSource {
    solver: KseSolver,
    ics: Vec<Vec<f64>>,
    dt: f64,
    save_every: usize,
    saves: usize,
    traj: usize,
    pos: usize,
    sim: Option<KseSimulator>,
}

impl KseTrainingSource {
    /// `saves` snapshots per trajectory at `t = j · save_every · dt`.
    pub fn new(
        model: &FullModel,
        ics: Vec<Vec<f64>>,
        dt: f64,
        save_every: usize,
        saves: usize,
    ) -> Result<Self> {
        if ics.is_empty() || save_every == 0 || saves == 0 {
            return Err(Error::InvalidArgument(
                "need at least one trajectory, step and save".into(),
            ));
        }
        if let Some(bad) = ics.iter().find(|x| x.len() != model.n()) {
            return Err(Error::DimensionMismatch {
                expected: model.n(),
                found: bad.len(),
            });
        }
        Ok(Self {
            solver: KseSolver::new(model)?,
            ics,
            dt,
            save_every,
            saves,
            traj: 0,
            pos: 0,
            sim: None,
        })
    }

    pub fn trajectories(&self) -> usize {
        self.ics.len()
    }

    pub fn initial_conditions(&self) -> &[Vec<f64>] {
        &self.ics
    }
}

impl SnapshotSource for KseTrainingSource {
    fn dim(&self) -> usize {
        self.solver.dim()
    }

    fn len(&self) -> usize {
        self.ics.len() * self.saves
    }

    fn has_derivatives(&self) -> bool {
        true
    }

    fn segments(&self) -> Vec<Vec<usize>> {
        (0..self.ics.len())
            .map(|t| (t * self.saves..(t + 1) * self.saves).collect())
            .collect()
    }

    fn rewind(&mut self) -> Result<()> {
        self.traj = 0;
        self.pos = 0;
        self.sim = None;
        Ok(())
    }

    fn next_snapshot(&mut self) -> Result<Option<Snapshot>> {
        if self.traj >= self.ics.len() {
            return Ok(None);
        }
        let sim = match self.sim.as_mut() {
            Some(s) => s,
            None => {
                self.pos = 0;
                self.sim.insert(Cnab2::new(
                    self.solver.clone(),
                    self.ics[self.traj].clone(),
                    self.dt,
                )?)
            }
        };
        while sim.steps() < self.pos * self.save_every {
            sim.step(&[])?;
        }
        let state = sim.state().to_vec();
        sim.step(&[])?;
        let derivative = sim
            .state()
            .iter()
            .zip(&state)
            .map(|(a, b)| (a - b) / self.dt)
            .collect();
        self.pos += 1;
        if self.pos == self.saves {
            self.traj += 1;
            self.sim = None;
        }
        Ok(Some(Snapshot {
            state,
            derivative: Some(derivative),
            input: Vec::new(),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_is_circulant() {
        let m = kse_model(16, 22.0, 1.0).unwrap();
        let a = m.a1.to_dense();
        for i in 0..16 {
            for j in 0..16 {
                assert_eq!(a[(i, j)], a[(0, (j + 16 - i) % 16)]);
            }
        }
    }

    #[test]
    fn fft_eigenvalues_match_closed_form() {
        let (n, l) = (32, 22.0);
        let m = kse_model(n, l, 1.0).unwrap();
        let s = KseSolver::new(&m).unwrap();
        let h = l / n as f64;
        for (k, &e) in s.eigenvalues().iter().enumerate() {
            let c = 2.0 * (2.0 * PI * k as f64 / n as f64).cos() - 2.0;
            let exact = -c / (h * h) - c * c / h.powi(4);
            assert!((e - exact).abs() < 1e-9 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn implicit_solve_inverts() {
        let m = kse_model(24, 22.0, 1.0).unwrap();
        let mut s = KseSolver::new(&m).unwrap();
        s.prepare(0.01).unwrap();
        let x: Vec<f64> = (0..24).map(|i| (i as f64 * 0.7).sin()).collect();
        let ax = m.a1.mul_vec(&x);
        let mut b: Vec<f64> = x.iter().zip(&ax).map(|(xi, ai)| xi - 0.01 * ai).collect();
        s.solve_implicit(&mut b);
        for i in 0..24 {
            assert!((b[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_stays_zero_and_counts() {
        let m = kse_model(32, 22.0, 1.0).unwrap();
        let t = simulate_kse(&m, &[0.0; 32], 1e-3, 1.0, 100).unwrap();
        assert_eq!(t.len(), 10);
        assert!(t.states.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mean_is_conserved() {
        let (n, l) = (128, 22.0);
        let m = kse_model(n, l, 1.0).unwrap();
        let x0: Vec<f64> = kse_initial_condition(n, l, 0.7, 0.5)
            .iter()
            .map(|v| v + 0.3)
            .collect();
        let t = simulate_kse(&m, &x0, 1e-3, 10.0, 1000).unwrap();
        let mean0 = x0.iter().sum::<f64>() / n as f64;
        for c in 0..t.len() {
            let mean = t.states.column(c).sum() / n as f64;
            assert!((mean - mean0).abs() < 1e-10 * (1.0 + t.times[c]));
        }
    }

    #[test]
    fn second_order_in_time() {
        let (n, l) = (64, 22.0);
        let m = kse_model(n, l, 1.0).unwrap();
        let x0 = kse_initial_condition(n, l, 1.2, 0.5);
        let end = |dt: f64| {
            let steps = (1.0 / dt).round() as usize;
            let t = simulate_kse(&m, &x0, dt, 1.0 + dt, steps).unwrap();
            t.states.column(1).into_owned()
        };
        let reference = end(1e-4);
        let e1 = (end(4e-3) - &reference).norm();
        let e2 = (end(2e-3) - &reference).norm();
        let p = (e1 / e2).log2();
        assert!((p - 2.0).abs() < 0.3, "order {p}");
    }

    #[test]
    fn source_matches_simulation() {
        let (n, l) = (32, 22.0);
        let m = kse_model(n, l, 1.0).unwrap();
        let ics = vec![
            kse_initial_condition(n, l, 0.2, 0.1),
            kse_initial_condition(n, l, 0.7, 0.9),
        ];
        let mut src = KseTrainingSource::new(&m, ics.clone(), 1e-3, 10, 5).unwrap();
        let t1 = simulate_kse(&m, &ics[1], 1e-3, 0.05, 10).unwrap();
        let snaps: Vec<Snapshot> = std::iter::from_fn(|| src.next_snapshot().unwrap()).collect();
        assert_eq!(snaps.len(), 10);
        for c in 0..5 {
            let s = &snaps[5 + c];
            assert_eq!(s.state.as_slice(), t1.states.column(c).as_slice());
            assert_eq!(
                s.derivative.as_deref().unwrap(),
                t1.derivatives.as_ref().unwrap().column(c).as_slice()
            );
        }
    }
}
