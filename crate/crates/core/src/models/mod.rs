//! Full-order simulators that produce training data, the intrusive
//! projection baseline, and reduced-model time integrators.

mod burgers;
mod galerkin;
mod integrate;
mod kse;
mod sparse;

pub use burgers::{
    burgers_model, simulate_burgers, BurgersSimulator, BurgersTrainingSource,
    PiecewiseConstantInput,
};
pub use galerkin::intrusive_galerkin;
pub use integrate::{integrate_rom, Cnab2, RomCnab, RomScheme, RomTrajectory, SplitSystem};
pub use kse::{
    kse_initial_condition, kse_model, simulate_kse, KseSimulator, KseSolver, KseTrainingSource,
};
pub use sparse::{CsrMatrix, QuadraticOperator, TridiagonalLu};

use nalgebra::DMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Dirichlet values `u(t)` on the left and `−u(t)` on the right, folded
    /// into the input operator.
    DirichletInput,
    Periodic,
}

/// `ẋ = A1 x + A2 (x ⊗ x) + B u` on a uniform grid.
#[derive(Clone, Debug)]
pub struct FullModel {
    pub a1: CsrMatrix,
    pub a2: QuadraticOperator,
    pub b: Option<DMatrix<f64>>,
    pub spacing: f64,
    pub boundary: Boundary,
}

impl FullModel {
    pub fn n(&self) -> usize {
        self.a1.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.as_ref().map_or(0, |b| b.ncols())
    }

    pub fn rhs(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut f = self.a1.mul_vec(x);
        self.a2.accumulate(x, &mut f);
        if let Some(b) = &self.b {
            for (i, fi) in f.iter_mut().enumerate() {
                for (j, uj) in u.iter().enumerate() {
                    *fi += b[(i, j)] * uj;
                }
            }
        }
        f
    }
}

/// Saved states of one simulation, one column per saved time.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: DMatrix<f64>,
    /// Input held from each saved time until the next one.
    pub inputs: Option<DMatrix<f64>>,
    /// Time derivatives at the saved times, when the simulator provides them.
    pub derivatives: Option<DMatrix<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}
