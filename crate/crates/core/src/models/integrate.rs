use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};
use crate::linalg::kron_self;
use crate::opinf::ReducedModel;

/// `ẋ = A1 x + N(x, u)` with `A1` handled implicitly and `N` explicitly.
pub trait SplitSystem {
    fn dim(&self) -> usize;
    /// `out = A1 x`.
    fn linear(&self, x: &[f64], out: &mut [f64]);
    /// `out = N(x, u)`.
    fn explicit(&self, x: &[f64], u: &[f64], out: &mut [f64]);
    /// `out = ∂N/∂x (x) · V`, one column per tangent vector.
    fn explicit_jvp(&self, x: &[f64], v: &DMatrix<f64>, out: &mut DMatrix<f64>);
    /// Fixes `α` for subsequent [`SplitSystem::solve_implicit`] calls.
    fn prepare(&mut self, alpha: f64) -> Result<()>;
    /// `rhs ← (I − α A1)⁻¹ rhs`.
    fn solve_implicit(&self, rhs: &mut [f64]);
}

/// Crank-Nicolson on `A1`, second-order Adams-Bashforth on `N`. The first
/// step uses explicit Euler on `N`.
pub struct Cnab2<S> {
    sys: S,
    dt: f64,
    x: Vec<f64>,
    prev: Option<Vec<f64>>,
    steps: usize,
    lin: Vec<f64>,
    cur: Vec<f64>,
}

impl<S: SplitSystem> Cnab2<S> {
    pub fn new(mut sys: S, x0: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {dt}"
            )));
        }
        if x0.len() != sys.dim() {
            return Err(Error::DimensionMismatch {
                expected: sys.dim(),
                found: x0.len(),
            });
        }
        sys.prepare(0.5 * dt)?;
        let n = x0.len();
        Ok(Self {
            sys,
            dt,
            x: x0,
            prev: None,
            steps: 0,
            lin: vec![0.0; n],
            cur: vec![0.0; n],
        })
    }

    pub fn system(&self) -> &S {
        &self.sys
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&mut self, u: &[f64]) -> Result<()> {
        let dt = self.dt;
        self.sys.linear(&self.x, &mut self.lin);
        self.sys.explicit(&self.x, u, &mut self.cur);
        let mut rhs = vec![0.0; self.x.len()];
        match &self.prev {
            None => {
                for i in 0..rhs.len() {
                    rhs[i] = self.x[i] + 0.5 * dt * self.lin[i] + dt * self.cur[i];
                }
            }
            Some(p) => {
                for i in 0..rhs.len() {
                    rhs[i] =
                        self.x[i] + 0.5 * dt * self.lin[i] + dt * (1.5 * self.cur[i] - 0.5 * p[i]);
                }
            }
        }
        self.sys.solve_implicit(&mut rhs);
        self.steps += 1;
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonfiniteState { step: self.steps });
        }
        self.prev = Some(std::mem::replace(&mut self.cur, vec![0.0; rhs.len()]));
        self.x = rhs;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RomScheme {
    /// `(I − dt Â1) x̂⁺ = x̂ + dt (Â2 (x̂ ⊗ x̂) + B̂ u + ĉ)`.
    SemiImplicitEuler,
    Cnab2,
    Rk4,
}

impl RomScheme {
    pub fn name(self) -> &'static str {
        match self {
            RomScheme::SemiImplicitEuler => "semi-implicit-euler",
            RomScheme::Cnab2 => "cnab2",
            RomScheme::Rk4 => "rk4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            RomScheme::SemiImplicitEuler,
            RomScheme::Cnab2,
            RomScheme::Rk4,
        ]
        .into_iter()
        .find(|x| x.name() == s)
    }
}

/// A reduced model split as `Â1` implicit, everything else explicit.
#[derive(Clone, Debug)]
pub struct RomCnab {
    model: ReducedModel,
    lu: Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl RomCnab {
    pub fn new(model: ReducedModel) -> Self {
        Self { model, lu: None }
    }

    pub fn model(&self) -> &ReducedModel {
        &self.model
    }

    /// `Â2 (I ⊗ x̂ + x̂ ⊗ I)`, the Jacobian without `Â1`.
    pub fn quadratic_jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let xv = DVector::from_column_slice(x);
        let mut j = self.model.jacobian(&xv);
        j -= &self.model.a1;
        j
    }
}

impl SplitSystem for RomCnab {
    fn dim(&self) -> usize {
        self.model.r()
    }

    fn linear(&self, x: &[f64], out: &mut [f64]) {
        let y = &self.model.a1 * DVector::from_column_slice(x);
        out.copy_from_slice(y.as_slice());
    }

    fn explicit(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        let mut f = DVector::zeros(x.len());
        if let Some(a2) = &self.model.a2 {
            f.gemv(1.0, a2, &DVector::from_vec(kron_self(x)), 0.0);
        }
        if let Some(b) = &self.model.b {
            f.gemv(1.0, b, &DVector::from_column_slice(u), 1.0);
        }
        if let Some(c) = &self.model.c {
            f += c;
        }
        out.copy_from_slice(f.as_slice());
    }

    fn explicit_jvp(&self, x: &[f64], v: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        if self.model.a2.is_none() {
            out.fill(0.0);
            return;
        }
        out.gemm(1.0, &self.quadratic_jacobian(x), v, 0.0);
    }

    fn prepare(&mut self, alpha: f64) -> Result<()> {
        let r = self.model.r();
        let m = DMatrix::identity(r, r) - &self.model.a1 * alpha;
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(Error::InvalidArgument("I − α Â1 is singular".into()));
        }
        self.lu = Some(lu);
        Ok(())
    }

    fn solve_implicit(&self, rhs: &mut [f64]) {
        let lu = self
            .lu
            .as_ref()
            .expect("prepare() must precede solve_implicit()");
        let mut b = DVector::from_column_slice(rhs);
        lu.solve_mut(&mut b);
        rhs.copy_from_slice(b.as_slice());
    }
}

/// Reduced trajectory. After a blow-up the remaining columns are NaN.
#[derive(Clone, Debug)]
pub struct RomTrajectory {
    pub times: Vec<f64>,
    pub states: DMatrix<f64>,
    /// Step at which the state first became non-finite.
    pub blowup: Option<usize>,
}

impl RomTrajectory {
    pub fn is_stable(&self) -> bool {
        self.blowup.is_none()
    }
}

/// Integrates `round(t_final / dt)` steps, saving every `save_every` steps
/// including both endpoints. `u_fn(k)` is the input during step `k`.
pub fn integrate_rom(
    model: &ReducedModel,
    xhat0: &[f64],
    u_fn: &mut dyn FnMut(usize) -> Vec<f64>,
    dt: f64,
    t_final: f64,
    save_every: usize,
    scheme: RomScheme,
) -> Result<RomTrajectory> {
    let r = model.r();
    if xhat0.len() != r {
        return Err(Error::DimensionMismatch {
            expected: r,
            found: xhat0.len(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let steps = (t_final / dt).round() as usize;
    let save_every = save_every.max(1);
    let saves = steps / save_every + 1;
    let mut out = RomTrajectory {
        times: (0..saves).map(|c| (c * save_every) as f64 * dt).collect(),
        states: DMatrix::from_element(r, saves, f64::NAN),
        blowup: None,
    };
    out.states.column_mut(0).copy_from_slice(xhat0);

    let mut step: Box<dyn FnMut(&[f64], &[f64]) -> Vec<f64>> = match scheme {
        RomScheme::SemiImplicitEuler => {
            let lu = (DMatrix::identity(r, r) - &model.a1 * dt).lu();
            let explicit = RomCnab::new(model.clone());
            Box::new(move |x: &[f64], u: &[f64]| {
                let mut n = vec![0.0; r];
                explicit.explicit(x, u, &mut n);
                let mut b =
                    DVector::from_iterator(r, x.iter().zip(&n).map(|(xi, ni)| xi + dt * ni));
                if !lu.solve_mut(&mut b) {
                    b.fill(f64::NAN);
                }
                b.as_slice().to_vec()
            })
        }
        RomScheme::Cnab2 => {
            let mut cn = Cnab2::new(RomCnab::new(model.clone()), xhat0.to_vec(), dt)?;
            Box::new(move |_x: &[f64], u: &[f64]| match cn.step(u) {
                Ok(()) => cn.state().to_vec(),
                Err(_) => vec![f64::NAN; r],
            })
        }
        RomScheme::Rk4 => Box::new(move |x: &[f64], u: &[f64]| {
            let f = |y: &DVector<f64>| model.rhs(y, u);
            let x0 = DVector::from_column_slice(x);
            let k1 = f(&x0);
            let k2 = f(&(&x0 + &k1 * (0.5 * dt)));
            let k3 = f(&(&x0 + &k2 * (0.5 * dt)));
            let k4 = f(&(&x0 + &k3 * dt));
            let x1 = x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            x1.as_slice().to_vec()
        }),
    };

    let mut x = xhat0.to_vec();
    for k in 0..steps {
        let u = u_fn(k);
        x = step(&x, &u);
        if x.iter().any(|v| !v.is_finite()) {
            out.blowup = Some(k + 1);
            break;
        }
        if (k + 1) % save_every == 0 {
            out.states
                .column_mut((k + 1) / save_every)
                .copy_from_slice(&x);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64) -> ReducedModel {
        ReducedModel::linear(DMatrix::from_element(1, 1, a))
    }

    #[test]
    fn rk4_matches_exponential() {
        let t = integrate_rom(
            &scalar(-1.0),
            &[2.0],
            &mut |_| vec![],
            0.01,
            1.0,
            100,
            RomScheme::Rk4,
        )
        .unwrap();
        assert!((t.states[(0, 1)] - 2.0 * (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn zero_model_is_constant() {
        for scheme in [
            RomScheme::SemiImplicitEuler,
            RomScheme::Cnab2,
            RomScheme::Rk4,
        ] {
            let m = ReducedModel::linear(DMatrix::zeros(2, 2));
            let t = integrate_rom(&m, &[1.0, -3.0], &mut |_| vec![], 0.1, 1.0, 1, scheme).unwrap();
            for c in 0..t.states.ncols() {
                assert_eq!(t.states.column(c).as_slice(), &[1.0, -3.0]);
            }
        }
    }

    fn slope(scheme: RomScheme, dts: [f64; 2]) -> f64 {
        let m = scalar(-2.0);
        let err = |dt: f64| {
            let t = integrate_rom(&m, &[1.0], &mut |_| vec![], dt, 1.0, 1, scheme).unwrap();
            (t.states[(0, t.states.ncols() - 1)] - (-2.0f64).exp()).abs()
        };
        (err(dts[0]) / err(dts[1])).ln() / (dts[0] / dts[1]).ln()
    }

    #[test]
    fn convergence_orders() {
        assert!((slope(RomScheme::SemiImplicitEuler, [0.02, 0.01]) - 1.0).abs() < 0.3);
        assert!((slope(RomScheme::Cnab2, [0.02, 0.01]) - 2.0).abs() < 0.3);
        assert!((slope(RomScheme::Rk4, [0.1, 0.05]) - 4.0).abs() < 0.3);
    }

    #[test]
    fn cnab2_order_with_explicit_part() {
        // ẋ = −x + x², exact x(t) = 1 / (1 + (1/x0 − 1) eᵗ).
        let mut m = scalar(-1.0);
        m.a2 = Some(DMatrix::from_element(1, 1, 1.0));
        let exact = 1.0 / (1.0 + (1.0 / 0.5 - 1.0) * 1f64.exp());
        let err = |dt: f64| {
            let t =
                integrate_rom(&m, &[0.5], &mut |_| vec![], dt, 1.0, 1, RomScheme::Cnab2).unwrap();
            (t.states[(0, t.states.ncols() - 1)] - exact).abs()
        };
        let p = (err(0.02) / err(0.01)).log2();
        assert!((p - 2.0).abs() < 0.3, "order {p}");
    }

    #[test]
    fn blowup_is_reported() {
        let mut m = scalar(0.0);
        m.a2 = Some(DMatrix::from_element(1, 1, 1.0));
        let t =
            integrate_rom(&m, &[10.0], &mut |_| vec![], 0.01, 10.0, 10, RomScheme::Rk4).unwrap();
        assert!(!t.is_stable());
        assert!(t.states[(0, t.states.ncols() - 1)].is_nan());
    }
}
