//! Choosing Tikhonov weights by training-trajectory error: one streaming
//! basis pass, then one reformulated least-squares fit per grid point.
//!
//!     cargo run --release --example grid_search

use nalgebra::DMatrix;
use streaming_opinf::models::{
    burgers_model, integrate_rom, simulate_burgers, BurgersTrainingSource, RomScheme,
};
use streaming_opinf::opinf::{
    fit_reformulated, grid_search, log_grid, no_progress, stream_basis, FdScheme, Paradigm,
    Quadratic, RlsMethod, SolverConfig, SvdMethod, Terms,
};
use streaming_opinf::snapshots::SnapshotSource;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, r, dt, save) = (48, 6, 1e-4, 10);
    let model = burgers_model(n, 0.3)?;
    let x0 = BurgersTrainingSource::sine_initial_condition(n);
    let mut src = BurgersTrainingSource::new(model.clone(), x0.clone(), &[1, 2, 3], dt, save, 500)?;
    let pass = stream_basis(
        &mut src,
        SvdMethod::Baker,
        r,
        0,
        true,
        &[],
        &mut no_progress,
    )?;
    let segments = src.segments();

    let truth = simulate_burgers(&model, &x0, &mut |_| vec![1.0], dt, 0.5, save)?;
    let v = &pass.svd.v;
    let xh0: Vec<f64> = v.tr_mul(&truth.states.column(0)).iter().copied().collect();

    let mut evaluate = |g1: f64, g2: f64| {
        let cfg = SolverConfig {
            paradigm: Paradigm::IsvdLs,
            svd_method: SvdMethod::Baker,
            rls_method: RlsMethod::InverseQr,
            r,
            terms: Terms {
                quadratic: Quadratic::Unique,
                input: true,
                constant: false,
            },
            gamma1: g1,
            gamma2: g2,
            fd_scheme: FdScheme::Forward1,
            dt: dt * save as f64,
            checkpoints: Vec::new(),
            seed: 0,
            trace: false,
        };
        let fit = fit_reformulated(
            &pass.svd,
            pass.inputs.as_ref(),
            &segments,
            &[],
            &cfg,
            &mut no_progress,
        )?;
        let rom = integrate_rom(
            &fit.model,
            &xh0,
            &mut |_| vec![1.0],
            dt,
            0.5,
            save,
            RomScheme::SemiImplicitEuler,
        )?;
        let err: DMatrix<f64> = &truth.states - v * &rom.states;
        let e = err.norm() / truth.states.norm();
        println!("gamma1 {g1:9.1e}  gamma2 {g2:9.1e}  error {e:.4e}");
        Ok(e)
    };
    let best = grid_search(
        &log_grid(1e-10, 1e-2, 5),
        &log_grid(1e-10, 1e-2, 5),
        &mut evaluate,
    )?;
    println!(
        "best: gamma1 {:.1e}, gamma2 {:.1e}, error {:.4e}",
        best.gamma1, best.gamma2, best.error
    );
    Ok(())
}
