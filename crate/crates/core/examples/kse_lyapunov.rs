//! Lyapunov spectrum and Kaplan-Yorke dimension of a coarse KSE model, and
//! of a reduced model learned from its trajectory with the streaming
//! projection paradigm.
//!
//!     cargo run --release --example kse_lyapunov

use nalgebra::DVector;
use streaming_opinf::metrics::{kaplan_yorke, lyapunov_spectrum, LyapunovConfig};
use streaming_opinf::models::{
    kse_initial_condition, kse_model, KseSolver, KseTrainingSource, RomCnab,
};
use streaming_opinf::opinf::{
    no_progress, solve_paradigm, Paradigm, RlsMethod, SolverConfig, SvdMethod, Terms,
};
use streaming_opinf::opinf::{FdScheme, Quadratic};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, length, dt) = (64, 22.0, 0.01);
    let model = kse_model(n, length, 1.0)?;
    let x0 = kse_initial_condition(n, length, 0.7, 0.5);

    // 4 trajectories' worth of attractor data from one long run.
    let mut src = KseTrainingSource::new(&model, vec![x0.clone()], dt, 10, 4000)?;
    let cfg = SolverConfig {
        paradigm: Paradigm::IsvdProjectRls,
        svd_method: SvdMethod::Baker,
        rls_method: RlsMethod::InverseQr,
        r: 16,
        terms: Terms {
            quadratic: Quadratic::Unique,
            input: false,
            constant: false,
        },
        gamma1: 1e-9,
        gamma2: 1e-9,
        fd_scheme: FdScheme::Forward1,
        dt: 0.1,
        checkpoints: Vec::new(),
        seed: 0,
        trace: false,
    };
    let fit = solve_paradigm(&mut src, &cfg, &mut no_progress)?;

    let le = LyapunovConfig::new(6, dt, 400.0);
    let mut full = lyapunov_spectrum(KseSolver::new(&model)?, &x0, &le)?;
    full.sort_by(|a, b| b.total_cmp(a));
    let xh0 = fit.basis.v.tr_mul(&DVector::from_column_slice(&x0));
    let mut rom = lyapunov_spectrum(RomCnab::new(fit.model), xh0.as_slice(), &le)?;
    rom.sort_by(|a, b| b.total_cmp(a));

    println!("{:>3} {:>12} {:>12}", "i", "full", "reduced");
    for i in 0..full.len() {
        println!("{:>3} {:>12.5} {:>12.5}", i + 1, full[i], rom[i]);
    }
    println!(
        "Kaplan-Yorke: full {:.3}, reduced {:.3}",
        kaplan_yorke(&full)?,
        kaplan_yorke(&rom)?
    );
    Ok(())
}
