//! Operators learned in one shared streaming basis at nine viscosities.
//! Every other one is spline-interpolated from its neighbours' operators
//! and compared with the operator fitted directly to its own data, both as
//! a matrix and through the reduced trajectory it produces.
//!
//!     cargo run --release --example operator_interpolation

use nalgebra::DMatrix;
use streaming_opinf::models::{
    burgers_model, integrate_rom, simulate_burgers, BurgersTrainingSource, RomScheme,
};
use streaming_opinf::opinf::ReducedModel;
use streaming_opinf::opinf::{
    fit_reformulated, interpolate_operators, no_progress, stream_basis, FdScheme, Paradigm,
    Quadratic, RlsMethod, SolverConfig, SvdMethod, Terms,
};
use streaming_opinf::snapshots::{ChainSource, SnapshotSource};
use streaming_opinf::stream_svd::TruncatedSvd;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, r) = (48, 6);
    let mus = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
    let x0 = BurgersTrainingSource::sine_initial_condition(n);
    let mut parts: Vec<Box<dyn SnapshotSource>> = Vec::new();
    for (i, &mu) in mus.iter().enumerate() {
        let seeds = [10 * i as u64, 10 * i as u64 + 1];
        parts.push(Box::new(BurgersTrainingSource::new(
            burgers_model(n, mu)?,
            x0.clone(),
            &seeds,
            1e-4,
            10,
            400,
        )?));
    }
    let lens: Vec<usize> = parts.iter().map(|p| p.len()).collect();
    let segments: Vec<Vec<Vec<usize>>> = parts.iter().map(|p| p.segments()).collect();

    // One pass over every viscosity; row block i of W belongs to mus[i].
    let mut pooled = ChainSource::new(parts)?;
    let pass = stream_basis(
        &mut pooled,
        SvdMethod::Baker,
        r,
        0,
        true,
        &[],
        &mut no_progress,
    )?;
    let w = pass.svd.w.as_ref().expect("tracked");
    let u = pass.inputs.as_ref().expect("Burgers has a boundary input");

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
        gamma1: 1e-9,
        gamma2: 1e-9,
        fd_scheme: FdScheme::Forward1,
        dt: 1e-3,
        checkpoints: Vec::new(),
        seed: 0,
        trace: false,
    };
    let mut models = Vec::new();
    let mut offset = 0;
    for (i, &len) in lens.iter().enumerate() {
        let block = TruncatedSvd {
            v: pass.svd.v.clone(),
            s: pass.svd.s.clone(),
            w: Some(w.rows(offset, len).into_owned()),
        };
        let ui = u.columns(offset, len).into_owned();
        models.push(
            fit_reformulated(&block, Some(&ui), &segments[i], &[], &cfg, &mut no_progress)?.model,
        );
        offset += len;
    }

    let layout = streaming_opinf::opinf::Layout {
        r,
        quadratic: cfg.terms.quadratic,
        m: 1,
        constant: false,
    };
    let (nodes, held): (Vec<usize>, Vec<usize>) = (0..mus.len()).partition(|i| i % 2 == 0);
    let node_mus: Vec<f64> = nodes.iter().map(|&i| mus[i]).collect();
    let node_models: Vec<_> = nodes.iter().map(|&i| models[i].clone()).collect();
    let state_error = |model: &ReducedModel, mu: f64| -> Result<f64, Box<dyn std::error::Error>> {
        let truth = simulate_burgers(
            &burgers_model(n, mu)?,
            &x0,
            &mut |_| vec![1.0],
            1e-4,
            0.4,
            10,
        )?;
        let v = &pass.svd.v;
        let xh0: Vec<f64> = v.tr_mul(&truth.states.column(0)).iter().copied().collect();
        let rom = integrate_rom(
            model,
            &xh0,
            &mut |_| vec![1.0],
            1e-4,
            0.4,
            10,
            RomScheme::SemiImplicitEuler,
        )?;
        Ok((&truth.states - v * &rom.states).norm() / truth.states.norm())
    };
    println!(
        "{:>5} {:>16} {:>16} {:>16}",
        "mu", "operator diff", "direct RSE", "interpolated RSE"
    );
    for i in held {
        let interp = interpolate_operators(&node_mus, &node_models, mus[i])?;
        let direct: DMatrix<f64> = models[i].to_operator(&layout)?;
        let diff = (&interp.to_operator(&layout)? - &direct).norm() / direct.norm();
        println!(
            "{:>5} {:>16.3e} {:>16.3e} {:>16.3e}",
            mus[i],
            diff,
            state_error(&models[i], mus[i])?,
            state_error(&interp, mus[i])?
        );
    }
    Ok(())
}
