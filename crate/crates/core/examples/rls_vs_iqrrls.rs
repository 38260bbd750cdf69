//! Recursive least squares in covariance form and in inverse-QR form, both
//! driven row by row to the regularized batch solution.
//!
//!     cargo run --release --example rls_vs_iqrrls

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use streaming_opinf::recursive_ls::{augment, batch_ls, Regularizer, Rls, SqrtRls};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (k, d, r) = (500, 30, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = DMatrix::from_fn(k, d, |_, _| rng.gen_range(-1.0..1.0));
    let truth = DMatrix::from_fn(d, r, |_, _| rng.gen_range(-1.0..1.0));
    let rhs = &data * &truth;

    let reg = Regularizer::uniform(1e-10, d)?;
    let (dbar, rbar) = augment(&data, &rhs, &reg)?;
    let batch = batch_ls(&dbar, &rbar)?;

    let mut rls = Rls::new(&reg, r);
    let mut iqr = SqrtRls::new(&reg, r);
    println!("{:>5} {:>14} {:>14}", "rows", "rls", "iqrrls");
    for i in 0..k {
        let (dr, rr): (Vec<f64>, Vec<f64>) = (
            data.row(i).iter().copied().collect(),
            rhs.row(i).iter().copied().collect(),
        );
        rls.update(&dr, &rr)?;
        iqr.update(&dr, &rr)?;
        if (i + 1) % 50 == 0 || i + 1 == d {
            let e = |o: &DMatrix<f64>| (o - &batch).norm() / batch.norm();
            println!(
                "{:>5} {:>14.3e} {:>14.3e}",
                i + 1,
                e(rls.operator()),
                e(iqr.operator())
            );
        }
    }
    println!(
        "recovered operator error {:.2e}",
        (&batch - &truth).norm() / truth.norm()
    );
    Ok(())
}
