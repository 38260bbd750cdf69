//! Incremental SVD one column at a time, checked against a batch SVD of the
//! same matrix.
//!
//!     cargo run --release --example baker_isvd

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use streaming_opinf::linalg::{orthonormality_defect, singular_values};
use streaming_opinf::metrics::subspace_angle_error;
use streaming_opinf::stream_svd::{batch_svd, BakerIsvd};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, k, r) = (64, 200, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // Decaying spectrum: column j of the left factor is scaled by 2^-j.
    let left = DMatrix::from_fn(n, 20, |_, j| {
        rng.gen_range(-1.0..1.0) * 0.5f64.powi(j as i32)
    });
    let right = DMatrix::from_fn(20, k, |_, _| rng.gen_range(-1.0..1.0));
    let x = left * right;

    let mut isvd = BakerIsvd::new(n, r, false);
    for col in x.column_iter() {
        isvd.push(col.as_slice())?;
    }
    let stream = isvd.into_svd();
    let batch = batch_svd(&x, r);
    let exact = singular_values(&x);

    println!("{:>3} {:>14} {:>14}", "i", "streaming", "batch");
    for i in 0..r {
        println!("{:>3} {:>14.6e} {:>14.6e}", i + 1, stream.s[i], exact[i]);
    }
    println!(
        "orthonormality defect   {:.2e}",
        orthonormality_defect(&stream.v)
    );
    println!(
        "subspace angle error    {:.2e}",
        subspace_angle_error(&batch.v, &stream.v)?
    );
    Ok(())
}
