//! One-pass randomized SVD with sparse sign maps. An exactly low-rank
//! matrix is recovered to rounding error; a noisy one is compared with the
//! expected-error bound.
//!
//!     cargo run --release --example sketchy_svd

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use streaming_opinf::linalg::singular_values;
use streaming_opinf::stream_svd::{sketch_sizes, sketchy_error_bound, SketchySvd, TruncatedSvd};

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn reconstruct(t: &TruncatedSvd) -> DMatrix<f64> {
    let w = t.w.as_ref().expect("sketch returns both factors");
    &t.v * DMatrix::from_diagonal(&t.s) * w.transpose()
}

fn run(
    x: &DMatrix<f64>,
    r: usize,
    rank: usize,
    seed: u64,
) -> Result<f64, Box<dyn std::error::Error>> {
    let mut sk = SketchySvd::new(x.nrows(), x.ncols(), r, seed);
    for col in x.column_iter() {
        sk.push(col.as_slice())?;
    }
    let approx = reconstruct(&sk.finalize_rank(rank)?);
    Ok((x - approx).norm() / x.norm())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, k, r) = (500, 400, 5);
    let (q, s, zeta) = sketch_sizes(r);
    println!("r = {r}: q = {q}, s = {s}, zeta = {zeta}");
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let low_rank = gaussian(n, r, &mut rng) * gaussian(r, k, &mut rng);
    println!(
        "exact rank {r}: relative error {:.2e}",
        run(&low_rank, r, r, 11)?
    );

    let noisy = &low_rank + gaussian(n, k, &mut rng) * 1e-2;
    let sigma: Vec<f64> = singular_values(&noisy).iter().copied().collect();
    let errs: Vec<f64> = (0..20)
        .map(|seed| run(&noisy, r, q, seed))
        .collect::<Result<_, _>>()?;
    let mean_sq: f64 =
        errs.iter().map(|e| (e * noisy.norm()).powi(2)).sum::<f64>() / errs.len() as f64;
    println!(
        "noisy, untruncated rank-q sketch: mean squared error {mean_sq:.3e}, bound {:.3e}",
        sketchy_error_bound(&sigma, q, s)
    );
    Ok(())
}
