//! Right-hand sides of the operator perturbation bounds for the two paradigm
//! families. Inputs are measured quantities; nothing here is estimated.

/// `√2` for a non-square regularized data matrix, `1` for a square one.
pub fn alpha(rows: usize, cols: usize) -> f64 {
    if rows == cols {
        1.0
    } else {
        std::f64::consts::SQRT_2
    }
}

/// `2 (σ1⁴ + σ1² + η² + K)^{1/2} √min(n, K)` with `η = ‖U‖₂`.
pub fn beta1(sigma1: f64, eta: f64, k: usize, n: usize) -> f64 {
    let s2 = sigma1 * sigma1;
    2.0 * (s2 * s2 + s2 + eta * eta + k as f64).sqrt() * (n.min(k) as f64).sqrt()
}

/// `√r (σ1 + ε) √(1 + (2σ1 + ε)²)`.
pub fn beta2(r: usize, sigma1: f64, eps: f64) -> f64 {
    let t = 2.0 * sigma1 + eps;
    (r as f64).sqrt() * (sigma1 + eps) * (1.0 + t * t).sqrt()
}

/// `σ1 ‖Δ‖₂ τ_v / √γ_min · (1 + α β1 / √γ_min)`.
pub fn bound_rhs_projection(
    sigma1: f64,
    norm_delta: f64,
    gamma_min: f64,
    tau_v: f64,
    alpha: f64,
    beta1: f64,
) -> f64 {
    let sg = gamma_min.sqrt();
    sigma1 * norm_delta / sg * tau_v * (1.0 + alpha * beta1 / sg)
}

/// `σ1 ‖Δ‖₂ τ_w / √γ_min · (1 + α β2 / √γ_min)
///  + (α β2 + √γ_min) √r ‖Δ‖₂ ε / γ_min`.
#[allow(clippy::too_many_arguments)]
pub fn bound_rhs_reformulation(
    sigma1: f64,
    norm_delta: f64,
    gamma_min: f64,
    tau_w: f64,
    eps: f64,
    alpha: f64,
    beta2: f64,
    r: usize,
) -> f64 {
    let sg = gamma_min.sqrt();
    sigma1 * norm_delta / sg * tau_w * (1.0 + alpha * beta2 / sg)
        + (alpha * beta2 + sg) * (r as f64).sqrt() * norm_delta / gamma_min * eps
}
