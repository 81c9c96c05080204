//! Scalar special functions.

#[allow(unused_imports)]
use num_traits::Float;

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Logistic function, evaluated without overflow on either tail.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `E(Δ)`: prior expected number of distinct clusters among `p` draws from a
/// Dirichlet process with precision `m`.
pub fn expected_cluster_count(m: f64, p: usize) -> f64 {
    (1..=p).map(|k| m / (m + k as f64 - 1.0)).sum()
}
