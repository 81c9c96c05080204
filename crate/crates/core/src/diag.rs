//! Convergence summaries.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Split-chain potential scale reduction: every chain is cut in half and the
/// halves are compared as separate chains. `None` with fewer than 4 draws
/// per chain or no within-chain variance.
pub fn split_rhat(chains: &[Vec<f64>]) -> Option<f64> {
    let n = chains.iter().map(|c| c.len()).min()? / 2;
    if n < 2 {
        return None;
    }
    let mut halves = Vec::with_capacity(2 * chains.len());
    for c in chains {
        halves.push(&c[..n]);
        halves.push(&c[n..2 * n]);
    }
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let b = n as f64 * var(&means);
    let w = mean(&halves.iter().map(|h| var(h)).collect::<Vec<_>>());
    if !(w > 0.0) {
        return None;
    }
    let v = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    Some((v / w).sqrt())
}

/// Standard error of the mean of a correlated series by non-overlapping
/// batch means (`⌊√n⌋` batches).
pub fn batch_means_se(x: &[f64]) -> f64 {
    let n = x.len();
    let batches = ((n as f64).sqrt().floor() as usize).max(2);
    let size = n / batches;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..batches).map(|b| mean(&x[b * size..(b + 1) * size])).collect();
    (var(&means) / batches as f64).sqrt()
}
