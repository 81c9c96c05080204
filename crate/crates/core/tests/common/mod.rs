#![allow(dead_code)]

/// Total variation between `samples` and the density `exp(log_density)`
/// restricted to `[lo, hi]`, measured on 10 bins of equal target mass.
///
/// The target CDF is built by trapezoid integration on a uniform grid, so
/// `log_density` only needs to be correct up to an additive constant.
pub fn binned_tv(samples: &[f64], lo: f64, hi: f64, log_density: impl Fn(f64) -> f64) -> f64 {
    const GRID: usize = 200_000;
    const BINS: usize = 10;
    let h = (hi - lo) / GRID as f64;
    let xs: Vec<f64> = (0..=GRID).map(|i| lo + i as f64 * h).collect();
    let logs: Vec<f64> = xs.iter().map(|&x| log_density(x)).collect();
    let top = logs.iter().cloned().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<f64> = logs.iter().map(|&l| if l.is_finite() { (l - top).exp() } else { 0.0 }).collect();
    let mut cdf = vec![0.0; GRID + 1];
    for i in 1..=GRID {
        cdf[i] = cdf[i - 1] + 0.5 * h * (dens[i - 1] + dens[i]);
    }
    let total = cdf[GRID];
    let mut edges = Vec::with_capacity(BINS - 1);
    let mut j = 0;
    for b in 1..BINS {
        let target = total * b as f64 / BINS as f64;
        while cdf[j + 1] < target {
            j += 1;
        }
        let frac = (target - cdf[j]) / (cdf[j + 1] - cdf[j]);
        edges.push(xs[j] + frac * h);
    }
    let mut counts = [0usize; BINS];
    for &s in samples {
        let bin = edges.iter().take_while(|&&e| s > e).count();
        counts[bin] += 1;
    }
    let n = samples.len() as f64;
    0.5 * counts.iter().map(|&c| (c as f64 / n - 1.0 / BINS as f64).abs()).sum::<f64>()
}

/// Asymptotic Kolmogorov tail probability for `sqrt(n_eff)·D`, with the
/// usual small-sample correction.
pub fn kolmogorov_p(d: f64, n_eff: f64) -> f64 {
    let en = n_eff.sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// One-sample KS p-value against `cdf`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    kolmogorov_p(d, n)
}

/// Two-sample KS p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    kolmogorov_p(d, (na * nb) as f64 / (na + nb) as f64)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}
