//! Network estimation from regional time series.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::features::Label;
use crate::{Error, Matrix, Result};

/// |Ω_jk| below this counts as an absent edge.
pub const ZERO_THRESHOLD: f64 = 1e-8;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_GRID_POINTS: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct SubjectScan {
    pub id: String,
    /// `T × V`, rows are time points.
    pub series: Matrix,
    pub covariates: Vec<f64>,
    pub label: Option<Label>,
}

impl SubjectScan {
    pub fn validate(&self) -> Result<()> {
        let (t, v) = self.series.shape();
        if t < 2 || v < 2 {
            return Err(Error::InvalidArgument(alloc::format!(
                "subject {}: need at least 2 time points and 2 regions, got {t}x{v}",
                self.id
            )));
        }
        if !crate::linalg::all_finite(&self.series) || self.covariates.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("subject scan"));
        }
        column_stats(&self.series, 0, t).map_err(|region| Error::ConstantColumn { region })?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StaticNetwork {
    pub precision: Matrix,
    pub penalty: f64,
    /// Fraction of nonzero off-diagonal entries.
    pub density: f64,
    pub tol: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Window length and one correlation matrix per window position.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicSeries {
    pub window_length: usize,
    pub windows: Vec<Matrix>,
}

impl DynamicSeries {
    /// `Q × L` matrix: row `e` is the correlation series of the `e`-th
    /// upper-triangle pair.
    pub fn edge_series(&self) -> Matrix {
        let v = self.windows.first().map_or(0, |w| w.nrows());
        let pairs = crate::features::upper_triangle_pairs(v);
        Matrix::from_fn(pairs.len(), self.windows.len(), |e, t| {
            let (k, l) = pairs[e];
            self.windows[t][(k, l)]
        })
    }
}

/// Per-column means and centred root sums of squares over rows
/// `start..start + len`; `Err(column)` for a constant column.
fn column_stats(x: &Matrix, start: usize, len: usize) -> core::result::Result<(Vec<f64>, Vec<f64>), usize> {
    let v = x.ncols();
    let mut means = vec![0.0; v];
    let mut norms = vec![0.0; v];
    for j in 0..v {
        let col = x.view((start, j), (len, 1));
        let m = col.sum() / len as f64;
        let ss: f64 = col.iter().map(|a| (a - m) * (a - m)).sum();
        let scale = col.iter().fold(0.0f64, |s, a| s.max(a.abs()));
        if !(ss > (1e-12 * scale) * (1e-12 * scale) * len as f64) || ss == 0.0 {
            return Err(j);
        }
        means[j] = m;
        norms[j] = ss.sqrt();
    }
    Ok((means, norms))
}

fn correlation_rows(x: &Matrix, start: usize, len: usize) -> core::result::Result<Matrix, usize> {
    let v = x.ncols();
    let (means, norms) = column_stats(x, start, len)?;
    let mut c = Matrix::identity(v, v);
    for a in 0..v {
        for b in (a + 1)..v {
            let mut s = 0.0;
            for t in start..start + len {
                s += (x[(t, a)] - means[a]) * (x[(t, b)] - means[b]);
            }
            let r = (s / (norms[a] * norms[b])).clamp(-1.0, 1.0);
            c[(a, b)] = r;
            c[(b, a)] = r;
        }
    }
    Ok(c)
}

/// Sample Pearson correlation of the columns of a `T × V` series.
pub fn pearson_correlation(series: &Matrix) -> Result<Matrix> {
    if series.nrows() < 2 {
        return Err(Error::InvalidArgument("correlation needs at least 2 time points".into()));
    }
    if !crate::linalg::all_finite(series) {
        return Err(Error::NonFinite("series"));
    }
    correlation_rows(series, 0, series.nrows()).map_err(|region| Error::ConstantColumn { region })
}

/// Correlation matrices over every window of `w` consecutive time points.
pub fn sliding_window(series: &Matrix, w: usize) -> Result<DynamicSeries> {
    let t = series.nrows();
    if w < 2 || w > t {
        return Err(Error::InvalidArgument(alloc::format!("window length {w} outside [2, {t}]")));
    }
    if !crate::linalg::all_finite(series) {
        return Err(Error::NonFinite("series"));
    }
    let windows = (0..=t - w)
        .map(|s| correlation_rows(series, s, w).map_err(|region| Error::ConstantWindowColumn { window: s, region }))
        .collect::<Result<Vec<_>>>()?;
    Ok(DynamicSeries { window_length: w, windows })
}

/// Fraction of upper-triangle entries with magnitude at least [`ZERO_THRESHOLD`].
pub fn density(precision: &Matrix) -> f64 {
    let v = precision.nrows();
    if v < 2 {
        return 0.0;
    }
    let mut nz = 0usize;
    for k in 0..v {
        for l in (k + 1)..v {
            if precision[(k, l)].abs() >= ZERO_THRESHOLD {
                nz += 1;
            }
        }
    }
    nz as f64 / (v * (v - 1) / 2) as f64
}

/// Largest violation of the stationarity conditions of
/// `log det Ω - tr(SΩ) - λ Σ_{j≠k} |Ω_jk|` at `Ω` (with `W = Ω⁻¹`).
pub fn kkt_residual(s: &Matrix, precision: &Matrix, lambda: f64) -> Result<f64> {
    let w = crate::linalg::spd_inverse(precision)?;
    Ok(kkt_with_covariance(s, precision, &w, lambda))
}

fn kkt_with_covariance(s: &Matrix, omega: &Matrix, w: &Matrix, lambda: f64) -> f64 {
    let v = s.nrows();
    let mut worst = 0.0f64;
    for j in 0..v {
        for k in 0..v {
            let g = w[(j, k)] - s[(j, k)];
            let r = if j == k {
                g.abs()
            } else if omega[(j, k)].abs() >= ZERO_THRESHOLD {
                (g - lambda * omega[(j, k)].signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            };
            worst = worst.max(r);
        }
    }
    worst
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Sparse precision matrix by block coordinate descent over columns, each
/// solved as a lasso by cyclic soft-thresholding. The diagonal is not
/// penalized, so `W_jj = S_jj` throughout.
///
/// Converged when the largest change in the working covariance over a full
/// pass is at most `tol·mean|S_jk|` (off-diagonal) and the KKT residual of
/// the resulting precision is at most `tol`.
pub fn graphical_lasso(s: &Matrix, lambda: f64, tol: f64, max_iter: usize) -> Result<StaticNetwork> {
    let v = s.nrows();
    if s.ncols() != v || v == 0 {
        return Err(Error::DimensionMismatch { what: "square covariance", expected: v, found: s.ncols() });
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter { name: "lambda_gl", value: lambda });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter { name: "tol", value: tol });
    }
    if !crate::linalg::all_finite(s) {
        return Err(Error::NonFinite("covariance"));
    }
    crate::linalg::check_symmetric(s, 1e-10)?;
    if let Some(j) = (0..v).find(|&j| !(s[(j, j)] > 0.0)) {
        return Err(Error::ConstantColumn { region: j });
    }
    if v == 1 {
        let precision = Matrix::from_element(1, 1, 1.0 / s[(0, 0)]);
        return Ok(StaticNetwork { precision, penalty: lambda, density: 0.0, tol, iterations: 0, kkt_residual: 0.0 });
    }

    let off_mean = {
        let mut sum = 0.0;
        for j in 0..v {
            for k in 0..v {
                if j != k {
                    sum += s[(j, k)].abs();
                }
            }
        }
        sum / (v * (v - 1)) as f64
    };
    let threshold = tol * off_mean;
    let inner_tol = tol * 1e-3;

    let mut w = s.clone();
    // Column j of `b` holds the lasso coefficients of node j on the others.
    let mut b = Matrix::zeros(v, v);
    let mut last_residual = f64::INFINITY;
    for iteration in 1..=max_iter {
        let mut max_change = 0.0f64;
        for j in 0..v {
            // Cyclic coordinate descent on ½βᵀW₁₁β - βᵀs₁₂ + λ|β|₁.
            for _ in 0..10_000 {
                let mut delta = 0.0f64;
                for k in 0..v {
                    if k == j {
                        continue;
                    }
                    let mut r = s[(k, j)];
                    for l in 0..v {
                        if l != j && l != k {
                            r -= w[(k, l)] * b[(l, j)];
                        }
                    }
                    let new = soft_threshold(r, lambda) / w[(k, k)];
                    delta = delta.max((new - b[(k, j)]).abs());
                    b[(k, j)] = new;
                }
                if delta <= inner_tol {
                    break;
                }
            }
            for k in 0..v {
                if k == j {
                    continue;
                }
                let mut w12 = 0.0;
                for l in 0..v {
                    if l != j {
                        w12 += w[(k, l)] * b[(l, j)];
                    }
                }
                max_change = max_change.max((w12 - w[(k, j)]).abs());
                w[(k, j)] = w12;
                w[(j, k)] = w12;
            }
        }
        if !crate::linalg::all_finite(&w) {
            return Err(Error::GlassoNotPositiveDefinite { iteration });
        }
        if max_change <= threshold {
            let omega = precision_from_blocks(&w, &b, iteration)?;
            let w_exact = crate::linalg::spd_inverse(&omega).map_err(|_| Error::GlassoNotPositiveDefinite { iteration })?;
            last_residual = kkt_with_covariance(s, &omega, &w_exact, lambda);
            if last_residual <= tol {
                return Ok(StaticNetwork {
                    density: density(&omega),
                    precision: omega,
                    penalty: lambda,
                    tol,
                    iterations: iteration,
                    kkt_residual: last_residual,
                });
            }
        } else {
            last_residual = max_change;
        }
    }
    Err(Error::GlassoNoConvergence { iterations: max_iter, residual: last_residual })
}

/// Ω from the working covariance and the per-column regressions:
/// `Ω_jj = 1/(W_jj - w₁₂ᵀβ)`, `Ω_kj = -β_k Ω_jj`, then symmetrized.
fn precision_from_blocks(w: &Matrix, b: &Matrix, iteration: usize) -> Result<Matrix> {
    let v = w.nrows();
    let mut omega = Matrix::zeros(v, v);
    for j in 0..v {
        let mut q = w[(j, j)];
        for k in 0..v {
            if k != j {
                q -= w[(k, j)] * b[(k, j)];
            }
        }
        if !(q > 0.0) {
            return Err(Error::GlassoNotPositiveDefinite { iteration });
        }
        let d = 1.0 / q;
        omega[(j, j)] = d;
        for k in 0..v {
            if k != j {
                omega[(k, j)] = -b[(k, j)] * d;
            }
        }
    }
    for j in 0..v {
        for k in (j + 1)..v {
            let (a, c) = (omega[(j, k)], omega[(k, j)]);
            // Keep exact zeros when either regression excluded the edge.
            let m = if a == 0.0 || c == 0.0 { 0.0 } else { 0.5 * (a + c) };
            omega[(j, k)] = m;
            omega[(k, j)] = m;
        }
    }
    Ok(omega)
}

/// `points` log-spaced penalties from `0.01·max|S_jk|` to `max|S_jk|`
/// (off-diagonal), increasing.
pub fn default_lambda_grid(s: &Matrix, points: usize) -> Vec<f64> {
    let v = s.nrows();
    let mut hi = 0.0f64;
    for j in 0..v {
        for k in (j + 1)..v {
            hi = hi.max(s[(j, k)].abs());
        }
    }
    if !(hi > 0.0) {
        hi = 1.0;
    }
    let lo = 0.01 * hi;
    if points <= 1 {
        return vec![hi];
    }
    (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            (lo.ln() + t * (hi.ln() - lo.ln())).exp()
        })
        .collect()
}

/// Network from the grid penalty whose density is closest to `target`.
/// Equal distances go to the larger penalty.
pub fn fit_network_at_density(scan: &SubjectScan, target: f64, grid: &[f64], tol: f64, max_iter: usize) -> Result<StaticNetwork> {
    let s = pearson_correlation(&scan.series)?;
    network_at_density(&s, target, grid, tol, max_iter)
}

pub fn network_at_density(s: &Matrix, target: f64, grid: &[f64], tol: f64, max_iter: usize) -> Result<StaticNetwork> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::InvalidParameter { name: "target_density", value: target });
    }
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::InvalidArgument("penalty grid must be strictly increasing".into()));
    }
    let mut best: Option<StaticNetwork> = None;
    let mut failures = Vec::new();
    for &lambda in grid {
        match graphical_lasso(s, lambda, tol, max_iter) {
            Ok(net) => {
                let better = match &best {
                    None => true,
                    // Later grid points have larger penalties, so `<=` keeps ties sparse.
                    Some(b) => (net.density - target).abs() <= (b.density - target).abs(),
                };
                if better {
                    best = Some(net);
                }
            }
            Err(e) => failures.push(alloc::format!("lambda {lambda}: {e}")),
        }
    }
    best.ok_or_else(|| Error::AllGridPointsFailed(failures.join("; ")))
}
