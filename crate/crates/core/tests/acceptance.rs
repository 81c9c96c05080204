//! Exit criteria for the library. Runs as a plain binary so every criterion
//! prints its verdict even when captured output is suppressed.
//!
//! `cargo test -p dplsvm-core --test acceptance -- 6 7` runs a subset.

mod common;

use std::time::Instant;

use dplsvm_core::eval::{credible_select, metrics, metrics_with_positive, stratified_splits, Adjust};
use dplsvm_core::features::label_from_extremes;
use dplsvm_core::geweke::{dynamic_hyper, dynamic_problem, geweke_dynamic, geweke_static, prior_cluster_count, static_hyper, static_problem};
use dplsvm_core::netestim::{default_lambda_grid, graphical_lasso, pearson_correlation};
use dplsvm_core::rngkit::RandomStream;
use dplsvm_core::shrinkage::{sample_coefficients, sample_prior, step_dp, step_sigma_beta, ShrinkageState};
use dplsvm_core::svm_dynamic::{self, DynamicChainState, DynamicControls, DynamicData};
use dplsvm_core::svm_static::{self, predict, ChainState, StaticData};
use dplsvm_core::synth::{generate, generate_dynamic, SynthSpec};
use dplsvm_core::{diag, Hyperparameters, Label, Matrix, PosteriorDraws, PriorMode, Vector};

use common::{binned_tv, ks_two_sample, mean};

type Verdict = Result<(bool, String), String>;

struct Criterion {
    id: u32,
    name: &'static str,
    run: fn() -> Verdict,
}

fn main() {
    let filters: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria = [
        Criterion { id: 1, name: "full conditionals match grid densities (TV <= 0.02)", run: conditional_oracles },
        Criterion { id: 2, name: "Geweke joint-distribution tests (|z| < 4)", run: geweke },
        Criterion { id: 3, name: "prior cluster-count law within 5%", run: cluster_count_law },
        Criterion { id: 4, name: "stick-breaking prior equals Laplace mixture (KS p > 0.001)", run: stick_breaking_marginal },
        Criterion { id: 5, name: "dynamic model with R=1, eta=1 reduces to static", run: reduction },
        Criterion { id: 6, name: "end-to-end recovery on synthetic data", run: recovery },
        Criterion { id: 7, name: "dp prior beats global and independent on mean MC", run: dominance },
        Criterion { id: 8, name: "graphical lasso KKT and 2x2 brute force", run: glasso },
        Criterion { id: 9, name: "metric hand cases and extreme-group labels", run: hand_cases },
        Criterion { id: 10, name: "fits are bitwise reproducible", run: determinism },
    ];
    let strict = std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v != "0");
    let mut failed = Vec::new();
    let mut crashed = Vec::new();
    for c in criteria.iter().filter(|c| filters.is_empty() || filters.contains(&c.id)) {
        let start = Instant::now();
        let (pass, detail) = match (c.run)() {
            Ok(v) => v,
            Err(e) => {
                crashed.push(c.id);
                (false, format!("error: {e}"))
            }
        };
        let secs = start.elapsed().as_secs_f64();
        println!(
            "criterion {:>2} {}: {} ({detail}) [{secs:.1}s]",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.name
        );
        if !pass {
            failed.push(c.id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
    }
    // A criterion that misses its threshold is reported, not fatal; one that
    // cannot run is. ACCEPTANCE_STRICT=1 makes every miss fatal.
    if !crashed.is_empty() || (strict && !failed.is_empty()) {
        std::process::exit(1);
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- 1

const ORACLE_DRAWS: usize = 10_000;
const TV_LIMIT: f64 = 0.02;

fn sample_range(xs: &[f64], positive: bool) -> (f64, f64) {
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.5 * (hi - lo);
    if positive {
        (0.5 * lo, hi + pad)
    } else {
        (lo - pad, hi + pad)
    }
}

fn conditional_oracles() -> Verdict {
    let mut results: Vec<(&str, f64)> = Vec::new();
    let hyper = Hyperparameters { a1: 2.0, b1: 1.0, ..Default::default() };
    let mut rng = RandomStream::new(2024, 0);

    // σ_ε² given ρ, β on a five-subject toy.
    let u = Matrix::from_column_slice(5, 1, &[0.3, -1.2, 0.8, 2.0, -0.4]);
    let z = vec![1.0, -1.0, 1.0, -1.0, 1.0];
    let data = StaticData::new(u.clone(), z.clone()).map_err(err)?;
    let mut state = ChainState::initial(5, 1, &hyper);
    state.beta = Vector::from_vec(vec![0.7]);
    state.rho = vec![0.5, 1.3, 2.0, 0.2, 0.9];
    let margins: Vec<f64> = (0..5).map(|i| z[i] * u[(i, 0)] * 0.7).collect();
    let rho = state.rho.clone();
    let mut xs = Vec::with_capacity(ORACLE_DRAWS);
    for _ in 0..ORACLE_DRAWS {
        svm_static::step_sigma_eps(&mut state, &data, &hyper, &mut rng).map_err(err)?;
        xs.push(state.sigma_eps2);
    }
    let (lo, hi) = sample_range(&xs, true);
    results.push((
        "sigma_eps2",
        binned_tv(&xs, lo, hi, |s| {
            let mut lp = -(hyper.a1 + 1.0) * s.ln() - hyper.b1 / s;
            for i in 0..5 {
                let r = rho[i];
                lp += -1.5 * s.ln() - (1.0 + r - margins[i]).powi(2) / (2.0 * r * s);
            }
            lp
        }),
    ));

    // ρ for one subject, on both sides of the margin.
    for (label, beta) in [("rho (margin 0.5)", 0.5), ("rho (margin 1.8)", 1.8)] {
        let data = StaticData::new(Matrix::from_element(1, 1, 1.0), vec![1.0]).map_err(err)?;
        let mut state = ChainState::initial(1, 1, &hyper);
        state.beta[0] = beta;
        state.sigma_eps2 = 0.8;
        let mut xs = Vec::with_capacity(ORACLE_DRAWS);
        for _ in 0..ORACLE_DRAWS {
            svm_static::step_rho(&mut state, &data, &mut rng).map_err(err)?;
            xs.push(state.rho[0]);
        }
        let (lo, hi) = sample_range(&xs, true);
        let gap = 1.0 - beta;
        results.push((label, binned_tv(&xs, lo.max(1e-12), hi, |r| -0.5 * r.ln() - (gap + r).powi(2) / (2.0 * r * 0.8))));
    }

    // scalar β.
    {
        let u = [0.5, -1.0, 1.5, 0.2];
        let z = [1.0, -1.0, -1.0, 1.0];
        let rho = [0.7, 1.1, 0.4, 2.5];
        let (s2, prior_var) = (0.6, 3.0);
        let data = StaticData::new(Matrix::from_column_slice(4, 1, &u), z.to_vec()).map_err(err)?;
        let mut state = ChainState::initial(4, 1, &hyper);
        state.rho = rho.to_vec();
        state.sigma_eps2 = s2;
        state.sigma_beta2 = vec![prior_var];
        let mut xs = Vec::with_capacity(ORACLE_DRAWS);
        for _ in 0..ORACLE_DRAWS {
            svm_static::step_beta(&mut state, &data, &mut rng).map_err(err)?;
            xs.push(state.beta[0]);
        }
        let (lo, hi) = sample_range(&xs, false);
        results.push((
            "beta",
            binned_tv(&xs, lo, hi, |b| {
                let mut lp = -b * b / (2.0 * prior_var);
                for i in 0..4 {
                    lp -= (1.0 + rho[i] - z[i] * u[i] * b).powi(2) / (2.0 * rho[i] * s2);
                }
                lp
            }),
        ));
    }

    // σ²_β given λ and β.
    {
        let (lambda, beta) = (2.0, 0.5);
        let mut s = vec![1.0];
        let mut xs = Vec::with_capacity(ORACLE_DRAWS);
        for _ in 0..ORACLE_DRAWS {
            step_sigma_beta(&mut s, &[lambda], &[beta], &mut rng).map_err(err)?;
            xs.push(s[0]);
        }
        let (lo, hi) = sample_range(&xs, true);
        results.push((
            "sigma_beta2",
            binned_tv(&xs, lo.max(1e-12), hi, |v| -0.5 * v.ln() - beta * beta / (2.0 * v) - lambda * lambda * v / 2.0),
        ));
    }

    // λ atom of a single occupied component.
    {
        let h = Hyperparameters { m: 1e-8, r: 1.0, delta: 1.0, ..Default::default() };
        let beta = [0.5, -0.5];
        let init = ShrinkageState::initial(2, &h);
        let mut xs = Vec::with_capacity(ORACLE_DRAWS);
        for _ in 0..ORACLE_DRAWS {
            let mut s = init.clone();
            step_dp(&mut s, &beta, &h, &mut rng).map_err(err)?;
            if s.labels[0] != s.labels[1] {
                return Err("tiny-precision DP split a two-member cluster".into());
            }
            xs.push(s.lambda[0]);
        }
        let (lo, hi) = sample_range(&xs, true);
        results.push((
            "lambda atom",
            binned_tv(&xs, lo, hi, |l| {
                let prior = (h.r - 1.0) * l.ln() - h.delta * l;
                let laplace: f64 = beta.iter().map(|b| (l / 2.0).ln() - l * f64::abs(*b)).sum();
                prior + laplace
            }),
        ));
    }

    // scalar η (R = 1) with β, γ, ρ, σ_ε² and Σ_η fixed.
    {
        let t = Matrix::from_row_slice(5, 2, &[0.4, -1.0, 1.2, 0.3, -0.7, 0.9, 0.1, 1.5, -1.4, -0.2]);
        let cov = Matrix::from_column_slice(5, 1, &[1.0, -0.5, 0.3, 0.0, 0.8]);
        let z = [1.0, 1.0, -1.0, -1.0, 1.0];
        let data = DynamicData::new(vec![t.clone()], cov.clone(), z.to_vec()).map_err(err)?;
        let mut state = DynamicChainState::initial(5, 2, 1, 1, &hyper);
        state.beta = Vector::from_vec(vec![0.8, -0.6]);
        state.gamma = Vector::from_vec(vec![0.25]);
        state.rho = vec![0.9, 0.3, 1.7, 0.6, 1.1];
        state.sigma_eps2 = 0.7;
        state.sigma_eta = Matrix::from_element(1, 1, 2.0);
        let v: Vec<f64> = (0..5).map(|i| t[(i, 0)] * 0.8 - t[(i, 1)] * 0.6).collect();
        let rho = state.rho.clone();
        let mut xs = Vec::with_capacity(ORACLE_DRAWS);
        for _ in 0..ORACLE_DRAWS {
            svm_dynamic::step_eta(&mut state, &data, &mut rng).map_err(err)?;
            xs.push(state.eta[0]);
        }
        let (lo, hi) = sample_range(&xs, false);
        results.push((
            "eta",
            binned_tv(&xs, lo, hi, |e| {
                let mut lp = -e * e / (2.0 * 2.0);
                for i in 0..5 {
                    let f = v[i] * e + cov[(i, 0)] * 0.25;
                    lp -= (1.0 + rho[i] - z[i] * f).powi(2) / (2.0 * rho[i] * 0.7);
                }
                lp
            }),
        ));
    }

    // d* given Σ_η (R = 2); the slice sampler is a Markov kernel, so thin.
    {
        let h = Hyperparameters { c: 2.0, d: 1.0, ..Default::default() };
        let mut state = DynamicChainState::initial(0, 1, 2, 0, &h);
        state.sigma_eta = Matrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.8]);
        let det = 1.5 * 0.8 - 0.4 * 0.4;
        let trace_inv = (1.5 + 0.8) / det;
        let b = 2.0;
        let mut xs = Vec::with_capacity(ORACLE_DRAWS);
        for _ in 0..ORACLE_DRAWS {
            for _ in 0..3 {
                svm_dynamic::step_d_star(&mut state, &h, &mut rng).map_err(err)?;
            }
            xs.push(state.d_star);
        }
        let (lo, hi) = sample_range(&xs, true);
        results.push((
            "d_star",
            binned_tv(&xs, lo, hi, |d| {
                let prior = -(h.c + 1.0) * d.ln() - h.d / d;
                // ln|dI|^{b/2} - tr(dI Σ⁻¹)/2 from the inverse-Wishart density.
                prior + b * d.ln() - 0.5 * d * trace_inv
            }),
        ));
    }

    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let detail = results.iter().map(|(n, tv)| format!("{n} {tv:.4}")).collect::<Vec<_>>().join(", ");
    Ok((worst <= TV_LIMIT, detail))
}

// ---------------------------------------------------------------- 2

const GEWEKE_SWEEPS: usize = 50_000;
const GEWEKE_Z: f64 = 4.0;
const GEWEKE_MIN_STATS: usize = 10;

fn geweke() -> Verdict {
    let u = static_problem(8, 3, 11);
    let stat = geweke_static(&u, &static_hyper(11), GEWEKE_SWEEPS).map_err(err)?;
    let data = dynamic_problem(6, 2, 2, 1, 12);
    let dyn_ = geweke_dynamic(&data, &dynamic_hyper(2, 12), GEWEKE_SWEEPS).map_err(err)?;
    let pass = stat.stats.len() >= GEWEKE_MIN_STATS
        && dyn_.stats.len() >= GEWEKE_MIN_STATS
        && stat.passes(GEWEKE_Z)
        && dyn_.passes(GEWEKE_Z);
    Ok((
        pass,
        format!(
            "static {} stats max|z| {:.2}, dynamic {} stats max|z| {:.2}",
            stat.stats.len(),
            stat.max_abs_z(),
            dyn_.stats.len(),
            dyn_.max_abs_z()
        ),
    ))
}

// ---------------------------------------------------------------- 3

fn cluster_count_law() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (m, p)) in [(1.0, 50), (2.0, 50), (1.0, 200)].into_iter().enumerate() {
        let check = prior_cluster_count(m, p, 20_000, 1_000, 300 + i as u64).map_err(err)?;
        // Independent evaluation of Σ_{j=1}^{P} M/(M + j - 1).
        let expected: f64 = (1..=p).map(|j| m / (m + j as f64 - 1.0)).sum();
        let rel = (check.mean_delta - expected).abs() / expected;
        pass &= rel <= 0.05;
        parts.push(format!("(M={m}, P={p}) {:.3} vs {expected:.3}", check.mean_delta));
    }
    Ok((pass, parts.join(", ")))
}

// ---------------------------------------------------------------- 4

fn stick_breaking_marginal() -> Verdict {
    const N: usize = 100_000;
    const P: usize = 5;
    const TRUNCATION: usize = 10_000;
    let hyper = Hyperparameters { m: 1.5, r: 2.0, delta: 1.0, ..Default::default() };
    let mut rng = RandomStream::new(404, 0);
    let mut via_sticks = Vec::with_capacity(N);
    for _ in 0..N {
        let shrink = sample_prior(P, &hyper, &mut rng).map_err(err)?;
        let (_, beta) = sample_coefficients(&shrink.lambda, &mut rng).map_err(err)?;
        via_sticks.push(beta[P - 1]);
    }
    // λ from a long explicit truncation of the random measure, then a
    // Laplace draw by inversion.
    let mut rng = RandomStream::new(405, 0);
    let mut direct = Vec::with_capacity(N);
    for _ in 0..N {
        let target = rng.uniform();
        let (mut acc, mut rest) = (0.0, 1.0);
        let mut lambda = None;
        for _ in 0..TRUNCATION {
            let v = rng.beta(1.0, hyper.m).map_err(err)?;
            let w = rest * v;
            rest -= w;
            let atom = rng.gamma(hyper.r, hyper.delta).map_err(err)?;
            acc += w;
            if acc > target {
                lambda = Some(atom);
                break;
            }
        }
        let lambda = match lambda {
            Some(l) => l,
            None => rng.gamma(hyper.r, hyper.delta).map_err(err)?,
        };
        let e = rng.uniform() - 0.5;
        direct.push(-e.signum() * (1.0 - 2.0 * e.abs()).ln() / lambda);
    }
    let p = ks_two_sample(&via_sticks, &direct);
    Ok((p > 0.001, format!("KS p = {p:.4}")))
}

// ---------------------------------------------------------------- 5

fn indicator_z(a: &[f64], b: &[f64], level: f64) -> f64 {
    let mut sorted = a.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = dplsvm_core::eval::quantile_sorted(&sorted, level);
    let ia: Vec<f64> = a.iter().map(|&x| (x <= q) as u8 as f64).collect();
    let ib: Vec<f64> = b.iter().map(|&x| (x <= q) as u8 as f64).collect();
    let se = (diag::batch_means_se(&ia).powi(2) + diag::batch_means_se(&ib).powi(2)).sqrt();
    (mean(&ib) - mean(&ia)) / se.max(1e-12)
}

fn reduction() -> Verdict {
    const LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];
    let (n, q) = (40, 3);
    let mut rng = RandomStream::new(55, 7);
    let t = Matrix::from_fn(n, q, |_, _| rng.standard_normal());
    let z: Vec<f64> = (0..n)
        .map(|i| if t[(i, 0)] - 0.5 * t[(i, 1)] + 0.8 * rng.standard_normal() >= 0.0 { 1.0 } else { -1.0 })
        .collect();
    let base = Hyperparameters { n_iter: 21_000, burn_in: 1_000, thin: 10, n_chains: 1, ..Default::default() };

    let static_draws = svm_static::fit_static_data(
        &StaticData::new(t.clone(), z.clone()).map_err(err)?,
        &Hyperparameters { seed: 1, ..base.clone() },
    )
    .map_err(err)?;
    let data = DynamicData::new(vec![t], Matrix::zeros(n, 0), z).map_err(err)?;
    let dynamic_draws = svm_dynamic::fit_dynamic_data(
        &data,
        &Hyperparameters { seed: 2, ..base },
        DynamicControls { update_eta: false, update_sigma_eta: false },
    )
    .map_err(err)?;
    let a = static_draws.coefficient_matrix().map_err(err)?;
    let b = dynamic_draws.coefficient_matrix().map_err(err)?;
    let mut worst: f64 = 0.0;
    for j in 0..q {
        let ca: Vec<f64> = a.column(j).iter().copied().collect();
        let cb: Vec<f64> = b.column(j).iter().copied().collect();
        for level in LEVELS {
            worst = worst.max(indicator_z(&ca, &cb, level).abs()).max(indicator_z(&cb, &ca, level).abs());
        }
    }
    // Three Monte Carlo standard errors per quantile.
    Ok((worst < 3.0, format!("{} draws each, max quantile z {worst:.2}", a.nrows())))
}

// ---------------------------------------------------------------- 6 and 7

const SEEDS: std::ops::Range<u64> = 0..10;

struct SeedOutcome {
    mc: f64,
    true_pos: usize,
    false_pos: usize,
}

fn recovery_hyper(seed: u64, mode: PriorMode) -> Hyperparameters {
    Hyperparameters { b1: 30.0, prior_mode: mode, n_iter: 5000, burn_in: 1000, thin: 2, n_chains: 2, seed, ..Default::default() }
}

fn run_recovery(seed: u64, mode: PriorMode) -> Result<SeedOutcome, String> {
    let spec = SynthSpec::two_groups(200, 100, 2.0, 1.0, 7_000 + seed).with_bayes_error(0.05).map_err(err)?;
    let data = generate(&spec).map_err(err)?;
    let labels: Vec<Label> = data.table.labels.iter().map(|l| l.expect("synthetic labels")).collect();
    let split = stratified_splits(&labels, 1, 0.25, seed).map_err(err)?.remove(0);
    let train = data.table.subset(&split.train).restandardized(None).map_err(err)?;
    let mut test = data.table.subset(&split.test);
    test.standardization = train.standardization.clone();
    let draws: PosteriorDraws = svm_static::fit_static(&train, &recovery_hyper(seed, mode)).map_err(err)?;
    let pred = predict(&draws, &test.design().map_err(err)?).map_err(err)?;
    let truth: Vec<Label> = split.test.iter().map(|&i| labels[i]).collect();
    let mc = metrics(&truth, &pred.labels).map_err(err)?.mc;
    let selected = credible_select(&draws, 0.05, Adjust::Bonferroni).map_err(err)?.significant();
    let planted: Vec<usize> = data.signals.iter().map(|s| s.0).collect();
    let true_pos = selected.iter().filter(|i| planted.contains(i)).count();
    Ok(SeedOutcome { mc, true_pos, false_pos: selected.len() - true_pos })
}

/// DP-prior outcomes are shared by criteria 6 and 7; fits are deterministic.
static DP_RUNS: std::sync::OnceLock<Vec<SeedOutcome>> = std::sync::OnceLock::new();

fn dp_runs() -> Result<&'static [SeedOutcome], String> {
    if let Some(r) = DP_RUNS.get() {
        return Ok(r);
    }
    let runs = SEEDS.into_iter().map(|seed| run_recovery(seed, PriorMode::Dp)).collect::<Result<Vec<_>, _>>()?;
    Ok(DP_RUNS.get_or_init(|| runs))
}

fn recovery() -> Verdict {
    let runs = dp_runs()?;
    let mc: Vec<f64> = runs.iter().map(|o| o.mc).collect();
    let tp: Vec<f64> = runs.iter().map(|o| o.true_pos as f64).collect();
    let fp: Vec<f64> = runs.iter().map(|o| o.false_pos as f64).collect();
    let (mc, tp, fp) = (mean(&mc), mean(&tp), mean(&fp));
    let pass = mc <= 0.05 + 0.05 && tp >= 8.0 && fp <= 2.0;
    Ok((pass, format!("mean MC {mc:.3} (limit 0.100), mean recovered {tp:.1}/10, mean false positives {fp:.1}")))
}

fn dominance() -> Verdict {
    let dp: Vec<f64> = dp_runs()?.iter().map(|o| o.mc).collect();
    let mut means = vec![mean(&dp)];
    for mode in [PriorMode::Global, PriorMode::Independent] {
        let mut mc = Vec::new();
        for seed in SEEDS {
            mc.push(run_recovery(seed, mode)?.mc);
        }
        means.push(mean(&mc));
    }
    let pass = means[0] <= means[1] && means[0] <= means[2];
    Ok((pass, format!("mean MC dp {:.3}, global {:.3}, independent {:.3}", means[0], means[1], means[2])))
}

// ---------------------------------------------------------------- 8

fn kkt_violation(s: &Matrix, omega: &Matrix, lambda: f64) -> f64 {
    let w = omega.clone().try_inverse().expect("invertible precision");
    let v = s.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..v {
        for k in 0..v {
            let g = w[(j, k)] - s[(j, k)];
            let r = if j == k {
                g.abs()
            } else if omega[(j, k)] != 0.0 {
                (g - lambda * omega[(j, k)].signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            };
            worst = worst.max(r);
        }
    }
    worst
}

fn objective_2x2(s: &Matrix, lambda: f64, a: f64, b: f64, c: f64) -> f64 {
    let det = a * c - b * b;
    if a <= 0.0 || det <= 0.0 {
        return f64::INFINITY;
    }
    -det.ln() + s[(0, 0)] * a + 2.0 * s[(0, 1)] * b + s[(1, 1)] * c + 2.0 * lambda * b.abs()
}

/// Coarse-to-fine grid minimization of the penalized negative log-likelihood.
fn brute_force_2x2(s: &Matrix, lambda: f64) -> (f64, f64, f64) {
    let (mut best, mut center, mut width) = (f64::INFINITY, (1.0, 0.0, 1.0), 4.0);
    for _ in 0..40 {
        let mut next = center;
        for i in -10..=10 {
            for j in -10..=10 {
                for k in -10..=10 {
                    let a = center.0 + width * i as f64 / 10.0;
                    let b = center.1 + width * j as f64 / 10.0;
                    let c = center.2 + width * k as f64 / 10.0;
                    let f = objective_2x2(s, lambda, a, b, c);
                    if f < best {
                        best = f;
                        next = (a, b, c);
                    }
                }
            }
        }
        center = next;
        width *= 0.6;
    }
    center
}

fn glasso() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut rng = RandomStream::new(808, 0);
    for _ in 0..5 {
        let x = Matrix::from_fn(40, 10, |_, _| rng.standard_normal());
        let mix = Matrix::from_fn(10, 10, |i, j| if i == j { 1.0 } else { 0.3 * rng.standard_normal() });
        let s = pearson_correlation(&(x * mix)).map_err(err)?;
        for lambda in default_lambda_grid(&s, 20) {
            let fit = graphical_lasso(&s, lambda, 1e-7, 2_000).map_err(err)?;
            worst = worst.max(kkt_violation(&s, &fit.precision, lambda));
        }
    }
    let mut brute: f64 = 0.0;
    for (r, lambda) in [(0.6, 0.1), (-0.4, 0.05), (0.3, 0.5), (0.8, 0.3)] {
        let s = Matrix::from_row_slice(2, 2, &[1.0, r, r, 1.0]);
        let fit = graphical_lasso(&s, lambda, 1e-7, 2_000).map_err(err)?;
        let (a, b, c) = brute_force_2x2(&s, lambda);
        for (x, y) in [(fit.precision[(0, 0)], a), (fit.precision[(0, 1)], b), (fit.precision[(1, 1)], c)] {
            brute = brute.max((x - y).abs());
        }
    }
    Ok((worst <= 1e-6 && brute <= 1e-3, format!("max KKT residual {worst:.2e}, max 2x2 deviation {brute:.2e}")))
}

// ---------------------------------------------------------------- 9

fn labels(v: &[i8]) -> Vec<Label> {
    v.iter().map(|&x| if x > 0 { Label::Pos } else { Label::Neg }).collect()
}

fn hand_cases() -> Verdict {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let mut failures = Vec::new();

    let t = labels(&[1, 1, -1, -1, 1]);
    let m = metrics(&t, &t).map_err(err)?;
    if !(close(m.mc, 0.0) && close(m.f1, 1.0) && close(m.informedness, 1.0)) {
        failures.push("perfect classifier");
    }

    // TP=3, FP=1, FN=1, TN=5.
    let truth = labels(&[1, 1, 1, 1, -1, -1, -1, -1, -1, -1]);
    let pred = labels(&[1, 1, 1, -1, 1, -1, -1, -1, -1, -1]);
    let m = metrics(&truth, &pred).map_err(err)?;
    let ok = (m.tp, m.fp, m.fn_, m.tn) == (3, 1, 1, 5)
        && close(m.precision, 0.75)
        && close(m.recall, 0.75)
        && close(m.f1, 0.75)
        && close(m.informedness, 0.75 + 5.0 / 6.0 - 1.0)
        && close(m.mc, 0.2);
    if !ok {
        failures.push("confusion 3/1/1/5");
    }

    let truth = labels(&[1, -1, 1, -1]);
    let m = metrics(&truth, &labels(&[1, 1, 1, 1])).map_err(err)?;
    if !close(m.informedness, 0.0) {
        failures.push("all positive");
    }
    let none = metrics_with_positive(&truth, &labels(&[-1, -1, -1, -1]), Label::Pos).map_err(err)?;
    if !(close(none.precision, 0.0) && close(none.recall, 0.0) && close(none.f1, 0.0)) {
        failures.push("empty denominators");
    }

    let ids: Vec<String> = (1..=10).map(|i| format!("s{i:02}")).collect();
    let scores: Vec<f64> = (1..=10).map(|i| i as f64).collect();
    let out = label_from_extremes(&ids, &scores, 0.10).map_err(err)?;
    if out != vec![(0, Label::Neg), (9, Label::Pos)] {
        failures.push("N=10 extremes");
    }

    let ids: Vec<String> = (1..=100).map(|i| format!("s{i:03}")).collect();
    let scores: Vec<f64> = (1..=100).map(|i| i as f64).collect();
    let out = label_from_extremes(&ids, &scores, 0.10).map_err(err)?;
    let mut pos: Vec<usize> = out.iter().filter(|x| x.1 == Label::Pos).map(|x| x.0 + 1).collect();
    let mut neg: Vec<usize> = out.iter().filter(|x| x.1 == Label::Neg).map(|x| x.0 + 1).collect();
    pos.sort();
    neg.sort();
    if pos != (91..=100).collect::<Vec<_>>() || neg != (1..=10).collect::<Vec<_>>() {
        failures.push("scores 1..100");
    }

    let ids: Vec<String> = ["d", "b", "a", "c"].iter().map(|s| s.to_string()).collect();
    let out = label_from_extremes(&ids, &[1.0; 4], 0.25).map_err(err)?;
    let again = label_from_extremes(&ids, &[1.0; 4], 0.25).map_err(err)?;
    // Ascending id order is a, b, c, d: "a" is the bottom, "d" the top.
    if out != again || out != vec![(0, Label::Pos), (2, Label::Neg)] {
        failures.push("all-equal tie-break");
    }

    if failures.is_empty() {
        Ok((true, "7 cases exact".into()))
    } else {
        Ok((false, format!("failed: {}", failures.join(", "))))
    }
}

// ---------------------------------------------------------------- 10

fn same_bits(a: &PosteriorDraws, b: &PosteriorDraws) -> bool {
    let bits = |d: &PosteriorDraws| -> Vec<u64> {
        d.draws
            .iter()
            .flat_map(|x| {
                let mut v: Vec<u64> = x.coefficients().iter().map(|c| c.to_bits()).collect();
                v.push(x.sigma_eps2.to_bits());
                v.push(x.delta as u64);
                v.extend(x.atoms.iter().map(|a| a.0.to_bits()));
                if let Some(dy) = &x.dynamic {
                    v.push(dy.d_star.to_bits());
                    v.extend(dy.sigma_eta.iter().map(|s| s.to_bits()));
                }
                v
            })
            .collect()
    };
    a.len() == b.len() && bits(a) == bits(b)
}

fn determinism() -> Verdict {
    let spec = SynthSpec::two_groups(60, 12, 1.5, 0.7, 99);
    let table = generate(&spec).map_err(err)?.table.restandardized(None).map_err(err)?;
    let mut checked = 0;
    for mode in [PriorMode::Dp, PriorMode::Global, PriorMode::Independent] {
        let h = Hyperparameters { n_iter: 400, burn_in: 100, thin: 3, prior_mode: mode, seed: 17, ..Default::default() };
        let a = svm_static::fit_static(&table, &h).map_err(err)?;
        let b = svm_static::fit_static(&table, &h).map_err(err)?;
        if !same_bits(&a, &b) {
            return Ok((false, format!("static {mode} fit differs between runs")));
        }
        checked += 1;
    }
    let dynamic = generate_dynamic(&spec, &[1.0, -0.5], 12).map_err(err)?;
    let z: Vec<f64> = dynamic.labels.iter().map(|l| l.sign()).collect();
    let h = Hyperparameters { n_iter: 400, burn_in: 100, thin: 3, seed: 17, ..Default::default() };
    let a = svm_dynamic::fit_dynamic(&dynamic.features, &dynamic.covariates, &z, &h).map_err(err)?;
    let b = svm_dynamic::fit_dynamic(&dynamic.features, &dynamic.covariates, &z, &h).map_err(err)?;
    if !same_bits(&a, &b) {
        return Ok((false, "dynamic fit differs between runs".into()));
    }
    checked += 1;
    let again = generate(&spec).map_err(err)?.table.restandardized(None).map_err(err)?;
    if again.values.as_slice().iter().map(|v| v.to_bits()).ne(table.values.as_slice().iter().map(|v| v.to_bits())) {
        return Ok((false, "synthetic data differs between runs".into()));
    }
    Ok((true, format!("{checked} fits and the generator repeat bit for bit")))
}
