//! Joint-distribution checks of the samplers.
//!
//! The hinge pseudo-likelihood is not a normalized density in z, so the
//! samplers' target `p(θ)·Π L(z_i|θ)` is the posterior of the proper model
//! `p̃(θ) ∝ p(θ)·Π Z_i(θ)`, `P(z_i|θ) = L(z_i|θ)/Z_i(θ)`, with
//! `Z_i = σ_ε⁻²·g_i`, `g_i = e^{-2(1-f_i)₊/σ_ε²} + e^{-2(1+f_i)₊/σ_ε²} < 2`.
//! Forward draws from p̃ take σ_ε² ~ IG(a₁ + N, b₁), everything else from the
//! prior, and accept with probability `Π g_i / 2^N`. The successive-
//! conditional chain alternates `z ~ P(z|θ)`, `ρ ~ p(ρ|θ, z)` and one full
//! sweep. Both must give the same marginal law of θ.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::diag::batch_means_se;
use crate::rngkit::RandomStream;
use crate::shrinkage::{sample_coefficients, sample_prior};
use crate::svm_dynamic::{self, DynamicChainState, DynamicControls, DynamicData};
use crate::svm_static::{self, ChainState, StaticData};
use crate::{Error, Hyperparameters, Matrix, PriorMode, Result, Vector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GewekeStat {
    pub name: String,
    pub forward_mean: f64,
    pub chain_mean: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GewekeReport {
    pub model: String,
    pub samples: usize,
    /// Acceptance rate of the forward rejection sampler.
    pub acceptance: f64,
    pub stats: Vec<GewekeStat>,
}

impl GewekeReport {
    pub fn max_abs_z(&self) -> f64 {
        self.stats.iter().map(|s| s.z.abs()).fold(0.0, f64::max)
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.stats.iter().all(|s| s.z.is_finite() && s.z.abs() < threshold)
    }
}

/// Forward rejection sampling gives up after this many proposals per draw.
const MAX_PROPOSALS: usize = 1_000_000;

fn hinge_mass(f: f64, sigma_eps2: f64) -> (f64, f64) {
    let pos = (-2.0 / sigma_eps2 * (1.0 - f).max(0.0)).exp();
    let neg = (-2.0 / sigma_eps2 * (1.0 + f).max(0.0)).exp();
    (pos, neg)
}

fn accept_tilt(f: &Vector, sigma_eps2: f64, rng: &mut RandomStream) -> bool {
    let mut prob = 1.0;
    for &fi in f.iter() {
        let (p, n) = hinge_mass(fi, sigma_eps2);
        prob *= 0.5 * (p + n);
    }
    rng.uniform() < prob
}

fn draw_labels(f: &Vector, sigma_eps2: f64, rng: &mut RandomStream) -> Vec<f64> {
    f.iter()
        .map(|&fi| {
            let (p, n) = hinge_mass(fi, sigma_eps2);
            if rng.uniform() * (p + n) < p {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

fn compare(names: &[String], forward: &[Vec<f64>], chain: &[Vec<f64>]) -> Vec<GewekeStat> {
    let k = names.len();
    (0..k)
        .map(|j| {
            let a: Vec<f64> = forward.iter().map(|s| s[j]).collect();
            let b: Vec<f64> = chain.iter().map(|s| s[j]).collect();
            let ma = a.iter().sum::<f64>() / a.len() as f64;
            let mb = b.iter().sum::<f64>() / b.len() as f64;
            let va = a.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>() / (a.len() as f64 - 1.0);
            let se = (va / a.len() as f64 + batch_means_se(&b).powi(2)).sqrt();
            GewekeStat { name: names[j].clone(), forward_mean: ma, chain_mean: mb, z: (ma - mb) / se }
        })
        .collect()
}

/// Small static problem: fixed standard-normal design.
pub fn static_problem(n: usize, p: usize, seed: u64) -> Matrix {
    let mut rng = RandomStream::new(seed, 1000);
    Matrix::from_fn(n, p, |_, _| rng.standard_normal())
}

/// Hyperparameters with finite low-order moments for every tested statistic.
pub fn static_hyper(seed: u64) -> Hyperparameters {
    Hyperparameters { a1: 3.0, b1: 30.0, r: 5.0, delta: 5.0, m: 1.0, seed, ..Default::default() }
}

fn static_stat_names(p: usize) -> Vec<String> {
    let mut names = Vec::new();
    for j in 0..p {
        names.push(alloc::format!("beta[{j}]"));
    }
    for j in 0..p {
        names.push(alloc::format!("beta[{j}]^2"));
    }
    for j in 0..p {
        for k in (j + 1)..p {
            names.push(alloc::format!("beta[{j}]*beta[{k}]"));
        }
    }
    names.push("|beta|_1".into());
    names.push("sigma_eps2".into());
    names.push("ln sigma_eps2".into());
    names.push("delta".into());
    names.push("mean lambda".into());
    names.push("ln sigma_beta2[0]".into());
    names
}

fn static_stats(s: &ChainState) -> Vec<f64> {
    let b = &s.beta;
    let p = b.len();
    let mut out = Vec::new();
    out.extend(b.iter().copied());
    out.extend(b.iter().map(|x| x * x));
    for j in 0..p {
        for k in (j + 1)..p {
            out.push(b[j] * b[k]);
        }
    }
    out.push(b.iter().map(|x| x.abs()).sum());
    out.push(s.sigma_eps2);
    out.push(s.sigma_eps2.ln());
    out.push(s.shrink.cluster_count() as f64);
    out.push(s.shrink.lambda.iter().sum::<f64>() / p as f64);
    out.push(s.sigma_beta2[0].ln());
    out
}

/// One draw of θ from the tilted prior (forward simulation).
pub fn forward_static(u: &Matrix, hyper: &Hyperparameters, rng: &mut RandomStream) -> Result<(ChainState, usize)> {
    let (n, p) = u.shape();
    for tries in 1..=MAX_PROPOSALS {
        let sigma_eps2 = rng.inverse_gamma(hyper.a1 + n as f64, hyper.b1)?;
        let shrink = sample_prior(p, hyper, rng)?;
        let (sigma_beta2, beta) = sample_coefficients(&shrink.lambda, rng)?;
        let beta = Vector::from_vec(beta);
        if accept_tilt(&(u * &beta), sigma_eps2, rng) {
            let state = ChainState { beta, sigma_eps2, rho: vec![1.0; n], sigma_beta2, shrink };
            return Ok((state, tries));
        }
    }
    Err(Error::Degenerate("forward sampler acceptance too low"))
}

/// Static-model test with `samples` forward draws and `samples` sweeps.
pub fn geweke_static(u: &Matrix, hyper: &Hyperparameters, samples: usize) -> Result<GewekeReport> {
    let p = u.ncols();
    let mut rng = RandomStream::new(hyper.seed, 0);
    let mut forward = Vec::with_capacity(samples);
    let mut proposals = 0;
    for _ in 0..samples {
        let (s, tries) = forward_static(u, hyper, &mut rng)?;
        proposals += tries;
        forward.push(static_stats(&s));
    }

    let mut rng = RandomStream::new(hyper.seed, 1);
    let (mut state, _) = forward_static(u, hyper, &mut rng)?;
    let mut data = StaticData::new(u.clone(), vec![1.0; u.nrows()])?;
    let mut chain = Vec::with_capacity(samples);
    for _ in 0..samples {
        data.z = draw_labels(&(u * &state.beta), state.sigma_eps2, &mut rng);
        svm_static::step_rho(&mut state, &data, &mut rng)?;
        svm_static::sweep(&mut state, &data, hyper, &mut rng)?;
        chain.push(static_stats(&state));
    }
    Ok(GewekeReport {
        model: alloc::format!("static/{}", hyper.prior_mode),
        samples,
        acceptance: samples as f64 / proposals as f64,
        stats: compare(&static_stat_names(p), &forward, &chain),
    })
}

/// Small dynamic problem: `R` standard-normal `N × Q` tables and `C`
/// covariates.
pub fn dynamic_problem(n: usize, q: usize, r: usize, c: usize, seed: u64) -> DynamicData {
    let mut rng = RandomStream::new(seed, 1000);
    let tables = (0..r).map(|_| Matrix::from_fn(n, q, |_, _| rng.standard_normal())).collect();
    let cov = Matrix::from_fn(n, c, |_, _| rng.standard_normal());
    DynamicData { tables, covariates: cov, z: vec![1.0; n] }
}

pub fn dynamic_hyper(r: usize, seed: u64) -> Hyperparameters {
    Hyperparameters {
        a1: 3.0,
        b1: 30.0,
        r: 5.0,
        delta: 5.0,
        iw_df: Some(r as f64 + 6.0),
        c: 5.0,
        d: 20.0,
        gamma_prior_var: 1.0,
        seed,
        ..Default::default()
    }
}

fn dynamic_stat_names(q: usize, r: usize, c: usize) -> Vec<String> {
    let mut names = Vec::new();
    for a in 0..q {
        for b in 0..r {
            names.push(alloc::format!("beta[{a}]*eta[{b}]"));
        }
    }
    for a in 0..q {
        for b in 0..r {
            names.push(alloc::format!("(beta[{a}]*eta[{b}])^2"));
        }
    }
    for j in 0..c {
        names.push(alloc::format!("gamma[{j}]"));
        names.push(alloc::format!("gamma[{j}]^2"));
    }
    for b in 0..r {
        names.push(alloc::format!("eta[{b}]^2"));
    }
    names.push("sigma_eps2".into());
    names.push("ln sigma_eps2".into());
    names.push("delta".into());
    names.push("ln d_star".into());
    names.push("ln tr sigma_eta".into());
    names
}

fn dynamic_stats(s: &DynamicChainState) -> Vec<f64> {
    let mut out = Vec::new();
    for &b in s.beta.iter() {
        for &e in s.eta.iter() {
            out.push(b * e);
        }
    }
    for &b in s.beta.iter() {
        for &e in s.eta.iter() {
            out.push((b * e).powi(2));
        }
    }
    for &g in s.gamma.iter() {
        out.push(g);
        out.push(g * g);
    }
    out.extend(s.eta.iter().map(|e| e * e));
    out.push(s.sigma_eps2);
    out.push(s.sigma_eps2.ln());
    out.push(s.shrink.cluster_count() as f64);
    out.push(s.d_star.ln());
    out.push(s.sigma_eta.trace().ln());
    out
}

pub fn forward_dynamic(data: &DynamicData, hyper: &Hyperparameters, rng: &mut RandomStream) -> Result<(DynamicChainState, usize)> {
    let (n, q, r, c) = (data.n(), data.q(), data.r(), data.c());
    for tries in 1..=MAX_PROPOSALS {
        let sigma_eps2 = rng.inverse_gamma(hyper.a1 + n as f64, hyper.b1)?;
        let shrink = sample_prior(q, hyper, rng)?;
        let (sigma_beta2, beta) = sample_coefficients(&shrink.lambda, rng)?;
        let beta = Vector::from_vec(beta);
        let d_star = rng.inverse_gamma(hyper.c, hyper.d)?;
        let sigma_eta = rng.inverse_wishart(hyper.iw_df_for(r), &Matrix::from_diagonal_element(r, r, d_star))?;
        let eta = rng.mvn_precision(&Vector::zeros(r), &crate::linalg::spd_inverse(&sigma_eta)?)?;
        let sd = hyper.gamma_prior_var.sqrt();
        let gamma = Vector::from_fn(c, |_, _| sd * rng.standard_normal());
        let f = data.linear_predictor(&beta, &eta, &gamma);
        if accept_tilt(&f, sigma_eps2, rng) {
            let state = DynamicChainState { beta, gamma, eta, sigma_eta, d_star, sigma_eps2, rho: vec![1.0; n], sigma_beta2, shrink };
            return Ok((state, tries));
        }
    }
    Err(Error::Degenerate("forward sampler acceptance too low"))
}

pub fn geweke_dynamic(data: &DynamicData, hyper: &Hyperparameters, samples: usize) -> Result<GewekeReport> {
    let mut rng = RandomStream::new(hyper.seed, 0);
    let mut forward = Vec::with_capacity(samples);
    let mut proposals = 0;
    for _ in 0..samples {
        let (s, tries) = forward_dynamic(data, hyper, &mut rng)?;
        proposals += tries;
        forward.push(dynamic_stats(&s));
    }

    let mut rng = RandomStream::new(hyper.seed, 1);
    let (mut state, _) = forward_dynamic(data, hyper, &mut rng)?;
    let mut data = data.clone();
    let mut chain = Vec::with_capacity(samples);
    for _ in 0..samples {
        let f = data.linear_predictor(&state.beta, &state.eta, &state.gamma);
        data.z = draw_labels(&f, state.sigma_eps2, &mut rng);
        svm_dynamic::step_rho(&mut state, &data, &mut rng)?;
        svm_dynamic::sweep(&mut state, &data, hyper, DynamicControls::default(), &mut rng)?;
        chain.push(dynamic_stats(&state));
    }
    Ok(GewekeReport {
        model: alloc::format!("dynamic/{}", hyper.prior_mode),
        samples,
        acceptance: samples as f64 / proposals as f64,
        stats: compare(&dynamic_stat_names(data.q(), data.r(), data.c()), &forward, &chain),
    })
}

/// Mean Δ of a prior-only chain (no subjects) against its expectation
/// `Σ_{m=1}^{P} M/(M + m - 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterCountCheck {
    pub m: f64,
    pub p: usize,
    pub sweeps: usize,
    pub mean_delta: f64,
    pub expected: f64,
    pub relative_error: f64,
}

pub fn prior_cluster_count(m: f64, p: usize, sweeps: usize, burn_in: usize, seed: u64) -> Result<ClusterCountCheck> {
    let hyper = Hyperparameters { m, prior_mode: PriorMode::Dp, seed, ..Default::default() };
    let data = StaticData::new(Matrix::zeros(0, p), Vec::new())?;
    let mut rng = RandomStream::new(seed, 0);
    let mut state = ChainState::initial(0, p, &hyper);
    let mut total = 0.0;
    for it in 0..burn_in + sweeps {
        svm_static::sweep(&mut state, &data, &hyper, &mut rng)?;
        if it >= burn_in {
            total += state.shrink.cluster_count() as f64;
        }
    }
    let mean_delta = total / sweeps as f64;
    let expected = crate::special::expected_cluster_count(m, p);
    Ok(ClusterCountCheck { m, p, sweeps, mean_delta, expected, relative_error: (mean_delta - expected).abs() / expected })
}
