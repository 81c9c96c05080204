//! Updates for the coefficient prior.
//!
//! Each coefficient has the normal scale-mixture representation
//! `β_p | σ²_p ~ N(0, σ²_p)`, `σ²_p ~ Exp(rate λ_p²/2)`, which integrates to a
//! Laplace density `λ_p/2 · exp(-λ_p|β_p|)`. The shrinkage parameters λ_p are
//! tied together according to [`PriorMode`]:
//!
//! * `Dp`: λ_p = λ*_{H_p} with labels `H` from a Dirichlet process with
//!   precision `M` and base `Gamma(r, δ)`, updated by the slice sampler on
//!   the stick-breaking representation.
//! * `Global`: one λ for every coefficient.
//! * `Independent`: λ_p ~ Gamma(a_λ, b_λ) independently.
//!
//! All λ updates condition on β with σ² integrated out (Laplace likelihood).
//! The σ² refresh must therefore follow the λ update directly, before β is
//! redrawn; [`ShrinkageState`] itself does not hold σ².

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::rngkit::RandomStream;
use crate::{Error, Hyperparameters, PriorMode, Result};

/// Lower clamp on |β_p| in the σ² conditional.
pub const BETA_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct ShrinkageState {
    /// Component label of every coefficient.
    pub labels: Vec<usize>,
    /// Shrinkage atom λ*_h of every represented component.
    pub atoms: Vec<f64>,
    /// Stick fractions ν_h (DP mode only; empty otherwise).
    pub sticks: Vec<f64>,
    /// Slice variables u_p from the last DP update.
    pub slice_u: Vec<f64>,
    /// λ_p = atoms[labels[p]].
    pub lambda: Vec<f64>,
}

impl ShrinkageState {
    /// All coefficients in one component at the base-measure mean (DP and
    /// global) or at the prior mean a_λ/b_λ (independent).
    pub fn initial(p: usize, hyper: &Hyperparameters) -> Self {
        match hyper.prior_mode {
            PriorMode::Dp | PriorMode::Global => {
                let atom = hyper.r / hyper.delta;
                Self {
                    labels: vec![0; p],
                    atoms: vec![atom],
                    sticks: if hyper.prior_mode == PriorMode::Dp {
                        vec![1.0 / (1.0 + hyper.m)]
                    } else {
                        Vec::new()
                    },
                    slice_u: Vec::new(),
                    lambda: vec![atom; p],
                }
            }
            PriorMode::Independent => {
                let atom = hyper.a_lambda / hyper.b_lambda;
                Self {
                    labels: (0..p).collect(),
                    atoms: vec![atom; p],
                    sticks: Vec::new(),
                    slice_u: Vec::new(),
                    lambda: vec![atom; p],
                }
            }
        }
    }

    /// Δ: the number of distinct components in use.
    pub fn cluster_count(&self) -> usize {
        let mut seen = vec![false; self.atoms.len()];
        let mut count = 0;
        for &h in &self.labels {
            if !seen[h] {
                seen[h] = true;
                count += 1;
            }
        }
        count
    }

    /// `(λ*_h, n_h)` for every occupied component, in label order.
    pub fn occupied_atoms(&self) -> Vec<(f64, usize)> {
        let mut counts = vec![0usize; self.atoms.len()];
        for &h in &self.labels {
            counts[h] += 1;
        }
        counts
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(h, &n)| (self.atoms[h], n))
            .collect()
    }

    pub fn check_invariants(&self) -> core::result::Result<(), &'static str> {
        if self.labels.len() != self.lambda.len() {
            return Err("label and lambda lengths differ");
        }
        for (&h, &l) in self.labels.iter().zip(&self.lambda) {
            if h >= self.atoms.len() {
                return Err("label outside represented components");
            }
            if self.atoms[h] != l {
                return Err("lambda differs from its component atom");
            }
        }
        if !self.atoms.iter().all(|&a| a > 0.0 && a.is_finite()) {
            return Err("non-positive shrinkage atom");
        }
        if !self.sticks.iter().all(|&v| v > 0.0 && v <= 1.0) {
            return Err("stick fraction outside (0, 1]");
        }
        Ok(())
    }

    fn refresh_lambda(&mut self) {
        for (l, &h) in self.lambda.iter_mut().zip(&self.labels) {
            *l = self.atoms[h];
        }
    }
}

/// Gamma `(shape, rate)` of a shrinkage atom shared by `n` coefficients whose
/// absolute values sum to `abs_sum`.
pub fn atom_conditional(n: usize, abs_sum: f64, hyper: &Hyperparameters) -> (f64, f64) {
    (n as f64 + hyper.r, hyper.delta + abs_sum)
}

/// Dispatches to the update matching `hyper.prior_mode`.
pub fn step_lambda(
    state: &mut ShrinkageState,
    beta: &[f64],
    hyper: &Hyperparameters,
    rng: &mut RandomStream,
) -> Result<()> {
    match hyper.prior_mode {
        PriorMode::Dp => step_dp(state, beta, hyper, rng),
        PriorMode::Global => step_lambda_global(state, beta, hyper, rng),
        PriorMode::Independent => step_lambda_independent(state, beta, hyper, rng),
    }
}

/// One slice-sampler update of the DP mixture: atoms and sticks given the
/// labels, slice variables given the sticks, stick extension until the
/// represented mass exceeds `1 - min u`, then labels among the components
/// whose weight exceeds each coefficient's slice level.
pub fn step_dp(
    state: &mut ShrinkageState,
    beta: &[f64],
    hyper: &Hyperparameters,
    rng: &mut RandomStream,
) -> Result<()> {
    if hyper.prior_mode != PriorMode::Dp {
        return Err(Error::WrongPriorMode { expected: "dp" });
    }
    let p = beta.len();
    if p != state.labels.len() {
        return Err(Error::DimensionMismatch {
            what: "coefficients vs shrinkage labels",
            expected: state.labels.len(),
            found: p,
        });
    }
    if p == 0 {
        return Ok(());
    }
    let k = state.labels.iter().max().map_or(0, |&h| h + 1);
    let mut counts = vec![0usize; k];
    let mut abs_sums = vec![0.0; k];
    for (&h, &b) in state.labels.iter().zip(beta) {
        counts[h] += 1;
        abs_sums[h] += b.abs();
    }

    state.atoms.truncate(k);
    for h in 0..k {
        let (shape, rate) = if counts[h] > 0 {
            atom_conditional(counts[h], abs_sums[h], hyper)
        } else {
            (hyper.r, hyper.delta)
        };
        state.atoms[h] = rng.gamma(shape, rate)?;
    }

    state.sticks.clear();
    let mut tail: usize = counts.iter().sum();
    for h in 0..k {
        tail -= counts[h];
        state.sticks.push(rng.beta(1.0 + counts[h] as f64, hyper.m + tail as f64)?);
    }

    let mut weights = Vec::with_capacity(k);
    let mut remaining = 1.0;
    for &v in &state.sticks {
        weights.push(v * remaining);
        remaining *= 1.0 - v;
    }

    state.slice_u.clear();
    let mut u_min = f64::INFINITY;
    for &h in &state.labels {
        let u = rng.uniform() * weights[h];
        u_min = u_min.min(u);
        state.slice_u.push(u);
    }

    while remaining >= u_min {
        if state.atoms.len() >= hyper.stick_cap {
            return Err(Error::StickCapExceeded { cap: hyper.stick_cap });
        }
        let v = rng.beta(1.0, hyper.m)?;
        state.sticks.push(v);
        state.atoms.push(rng.gamma(hyper.r, hyper.delta)?);
        weights.push(v * remaining);
        remaining *= 1.0 - v;
    }

    let log_atoms: Vec<f64> = state.atoms.iter().map(|a| a.ln()).collect();
    let mut log_w = Vec::with_capacity(weights.len());
    let mut candidates = Vec::with_capacity(weights.len());
    for j in 0..p {
        let u = state.slice_u[j];
        let b = beta[j].abs();
        log_w.clear();
        candidates.clear();
        for (h, &w) in weights.iter().enumerate() {
            if w > u {
                candidates.push(h);
                log_w.push(log_atoms[h] - state.atoms[h] * b);
            }
        }
        // The current component always qualifies because u < π_{H_j}.
        debug_assert!(!candidates.is_empty());
        state.labels[j] = candidates[rng.categorical_log(&log_w)];
    }

    let k = state.labels.iter().max().map_or(0, |&h| h + 1);
    state.atoms.truncate(k);
    state.sticks.truncate(k);
    state.refresh_lambda();
    Ok(())
}

/// Shared λ ~ Gamma(P + r, δ + Σ|β_p|).
pub fn step_lambda_global(
    state: &mut ShrinkageState,
    beta: &[f64],
    hyper: &Hyperparameters,
    rng: &mut RandomStream,
) -> Result<()> {
    if hyper.prior_mode != PriorMode::Global {
        return Err(Error::WrongPriorMode { expected: "global" });
    }
    let abs_sum: f64 = beta.iter().map(|b| b.abs()).sum();
    let (shape, rate) = atom_conditional(beta.len(), abs_sum, hyper);
    let lambda = rng.gamma(shape, rate)?;
    state.labels.iter_mut().for_each(|h| *h = 0);
    state.atoms.clear();
    state.atoms.push(lambda);
    state.refresh_lambda();
    Ok(())
}

/// λ_p ~ Gamma(a_λ + 1, b_λ + |β_p|) for every p.
pub fn step_lambda_independent(
    state: &mut ShrinkageState,
    beta: &[f64],
    hyper: &Hyperparameters,
    rng: &mut RandomStream,
) -> Result<()> {
    if hyper.prior_mode != PriorMode::Independent {
        return Err(Error::WrongPriorMode { expected: "independent" });
    }
    state.atoms.clear();
    for (p, b) in beta.iter().enumerate() {
        state.atoms.push(rng.gamma(hyper.a_lambda + 1.0, hyper.b_lambda + b.abs())?);
        state.labels[p] = p;
    }
    state.refresh_lambda();
    Ok(())
}

/// Inverse-Gaussian `(mean, shape)` of 1/σ²_p given λ_p and β_p.
pub fn sigma_beta_conditional(lambda: f64, beta: f64) -> (f64, f64) {
    (lambda / beta.abs().max(BETA_FLOOR), lambda * lambda)
}

/// Redraws every σ²_p from its conditional given λ_p and β_p.
pub fn step_sigma_beta(
    sigma_beta2: &mut [f64],
    lambda: &[f64],
    beta: &[f64],
    rng: &mut RandomStream,
) -> Result<()> {
    for ((s, &l), &b) in sigma_beta2.iter_mut().zip(lambda).zip(beta) {
        let (mean, shape) = sigma_beta_conditional(l, b);
        *s = 1.0 / rng.inverse_gaussian(mean, shape)?;
    }
    Ok(())
}

/// One joint prior draw of the shrinkage configuration for `p` coefficients:
/// labels by stick-breaking with lazily generated sticks (DP), a single
/// atom (global) or independent gammas.
pub fn sample_prior(p: usize, hyper: &Hyperparameters, rng: &mut RandomStream) -> Result<ShrinkageState> {
    let mut state = ShrinkageState::initial(p, hyper);
    match hyper.prior_mode {
        PriorMode::Dp => {
            state.atoms.clear();
            state.sticks.clear();
            let mut weights: Vec<f64> = Vec::new();
            let mut remaining = 1.0;
            for j in 0..p {
                let u = rng.uniform();
                let mut acc = 0.0;
                let mut h = 0;
                loop {
                    if h == weights.len() {
                        if weights.len() >= hyper.stick_cap {
                            return Err(Error::StickCapExceeded { cap: hyper.stick_cap });
                        }
                        let v = rng.beta(1.0, hyper.m)?;
                        state.sticks.push(v);
                        state.atoms.push(rng.gamma(hyper.r, hyper.delta)?);
                        weights.push(v * remaining);
                        remaining *= 1.0 - v;
                    }
                    acc += weights[h];
                    if u < acc || remaining == 0.0 && h + 1 == weights.len() {
                        break;
                    }
                    h += 1;
                }
                state.labels[j] = h;
            }
            let k = state.labels.iter().max().map_or(0, |&h| h + 1);
            state.atoms.truncate(k);
            state.sticks.truncate(k);
        }
        PriorMode::Global => {
            state.atoms[0] = rng.gamma(hyper.r, hyper.delta)?;
        }
        PriorMode::Independent => {
            for a in state.atoms.iter_mut() {
                *a = rng.gamma(hyper.a_lambda, hyper.b_lambda)?;
            }
        }
    }
    state.refresh_lambda();
    Ok(state)
}

/// Prior draw of `(σ², β)` given shrinkage parameters, through the
/// exponential scale mixture.
pub fn sample_coefficients(lambda: &[f64], rng: &mut RandomStream) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut sigma2 = Vec::with_capacity(lambda.len());
    let mut beta = Vec::with_capacity(lambda.len());
    for &l in lambda {
        let s = rng.exponential(0.5 * l * l)?;
        sigma2.push(s);
        beta.push(rng.normal(0.0, s.sqrt()));
    }
    Ok((sigma2, beta))
}
