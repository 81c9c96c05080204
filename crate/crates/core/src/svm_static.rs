//! The static classifier: hinge pseudo-likelihood with a shrinkage prior on
//! the coefficients, fitted by Gibbs sampling.
//!
//! Augmentation: with latent `ρ_i > 0`, `z_i(1 + ρ_i) ~ N(u_iᵀβ, ρ_i σ_ε²)`
//! reproduces the pseudo-likelihood
//! `σ_ε⁻² exp(-(2/σ_ε²) max(1 - z_i u_iᵀβ, 0))` after integrating ρ_i out.
//!
//! A sweep draws σ_ε², ρ, β, the shrinkage parameters λ (integrating σ²_β),
//! then σ²_β. See [`crate::shrinkage`] for why σ²_β comes last.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::draws::{Draw, ModelKind};
use crate::rngkit::RandomStream;
use crate::shrinkage::{self, ShrinkageState};
use crate::{EdgeFeatureTable, Error, Hyperparameters, Matrix, PosteriorDraws, Result, Vector};

/// Lower clamp on |1 − z uᵀβ| before taking its reciprocal.
pub const MARGIN_FLOOR: f64 = 1e-8;

/// Labels (±1) and design rows.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticData {
    pub u: Matrix,
    pub z: Vec<f64>,
}

impl StaticData {
    pub fn new(u: Matrix, z: Vec<f64>) -> Result<Self> {
        if u.nrows() != z.len() {
            return Err(Error::DimensionMismatch { what: "labels", expected: u.nrows(), found: z.len() });
        }
        if !crate::linalg::all_finite(&u) {
            return Err(Error::NonFinite("design"));
        }
        if let Some(&bad) = z.iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidArgument(alloc::format!("label {bad} is not -1 or 1")));
        }
        Ok(Self { u, z })
    }

    /// Rejects data without both classes.
    pub fn require_both_classes(&self) -> Result<()> {
        let pos = self.z.iter().filter(|&&v| v > 0.0).count();
        if self.z.len() < 2 || pos == 0 || pos == self.z.len() {
            return Err(Error::SingleClass);
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn p(&self) -> usize {
        self.u.ncols()
    }

    /// z_i·u_iᵀβ.
    pub fn margins(&self, beta: &Vector) -> Vec<f64> {
        let f = &self.u * beta;
        f.iter().zip(&self.z).map(|(f, z)| f * z).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub beta: Vector,
    pub sigma_eps2: f64,
    pub rho: Vec<f64>,
    pub sigma_beta2: Vec<f64>,
    pub shrink: ShrinkageState,
}

impl ChainState {
    /// β = 0, σ_ε² = 1, ρ = 1, σ²_β = 1, one shrinkage component.
    pub fn initial(n: usize, p: usize, hyper: &Hyperparameters) -> Self {
        Self {
            beta: Vector::zeros(p),
            sigma_eps2: 1.0,
            rho: vec![1.0; n],
            sigma_beta2: vec![1.0; p],
            shrink: ShrinkageState::initial(p, hyper),
        }
    }

    pub fn check_invariants(&self) -> core::result::Result<(), &'static str> {
        if !(self.sigma_eps2 > 0.0 && self.sigma_eps2.is_finite()) {
            return Err("sigma_eps2 not positive");
        }
        if !self.rho.iter().all(|&r| r > 0.0 && r.is_finite()) {
            return Err("rho not positive");
        }
        if !self.sigma_beta2.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err("sigma_beta2 not positive");
        }
        if !self.beta.iter().all(|b| b.is_finite()) {
            return Err("beta not finite");
        }
        self.shrink.check_invariants()
    }

    pub fn to_draw(&self, chain: usize, iteration: usize) -> Draw {
        Draw {
            chain,
            iteration,
            beta: self.beta.iter().copied().collect(),
            sigma_eps2: self.sigma_eps2,
            delta: self.shrink.cluster_count(),
            atoms: self.shrink.occupied_atoms(),
            dynamic: None,
        }
    }
}

/// `Σ_i [-ln σ_ε² - (2/σ_ε²) max(1 - z_i u_iᵀβ, 0)]`.
pub fn hinge_pseudo_loglik(z: &[f64], u: &Matrix, beta: &Vector, sigma_eps2: f64) -> Result<f64> {
    if u.nrows() != z.len() || u.ncols() != beta.len() {
        return Err(Error::DimensionMismatch { what: "pseudo-likelihood inputs", expected: u.ncols(), found: beta.len() });
    }
    if !(sigma_eps2 > 0.0) || !sigma_eps2.is_finite() {
        return Err(Error::InvalidParameter { name: "sigma_eps2", value: sigma_eps2 });
    }
    if !crate::linalg::all_finite(u) || !beta.iter().all(|b| b.is_finite()) {
        return Err(Error::NonFinite("pseudo-likelihood inputs"));
    }
    let f = u * beta;
    Ok(margin_loglik(f.iter().zip(z).map(|(f, z)| f * z), sigma_eps2))
}

pub(crate) fn margin_loglik(margins: impl Iterator<Item = f64>, sigma_eps2: f64) -> f64 {
    let ln_s = sigma_eps2.ln();
    margins.map(|m| -ln_s - 2.0 / sigma_eps2 * (1.0 - m).max(0.0)).sum()
}

/// Inverse-gamma `(shape, scale)` of σ_ε² given margins `z_i f_i` and ρ.
pub fn sigma_eps_conditional(margins: &[f64], rho: &[f64], hyper: &Hyperparameters) -> Result<(f64, f64)> {
    let mut q = 0.0;
    for (&m, &r) in margins.iter().zip(rho) {
        if !(r > 0.0) {
            return Err(Error::InvalidParameter { name: "rho", value: r });
        }
        let e = r + 1.0 - m;
        q += e * e / (2.0 * r);
    }
    Ok((hyper.a1 + 1.5 * margins.len() as f64, hyper.b1 + q))
}

/// Inverse-Gaussian `(mean, shape)` of 1/ρ_i given its margin.
pub fn rho_inverse_conditional(margin: f64, sigma_eps2: f64) -> (f64, f64) {
    (1.0 / (1.0 - margin).abs().max(MARGIN_FLOOR), 1.0 / sigma_eps2)
}

pub(crate) fn draw_sigma_eps(margins: &[f64], rho: &[f64], hyper: &Hyperparameters, rng: &mut RandomStream) -> Result<f64> {
    let (shape, scale) = sigma_eps_conditional(margins, rho, hyper)?;
    rng.inverse_gamma(shape, scale)
}

pub(crate) fn draw_rho(margins: &[f64], sigma_eps2: f64, rho: &mut [f64], rng: &mut RandomStream) -> Result<()> {
    for (r, &m) in rho.iter_mut().zip(margins) {
        let (mean, shape) = rho_inverse_conditional(m, sigma_eps2);
        *r = 1.0 / rng.inverse_gaussian(mean, shape)?;
    }
    Ok(())
}

/// Precision `A = Σ_i w_i x_i x_iᵀ + prior` and linear term
/// `h = Σ_i w_i y_i x_i` with `w_i = 1/(ρ_i σ_ε²)`, for the Gaussian
/// regression `y_i ~ N(x_iᵀθ, ρ_i σ_ε²)` implied by the augmentation.
pub(crate) fn gaussian_block(
    x: &Matrix,
    y: &[f64],
    rho: &[f64],
    sigma_eps2: f64,
    prior_precision: Matrix,
) -> (Matrix, Vector) {
    let n = x.nrows();
    let mut xs = x.clone();
    let mut h = Vector::zeros(x.ncols());
    for i in 0..n {
        let w = 1.0 / (rho[i] * sigma_eps2);
        let sw = w.sqrt();
        let mut row = xs.row_mut(i);
        h.axpy(w * y[i], &row.transpose(), 1.0);
        row *= sw;
    }
    let mut a = xs.tr_mul(&xs);
    a += prior_precision;
    crate::linalg::symmetrize(&mut a);
    (a, h)
}

/// Precision and linear term of the β conditional.
pub fn beta_conditional(state: &ChainState, data: &StaticData) -> (Matrix, Vector) {
    let y: Vec<f64> = data.z.iter().zip(&state.rho).map(|(z, r)| z * (1.0 + r)).collect();
    let prior = Matrix::from_diagonal(&Vector::from_iterator(
        state.sigma_beta2.len(),
        state.sigma_beta2.iter().map(|s| 1.0 / s),
    ));
    gaussian_block(&data.u, &y, &state.rho, state.sigma_eps2, prior)
}

pub fn step_sigma_eps(state: &mut ChainState, data: &StaticData, hyper: &Hyperparameters, rng: &mut RandomStream) -> Result<()> {
    let m = data.margins(&state.beta);
    state.sigma_eps2 = draw_sigma_eps(&m, &state.rho, hyper, rng)?;
    Ok(())
}

pub fn step_rho(state: &mut ChainState, data: &StaticData, rng: &mut RandomStream) -> Result<()> {
    let m = data.margins(&state.beta);
    draw_rho(&m, state.sigma_eps2, &mut state.rho, rng)
}

pub fn step_beta(state: &mut ChainState, data: &StaticData, rng: &mut RandomStream) -> Result<()> {
    if data.n() == 0 {
        for (b, &s) in state.beta.iter_mut().zip(&state.sigma_beta2) {
            *b = s.sqrt() * rng.standard_normal();
        }
        return Ok(());
    }
    let (a, h) = beta_conditional(state, data);
    state.beta = rng.mvn_precision(&h, &a)?;
    Ok(())
}

pub fn step_shrinkage(state: &mut ChainState, hyper: &Hyperparameters, rng: &mut RandomStream) -> Result<()> {
    let beta = state.beta.as_slice();
    shrinkage::step_lambda(&mut state.shrink, beta, hyper, rng)?;
    shrinkage::step_sigma_beta(&mut state.sigma_beta2, &state.shrink.lambda, beta, rng)
}

/// One full Gibbs sweep.
pub fn sweep(state: &mut ChainState, data: &StaticData, hyper: &Hyperparameters, rng: &mut RandomStream) -> Result<()> {
    step_sigma_eps(state, data, hyper, rng)?;
    step_rho(state, data, rng)?;
    step_beta(state, data, rng)?;
    step_shrinkage(state, hyper, rng)?;
    debug_assert_eq!(state.check_invariants(), Ok(()));
    Ok(())
}

/// Runs one chain from the default initial state and returns its retained draws.
pub fn run_chain(data: &StaticData, hyper: &Hyperparameters, chain: usize) -> Result<Vec<Draw>> {
    let mut rng = RandomStream::new(hyper.seed, chain as u64);
    let mut state = ChainState::initial(data.n(), data.p(), hyper);
    let mut out = Vec::with_capacity(hyper.draws_per_chain());
    for iter in 1..=hyper.n_iter {
        sweep(&mut state, data, hyper, &mut rng)?;
        if hyper.keeps(iter) {
            out.push(state.to_draw(chain, iter));
        }
    }
    Ok(out)
}

/// Checks the data and hyperparameters a fit needs.
pub fn prepare_static(table: &EdgeFeatureTable, hyper: &Hyperparameters) -> Result<StaticData> {
    hyper.validate()?;
    let data = StaticData::new(table.design()?, table.label_signs()?)?;
    data.require_both_classes()?;
    Ok(data)
}

/// Runs `n_chains` chains sequentially and merges them.
pub fn fit_static(table: &EdgeFeatureTable, hyper: &Hyperparameters) -> Result<PosteriorDraws> {
    let data = prepare_static(table, hyper)?;
    fit_static_data(&data, hyper)
}

pub fn fit_static_data(data: &StaticData, hyper: &Hyperparameters) -> Result<PosteriorDraws> {
    hyper.validate()?;
    data.require_both_classes()?;
    let chains = (0..hyper.n_chains)
        .map(|c| run_chain(data, hyper, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorDraws::merge(ModelKind::Static, data.p(), 0, 0, chains))
}

/// Posterior-mean scores, labels and positive-vote fractions.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub scores: Vec<f64>,
    pub labels: Vec<crate::Label>,
    /// Fraction of draws with `u_iᵀβ > 0`.
    pub vote_fraction: Vec<f64>,
}

/// Scores `u_new` against every draw's identified coefficients. For dynamic
/// fits pass the product design from [`crate::svm_dynamic::product_design`].
pub fn predict(draws: &PosteriorDraws, u_new: &Matrix) -> Result<Prediction> {
    let b = draws.coefficient_matrix()?;
    if u_new.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch { what: "prediction design columns", expected: b.ncols(), found: u_new.ncols() });
    }
    // n_new × draws
    let f = u_new * b.transpose();
    let k = f.ncols() as f64;
    let mut scores = Vec::with_capacity(f.nrows());
    let mut votes = Vec::with_capacity(f.nrows());
    for i in 0..f.nrows() {
        let row = f.row(i);
        scores.push(row.sum() / k);
        votes.push(row.iter().filter(|&&v| v > 0.0).count() as f64 / k);
    }
    let labels = scores.iter().map(|&s| crate::Label::from_score(s)).collect();
    Ok(Prediction { scores, labels, vote_fraction: votes })
}
