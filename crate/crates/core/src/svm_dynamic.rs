//! The dynamic classifier: edge coefficients factor as `β_q·η_r` across the
//! `R` features extracted from each edge's window series.
//!
//! The linear predictor is `f_i = Σ_r η_r (u_iʳ)ᵀβ + c_iᵀγ`. Given η the model
//! is the static one on the collapsed design `Σ_r η_r Uʳ`; given β it is a
//! Gaussian regression for η on `v_i = ((u_i¹)ᵀβ, …, (u_iᴿ)ᵀβ)`. Hierarchy:
//! `η ~ N(0, Σ_η)`, `Σ_η ~ IW(b, d*·I)`, `d* ~ IG(c, d)`, `γ ~ N(0, s²I)`.
//! The shrinkage prior covers β only.
//!
//! Neither β nor η is identified on its own (`(β, η) → (kβ, η/k)` leaves the
//! likelihood unchanged), so draws report the products.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::draws::{Draw, DynamicDraw, ModelKind};
use crate::rngkit::RandomStream;
use crate::shrinkage::{self, ShrinkageState};
use crate::svm_static::{draw_rho, draw_sigma_eps, gaussian_block, margin_loglik};
use crate::{Error, Hyperparameters, Matrix, PosteriorDraws, Result, Vector};

/// Doublings allowed when bracketing the d* slice.
pub const MAX_DOUBLINGS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicData {
    /// `R` tables, each `N × Q`.
    pub tables: Vec<Matrix>,
    /// `N × C`.
    pub covariates: Matrix,
    pub z: Vec<f64>,
}

impl DynamicData {
    pub fn new(tables: Vec<Matrix>, covariates: Matrix, z: Vec<f64>) -> Result<Self> {
        if tables.is_empty() {
            return Err(Error::InvalidArgument("at least one feature table is required".into()));
        }
        let n = z.len();
        let q = tables[0].ncols();
        for t in &tables {
            if t.nrows() != n || t.ncols() != q {
                return Err(Error::DimensionMismatch { what: "feature table shape", expected: n * q, found: t.nrows() * t.ncols() });
            }
            if !crate::linalg::all_finite(t) {
                return Err(Error::NonFinite("feature table"));
            }
        }
        if covariates.nrows() != n {
            return Err(Error::DimensionMismatch { what: "covariate rows", expected: n, found: covariates.nrows() });
        }
        if !crate::linalg::all_finite(&covariates) {
            return Err(Error::NonFinite("covariates"));
        }
        if let Some(&bad) = z.iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidArgument(alloc::format!("label {bad} is not -1 or 1")));
        }
        Ok(Self { tables, covariates, z })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn q(&self) -> usize {
        self.tables[0].ncols()
    }

    pub fn r(&self) -> usize {
        self.tables.len()
    }

    pub fn c(&self) -> usize {
        self.covariates.ncols()
    }

    /// `Σ_r η_r Uʳ`.
    pub fn collapsed(&self, eta: &Vector) -> Matrix {
        let mut u = Matrix::zeros(self.n(), self.q());
        for (t, &e) in self.tables.iter().zip(eta.iter()) {
            if e != 0.0 {
                u += t * e;
            }
        }
        u
    }

    /// `N × R` matrix with entries `(u_iʳ)ᵀβ`.
    pub fn feature_scores(&self, beta: &Vector) -> Matrix {
        let mut v = Matrix::zeros(self.n(), self.r());
        for (r, t) in self.tables.iter().enumerate() {
            v.set_column(r, &(t * beta));
        }
        v
    }

    pub fn linear_predictor(&self, beta: &Vector, eta: &Vector, gamma: &Vector) -> Vector {
        self.feature_scores(beta) * eta + &self.covariates * gamma
    }

    fn margins(&self, beta: &Vector, eta: &Vector, gamma: &Vector) -> Vec<f64> {
        let f = self.linear_predictor(beta, eta, gamma);
        f.iter().zip(&self.z).map(|(f, z)| f * z).collect()
    }

    pub fn require_both_classes(&self) -> Result<()> {
        let pos = self.z.iter().filter(|&&v| v > 0.0).count();
        if self.n() < 2 || pos == 0 || pos == self.n() {
            return Err(Error::SingleClass);
        }
        Ok(())
    }
}

/// Design whose columns line up with [`Draw::coefficients`] of a dynamic
/// fit: column `q·R + r` is `Uʳ[:, q]`, covariates last.
pub fn product_design(tables: &[Matrix], covariates: &Matrix) -> Result<Matrix> {
    let r = tables.len();
    if r == 0 {
        return Err(Error::InvalidArgument("at least one feature table is required".into()));
    }
    let (n, q) = tables[0].shape();
    if tables.iter().any(|t| t.shape() != (n, q)) || covariates.nrows() != n {
        return Err(Error::DimensionMismatch { what: "product design inputs", expected: n, found: covariates.nrows() });
    }
    let mut u = Matrix::zeros(n, q * r + covariates.ncols());
    for qi in 0..q {
        for (ri, t) in tables.iter().enumerate() {
            u.set_column(qi * r + ri, &t.column(qi));
        }
    }
    for j in 0..covariates.ncols() {
        u.set_column(q * r + j, &covariates.column(j));
    }
    Ok(u)
}

/// Hinge pseudo-log-likelihood with the factored linear predictor.
#[allow(clippy::too_many_arguments)]
pub fn dynamic_pseudo_loglik(
    z: &[f64],
    tables: &[Matrix],
    covariates: &Matrix,
    beta: &Vector,
    eta: &Vector,
    gamma: &Vector,
    sigma_eps2: f64,
) -> Result<f64> {
    let data = DynamicData::new(tables.to_vec(), covariates.clone(), z.to_vec())?;
    if beta.len() != data.q() || eta.len() != data.r() || gamma.len() != data.c() {
        return Err(Error::DimensionMismatch {
            what: "dynamic coefficients",
            expected: data.q() + data.r() + data.c(),
            found: beta.len() + eta.len() + gamma.len(),
        });
    }
    if !(sigma_eps2 > 0.0) || !sigma_eps2.is_finite() {
        return Err(Error::InvalidParameter { name: "sigma_eps2", value: sigma_eps2 });
    }
    // Evaluated on the product design so that R = 1, η = 1 reproduces the
    // static value bit for bit.
    let u = product_design(&data.tables, &data.covariates)?;
    let mut coef = Vec::with_capacity(u.ncols());
    for &b in beta.iter() {
        coef.extend(eta.iter().map(|e| b * e));
    }
    coef.extend(gamma.iter().copied());
    let f = u * Vector::from_vec(coef);
    Ok(margin_loglik(f.iter().zip(z).map(|(f, z)| f * z), sigma_eps2))
}

/// Switches used to pin parts of the hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DynamicControls {
    pub update_eta: bool,
    /// Covers both Σ_η and d*.
    pub update_sigma_eta: bool,
}

impl Default for DynamicControls {
    fn default() -> Self {
        Self { update_eta: true, update_sigma_eta: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicChainState {
    pub beta: Vector,
    pub gamma: Vector,
    pub eta: Vector,
    pub sigma_eta: Matrix,
    pub d_star: f64,
    pub sigma_eps2: f64,
    pub rho: Vec<f64>,
    pub sigma_beta2: Vec<f64>,
    pub shrink: ShrinkageState,
}

impl DynamicChainState {
    /// β = γ = 0, η = (1, 0, …, 0), Σ_η = I, d* = 1, otherwise as the static
    /// initial state.
    pub fn initial(n: usize, q: usize, r: usize, c: usize, hyper: &Hyperparameters) -> Self {
        let mut eta = Vector::zeros(r);
        if r > 0 {
            eta[0] = 1.0;
        }
        Self {
            beta: Vector::zeros(q),
            gamma: Vector::zeros(c),
            eta,
            sigma_eta: Matrix::identity(r, r),
            d_star: 1.0,
            sigma_eps2: 1.0,
            rho: vec![1.0; n],
            sigma_beta2: vec![1.0; q],
            shrink: ShrinkageState::initial(q, hyper),
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
        if !(self.d_star > 0.0 && self.d_star.is_finite()) {
            return Err("d_star not positive");
        }
        if crate::linalg::check_symmetric(&self.sigma_eta, 1e-8).is_err() || crate::linalg::cholesky(&self.sigma_eta).is_err() {
            return Err("sigma_eta not symmetric positive definite");
        }
        self.shrink.check_invariants()
    }

    pub fn to_draw(&self, chain: usize, iteration: usize) -> Draw {
        let r = self.eta.len();
        let mut sigma_eta = Vec::with_capacity(r * r);
        for i in 0..r {
            for j in 0..r {
                sigma_eta.push(self.sigma_eta[(i, j)]);
            }
        }
        Draw {
            chain,
            iteration,
            beta: self.beta.iter().copied().collect(),
            sigma_eps2: self.sigma_eps2,
            delta: self.shrink.cluster_count(),
            atoms: self.shrink.occupied_atoms(),
            dynamic: Some(DynamicDraw {
                gamma: self.gamma.iter().copied().collect(),
                eta: self.eta.iter().copied().collect(),
                sigma_eta,
                d_star: self.d_star,
            }),
        }
    }
}

/// `z_i(1 + ρ_i) - offset_i`, the Gaussian pseudo-response after removing
/// the part of the predictor that is held fixed.
fn pseudo_response(z: &[f64], rho: &[f64], offset: &Vector) -> Vec<f64> {
    z.iter().zip(rho).zip(offset.iter()).map(|((z, r), o)| z * (1.0 + r) - o).collect()
}

pub fn step_sigma_eps(state: &mut DynamicChainState, data: &DynamicData, hyper: &Hyperparameters, rng: &mut RandomStream) -> Result<()> {
    let m = data.margins(&state.beta, &state.eta, &state.gamma);
    state.sigma_eps2 = draw_sigma_eps(&m, &state.rho, hyper, rng)?;
    Ok(())
}

pub fn step_rho(state: &mut DynamicChainState, data: &DynamicData, rng: &mut RandomStream) -> Result<()> {
    let m = data.margins(&state.beta, &state.eta, &state.gamma);
    draw_rho(&m, state.sigma_eps2, &mut state.rho, rng)
}

/// Precision and linear term of the β conditional.
pub fn beta_conditional(state: &DynamicChainState, data: &DynamicData) -> (Matrix, Vector) {
    let x = data.collapsed(&state.eta);
    let y = pseudo_response(&data.z, &state.rho, &(&data.covariates * &state.gamma));
    let prior = Matrix::from_diagonal(&Vector::from_iterator(
        state.sigma_beta2.len(),
        state.sigma_beta2.iter().map(|s| 1.0 / s),
    ));
    gaussian_block(&x, &y, &state.rho, state.sigma_eps2, prior)
}

pub fn step_beta_dynamic(state: &mut DynamicChainState, data: &DynamicData, rng: &mut RandomStream) -> Result<()> {
    let (a, h) = beta_conditional(state, data);
    state.beta = rng.mvn_precision(&h, &a)?;
    Ok(())
}

pub fn gamma_conditional(state: &DynamicChainState, data: &DynamicData, hyper: &Hyperparameters) -> (Matrix, Vector) {
    let c = data.c();
    let offset = data.feature_scores(&state.beta) * &state.eta;
    let y = pseudo_response(&data.z, &state.rho, &offset);
    let prior = Matrix::from_diagonal_element(c, c, 1.0 / hyper.gamma_prior_var);
    gaussian_block(&data.covariates, &y, &state.rho, state.sigma_eps2, prior)
}

pub fn step_gamma(state: &mut DynamicChainState, data: &DynamicData, hyper: &Hyperparameters, rng: &mut RandomStream) -> Result<()> {
    if data.c() == 0 {
        return Ok(());
    }
    let (a, h) = gamma_conditional(state, data, hyper);
    state.gamma = rng.mvn_precision(&h, &a)?;
    Ok(())
}

/// Precision `Σ_i v_i v_iᵀ/(ρ_i σ_ε²) + Σ_η⁻¹` and linear term of the η
/// conditional.
pub fn eta_conditional(state: &DynamicChainState, data: &DynamicData) -> Result<(Matrix, Vector)> {
    let v = data.feature_scores(&state.beta);
    let y = pseudo_response(&data.z, &state.rho, &(&data.covariates * &state.gamma));
    let prior = crate::linalg::spd_inverse(&state.sigma_eta)?;
    Ok(gaussian_block(&v, &y, &state.rho, state.sigma_eps2, prior))
}

pub fn step_eta(state: &mut DynamicChainState, data: &DynamicData, rng: &mut RandomStream) -> Result<()> {
    let (a, h) = eta_conditional(state, data)?;
    state.eta = rng.mvn_precision(&h, &a)?;
    Ok(())
}

/// Inverse-Wishart `(df, scale)` of Σ_η given η and d*.
pub fn sigma_eta_conditional(eta: &Vector, d_star: f64, hyper: &Hyperparameters) -> (f64, Matrix) {
    let r = eta.len();
    let scale = Matrix::from_diagonal_element(r, r, d_star) + eta * eta.transpose();
    (hyper.iw_df_for(r) + 1.0, scale)
}

pub fn step_sigma_eta(state: &mut DynamicChainState, hyper: &Hyperparameters, rng: &mut RandomStream) -> Result<()> {
    let (df, scale) = sigma_eta_conditional(&state.eta, state.d_star, hyper);
    state.sigma_eta = rng.inverse_wishart(df, &scale)?;
    Ok(())
}

/// Unnormalized `ln p(d* | Σ_η)` given `tr(Σ_η⁻¹)`.
pub fn d_star_log_density(d_star: f64, r: usize, trace_inv: f64, hyper: &Hyperparameters) -> f64 {
    if !(d_star > 0.0) {
        return f64::NEG_INFINITY;
    }
    let b = hyper.iw_df_for(r);
    (r as f64 * b / 2.0) * d_star.ln() - 0.5 * d_star * trace_inv - (hyper.c + 1.0) * d_star.ln() - hyper.d / d_star
}

/// Slice sampler with Neal's doubling bracket and its acceptance check.
/// Fails when the bracket needs more than [`MAX_DOUBLINGS`] doublings.
pub fn slice_sample(x0: f64, width: f64, rng: &mut RandomStream, log_f: impl Fn(f64) -> f64) -> Result<f64> {
    let y = log_f(x0) - rng.exponential(1.0)?;
    let mut left = x0 - width * rng.uniform();
    let mut right = left + width;
    let mut k = 0;
    while y < log_f(left) || y < log_f(right) {
        k += 1;
        if k > MAX_DOUBLINGS {
            return Err(Error::SliceStepOut { doublings: k });
        }
        if rng.uniform() < 0.5 {
            left -= right - left;
        } else {
            right += right - left;
        }
    }
    // The acceptance check replays the halving on the doubled bracket.
    let (left0, right0) = (left, right);
    let accept = |x1: f64| -> bool {
        let (mut lh, mut rh) = (left0, right0);
        let mut differ = false;
        while rh - lh > 1.1 * width {
            let mid = 0.5 * (lh + rh);
            if (x0 < mid) != (x1 < mid) {
                differ = true;
            }
            if x1 < mid {
                rh = mid;
            } else {
                lh = mid;
            }
            if differ && y >= log_f(lh) && y >= log_f(rh) {
                return false;
            }
        }
        true
    };
    loop {
        let x1 = left + rng.uniform() * (right - left);
        if y < log_f(x1) && accept(x1) {
            return Ok(x1);
        }
        if x1 < x0 {
            left = x1;
        } else {
            right = x1;
        }
    }
}

/// Slice update of d* on the log scale (unit bracket width).
pub fn step_d_star(state: &mut DynamicChainState, hyper: &Hyperparameters, rng: &mut RandomStream) -> Result<()> {
    let r = state.eta.len();
    let trace_inv = crate::linalg::spd_inverse(&state.sigma_eta)?.trace();
    let x = slice_sample(state.d_star.ln(), 1.0, rng, |x| {
        d_star_log_density(x.exp(), r, trace_inv, hyper) + x
    })?;
    state.d_star = x.exp();
    Ok(())
}

pub fn step_shrinkage(state: &mut DynamicChainState, hyper: &Hyperparameters, rng: &mut RandomStream) -> Result<()> {
    let beta = state.beta.as_slice();
    shrinkage::step_lambda(&mut state.shrink, beta, hyper, rng)?;
    shrinkage::step_sigma_beta(&mut state.sigma_beta2, &state.shrink.lambda, beta, rng)
}

/// One full sweep: σ_ε², ρ, β, γ, λ, σ²_β, η, Σ_η, d*.
pub fn sweep(
    state: &mut DynamicChainState,
    data: &DynamicData,
    hyper: &Hyperparameters,
    controls: DynamicControls,
    rng: &mut RandomStream,
) -> Result<()> {
    step_sigma_eps(state, data, hyper, rng)?;
    step_rho(state, data, rng)?;
    step_beta_dynamic(state, data, rng)?;
    step_gamma(state, data, hyper, rng)?;
    step_shrinkage(state, hyper, rng)?;
    if controls.update_eta {
        step_eta(state, data, rng)?;
    }
    if controls.update_sigma_eta {
        step_sigma_eta(state, hyper, rng)?;
        step_d_star(state, hyper, rng)?;
    }
    debug_assert_eq!(state.check_invariants(), Ok(()));
    Ok(())
}

pub fn run_chain(
    data: &DynamicData,
    hyper: &Hyperparameters,
    controls: DynamicControls,
    initial: Option<&DynamicChainState>,
    chain: usize,
) -> Result<Vec<Draw>> {
    let mut rng = RandomStream::new(hyper.seed, chain as u64);
    let mut state = match initial {
        Some(s) => s.clone(),
        None => DynamicChainState::initial(data.n(), data.q(), data.r(), data.c(), hyper),
    };
    let mut out = Vec::with_capacity(hyper.draws_per_chain());
    for iter in 1..=hyper.n_iter {
        sweep(&mut state, data, hyper, controls, &mut rng)?;
        if hyper.keeps(iter) {
            out.push(state.to_draw(chain, iter));
        }
    }
    Ok(out)
}

/// Fits the dynamic model on column-aligned feature tables (already
/// standardized as desired), covariates and ±1 labels.
pub fn fit_dynamic(features: &crate::features::DynamicFeatureSet, covariates: &Matrix, labels: &[f64], hyper: &Hyperparameters) -> Result<PosteriorDraws> {
    let data = DynamicData::new(features.tables.clone(), covariates.clone(), labels.to_vec())?;
    fit_dynamic_data(&data, hyper, DynamicControls::default())
}

pub fn fit_dynamic_data(data: &DynamicData, hyper: &Hyperparameters, controls: DynamicControls) -> Result<PosteriorDraws> {
    hyper.validate()?;
    data.require_both_classes()?;
    let chains = (0..hyper.n_chains)
        .map(|c| run_chain(data, hyper, controls, None, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(merge_dynamic(data, chains))
}

pub fn merge_dynamic(data: &DynamicData, chains: Vec<Vec<Draw>>) -> PosteriorDraws {
    PosteriorDraws::merge(ModelKind::Dynamic, data.q() * data.r() + data.c(), data.q(), data.r(), chains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm_static::hinge_pseudo_loglik;

    fn toy(n: usize, q: usize, r: usize, c: usize, seed: u64) -> DynamicData {
        let mut rng = RandomStream::new(seed, 0);
        let tables = (0..r).map(|_| Matrix::from_fn(n, q, |_, _| rng.standard_normal())).collect();
        let cov = Matrix::from_fn(n, c, |_, _| rng.standard_normal());
        let z = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        DynamicData::new(tables, cov, z).unwrap()
    }

    #[test]
    fn reduces_to_static_loglik() {
        let d = toy(5, 3, 1, 2, 1);
        let beta = Vector::from_vec(vec![0.3, -1.0, 0.2]);
        let gamma = Vector::from_vec(vec![0.5, -0.1]);
        let eta = Vector::from_element(1, 1.0);
        let a = dynamic_pseudo_loglik(&d.z, &d.tables, &d.covariates, &beta, &eta, &gamma, 0.7).unwrap();
        let u = product_design(&d.tables, &d.covariates).unwrap();
        let full = Vector::from_iterator(5, beta.iter().chain(gamma.iter()).copied());
        let b = hinge_pseudo_loglik(&d.z, &u, &full, 0.7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_eta_annihilates_a_table() {
        let mut d = toy(4, 2, 2, 0, 2);
        let beta = Vector::from_vec(vec![1.0, -0.5]);
        let eta = Vector::from_vec(vec![1.0, 0.0]);
        let g = Vector::zeros(0);
        let a = dynamic_pseudo_loglik(&d.z, &d.tables, &d.covariates, &beta, &eta, &g, 1.0).unwrap();
        d.tables[1] *= 17.0;
        let b = dynamic_pseudo_loglik(&d.z, &d.tables, &d.covariates, &beta, &eta, &g, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sign_symmetry() {
        let d = toy(6, 3, 2, 0, 3);
        let beta = Vector::from_vec(vec![1.0, -0.5, 0.2]);
        let eta = Vector::from_vec(vec![0.4, 2.0]);
        let g = Vector::zeros(0);
        let a = dynamic_pseudo_loglik(&d.z, &d.tables, &d.covariates, &beta, &eta, &g, 1.3).unwrap();
        let b = dynamic_pseudo_loglik(&d.z, &d.tables, &d.covariates, &(-&beta), &(-&eta), &g, 1.3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn d_star_density_hand_value() {
        let h = Hyperparameters { iw_df: Some(1.0), c: 1.0, d: 1.0, ..Default::default() };
        let v = d_star_log_density(1.0, 1, 1.0, &h);
        assert!((v - (-0.5 - 1.0)).abs() < 1e-12);
        let v = d_star_log_density(2.0, 1, 1.0, &h);
        let hand = 0.5 * 2f64.ln() - 1.0 - 2.0 * 2f64.ln() - 0.5;
        assert!((v - hand).abs() < 1e-12);
    }

    #[test]
    fn eta_without_signal_is_prior() {
        let d = toy(5, 2, 2, 0, 4);
        let h = Hyperparameters::default();
        let mut s = DynamicChainState::initial(5, 2, 2, 0, &h);
        s.sigma_eta = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let (a, hv) = eta_conditional(&s, &d).unwrap();
        let inv = crate::linalg::spd_inverse(&s.sigma_eta).unwrap();
        assert!((a - inv).abs().max() < 1e-12);
        assert!(hv.abs().max() < 1e-12);
    }

    #[test]
    fn slice_step_out_is_reported() {
        let mut rng = RandomStream::new(1, 0);
        let r = slice_sample(0.0, 1.0, &mut rng, |_| 0.0);
        assert_eq!(r, Err(Error::SliceStepOut { doublings: MAX_DOUBLINGS + 1 }));
    }

    #[test]
    fn sigma_eta_conditional_shape() {
        let h = Hyperparameters::default();
        let (df, s) = sigma_eta_conditional(&Vector::from_vec(vec![1.0, 2.0]), 3.0, &h);
        assert_eq!(df, 3.0);
        assert_eq!(s, Matrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 7.0]));
    }
}
