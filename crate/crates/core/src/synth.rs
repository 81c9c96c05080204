//! Synthetic data with known ground truth.
//!
//! Features are standard normal and labels come from the sign of a linear
//! score plus noise. For Gaussian noise of scale σ and a score
//! `f = uᵀβ ~ N(0, ‖β‖²)`, the Bayes rule is `sign(f)` and its error is
//! `P(sign(f + σε) ≠ sign(f)) = arctan(σ/‖β‖)/π`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::features::{nodes_for_edges, upper_triangle_pairs, DesignOptions, DynamicFeatureSet, DynamicMethod, EdgeBlock, PcaBasis};
use crate::netestim::SubjectScan;
use crate::rngkit::RandomStream;
use crate::special::{normal_cdf, sigmoid};
use crate::{EdgeDescriptor, EdgeFeatureTable, Error, Label, Matrix, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    /// `z = sign(f + σ·N(0,1))`.
    Margin,
    /// `z = sign(f + σ·Logistic(0,1))`, i.e. `P(z = 1) = sigmoid(f/σ)`.
    Logistic,
}

/// Signals of one magnitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalGroup {
    pub count: usize,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub q: usize,
    pub c: usize,
    pub groups: Vec<SignalGroup>,
    /// Coefficients of the covariates (length `c`; empty means all zero).
    #[serde(default)]
    pub covariate_effects: Vec<f64>,
    pub noise_scale: f64,
    pub mechanism: Mechanism,
    pub seed: u64,
}

impl SynthSpec {
    /// Two magnitude groups of five signals each.
    pub fn two_groups(n: usize, q: usize, strong: f64, weak: f64, seed: u64) -> Self {
        Self {
            n,
            q,
            c: 0,
            groups: vec![SignalGroup { count: 5, magnitude: strong }, SignalGroup { count: 5, magnitude: weak }],
            covariate_effects: Vec::new(),
            noise_scale: 0.0,
            mechanism: Mechanism::Margin,
            seed,
        }
    }

    pub fn signal_count(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    /// ‖β‖ over edges and covariates.
    pub fn coefficient_norm(&self) -> f64 {
        let edges: f64 = self.groups.iter().map(|g| g.count as f64 * g.magnitude * g.magnitude).sum();
        let cov: f64 = self.covariate_effects.iter().map(|x| x * x).sum();
        (edges + cov).sqrt()
    }

    /// Sets the noise scale so the Bayes error equals `target` (margin
    /// mechanism: `σ = ‖β‖·tan(π·target)`).
    pub fn with_bayes_error(mut self, target: f64) -> Result<Self> {
        if !(target > 0.0 && target < 0.5) {
            return Err(Error::InvalidParameter { name: "bayes_error", value: target });
        }
        if self.mechanism != Mechanism::Margin {
            return Err(Error::InvalidArgument("Bayes-error targeting needs the margin mechanism".into()));
        }
        self.noise_scale = self.coefficient_norm() * (core::f64::consts::PI * target).tan();
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.signal_count() > self.q {
            return Err(Error::InvalidArgument(format!("{} signals exceed {} edges", self.signal_count(), self.q)));
        }
        if self.n < 2 || self.q == 0 {
            return Err(Error::InvalidArgument("synthetic data needs n >= 2 and q >= 1".into()));
        }
        if !self.covariate_effects.is_empty() && self.covariate_effects.len() != self.c {
            return Err(Error::DimensionMismatch { what: "covariate effects", expected: self.c, found: self.covariate_effects.len() });
        }
        if self.groups.iter().any(|g| !g.magnitude.is_finite()) || self.covariate_effects.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("signal magnitudes"));
        }
        if !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::InvalidParameter { name: "noise_scale", value: self.noise_scale });
        }
        Ok(())
    }

    /// Analytic Bayes error of the label mechanism.
    pub fn bayes_error(&self) -> f64 {
        bayes_error(self.coefficient_norm(), self.noise_scale, self.mechanism)
    }
}

/// Bayes error for a score `N(0, norm²)` observed through noise of `scale`.
pub fn bayes_error(norm: f64, scale: f64, mechanism: Mechanism) -> f64 {
    if scale == 0.0 {
        return if norm > 0.0 { 0.0 } else { 0.5 };
    }
    if norm == 0.0 {
        return 0.5;
    }
    match mechanism {
        Mechanism::Margin => (scale / norm).atan() / core::f64::consts::PI,
        Mechanism::Logistic => {
            // E[sigmoid(-|f|/σ)], f ~ N(0, norm²), by Simpson's rule on the
            // half line in standard-normal units.
            let k = 4000;
            // Past 50σ/‖β‖ standard units the logistic tail is below e^-50.
            let hi = (50.0 * scale / norm).min(12.0);
            let h = hi / k as f64;
            let g = |x: f64| 2.0 * sigmoid(-x * norm / scale) * (-0.5 * x * x).exp() / (2.0 * core::f64::consts::PI).sqrt();
            let mut s = g(0.0) + g(hi);
            for i in 1..k {
                s += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        }
    }
}

/// Probability that a subject with score `f` is mislabeled relative to
/// `sign(f)`.
pub fn flip_probability(f: f64, scale: f64, mechanism: Mechanism) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    match mechanism {
        Mechanism::Margin => normal_cdf(-f.abs() / scale),
        Mechanism::Logistic => sigmoid(-f.abs() / scale),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub table: EdgeFeatureTable,
    /// True coefficients over edges then covariates.
    pub beta: Vec<f64>,
    /// Edge indices carrying signal, with their group.
    pub signals: Vec<(usize, usize)>,
    pub bayes_error: f64,
}

fn draw_noise(rng: &mut RandomStream, scale: f64, mechanism: Mechanism) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    match mechanism {
        Mechanism::Margin => scale * rng.standard_normal(),
        Mechanism::Logistic => {
            let u = rng.uniform();
            scale * (u / (1.0 - u)).ln()
        }
    }
}

/// Edge indices of the planted signals (seeded, sorted by group then index).
fn plant(spec: &SynthSpec, rng: &mut RandomStream) -> Vec<(usize, usize)> {
    let mut idx: Vec<usize> = (0..spec.q).collect();
    rng.shuffle(&mut idx);
    let mut out = Vec::new();
    let mut at = 0;
    for (g, group) in spec.groups.iter().enumerate() {
        let mut chosen: Vec<usize> = idx[at..at + group.count].to_vec();
        chosen.sort_unstable();
        out.extend(chosen.into_iter().map(|j| (j, g)));
        at += group.count;
    }
    out
}

fn true_beta(spec: &SynthSpec, signals: &[(usize, usize)], rng: &mut RandomStream) -> Vec<f64> {
    let mut beta = vec![0.0; spec.q + spec.c];
    for &(j, g) in signals {
        let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
        beta[j] = sign * spec.groups[g].magnitude;
    }
    for (k, &e) in spec.covariate_effects.iter().enumerate() {
        beta[spec.q + k] = e;
    }
    beta
}

fn labels_from_scores(scores: &[f64], spec: &SynthSpec, rng: &mut RandomStream) -> Result<Vec<Option<Label>>> {
    let labels: Vec<Option<Label>> = scores
        .iter()
        .map(|&f| Some(Label::from_score(f + draw_noise(rng, spec.noise_scale, spec.mechanism))))
        .collect();
    let pos = labels.iter().filter(|l| **l == Some(Label::Pos)).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    Ok(labels)
}

fn edge_columns(q: usize) -> Vec<EdgeDescriptor> {
    upper_triangle_pairs(nodes_for_edges(q))[..q].iter().map(|&(k, l)| EdgeDescriptor::new(k, l)).collect()
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i:04}")).collect()
}

/// Static dataset. The table is unstandardized (features are already on unit
/// scale); fitting code standardizes on its training rows.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = RandomStream::new(spec.seed, 0);
    let signals = plant(spec, &mut rng);
    let beta = true_beta(spec, &signals, &mut rng);
    let mut values = Matrix::zeros(spec.n, spec.q);
    for i in 0..spec.n {
        for j in 0..spec.q {
            values[(i, j)] = rng.standard_normal();
        }
    }
    let mut cov = Matrix::zeros(spec.n, spec.c);
    for i in 0..spec.n {
        for j in 0..spec.c {
            cov[(i, j)] = rng.standard_normal();
        }
    }
    let scores: Vec<f64> = (0..spec.n)
        .map(|i| {
            (0..spec.q).map(|j| values[(i, j)] * beta[j]).sum::<f64>()
                + (0..spec.c).map(|j| cov[(i, j)] * beta[spec.q + j]).sum::<f64>()
        })
        .collect();
    let labels = labels_from_scores(&scores, spec, &mut rng)?;
    let table = crate::features::assemble_design(
        ids(spec.n),
        EdgeBlock { values, columns: edge_columns(spec.q) },
        cov,
        (0..spec.c).map(|j| format!("cov{j}")).collect(),
        labels,
        DesignOptions { standardize: false, ..Default::default() },
        None,
    )?;
    Ok(SynthData { table, beta, signals, bayes_error: spec.bayes_error() })
}

/// Orthonormal zero-mean cosine basis on `len` points (rows = directions).
pub fn cosine_basis(r: usize, len: usize) -> Vec<Vec<f64>> {
    (1..=r)
        .map(|k| {
            (0..len)
                .map(|t| (2.0 / len as f64).sqrt() * (core::f64::consts::PI * k as f64 * (t as f64 + 0.5) / len as f64).cos())
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicSynth {
    pub features: DynamicFeatureSet,
    /// Per-subject `Q × L` edge series built from the features.
    pub series: Vec<Matrix>,
    pub covariates: Matrix,
    pub labels: Vec<Label>,
    /// True β over edges, then covariate effects.
    pub beta: Vec<f64>,
    pub eta: Vec<f64>,
    pub signals: Vec<(usize, usize)>,
    pub bayes_error: f64,
}

/// Dynamic dataset: `R = eta.len()` standard-normal feature tables, labels
/// from `sign(Σ_r η_r (u_iʳ)ᵀβ + c_iᵀγ + noise)`. Each edge's series of
/// length `len` is `Σ_r u_{ie}ʳ φ_r` over an orthonormal cosine basis, so the
/// tables are exactly the series' basis coefficients.
pub fn generate_dynamic(spec: &SynthSpec, eta: &[f64], len: usize) -> Result<DynamicSynth> {
    spec.validate()?;
    let r = eta.len();
    if r == 0 || len < 2 || r >= len {
        return Err(Error::InvalidArgument(format!("need 1 <= R < L and L >= 2, got R = {r}, L = {len}")));
    }
    let mut rng = RandomStream::new(spec.seed, 0);
    let signals = plant(spec, &mut rng);
    let beta = true_beta(spec, &signals, &mut rng);
    let mut tables = vec![Matrix::zeros(spec.n, spec.q); r];
    for i in 0..spec.n {
        for t in tables.iter_mut() {
            for j in 0..spec.q {
                t[(i, j)] = rng.standard_normal();
            }
        }
    }
    let mut cov = Matrix::zeros(spec.n, spec.c);
    for i in 0..spec.n {
        for j in 0..spec.c {
            cov[(i, j)] = rng.standard_normal();
        }
    }
    let scores: Vec<f64> = (0..spec.n)
        .map(|i| {
            let mut f = 0.0;
            for (t, &e) in tables.iter().zip(eta) {
                f += e * (0..spec.q).map(|j| t[(i, j)] * beta[j]).sum::<f64>();
            }
            f + (0..spec.c).map(|j| cov[(i, j)] * beta[spec.q + j]).sum::<f64>()
        })
        .collect();
    let labels: Vec<Label> = labels_from_scores(&scores, spec, &mut rng)?.into_iter().flatten().collect();

    let basis = cosine_basis(r, len);
    let series = (0..spec.n)
        .map(|i| {
            Matrix::from_fn(spec.q, len, |e, t| tables.iter().zip(&basis).map(|(tab, phi)| tab[(i, e)] * phi[t]).sum())
        })
        .collect();
    let edge_norm: f64 = beta[..spec.q].iter().map(|b| b * b).sum::<f64>() * eta.iter().map(|e| e * e).sum::<f64>();
    let cov_norm: f64 = beta[spec.q..].iter().map(|b| b * b).sum();
    let norm = (edge_norm + cov_norm).sqrt();
    let features = DynamicFeatureSet {
        method: DynamicMethod::Pca,
        columns: edge_columns(spec.q),
        tables,
        basis: Some(PcaBasis { center: vec![0.0; len], directions: basis, explained: vec![1.0 / r as f64; r] }),
    };
    Ok(DynamicSynth {
        features,
        series,
        covariates: cov,
        labels,
        beta,
        eta: eta.to_vec(),
        signals,
        bayes_error: bayes_error(norm, spec.noise_scale, spec.mechanism),
    })
}

/// Subjects whose time series come from a known sparse precision matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub n: usize,
    /// Regions.
    pub v: usize,
    /// Time points.
    pub t: usize,
    /// Chain edges `(j, j+1)` whose strength tracks the latent class score.
    pub signal_edges: usize,
    /// Shift in the precision entry per unit of latent score.
    pub effect: f64,
    pub label_noise: f64,
    pub c: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanSynth {
    pub scans: Vec<SubjectScan>,
    /// Node pairs whose precision entry depends on the label.
    pub signal_pairs: Vec<(usize, usize)>,
    /// Density of the generating precision matrices.
    pub true_density: f64,
}

/// Each subject has a tridiagonal precision matrix (unit diagonal, base
/// off-diagonal −0.25) whose first `signal_edges` chain entries shift by
/// `effect·tanh(s_i)` with latent score `s_i ~ N(0,1)`; the label is
/// `sign(s_i + label_noise·N(0,1))`. Entries stay within ±0.45, so every
/// matrix is diagonally dominant.
pub fn generate_scans(spec: &ScanSpec) -> Result<ScanSynth> {
    if spec.v < 3 || spec.t < 2 || spec.n < 2 || spec.signal_edges >= spec.v {
        return Err(Error::InvalidArgument("scan spec needs v >= 3, t >= 2, n >= 2, signal_edges < v".into()));
    }
    if !(spec.effect.abs() <= 0.2) {
        return Err(Error::InvalidParameter { name: "effect", value: spec.effect });
    }
    let mut rng = RandomStream::new(spec.seed, 0);
    let mut scans = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let s = rng.standard_normal();
        let label = Label::from_score(s + spec.label_noise * rng.standard_normal());
        let mut omega = Matrix::identity(spec.v, spec.v);
        for j in 0..spec.v - 1 {
            let shift = if j < spec.signal_edges { spec.effect * s.tanh() } else { 0.0 };
            omega[(j, j + 1)] = -0.25 + shift;
            omega[(j + 1, j)] = -0.25 + shift;
        }
        let l = crate::linalg::cholesky(&omega)?;
        let mut series = Matrix::zeros(spec.t, spec.v);
        for t in 0..spec.t {
            let eps = crate::Vector::from_fn(spec.v, |_, _| rng.standard_normal());
            let x = crate::linalg::solve_lower_transpose(&l, &eps);
            series.set_row(t, &x.transpose());
        }
        let covariates = (0..spec.c).map(|_| rng.standard_normal()).collect();
        scans.push(SubjectScan { id: format!("s{i:04}"), series, covariates, label: Some(label) });
    }
    let labels: Vec<_> = scans.iter().filter(|s| s.label == Some(Label::Pos)).collect();
    if labels.is_empty() || labels.len() == scans.len() {
        return Err(Error::SingleClass);
    }
    Ok(ScanSynth {
        scans,
        signal_pairs: (0..spec.signal_edges).map(|j| (j, j + 1)).collect(),
        true_density: 2.0 / spec.v as f64,
    })
}
