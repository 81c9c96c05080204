//! Retained posterior samples.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

/// Dynamic-model parameters of one retained sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicDraw {
    /// Covariate effects.
    pub gamma: Vec<f64>,
    pub eta: Vec<f64>,
    /// Σ_η, row-major `R × R`.
    pub sigma_eta: Vec<f64>,
    pub d_star: f64,
}

/// One retained sweep of one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub chain: usize,
    /// 1-based sweep number.
    pub iteration: usize,
    /// β* (static: all P coefficients; dynamic: the Q edge factors).
    pub beta: Vec<f64>,
    pub sigma_eps2: f64,
    /// Δ, the number of occupied shrinkage components.
    pub delta: usize,
    /// `(λ*_h, n_h)` of every occupied component.
    pub atoms: Vec<(f64, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamic: Option<DynamicDraw>,
}

impl Draw {
    /// The identified coefficients that all summaries use: β for the static
    /// model; products `β_q·η_r` (q-major) followed by γ for the dynamic one.
    pub fn coefficients(&self) -> Vec<f64> {
        match &self.dynamic {
            None => self.beta.clone(),
            Some(d) => {
                let mut out = Vec::with_capacity(self.beta.len() * d.eta.len() + d.gamma.len());
                for &b in &self.beta {
                    for &e in &d.eta {
                        out.push(b * e);
                    }
                }
                out.extend_from_slice(&d.gamma);
                out
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Static,
    Dynamic,
}

/// Retained draws of every chain, chain-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub kind: ModelKind,
    pub n_chains: usize,
    /// Length of [`Draw::coefficients`].
    pub n_coefficients: usize,
    /// Dynamic model only: edge count Q and feature count R.
    pub n_edges: usize,
    pub n_features: usize,
    pub draws: Vec<Draw>,
}

impl PosteriorDraws {
    /// Concatenates per-chain draw lists in chain order.
    pub fn merge(
        kind: ModelKind,
        n_coefficients: usize,
        n_edges: usize,
        n_features: usize,
        chains: Vec<Vec<Draw>>,
    ) -> Self {
        let n_chains = chains.len();
        let draws = chains.into_iter().flatten().collect();
        Self { kind, n_chains, n_coefficients, n_edges, n_features, draws }
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Draws × identified coefficients.
    pub fn coefficient_matrix(&self) -> Result<Matrix> {
        if self.draws.is_empty() {
            return Err(Error::Degenerate("no posterior draws"));
        }
        let mut m = Matrix::zeros(self.draws.len(), self.n_coefficients);
        for (i, d) in self.draws.iter().enumerate() {
            let c = d.coefficients();
            if c.len() != self.n_coefficients {
                return Err(Error::DimensionMismatch {
                    what: "draw coefficients",
                    expected: self.n_coefficients,
                    found: c.len(),
                });
            }
            for (j, x) in c.into_iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        Ok(m)
    }

    pub fn coefficient_means(&self) -> Result<Vec<f64>> {
        let m = self.coefficient_matrix()?;
        Ok((0..m.ncols()).map(|j| m.column(j).mean()).collect())
    }

    /// Draws of one chain, in iteration order.
    pub fn chain(&self, chain: usize) -> impl Iterator<Item = &Draw> {
        self.draws.iter().filter(move |d| d.chain == chain)
    }

    pub fn cluster_counts(&self) -> Vec<usize> {
        self.draws.iter().map(|d| d.delta).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn dynamic_coefficients_are_products_then_gamma() {
        let d = Draw {
            chain: 0,
            iteration: 1,
            beta: vec![1.0, -2.0],
            sigma_eps2: 1.0,
            delta: 1,
            atoms: vec![(1.0, 3)],
            dynamic: Some(DynamicDraw {
                gamma: vec![0.5],
                eta: vec![3.0, 0.5],
                sigma_eta: vec![1.0, 0.0, 0.0, 1.0],
                d_star: 1.0,
            }),
        };
        assert_eq!(d.coefficients(), vec![3.0, 0.5, -6.0, -1.0, 0.5]);
    }
}
