use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which prior the coefficient shrinkage parameters receive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorMode {
    /// Dirichlet-process mixture: shrinkage levels cluster across coefficients.
    Dp,
    /// One shared shrinkage parameter (Bayesian lasso, a single cluster).
    Global,
    /// One shrinkage parameter per coefficient, each with its own gamma prior.
    Independent,
}

impl PriorMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PriorMode::Dp => "dp",
            PriorMode::Global => "global",
            PriorMode::Independent => "independent",
        }
    }
}

impl fmt::Display for PriorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PriorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dp" => Ok(PriorMode::Dp),
            "global" => Ok(PriorMode::Global),
            "independent" => Ok(PriorMode::Independent),
            other => Err(Error::InvalidArgument(alloc::format!(
                "unknown prior mode `{other}` (expected dp, global or independent)"
            ))),
        }
    }
}

/// Prior constants and sampler controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Inverse-gamma shape for the pseudo-likelihood scale σ_ε².
    pub a1: f64,
    /// Inverse-gamma scale for σ_ε².
    pub b1: f64,
    /// Dirichlet-process precision.
    pub m: f64,
    /// Gamma base-measure shape for the shrinkage atoms.
    pub r: f64,
    /// Gamma base-measure rate for the shrinkage atoms.
    pub delta: f64,
    pub prior_mode: PriorMode,
    /// Gamma shape/rate for the independent-mode shrinkage parameters.
    pub a_lambda: f64,
    pub b_lambda: f64,
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub n_chains: usize,
    /// Inverse-Wishart degrees of freedom for Σ_η; `None` means R.
    pub iw_df: Option<f64>,
    /// Inverse-gamma shape/scale for d*.
    pub c: f64,
    pub d: f64,
    /// Prior variance of the covariate effects γ in the dynamic model.
    pub gamma_prior_var: f64,
    /// Hard cap on the number of represented stick-breaking components.
    pub stick_cap: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            a1: 1.0,
            b1: 1.0,
            m: 1.0,
            r: 1.0,
            delta: 1.0,
            prior_mode: PriorMode::Dp,
            a_lambda: 0.1,
            b_lambda: 0.1,
            n_iter: 5000,
            burn_in: 2500,
            thin: 5,
            seed: 1,
            n_chains: 2,
            iw_df: None,
            c: 1.0,
            d: 1.0,
            gamma_prior_var: 100.0,
            stick_cap: 512,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("a1", self.a1),
            ("b1", self.b1),
            ("m", self.m),
            ("r", self.r),
            ("delta", self.delta),
            ("a_lambda", self.a_lambda),
            ("b_lambda", self.b_lambda),
            ("c", self.c),
            ("d", self.d),
            ("gamma_prior_var", self.gamma_prior_var),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        if let Some(df) = self.iw_df {
            if !(df > 0.0 && df.is_finite()) {
                return Err(Error::InvalidParameter { name: "iw_df", value: df });
            }
        }
        if self.n_iter == 0 {
            return Err(Error::InvalidParameter { name: "n_iter", value: 0.0 });
        }
        if self.burn_in >= self.n_iter {
            return Err(Error::InvalidParameter {
                name: "burn_in",
                value: self.burn_in as f64,
            });
        }
        if self.thin == 0 {
            return Err(Error::InvalidParameter { name: "thin", value: 0.0 });
        }
        if self.n_chains == 0 {
            return Err(Error::InvalidParameter { name: "n_chains", value: 0.0 });
        }
        if self.stick_cap == 0 {
            return Err(Error::InvalidParameter { name: "stick_cap", value: 0.0 });
        }
        Ok(())
    }

    /// Number of retained draws per chain.
    pub fn draws_per_chain(&self) -> usize {
        (self.n_iter - self.burn_in) / self.thin
    }

    /// Whether 1-based iteration `iter` is retained.
    pub fn keeps(&self, iter: usize) -> bool {
        iter > self.burn_in && (iter - self.burn_in) % self.thin == 0
    }

    /// Inverse-Wishart degrees of freedom for `r` extracted features.
    pub fn iw_df_for(&self, r: usize) -> f64 {
        self.iw_df.unwrap_or(r as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let h = Hyperparameters::default();
        h.validate().unwrap();
        assert_eq!(h.draws_per_chain(), 500);
        let kept = (1..=h.n_iter).filter(|&i| h.keeps(i)).count();
        assert_eq!(kept, h.draws_per_chain());
    }

    #[test]
    fn retention_count_floors() {
        let h = Hyperparameters { n_iter: 103, burn_in: 10, thin: 7, ..Default::default() };
        let kept = (1..=h.n_iter).filter(|&i| h.keeps(i)).count();
        assert_eq!(kept, 93 / 7);
        assert_eq!(kept, h.draws_per_chain());
    }

    #[test]
    fn rejects_invalid() {
        let h = Hyperparameters { burn_in: 10, n_iter: 10, ..Default::default() };
        assert!(h.validate().is_err());
        let h = Hyperparameters { m: 0.0, ..Default::default() };
        assert!(h.validate().is_err());
        let h = Hyperparameters { thin: 0, ..Default::default() };
        assert!(h.validate().is_err());
        assert!("lasso".parse::<PriorMode>().is_err());
        assert_eq!("global".parse::<PriorMode>().unwrap(), PriorMode::Global);
    }
}
