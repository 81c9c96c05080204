//! Run configuration: `key = value` pairs layered as defaults, config file,
//! `DPLSVM_<KEY>` environment variables, then `--set` overrides.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use dplsvm_core::eval::Adjust;
use dplsvm_core::features::{DesignOptions, DynamicMethod};
use dplsvm_core::{Hyperparameters, PriorMode};

use crate::error::{CliError, Result};

#[derive(Clone, Copy)]
enum Kind {
    Float,
    Count,
    Seed,
    Bool,
    FloatList,
    CountList,
    Choice(&'static [&'static str]),
    /// A float, or `auto`/`none`.
    OptFloat(&'static str),
}

struct Key {
    name: &'static str,
    default: &'static str,
    kind: Kind,
    help: &'static str,
}

const PRIOR_MODES: &[&str] = &["dp", "global", "independent"];

const KEYS: &[Key] = &[
    // Sampler.
    Key { name: "a1", default: "1", kind: Kind::Float, help: "inverse-gamma shape of sigma_eps^2" },
    Key { name: "b1", default: "1", kind: Kind::Float, help: "inverse-gamma scale of sigma_eps^2" },
    Key { name: "m", default: "1", kind: Kind::Float, help: "Dirichlet-process precision" },
    Key { name: "r", default: "1", kind: Kind::Float, help: "gamma shape of the shrinkage base measure" },
    Key { name: "delta", default: "1", kind: Kind::Float, help: "gamma rate of the shrinkage base measure" },
    Key { name: "prior_mode", default: "dp", kind: Kind::Choice(PRIOR_MODES), help: "dp, global or independent" },
    Key { name: "a_lambda", default: "0.1", kind: Kind::Float, help: "independent mode: gamma shape" },
    Key { name: "b_lambda", default: "0.1", kind: Kind::Float, help: "independent mode: gamma rate" },
    Key { name: "n_iter", default: "5000", kind: Kind::Count, help: "sweeps per chain" },
    Key { name: "burn_in", default: "2500", kind: Kind::Count, help: "discarded sweeps per chain" },
    Key { name: "thin", default: "5", kind: Kind::Count, help: "keep every thin-th sweep after burn-in" },
    Key { name: "seed", default: "1", kind: Kind::Seed, help: "root seed for every random stream" },
    Key { name: "n_chains", default: "2", kind: Kind::Count, help: "independent chains" },
    Key { name: "iw_df", default: "auto", kind: Kind::OptFloat("auto"), help: "inverse-Wishart df for Sigma_eta (auto = R)" },
    Key { name: "c", default: "1", kind: Kind::Float, help: "inverse-gamma shape of d*" },
    Key { name: "d", default: "1", kind: Kind::Float, help: "inverse-gamma scale of d*" },
    Key { name: "gamma_prior_var", default: "100", kind: Kind::Float, help: "prior variance of covariate effects (dynamic)" },
    Key { name: "stick_cap", default: "512", kind: Kind::Count, help: "maximum represented stick-breaking components" },
    // Networks.
    Key { name: "density", default: "0.2", kind: Kind::Float, help: "target network density" },
    Key { name: "density_grid", default: "0.12,0.15,0.2,0.25", kind: Kind::FloatList, help: "densities tried by evaluate --select density" },
    Key { name: "lambda_points", default: "20", kind: Kind::Count, help: "log-spaced glasso penalties per subject" },
    Key { name: "glasso_tol", default: "1e-6", kind: Kind::Float, help: "glasso convergence tolerance" },
    Key { name: "glasso_max_iter", default: "500", kind: Kind::Count, help: "glasso sweep limit" },
    Key { name: "window", default: "30", kind: Kind::Count, help: "sliding-window length (scan units)" },
    Key { name: "window_grid", default: "20,30,40", kind: Kind::CountList, help: "window lengths tried by evaluate --select window" },
    Key { name: "zeta", default: "none", kind: Kind::OptFloat("none"), help: "label the top/bottom zeta fraction of a score column" },
    // Features.
    Key { name: "sd_threshold", default: "0.01", kind: Kind::Float, help: "edge screening threshold" },
    Key { name: "standardize", default: "true", kind: Kind::Bool, help: "z-score design columns on training rows" },
    Key { name: "include_covariates", default: "true", kind: Kind::Bool, help: "append covariates to the design" },
    Key { name: "intercept", default: "false", kind: Kind::Bool, help: "append an all-ones column" },
    Key { name: "feature_method", default: "manual", kind: Kind::Choice(&["manual", "pca"]), help: "dynamic features: manual or pca" },
    Key { name: "variance_target", default: "0.95", kind: Kind::Float, help: "pca: explained-variance target" },
    // Inference.
    Key { name: "alpha", default: "0.05", kind: Kind::Float, help: "credible-interval level" },
    Key { name: "adjust", default: "none", kind: Kind::Choice(&["none", "bonferroni"]), help: "multiplicity adjustment" },
    Key { name: "n_splits", default: "10", kind: Kind::Count, help: "reproducibility splits" },
    Key { name: "test_fraction", default: "0.1", kind: Kind::Float, help: "held-out share per reproducibility split" },
    Key { name: "validation_fraction", default: "0.2", kind: Kind::Float, help: "validation share for evaluate --select" },
    // Synthetic data.
    Key { name: "synth_n", default: "200", kind: Kind::Count, help: "subjects" },
    Key { name: "synth_q", default: "100", kind: Kind::Count, help: "edges (static/dynamic)" },
    Key { name: "synth_c", default: "0", kind: Kind::Count, help: "covariates" },
    Key { name: "synth_strong", default: "2", kind: Kind::Float, help: "magnitude of the 5 strong signals" },
    Key { name: "synth_weak", default: "1", kind: Kind::Float, help: "magnitude of the 5 weak signals" },
    Key { name: "synth_bayes_error", default: "0.05", kind: Kind::Float, help: "target Bayes error (margin noise)" },
    Key { name: "synth_eta", default: "1,-0.5", kind: Kind::FloatList, help: "dynamic: true eta" },
    Key { name: "synth_len", default: "20", kind: Kind::Count, help: "dynamic: series length" },
    Key { name: "synth_v", default: "10", kind: Kind::Count, help: "scans: regions" },
    Key { name: "synth_t", default: "200", kind: Kind::Count, help: "scans: time points" },
    Key { name: "synth_signal_edges", default: "3", kind: Kind::Count, help: "scans: label-dependent chain edges" },
    Key { name: "synth_effect", default: "0.2", kind: Kind::Float, help: "scans: precision shift per unit score" },
    Key { name: "synth_label_noise", default: "0.3", kind: Kind::Float, help: "scans: label noise sd" },
    // Diagnostics.
    Key { name: "geweke_samples", default: "50000", kind: Kind::Count, help: "Geweke sweeps per model" },
    Key { name: "delta_p", default: "50", kind: Kind::Count, help: "prior-delta check: coefficient count" },
    Key { name: "delta_sweeps", default: "20000", kind: Kind::Count, help: "prior-delta check: sweeps" },
    // Runtime.
    Key { name: "threads", default: "1", kind: Kind::Count, help: "worker threads for chains and subjects" },
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<&'static str, String>,
}

fn lookup(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

fn check(key: &Key, value: &str) -> std::result::Result<(), String> {
    let bad = |what: &str| Err(format!("`{}` expects {what}, got `{value}`", key.name));
    match key.kind {
        Kind::Float => match value.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(()),
            _ => bad("a finite number"),
        },
        Kind::Count => value.parse::<usize>().map(|_| ()).or_else(|_| bad("a non-negative integer")),
        Kind::Seed => value.parse::<u64>().map(|_| ()).or_else(|_| bad("an unsigned integer")),
        Kind::Bool => match value {
            "true" | "false" => Ok(()),
            _ => bad("true or false"),
        },
        Kind::FloatList => {
            if !value.is_empty() && value.split(',').all(|v| v.trim().parse::<f64>().is_ok_and(f64::is_finite)) {
                Ok(())
            } else {
                bad("a comma-separated list of numbers")
            }
        }
        Kind::CountList => {
            if !value.is_empty() && value.split(',').all(|v| v.trim().parse::<usize>().is_ok()) {
                Ok(())
            } else {
                bad("a comma-separated list of integers")
            }
        }
        Kind::Choice(options) => {
            if options.contains(&value) {
                Ok(())
            } else {
                bad(&options.join(" | "))
            }
        }
        Kind::OptFloat(word) => {
            if value == word || value.parse::<f64>().is_ok_and(f64::is_finite) {
                Ok(())
            } else {
                bad(&format!("a number or `{word}`"))
            }
        }
    }
}

fn split_pair(pair: &str) -> Option<(&str, &str)> {
    let (k, v) = pair.split_once('=')?;
    Some((k.trim(), v.trim()))
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { values: KEYS.iter().map(|k| (k.name, k.default.to_string())).collect() }
    }
}

impl RunConfig {
    /// Resolves the configuration from all sources.
    pub fn resolve(file: Option<&Path>, env: &[(String, String)], sets: &[String]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            for (n, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = split_pair(line)
                    .ok_or_else(|| CliError::usage(format!("{}:{}: expected key = value", path.display(), n + 1)))?;
                cfg.set(k, v).map_err(|e| CliError::usage(format!("{}:{}: {}", path.display(), n + 1, e.message)))?;
            }
        }
        for (name, value) in env {
            if let Some(key) = name.strip_prefix("DPLSVM_") {
                cfg.set(&key.to_ascii_lowercase(), value)
                    .map_err(|e| CliError::usage(format!("environment {name}: {}", e.message)))?;
            }
        }
        for pair in sets {
            let (k, v) = split_pair(pair).ok_or_else(|| CliError::usage(format!("--set expects key=value, got `{pair}`")))?;
            cfg.set(k, v)?;
        }
        cfg.hyperparameters()?.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, name: &str, value: &str) -> Result<()> {
        let key = lookup(name).ok_or_else(|| CliError::usage(format!("unknown config key `{name}`")))?;
        check(key, value).map_err(CliError::usage)?;
        self.values.insert(key.name, value.to_string());
        Ok(())
    }

    fn raw(&self, name: &str) -> &str {
        self.values.get(name).map(String::as_str).unwrap_or_else(|| panic!("no config key `{name}`"))
    }

    pub fn f64(&self, name: &str) -> f64 {
        self.raw(name).parse().expect("validated")
    }

    pub fn usize(&self, name: &str) -> usize {
        self.raw(name).parse().expect("validated")
    }

    pub fn bool(&self, name: &str) -> bool {
        self.raw(name) == "true"
    }

    pub fn str(&self, name: &str) -> &str {
        self.raw(name)
    }

    pub fn f64_list(&self, name: &str) -> Vec<f64> {
        self.raw(name).split(',').map(|v| v.trim().parse().expect("validated")).collect()
    }

    pub fn usize_list(&self, name: &str) -> Vec<usize> {
        self.raw(name).split(',').map(|v| v.trim().parse().expect("validated")).collect()
    }

    pub fn opt_f64(&self, name: &str) -> Option<f64> {
        self.raw(name).parse().ok()
    }

    pub fn seed(&self) -> u64 {
        self.raw("seed").parse().expect("validated")
    }

    pub fn hyperparameters(&self) -> Result<Hyperparameters> {
        Ok(Hyperparameters {
            a1: self.f64("a1"),
            b1: self.f64("b1"),
            m: self.f64("m"),
            r: self.f64("r"),
            delta: self.f64("delta"),
            prior_mode: PriorMode::from_str(self.str("prior_mode"))?,
            a_lambda: self.f64("a_lambda"),
            b_lambda: self.f64("b_lambda"),
            n_iter: self.usize("n_iter"),
            burn_in: self.usize("burn_in"),
            thin: self.usize("thin"),
            seed: self.seed(),
            n_chains: self.usize("n_chains"),
            iw_df: self.opt_f64("iw_df"),
            c: self.f64("c"),
            d: self.f64("d"),
            gamma_prior_var: self.f64("gamma_prior_var"),
            stick_cap: self.usize("stick_cap"),
        })
    }

    pub fn design_options(&self) -> DesignOptions {
        DesignOptions {
            include_covariates: self.bool("include_covariates"),
            intercept: self.bool("intercept"),
            standardize: self.bool("standardize"),
        }
    }

    pub fn adjust(&self) -> Adjust {
        match self.str("adjust") {
            "bonferroni" => Adjust::Bonferroni,
            _ => Adjust::None,
        }
    }

    pub fn feature_method(&self) -> DynamicMethod {
        match self.str("feature_method") {
            "pca" => DynamicMethod::Pca,
            _ => DynamicMethod::Manual,
        }
    }

    /// Every key with its resolved value, one `key = value` per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            out.push_str(&format!("{} = {}\n", key.name, self.raw(key.name)));
        }
        out
    }

    /// Key listing for `--help` style output.
    pub fn describe() -> String {
        let width = KEYS.iter().map(|k| k.name.len()).max().unwrap_or(0);
        KEYS.iter()
            .map(|k| format!("  {:width$}  {:<20}  {}\n", k.name, k.default, k.help))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layering_and_rejection() {
        let env = vec![("DPLSVM_SEED".to_string(), "7".to_string()), ("PATH".to_string(), "/bin".to_string())];
        let cfg = RunConfig::resolve(None, &env, &["n_iter=10".into(), "burn_in = 2".into()]).unwrap();
        assert_eq!(cfg.seed(), 7);
        assert_eq!(cfg.usize("n_iter"), 10);
        assert_eq!(cfg.usize("burn_in"), 2);
        assert!(RunConfig::resolve(None, &[], &["nope=1".into()]).is_err());
        assert!(RunConfig::resolve(None, &[], &["alpha=abc".into()]).is_err());
        assert!(RunConfig::resolve(None, &[], &["prior_mode=lasso".into()]).is_err());
        assert!(RunConfig::resolve(None, &[("DPLSVM_BOGUS".into(), "1".into())], &[]).is_err());
        // Hyperparameter consistency is checked up front.
        assert!(RunConfig::resolve(None, &[], &["n_iter=10".into()]).is_err());
    }

    #[test]
    fn render_round_trips() {
        let cfg = RunConfig::resolve(None, &[], &["m=2.5".into(), "density_grid=0.1,0.3".into()]).unwrap();
        let dir = std::env::temp_dir().join(format!("dplsvm-config-{}", std::process::id()));
        std::fs::write(&dir, cfg.render()).unwrap();
        let back = RunConfig::resolve(Some(&dir), &[], &[]).unwrap();
        std::fs::remove_file(&dir).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.f64_list("density_grid"), vec![0.1, 0.3]);
    }
}
