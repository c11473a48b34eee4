//! Negative binomial, NB–Lindley and random-parameter NB–Lindley count
//! regressions fit by Metropolis-within-Gibbs.

pub mod diag;
pub mod dist;
pub mod metrics;
pub mod quad;
pub mod sampler;
pub mod simulate;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use dist::{lindley_logpdf, lindley_mean, nb_logpmf, Mixing};
pub use metrics::{
    dic, dic_from, mae_rmse, marginal_dic, predict_mean, split_80_20, split_train_test, Dic,
    MarginalDicConfig,
};
pub use quad::marginal_nbl_pmf;
pub use sampler::{
    assemble, fit, fit_prepared_with, prepare, run_chain, ChainDraws, ChainRunner, PosteriorFit,
    Prepared,
};
pub use simulate::{simulate_rpnbl, TrueParams};

/// Response counts with a named covariate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub y: Vec<u64>,
    /// Row-major, `y.len() × names.len()`.
    x: Vec<f64>,
}

impl Dataset {
    pub fn new(names: Vec<String>, y: Vec<u64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != y.len() {
            return Err(Error::Invalid(alloc::format!(
                "{} rows for {} responses",
                rows.len(),
                y.len()
            )));
        }
        let p = names.len();
        let mut x = Vec::with_capacity(rows.len() * p);
        for (k, r) in rows.into_iter().enumerate() {
            if r.len() != p {
                return Err(Error::Invalid(alloc::format!(
                    "row {k} has {} values, expected {p}",
                    r.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("covariate"));
            }
            x.extend(r);
        }
        Ok(Self { names, y, x })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn x(&self, k: usize, j: usize) -> f64 {
        self.x[k * self.names.len() + j]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let p = self.names.len();
        &self.x[k * p..(k + 1) * p]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|k| self.x(k, j)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let p = self.names.len();
        let mut x = Vec::with_capacity(idx.len() * p);
        for &k in idx {
            x.extend_from_slice(self.row(k));
        }
        Self {
            names: self.names.clone(),
            y: idx.iter().map(|&k| self.y[k]).collect(),
            x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "NB")]
    Nb,
    #[serde(rename = "NBL")]
    Nbl,
    #[serde(rename = "RPNBL")]
    Rpnbl,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Nb, Variant::Nbl, Variant::Rpnbl];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Nb => "NB",
            Variant::Nbl => "NBL",
            Variant::Rpnbl => "RPNBL",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s
            .trim()
            .to_ascii_uppercase()
            .replace(['-', '_', ' '], "")
            .as_str()
        {
            "NB" => Some(Variant::Nb),
            "NBL" | "NBLINDLEY" => Some(Variant::Nbl),
            "RPNBL" | "RPNBLINDLEY" => Some(Variant::Rpnbl),
            _ => None,
        }
    }

    pub fn has_lindley(self) -> bool {
        !matches!(self, Variant::Nb)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Priors {
    /// Normal(0, beta_sd²) on every regression coefficient.
    pub beta_sd: f64,
    /// Half-normal scale on random-parameter standard deviations.
    pub sigma_scale: f64,
    pub phi_shape: f64,
    pub phi_rate: f64,
    pub psi_shape: f64,
    pub psi_rate: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            beta_sd: 10.0,
            sigma_scale: 1.0,
            phi_shape: 0.5,
            phi_rate: 0.05,
            psi_shape: 0.5,
            psi_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    /// Covariates with a single coefficient.
    #[serde(default)]
    pub fixed: Vec<String>,
    /// Covariates whose coefficient varies across observations.
    #[serde(default)]
    pub random: Vec<String>,
    #[serde(default)]
    pub priors: Priors,
    #[serde(default)]
    pub literal_eq11: bool,
}

impl ModelSpec {
    pub fn new(variant: Variant, fixed: Vec<String>, random: Vec<String>) -> Self {
        Self {
            variant,
            fixed,
            random,
            priors: Priors::default(),
            literal_eq11: false,
        }
    }

    pub fn intercept_only(variant: Variant) -> Self {
        Self::new(variant, Vec::new(), Vec::new())
    }

    pub fn mixing(&self) -> Mixing {
        Mixing::from_literal_flag(self.literal_eq11)
    }

    pub fn validate(&self) -> Result<()> {
        match self.variant {
            Variant::Rpnbl if self.random.is_empty() => {
                return Err(Error::ModelSpec(
                    "RPNBL needs at least one random covariate".into(),
                ));
            }
            Variant::Nb | Variant::Nbl if !self.random.is_empty() => {
                return Err(Error::ModelSpec(alloc::format!(
                    "{} takes no random covariates",
                    self.variant
                )));
            }
            _ => {}
        }
        let mut all: Vec<&String> = self.fixed.iter().chain(&self.random).collect();
        all.sort();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::ModelSpec("covariate listed twice".into()));
        }
        let p = &self.priors;
        for v in [
            p.beta_sd,
            p.sigma_scale,
            p.phi_shape,
            p.phi_rate,
            p.psi_shape,
            p.psi_rate,
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::ModelSpec(
                    "prior hyperparameters must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Covariate names in parameter order: fixed, then random.
    pub fn covariates(&self) -> impl Iterator<Item = &String> {
        self.fixed.iter().chain(&self.random)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub chains: usize,
    pub iterations: usize,
    /// Chains that fail split-R̂ are extended up to this many iterations.
    pub max_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub rhat_threshold: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            chains: 2,
            iterations: 20_000,
            max_iterations: 40_000,
            burn_in: 10_000,
            thin: 1,
            seed: 0,
            target_accept: 0.30,
            rhat_threshold: 1.1,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains < 2 {
            return Err(Error::Invalid("at least 2 chains are required".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Invalid(
                "burn-in must be shorter than the run".into(),
            ));
        }
        if self.max_iterations < self.iterations {
            return Err(Error::Invalid(
                "max_iterations must be at least iterations".into(),
            ));
        }
        if self.thin == 0 {
            return Err(Error::Invalid("thin must be at least 1".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::OutOfRange {
                what: "target_accept",
                value: self.target_accept,
            });
        }
        Ok(())
    }
}
