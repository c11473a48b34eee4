//! Synthetic data drawn from the random-parameter NB–Lindley generative model.

use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dist::Mixing;
use super::sampler::{sample_delta, sample_nb};
use super::Dataset;
use crate::math;
use crate::{Error, Result};

/// Generating parameters. Covariates `x1..xp` are iid standard normal;
/// `sigma[l] = 0` makes covariate `l` fixed. `psi = None` disables the
/// Lindley effect (`δ = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueParams {
    /// Intercept followed by one coefficient per covariate.
    pub beta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub phi: f64,
    pub psi: Option<f64>,
    #[serde(default)]
    pub mixing: Mixing,
}

impl TrueParams {
    /// One random slope at the magnitudes used for the recovery study.
    pub fn rpnbl_example() -> Self {
        Self {
            beta: alloc::vec![-1.7, 1.0],
            sigma: alloc::vec![0.1],
            phi: 1.0,
            psi: Some(1.7),
            mixing: Mixing::Exact,
        }
    }

    pub fn n_covariates(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn names(&self) -> Vec<String> {
        (1..=self.n_covariates())
            .map(|i| alloc::format!("x{i}"))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.beta.is_empty() || self.sigma.len() + 1 != self.beta.len() {
            return Err(Error::Invalid(
                "need one sigma per covariate after the intercept".into(),
            ));
        }
        if self.beta.iter().chain(&self.sigma).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("true parameter"));
        }
        if let Some(s) = self.sigma.iter().find(|s| **s < 0.0) {
            return Err(Error::OutOfRange {
                what: "sigma",
                value: *s,
            });
        }
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return Err(Error::OutOfRange {
                what: "phi",
                value: self.phi,
            });
        }
        if let Some(psi) = self.psi {
            if !(psi > 0.0 && psi.is_finite()) {
                return Err(Error::OutOfRange {
                    what: "psi",
                    value: psi,
                });
            }
        }
        Ok(())
    }
}

/// Draws `k` observations: covariates, then `v`, `z`, `δ` and finally `Y`.
pub fn simulate_rpnbl(truth: &TrueParams, k: usize, seed: u64) -> Result<Dataset> {
    truth.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = truth.n_covariates();
    let mut rows = Vec::with_capacity(k);
    let mut y = Vec::with_capacity(k);
    for _ in 0..k {
        let x: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut eta = truth.beta[0];
        for l in 0..p {
            let v: f64 = StandardNormal.sample(&mut rng);
            eta += (truth.beta[l + 1] + truth.sigma[l] * v) * x[l];
        }
        let delta = match truth.psi {
            Some(psi) => sample_delta(&mut rng, psi, truth.mixing).0,
            None => 1.0,
        };
        let theta = math::exp(eta) * delta;
        y.push(if theta > 0.0 {
            sample_nb(&mut rng, theta, truth.phi)
        } else {
            0
        });
        rows.push(x);
    }
    Dataset::new(truth.names(), y, rows)
}
