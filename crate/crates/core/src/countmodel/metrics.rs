//! DIC, point predictions, error scores and the train/test split.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dist::{nb_logpmf, Mixing};
use super::quad::{gauss_hermite, marginal_nbl_pmf_tol};
use super::sampler::PosteriorFit;
use super::Dataset;
use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dic {
    pub dbar: f64,
    pub dhat: f64,
    pub p_d: f64,
    pub dic: f64,
}

pub fn dic_from(deviance_draws: impl IntoIterator<Item = f64>, dhat: f64) -> Dic {
    let (mut sum, mut n) = (0.0, 0usize);
    for d in deviance_draws {
        sum += d;
        n += 1;
    }
    let dbar = sum / n as f64;
    let p_d = dbar - dhat;
    Dic {
        dbar,
        dhat,
        p_d,
        dic: dbar + p_d,
    }
}

/// Conditional DIC of a fit on its training data.
pub fn dic(fit: &PosteriorFit) -> Dic {
    dic_from(fit.deviance_draws(), fit.deviance_at_mean)
}

/// Settings for [`marginal_dic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarginalDicConfig {
    /// Posterior draws used, evenly spaced over the pooled chains.
    pub max_draws: usize,
    /// Gauss–Hermite nodes per random parameter.
    pub hermite_nodes: usize,
    pub tolerance: f64,
}

impl Default for MarginalDicConfig {
    fn default() -> Self {
        Self {
            max_draws: 200,
            hermite_nodes: 12,
            tolerance: 1e-10,
        }
    }
}

struct Design {
    /// `K × (fixed + random)` covariates in parameter order.
    x: Vec<f64>,
    nf: usize,
    nr: usize,
}

impl Design {
    fn new(fit: &PosteriorFit, data: &Dataset) -> Result<Self> {
        let covs: Vec<usize> = fit
            .spec
            .covariates()
            .map(|n| {
                data.column_index(n)
                    .ok_or_else(|| Error::ModelSpec(alloc::format!("unknown covariate {n:?}")))
            })
            .collect::<Result<_>>()?;
        let mut x = Vec::with_capacity(data.len() * covs.len());
        for k in 0..data.len() {
            x.extend(covs.iter().map(|&c| data.x(k, c)));
        }
        Ok(Self {
            x,
            nf: fit.spec.fixed.len(),
            nr: fit.spec.random.len(),
        })
    }

    fn row(&self, k: usize) -> &[f64] {
        let p = self.nf + self.nr;
        &self.x[k * p..(k + 1) * p]
    }

    fn eta(&self, k: usize, beta: &[f64]) -> f64 {
        beta[0]
            + self
                .row(k)
                .iter()
                .zip(&beta[1..])
                .map(|(x, b)| x * b)
                .sum::<f64>()
    }
}

/// `ln p(y | μ, σ, φ, ψ)` with `δ`, `z` and the random deviations integrated
/// out, where `μ = λ E[δ]` excludes the random deviations.
#[allow(clippy::too_many_arguments)]
fn marginal_ln_lik(
    y: u64,
    mu: f64,
    x_random: &[f64],
    sigma: &[f64],
    phi: f64,
    psi: Option<f64>,
    mixing: Mixing,
    gh: &(Vec<f64>, Vec<f64>),
    tol: f64,
) -> Result<f64> {
    let pmf = |lambda_mu: f64| -> Result<f64> {
        match psi {
            Some(psi) => {
                marginal_nbl_pmf_tol(y, lambda_mu / mixing.mean(psi), phi, psi, mixing, tol)
            }
            None => Ok(math::exp(nb_logpmf(y, lambda_mu, phi)?)),
        }
    };
    let r = x_random.len();
    if r == 0 {
        return Ok(math::log(pmf(mu)?));
    }
    let (nodes, weights) = gh;
    let n = nodes.len();
    let norm = math::pow(core::f64::consts::PI, -0.5 * r as f64);
    let mut total = 0.0;
    let mut idx = alloc::vec![0usize; r];
    loop {
        let mut w = norm;
        let mut shift = 0.0;
        for l in 0..r {
            w *= weights[idx[l]];
            shift += core::f64::consts::SQRT_2 * sigma[l] * nodes[idx[l]] * x_random[l];
        }
        total += w * pmf(mu * math::exp(shift))?;
        let mut l = 0;
        loop {
            if l == r {
                return Ok(math::log(total));
            }
            idx[l] += 1;
            if idx[l] < n {
                break;
            }
            idx[l] = 0;
            l += 1;
        }
    }
}

/// DIC with `δ`, `z` and the random deviations integrated out.
///
/// `δ` is integrated by adaptive quadrature and the random deviations by
/// Gauss–Hermite. The plug-in point uses the posterior means of each
/// observation's `μ_k = exp(x_k β) E[δ | ψ]`, of `σ`, `φ` and `ψ`.
pub fn marginal_dic(fit: &PosteriorFit, data: &Dataset, cfg: &MarginalDicConfig) -> Result<Dic> {
    let design = Design::new(fit, data)?;
    let (nf, nr) = (design.nf, design.nr);
    let n_beta = 1 + nf + nr;
    let phi_at = n_beta + nr;
    let lindley = fit.spec.variant.has_lindley();
    let mixing = fit.spec.mixing();
    let gh = gauss_hermite(cfg.hermite_nodes.max(1));
    let draws: Vec<&[f64]> = fit.draws().collect();
    if draws.is_empty() {
        return Err(Error::InsufficientData("no posterior draws".into()));
    }
    let stride = draws.len().div_ceil(cfg.max_draws.max(1));
    let used: Vec<&[f64]> = draws.into_iter().step_by(stride).collect();
    let k = data.len();
    let mut mu_bar = alloc::vec![0.0; k];
    let mut par_bar = alloc::vec![0.0; nr + 2];
    let mut deviances = Vec::with_capacity(used.len());
    for d in &used {
        let psi = lindley.then(|| d[phi_at + 1]);
        let e_delta = psi.map_or(1.0, |p| mixing.mean(p));
        let sigma = &d[n_beta..phi_at];
        let mut ll = 0.0;
        for i in 0..k {
            let mu = math::exp(design.eta(i, &d[..n_beta])) * e_delta;
            mu_bar[i] += mu;
            ll += marginal_ln_lik(
                data.y[i],
                mu,
                &design.row(i)[nf..],
                sigma,
                d[phi_at],
                psi,
                mixing,
                &gh,
                cfg.tolerance,
            )?;
        }
        deviances.push(-2.0 * ll);
        for (b, v) in par_bar.iter_mut().zip(&d[n_beta..]) {
            *b += v;
        }
    }
    let n = used.len() as f64;
    mu_bar
        .iter_mut()
        .chain(par_bar.iter_mut())
        .for_each(|v| *v /= n);
    let sigma = &par_bar[..nr];
    let psi = lindley.then(|| par_bar[nr + 1]);
    let mut ll = 0.0;
    for i in 0..k {
        ll += marginal_ln_lik(
            data.y[i],
            mu_bar[i],
            &design.row(i)[nf..],
            sigma,
            par_bar[nr],
            psi,
            mixing,
            &gh,
            cfg.tolerance,
        )?;
    }
    Ok(dic_from(deviances, -2.0 * ll))
}

pub fn mae_rmse(y: &[f64], yhat: &[f64]) -> (f64, f64) {
    let n = y.len().min(yhat.len());
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let (mut a, mut s) = (0.0, 0.0);
    for (o, p) in y.iter().zip(yhat) {
        let e = o - p;
        a += e.abs();
        s += e * e;
    }
    (a / n as f64, math::sqrt(s / n as f64))
}

/// Posterior mean of `E[Y] = λ E[δ | ψ]` for each row of `data`, with random
/// deviations integrated analytically.
pub fn predict_mean(fit: &PosteriorFit, data: &Dataset) -> Result<Vec<f64>> {
    let covs: Vec<usize> = fit
        .spec
        .covariates()
        .map(|n| {
            data.column_index(n)
                .ok_or_else(|| Error::ModelSpec(alloc::format!("unknown covariate {n:?}")))
        })
        .collect::<Result<_>>()?;
    let nf = fit.spec.fixed.len();
    let nr = fit.spec.random.len();
    let phi_at = 1 + nf + 2 * nr;
    let mixing = fit.spec.mixing();
    let lindley = fit.spec.variant.has_lindley();
    let mut out = alloc::vec![0.0; data.len()];
    let n = fit.n_draws() as f64;
    for d in fit.draws() {
        let e_delta = if lindley {
            mixing.mean(d[phi_at + 1])
        } else {
            1.0
        };
        for (k, o) in out.iter_mut().enumerate() {
            let mut eta = d[0];
            for (j, &c) in covs.iter().enumerate() {
                eta += d[1 + j] * data.x(k, c);
            }
            for l in 0..nr {
                let s = d[1 + nf + nr + l] * data.x(k, covs[nf + l]);
                eta += 0.5 * s * s;
            }
            *o += math::exp(eta) * e_delta / n;
        }
    }
    Ok(out)
}

/// Seeded uniform split into `⌈0.8K⌉` training and `⌊0.2K⌋` test indices, each sorted.
pub fn split_80_20(k: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    split_train_test(k, 0.8, seed)
}

/// As [`split_80_20`] with `⌈fK⌉` training indices.
pub fn split_train_test(
    k: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if k < 10 {
        return Err(Error::InsufficientData(alloc::format!(
            "{k} observations, need at least 10"
        )));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::OutOfRange {
            what: "train_fraction",
            value: train_fraction,
        });
    }
    let mut idx: Vec<usize> = (0..k).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // exact for 0.8 without float rounding
    let n_train = if train_fraction == 0.8 {
        (4 * k).div_ceil(5)
    } else {
        math::ceil(train_fraction * k as f64 - 1e-9) as usize
    };
    let mut test = idx.split_off(n_train.clamp(1, k - 1));
    idx.sort_unstable();
    test.sort_unstable();
    Ok((idx, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn dic_examples() {
        let d = dic_from([10.0; 5], 10.0);
        assert_eq!(d.dic, 10.0);
        assert_eq!(d.p_d, 0.0);
        let d = dic_from([8.0, 12.0], 9.0);
        assert_eq!((d.dbar, d.p_d, d.dic), (10.0, 1.0, 11.0));
    }

    #[test]
    fn error_examples() {
        assert_eq!(mae_rmse(&[3.0, 4.0], &[3.0, 4.0]), (0.0, 0.0));
        assert_eq!(mae_rmse(&[1.0, 1.0], &[0.0, 2.0]), (1.0, 1.0));
        let (m, r) = mae_rmse(&[5.0, 5.0], &[5.0, 3.0]);
        assert_eq!(m, 1.0);
        assert_abs_diff_eq!(r, math::sqrt(2.0), epsilon = 1e-15);
    }

    #[test]
    fn split_sizes() {
        let (a, b) = split_80_20(10, 1).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        let (a, b) = split_80_20(1093, 1).unwrap();
        assert_eq!((a.len(), b.len()), (875, 218));
        assert_eq!(split_80_20(1093, 7).unwrap(), split_80_20(1093, 7).unwrap());
        assert_ne!(split_80_20(1093, 7).unwrap(), split_80_20(1093, 8).unwrap());
        assert!(split_80_20(9, 0).is_err());
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50)) {
            let (y, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let (m, r) = mae_rmse(&y, &p);
            prop_assert!(m >= 0.0);
            prop_assert!(r + 1e-9 >= m);
        }

        #[test]
        fn split_partitions(k in 10usize..400, seed in any::<u64>()) {
            let (a, b) = split_80_20(k, seed).unwrap();
            prop_assert_eq!(a.len(), (4 * k).div_ceil(5));
            prop_assert_eq!(b.len(), k / 5);
            let mut all: Vec<usize> = a.into_iter().chain(b).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..k).collect::<Vec<_>>());
        }
    }
}
