//! Average marginal effects with Halton integration over random parameters.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::halton::{halton_normal, primes};
use crate::countmodel::{Dataset, PosteriorFit};
use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateKind {
    Continuous,
    Indicator,
}

impl CovariateKind {
    /// Indicator when every value is 0 or 1.
    pub fn infer(column: &[f64]) -> Self {
        if column.iter().all(|&v| v == 0.0 || v == 1.0) {
            CovariateKind::Indicator
        } else {
            CovariateKind::Continuous
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CovariateKind::Continuous => "continuous",
            CovariateKind::Indicator => "indicator",
        }
    }
}

/// Coefficients of `λ = exp(βᵀx)` with normal random parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmeModel {
    /// Covariates in parameter order: fixed, then random.
    pub names: Vec<String>,
    /// Intercept, then one coefficient (mean) per name.
    pub beta: Vec<f64>,
    /// Standard deviation of each random coefficient.
    pub sigma: Vec<f64>,
}

impl AmeModel {
    fn n_fixed(&self) -> usize {
        self.names.len() - self.sigma.len()
    }

    fn from_values(fit: &PosteriorFit, v: &[f64]) -> Self {
        let names: Vec<String> = fit.spec.covariates().cloned().collect();
        let nb = 1 + names.len();
        let nr = fit.spec.random.len();
        Self {
            beta: v[..nb].to_vec(),
            sigma: v[nb..nb + nr].to_vec(),
            names,
        }
    }

    /// Posterior means.
    pub fn from_fit(fit: &PosteriorFit) -> Self {
        let means: Vec<f64> = fit.summary.iter().map(|s| s.mean).collect();
        Self::from_values(fit, &means)
    }

    pub fn from_draw(fit: &PosteriorFit, draw: &[f64]) -> Self {
        Self::from_values(fit, draw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmeConfig {
    pub draws: usize,
    pub skip: usize,
    /// Average over posterior draws as well as over the random parameters.
    pub full_posterior: bool,
    /// Posterior draws used when `full_posterior` is set.
    pub posterior_draws: usize,
}

impl Default for AmeConfig {
    fn default() -> Self {
        Self {
            draws: 200,
            skip: 20,
            full_posterior: false,
            posterior_draws: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmeRow {
    pub variable: String,
    pub ame: f64,
    pub kind: CovariateKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    pub rows: Vec<AmeRow>,
    /// Per covariate (same order as `rows`), the effect at each observation.
    pub per_observation: Vec<Vec<f64>>,
    pub draws: usize,
    pub primes: Vec<u64>,
    pub full_posterior: bool,
}

/// Per-observation effects of every covariate in `model`.
fn effects_for(
    model: &AmeModel,
    x: &[Vec<f64>],
    kinds: &[CovariateKind],
    normals: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let p = model.names.len();
    let nf = model.n_fixed();
    let k = x.first().map_or(0, Vec::len);
    // coefficient vectors, one per Halton point
    let coefs: Vec<Vec<f64>> = if model.sigma.is_empty() {
        alloc::vec![model.beta.clone()]
    } else {
        normals
            .iter()
            .map(|z| {
                let mut b = model.beta.clone();
                for (l, s) in model.sigma.iter().enumerate() {
                    b[1 + nf + l] += s * z[l];
                }
                b
            })
            .collect()
    };
    let r = coefs.len() as f64;
    let mut out = alloc::vec![alloc::vec![0.0; k]; p];
    for i in 0..k {
        for b in &coefs {
            let eta = b[0] + (0..p).map(|j| b[1 + j] * x[j][i]).sum::<f64>();
            for l in 0..p {
                let e = match kinds[l] {
                    CovariateKind::Continuous => math::exp(eta) * b[1 + l],
                    CovariateKind::Indicator => {
                        let base = eta - b[1 + l] * x[l][i];
                        math::exp(base + b[1 + l]) - math::exp(base)
                    }
                };
                out[l][i] += e / r;
            }
        }
    }
    out
}

/// AMEs of `model` on `data`, integrating random parameters with `cfg.draws`
/// Halton points.
pub fn ame_for_model(
    model: &AmeModel,
    data: &Dataset,
    kinds: &BTreeMap<String, CovariateKind>,
    cfg: &AmeConfig,
) -> Result<EffectReport> {
    ame_for_models(core::slice::from_ref(model), data, kinds, cfg)
}

/// AMEs averaged over several coefficient sets (posterior draws).
pub fn ame_for_models(
    models: &[AmeModel],
    data: &Dataset,
    kinds: &BTreeMap<String, CovariateKind>,
    cfg: &AmeConfig,
) -> Result<EffectReport> {
    let first = models
        .first()
        .ok_or_else(|| Error::InsufficientData("no coefficient sets".into()))?;
    if cfg.draws == 0 {
        return Err(Error::Invalid(
            "at least one Halton draw is required".into(),
        ));
    }
    let mut x = Vec::new();
    let mut ks = Vec::new();
    for n in &first.names {
        let j = data
            .column_index(n)
            .ok_or_else(|| Error::ModelSpec(format!("unknown covariate {n:?}")))?;
        let kind = *kinds
            .get(n)
            .ok_or_else(|| Error::ModelSpec(format!("no type tag for covariate {n:?}")))?;
        x.push(data.column(j));
        ks.push(kind);
    }
    let nr = first.sigma.len();
    let normals = if nr > 0 {
        halton_normal(nr, cfg.draws, cfg.skip)
    } else {
        Vec::new()
    };
    let p = first.names.len();
    let mut per = alloc::vec![alloc::vec![0.0; data.len()]; p];
    for m in models {
        let e = effects_for(m, &x, &ks, &normals);
        for (acc, v) in per.iter_mut().zip(e) {
            for (a, b) in acc.iter_mut().zip(v) {
                *a += b / models.len() as f64;
            }
        }
    }
    let rows = first
        .names
        .iter()
        .zip(&ks)
        .zip(&per)
        .map(|((n, &kind), v)| AmeRow {
            variable: n.clone(),
            ame: if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            },
            kind,
        })
        .collect();
    Ok(EffectReport {
        rows,
        per_observation: per,
        draws: cfg.draws,
        primes: primes(nr),
        full_posterior: models.len() > 1,
    })
}

/// AMEs of a fitted model on (test) data.
pub fn average_marginal_effects(
    fit: &PosteriorFit,
    data: &Dataset,
    kinds: &BTreeMap<String, CovariateKind>,
    cfg: &AmeConfig,
) -> Result<EffectReport> {
    if !cfg.full_posterior {
        return ame_for_models(&[AmeModel::from_fit(fit)], data, kinds, cfg);
    }
    let n = fit.n_draws();
    let stride = n.div_ceil(cfg.posterior_draws.max(1)).max(1);
    let models: Vec<AmeModel> = fit
        .draws()
        .step_by(stride)
        .map(|d| AmeModel::from_draw(fit, d))
        .collect();
    let mut r = ame_for_models(&models, data, kinds, cfg)?;
    r.full_posterior = true;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn model(names: &[&str], beta: Vec<f64>, sigma: Vec<f64>) -> AmeModel {
        AmeModel {
            names: names.iter().map(|s| String::from(*s)).collect(),
            beta,
            sigma,
        }
    }

    fn tags(v: &[(&str, CovariateKind)]) -> BTreeMap<String, CovariateKind> {
        v.iter().map(|(n, k)| (String::from(*n), *k)).collect()
    }

    fn data(names: &[&str], rows: Vec<Vec<f64>>) -> Dataset {
        let y = vec![0; rows.len()];
        Dataset::new(names.iter().map(|s| String::from(*s)).collect(), y, rows).unwrap()
    }

    #[test]
    fn single_observation_examples() {
        // λ = 2 at x = 0 with β = 0.5: ∂λ/∂x = λβ = 1
        let m = model(&["x"], vec![math::log(2.0), 0.5], vec![]);
        let d = data(&["x"], vec![vec![0.0]]);
        let r = ame_for_model(
            &m,
            &d,
            &tags(&[("x", CovariateKind::Continuous)]),
            &AmeConfig::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(r.rows[0].ame, 1.0, epsilon = 1e-12);

        let m = model(&["x"], vec![0.3, 0.0], vec![]);
        let r = ame_for_model(
            &m,
            &d,
            &tags(&[("x", CovariateKind::Continuous)]),
            &AmeConfig::default(),
        )
        .unwrap();
        assert_eq!(r.rows[0].ame, 0.0);

        // indicator with β = ln 2 at baseline λ = 1: 2 − 1
        let m = model(&["d"], vec![0.0, math::log(2.0)], vec![]);
        let d = data(&["d"], vec![vec![0.0]]);
        let r = ame_for_model(
            &m,
            &d,
            &tags(&[("d", CovariateKind::Indicator)]),
            &AmeConfig::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(r.rows[0].ame, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn missing_tag_is_an_error() {
        let m = model(&["x"], vec![0.0, 1.0], vec![]);
        let d = data(&["x"], vec![vec![0.0]]);
        assert!(ame_for_model(&m, &d, &BTreeMap::new(), &AmeConfig::default()).is_err());
    }

    #[test]
    fn zero_sigma_matches_analytic() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i as f64) / 25.0 - 1.0, (i % 3) as f64 * 0.4])
            .collect();
        let d = data(&["a", "b"], rows.clone());
        let m = model(&["a", "b"], vec![-0.5, 0.7, -0.3], vec![0.0]);
        let t = tags(&[
            ("a", CovariateKind::Continuous),
            ("b", CovariateKind::Continuous),
        ]);
        let r = ame_for_model(&m, &d, &t, &AmeConfig::default()).unwrap();
        let lambda_bar = rows
            .iter()
            .map(|x| math::exp(-0.5 + 0.7 * x[0] - 0.3 * x[1]))
            .sum::<f64>()
            / 50.0;
        assert_abs_diff_eq!(r.rows[0].ame, lambda_bar * 0.7, epsilon = 1e-6);
        assert_abs_diff_eq!(r.rows[1].ame, lambda_bar * -0.3, epsilon = 1e-6);
        assert_eq!(r.primes, [2]);
    }

    #[test]
    fn halton_integration_converges() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64) / 20.0 - 1.0]).collect();
        let d = data(&["a"], rows.clone());
        let m = model(&["a"], vec![0.2, 0.6], vec![0.2]);
        let t = tags(&[("a", CovariateKind::Continuous)]);
        let a = ame_for_model(
            &m,
            &d,
            &t,
            &AmeConfig {
                draws: 200,
                ..Default::default()
            },
        )
        .unwrap()
        .rows[0]
            .ame;
        let b = ame_for_model(
            &m,
            &d,
            &t,
            &AmeConfig {
                draws: 2000,
                ..Default::default()
            },
        )
        .unwrap()
        .rows[0]
            .ame;
        assert!((a - b).abs() < 0.01 * b.abs(), "{a} vs {b}");
        // closed form: E[e^{(β+σz)x}(β+σz)] = e^{βx + σ²x²/2}(β + σ²x)
        let exact = rows
            .iter()
            .map(|x| math::exp(0.2 + 0.6 * x[0] + 0.02 * x[0] * x[0]) * (0.6 + 0.04 * x[0]))
            .sum::<f64>()
            / 40.0;
        assert!((b - exact).abs() < 2e-3 * exact, "{b} vs {exact}");
    }

    proptest! {
        #[test]
        fn sign_follows_mean_when_dispersion_small(beta in prop_oneof![-2.0f64..-0.1, 0.1f64..2.0], frac in 0.0f64..0.2, b0 in -2.0f64..2.0) {
            let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64) / 10.0 - 1.0]).collect();
            let d = data(&["a"], rows);
            let m = model(&["a"], vec![b0, beta], vec![frac * beta.abs()]);
            let r = ame_for_model(&m, &d, &tags(&[("a", CovariateKind::Continuous)]), &AmeConfig::default()).unwrap();
            prop_assert_eq!(r.rows[0].ame.signum(), beta.signum());
        }
    }
}
