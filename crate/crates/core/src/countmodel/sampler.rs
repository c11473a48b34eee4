//! Metropolis-within-Gibbs sampler for the three count-model variants.
//!
//! Covariates are rescaled internally (fixed ones centered and scaled, random
//! ones scaled only, so the random-slope model is unchanged). Priors and all
//! reported draws are on the original scale.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::diag::{summarize, ParamSummary};
use super::dist::{nb_ln_norm, Mixing};
use super::{Dataset, McmcConfig, ModelSpec, Priors, Variant};
use crate::math;
use crate::special::ln_gamma;
use crate::stats;
use crate::{Error, Result};

/// Data and spec in the sampler's internal coordinates.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: ModelSpec,
    pub param_names: Vec<String>,
    y: Vec<f64>,
    /// Distinct responses and their multiplicities, for the φ normalizer.
    y_groups: Vec<(f64, f64)>,
    /// Internal columns: fixed first, then random.
    cols: Vec<Vec<f64>>,
    center: Vec<f64>,
    scale: Vec<f64>,
    n_fixed: usize,
    n_random: usize,
    mixing: Mixing,
    ln_norm_y: f64,
}

impl Prepared {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn n_beta(&self) -> usize {
        1 + self.n_fixed + self.n_random
    }

    /// Parameter-vector length: betas, sigmas, φ and (for Lindley variants) ψ.
    pub fn n_params(&self) -> usize {
        self.n_beta() + self.n_random + 1 + usize::from(self.spec.variant.has_lindley())
    }

    fn lindley(&self) -> bool {
        self.spec.variant.has_lindley()
    }
}

pub fn prepare(spec: &ModelSpec, data: &Dataset) -> Result<Prepared> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData("no observations".into()));
    }
    let mut cols = Vec::new();
    let mut center = Vec::new();
    let mut scale = Vec::new();
    for (i, name) in spec.covariates().enumerate() {
        let j = data
            .column_index(name)
            .ok_or_else(|| Error::ModelSpec(alloc::format!("unknown covariate {name:?}")))?;
        let x = data.column(j);
        let random = i >= spec.fixed.len();
        let m = stats::mean(&x);
        let sd = stats::std_dev(&x);
        let (c, s) = if random {
            let s = if sd > 0.0 { sd } else { m.abs() };
            (0.0, s)
        } else {
            (m, sd)
        };
        if !(s > 0.0) {
            return Err(Error::ModelSpec(alloc::format!(
                "covariate {name:?} is constant"
            )));
        }
        cols.push(x.iter().map(|v| (v - c) / s).collect());
        center.push(c);
        scale.push(s);
    }
    let y: Vec<f64> = data.y.iter().map(|&v| v as f64).collect();
    let mut sorted = y.clone();
    sorted.sort_by(f64::total_cmp);
    let mut y_groups: Vec<(f64, f64)> = Vec::new();
    for v in sorted {
        match y_groups.last_mut() {
            Some(g) if g.0 == v => g.1 += 1.0,
            _ => y_groups.push((v, 1.0)),
        }
    }
    let ln_norm_y = y_groups.iter().map(|&(v, n)| n * ln_gamma(v + 1.0)).sum();

    let mut param_names = vec![String::from("(Intercept)")];
    param_names.extend(spec.covariates().cloned());
    param_names.extend(spec.random.iter().map(|r| alloc::format!("sd({r})")));
    param_names.push("phi".into());
    if spec.variant.has_lindley() {
        param_names.push("psi".into());
    }
    Ok(Prepared {
        spec: spec.clone(),
        param_names,
        y,
        y_groups,
        cols,
        center,
        scale,
        n_fixed: spec.fixed.len(),
        n_random: spec.random.len(),
        mixing: spec.mixing(),
        ln_norm_y,
    })
}

/// Random-walk scale tuned toward a target acceptance rate during burn-in.
#[derive(Debug, Clone, Copy)]
struct Step {
    ln_scale: f64,
    accepted: u32,
    tried: u32,
    batches: u32,
}

impl Step {
    fn new(scale: f64) -> Self {
        Self {
            ln_scale: math::log(scale),
            accepted: 0,
            tried: 0,
            batches: 0,
        }
    }

    fn scale(&self) -> f64 {
        math::exp(self.ln_scale)
    }

    fn record(&mut self, ok: bool) {
        self.tried += 1;
        self.accepted += u32::from(ok);
    }

    fn adapt(&mut self, target: f64) {
        if self.tried == 0 {
            return;
        }
        self.batches += 1;
        let rate = self.accepted as f64 / self.tried as f64;
        let gain = (1.0 / math::sqrt(self.batches as f64)).min(0.5);
        self.ln_scale += if rate > target { gain } else { -gain };
        self.ln_scale = self.ln_scale.clamp(-12.0, 4.0);
        self.accepted = 0;
        self.tried = 0;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub name: String,
    pub rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    pub chain: usize,
    /// Row-major, one row of `n_params` per kept iteration.
    pub params: Vec<f64>,
    pub n_params: usize,
    pub deviance: Vec<f64>,
    pub delta_mean: Vec<f64>,
    pub z_mean: Vec<f64>,
    /// Posterior mean of each observation's random deviations, `K × R`, original scale.
    pub v_mean: Vec<f64>,
    /// Posterior mean of each observation's NB mean `θ_k`.
    pub theta_mean: Vec<f64>,
    pub acceptance: Vec<Acceptance>,
}

impl ChainDraws {
    pub fn n_draws(&self) -> usize {
        self.deviance.len()
    }

    pub fn param(&self, i: usize) -> Vec<f64> {
        self.params
            .iter()
            .skip(i)
            .step_by(self.n_params)
            .copied()
            .collect()
    }

    pub fn draw(&self, d: usize) -> &[f64] {
        &self.params[d * self.n_params..(d + 1) * self.n_params]
    }
}

/// `ln(φ + e^l)` without overflow.
#[inline]
fn ln_phi_plus_exp(l: f64, phi: f64, ln_phi: f64) -> f64 {
    if l > ln_phi {
        l + math::log1p(phi * math::exp(-l))
    } else {
        ln_phi + math::log1p(math::exp(l - ln_phi))
    }
}

/// θ-dependent NB log-kernel at `ln θ = l`.
#[inline]
fn kern(y: f64, l: f64, phi: f64, ln_phi: f64) -> f64 {
    y * l - (phi + y) * ln_phi_plus_exp(l, phi, ln_phi) + phi * ln_phi
}

fn ln_gamma_density(x: f64, shape: f64, rate: f64) -> f64 {
    (shape - 1.0) * math::log(x) - rate * x
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn accept(rng: &mut ChaCha8Rng, ln_ratio: f64) -> bool {
    ln_ratio >= 0.0 || (ln_ratio.is_finite() && math::log(rng.random::<f64>()) < ln_ratio)
}

fn gamma_draw(rng: &mut ChaCha8Rng, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .map(|g| g.sample(rng))
        .unwrap_or(0.0)
}

/// One update of a single observation's random effect `δ` given its indicator.
///
/// A gamma proposal matched to the linearized likelihood is followed by a
/// log-scale random walk. Returns the new `(δ, ln δ)` and whether each move
/// was accepted.
#[allow(clippy::too_many_arguments)]
pub(crate) fn update_delta(
    rng: &mut ChaCha8Rng,
    y: f64,
    eta: f64,
    phi: f64,
    ln_phi: f64,
    psi: f64,
    z: bool,
    delta: f64,
    ln_delta: f64,
    kern_now: f64,
    rw_scale: f64,
) -> (f64, f64, f64, bool, bool) {
    let zf = if z { 1.0 } else { 0.0 };
    let prior = |d: f64, ld: f64| zf * ld - psi * d;
    let lambda = math::exp(eta);
    let shape = 1.0 + zf + y;
    let rate_at = |d: f64| psi + lambda * (phi + y) / (phi + lambda * d);
    let ln_q = |x: f64, rate: f64| shape * math::log(rate) + ln_gamma_density(x, shape, rate);

    let mut d = delta;
    let mut ld = ln_delta;
    let mut kn = kern_now;
    let r_fwd = rate_at(d);
    let prop = gamma_draw(rng, shape, r_fwd);
    let mut gamma_ok = false;
    if prop > 0.0 && prop.is_finite() {
        let lp = math::log(prop);
        let kp = kern(y, eta + lp, phi, ln_phi);
        let r_back = rate_at(prop);
        let ratio = prior(prop, lp) + kp - prior(d, ld) - kn + ln_q(d, r_back) - ln_q(prop, r_fwd);
        if accept(rng, ratio) {
            (d, ld, kn) = (prop, lp, kp);
            gamma_ok = true;
        }
    }
    let lp = ld + rw_scale * normal(rng);
    let p = math::exp(lp);
    let mut rw_ok = false;
    if p > 0.0 && p.is_finite() {
        let kp = kern(y, eta + lp, phi, ln_phi);
        let ratio = prior(p, lp) + kp + lp - prior(d, ld) - kn - ld;
        if accept(rng, ratio) {
            (d, ld, kn) = (p, lp, kp);
            rw_ok = true;
        }
    }
    (d, ld, kn, gamma_ok, rw_ok)
}

/// `ln` survival of the mixture at `u = ψδ`: `ln(1 + a u) − u`, `a = P(z = 1)`.
fn ln_survival(u: f64, a: f64) -> f64 {
    math::log1p(a * u) - u
}

/// Maps `δ` drawn under `ψ` to the value with the same mixture CDF under `ψ'`.
pub(crate) fn transport_delta(delta: f64, psi: f64, new_psi: f64, mixing: Mixing) -> f64 {
    let ln_s = ln_survival(psi * delta, mixing.p_shape2(psi));
    let a = mixing.p_shape2(new_psi);
    // h(u) = ln(1+au) − u − ln s is concave and decreasing; Newton from the
    // a = 0 solution overshoots once, then descends monotonically.
    let mut u = -ln_s;
    for _ in 0..100 {
        let h = ln_survival(u, a) - ln_s;
        let step = h / (a / (1.0 + a * u) - 1.0);
        let next = (u - step).max(0.5 * u);
        if (next - u).abs() <= 1e-15 * u.max(f64::MIN_POSITIVE) {
            u = next;
            break;
        }
        u = next;
    }
    u / new_psi
}

/// Negative binomial draw with mean `theta` and dispersion `phi`.
pub fn sample_nb(rng: &mut ChaCha8Rng, theta: f64, phi: f64) -> u64 {
    let rate = gamma_draw(rng, phi, phi / theta);
    if !(rate > 0.0) {
        return 0;
    }
    Poisson::new(rate)
        .map(|p| p.sample(rng) as u64)
        .unwrap_or(0)
}

/// A draw from the indicator/gamma mixture for `δ`.
pub fn sample_delta(rng: &mut ChaCha8Rng, psi: f64, mixing: Mixing) -> (f64, bool) {
    let z = rng.random::<f64>() < mixing.p_shape2(psi);
    (gamma_draw(rng, if z { 2.0 } else { 1.0 }, psi), z)
}

/// Gibbs chain on `(y, z, δ)` at fixed `λ, φ, ψ`, using the sampler's own
/// `δ` and `z` updates. Its `y` marginal is the NB–Lindley pmf.
pub fn predictive_chain(
    lambda: f64,
    phi: f64,
    psi: f64,
    mixing: Mixing,
    n: usize,
    seed: u64,
) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut delta, mut z) = sample_delta(&mut rng, psi, mixing);
    let eta = math::log(lambda);
    let ln_phi = math::log(phi);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let y = sample_nb(&mut rng, lambda * delta, phi);
        out.push(y);
        let ld = math::log(delta);
        let k = kern(y as f64, eta + ld, phi, ln_phi);
        delta = update_delta(
            &mut rng, y as f64, eta, phi, ln_phi, psi, z, delta, ld, k, 1.0,
        )
        .0;
        z = rng.random::<f64>() < mixing.p_shape2_given(delta, psi);
    }
    out
}

struct Chain<'a> {
    p: &'a Prepared,
    priors: Priors,
    rng: ChaCha8Rng,
    /// Internal coefficients: intercept, fixed, random means.
    beta: Vec<f64>,
    /// Internal random-parameter SDs.
    sigma: Vec<f64>,
    /// `K × R` internal deviations.
    v: Vec<f64>,
    delta: Vec<f64>,
    ln_delta: Vec<f64>,
    z: Vec<bool>,
    phi: f64,
    psi: f64,
    /// Linear predictor without `ln δ`.
    eta: Vec<f64>,
    /// Per-observation NB kernel at the current state.
    kern: Vec<f64>,
    steps_beta: Vec<Step>,
    steps_v: Vec<Step>,
    steps_sigma: Vec<Step>,
    steps_sigma_nc: Vec<Step>,
    step_phi: Step,
    step_psi: Step,
    step_shift: Step,
    step_shift_psi: Step,
    step_transport: Step,
    step_delta_rw: Step,
    gamma_acc: (u64, u64),
}

impl<'a> Chain<'a> {
    fn new(p: &'a Prepared, seed: u64, chain: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chain as u64);
        let k = p.len();
        let r = p.n_random;
        let lindley = p.lindley();
        let phi = math::exp(0.5 * normal(&mut rng));
        let psi = if lindley {
            math::exp(0.5 * normal(&mut rng))
        } else {
            1.0
        };
        let mean_delta = if lindley { p.mixing.mean(psi) } else { 1.0 };
        let ybar = stats::mean(&p.y);
        let mut beta = vec![0.0; p.n_beta()];
        beta[0] = math::log(ybar + 0.1) - math::log(mean_delta) + 0.3 * normal(&mut rng);
        let sigma: Vec<f64> = (0..r)
            .map(|_| 0.2 * math::exp(0.3 * normal(&mut rng)))
            .collect();
        let mut c = Chain {
            p,
            priors: p.spec.priors,
            rng,
            beta,
            sigma,
            v: vec![0.0; k * r],
            delta: vec![mean_delta; k],
            ln_delta: vec![math::log(mean_delta); k],
            z: vec![false; k],
            phi,
            psi,
            eta: vec![0.0; k],
            kern: vec![0.0; k],
            steps_beta: vec![Step::new(0.05); p.n_beta()],
            steps_v: vec![Step::new(1.0); r],
            steps_sigma: vec![Step::new(0.1); r],
            steps_sigma_nc: vec![Step::new(0.1); r],
            step_phi: Step::new(0.1),
            step_psi: Step::new(0.1),
            step_shift: Step::new(0.05),
            step_shift_psi: Step::new(0.05),
            step_transport: Step::new(0.3),
            step_delta_rw: Step::new(0.5),
            gamma_acc: (0, 0),
        };
        if lindley {
            for i in 0..k {
                c.z[i] = c.rng.random::<f64>() < p.mixing.p_shape2(psi);
            }
        }
        c.refresh();
        c
    }

    fn refresh(&mut self) {
        let p = self.p;
        let (nf, r) = (p.n_fixed, p.n_random);
        let ln_phi = math::log(self.phi);
        for k in 0..p.len() {
            let mut e = self.beta[0];
            for j in 0..nf + r {
                e += self.beta[1 + j] * p.cols[j][k];
            }
            for l in 0..r {
                e += self.v[k * r + l] * p.cols[nf + l][k];
            }
            self.eta[k] = e;
            self.kern[k] = kern(p.y[k], e + self.ln_delta[k], self.phi, ln_phi);
        }
    }

    /// Original-scale coefficients: intercept, fixed, random means.
    fn beta_original(&self, beta: &[f64]) -> Vec<f64> {
        let p = self.p;
        let mut out = vec![0.0; beta.len()];
        out[0] = beta[0];
        for j in 0..p.n_fixed + p.n_random {
            out[1 + j] = beta[1 + j] / p.scale[j];
            out[0] -= beta[1 + j] * p.center[j] / p.scale[j];
        }
        out
    }

    fn ln_prior_beta(&self, beta: &[f64]) -> f64 {
        let s2 = self.priors.beta_sd * self.priors.beta_sd;
        self.beta_original(beta)
            .iter()
            .map(|b| -0.5 * b * b / s2)
            .sum()
    }

    fn ln_prior_sigma(&self, l: usize, sigma_internal: f64) -> f64 {
        let s = sigma_internal / self.p.scale[self.p.n_fixed + l] / self.priors.sigma_scale;
        -0.5 * s * s
    }

    fn ln_phi_norm(&self, phi: f64) -> f64 {
        self.p
            .y_groups
            .iter()
            .map(|&(y, n)| n * (ln_gamma(y + phi) - ln_gamma(phi)))
            .sum()
    }

    fn update_beta(&mut self) {
        let p = self.p;
        let ln_phi = math::log(self.phi);
        let mut proposed = vec![0.0; p.len()];
        for j in 0..self.beta.len() {
            let step = self.steps_beta[j].scale() * normal(&mut self.rng);
            let mut beta = self.beta.clone();
            beta[j] += step;
            let mut diff = self.ln_prior_beta(&beta) - self.ln_prior_beta(&self.beta);
            for k in 0..p.len() {
                let x = if j == 0 { 1.0 } else { p.cols[j - 1][k] };
                let l = self.eta[k] + step * x + self.ln_delta[k];
                proposed[k] = kern(p.y[k], l, self.phi, ln_phi);
                diff += proposed[k] - self.kern[k];
            }
            let ok = accept(&mut self.rng, diff);
            self.steps_beta[j].record(ok);
            if ok {
                self.beta = beta;
                for k in 0..p.len() {
                    let x = if j == 0 { 1.0 } else { p.cols[j - 1][k] };
                    self.eta[k] += step * x;
                }
                self.kern.copy_from_slice(&proposed);
            }
        }
    }

    fn update_random(&mut self) {
        let p = self.p;
        let (nf, r) = (p.n_fixed, p.n_random);
        let ln_phi = math::log(self.phi);
        for l in 0..r {
            let col = &p.cols[nf + l];
            let sigma = self.sigma[l];
            // per-observation deviations
            let tau = self.steps_v[l].scale() * sigma;
            for k in 0..p.len() {
                let v = self.v[k * r + l];
                let nv = v + tau * normal(&mut self.rng);
                let l_new = self.eta[k] + (nv - v) * col[k] + self.ln_delta[k];
                let kn = kern(p.y[k], l_new, self.phi, ln_phi);
                let ratio = kn - self.kern[k] - 0.5 * (nv * nv - v * v) / (sigma * sigma);
                let ok = accept(&mut self.rng, ratio);
                self.steps_v[l].record(ok);
                if ok {
                    self.v[k * r + l] = nv;
                    self.eta[k] += (nv - v) * col[k];
                    self.kern[k] = kn;
                }
            }
            // σ given deviations
            let ss: f64 = (0..p.len())
                .map(|k| self.v[k * r + l] * self.v[k * r + l])
                .sum();
            let n = p.len() as f64;
            let ln_target = |c: &Self, s: f64| {
                -n * math::log(s) - 0.5 * ss / (s * s) + c.ln_prior_sigma(l, s) + math::log(s)
            };
            let ns = sigma * math::exp(self.steps_sigma[l].scale() * normal(&mut self.rng));
            let ratio = ln_target(self, ns) - ln_target(self, sigma);
            let ok = accept(&mut self.rng, ratio);
            self.steps_sigma[l].record(ok);
            if ok {
                self.sigma[l] = ns;
            }
            // σ and deviations rescaled together
            let sigma = self.sigma[l];
            let eps = self.steps_sigma_nc[l].scale() * normal(&mut self.rng);
            let f = math::exp(eps);
            let ns = sigma * f;
            let mut diff = self.ln_prior_sigma(l, ns) - self.ln_prior_sigma(l, sigma) + eps;
            let mut proposed = vec![0.0; p.len()];
            for k in 0..p.len() {
                let dv = self.v[k * r + l] * (f - 1.0);
                let l_new = self.eta[k] + dv * col[k] + self.ln_delta[k];
                proposed[k] = kern(p.y[k], l_new, self.phi, ln_phi);
                diff += proposed[k] - self.kern[k];
            }
            let ok = accept(&mut self.rng, diff);
            self.steps_sigma_nc[l].record(ok);
            if ok {
                self.sigma[l] = ns;
                for k in 0..p.len() {
                    let dv = self.v[k * r + l] * (f - 1.0);
                    self.v[k * r + l] += dv;
                    self.eta[k] += dv * col[k];
                }
                self.kern.copy_from_slice(&proposed);
            }
        }
    }

    fn update_phi(&mut self) {
        let p = self.p;
        let pr = self.priors;
        let phi = self.phi;
        let np = phi * math::exp(self.step_phi.scale() * normal(&mut self.rng));
        let ln_np = math::log(np);
        let mut proposed = vec![0.0; p.len()];
        let mut diff = self.ln_phi_norm(np) - self.ln_phi_norm(phi)
            + ln_gamma_density(np, pr.phi_shape, pr.phi_rate)
            - ln_gamma_density(phi, pr.phi_shape, pr.phi_rate)
            + ln_np
            - math::log(phi);
        for k in 0..p.len() {
            proposed[k] = kern(p.y[k], self.eta[k] + self.ln_delta[k], np, ln_np);
            diff += proposed[k] - self.kern[k];
        }
        let ok = accept(&mut self.rng, diff);
        self.step_phi.record(ok);
        if ok {
            self.phi = np;
            self.kern.copy_from_slice(&proposed);
        }
    }

    /// `Σ ln p(f δ_k | ψ') − Σ ln p(δ_k | ψ)`.
    fn ln_scaled_density_change(&self, psi: f64, np: f64, f: f64) -> f64 {
        let n = self.p.len() as f64;
        let sum: f64 = self.delta.iter().sum();
        // ln p(δ|ψ) = ln c(ψ) + ln(1 + b(ψ) δ) − ψ δ
        let cb = |q: f64| match self.p.mixing {
            Mixing::Exact => (2.0 * math::log(q) - math::log1p(q), 1.0),
            Mixing::Literal => (math::log(q) - math::log1p(q), q * q),
        };
        let (c0, b0) = cb(psi);
        let (c1, b1) = cb(np);
        let mut ln_ratio = 0.0;
        for &d in &self.delta {
            ln_ratio += math::log((1.0 + b1 * f * d) / (1.0 + b0 * d));
        }
        n * (c1 - c0) + ln_ratio - (np * f - psi) * sum
    }

    /// `Σ ln p(δ_k | ψ') − Σ ln p(δ_k | ψ)` for unchanged `δ`.
    fn ln_delta_density_change(&self, psi: f64, np: f64) -> f64 {
        match self.p.mixing {
            Mixing::Exact => {
                let n = self.p.len() as f64;
                let sum: f64 = self.delta.iter().sum();
                n * (2.0 * math::log(np / psi) - math::log((1.0 + np) / (1.0 + psi)))
                    - (np - psi) * sum
            }
            Mixing::Literal => self.ln_scaled_density_change(psi, np, 1.0),
        }
    }

    fn update_psi(&mut self) {
        let pr = self.priors;
        let psi = self.psi;
        let np = psi * math::exp(self.step_psi.scale() * normal(&mut self.rng));
        let ratio = self.ln_delta_density_change(psi, np)
            + ln_gamma_density(np, pr.psi_shape, pr.psi_rate)
            - ln_gamma_density(psi, pr.psi_shape, pr.psi_rate)
            + math::log(np / psi);
        let ok = accept(&mut self.rng, ratio);
        self.step_psi.record(ok);
        if ok {
            self.psi = np;
        }
    }

    /// Moves along directions that leave every `θ_k` unchanged.
    fn update_shifts(&mut self) {
        let pr = self.priors;
        let n = self.p.len() as f64;
        // intercept up, every δ down
        let eps = self.step_shift.scale() * normal(&mut self.rng);
        let f = math::exp(-eps);
        let mut beta = self.beta.clone();
        beta[0] += eps;
        let ratio = self.ln_prior_beta(&beta) - self.ln_prior_beta(&self.beta)
            + self.ln_scaled_density_change(self.psi, self.psi, f)
            - eps * n;
        let ok = accept(&mut self.rng, ratio);
        self.step_shift.record(ok);
        if ok {
            self.apply_shift(beta, f);
        }
        // intercept and ψ up, every δ down
        let eps = self.step_shift_psi.scale() * normal(&mut self.rng);
        let f = math::exp(-eps);
        let np = self.psi * math::exp(eps);
        let mut beta = self.beta.clone();
        beta[0] += eps;
        let ratio = self.ln_prior_beta(&beta) - self.ln_prior_beta(&self.beta)
            + self.ln_scaled_density_change(self.psi, np, f)
            + ln_gamma_density(np, pr.psi_shape, pr.psi_rate)
            - ln_gamma_density(self.psi, pr.psi_shape, pr.psi_rate)
            + eps
            - eps * n;
        let ok = accept(&mut self.rng, ratio);
        self.step_shift_psi.record(ok);
        if ok {
            self.psi = np;
            self.apply_shift(beta, f);
        }
    }

    /// Moves `ψ` while carrying every `δ` through the mixture CDF, so the
    /// latent prior is unchanged and only the likelihood enters the ratio.
    /// The intercept absorbs the change in `E[δ]`.
    fn update_transport(&mut self) {
        let p = self.p;
        let pr = self.priors;
        let ln_phi = math::log(self.phi);
        let psi = self.psi;
        let eps = self.step_transport.scale() * normal(&mut self.rng);
        let np = psi * math::exp(eps);
        let c = math::log(p.mixing.mean(psi) / p.mixing.mean(np));
        let mut beta = self.beta.clone();
        beta[0] += c;
        let mut diff = self.ln_prior_beta(&beta) - self.ln_prior_beta(&self.beta)
            + ln_gamma_density(np, pr.psi_shape, pr.psi_rate)
            - ln_gamma_density(psi, pr.psi_shape, pr.psi_rate)
            + eps;
        let mut nd = vec![0.0; p.len()];
        let mut proposed = vec![0.0; p.len()];
        for k in 0..p.len() {
            nd[k] = transport_delta(self.delta[k], psi, np, p.mixing);
            if !(nd[k] > 0.0 && nd[k].is_finite()) {
                self.step_transport.record(false);
                return;
            }
            proposed[k] = kern(p.y[k], self.eta[k] + c + math::log(nd[k]), self.phi, ln_phi);
            diff += proposed[k] - self.kern[k];
        }
        let ok = accept(&mut self.rng, diff);
        self.step_transport.record(ok);
        if ok {
            self.psi = np;
            self.beta = beta;
            for k in 0..p.len() {
                self.eta[k] += c;
                self.delta[k] = nd[k];
                self.ln_delta[k] = math::log(nd[k]);
            }
            self.kern.copy_from_slice(&proposed);
        }
    }

    fn apply_shift(&mut self, beta: Vec<f64>, f: f64) {
        let eps = beta[0] - self.beta[0];
        self.beta = beta;
        let lf = math::log(f);
        for k in 0..self.p.len() {
            self.eta[k] += eps;
            self.delta[k] *= f;
            self.ln_delta[k] += lf;
        }
    }

    fn update_latents(&mut self) {
        let p = self.p;
        let ln_phi = math::log(self.phi);
        for k in 0..p.len() {
            self.z[k] = self.rng.random::<f64>() < p.mixing.p_shape2_given(self.delta[k], self.psi);
        }
        let scale = self.step_delta_rw.scale();
        for k in 0..p.len() {
            let (d, ld, kn, g, r) = update_delta(
                &mut self.rng,
                p.y[k],
                self.eta[k],
                self.phi,
                ln_phi,
                self.psi,
                self.z[k],
                self.delta[k],
                self.ln_delta[k],
                self.kern[k],
                scale,
            );
            self.gamma_acc.0 += u64::from(g);
            self.gamma_acc.1 += 1;
            self.step_delta_rw.record(r);
            self.delta[k] = d;
            self.ln_delta[k] = ld;
            self.kern[k] = kn;
        }
    }

    fn iterate(&mut self) {
        self.update_beta();
        if self.p.n_random > 0 {
            self.update_random();
        }
        self.update_phi();
        if self.p.lindley() {
            self.update_psi();
            self.update_shifts();
            self.update_transport();
            self.update_latents();
        }
    }

    fn all_steps(&mut self) -> Vec<&mut Step> {
        let mut v: Vec<&mut Step> = Vec::new();
        v.extend(self.steps_beta.iter_mut());
        v.extend(self.steps_v.iter_mut());
        v.extend(self.steps_sigma.iter_mut());
        v.extend(self.steps_sigma_nc.iter_mut());
        v.push(&mut self.step_phi);
        v.push(&mut self.step_psi);
        v.push(&mut self.step_shift);
        v.push(&mut self.step_shift_psi);
        v.push(&mut self.step_transport);
        v.push(&mut self.step_delta_rw);
        v
    }

    fn deviance(&self) -> f64 {
        let norm = self.ln_phi_norm(self.phi) - self.p.ln_norm_y;
        -2.0 * (norm + self.kern.iter().sum::<f64>())
    }

    fn record(&self, params: &mut Vec<f64>) {
        let p = self.p;
        params.extend(self.beta_original(&self.beta));
        for l in 0..p.n_random {
            params.push(self.sigma[l] / p.scale[p.n_fixed + l]);
        }
        params.push(self.phi);
        if p.lindley() {
            params.push(self.psi);
        }
    }
}

/// A chain that can be advanced in pieces. Burn-in, adaptation and thinning
/// follow the global iteration count, so `run(a); run(b)` equals `run(a + b)`.
pub struct ChainRunner<'a> {
    c: Chain<'a>,
    cfg: McmcConfig,
    id: usize,
    done: usize,
    params: Vec<f64>,
    deviance: Vec<f64>,
    delta_sum: Vec<f64>,
    z_sum: Vec<f64>,
    v_sum: Vec<f64>,
    theta_sum: Vec<f64>,
}

impl<'a> ChainRunner<'a> {
    pub fn new(p: &'a Prepared, cfg: &McmcConfig, chain: usize) -> Self {
        let k = p.len();
        Self {
            c: Chain::new(p, cfg.seed, chain),
            cfg: *cfg,
            id: chain,
            done: 0,
            params: Vec::new(),
            deviance: Vec::new(),
            delta_sum: vec![0.0; k],
            z_sum: vec![0.0; k],
            v_sum: vec![0.0; k * p.n_random],
            theta_sum: vec![0.0; k],
        }
    }

    pub fn iterations_done(&self) -> usize {
        self.done
    }

    pub fn run(&mut self, iterations: usize) {
        let cfg = self.cfg;
        let p = self.c.p;
        let (k, r) = (p.len(), p.n_random);
        for _ in 0..iterations {
            let it = self.done;
            self.done += 1;
            let c = &mut self.c;
            c.iterate();
            if it < cfg.burn_in {
                if (it + 1) % 50 == 0 {
                    for s in c.all_steps() {
                        s.adapt(cfg.target_accept);
                    }
                }
                if it + 1 == cfg.burn_in {
                    for s in c.all_steps() {
                        s.accepted = 0;
                        s.tried = 0;
                    }
                    c.gamma_acc = (0, 0);
                }
                continue;
            }
            if (it - cfg.burn_in) % cfg.thin != 0 {
                continue;
            }
            c.record(&mut self.params);
            self.deviance.push(c.deviance());
            for i in 0..k {
                self.delta_sum[i] += c.delta[i];
                self.z_sum[i] += f64::from(u8::from(c.z[i]));
                self.theta_sum[i] += math::exp(c.eta[i] + c.ln_delta[i]);
                for l in 0..r {
                    self.v_sum[i * r + l] += c.v[i * r + l] / p.scale[p.n_fixed + l];
                }
            }
        }
    }

    /// Kept draws so far, with latent means and acceptance rates.
    pub fn draws(&mut self) -> ChainDraws {
        let p = self.c.p;
        let n = self.deviance.len().max(1) as f64;
        let mean = |v: &[f64]| v.iter().map(|x| x / n).collect::<Vec<f64>>();
        let mut out = ChainDraws {
            chain: self.id,
            params: self.params.clone(),
            n_params: p.n_params(),
            deviance: self.deviance.clone(),
            delta_mean: if p.lindley() {
                mean(&self.delta_sum)
            } else {
                vec![1.0; p.len()]
            },
            z_mean: mean(&self.z_sum),
            v_mean: mean(&self.v_sum),
            theta_mean: mean(&self.theta_sum),
            acceptance: Vec::new(),
        };
        let mut names: Vec<String> = Vec::new();
        names.extend(
            p.param_names[..p.n_beta()]
                .iter()
                .map(|n| alloc::format!("beta:{n}")),
        );
        names.extend(p.spec.random.iter().map(|n| alloc::format!("v:{n}")));
        names.extend(p.spec.random.iter().map(|n| alloc::format!("sigma:{n}")));
        names.extend(
            p.spec
                .random
                .iter()
                .map(|n| alloc::format!("sigma_joint:{n}")),
        );
        names.extend(
            ["phi", "psi", "shift", "shift_psi", "transport", "delta_rw"].map(String::from),
        );
        for (name, s) in names.into_iter().zip(self.c.all_steps()) {
            if s.tried > 0 {
                out.acceptance.push(Acceptance {
                    name,
                    rate: s.accepted as f64 / s.tried as f64,
                });
            }
        }
        let (a, t) = self.c.gamma_acc;
        if t > 0 {
            out.acceptance.push(Acceptance {
                name: "delta_gamma".into(),
                rate: a as f64 / t as f64,
            });
        }
        out
    }
}

/// Runs one chain for `cfg.iterations`. Chains differ only in their random stream.
pub fn run_chain(p: &Prepared, cfg: &McmcConfig, chain: usize) -> ChainDraws {
    let mut r = ChainRunner::new(p, cfg, chain);
    r.run(cfg.iterations);
    r.draws()
}

/// Runs all chains through `advance`, extending them by one post-burn-in
/// block at a time while split-R̂ fails and `cfg.max_iterations` allows.
///
/// `advance(runners, n)` must run every runner for `n` more iterations; it
/// may do so in parallel.
pub fn fit_prepared_with(
    p: &Prepared,
    cfg: &McmcConfig,
    mut advance: impl FnMut(&mut [ChainRunner<'_>], usize),
) -> Result<PosteriorFit> {
    cfg.validate()?;
    let mut runners: Vec<ChainRunner<'_>> = (0..cfg.chains)
        .map(|c| ChainRunner::new(p, cfg, c))
        .collect();
    advance(&mut runners, cfg.iterations);
    let mut total = cfg.iterations;
    loop {
        let mut fit = assemble(p, runners.iter_mut().map(ChainRunner::draws).collect(), cfg)?;
        fit.iterations = total;
        if fit.converged || total >= cfg.max_iterations {
            return Ok(fit);
        }
        let extra = (cfg.iterations - cfg.burn_in).min(cfg.max_iterations - total);
        advance(&mut runners, extra);
        total += extra;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorFit {
    pub spec: ModelSpec,
    pub param_names: Vec<String>,
    pub chains: Vec<ChainDraws>,
    pub summary: Vec<ParamSummary>,
    pub converged: bool,
    pub delta_mean: Vec<f64>,
    pub z_mean: Vec<f64>,
    pub v_mean: Vec<f64>,
    pub theta_mean: Vec<f64>,
    /// Conditional deviance at the posterior means of `θ_k` and `φ`.
    pub deviance_at_mean: f64,
    /// Iterations run per chain, burn-in included.
    pub iterations: usize,
}

impl PosteriorFit {
    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|n| n == name)
    }

    pub fn summary_of(&self, name: &str) -> Option<&ParamSummary> {
        self.summary.iter().find(|s| s.parameter == name)
    }

    pub fn mean_of(&self, name: &str) -> Option<f64> {
        self.summary_of(name).map(|s| s.mean)
    }

    pub fn max_rhat(&self) -> f64 {
        self.summary
            .iter()
            .map(|s| s.rhat)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// All kept draws of all chains, each a parameter vector.
    pub fn draws(&self) -> impl Iterator<Item = &[f64]> {
        self.chains
            .iter()
            .flat_map(|c| (0..c.n_draws()).map(move |d| c.draw(d)))
    }

    pub fn n_draws(&self) -> usize {
        self.chains.iter().map(ChainDraws::n_draws).sum()
    }

    pub fn deviance_draws(&self) -> impl Iterator<Item = f64> + '_ {
        self.chains.iter().flat_map(|c| c.deviance.iter().copied())
    }
}

/// Pools chains into summaries, convergence status and plug-in deviance.
pub fn assemble(
    p: &Prepared,
    mut chains: Vec<ChainDraws>,
    cfg: &McmcConfig,
) -> Result<PosteriorFit> {
    if chains.is_empty() || chains.iter().any(|c| c.n_draws() == 0) {
        return Err(Error::InsufficientData("no posterior draws".into()));
    }
    chains.sort_by_key(|c| c.chain);
    let chains_iterations = cfg.burn_in + chains[0].n_draws() * cfg.thin;
    let np = p.n_params();
    let per_param: Vec<Vec<Vec<f64>>> = (0..np)
        .map(|i| chains.iter().map(|c| c.param(i)).collect())
        .collect();
    let summary: Vec<ParamSummary> = per_param
        .iter()
        .zip(&p.param_names)
        .map(|(cs, name)| {
            let refs: Vec<&[f64]> = cs.iter().map(Vec::as_slice).collect();
            summarize(name, &refs)
        })
        .collect();
    let converged = summary.iter().all(|s| s.rhat < cfg.rhat_threshold);
    let k = p.len();
    let r = p.n_random;
    let nc = chains.len() as f64;
    let avg = |f: fn(&ChainDraws) -> &Vec<f64>, len: usize| -> Vec<f64> {
        let mut out = vec![0.0; len];
        for c in &chains {
            for (o, x) in out.iter_mut().zip(f(c)) {
                *o += x / nc;
            }
        }
        out
    };
    let delta_mean = avg(|c| &c.delta_mean, k);
    let z_mean = avg(|c| &c.z_mean, k);
    let v_mean = avg(|c| &c.v_mean, k * r);
    let theta_mean = avg(|c| &c.theta_mean, k);

    // The likelihood depends on (β, v, δ) only through θ, whose posterior
    // mean is unaffected by the intercept/δ trade-off.
    let phi = summary[p.n_beta() + r].mean;
    let ln_phi = math::log(phi);
    let mut ll = p
        .y_groups
        .iter()
        .map(|&(y, n)| n * nb_ln_norm(y, phi))
        .sum::<f64>();
    for i in 0..k {
        ll += kern(p.y[i], math::log(theta_mean[i]), phi, ln_phi);
    }
    Ok(PosteriorFit {
        spec: p.spec.clone(),
        param_names: p.param_names.clone(),
        chains,
        summary,
        converged,
        delta_mean,
        z_mean,
        v_mean,
        theta_mean,
        deviance_at_mean: -2.0 * ll,
        iterations: chains_iterations,
    })
}

/// Runs all chains one after another.
pub fn fit(spec: &ModelSpec, data: &Dataset, cfg: &McmcConfig) -> Result<PosteriorFit> {
    let p = prepare(spec, data)?;
    fit_prepared_with(&p, cfg, |runners, n| {
        for r in runners {
            r.run(n);
        }
    })
}

/// `Variant` of a spec, re-exported for callers that only hold a fit.
pub fn variant_of(fit: &PosteriorFit) -> Variant {
    fit.spec.variant
}
