//! Split-R̂, effective sample size and posterior summaries.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::stats;

fn split_halves<'a>(chains: &[&'a [f64]]) -> Vec<&'a [f64]> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let h = c.len() / 2;
        out.push(&c[..h]);
        out.push(&c[c.len() - h..]);
    }
    out
}

fn between_within(parts: &[&[f64]]) -> (f64, f64, f64) {
    let m = parts.len() as f64;
    let n = parts[0].len() as f64;
    let means: Vec<f64> = parts.iter().map(|p| stats::mean(p)).collect();
    let grand = stats::mean(&means);
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand) * (x - grand)).sum::<f64>();
    let w = parts.iter().map(|p| stats::variance(p)).sum::<f64>() / m;
    let var_plus = (n - 1.0) / n * w + b / n;
    (b, w, var_plus)
}

/// Potential scale reduction over chains split in half.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let parts = split_halves(chains);
    if parts.len() < 2 || parts[0].len() < 2 {
        return f64::NAN;
    }
    let (b, w, var_plus) = between_within(&parts);
    if w <= 0.0 {
        return if b <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    math::sqrt(var_plus / w)
}

/// Effective sample size from split chains, with Geyer's initial positive
/// sequence truncation of the combined autocorrelation.
pub fn ess(chains: &[&[f64]]) -> f64 {
    let parts = split_halves(chains);
    if parts.len() < 2 || parts[0].len() < 4 {
        return f64::NAN;
    }
    let m = parts.len();
    let n = parts[0].len();
    let total = (m * n) as f64;
    let (_, w, var_plus) = between_within(&parts);
    if w <= 0.0 || var_plus <= 0.0 {
        return total;
    }
    let rho = |t: usize| {
        let mut v = 0.0;
        for p in &parts {
            for i in t..n {
                let d = p[i] - p[i - t];
                v += d * d;
            }
        }
        v /= (m * (n - t)) as f64;
        1.0 - v / (2.0 * var_plus)
    };
    let mut sum = 0.0;
    let mut t = 1;
    // pairs ρ_{2k} + ρ_{2k+1}, with ρ_0 = 1, made monotone and cut at the first negative
    let mut prev_pair = f64::INFINITY;
    let mut first = true;
    while t + 1 < n {
        let pair = if first {
            1.0 + rho(1)
        } else {
            rho(t) + rho(t + 1)
        };
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        prev_pair = pair;
        sum += pair;
        if first {
            first = false;
            t = 2;
        } else {
            t += 2;
        }
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / math::log10(total).max(1.0));
    total / tau
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub parameter: alloc::string::String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    pub rhat: f64,
    pub ess: f64,
}

impl ParamSummary {
    pub fn covers(&self, truth: f64) -> bool {
        self.q025 <= truth && truth <= self.q975
    }
}

pub fn summarize(name: &str, chains: &[&[f64]]) -> ParamSummary {
    let mut pooled: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
    let mean = stats::mean(&pooled);
    let sd = stats::std_dev(&pooled);
    pooled.sort_by(f64::total_cmp);
    ParamSummary {
        parameter: name.into(),
        mean,
        sd,
        q025: stats::quantile_sorted(&pooled, 0.025),
        q975: stats::quantile_sorted(&pooled, 0.975),
        rhat: split_rhat(chains),
        ess: ess(chains),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn iid(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                shift + e
            })
            .collect()
    }

    fn ar1(seed: u64, n: usize, a: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = a * x + e;
                x
            })
            .collect()
    }

    #[test]
    fn rhat_near_one_for_iid() {
        let a = iid(1, 2000, 0.0);
        let b = iid(2, 2000, 0.0);
        let r = split_rhat(&[&a, &b]);
        assert!((r - 1.0).abs() < 0.01, "{r}");
    }

    #[test]
    fn rhat_flags_shifted_chains() {
        let a = iid(1, 2000, 0.0);
        let b = iid(2, 2000, 1.0);
        assert!(split_rhat(&[&a, &b]) > 1.1);
        // a trend inside one chain is caught by splitting
        let trend: Vec<f64> = (0..2000).map(|i| i as f64 / 200.0).collect();
        let flat = iid(3, 2000, 5.0);
        assert!(split_rhat(&[&trend, &flat]) > 1.1);
    }

    #[test]
    fn ess_iid_and_ar1() {
        let a = iid(1, 5000, 0.0);
        let b = iid(2, 5000, 0.0);
        let e = ess(&[&a, &b]);
        assert!((e / 10_000.0 - 1.0).abs() < 0.15, "{e}");
        // AR(1) with a = 0.9: ESS/N = (1−a)/(1+a) ≈ 0.0526
        let a = ar1(3, 20_000, 0.9);
        let b = ar1(4, 20_000, 0.9);
        let e = ess(&[&a, &b]) / 40_000.0;
        assert!((e - 0.0526).abs() < 0.015, "{e}");
    }

    #[test]
    fn constant_chains() {
        let a = [2.0; 100];
        assert_eq!(split_rhat(&[&a, &a]), 1.0);
        let s = summarize("c", &[&a, &a]);
        assert_eq!((s.mean, s.sd, s.q025, s.q975), (2.0, 0.0, 2.0, 2.0));
    }
}
