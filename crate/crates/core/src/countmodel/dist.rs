//! Negative binomial and Lindley densities, and the gamma mixture behind the
//! Lindley random effect.

use serde::{Deserialize, Serialize};

use crate::math;
use crate::special::ln_gamma;
use crate::{Error, Result};

/// How the Bernoulli indicator selects the gamma shape of the random effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mixing {
    /// `P(z = 1) = 1/(1+ψ)`, which makes the marginal of `δ` exactly Lindley(ψ).
    #[default]
    Exact,
    /// `P(z = 1) = ψ/(1+ψ)` as printed in the model description.
    Literal,
}

impl Mixing {
    pub fn from_literal_flag(literal: bool) -> Self {
        if literal {
            Mixing::Literal
        } else {
            Mixing::Exact
        }
    }

    /// Prior probability that `δ` comes from the shape-2 branch.
    pub fn p_shape2(self, psi: f64) -> f64 {
        match self {
            Mixing::Exact => 1.0 / (1.0 + psi),
            Mixing::Literal => psi / (1.0 + psi),
        }
    }

    /// `P(z = 1 | δ, ψ)`.
    pub fn p_shape2_given(self, delta: f64, psi: f64) -> f64 {
        // odds = p1 ψ δ / (1 − p1)
        let odds = match self {
            Mixing::Exact => delta,
            Mixing::Literal => psi * psi * delta,
        };
        odds / (1.0 + odds)
    }

    pub fn mean(self, psi: f64) -> f64 {
        let p1 = self.p_shape2(psi);
        (1.0 + p1) / psi
    }

    /// Log-density of `δ` with the indicator summed out.
    pub fn ln_pdf(self, delta: f64, psi: f64) -> f64 {
        match self {
            Mixing::Exact => {
                2.0 * math::log(psi) - math::log1p(psi) + math::log1p(delta) - psi * delta
            }
            Mixing::Literal => {
                math::log(psi) - math::log1p(psi) + math::log1p(psi * psi * delta) - psi * delta
            }
        }
    }
}

fn check_positive(what: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::NonFinite(what));
    }
    if v <= 0.0 {
        return Err(Error::OutOfRange { what, value: v });
    }
    Ok(())
}

/// `ln Γ(y+φ) − ln Γ(φ) − ln y!`, the part of the NB log-pmf free of θ.
#[inline]
pub fn nb_ln_norm(y: f64, phi: f64) -> f64 {
    ln_gamma(y + phi) - ln_gamma(phi) - ln_gamma(y + 1.0)
}

/// `φ ln(φ/(φ+θ)) + y ln(θ/(φ+θ))`, the θ-dependent part of the NB log-pmf.
#[inline]
pub fn nb_ln_kernel(y: f64, theta: f64, phi: f64) -> f64 {
    let tail = if y > 0.0 {
        y * (math::log(theta) - math::log(phi + theta))
    } else {
        0.0
    };
    -phi * math::log1p(theta / phi) + tail
}

/// Log-pmf of NB with mean `theta` and dispersion `phi`.
pub fn nb_logpmf(y: u64, theta: f64, phi: f64) -> Result<f64> {
    check_positive("theta", theta)?;
    check_positive("phi", phi)?;
    let y = y as f64;
    Ok(nb_ln_norm(y, phi) + nb_ln_kernel(y, theta, phi))
}

pub fn lindley_logpdf(delta: f64, psi: f64) -> Result<f64> {
    check_positive("delta", delta)?;
    check_positive("psi", psi)?;
    Ok(Mixing::Exact.ln_pdf(delta, psi))
}

/// Mean of the Lindley(ψ) distribution.
pub fn lindley_mean(psi: f64) -> f64 {
    (psi + 2.0) / (psi * (psi + 1.0))
}
