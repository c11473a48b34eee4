//! Adaptive Gauss–Kronrod (7/15) quadrature and the NB–Lindley marginal pmf.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use super::dist::{nb_ln_kernel, nb_ln_norm, Mixing};
use crate::math;
use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights at the odd Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 2000;

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` (or relative
/// tolerance `tol` when the integral is large).
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (v, e) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::from([Piece {
        a,
        b,
        value: v,
        err: e,
    }]);
    let (mut total, mut err) = (v, e);
    let mut evals = 15;
    loop {
        if !total.is_finite() {
            return Err(Error::NonFinite("quadrature integrand"));
        }
        if err <= tol.max(tol * total.abs()) {
            return Ok(total);
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature {
                estimate: total,
                error_estimate: err,
                evaluations: evals,
            });
        }
        let p = heap.pop().expect("non-empty");
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        evals += 30;
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.err;
        heap.push(Piece {
            a: p.a,
            b: m,
            value: v1,
            err: e1,
        });
        heap.push(Piece {
            a: m,
            b: p.b,
            value: v2,
            err: e2,
        });
        if err < 0.0 {
            err = heap.iter().map(|p| p.err).sum();
        }
    }
}

/// Integrates over `[0, ∞)` through `x = t/(1−t)`.
pub fn integrate_half_line(mut f: impl FnMut(f64) -> f64, tol: f64) -> Result<f64> {
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let u = 1.0 - t;
            let v = f(t / u) / (u * u);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Nodes and weights for `∫ f(x) e^{−x²} dx` (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = math::sqrt(i as f64 / 2.0);
        j[(i, i - 1)] = b;
        j[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], math::sqrt(PI) * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `P(Y = y)` with `Y | δ ~ NB(λδ, φ)` and `δ` from the Lindley mixture.
pub fn marginal_nbl_pmf(y: u64, lambda: f64, phi: f64, psi: f64, mixing: Mixing) -> Result<f64> {
    marginal_nbl_pmf_tol(y, lambda, phi, psi, mixing, 1e-13)
}

/// As [`marginal_nbl_pmf`] with a caller-chosen quadrature tolerance.
pub fn marginal_nbl_pmf_tol(
    y: u64,
    lambda: f64,
    phi: f64,
    psi: f64,
    mixing: Mixing,
    tol: f64,
) -> Result<f64> {
    for (what, v) in [("lambda", lambda), ("phi", phi), ("psi", psi)] {
        if !v.is_finite() {
            return Err(Error::NonFinite(what));
        }
        if v <= 0.0 {
            return Err(Error::OutOfRange { what, value: v });
        }
    }
    let yf = y as f64;
    let norm = nb_ln_norm(yf, phi);
    // Rescale so the mass sits near x ≈ 1 in the transformed variable.
    let scale = mixing.mean(psi);
    let f = |x: f64| {
        let delta = x * scale;
        if delta <= 0.0 {
            return if y == 0 {
                math::exp(mixing.ln_pdf(0.0, psi)) * scale
            } else {
                0.0
            };
        }
        math::exp(norm + nb_ln_kernel(yf, lambda * delta, phi) + mixing.ln_pdf(delta, psi)) * scale
    };
    integrate_half_line(f, tol)
}
