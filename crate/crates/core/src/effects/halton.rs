//! Halton low-discrepancy sequences.

use alloc::vec::Vec;

use crate::special::normal_quantile;

/// The first `d` primes.
pub fn primes(d: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(d);
    let mut c = 2u64;
    while out.len() < d {
        if out.iter().take_while(|&&p| p * p <= c).all(|&p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// Van der Corput radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

/// `n` points of the `d`-dimensional Halton sequence after dropping the first
/// `skip`. Point `i` uses index `skip + i + 1`, so nothing is ever 0.
pub fn halton(d: usize, n: usize, skip: usize) -> Vec<Vec<f64>> {
    let bases = primes(d);
    (0..n)
        .map(|i| {
            bases
                .iter()
                .map(|&b| radical_inverse((skip + i + 1) as u64, b))
                .collect()
        })
        .collect()
}

/// Halton points mapped to standard normal deviates.
pub fn halton_normal(d: usize, n: usize, skip: usize) -> Vec<Vec<f64>> {
    let mut pts = halton(d, n, skip);
    for p in &mut pts {
        for u in p.iter_mut() {
            *u = normal_quantile(*u);
        }
    }
    pts
}
