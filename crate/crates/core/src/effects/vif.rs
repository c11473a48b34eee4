//! Variance inflation factors and iterative screening.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::stats;
use crate::{Error, Result};

/// `R²` at or above this counts as perfect collinearity.
const COLLINEAR_R2: f64 = 1.0 - 1e-12;

/// VIF of every column against all the others (with intercept).
pub fn vif(columns: &[Vec<f64>]) -> Result<Vec<f64>> {
    let p = columns.len();
    let n = columns.first().map_or(0, Vec::len);
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::Invalid("columns differ in length".into()));
    }
    let mut out = Vec::with_capacity(p);
    for l in 0..p {
        let y = &columns[l];
        let my = stats::mean(y);
        let yv = DVector::from_iterator(n, y.iter().map(|v| v - my));
        let sst = yv.norm_squared();
        if !(sst > 1e-300) || y.iter().all(|v| *v == y[0]) {
            return Err(Error::Invalid(format!("column {l} is constant")));
        }
        if p == 1 {
            out.push(1.0);
            continue;
        }
        let mut x = DMatrix::<f64>::zeros(n, p);
        for i in 0..n {
            x[(i, 0)] = 1.0;
        }
        let mut c = 1;
        for (j, col) in columns.iter().enumerate() {
            if j == l {
                continue;
            }
            // centered and scaled regressors keep the SVD well conditioned
            let m = stats::mean(col);
            let s = stats::std_dev(col).max(f64::MIN_POSITIVE);
            for i in 0..n {
                x[(i, c)] = (col[i] - m) / s;
            }
            c += 1;
        }
        // pivoted QR; residual of the projection onto the numerical column space
        let qr = x.col_piv_qr();
        let r = qr.r();
        let d0 = r[(0, 0)].abs();
        let rank = (0..r.nrows().min(r.ncols()))
            .take_while(|&i| r[(i, i)].abs() > 1e-10 * d0)
            .count();
        let q = qr.q();
        let q = q.columns(0, rank);
        let proj = &q * (q.transpose() * &yv);
        let resid = &yv - proj;
        let r2 = 1.0 - resid.norm_squared() / sst;
        out.push(if r2 >= COLLINEAR_R2 {
            f64::INFINITY
        } else {
            1.0 / (1.0 - r2)
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifReport {
    pub retained: Vec<String>,
    /// Dropped columns in drop order, with the VIF that triggered the drop.
    pub dropped: Vec<(String, f64)>,
    /// Final VIF of each retained column.
    pub table: Vec<(String, f64)>,
    pub log: Vec<String>,
}

/// Drops the highest-VIF column while any VIF exceeds `threshold`. Among
/// infinite VIFs the later-listed column goes first.
pub fn vif_screen(names: &[String], columns: &[Vec<f64>], threshold: f64) -> Result<VifReport> {
    if names.len() != columns.len() {
        return Err(Error::Invalid("one name per column required".into()));
    }
    let mut keep: Vec<usize> = (0..names.len()).collect();
    let mut dropped = Vec::new();
    let mut log = Vec::new();
    loop {
        let cols: Vec<Vec<f64>> = keep.iter().map(|&j| columns[j].clone()).collect();
        let v = if cols.is_empty() {
            Vec::new()
        } else {
            vif(&cols)?
        };
        let worst = match v.iter().rposition(|x| x.is_infinite()) {
            Some(i) => Some(i),
            None => v
                .iter()
                .enumerate()
                .filter(|(_, x)| **x > threshold)
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i),
        };
        match worst {
            Some(i) => {
                let name = names[keep[i]].clone();
                log.push(if v[i].is_infinite() {
                    format!("dropped {name}: perfectly collinear with earlier columns")
                } else {
                    format!("dropped {name}: VIF {:.3} > {threshold}", v[i])
                });
                dropped.push((name, v[i]));
                keep.remove(i);
            }
            None => {
                let table: Vec<(String, f64)> = keep
                    .iter()
                    .zip(&v)
                    .map(|(&j, &x)| (names[j].clone(), x))
                    .collect();
                return Ok(VifReport {
                    retained: keep.iter().map(|&j| names[j].clone()).collect(),
                    dropped,
                    table,
                    log,
                });
            }
        }
    }
}
