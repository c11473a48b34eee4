//! Piecewise-linear trend plus Fourier seasonality, fit on unmasked days.
//!
//! Slope changes at evenly spaced changepoints carry an L1 penalty, solved by
//! iteratively reweighted ridge regression. The penalty weight is chosen by
//! blocked cross-validation. Intervals come from the spread of in-sample
//! residuals.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use chrono::{NaiveDate, TimeDelta};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::math;
use crate::special::normal_quantile;
use crate::stats;
use crate::{Error, Result};

/// Days held out around an exposure window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub pad_before: i64,
    pub pad_after: i64,
}

impl MaskSpec {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Self {
            start,
            end,
            pad_before: 10,
            pad_after: 10,
        }
    }

    pub fn first(&self) -> NaiveDate {
        self.start - TimeDelta::days(self.pad_before)
    }

    pub fn last(&self) -> NaiveDate {
        self.end + TimeDelta::days(self.pad_after)
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.first() <= d && d <= self.last()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub fourier_weekly_order: usize,
    pub fourier_yearly_order: usize,
    pub n_changepoints: usize,
    /// Fraction of the history over which changepoints are placed.
    pub changepoint_range: f64,
    pub ci_level: f64,
    /// Fixed penalty; when absent it is chosen by cross-validation over `lambda_grid`.
    pub lambda: Option<f64>,
    pub lambda_grid: Vec<f64>,
    pub cv_folds: usize,
    pub min_train_days: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            fourier_weekly_order: 3,
            fourier_yearly_order: 10,
            n_changepoints: 25,
            changepoint_range: 0.8,
            ci_level: 0.95,
            lambda: None,
            lambda_grid: geometric_grid(1e-6, 1e-1, 11),
            cv_folds: 5,
            min_train_days: 730,
        }
    }
}

pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let (a, b) = (math::log(lo), math::log(hi));
    (0..n)
        .map(|i| math::exp(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

const WEEK: f64 = 7.0;
const YEAR: f64 = 365.25;
const LQA_EPS: f64 = 1e-8;
const RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedBaseline {
    pub config: BaselineConfig,
    pub start_date: NaiveDate,
    /// Days between the first and last day of the history, at least 1.
    pub span_days: f64,
    pub y_scale: f64,
    pub changepoints: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub residual_sd: f64,
    pub n_train: usize,
    /// Fewer unmasked days than `min_train_days`.
    pub short_history: bool,
    /// All-zero training data: forecasts are zero.
    pub degenerate: bool,
    /// Upper half-width used by a degenerate model.
    degenerate_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Forecast {
    pub dates: Vec<NaiveDate>,
    pub yhat: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Forecast {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn index_of(&self, d: NaiveDate) -> Option<usize> {
        let first = *self.dates.first()?;
        let i = (d - first).num_days();
        (i >= 0 && (i as usize) < self.dates.len() && self.dates[i as usize] == d)
            .then_some(i as usize)
    }
}

/// Trend, weekly and yearly parts of the fitted mean, on the count scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Components {
    pub trend: f64,
    pub weekly: f64,
    pub yearly: f64,
}

fn day_number(d: NaiveDate) -> f64 {
    (d - NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()).num_days() as f64
}

struct Design<'a> {
    cfg: &'a BaselineConfig,
    start: NaiveDate,
    span: f64,
    changepoints: &'a [f64],
}

impl Design<'_> {
    fn ncols(&self) -> usize {
        2 + self.changepoints.len()
            + 2 * self.cfg.fourier_weekly_order
            + 2 * self.cfg.fourier_yearly_order
    }

    fn ramp_cols(&self) -> core::ops::Range<usize> {
        2..2 + self.changepoints.len()
    }

    fn row(&self, d: NaiveDate, out: &mut [f64]) {
        let t = (d - self.start).num_days() as f64 / self.span;
        out[0] = 1.0;
        out[1] = t;
        let mut j = 2;
        for &s in self.changepoints {
            out[j] = (t - s).max(0.0);
            j += 1;
        }
        let day = day_number(d);
        for (period, order) in [
            (WEEK, self.cfg.fourier_weekly_order),
            (YEAR, self.cfg.fourier_yearly_order),
        ] {
            for k in 1..=order {
                let x = 2.0 * PI * k as f64 * day / period;
                out[j] = math::sin(x);
                out[j + 1] = math::cos(x);
                j += 2;
            }
        }
    }
}

/// Normal equations `G = XᵀX`, `c = Xᵀy` over selected rows.
fn gram(rows: &[Vec<f64>], y: &[f64], idx: &[usize], p: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut g = DMatrix::<f64>::zeros(p, p);
    let mut c = DVector::<f64>::zeros(p);
    for &i in idx {
        let r = &rows[i];
        for a in 0..p {
            let ra = r[a];
            if ra == 0.0 {
                continue;
            }
            c[a] += ra * y[i];
            for b in a..p {
                g[(a, b)] += ra * r[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    (g, c)
}

/// Minimizes `|y − Xb|² / 2n + λ Σ_ramps |b_j|` by local quadratic approximation.
fn solve_l1(
    g: &DMatrix<f64>,
    c: &DVector<f64>,
    n: usize,
    ramps: core::ops::Range<usize>,
    lambda: f64,
) -> Result<DVector<f64>> {
    let p = g.nrows();
    let nf = n.max(1) as f64;
    let gn = g / nf;
    let cn = c / nf;
    let mut b = DVector::<f64>::zeros(p);
    for iter in 0..200 {
        let mut a = gn.clone();
        for j in 0..p {
            let pen = if ramps.contains(&j) {
                if iter == 0 {
                    lambda
                } else {
                    lambda / (b[j].abs() + LQA_EPS)
                }
            } else {
                0.0
            };
            a[(j, j)] += pen + RIDGE;
        }
        let chol = a
            .cholesky()
            .ok_or(Error::Singular("baseline normal equations"))?;
        let next = chol.solve(&cn);
        let change = (&next - &b).amax();
        b = next;
        if iter > 0 && change < 1e-10 {
            break;
        }
    }
    for j in ramps {
        if b[j].abs() < 1e-7 {
            b[j] = 0.0;
        }
    }
    Ok(b)
}

/// Fits the baseline to `values[i]` observed on `start + i` days.
///
/// Days inside any mask, and non-finite values, are excluded from the fit.
pub fn fit_forecaster(
    start: NaiveDate,
    values: &[f64],
    masks: &[MaskSpec],
    cfg: &BaselineConfig,
) -> Result<FittedBaseline> {
    if values.is_empty() {
        return Err(Error::EmptyRange);
    }
    if !(cfg.ci_level > 0.0 && cfg.ci_level < 1.0) {
        return Err(Error::OutOfRange {
            what: "ci_level",
            value: cfg.ci_level,
        });
    }
    let n = values.len();
    let span = ((n - 1) as f64).max(1.0);
    let n_cp = cfg.n_changepoints;
    let changepoints: Vec<f64> = (1..=n_cp)
        .map(|j| cfg.changepoint_range * j as f64 / n_cp as f64)
        .collect();
    let train: Vec<usize> = (0..n)
        .filter(|&i| {
            let d = start + TimeDelta::days(i as i64);
            values[i].is_finite() && !masks.iter().any(|m| m.contains(d))
        })
        .collect();
    let short_history = train.len() < cfg.min_train_days;
    let y_max = train.iter().map(|&i| values[i].abs()).fold(0.0, f64::max);

    let mut model = FittedBaseline {
        config: cfg.clone(),
        start_date: start,
        span_days: span,
        y_scale: 1.0,
        changepoints,
        coefficients: Vec::new(),
        lambda: cfg.lambda.unwrap_or(0.0),
        residual_sd: 0.0,
        n_train: train.len(),
        short_history,
        degenerate: false,
        degenerate_upper: 0.0,
    };
    if train.is_empty() {
        return Err(Error::InsufficientData("no unmasked days to fit".into()));
    }
    if y_max == 0.0 {
        model.degenerate = true;
        model.coefficients = vec![0.0; 0];
        let resid: Vec<f64> = train.iter().map(|&i| values[i]).collect();
        model.degenerate_upper = stats::quantile(&resid, 0.95).max(0.0);
        return Ok(model);
    }
    model.y_scale = y_max;

    let design = Design {
        cfg,
        start,
        span,
        changepoints: &model.changepoints,
    };
    let p = design.ncols();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = vec![0.0; p];
            design.row(start + TimeDelta::days(i as i64), &mut r);
            r
        })
        .collect();
    let y: Vec<f64> = values.iter().map(|v| v / y_max).collect();

    let lambda = match cfg.lambda {
        Some(l) => l,
        None => select_lambda(&rows, &y, &train, p, design.ramp_cols(), cfg)?,
    };
    let (g, c) = gram(&rows, &y, &train, p);
    let b = solve_l1(&g, &c, train.len(), design.ramp_cols(), lambda)?;
    model.lambda = lambda;
    model.coefficients = b.iter().copied().collect();

    let resid: Vec<f64> = train
        .iter()
        .map(|&i| values[i] - y_max * dot(&rows[i], &model.coefficients))
        .collect();
    model.residual_sd = stats::std_dev(&resid);
    Ok(model)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn select_lambda(
    rows: &[Vec<f64>],
    y: &[f64],
    train: &[usize],
    p: usize,
    ramps: core::ops::Range<usize>,
    cfg: &BaselineConfig,
) -> Result<f64> {
    let k = cfg.cv_folds.max(2);
    if cfg.lambda_grid.is_empty() {
        return Err(Error::Invalid("empty lambda grid".into()));
    }
    if train.len() < 2 * k {
        return Ok(cfg.lambda_grid[cfg.lambda_grid.len() / 2]);
    }
    let (g_all, c_all) = gram(rows, y, train, p);
    let bounds: Vec<usize> = (0..=k).map(|f| f * train.len() / k).collect();
    let folds: Vec<(DMatrix<f64>, DVector<f64>, &[usize])> = (0..k)
        .map(|f| {
            let held = &train[bounds[f]..bounds[f + 1]];
            let (gh, ch) = gram(rows, y, held, p);
            (&g_all - gh, &c_all - ch, held)
        })
        .collect();
    let mut best = (f64::INFINITY, cfg.lambda_grid[0]);
    for &lambda in &cfg.lambda_grid {
        let mut sse = 0.0;
        for (g, c, held) in &folds {
            let b = solve_l1(g, c, train.len() - held.len(), ramps.clone(), lambda)?;
            let coef = b.as_slice();
            sse += held
                .iter()
                .map(|&i| {
                    let r = y[i] - dot(&rows[i], coef);
                    r * r
                })
                .sum::<f64>();
        }
        if sse < best.0 {
            best = (sse, lambda);
        }
    }
    Ok(best.1)
}

impl FittedBaseline {
    pub fn z(&self) -> f64 {
        normal_quantile(0.5 + self.config.ci_level / 2.0)
    }

    pub fn half_width(&self) -> f64 {
        self.z() * self.residual_sd
    }

    fn design(&self) -> Design<'_> {
        Design {
            cfg: &self.config,
            start: self.start_date,
            span: self.span_days,
            changepoints: &self.changepoints,
        }
    }

    pub fn components(&self, d: NaiveDate) -> Components {
        if self.degenerate {
            return Components {
                trend: 0.0,
                weekly: 0.0,
                yearly: 0.0,
            };
        }
        let design = self.design();
        let mut r = vec![0.0; design.ncols()];
        design.row(d, &mut r);
        let b = &self.coefficients;
        let w0 = 2 + self.changepoints.len();
        let y0 = w0 + 2 * self.config.fourier_weekly_order;
        let part =
            |range: core::ops::Range<usize>| self.y_scale * dot(&r[range.clone()], &b[range]);
        Components {
            trend: part(0..w0),
            weekly: part(w0..y0),
            yearly: part(y0..r.len()),
        }
    }

    pub fn yhat(&self, d: NaiveDate) -> f64 {
        let c = self.components(d);
        c.trend + c.weekly + c.yearly
    }

    /// Trend slope in counts per day at `d`.
    pub fn trend_slope(&self, d: NaiveDate) -> f64 {
        if self.degenerate {
            return 0.0;
        }
        let t = (d - self.start_date).num_days() as f64 / self.span_days;
        let mut s = self.coefficients[1];
        for (j, &cp) in self.changepoints.iter().enumerate() {
            if t > cp {
                s += self.coefficients[2 + j];
            }
        }
        s * self.y_scale / self.span_days
    }

    pub fn predict_with_ci(&self, dates: &[NaiveDate]) -> Forecast {
        let mut f = Forecast::default();
        for &d in dates {
            let (yhat, lo, hi) = if self.degenerate {
                (0.0, 0.0, self.degenerate_upper)
            } else {
                let y = self.yhat(d);
                let h = self.half_width();
                (y, (y - h).max(0.0), y + h)
            };
            f.dates.push(d);
            f.yhat.push(yhat);
            f.lower.push(lo.min(yhat.max(0.0)));
            f.upper.push(hi.max(yhat));
        }
        f
    }

    pub fn predict_range(&self, first: NaiveDate, last: NaiveDate) -> Forecast {
        let n = (last - first).num_days() + 1;
        let dates: Vec<NaiveDate> = (0..n.max(0)).map(|i| first + TimeDelta::days(i)).collect();
        self.predict_with_ci(&dates)
    }
}
