//! Impact windows and resilience metrics from observed counts against a forecast.
//!
//! All functions take observed counts aligned index-for-index with a
//! [`Forecast`]; a non-finite count marks a missing day.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::baseline::Forecast;
use crate::{Error, Result};

pub const DEFAULT_GAP_MERGE: usize = 2;
pub const DEFAULT_LOW_TRAFFIC: f64 = 5.0;

/// Inclusive run of forecast indices whose counts fell below the lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutlierPeriod {
    pub start: usize,
    pub end: usize,
}

impl OutlierPeriod {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn overlap(&self, lo: usize, hi: usize) -> usize {
        let a = self.start.max(lo);
        let b = self.end.min(hi);
        if a <= b {
            b - a + 1
        } else {
            0
        }
    }
}

fn check_aligned(counts: &[f64], forecast: &Forecast) -> Result<()> {
    if counts.len() != forecast.len() {
        return Err(Error::Invalid(alloc::format!(
            "{} counts for a {}-day forecast",
            counts.len(),
            forecast.len()
        )));
    }
    Ok(())
}

/// Maximal below-bound runs, merging runs separated by at most `gap_merge` normal days.
pub fn detect_outliers(
    counts: &[f64],
    forecast: &Forecast,
    gap_merge: usize,
) -> Result<Vec<OutlierPeriod>> {
    check_aligned(counts, forecast)?;
    let mut runs: Vec<OutlierPeriod> = Vec::new();
    for (i, (&c, &lo)) in counts.iter().zip(&forecast.lower).enumerate() {
        if !(c.is_finite() && c < lo) {
            continue;
        }
        match runs.last_mut() {
            Some(r) if i - r.end - 1 <= gap_merge => r.end = i,
            _ => runs.push(OutlierPeriod { start: i, end: i }),
        }
    }
    Ok(runs)
}

/// The outlier period sharing most days with `[exp_start, exp_end]`, earliest on ties.
pub fn attribute_window(
    outliers: &[OutlierPeriod],
    exp_start: usize,
    exp_end: usize,
) -> Option<OutlierPeriod> {
    let mut best: Option<(usize, OutlierPeriod)> = None;
    for o in outliers {
        let k = o.overlap(exp_start, exp_end);
        if k > 0 && best.is_none_or(|(bk, _)| k > bk) {
            best = Some((k, *o));
        }
    }
    best.map(|(_, o)| o)
}

/// Backward scan from `t_e`: the earliest `t` in `[t_o, t_e]` from which every
/// day-to-day difference through `t_e + 1` is positive, or `t_e` if even the
/// last step is not an increase.
pub fn locate_recovery_start(counts: &[f64], t_o: usize, t_e: usize) -> usize {
    let rises = |tau: usize| match (counts.get(tau), counts.get(tau + 1)) {
        (Some(&a), Some(&b)) if a.is_finite() && b.is_finite() => b - a > 0.0,
        _ => false,
    };
    let mut t_s = t_e;
    if !rises(t_e) {
        return t_e;
    }
    while t_s > t_o && rises(t_s - 1) {
        t_s -= 1;
    }
    t_s
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImpactMetrics {
    pub total_impact: f64,
    pub total_impact_value: f64,
    pub max_impact: f64,
    /// Days whose lower bound was not positive and was replaced by 1.
    pub nonpositive_lower_days: usize,
    /// Days skipped because the count was missing.
    pub missing_days: usize,
}

/// Sums the normalized and absolute shortfall over `[t_o, t_c]`.
pub fn total_impact(
    counts: &[f64],
    forecast: &Forecast,
    t_o: usize,
    t_c: usize,
    clamp_nonnegative: bool,
) -> Result<ImpactMetrics> {
    check_aligned(counts, forecast)?;
    if t_c < t_o || t_c >= counts.len() {
        return Err(Error::Invalid(alloc::format!(
            "impact window {t_o}..={t_c} outside forecast"
        )));
    }
    let mut m = ImpactMetrics {
        max_impact: f64::NEG_INFINITY,
        ..Default::default()
    };
    for t in t_o..=t_c {
        let c = counts[t];
        if !c.is_finite() {
            m.missing_days += 1;
            continue;
        }
        let lower = forecast.lower[t];
        let denom = if lower > 0.0 {
            lower
        } else {
            m.nonpositive_lower_days += 1;
            1.0
        };
        let mut term = 1.0 - c / denom;
        let mut value = lower - c;
        if clamp_nonnegative {
            term = term.max(0.0);
            value = value.max(0.0);
        }
        m.total_impact += term;
        m.total_impact_value += value;
        m.max_impact = m.max_impact.max(term);
    }
    if m.max_impact == f64::NEG_INFINITY {
        m.max_impact = 0.0;
    }
    Ok(m)
}

pub fn recovery_duration(t_s: NaiveDate, t_c: NaiveDate) -> i64 {
    (t_c - t_s).num_days()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImpactConfig {
    pub gap_merge: usize,
    pub clamp_nonnegative: bool,
    pub low_traffic_threshold: f64,
}

impl Default for ImpactConfig {
    fn default() -> Self {
        Self {
            gap_merge: DEFAULT_GAP_MERGE,
            clamp_nonnegative: false,
            low_traffic_threshold: DEFAULT_LOW_TRAFFIC,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResilienceRecord {
    pub port_id: u32,
    pub storm_id: String,
    pub t_o: Option<NaiveDate>,
    pub t_s: Option<NaiveDate>,
    pub t_e: Option<NaiveDate>,
    pub t_c: Option<NaiveDate>,
    pub total_impact: f64,
    pub total_impact_value: f64,
    pub max_impact: Option<f64>,
    pub recovery_duration: i64,
    pub nonpositive_lower_days: usize,
    pub missing_days: usize,
}

impl ResilienceRecord {
    pub fn no_impact(port_id: u32, storm_id: &str) -> Self {
        Self {
            port_id,
            storm_id: storm_id.into(),
            t_o: None,
            t_s: None,
            t_e: None,
            t_c: None,
            total_impact: 0.0,
            total_impact_value: 0.0,
            max_impact: None,
            recovery_duration: 0,
            nonpositive_lower_days: 0,
            missing_days: 0,
        }
    }

    pub fn has_impact(&self) -> bool {
        self.t_o.is_some()
    }
}

/// Detects, attributes and measures one port/storm interaction.
///
/// `forecast` should cover the masked range plus at least one trailing day so
/// that `t_c` exists for a window ending on the last masked day.
pub fn evaluate_interaction(
    port_id: u32,
    storm_id: &str,
    counts: &[f64],
    forecast: &Forecast,
    exposure: (NaiveDate, NaiveDate),
    cfg: &ImpactConfig,
) -> Result<ResilienceRecord> {
    let outliers = detect_outliers(counts, forecast, cfg.gap_merge)?;
    let Some(first) = forecast.dates.first().copied() else {
        return Ok(ResilienceRecord::no_impact(port_id, storm_id));
    };
    let idx = |d: NaiveDate| (d - first).num_days();
    let (lo, hi) = (idx(exposure.0), idx(exposure.1));
    if hi < 0 || lo >= forecast.len() as i64 {
        return Ok(ResilienceRecord::no_impact(port_id, storm_id));
    }
    let lo = lo.max(0) as usize;
    let hi = (hi as usize).min(forecast.len() - 1);
    let Some(w) = attribute_window(&outliers, lo, hi) else {
        return Ok(ResilienceRecord::no_impact(port_id, storm_id));
    };
    let (t_o, t_e) = (w.start, w.end);
    let t_s = locate_recovery_start(counts, t_o, t_e);
    let t_c = t_e + 1;
    let date = |i: usize| first + chrono::TimeDelta::days(i as i64);
    let m = if t_c < counts.len() {
        total_impact(counts, forecast, t_o, t_c, cfg.clamp_nonnegative)?
    } else {
        let mut m = total_impact(counts, forecast, t_o, t_e, cfg.clamp_nonnegative)?;
        m.missing_days += 1;
        m
    };
    Ok(ResilienceRecord {
        port_id,
        storm_id: storm_id.into(),
        t_o: Some(date(t_o)),
        t_s: Some(date(t_s)),
        t_e: Some(date(t_e)),
        t_c: Some(date(t_c)),
        total_impact: m.total_impact,
        total_impact_value: m.total_impact_value,
        max_impact: Some(m.max_impact),
        recovery_duration: recovery_duration(date(t_s), date(t_c)),
        nonpositive_lower_days: m.nonpositive_lower_days,
        missing_days: m.missing_days,
    })
}

/// Keeps records at ports whose mean daily count is at least `threshold`.
/// Ports without a known mean are dropped.
pub fn filter_low_traffic<T>(
    records: Vec<T>,
    port_of: impl Fn(&T) -> u32,
    port_means: &BTreeMap<u32, f64>,
    threshold: f64,
) -> Vec<T> {
    records
        .into_iter()
        .filter(|r| port_means.get(&port_of(r)).is_some_and(|&m| m >= threshold))
        .collect()
}
