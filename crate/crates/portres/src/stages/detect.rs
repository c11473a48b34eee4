//! Impact windows and resilience metrics for every interaction.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use portres_core::baseline::Forecast;
use portres_core::impact::{evaluate_interaction, filter_low_traffic, ResilienceRecord};
use serde::Serialize;

use super::common::{
    bad, cell_date, cell_f64, cell_u32, read_daily, read_exposure, read_ports, DAILY, EXPOSURE,
    FORECASTS, IMPACTS, PORTS,
};
use super::{Context, Record};
use crate::error::Result;
use crate::io::{self, fmt_bool, fmt_date, fmt_f64, Table};

pub const COLUMNS: [&str; 15] = [
    "ID",
    "SID",
    "PID",
    "port",
    "start_date",
    "end_date",
    "impact_start_date",
    "start_recovery_date",
    "impact_end_date",
    "end_recovery_date",
    "total_impact",
    "total_impact_value",
    "max_impact",
    "day_of_recover",
    "flags",
];

#[derive(Debug, Serialize)]
struct DetectLog {
    interactions: usize,
    without_forecast: Vec<String>,
    low_traffic_dropped: usize,
    kept: usize,
    with_impact: usize,
}

fn flags(r: &ResilienceRecord) -> String {
    let mut f = Vec::new();
    if !r.has_impact() {
        f.push("no_impact".to_string());
    }
    if r.nonpositive_lower_days > 0 {
        f.push(format!("nonpositive_lower={}", r.nonpositive_lower_days));
    }
    if r.missing_days > 0 {
        f.push(format!("missing_days={}", r.missing_days));
    }
    f.join(";")
}

pub(super) fn run(ctx: &Context, rec: &mut Record) -> Result<()> {
    let daily = read_daily(&rec.input(&ctx.artifact(DAILY))?)?;
    let exposure = read_exposure(&rec.input(&ctx.artifact(EXPOSURE))?)?;
    let ports = read_ports(&rec.input(&ctx.artifact(PORTS))?)?;
    let fpath = rec.input(&ctx.artifact(FORECASTS))?;
    let ft = Table::read(&fpath)?;
    let c = |n| ft.require(n, &fpath);
    let (ip, is, id, iy, il, iu) = (
        c("PID")?,
        c("SID")?,
        c("date")?,
        c("yhat")?,
        c("lower")?,
        c("upper")?,
    );
    let mut forecasts: BTreeMap<(u32, String), Forecast> = BTreeMap::new();
    for r in &ft.rows {
        let f = forecasts
            .entry((cell_u32(&fpath, &r[ip])?, r[is].clone()))
            .or_insert_with(|| Forecast {
                dates: Vec::new(),
                yhat: Vec::new(),
                lower: Vec::new(),
                upper: Vec::new(),
            });
        let d = cell_date(&fpath, &r[id])?;
        if f.dates
            .last()
            .is_some_and(|&l| d != l.succ_opt().unwrap_or(l))
        {
            return Err(bad(
                &fpath,
                format!(
                    "forecast for port {} storm {} is not contiguous",
                    r[ip], r[is]
                ),
            ));
        }
        f.dates.push(d);
        f.yhat.push(cell_f64(&r[iy]));
        f.lower.push(cell_f64(&r[il]));
        f.upper.push(cell_f64(&r[iu]));
    }

    let cfg = &ctx.cfg.impact;
    let mut records = Vec::with_capacity(exposure.len());
    let mut without = Vec::new();
    for w in &exposure {
        let Some(f) = forecasts.get(&(w.port_id, w.storm_id.clone())) else {
            without.push(format!("{}/{}", w.port_id, w.storm_id));
            records.push((w, ResilienceRecord::no_impact(w.port_id, &w.storm_id), None));
            continue;
        };
        let counts: Vec<f64> = f.dates.iter().map(|&d| daily.at(w.port_id, d)).collect();
        let r = evaluate_interaction(
            w.port_id,
            &w.storm_id,
            &counts,
            f,
            (w.start_date, w.end_date),
            cfg,
        )?;
        records.push((w, r, Some((f, counts))));
    }
    let total = records.len();
    let means: BTreeMap<u32, f64> = ports
        .iter()
        .map(|p| (p.port_id, p.mean_daily_count))
        .collect();
    let kept = filter_low_traffic(records, |r| r.1.port_id, &means, cfg.low_traffic_threshold);
    let names: BTreeMap<u32, &str> = ports.iter().map(|p| (p.port_id, p.name.as_str())).collect();

    let mut t = Table::new(&COLUMNS);
    let mut curves = Table::new(&[
        "ID",
        "PID",
        "SID",
        "date",
        "count",
        "yhat",
        "lower",
        "upper",
        "in_exposure",
        "in_impact_window",
    ]);
    for (k, (w, r, fc)) in kept.iter().enumerate() {
        let id = (k + 1).to_string();
        t.push(vec![
            id.clone(),
            w.storm_id.clone(),
            w.port_id.to_string(),
            names
                .get(&w.port_id)
                .copied()
                .unwrap_or_default()
                .to_string(),
            w.start_date.to_string(),
            w.end_date.to_string(),
            fmt_date(r.t_o),
            fmt_date(r.t_s),
            fmt_date(r.t_e),
            fmt_date(r.t_c),
            fmt_f64(r.total_impact),
            fmt_f64(r.total_impact_value),
            fmt_f64(r.max_impact.unwrap_or(0.0)),
            r.recovery_duration.to_string(),
            flags(r),
        ]);
        let Some((f, counts)) = fc else { continue };
        let in_impact = |d: NaiveDate| r.t_o.zip(r.t_e).is_some_and(|(a, b)| a <= d && d <= b);
        for (i, &d) in f.dates.iter().enumerate() {
            curves.push(vec![
                id.clone(),
                w.port_id.to_string(),
                w.storm_id.clone(),
                d.to_string(),
                fmt_f64(counts[i]),
                fmt_f64(f.yhat[i]),
                fmt_f64(f.lower[i]),
                fmt_f64(f.upper[i]),
                fmt_bool(w.start_date <= d && d <= w.end_date),
                fmt_bool(in_impact(d)),
            ]);
        }
    }
    t.write(&rec.output(ctx.artifact(IMPACTS)))?;
    curves.write(&rec.output(ctx.artifact("resilience_curves.csv")))?;

    let log = DetectLog {
        interactions: total,
        without_forecast: without,
        low_traffic_dropped: total - kept.len(),
        kept: kept.len(),
        with_impact: kept.iter().filter(|r| r.1.has_impact()).count(),
    };
    let p = rec.output(ctx.artifact("detect_log.json"));
    io::write_atomic(&p, (serde_json::to_string_pretty(&log)? + "\n").as_bytes())?;
    log::info!(
        "detect: {} of {} interactions kept, {} with impact",
        log.kept,
        total,
        log.with_impact
    );
    Ok(())
}
