//! Counterfactual forecasts with every cyclone window of a port masked.

use std::collections::BTreeMap;

use chrono::TimeDelta;
use portres_core::baseline::{fit_forecaster, FittedBaseline, MaskSpec};
use rayon::prelude::*;

use super::common::{read_daily, read_exposure, ExposureRow, DAILY, EXPOSURE, FORECASTS};
use super::{Context, Record};
use crate::error::Result;
use crate::io::{fmt_bool, fmt_f64, Table};

pub(super) fn run(ctx: &Context, rec: &mut Record) -> Result<()> {
    let daily = read_daily(&rec.input(&ctx.artifact(DAILY))?)?;
    let exposure = read_exposure(&rec.input(&ctx.artifact(EXPOSURE))?)?;
    let b = &ctx.cfg.baseline;
    let mask = |w: &ExposureRow| MaskSpec {
        start: w.start_date,
        end: w.end_date,
        pad_before: b.pad_before_days,
        pad_after: b.pad_after_days,
    };

    let mut by_port: BTreeMap<u32, Vec<&ExposureRow>> = BTreeMap::new();
    for w in &exposure {
        by_port.entry(w.port_id).or_default().push(w);
    }
    let jobs: Vec<(u32, Vec<&ExposureRow>)> = by_port
        .into_iter()
        .filter(|(p, _)| daily.counts.contains_key(p))
        .collect();
    let fits: Vec<Result<FittedBaseline>> = jobs
        .par_iter()
        .map(|(port, ws)| {
            let masks: Vec<MaskSpec> = ws.iter().map(|w| mask(w)).collect();
            Ok(fit_forecaster(
                daily.start,
                &daily.counts[port],
                &masks,
                &b.fit,
            )?)
        })
        .collect();

    let mut fc = Table::new(&["PID", "SID", "date", "yhat", "lower", "upper"]);
    let mut ft = Table::new(&[
        "PID",
        "n_train",
        "lambda",
        "residual_sd",
        "short_history",
        "degenerate",
        "masked_windows",
    ]);
    for ((port, ws), fit) in jobs.iter().zip(fits) {
        let fit = fit?;
        ft.push(vec![
            port.to_string(),
            fit.n_train.to_string(),
            fmt_f64(fit.lambda),
            fmt_f64(fit.residual_sd),
            fmt_bool(fit.short_history),
            fmt_bool(fit.degenerate),
            ws.len().to_string(),
        ]);
        for w in ws {
            let m = mask(w);
            // one trailing day so a window ending on the last masked day has a t_c
            let first = m.first().max(daily.start);
            let last = (m.last() + TimeDelta::days(1)).min(daily.last());
            if last < first {
                continue;
            }
            let f = fit.predict_range(first, last);
            for i in 0..f.len() {
                fc.push(vec![
                    port.to_string(),
                    w.storm_id.clone(),
                    f.dates[i].to_string(),
                    fmt_f64(f.yhat[i]),
                    fmt_f64(f.lower[i]),
                    fmt_f64(f.upper[i]),
                ]);
            }
        }
    }
    fc.write(&rec.output(ctx.artifact(FORECASTS)))?;
    ft.write(&rec.output(ctx.artifact("baseline_fits.csv")))?;
    log::info!("baseline: {} ports fitted", jobs.len());
    Ok(())
}
