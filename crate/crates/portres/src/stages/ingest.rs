//! AIS positions to port calls, daily counts and origin-destination legs.

use std::collections::BTreeMap;

use chrono::TimeDelta;
use portres_core::ais::{
    build_daily_series, extract_od, filter_commercial, segment_port_calls, AisPoint, PortIndex,
    SegmentConfig, VesselTypeFilter,
};
use serde::Serialize;

use super::common::{DAILY, OD, PORTS};
use super::{Context, Record};
use crate::error::{PipelineError, Result};
use crate::io::{self, fmt_bool, fmt_f64, fmt_time, AisRead, Table};

#[derive(Debug, Serialize)]
struct IngestLog {
    read: AisRead,
    commercial_points: usize,
    vessels: usize,
    calls: usize,
    short_visits_dropped: usize,
    overlap_points: usize,
    od_legs: usize,
    self_loops: usize,
    first_date: String,
    last_date: String,
}

pub fn hours(h: f64) -> TimeDelta {
    TimeDelta::milliseconds((h * 3_600_000.0).round() as i64)
}

pub(super) fn run(ctx: &Context, rec: &mut Record) -> Result<()> {
    let cfg = &ctx.cfg;
    let ais_path = rec.input(&cfg.paths.ais)?;
    let ports_path = rec.input(&cfg.paths.ports)?;
    let (points, read) = io::parse_ais(&io::read_bytes(&ais_path)?, &cfg.ais.columns)?;
    let ports = io::parse_ports(&io::read_text(&ports_path)?)?;
    let index = PortIndex::new(ports)?;

    let filter = VesselTypeFilter {
        ranges: cfg.ais.vessel_types.clone(),
    };
    let points = filter_commercial(points, &filter);
    let (Some(first), Some(last)) = (
        points.iter().map(|p| p.timestamp).min(),
        points.iter().map(|p| p.timestamp).max(),
    ) else {
        return Err(PipelineError::invalid(
            "no commercial AIS positions after filtering",
        ));
    };
    let (first, last) = (first.date_naive(), last.date_naive());
    let commercial_points = points.len();

    let mut by_vessel: BTreeMap<String, Vec<AisPoint>> = BTreeMap::new();
    for p in points {
        by_vessel.entry(p.vessel_id.clone()).or_default().push(p);
    }
    let seg_cfg = SegmentConfig {
        min_dwell: hours(cfg.ais.min_dwell_hours),
        max_gap: hours(cfg.ais.max_gap_hours),
    };
    let mut calls = Vec::new();
    let mut od = Vec::new();
    let (mut short, mut overlap) = (0, 0);
    for pts in by_vessel.values_mut() {
        pts.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then(a.lat.total_cmp(&b.lat))
                .then(a.lon.total_cmp(&b.lon))
        });
        let seg = segment_port_calls(pts, &index, &seg_cfg)?;
        short += seg.short_visits_dropped;
        overlap += seg.overlap_points;
        od.extend(extract_od(&seg.calls));
        calls.extend(seg.calls);
    }

    let mut t = Table::new(&["vessel_id", "port_id", "arrival", "departure"]);
    for c in &calls {
        t.push(vec![
            c.vessel_id.clone(),
            c.port_id.to_string(),
            fmt_time(c.arrival),
            fmt_time(c.departure),
        ]);
    }
    t.write(&rec.output(ctx.artifact("port_calls.csv")))?;

    let mut t = Table::new(&[
        "vessel_id",
        "origin_port",
        "dest_port",
        "depart",
        "arrive",
        "self_loop",
    ]);
    for o in &od {
        t.push(vec![
            o.vessel_id.clone(),
            o.origin_port.to_string(),
            o.dest_port.to_string(),
            fmt_time(o.depart),
            fmt_time(o.arrive),
            fmt_bool(o.is_self_loop()),
        ]);
    }
    t.write(&rec.output(ctx.artifact(OD)))?;

    let mut daily = Table::new(&["port_id", "date", "count"]);
    let mut ports_t = Table::new(&["port_id", "name", "coast", "lat", "lon", "mean_daily_count"]);
    for port in index.ports() {
        let s = build_daily_series(&calls, port.port_id, first, last)?;
        for (i, c) in s.counts.iter().enumerate() {
            daily.push(vec![
                port.port_id.to_string(),
                s.date(i).to_string(),
                c.to_string(),
            ]);
        }
        let c = port.centroid();
        ports_t.push(vec![
            port.port_id.to_string(),
            port.name.clone(),
            port.coast.as_str().into(),
            fmt_f64(c.lat),
            fmt_f64(c.lon),
            fmt_f64(s.mean()),
        ]);
    }
    daily.write(&rec.output(ctx.artifact(DAILY)))?;
    ports_t.write(&rec.output(ctx.artifact(PORTS)))?;

    let log = IngestLog {
        read,
        commercial_points,
        vessels: by_vessel.len(),
        calls: calls.len(),
        short_visits_dropped: short,
        overlap_points: overlap,
        od_legs: od.len(),
        self_loops: od.iter().filter(|o| o.is_self_loop()).count(),
        first_date: first.to_string(),
        last_date: last.to_string(),
    };
    let p = rec.output(ctx.artifact("ingest_log.json"));
    io::write_atomic(&p, (serde_json::to_string_pretty(&log)? + "\n").as_bytes())?;
    log::info!(
        "ingest: {} calls, {} legs, {} rejected rows",
        log.calls,
        log.od_legs,
        log.read.rejects
    );
    Ok(())
}
