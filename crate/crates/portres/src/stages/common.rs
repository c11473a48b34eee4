//! Readers for artifacts passed between stages.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{NaiveDate, TimeDelta};
use portres_core::ais::Coast;

use crate::error::{PipelineError, Result};
use crate::io::{parse_date, parse_f64, Table};

pub const PORTS: &str = "ports.csv";
pub const DAILY: &str = "daily_counts.csv";
pub const OD: &str = "od.csv";
pub const EXPOSURE: &str = "exposure.csv";
pub const FORECASTS: &str = "forecasts.csv";
pub const IMPACTS: &str = "impacts.csv";
pub const INTERACTIONS: &str = "interactions.csv";

pub fn bad(path: &Path, what: impl std::fmt::Display) -> PipelineError {
    PipelineError::invalid(format!("{}: {what}", path.display()))
}

pub fn cell_u32(path: &Path, s: &str) -> Result<u32> {
    s.trim()
        .parse()
        .map_err(|_| bad(path, format!("bad integer {s:?}")))
}

pub fn cell_date(path: &Path, s: &str) -> Result<NaiveDate> {
    parse_date(s).ok_or_else(|| bad(path, format!("bad date {s:?}")))
}

pub fn cell_f64(s: &str) -> f64 {
    parse_f64(s).unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortRow {
    pub port_id: u32,
    pub name: String,
    pub coast: Coast,
    pub lat: f64,
    pub lon: f64,
    pub mean_daily_count: f64,
}

pub fn read_ports(path: &Path) -> Result<Vec<PortRow>> {
    let t = Table::read(path)?;
    let c = |n| t.require(n, path);
    let (ip, iname, ic, ila, ilo, im) = (
        c("port_id")?,
        c("name")?,
        c("coast")?,
        c("lat")?,
        c("lon")?,
        c("mean_daily_count")?,
    );
    t.rows
        .iter()
        .map(|r| {
            Ok(PortRow {
                port_id: cell_u32(path, &r[ip])?,
                name: r[iname].clone(),
                coast: Coast::parse(&r[ic])
                    .ok_or_else(|| bad(path, format!("unknown coast {:?}", r[ic])))?,
                lat: cell_f64(&r[ila]),
                lon: cell_f64(&r[ilo]),
                mean_daily_count: cell_f64(&r[im]),
            })
        })
        .collect()
}

/// Daily counts per port on a contiguous date range.
#[derive(Debug, Clone, PartialEq)]
pub struct Daily {
    pub start: NaiveDate,
    pub counts: BTreeMap<u32, Vec<f64>>,
}

impl Daily {
    pub fn days(&self) -> usize {
        self.counts.values().next().map_or(0, Vec::len)
    }

    pub fn last(&self) -> NaiveDate {
        self.start + TimeDelta::days(self.days() as i64 - 1)
    }

    /// Count at `port` on `d`, NaN outside the observed range.
    pub fn at(&self, port: u32, d: NaiveDate) -> f64 {
        let i = (d - self.start).num_days();
        self.counts
            .get(&port)
            .and_then(|v| usize::try_from(i).ok().and_then(|i| v.get(i)))
            .copied()
            .unwrap_or(f64::NAN)
    }
}

pub fn read_daily(path: &Path) -> Result<Daily> {
    let t = Table::read(path)?;
    let (ip, id, ic) = (
        t.require("port_id", path)?,
        t.require("date", path)?,
        t.require("count", path)?,
    );
    let mut by: BTreeMap<u32, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for r in &t.rows {
        by.entry(cell_u32(path, &r[ip])?)
            .or_default()
            .push((cell_date(path, &r[id])?, cell_f64(&r[ic])));
    }
    let start = by
        .values()
        .filter_map(|v| v.iter().map(|x| x.0).min())
        .min()
        .ok_or_else(|| bad(path, "no daily counts"))?;
    let mut counts = BTreeMap::new();
    let mut len = None;
    for (port, mut v) in by {
        v.sort_by_key(|x| x.0);
        let contiguous = v
            .iter()
            .enumerate()
            .all(|(i, x)| x.0 == start + TimeDelta::days(i as i64));
        if !contiguous || len.is_some_and(|l| l != v.len()) {
            return Err(bad(
                path,
                format!("port {port} does not cover the common date range"),
            ));
        }
        len = Some(v.len());
        counts.insert(port, v.into_iter().map(|x| x.1).collect());
    }
    Ok(Daily { start, counts })
}

/// One exposure row, as written by the exposure stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureRow {
    pub port_id: u32,
    pub storm_id: String,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub closest_approach: String,
    /// Remaining columns by header name.
    pub values: BTreeMap<String, String>,
}

pub fn read_exposure(path: &Path) -> Result<Vec<ExposureRow>> {
    let t = Table::read(path)?;
    let c = |n| t.require(n, path);
    let (ip, is, ia, ib, ic) = (
        c("PID")?,
        c("SID")?,
        c("start_date")?,
        c("end_date")?,
        c("closest_approach")?,
    );
    t.rows
        .iter()
        .map(|r| {
            Ok(ExposureRow {
                port_id: cell_u32(path, &r[ip])?,
                storm_id: r[is].clone(),
                start_date: cell_date(path, &r[ia])?,
                end_date: cell_date(path, &r[ib])?,
                closest_approach: r[ic].clone(),
                values: t.header.iter().cloned().zip(r.iter().cloned()).collect(),
            })
        })
        .collect()
}
