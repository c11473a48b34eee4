//! Port/cyclone interactions from the eye-track buffer, plus station weather joins.

use alloc::string::String;
use alloc::vec::Vec;

use chrono::{DateTime, NaiveDate, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use crate::geo::{haversine_km, LatLon, MultiPolygon};
use crate::stats;
use crate::{Error, Result};

pub const DEFAULT_RADIUS_KM: f64 = 500.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackPoint {
    pub storm_id: String,
    pub timestamp: DateTime<Utc>,
    pub lat: f64,
    pub lon: f64,
    /// Knots.
    pub wind: f64,
    /// hPa.
    pub pressure: f64,
    /// -1 tropical depression, 0 tropical storm, 1..=5 hurricane category.
    pub sshs: i8,
}

impl TrackPoint {
    pub fn position(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.position().is_valid() {
            return Err(Error::OutOfRange {
                what: "track position",
                value: self.lat,
            });
        }
        if !(-1..=5).contains(&self.sshs) {
            return Err(Error::OutOfRange {
                what: "sshs",
                value: self.sshs as f64,
            });
        }
        Ok(())
    }
}

/// One storm's fixes, strictly increasing in time.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub storm_id: String,
    points: Vec<TrackPoint>,
}

impl Track {
    pub fn new(storm_id: impl Into<String>, points: Vec<TrackPoint>) -> Result<Self> {
        for p in &points {
            p.validate()?;
        }
        if points.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
            return Err(Error::Unsorted("storm track"));
        }
        Ok(Self {
            storm_id: storm_id.into(),
            points,
        })
    }

    pub fn points(&self) -> &[TrackPoint] {
        &self.points
    }

    /// Positions every `step` between fixes, always keeping the fixes themselves.
    ///
    /// Wind and pressure are interpolated linearly; the category is taken from
    /// the nearer fix in time (earlier on ties).
    pub fn interpolate(&self, step: TimeDelta) -> Vec<TrackPoint> {
        let step = if step <= TimeDelta::zero() {
            TimeDelta::hours(1)
        } else {
            step
        };
        let mut out = Vec::new();
        for w in self.points.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let span = (b.timestamp - a.timestamp).num_milliseconds() as f64;
            let mut dlon = b.lon - a.lon;
            if dlon > 180.0 {
                dlon -= 360.0;
            } else if dlon < -180.0 {
                dlon += 360.0;
            }
            let mut t = a.timestamp;
            while t < b.timestamp {
                let f = (t - a.timestamp).num_milliseconds() as f64 / span;
                let mut lon = a.lon + f * dlon;
                if lon > 180.0 {
                    lon -= 360.0;
                } else if lon < -180.0 {
                    lon += 360.0;
                }
                out.push(TrackPoint {
                    storm_id: a.storm_id.clone(),
                    timestamp: t,
                    lat: a.lat + f * (b.lat - a.lat),
                    lon,
                    wind: a.wind + f * (b.wind - a.wind),
                    pressure: a.pressure + f * (b.pressure - a.pressure),
                    sshs: if f <= 0.5 { a.sshs } else { b.sshs },
                });
                t += step;
            }
        }
        if let Some(last) = self.points.last() {
            out.push(last.clone());
        }
        out
    }
}

/// A port as seen by the exposure step: an id and its reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortSite {
    pub port_id: u32,
    pub location: LatLon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureWindow {
    pub port_id: u32,
    pub storm_id: String,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub min_distance_km: f64,
    pub closest_approach: DateTime<Utc>,
    pub max_sshs: i8,
    pub max_wind: f64,
    pub min_pressure: f64,
    pub landfall: bool,
    pub landfall_close_to_port: bool,
}

impl ExposureWindow {
    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start_date <= d && d <= self.end_date
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureConfig {
    pub radius_km: f64,
    pub step: TimeDelta,
}

impl Default for ExposureConfig {
    fn default() -> Self {
        Self {
            radius_km: DEFAULT_RADIUS_KM,
            step: TimeDelta::hours(1),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Detection {
    pub windows: Vec<ExposureWindow>,
    pub warnings: Vec<String>,
}

/// First raw fix over land, if any.
pub fn landfall_point<'a>(track: &'a Track, land: &MultiPolygon) -> Option<&'a TrackPoint> {
    track.points.iter().find(|p| land.contains(p.position()))
}

/// Every (port, storm) pair whose closest interpolated eye position lies within
/// `cfg.radius_km`, sorted by port then storm.
pub fn detect_interactions(
    tracks: &[Track],
    ports: &[PortSite],
    land: Option<&MultiPolygon>,
    cfg: &ExposureConfig,
) -> Detection {
    let mut out = Detection::default();
    for track in tracks {
        let path = if track.points.len() < 2 {
            out.warnings.push(alloc::format!(
                "storm {} has {} track point(s); distances use raw fixes",
                track.storm_id,
                track.points.len()
            ));
            track.points.clone()
        } else {
            track.interpolate(cfg.step)
        };
        let landfall = land.and_then(|l| landfall_point(track, l));
        for port in ports {
            let mut first: Option<DateTime<Utc>> = None;
            let mut last = None;
            let mut best: Option<(f64, DateTime<Utc>)> = None;
            let (mut max_sshs, mut max_wind, mut min_pressure) =
                (i8::MIN, f64::NEG_INFINITY, f64::INFINITY);
            for p in &path {
                let d = haversine_km(port.location, p.position());
                if d > cfg.radius_km {
                    continue;
                }
                first.get_or_insert(p.timestamp);
                last = Some(p.timestamp);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, p.timestamp));
                }
                max_sshs = max_sshs.max(p.sshs);
                max_wind = max_wind.max(p.wind);
                min_pressure = min_pressure.min(p.pressure);
            }
            if let (Some(first), Some(last), Some((min_distance_km, closest))) = (first, last, best)
            {
                out.windows.push(ExposureWindow {
                    port_id: port.port_id,
                    storm_id: track.storm_id.clone(),
                    start_date: first.date_naive(),
                    end_date: last.date_naive(),
                    min_distance_km,
                    closest_approach: closest,
                    max_sshs,
                    max_wind,
                    min_pressure,
                    landfall: landfall.is_some(),
                    landfall_close_to_port: landfall.is_some_and(|lp| {
                        haversine_km(port.location, lp.position()) <= cfg.radius_km
                    }),
                });
            }
        }
    }
    out.windows.sort_by(|a, b| {
        a.port_id
            .cmp(&b.port_id)
            .then_with(|| a.storm_id.cmp(&b.storm_id))
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    WaterLevel,
    Wind,
    Rainfall,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub station_id: String,
    pub location: LatLon,
}

/// Time-sorted observations of one variable at one station.
#[derive(Debug, Clone, PartialEq)]
pub struct StationSeries {
    pub station_id: String,
    pub variable: Variable,
    pub observations: Vec<(DateTime<Utc>, f64)>,
}

impl StationSeries {
    fn between(&self, from: DateTime<Utc>, to: DateTime<Utc>) -> impl Iterator<Item = f64> + '_ {
        let lo = self.observations.partition_point(|(t, _)| *t < from);
        let hi = self.observations.partition_point(|(t, _)| *t < to);
        self.observations[lo..hi].iter().map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherConfig {
    pub max_station_km: f64,
    /// Days before the window whose median water level is the typical sea level.
    pub typical_days: i64,
}

impl Default for WeatherConfig {
    fn default() -> Self {
        Self {
            max_station_km: 100.0,
            typical_days: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSummary {
    pub port_id: u32,
    pub storm_id: String,
    pub wind_speed: Option<f64>,
    pub surge_height: Option<f64>,
    pub rainfall: Option<f64>,
    /// Names of the fields left missing, empty when all three were joined.
    pub missing: Vec<String>,
}

impl WeatherSummary {
    pub fn is_flagged(&self) -> bool {
        !self.missing.is_empty()
    }
}

fn nearest<'a>(
    from: LatLon,
    variable: Variable,
    stations: &'a [Station],
    series: &'a [StationSeries],
    max_km: f64,
) -> Option<&'a StationSeries> {
    let mut best: Option<(f64, &StationSeries)> = None;
    for s in series.iter().filter(|s| s.variable == variable) {
        let Some(st) = stations.iter().find(|st| st.station_id == s.station_id) else {
            continue;
        };
        let d = haversine_km(from, st.location);
        if d <= max_km
            && best.is_none_or(|(bd, bs)| d < bd || (d == bd && s.station_id < bs.station_id))
        {
            best = Some((d, s));
        }
    }
    best.map(|(_, s)| s)
}

/// Peak wind, surge above typical level and accumulated rain over the window days.
pub fn join_weather(
    window: &ExposureWindow,
    port: LatLon,
    stations: &[Station],
    series: &[StationSeries],
    cfg: &WeatherConfig,
) -> WeatherSummary {
    let from = window.start_date.and_hms_opt(0, 0, 0).unwrap().and_utc();
    let to = (window.end_date + TimeDelta::days(1))
        .and_hms_opt(0, 0, 0)
        .unwrap()
        .and_utc();
    let pick = |v| nearest(port, v, stations, series, cfg.max_station_km);

    let wind_speed = pick(Variable::Wind).and_then(|s| s.between(from, to).reduce(f64::max));
    let surge_height = pick(Variable::WaterLevel).and_then(|s| {
        let peak = s.between(from, to).reduce(f64::max)?;
        let before: Vec<f64> = s
            .between(from - TimeDelta::days(cfg.typical_days), from)
            .collect();
        if before.is_empty() {
            return None;
        }
        Some(peak - stats::median(&before))
    });
    let rainfall = pick(Variable::Rainfall).and_then(|s| {
        let mut it = s.between(from, to).peekable();
        it.peek()?;
        Some(it.sum::<f64>())
    });

    let mut missing = Vec::new();
    for (name, v) in [
        ("wind_speed", wind_speed),
        ("surge_height", surge_height),
        ("rainfall", rainfall),
    ] {
        if v.is_none() {
            missing.push(String::from(name));
        }
    }
    WeatherSummary {
        port_id: window.port_id,
        storm_id: window.storm_id.clone(),
        wind_speed,
        surge_height,
        rainfall,
        missing,
    }
}
