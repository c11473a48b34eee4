//! Port/cyclone interactions and their gauge and station conditions.

use portres_core::exposure::{
    detect_interactions, join_weather, ExposureConfig, PortSite, Variable, WeatherConfig,
};
use portres_core::geo::LatLon;
use serde::Serialize;

use super::common::{read_ports, EXPOSURE, PORTS};
use super::ingest::hours;
use super::{Context, Record};
use crate::error::Result;
use crate::io::{self, fmt_bool, fmt_f64, fmt_opt, fmt_time, Table};

pub const COLUMNS: [&str; 15] = [
    "PID",
    "SID",
    "start_date",
    "end_date",
    "closest_approach",
    "DISTANCE",
    "SSHS",
    "WIND",
    "PRESSURE",
    "IF_LANDFALL",
    "IF_LANDFALL_CLOSE2PORT",
    "Wind_speed",
    "Surge_height",
    "Rainfall",
    "weather_missing",
];

#[derive(Debug, Serialize)]
struct ExposureLog {
    storms: usize,
    skipped_track_rows: usize,
    interactions: usize,
    weather_flagged: usize,
    warnings: Vec<String>,
}

fn finite(x: f64) -> String {
    if x.is_finite() {
        fmt_f64(x)
    } else {
        String::new()
    }
}

pub(super) fn run(ctx: &Context, rec: &mut Record) -> Result<()> {
    let cfg = &ctx.cfg;
    let ports = read_ports(&rec.input(&ctx.artifact(PORTS))?)?;
    let tracks_path = rec.input(&cfg.paths.tracks)?;
    let (tracks, skipped) = io::parse_tracks(&io::read_bytes(&tracks_path)?)?;
    let land = match &cfg.paths.land {
        Some(p) => Some(io::parse_land(&io::read_text(&rec.input(p)?)?)?),
        None => None,
    };
    let stations = io::parse_stations(&rec.input(&cfg.paths.stations)?)?;
    let mut series = Vec::new();
    for (p, v) in [
        (&cfg.paths.water_level, Variable::WaterLevel),
        (&cfg.paths.wind, Variable::Wind),
        (&cfg.paths.rainfall, Variable::Rainfall),
    ] {
        series.extend(io::parse_series(&rec.input(p)?, v)?);
    }

    let sites: Vec<PortSite> = ports
        .iter()
        .map(|p| PortSite {
            port_id: p.port_id,
            location: LatLon::new(p.lat, p.lon),
        })
        .collect();
    let ecfg = ExposureConfig {
        radius_km: cfg.exposure.radius_km,
        step: hours(cfg.exposure.step_hours),
    };
    let det = detect_interactions(&tracks, &sites, land.as_ref(), &ecfg);
    let wcfg = WeatherConfig {
        max_station_km: cfg.exposure.max_station_km,
        typical_days: cfg.exposure.typical_sea_level_days,
    };

    let mut t = Table::new(&COLUMNS);
    let mut flagged = 0;
    for w in &det.windows {
        let site = sites
            .iter()
            .find(|s| s.port_id == w.port_id)
            .expect("window port is a site");
        let wx = join_weather(w, site.location, &stations, &series, &wcfg);
        flagged += usize::from(wx.is_flagged());
        t.push(vec![
            w.port_id.to_string(),
            w.storm_id.clone(),
            w.start_date.to_string(),
            w.end_date.to_string(),
            fmt_time(w.closest_approach),
            fmt_f64(w.min_distance_km),
            w.max_sshs.to_string(),
            finite(w.max_wind),
            finite(w.min_pressure),
            fmt_bool(w.landfall),
            fmt_bool(w.landfall_close_to_port),
            fmt_opt(wx.wind_speed),
            fmt_opt(wx.surge_height),
            fmt_opt(wx.rainfall),
            wx.missing.join(";"),
        ]);
    }
    t.write(&rec.output(ctx.artifact(EXPOSURE)))?;

    let log = ExposureLog {
        storms: tracks.len(),
        skipped_track_rows: skipped,
        interactions: det.windows.len(),
        weather_flagged: flagged,
        warnings: det.warnings,
    };
    let p = rec.output(ctx.artifact("exposure_log.json"));
    io::write_atomic(&p, (serde_json::to_string_pretty(&log)? + "\n").as_bytes())?;
    log::info!(
        "exposure: {} interactions from {} storms",
        log.interactions,
        log.storms
    );
    Ok(())
}
