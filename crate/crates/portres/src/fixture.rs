//! Deterministic synthetic inputs for the whole pipeline.
//!
//! Vessels shuttle between square port polygons; cyclones are straight
//! tracks aimed past target ports, and a port closes while a storm eye is
//! near it, so departures are pulled forward and arrivals wait offshore.
//! Gauges and stations near each port record tide, surge, wind and rain.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{DateTime, Datelike, NaiveDate, TimeDelta, Utc};
use portres_core::geo::{haversine_km, LatLon};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::Serialize;
use serde_json::json;

use crate::error::Result;
use crate::io::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureOptions {
    pub start: NaiveDate,
    pub days: i64,
    /// Vessels trading between Gulf, East-coast and inland ports.
    pub atlantic_vessels: usize,
    pub pacific_vessels: usize,
    pub storms_per_season: usize,
    pub mcmc_iterations: usize,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date"),
            days: 800,
            atlantic_vessels: 110,
            pacific_vessels: 24,
            storms_per_season: 8,
            mcmc_iterations: 2000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FixtureSummary {
    pub ports: usize,
    pub vessels: usize,
    pub storms: usize,
    pub ais_rows: usize,
    pub closures: usize,
}

struct Port {
    id: u32,
    name: &'static str,
    coast: &'static str,
    lat: f64,
    lon: f64,
    weight: f64,
    pacific: bool,
    /// Has a tide gauge within range.
    gauge: bool,
}

const HALF: f64 = 0.05;

fn ports() -> Vec<Port> {
    let p = |id, name, coast, lat, lon, weight, gauge| Port {
        id,
        name,
        coast,
        lat,
        lon,
        weight,
        pacific: coast == "Pacific",
        gauge,
    };
    vec![
        p(1, "Houston", "Gulf", 29.75, -95.00, 3.0, true),
        p(2, "New Orleans", "Gulf", 29.95, -90.05, 3.0, true),
        p(3, "Mobile", "Gulf", 30.70, -88.04, 1.4, true),
        p(4, "Tampa", "Gulf", 27.95, -82.45, 1.6, true),
        p(5, "Corpus Christi", "Gulf", 27.80, -97.40, 1.4, true),
        p(6, "Lake Charles", "Gulf", 30.20, -93.20, 0.45, true),
        p(7, "Savannah", "East", 32.08, -81.09, 2.6, true),
        p(8, "Charleston", "East", 32.78, -79.92, 1.6, true),
        p(9, "Jacksonville", "East", 30.40, -81.60, 1.2, true),
        p(10, "Norfolk", "East", 36.95, -76.30, 2.0, false),
        p(11, "New York", "East", 40.67, -74.05, 3.0, true),
        p(12, "Memphis", "NonCoast", 35.10, -90.07, 0.4, false),
        p(13, "Los Angeles", "Pacific", 33.74, -118.26, 2.5, true),
        p(14, "Oakland", "Pacific", 37.80, -122.30, 1.5, true),
    ]
}

fn hours(h: f64) -> TimeDelta {
    TimeDelta::seconds((h * 3600.0).round() as i64)
}

fn ts(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%S").to_string()
}

/// Offset `km_north`, `km_east` from `p` on a local flat approximation.
fn shift(p: LatLon, km_north: f64, km_east: f64) -> LatLon {
    LatLon::new(
        p.lat + km_north / 111.2,
        p.lon + km_east / (111.2 * p.lat.to_radians().cos()),
    )
}

struct Storm {
    sid: String,
    /// (time, position, SSHS, wind kt, pressure hPa)
    fixes: Vec<(DateTime<Utc>, LatLon, i8, f64, f64)>,
}

impl Storm {
    fn position(&self, t: DateTime<Utc>) -> Option<(LatLon, i8)> {
        let i = self
            .fixes
            .windows(2)
            .position(|w| w[0].0 <= t && t <= w[1].0)?;
        let (a, b) = (&self.fixes[i], &self.fixes[i + 1]);
        let f = (t - a.0).num_seconds() as f64 / (b.0 - a.0).num_seconds() as f64;
        Some((
            LatLon::new(
                a.1.lat + f * (b.1.lat - a.1.lat),
                a.1.lon + f * (b.1.lon - a.1.lon),
            ),
            if f < 0.5 { a.2 } else { b.2 },
        ))
    }

    /// Closest approach to `p` over hourly positions: (km, time, SSHS there).
    fn closest(&self, p: LatLon) -> (f64, DateTime<Utc>, i8) {
        let (t0, t1) = (self.fixes[0].0, self.fixes[self.fixes.len() - 1].0);
        let mut best = (f64::INFINITY, t0, -1);
        let mut t = t0;
        while t <= t1 {
            if let Some((q, c)) = self.position(t) {
                let d = haversine_km(p, q);
                if d < best.0 {
                    best = (d, t, c);
                }
            }
            t += TimeDelta::hours(1);
        }
        best
    }
}

fn wind_for(cat: i8) -> f64 {
    match cat {
        -1 => 30.0,
        0 => 50.0,
        1 => 75.0,
        2 => 90.0,
        3 => 105.0,
        4 => 125.0,
        _ => 145.0,
    }
}

fn make_storms(rng: &mut ChaCha8Rng, ports: &[Port], opt: &FixtureOptions) -> Vec<Storm> {
    let targets: Vec<&Port> = ports
        .iter()
        .filter(|p| p.coast == "Gulf" || p.coast == "East")
        .collect();
    let end = opt.start + TimeDelta::days(opt.days);
    let mut out = Vec::new();
    let mut year = opt.start.year();
    loop {
        let season = NaiveDate::from_ymd_opt(year, 6, 15).expect("valid date");
        if season > end - TimeDelta::days(30) {
            break;
        }
        for k in 0..opt.storms_per_season {
            let day = 150 * k as i64 / opt.storms_per_season as i64 + rng.random_range(0..12);
            let tc = (season + TimeDelta::days(day))
                .and_hms_opt(rng.random_range(0..24), 0, 0)
                .expect("valid time")
                .and_utc();
            if tc.date_naive() + TimeDelta::days(20) > end {
                continue;
            }
            let target = targets[rng.random_range(0..targets.len())];
            let peak: i8 = rng.random_range(-1..=4);
            let offset = rng.random_range(-120.0..120.0);
            let heading = (315.0f64 + rng.random_range(-40.0..40.0)).to_radians();
            let speed = rng.random_range(14.0..24.0);
            let (dn, de) = (heading.cos(), heading.sin());
            let center = shift(
                LatLon::new(target.lat, target.lon),
                -de * offset,
                dn * offset,
            );
            let mut fixes = Vec::new();
            for i in -12i64..=10 {
                let t = tc + TimeDelta::hours(6 * i);
                let km = speed * 6.0 * i as f64;
                let pos = shift(center, dn * km, de * km);
                // intensify on approach, weaken after passing
                let cat = if i < -6 {
                    peak.min(0).max(-1)
                } else if i <= 2 {
                    peak
                } else {
                    (peak - ((i - 2) / 2) as i8).max(-1)
                };
                let wind = wind_for(cat) + rng.random_range(-3.0..3.0);
                let pres = 1010.0 - 0.9 * (wind - 30.0);
                fixes.push((t, pos, cat, wind.round(), pres.round()));
            }
            out.push(Storm {
                sid: format!(
                    "{}{:03}N{:05}",
                    year,
                    150 + out.len(),
                    1000 + 17 * out.len()
                ),
                fixes,
            });
        }
        year += 1;
    }
    out
}

/// Closed intervals per port caused by nearby storms.
fn closures(
    rng: &mut ChaCha8Rng,
    ports: &[Port],
    storms: &[Storm],
) -> BTreeMap<u32, Vec<(DateTime<Utc>, DateTime<Utc>)>> {
    let mut out: BTreeMap<u32, Vec<_>> = BTreeMap::new();
    for s in storms {
        for p in ports {
            let (d, t, cat) = s.closest(LatLon::new(p.lat, p.lon));
            let c = f64::from(cat.max(0));
            if d < 200.0 + 70.0 * c {
                let from = t - hours(24.0 + 12.0 * c);
                let to = t + hours(48.0 + 36.0 * c + rng.random_range(0.0..48.0));
                out.entry(p.id).or_default().push((from, to));
            }
        }
    }
    out
}

fn closed_at(cl: &[(DateTime<Utc>, DateTime<Utc>)], t: DateTime<Utc>) -> Option<DateTime<Utc>> {
    cl.iter().find(|(a, b)| *a <= t && t < *b).map(|c| c.1)
}

fn next_closure(
    cl: &[(DateTime<Utc>, DateTime<Utc>)],
    from: DateTime<Utc>,
    to: DateTime<Utc>,
) -> Option<DateTime<Utc>> {
    cl.iter()
        .filter(|(a, _)| from < *a && *a < to)
        .map(|c| c.0)
        .min()
}

struct AisWriter {
    text: String,
    rows: usize,
}

impl AisWriter {
    fn point(&mut self, id: u64, t: DateTime<Utc>, p: LatLon, vtype: u16) {
        let _ = writeln!(
            self.text,
            "{id},{},{:.5},{:.5},{vtype}",
            ts(t),
            p.lat,
            p.lon
        );
        self.rows += 1;
    }
}

fn in_port(rng: &mut ChaCha8Rng, p: &Port) -> LatLon {
    LatLon::new(
        p.lat + rng.random_range(-0.03..0.03),
        p.lon + rng.random_range(-0.03..0.03),
    )
}

/// Offshore position on the way from `a` to `b`, bowed away from the line.
fn at_sea(a: &Port, b: &Port, f: f64) -> LatLon {
    let (la, lo) = (a.lat + f * (b.lat - a.lat), a.lon + f * (b.lon - a.lon));
    let bow = 0.4 + 0.8 * (PI * f).sin();
    LatLon::new(la - bow * 0.6, lo + bow * 0.8)
}

#[allow(clippy::too_many_arguments)]
fn vessel_track(
    rng: &mut ChaCha8Rng,
    w: &mut AisWriter,
    id: u64,
    vtype: u16,
    fleet: &[&Port],
    closed: &BTreeMap<u32, Vec<(DateTime<Utc>, DateTime<Utc>)>>,
    start: DateTime<Utc>,
    end: DateTime<Utc>,
) {
    let total: f64 = fleet.iter().map(|p| p.weight).sum();
    let pick = |rng: &mut ChaCha8Rng| {
        let mut u = rng.random_range(0.0..total);
        for p in fleet {
            if u < p.weight {
                return *p;
            }
            u -= p.weight;
        }
        fleet[fleet.len() - 1]
    };
    let none = Vec::new();
    let mut port = pick(rng);
    let mut t = start + hours(rng.random_range(0.0..120.0));
    while t < end {
        let cl = closed.get(&port.id).unwrap_or(&none);
        // wait offshore while the port is closed
        if let Some(reopen) = closed_at(cl, t) {
            let anchor = LatLon::new(port.lat - 0.35, port.lon + 0.35);
            let mut s = t;
            while s < reopen {
                w.point(id, s, anchor, vtype);
                s += TimeDelta::hours(8);
            }
            t = reopen + hours(rng.random_range(0.0..12.0));
        }
        let short = rng.random_bool(0.03);
        let dwell = if short {
            rng.random_range(1.0..3.9)
        } else {
            rng.random_range(12.0..72.0)
        };
        let mut dep = t + hours(dwell);
        if let Some(c) = next_closure(cl, t, dep) {
            dep = (c - hours(rng.random_range(0.0..6.0))).max(t + TimeDelta::hours(1));
        }
        let step = if short {
            TimeDelta::hours(1)
        } else {
            TimeDelta::hours(4)
        };
        let mut s = t;
        while s < dep {
            w.point(id, s, in_port(rng, port), vtype);
            s += step;
        }
        w.point(id, dep, in_port(rng, port), vtype);

        let next = if rng.random_bool(0.03) {
            port
        } else {
            let mut n = pick(rng);
            while n.id == port.id && fleet.len() > 1 {
                n = pick(rng);
            }
            n
        };
        let km = haversine_km(
            LatLon::new(port.lat, port.lon),
            LatLon::new(next.lat, next.lon),
        )
        .max(150.0);
        let transit = km / 28.0 + rng.random_range(6.0..24.0);
        let n_sea = (transit / 8.0).floor().max(1.0) as usize;
        for k in 1..=n_sea {
            let f = k as f64 / (n_sea + 1) as f64;
            w.point(id, dep + hours(transit * f), at_sea(port, next, f), vtype);
        }
        t = dep + hours(transit);
        port = next;
    }
}

fn square(p: &Port) -> serde_json::Value {
    let (a, b, c, d) = (p.lon - HALF, p.lon + HALF, p.lat - HALF, p.lat + HALF);
    json!({"type": "Polygon", "coordinates": [[[a, c], [b, c], [b, d], [a, d], [a, c]]]})
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    write_atomic(path, (serde_json::to_string_pretty(v)? + "\n").as_bytes())
}

/// Writes the fixture set and a matching `portres.toml` into `dir`.
pub fn generate(dir: &Path, seed: u64, opt: &FixtureOptions) -> Result<FixtureSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ports = ports();
    let start = opt
        .start
        .and_hms_opt(0, 0, 0)
        .expect("valid time")
        .and_utc();
    let end = start + TimeDelta::days(opt.days) - TimeDelta::seconds(1);

    let storms = make_storms(&mut rng, &ports, opt);
    let closed = closures(&mut rng, &ports, &storms);

    // ports
    let feats: Vec<_> = ports
        .iter()
        .map(|p| {
            json!({"type": "Feature",
                   "properties": {"port_id": p.id, "name": p.name, "coast": p.coast},
                   "geometry": square(p)})
        })
        .collect();
    write_json(
        &dir.join("ports.geojson"),
        &json!({"type": "FeatureCollection", "features": feats}),
    )?;
    // mainland, coarse: landfall is any fix north of the coastline box
    let land = json!({"type": "FeatureCollection", "features": [{"type": "Feature", "properties": {},
        "geometry": {"type": "Polygon", "coordinates": [[[-124.0, 30.3], [-75.5, 30.3], [-75.5, 49.0], [-124.0, 49.0], [-124.0, 30.3]]]}}]});
    write_json(&dir.join("land.geojson"), &land)?;

    // AIS
    let mut w = AisWriter {
        text: String::from("MMSI,BaseDateTime,LAT,LON,VesselType\n"),
        rows: 0,
    };
    let atlantic: Vec<&Port> = ports.iter().filter(|p| !p.pacific).collect();
    let pacific: Vec<&Port> = ports.iter().filter(|p| p.pacific).collect();
    let mut mmsi = 366_000_000u64;
    let mut vessels = 0;
    for (fleet, n) in [
        (&atlantic, opt.atlantic_vessels),
        (&pacific, opt.pacific_vessels),
    ] {
        for _ in 0..n {
            mmsi += 7;
            let vtype = if rng.random_bool(0.6) {
                rng.random_range(70..=79)
            } else {
                rng.random_range(80..=89)
            };
            vessel_track(&mut rng, &mut w, mmsi, vtype, fleet, &closed, start, end);
            vessels += 1;
        }
    }
    // pleasure craft and tugs that the type filter removes
    for _ in 0..8 {
        mmsi += 7;
        let vtype = if rng.random_bool(0.5) { 37 } else { 52 };
        vessel_track(
            &mut rng, &mut w, mmsi, vtype, &atlantic, &closed, start, end,
        );
    }
    // malformed rows
    for k in 0..40 {
        let t = ts(start + TimeDelta::hours(97 * k));
        let _ = match k % 4 {
            0 => writeln!(w.text, "{},{t},95.0,-90.0,70", 999_000 + k),
            1 => writeln!(w.text, "{},not-a-date,29.9,-90.0,70", 999_000 + k),
            2 => writeln!(w.text, "{},{t},29.9,,70", 999_000 + k),
            _ => writeln!(w.text, "{},{t},29.9,-90.0,", 999_000 + k),
        };
        w.rows += 1;
    }
    write_atomic(&dir.join("ais.csv"), w.text.as_bytes())?;

    // best tracks, with the units row of the archive format
    let mut tr = String::from(
        "SID,ISO_TIME,LAT,LON,WMO_WIND,WMO_PRES,USA_SSHS\n ,,degrees_north,degrees_east,kts,mb,1\n",
    );
    for s in &storms {
        for (t, p, c, wind, pres) in &s.fixes {
            let _ = writeln!(
                tr,
                "{},{},{:.2},{:.2},{wind},{pres},{c}",
                s.sid,
                t.format("%Y-%m-%d %H:%M:%S"),
                p.lat,
                p.lon
            );
        }
    }
    write_atomic(&dir.join("tracks.csv"), tr.as_bytes())?;

    // gauges and stations: hourly values around every storm within reach
    let mut st = String::from("station_id,lat,lon\n");
    let (mut wl, mut wi, mut ra) = (
        String::from("station_id,timestamp,value\n"),
        String::from("station_id,timestamp,value\n"),
        String::from("station_id,timestamp,value\n"),
    );
    for p in &ports {
        let loc = LatLon::new(p.lat, p.lon);
        let gauge = shift(loc, 8.0, -5.0);
        let asos = shift(loc, -6.0, 9.0);
        let (gid, aid) = (format!("G{:03}", p.id), format!("A{:03}", p.id));
        if p.gauge {
            let _ = writeln!(st, "{gid},{:.4},{:.4}", gauge.lat, gauge.lon);
        }
        let _ = writeln!(st, "{aid},{:.4},{:.4}", asos.lat, asos.lon);
        let near: Vec<(&Storm, f64, DateTime<Utc>, i8)> = storms
            .iter()
            .map(|s| {
                let (d, t, c) = s.closest(loc);
                (s, d, t, c)
            })
            .filter(|x| x.1 < 600.0)
            .collect();
        let mut hrs = BTreeSet::new();
        for (s, ..) in &near {
            let a = (s.fixes[0].0 - start).num_hours() - 36 * 24;
            let b = (s.fixes[s.fixes.len() - 1].0 - start).num_hours() + 48;
            hrs.extend(a.max(0)..b);
        }
        let base_rain = 0.02 + 0.01 * f64::from(p.id % 3);
        for h in hrs {
            let t = start + TimeDelta::hours(h);
            let (mut surge, mut wind, mut rain) =
                (0.0, 4.0 + 1.5 * (h as f64 / 24.0 * 2.0 * PI).sin(), 0.0);
            for (_, d, tc, c) in &near {
                let g = (-(((t - *tc).num_minutes() as f64 / 60.0) / 14.0).powi(2)).exp();
                let k = (1.0 - d / 600.0).max(0.0);
                surge += (0.3 + 0.45 * f64::from((*c).max(0))) * k * k * g;
                wind += (8.0 + 6.0 * f64::from(*c + 1)) * k * g;
                rain += (2.0 + 3.0 * f64::from(*c + 1)) * k * g;
            }
            let tide = 0.35 * (2.0 * PI * h as f64 / 12.42).sin() + 0.6;
            if p.gauge {
                let _ = writeln!(wl, "{gid},{},{:.3}", ts(t), tide + surge);
                let _ = writeln!(wi, "{gid},{},{:.2}", ts(t), wind);
            }
            let _ = writeln!(
                ra,
                "{aid},{},{:.2}",
                ts(t),
                rain + if h % 17 == 0 { base_rain } else { 0.0 }
            );
        }
    }
    write_atomic(&dir.join("stations.csv"), st.as_bytes())?;
    write_atomic(&dir.join("water_level.csv"), wl.as_bytes())?;
    write_atomic(&dir.join("wind.csv"), wi.as_bytes())?;
    write_atomic(&dir.join("rainfall.csv"), ra.as_bytes())?;

    // port attributes; PCT_TI nearly mirrors PCT_TA
    let mut ce = String::from(
        "PID,Port_ranking,Seaport,Pop_C,Pop_Tract,PCT_Pov,WF,PCT_TA,PCT_ACEW,PCT_TI,PCT_SV,SL,Railway_Length,Highway_Length,Dock_Count\n",
    );
    let mut by_weight: Vec<&Port> = ports.iter().collect();
    by_weight.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.id.cmp(&b.id)));
    let pop = LogNormal::new(13.5, 0.8).expect("valid lognormal");
    for p in &ports {
        let rank = by_weight.iter().position(|q| q.id == p.id).unwrap_or(0) + 1;
        let ta: f64 = rng.random_range(0.1..0.95);
        let _ = writeln!(
            ce,
            "{},{rank},{},{:.0},{:.0},{:.3},{:.3},{ta:.4},{:.3},{:.4},{:.3},{},{:.2},{:.2},{}",
            p.id,
            u8::from(p.coast != "NonCoast"),
            pop.sample(&mut rng),
            rng.random_range(1500.0..9000.0),
            rng.random_range(0.05..0.35),
            rng.random_range(0.2..0.9),
            rng.random_range(0.0..1.0),
            1.0 - ta + rng.random_range(-0.004..0.004),
            rng.random_range(0.0..1.0),
            u8::from(rng.random_bool(0.4)),
            rng.random_range(0.0..40.0),
            rng.random_range(5.0..80.0),
            rng.random_range(3..60),
        );
    }
    write_atomic(&dir.join("census.csv"), ce.as_bytes())?;

    let toml = format!(
        "# Synthetic fixture configuration.\nseed = {seed}\n\n[paths]\nland = \"land.geojson\"\n\n\
         [model.mcmc]\niterations = {it}\nburn_in = {burn}\nmax_iterations = {max}\n",
        it = opt.mcmc_iterations,
        burn = opt.mcmc_iterations / 2,
        max = opt.mcmc_iterations * 2,
    );
    write_atomic(&dir.join("portres.toml"), toml.as_bytes())?;

    Ok(FixtureSummary {
        ports: ports.len(),
        vessels,
        storms: storms.len(),
        ais_rows: w.rows,
        closures: closed.values().map(Vec::len).sum(),
    })
}
