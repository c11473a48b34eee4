//! File formats: delimited-text and GeoJSON readers, and atomic writers.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use portres_core::ais::{AisPoint, Coast, PortBoundary};
use portres_core::exposure::{Station, StationSeries, Track, TrackPoint, Variable};
use portres_core::geo::{LatLon, MultiPolygon, Polygon, Ring};
use serde_json::Value;

use crate::config::AisColumns;
use crate::error::{PipelineError, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| PipelineError::io(path, e))
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| PipelineError::io(dir, e))?;
    tmp.write_all(bytes)
        .map_err(|e| PipelineError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| PipelineError::io(path, e.error))?;
    Ok(())
}

/// In-memory CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn require(&self, name: &str, path: &Path) -> Result<usize> {
        self.column(name).ok_or_else(|| {
            PipelineError::invalid(format!("{}: missing column {name:?}", path.display()))
        })
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_csv())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = read_bytes(path)?;
        let mut r = csv::ReaderBuilder::new()
            .flexible(false)
            .from_reader(bytes.as_slice());
        let header = r.headers()?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec =
                rec.map_err(|e| PipelineError::invalid(format!("{}: {e}", path.display())))?;
            rows.push(rec.iter().map(String::from).collect());
        }
        Ok(Self { header, rows })
    }
}

/// Float formatting shared by every artifact: shortest round-trip, empty when missing.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, fmt_f64)
}

pub fn fmt_bool(b: bool) -> String {
    u8::from(b).to_string()
}

pub fn fmt_date(d: Option<NaiveDate>) -> String {
    d.map_or_else(String::new, |d| d.to_string())
}

pub fn fmt_time(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn parse_f64(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// RFC 3339, or a naive `YYYY-MM-DD[T ]HH:MM[:SS]` read as UTC.
pub fn parse_time(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for f in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, f) {
            return Some(t.and_utc());
        }
    }
    None
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct AisRead {
    pub rows: usize,
    pub rejects: usize,
    /// Reject count per reason.
    pub reasons: BTreeMap<String, usize>,
}

/// Reads header-mapped AIS rows; malformed rows are counted and skipped.
pub fn parse_ais(text: &[u8], cols: &AisColumns) -> Result<(Vec<AisPoint>, AisRead)> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(text);
    let header = r.headers()?.clone();
    let find = |name: &str| {
        header.iter().position(|h| h.trim() == name).ok_or_else(|| {
            PipelineError::invalid(format!("AIS input lacks required column {name:?}"))
        })
    };
    let (iv, it, ila, ilo, ity) = (
        find(&cols.vessel_id)?,
        find(&cols.timestamp)?,
        find(&cols.lat)?,
        find(&cols.lon)?,
        find(&cols.vessel_type)?,
    );
    let mut out = Vec::new();
    let mut stats = AisRead::default();
    let reject = |stats: &mut AisRead, why: &str| {
        stats.rejects += 1;
        *stats.reasons.entry(why.to_string()).or_default() += 1;
    };
    for rec in r.records() {
        stats.rows += 1;
        let Ok(rec) = rec else {
            reject(&mut stats, "unreadable row");
            continue;
        };
        let field = |i: usize| rec.get(i).map(str::trim).unwrap_or("");
        let vessel = field(iv);
        if vessel.is_empty() {
            reject(&mut stats, "missing vessel id");
            continue;
        }
        let Some(ts) = parse_time(field(it)) else {
            reject(&mut stats, "bad timestamp");
            continue;
        };
        let (Some(lat), Some(lon)) = (parse_f64(field(ila)), parse_f64(field(ilo))) else {
            reject(&mut stats, "bad coordinate");
            continue;
        };
        let Ok(vtype) = field(ity).parse::<u16>() else {
            reject(&mut stats, "bad vessel type");
            continue;
        };
        match AisPoint::new(vessel, ts, lat, lon, vtype) {
            Ok(p) => out.push(p),
            Err(_) => reject(&mut stats, "coordinate out of range"),
        }
    }
    Ok((out, stats))
}

fn ring_from(v: &Value, what: &str) -> Result<Ring> {
    let pts = v
        .as_array()
        .ok_or_else(|| PipelineError::invalid(format!("{what}: ring is not an array")))?;
    let mut out = Vec::with_capacity(pts.len());
    for p in pts {
        let (Some(lon), Some(lat)) = (
            p.get(0).and_then(Value::as_f64),
            p.get(1).and_then(Value::as_f64),
        ) else {
            return Err(PipelineError::invalid(format!(
                "{what}: bad coordinate {p}"
            )));
        };
        out.push(LatLon::new(lat, lon));
    }
    Ring::new(out).map_err(|e| PipelineError::invalid(format!("{what}: {e}")))
}

fn polygon_from(v: &Value, what: &str) -> Result<Polygon> {
    let rings = v
        .as_array()
        .filter(|r| !r.is_empty())
        .ok_or_else(|| PipelineError::invalid(format!("{what}: polygon without rings")))?;
    let exterior = ring_from(&rings[0], what)?;
    let holes = rings[1..]
        .iter()
        .map(|r| ring_from(r, what))
        .collect::<Result<_>>()?;
    Ok(Polygon::new(exterior, holes))
}

pub fn geometry_from(g: &Value, what: &str) -> Result<MultiPolygon> {
    let coords = &g["coordinates"];
    let polys = match g["type"].as_str() {
        Some("Polygon") => vec![polygon_from(coords, what)?],
        Some("MultiPolygon") => coords
            .as_array()
            .ok_or_else(|| PipelineError::invalid(format!("{what}: bad MultiPolygon")))?
            .iter()
            .map(|p| polygon_from(p, what))
            .collect::<Result<_>>()?,
        other => {
            return Err(PipelineError::invalid(format!(
                "{what}: unsupported geometry {other:?}"
            )))
        }
    };
    MultiPolygon::new(polys).map_err(|e| PipelineError::invalid(format!("{what}: {e}")))
}

/// Port boundaries from a GeoJSON FeatureCollection with
/// `{port_id, name, coast}` properties.
pub fn parse_ports(text: &str) -> Result<Vec<PortBoundary>> {
    let v: Value = serde_json::from_str(text)?;
    let feats = v["features"]
        .as_array()
        .ok_or_else(|| PipelineError::invalid("ports: not a FeatureCollection"))?;
    let mut out = Vec::with_capacity(feats.len());
    for (i, f) in feats.iter().enumerate() {
        let props = &f["properties"];
        let port_id = match &props["port_id"] {
            Value::Number(n) => n.as_u64(),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        }
        .and_then(|n| u32::try_from(n).ok())
        .ok_or_else(|| {
            PipelineError::invalid(format!("ports: feature {i} has no integer port_id"))
        })?;
        let name = props["name"].as_str().unwrap_or_default().to_string();
        let coast = props["coast"]
            .as_str()
            .and_then(Coast::parse)
            .ok_or_else(|| {
                PipelineError::invalid(format!("ports: port {port_id} has unknown coast"))
            })?;
        let geometry = geometry_from(&f["geometry"], &format!("port {port_id}"))?;
        out.push(PortBoundary {
            port_id,
            name,
            coast,
            geometry,
        });
    }
    Ok(out)
}

/// Union of all feature geometries in a GeoJSON FeatureCollection.
pub fn parse_land(text: &str) -> Result<MultiPolygon> {
    let v: Value = serde_json::from_str(text)?;
    let mut polys = Vec::new();
    let feats = v["features"]
        .as_array()
        .cloned()
        .unwrap_or_else(|| vec![v.clone()]);
    for f in &feats {
        let g = if f.get("geometry").is_some() {
            &f["geometry"]
        } else {
            f
        };
        polys.extend(geometry_from(g, "land")?.polygons().iter().cloned());
    }
    MultiPolygon::new(polys).map_err(|e| PipelineError::invalid(format!("land: {e}")))
}

/// Best-track rows (`SID, ISO_TIME, LAT, LON, WMO_WIND, WMO_PRES, USA_SSHS`),
/// grouped by storm in SID order. Rows whose time or position does not parse
/// (such as a units row) are skipped and counted.
pub fn parse_tracks(text: &[u8]) -> Result<(Vec<Track>, usize)> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(text);
    let header = r.headers()?.clone();
    let col = |n: &str| {
        header
            .iter()
            .position(|h| h.trim() == n)
            .ok_or_else(|| PipelineError::invalid(format!("tracks: missing column {n:?}")))
    };
    let (is, it, ila, ilo, iw, ip, ic) = (
        col("SID")?,
        col("ISO_TIME")?,
        col("LAT")?,
        col("LON")?,
        col("WMO_WIND")?,
        col("WMO_PRES")?,
        col("USA_SSHS")?,
    );
    let mut by_storm: BTreeMap<String, Vec<TrackPoint>> = BTreeMap::new();
    let mut skipped = 0;
    for rec in r.records() {
        let Ok(rec) = rec else {
            skipped += 1;
            continue;
        };
        let f = |i: usize| rec.get(i).unwrap_or("").trim();
        let (Some(t), Some(lat), Some(lon)) =
            (parse_time(f(it)), parse_f64(f(ila)), parse_f64(f(ilo)))
        else {
            skipped += 1;
            continue;
        };
        let sshs = f(ic).parse::<i8>().unwrap_or(-1).clamp(-1, 5);
        by_storm
            .entry(f(is).to_string())
            .or_default()
            .push(TrackPoint {
                storm_id: f(is).to_string(),
                timestamp: t,
                lat,
                lon,
                wind: parse_f64(f(iw)).unwrap_or(f64::NAN),
                pressure: parse_f64(f(ip)).unwrap_or(f64::NAN),
                sshs,
            });
    }
    let mut out = Vec::with_capacity(by_storm.len());
    for (sid, mut pts) in by_storm {
        pts.sort_by_key(|p| p.timestamp);
        pts.dedup_by_key(|p| p.timestamp);
        out.push(
            Track::new(sid.clone(), pts)
                .map_err(|e| PipelineError::invalid(format!("storm {sid}: {e}")))?,
        );
    }
    Ok((out, skipped))
}

/// Station locations: `station_id, lat, lon`.
pub fn parse_stations(path: &Path) -> Result<Vec<Station>> {
    let t = Table::read(path)?;
    let (i, la, lo) = (
        t.require("station_id", path)?,
        t.require("lat", path)?,
        t.require("lon", path)?,
    );
    t.rows
        .iter()
        .map(|r| {
            let (Some(lat), Some(lon)) = (parse_f64(&r[la]), parse_f64(&r[lo])) else {
                return Err(PipelineError::invalid(format!(
                    "{}: bad location for {}",
                    path.display(),
                    r[i]
                )));
            };
            Ok(Station {
                station_id: r[i].clone(),
                location: LatLon::new(lat, lon),
            })
        })
        .collect()
}

/// Per-station observations: `station_id, timestamp, value`. Unparseable
/// rows are skipped.
pub fn parse_series(path: &Path, variable: Variable) -> Result<Vec<StationSeries>> {
    let t = Table::read(path)?;
    let (i, ts, v) = (
        t.require("station_id", path)?,
        t.require("timestamp", path)?,
        t.require("value", path)?,
    );
    let mut by: BTreeMap<String, Vec<(DateTime<Utc>, f64)>> = BTreeMap::new();
    for r in &t.rows {
        if let (Some(t), Some(x)) = (parse_time(&r[ts]), parse_f64(&r[v])) {
            by.entry(r[i].clone()).or_default().push((t, x));
        }
    }
    Ok(by
        .into_iter()
        .map(|(station_id, mut observations)| {
            observations.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            StationSeries {
                station_id,
                variable,
                observations,
            }
        })
        .collect())
}

/// Port attribute table keyed by `PID`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Census {
    pub columns: Vec<String>,
    pub rows: BTreeMap<u32, Vec<String>>,
}

impl Census {
    pub fn get(&self, pid: u32, column: &str) -> Option<&str> {
        let j = self.columns.iter().position(|c| c == column)?;
        self.rows.get(&pid).map(|r| r[j].as_str())
    }
}

pub fn parse_census(path: &Path) -> Result<Census> {
    let t = Table::read(path)?;
    let ip = t.require("PID", path)?;
    let columns: Vec<String> = t
        .header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != ip)
        .map(|(_, h)| h.clone())
        .collect();
    let mut rows = BTreeMap::new();
    for r in &t.rows {
        let pid: u32 = r[ip].trim().parse().map_err(|_| {
            PipelineError::invalid(format!("{}: bad PID {:?}", path.display(), r[ip]))
        })?;
        let vals = r
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != ip)
            .map(|(_, v)| v.clone())
            .collect();
        if rows.insert(pid, vals).is_some() {
            return Err(PipelineError::invalid(format!(
                "{}: duplicate PID {pid}",
                path.display()
            )));
        }
    }
    Ok(Census { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ais_rejects_are_counted() {
        let text = "MMSI,BaseDateTime,LAT,LON,VesselType\n\
            1,2020-01-01T00:00:00,29.0,-90.0,70\n\
            2,2020-01-01T01:00:00,91.0,-90.0,70\n\
            3,not-a-time,29.0,-90.0,70\n\
            4,2020-01-01T02:00:00,29.0,-90.0\n\
            5,2020-01-01T03:00:00,29.0,-90.0,80\n\
            6,2020-01-01T03:00:00,29.0,-190.0,80\n\
            7,2020-01-01 04:00:00,29.5,-90.5,71\n\
            8,2020-01-01T05:00:00Z,29.0,-90.0,30\n\
            9,2020-01-01T06:00:00,x,-90.0,70\n\
            10,2020-01-01T07:00:00,28.0,-91.0,89\n";
        let (pts, stats) = parse_ais(text.as_bytes(), &AisColumns::default()).unwrap();
        assert_eq!(stats.rows, 10);
        assert_eq!(stats.rejects, 5);
        assert_eq!(pts.len(), 5);
        // pass-through of a well-formed row
        let p = &pts[0];
        assert_eq!(
            (p.vessel_id.as_str(), p.lat, p.lon, p.vessel_type),
            ("1", 29.0, -90.0, 70)
        );
        assert_eq!(fmt_time(p.timestamp), "2020-01-01T00:00:00Z");
    }

    #[test]
    fn ais_missing_column_is_fatal() {
        let e = parse_ais(b"MMSI,LAT,LON,VesselType\n", &AisColumns::default()).unwrap_err();
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn ports_from_geojson() {
        let text = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"port_id":3,"name":"A","coast":"Gulf"},
             "geometry":{"type":"Polygon","coordinates":[[[-90,29],[-89.9,29],[-89.9,29.1],[-90,29.1],[-90,29]]]}},
            {"type":"Feature","properties":{"port_id":"4","name":"B","coast":"East"},
             "geometry":{"type":"MultiPolygon","coordinates":[[[[-80,30],[-79.9,30],[-79.9,30.1],[-80,30]]]]}}]}"#;
        let ports = parse_ports(text).unwrap();
        assert_eq!(ports.len(), 2);
        assert_eq!(ports[0].port_id, 3);
        assert_eq!(ports[1].coast, Coast::East);
        assert!(ports[0].geometry.contains(LatLon::new(29.05, -89.95)));
        let open = text.replace("[-90,29]]]}", "[-90,29.2]]]}");
        assert!(parse_ports(&open).is_err());
    }

    #[test]
    fn tracks_grouped_and_sorted() {
        let text = "SID,ISO_TIME,LAT,LON,WMO_WIND,WMO_PRES,USA_SSHS\n\
            ,,degrees_north,degrees_east,kts,mb,1\n\
            B,2020-08-25 06:00:00,21,-90,50,990,0\n\
            A,2020-08-25 00:00:00,20,-90,,,-1\n\
            B,2020-08-25 00:00:00,20,-90,45,995,0\n";
        let (tracks, skipped) = parse_tracks(text.as_bytes()).unwrap();
        assert_eq!(skipped, 1);
        assert_eq!(tracks.len(), 2);
        assert_eq!(tracks[0].storm_id, "A");
        assert!(tracks[0].points()[0].wind.is_nan());
        assert_eq!(tracks[1].points()[0].lat, 20.0);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/x.csv");
        write_atomic(&p, b"a").unwrap();
        write_atomic(&p, b"bc").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"bc");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1e-300, 12345.678, -0.0, 3.0] {
            assert_eq!(parse_f64(&fmt_f64(x)).unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(fmt_f64(f64::NAN), "");
        assert_eq!(fmt_f64(3.0), "3");
    }
}
