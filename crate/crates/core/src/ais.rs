//! Vessel positions to port calls, daily vessel counts and origin-destination legs.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use chrono::{DateTime, NaiveDate, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use crate::geo::{LatLon, MultiPolygon};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AisPoint {
    pub vessel_id: String,
    pub timestamp: DateTime<Utc>,
    pub lat: f64,
    pub lon: f64,
    pub vessel_type: u16,
}

impl AisPoint {
    pub fn new(
        vessel_id: impl Into<String>,
        timestamp: DateTime<Utc>,
        lat: f64,
        lon: f64,
        vessel_type: u16,
    ) -> Result<Self> {
        if !(lat.is_finite() && (-90.0..=90.0).contains(&lat)) {
            return Err(Error::OutOfRange {
                what: "latitude",
                value: lat,
            });
        }
        if !(lon.is_finite() && (-180.0..=180.0).contains(&lon)) {
            return Err(Error::OutOfRange {
                what: "longitude",
                value: lon,
            });
        }
        Ok(Self {
            vessel_id: vessel_id.into(),
            timestamp,
            lat,
            lon,
            vessel_type,
        })
    }

    pub fn position(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Coast {
    Gulf,
    East,
    Pacific,
    NonCoast,
}

impl Coast {
    pub fn as_str(self) -> &'static str {
        match self {
            Coast::Gulf => "Gulf",
            Coast::East => "East",
            Coast::Pacific => "Pacific",
            Coast::NonCoast => "NonCoast",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gulf" | "gulf of america" | "gulf of mexico" => Some(Coast::Gulf),
            "east" | "atlantic" | "east coast" => Some(Coast::East),
            "pacific" | "pacific coast" | "west" => Some(Coast::Pacific),
            "noncoast" | "non-coast" | "inland" | "none" => Some(Coast::NonCoast),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortBoundary {
    pub port_id: u32,
    pub name: String,
    pub coast: Coast,
    pub geometry: MultiPolygon,
}

impl PortBoundary {
    pub fn centroid(&self) -> LatLon {
        self.geometry.centroid()
    }
}

/// Port boundaries ordered by `port_id`, so overlap resolution picks the smallest id.
#[derive(Debug, Clone)]
pub struct PortIndex {
    ports: Vec<PortBoundary>,
}

/// Outcome of locating one position against the port polygons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub port_id: Option<u32>,
    pub overlapping: bool,
}

impl PortIndex {
    pub fn new(mut ports: Vec<PortBoundary>) -> Result<Self> {
        ports.sort_by_key(|p| p.port_id);
        if let Some(w) = ports.windows(2).find(|w| w[0].port_id == w[1].port_id) {
            return Err(Error::Invalid(alloc::format!(
                "duplicate port_id {}",
                w[0].port_id
            )));
        }
        Ok(Self { ports })
    }

    pub fn ports(&self) -> &[PortBoundary] {
        &self.ports
    }

    pub fn get(&self, port_id: u32) -> Option<&PortBoundary> {
        self.ports
            .binary_search_by_key(&port_id, |p| p.port_id)
            .ok()
            .map(|i| &self.ports[i])
    }

    pub fn locate(&self, p: LatLon) -> Location {
        let mut hits = self.ports.iter().filter(|b| b.geometry.contains(p));
        match hits.next() {
            None => Location {
                port_id: None,
                overlapping: false,
            },
            Some(first) => Location {
                port_id: Some(first.port_id),
                overlapping: hits.next().is_some(),
            },
        }
    }
}

/// AIS ship-type code ranges treated as commercial freight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VesselTypeFilter {
    pub ranges: Vec<(u16, u16)>,
}

impl Default for VesselTypeFilter {
    /// 70-79 cargo, 80-89 tanker.
    fn default() -> Self {
        Self {
            ranges: alloc::vec![(70, 79), (80, 89)],
        }
    }
}

impl VesselTypeFilter {
    pub fn accepts(&self, code: u16) -> bool {
        self.ranges
            .iter()
            .any(|&(lo, hi)| RangeInclusive::new(lo, hi).contains(&code))
    }
}

pub fn filter_commercial(points: Vec<AisPoint>, filter: &VesselTypeFilter) -> Vec<AisPoint> {
    points
        .into_iter()
        .filter(|p| filter.accepts(p.vessel_type))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortCall {
    pub vessel_id: String,
    pub port_id: u32,
    pub arrival: DateTime<Utc>,
    pub departure: DateTime<Utc>,
}

impl PortCall {
    pub fn dwell(&self) -> TimeDelta {
        self.departure - self.arrival
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentConfig {
    pub min_dwell: TimeDelta,
    /// A call closes when consecutive inside points are further apart than this.
    pub max_gap: TimeDelta,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            min_dwell: TimeDelta::hours(4),
            max_gap: TimeDelta::hours(24),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Segmentation {
    pub calls: Vec<PortCall>,
    /// Points that fell inside more than one port polygon.
    pub overlap_points: usize,
    pub short_visits_dropped: usize,
}

/// Splits one vessel's time-sorted track into port calls.
///
/// A call opens at the first point inside a port polygon and closes at the
/// last consecutive point inside the same polygon. Calls shorter than
/// `cfg.min_dwell` are dropped.
pub fn segment_port_calls(
    points: &[AisPoint],
    ports: &PortIndex,
    cfg: &SegmentConfig,
) -> Result<Segmentation> {
    if points.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
        return Err(Error::Unsorted("vessel track"));
    }
    let mut out = Segmentation::default();
    // (port, first inside point, last inside point)
    let mut open: Option<(u32, usize, usize)> = None;

    let close = |open: &mut Option<(u32, usize, usize)>, out: &mut Segmentation| {
        if let Some((port_id, first, last)) = open.take() {
            let call = PortCall {
                vessel_id: points[first].vessel_id.clone(),
                port_id,
                arrival: points[first].timestamp,
                departure: points[last].timestamp,
            };
            if call.dwell() >= cfg.min_dwell {
                out.calls.push(call);
            } else {
                out.short_visits_dropped += 1;
            }
        }
    };

    for (i, p) in points.iter().enumerate() {
        let loc = ports.locate(p.position());
        if loc.overlapping {
            out.overlap_points += 1;
        }
        match (loc.port_id, open) {
            (Some(port), Some((cur, first, last)))
                if port == cur && p.timestamp - points[last].timestamp <= cfg.max_gap =>
            {
                open = Some((cur, first, i));
            }
            (Some(port), _) => {
                close(&mut open, &mut out);
                open = Some((port, i, i));
            }
            (None, _) => close(&mut open, &mut out),
        }
    }
    close(&mut open, &mut out);
    Ok(out)
}

/// Per-port daily vessel counts, one entry per day with no gaps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DailySeries {
    pub port_id: u32,
    pub start_date: NaiveDate,
    pub counts: Vec<u32>,
}

impl DailySeries {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn end_date(&self) -> NaiveDate {
        self.start_date + TimeDelta::days(self.counts.len() as i64 - 1)
    }

    pub fn date(&self, i: usize) -> NaiveDate {
        self.start_date + TimeDelta::days(i as i64)
    }

    pub fn index_of(&self, d: NaiveDate) -> Option<usize> {
        let i = (d - self.start_date).num_days();
        (i >= 0 && (i as usize) < self.counts.len()).then_some(i as usize)
    }

    pub fn get(&self, d: NaiveDate) -> Option<u32> {
        self.index_of(d).map(|i| self.counts[i])
    }

    pub fn mean(&self) -> f64 {
        if self.counts.is_empty() {
            return 0.0;
        }
        self.counts.iter().map(|&c| c as f64).sum::<f64>() / self.counts.len() as f64
    }
}

/// Daily counts for one port over `[first, last]`.
///
/// The count for a day is the number of distinct vessels with a call whose
/// closed `[arrival, departure]` interval touches that day.
pub fn build_daily_series(
    calls: &[PortCall],
    port_id: u32,
    first: NaiveDate,
    last: NaiveDate,
) -> Result<DailySeries> {
    if last < first {
        return Err(Error::EmptyRange);
    }
    let n = (last - first).num_days() as usize + 1;
    let mut per_vessel: BTreeMap<&str, Vec<(i64, i64)>> = BTreeMap::new();
    for c in calls.iter().filter(|c| c.port_id == port_id) {
        let a = (c.arrival.date_naive() - first).num_days().max(0);
        let b = (c.departure.date_naive() - first)
            .num_days()
            .min(n as i64 - 1);
        if a <= b {
            per_vessel
                .entry(c.vessel_id.as_str())
                .or_default()
                .push((a, b));
        }
    }
    let mut counts = alloc::vec![0u32; n];
    for spans in per_vessel.values_mut() {
        spans.sort_unstable();
        let mut merged: Vec<(i64, i64)> = Vec::with_capacity(spans.len());
        for &(a, b) in spans.iter() {
            match merged.last_mut() {
                Some(last) if a <= last.1 + 1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        for (a, b) in merged {
            for c in &mut counts[a as usize..=b as usize] {
                *c += 1;
            }
        }
    }
    Ok(DailySeries {
        port_id,
        start_date: first,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OdRecord {
    pub vessel_id: String,
    pub origin_port: u32,
    pub dest_port: u32,
    pub depart: DateTime<Utc>,
    pub arrive: DateTime<Utc>,
}

impl OdRecord {
    pub fn is_self_loop(&self) -> bool {
        self.origin_port == self.dest_port
    }
}

/// Consecutive call pairs of one vessel as origin-destination legs.
pub fn extract_od(calls: &[PortCall]) -> Vec<OdRecord> {
    calls
        .windows(2)
        .map(|w| OdRecord {
            vessel_id: w[0].vessel_id.clone(),
            origin_port: w[0].port_id,
            dest_port: w[1].port_id,
            depart: w[0].departure,
            arrive: w[1].arrival,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Ring;
    use alloc::vec;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn t(h: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2020, 3, 1, 0, 0, 0).unwrap()
            + TimeDelta::minutes((h as f64 * 60.0) as i64)
    }

    fn th(h: f64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2020, 3, 1, 0, 0, 0).unwrap() + TimeDelta::seconds((h * 3600.0) as i64)
    }

    fn square(port_id: u32, lat: f64, lon: f64, half: f64) -> PortBoundary {
        let ring = Ring::new(vec![
            LatLon::new(lat - half, lon - half),
            LatLon::new(lat - half, lon + half),
            LatLon::new(lat + half, lon + half),
            LatLon::new(lat + half, lon - half),
            LatLon::new(lat - half, lon - half),
        ])
        .unwrap();
        PortBoundary {
            port_id,
            name: alloc::format!("P{port_id}"),
            coast: Coast::Gulf,
            geometry: MultiPolygon::single(ring),
        }
    }

    fn index() -> PortIndex {
        PortIndex::new(vec![
            square(1, 29.0, -95.0, 0.1),
            square(2, 30.0, -90.0, 0.1),
            square(3, 31.0, -88.0, 0.1),
        ])
        .unwrap()
    }

    fn pt(hours: f64, lat: f64, lon: f64) -> AisPoint {
        AisPoint::new("V1", th(hours), lat, lon, 70).unwrap()
    }

    /// Dwell `hours` inside the port at (lat, lon) starting at `start`, sampled every 30 min.
    fn dwell(start: f64, hours: f64, lat: f64, lon: f64) -> Vec<AisPoint> {
        let n = (hours * 2.0).round() as usize;
        (0..=n)
            .map(|k| pt(start + k as f64 * 0.5, lat, lon))
            .collect()
    }

    #[test]
    fn point_validation() {
        assert!(AisPoint::new("a", t(0), 91.0, 0.0, 70).is_err());
        assert!(AisPoint::new("a", t(0), 0.0, -180.5, 70).is_err());
        let p = AisPoint::new("a", t(0), 45.0, 10.0, 70).unwrap();
        assert_eq!((p.lat, p.lon, p.vessel_type), (45.0, 10.0, 70));
    }

    #[test]
    fn commercial_filter() {
        let f = VesselTypeFilter::default();
        let mk = |code| AisPoint::new("a", t(0), 0.0, 0.0, code).unwrap();
        let kept = filter_commercial(vec![mk(70), mk(30), mk(89), mk(60), mk(79), mk(90)], &f);
        let codes: Vec<u16> = kept.iter().map(|p| p.vessel_type).collect();
        assert_eq!(codes, vec![70, 89, 79]);
        assert!(filter_commercial(Vec::new(), &f).is_empty());
    }

    #[test]
    fn six_hour_dwell_is_one_call() {
        let mut track = vec![pt(0.0, 28.0, -94.0)];
        track.extend(dwell(1.0, 6.0, 29.0, -95.0));
        track.push(pt(8.0, 28.0, -94.0));
        let seg = segment_port_calls(&track, &index(), &SegmentConfig::default()).unwrap();
        assert_eq!(seg.calls.len(), 1);
        assert_eq!(seg.calls[0].port_id, 1);
        assert_eq!(seg.calls[0].dwell(), TimeDelta::hours(6));
    }

    #[test]
    fn short_dwell_dropped() {
        let mut track = vec![pt(0.0, 28.0, -94.0)];
        let start = 1.0;
        track.push(pt(start, 29.0, -95.0));
        track.push(pt(start + 2.0, 29.0, -95.0));
        track.push(pt(start + 3.9, 29.0, -95.0));
        track.push(pt(6.0, 28.0, -94.0));
        let seg = segment_port_calls(&track, &index(), &SegmentConfig::default()).unwrap();
        assert!(seg.calls.is_empty());
        assert_eq!(seg.short_visits_dropped, 1);
    }

    #[test]
    fn never_inside_is_empty() {
        let track: Vec<_> = (0..20).map(|h| pt(h as f64, 10.0, 10.0)).collect();
        let seg = segment_port_calls(&track, &index(), &SegmentConfig::default()).unwrap();
        assert!(seg.calls.is_empty());
    }

    #[test]
    fn gap_splits_calls() {
        let mut track = dwell(0.0, 5.0, 29.0, -95.0);
        track.extend(dwell(40.0, 5.0, 29.0, -95.0));
        let seg = segment_port_calls(&track, &index(), &SegmentConfig::default()).unwrap();
        assert_eq!(seg.calls.len(), 2);
    }

    #[test]
    fn unsorted_rejected() {
        let track = vec![pt(2.0, 0.0, 0.0), pt(1.0, 0.0, 0.0)];
        assert!(segment_port_calls(&track, &index(), &SegmentConfig::default()).is_err());
    }

    #[test]
    fn overlap_tie_break_smallest_id() {
        let ports = PortIndex::new(vec![
            square(9, 29.0, -95.0, 0.2),
            square(4, 29.0, -95.0, 0.1),
        ])
        .unwrap();
        let track = dwell(0.0, 5.0, 29.0, -95.0);
        let seg = segment_port_calls(&track, &ports, &SegmentConfig::default()).unwrap();
        assert_eq!(seg.calls[0].port_id, 4);
        assert_eq!(seg.overlap_points, track.len());
    }

    fn call(v: &str, port: u32, a: DateTime<Utc>, d: DateTime<Utc>) -> PortCall {
        PortCall {
            vessel_id: v.into(),
            port_id: port,
            arrival: a,
            departure: d,
        }
    }

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 3, d).unwrap()
    }

    /// Enumeration oracle: does [a, b] touch day d?
    fn touches(c: &PortCall, d: NaiveDate) -> bool {
        let start = d.and_hms_opt(0, 0, 0).unwrap().and_utc();
        let end = start + TimeDelta::days(1);
        c.arrival < end && c.departure >= start
    }

    #[test]
    fn daily_series_examples() {
        let calls = vec![call("A", 1, th(10.0), th(10.0 + 48.0))];
        let s = build_daily_series(&calls, 1, day(1), day(5)).unwrap();
        assert_eq!(s.counts, vec![1, 1, 1, 0, 0]);

        let s = build_daily_series(&[], 1, day(1), day(3)).unwrap();
        assert_eq!(s.counts, vec![0, 0, 0]);

        let calls = vec![
            call("A", 1, th(1.0), th(6.0)),
            call("B", 1, th(2.0), th(9.0)),
        ];
        let s = build_daily_series(&calls, 1, day(1), day(1)).unwrap();
        assert_eq!(s.counts, vec![2]);

        // same vessel, two calls on the same day: counted once
        let calls = vec![
            call("A", 1, th(1.0), th(6.0)),
            call("A", 1, th(12.0), th(18.0)),
        ];
        let s = build_daily_series(&calls, 1, day(1), day(1)).unwrap();
        assert_eq!(s.counts, vec![1]);

        assert_eq!(
            build_daily_series(&[], 1, day(3), day(1)),
            Err(Error::EmptyRange)
        );
    }

    proptest! {
        #[test]
        fn daily_series_matches_enumeration(
            spans in prop::collection::vec((0u8..4, 0u32..200, 1u32..100), 0..25)
        ) {
            let calls: Vec<PortCall> = spans
                .iter()
                .map(|&(v, s, len)| {
                    let vid = alloc::format!("V{v}");
                    call(&vid, 1, th(s as f64), th((s + len) as f64))
                })
                .collect();
            let s = build_daily_series(&calls, 1, day(1), day(14)).unwrap();
            for (i, &c) in s.counts.iter().enumerate() {
                let d = s.date(i);
                let mut vessels: Vec<&str> = calls
                    .iter()
                    .filter(|c| touches(c, d))
                    .map(|c| c.vessel_id.as_str())
                    .collect();
                vessels.sort();
                vessels.dedup();
                prop_assert_eq!(c as usize, vessels.len());
            }
        }

        #[test]
        fn od_invariant_under_duplicated_points(dups in prop::collection::vec(0usize..3, 30)) {
            let mut track = Vec::new();
            let mut h = 0.0;
            for (lat, lon) in [(29.0, -95.0), (30.0, -90.0), (31.0, -88.0), (29.0, -95.0)] {
                track.extend(dwell(h, 6.0, lat, lon));
                h += 7.0;
                track.push(pt(h, 20.0, -80.0));
                h += 12.0;
            }
            let mut duplicated = Vec::new();
            for (i, p) in track.iter().enumerate() {
                duplicated.push(p.clone());
                for _ in 0..dups[i % dups.len()] {
                    duplicated.push(p.clone());
                }
            }
            let cfg = SegmentConfig::default();
            let a = extract_od(&segment_port_calls(&track, &index(), &cfg).unwrap().calls);
            let b = extract_od(&segment_port_calls(&duplicated, &index(), &cfg).unwrap().calls);
            prop_assert_eq!(a.len(), 3);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn calls_disjoint_and_ordered(stops in prop::collection::vec((0usize..3, 1u32..12, 1u32..30), 1..12)) {
            let centers = [(29.0, -95.0), (30.0, -90.0), (31.0, -88.0)];
            let mut track = Vec::new();
            let mut h = 0.0;
            for &(port, dwell_h, sea_h) in &stops {
                let (lat, lon) = centers[port];
                track.extend(dwell(h, dwell_h as f64, lat, lon));
                h += dwell_h as f64 + 0.5;
                track.push(pt(h, 20.0, -80.0));
                h += sea_h as f64;
            }
            let seg = segment_port_calls(&track, &index(), &SegmentConfig::default()).unwrap();
            for c in &seg.calls {
                prop_assert!(c.dwell() >= TimeDelta::hours(4));
            }
            for w in seg.calls.windows(2) {
                prop_assert!(w[0].departure < w[1].arrival);
            }
        }
    }

    #[test]
    fn od_examples() {
        let calls = vec![
            call("V", 1, th(0.0), th(5.0)),
            call("V", 2, th(20.0), th(30.0)),
            call("V", 3, th(50.0), th(60.0)),
        ];
        let od = extract_od(&calls);
        assert_eq!(od.len(), 2);
        assert_eq!((od[0].origin_port, od[0].dest_port), (1, 2));
        assert_eq!((od[1].origin_port, od[1].dest_port), (2, 3));
        assert_eq!(od[0].depart, th(5.0));
        assert_eq!(od[0].arrive, th(20.0));
        assert!(extract_od(&calls[..1]).is_empty());

        let od = extract_od(&[
            call("V", 1, th(0.0), th(5.0)),
            call("V", 1, th(30.0), th(40.0)),
        ]);
        assert_eq!(od.len(), 1);
        assert!(od[0].is_self_loop());
    }
}
