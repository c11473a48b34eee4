//! Great-circle distance and planar polygon tests.
//!
//! Port polygons are small enough that containment is done in the (lon, lat)
//! plane; anything involving distances between ports and storms goes through
//! [`haversine_km`].

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// Mean Earth radius (IUGG), km.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

pub fn haversine_km(a: LatLon, b: LatLon) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let s1 = math::sin(dphi / 2.0);
    let s2 = math::sin(dlambda / 2.0);
    let h = s1 * s1 + math::cos(phi1) * math::cos(phi2) * s2 * s2;
    2.0 * EARTH_RADIUS_KM * math::asin(math::sqrt(h.clamp(0.0, 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BBox {
    fn empty() -> Self {
        Self {
            min_lat: f64::INFINITY,
            max_lat: f64::NEG_INFINITY,
            min_lon: f64::INFINITY,
            max_lon: f64::NEG_INFINITY,
        }
    }

    fn extend(&mut self, p: LatLon) {
        self.min_lat = self.min_lat.min(p.lat);
        self.max_lat = self.max_lat.max(p.lat);
        self.min_lon = self.min_lon.min(p.lon);
        self.max_lon = self.max_lon.max(p.lon);
    }

    pub fn contains(&self, p: LatLon) -> bool {
        p.lat >= self.min_lat
            && p.lat <= self.max_lat
            && p.lon >= self.min_lon
            && p.lon <= self.max_lon
    }
}

/// A closed ring: first vertex equals last.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring(Vec<LatLon>);

impl Ring {
    pub fn new(vertices: Vec<LatLon>) -> Result<Self> {
        if vertices.len() < 4 {
            return Err(Error::Geometry(format!(
                "ring needs at least 4 vertices (closed), got {}",
                vertices.len()
            )));
        }
        if vertices.first() != vertices.last() {
            return Err(Error::Geometry("ring is not closed".into()));
        }
        if let Some(bad) = vertices.iter().find(|v| !v.is_valid()) {
            return Err(Error::Geometry(format!("vertex out of range: {bad:?}")));
        }
        let mut distinct: Vec<LatLon> = Vec::new();
        for v in &vertices[..vertices.len() - 1] {
            if !distinct.contains(v) {
                distinct.push(*v);
            }
        }
        if distinct.len() < 3 {
            return Err(Error::Geometry(
                "ring has fewer than 3 distinct vertices".into(),
            ));
        }
        Ok(Self(vertices))
    }

    /// Closes the ring if the caller left the last vertex off.
    pub fn closing(mut vertices: Vec<LatLon>) -> Result<Self> {
        if let (Some(f), Some(l)) = (vertices.first().copied(), vertices.last().copied()) {
            if f != l {
                vertices.push(f);
            }
        }
        Self::new(vertices)
    }

    pub fn vertices(&self) -> &[LatLon] {
        &self.0
    }

    /// Even-odd crossing test on (lon, lat).
    pub fn crosses(&self, p: LatLon) -> bool {
        let v = &self.0;
        let (x, y) = (p.lon, p.lat);
        let mut inside = false;
        for w in v.windows(2) {
            let (xi, yi) = (w[0].lon, w[0].lat);
            let (xj, yj) = (w[1].lon, w[1].lat);
            if (yi > y) != (yj > y) {
                let x_cross = xi + (y - yi) * (xj - xi) / (yj - yi);
                if x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Signed shoelace area in degree units and the matching first moments.
    fn moments(&self) -> (f64, f64, f64) {
        let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for w in self.0.windows(2) {
            let (x0, y0, x1, y1) = (w[0].lon, w[0].lat, w[1].lon, w[1].lat);
            let cross = x0 * y1 - x1 * y0;
            a += cross;
            cx += (x0 + x1) * cross;
            cy += (y0 + y1) * cross;
        }
        (a / 2.0, cx / 6.0, cy / 6.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub exterior: Ring,
    pub holes: Vec<Ring>,
}

impl Polygon {
    pub fn new(exterior: Ring, holes: Vec<Ring>) -> Self {
        Self { exterior, holes }
    }

    pub fn contains(&self, p: LatLon) -> bool {
        let mut inside = self.exterior.crosses(p);
        for h in &self.holes {
            if h.crosses(p) {
                inside = !inside;
            }
        }
        inside
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiPolygon {
    polygons: Vec<Polygon>,
    bbox: BBox,
}

impl MultiPolygon {
    pub fn new(polygons: Vec<Polygon>) -> Result<Self> {
        if polygons.is_empty() {
            return Err(Error::Geometry("empty multipolygon".into()));
        }
        let mut bbox = BBox::empty();
        for p in &polygons {
            for v in p.exterior.vertices() {
                bbox.extend(*v);
            }
        }
        Ok(Self { polygons, bbox })
    }

    pub fn single(exterior: Ring) -> Self {
        Self::new(alloc::vec![Polygon::new(exterior, Vec::new())]).expect("one polygon")
    }

    pub fn polygons(&self) -> &[Polygon] {
        &self.polygons
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn contains(&self, p: LatLon) -> bool {
        self.bbox.contains(p) && self.polygons.iter().any(|poly| poly.contains(p))
    }

    /// Area-weighted planar centroid (holes subtract).
    pub fn centroid(&self) -> LatLon {
        let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for poly in &self.polygons {
            let (ea, ex, ey) = poly.exterior.moments();
            let s = if ea < 0.0 { -1.0 } else { 1.0 };
            a += s * ea;
            cx += s * ex;
            cy += s * ey;
            for h in &poly.holes {
                let (ha, hx, hy) = h.moments();
                let s = if ha < 0.0 { -1.0 } else { 1.0 };
                a -= s * ha;
                cx -= s * hx;
                cy -= s * hy;
            }
        }
        if a.abs() < 1e-15 {
            let v = self.polygons[0].exterior.vertices();
            let n = (v.len() - 1) as f64;
            let lat = v[..v.len() - 1].iter().map(|p| p.lat).sum::<f64>() / n;
            let lon = v[..v.len() - 1].iter().map(|p| p.lon).sum::<f64>() / n;
            return LatLon::new(lat, lon);
        }
        LatLon::new(cy / a, cx / a)
    }
}
