//! Overlap between predicted cluster rectangles and official zones.
//!
//! Areas come from a local equirectangular projection: `x = R·lon·cos(lat0)`,
//! `y = R·lat` (radians), followed by the shoelace formula. Because the
//! projection is linear in degrees, clipping happens in degree space and
//! only the final area is scaled.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{centroid, open_ring, signed_area_deg2};
use crate::model::{BoundingBox, LandUseLabel, LatLon, Polygon, Ring, Zone};

/// Mean Earth radius in metres.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Square metres per square degree at `lat0`.
fn m2_per_deg2(lat0: f64) -> f64 {
    let m_per_deg = EARTH_RADIUS_M * PI / 180.0;
    m_per_deg * m_per_deg * lat0.to_radians().cos()
}

/// Area in square metres with the projection anchored at `lat0`.
pub fn ring_area_m2_at(ring: &[LatLon], lat0: f64) -> f64 {
    signed_area_deg2(ring).abs() * m2_per_deg2(lat0)
}

/// Area of a ring in square metres, projected at its own centroid latitude.
pub fn ring_area_m2(ring: &[LatLon]) -> Result<f64> {
    let pts = open_ring(ring);
    let mut distinct: Vec<LatLon> = Vec::with_capacity(pts.len());
    for p in pts {
        if !distinct.contains(p) {
            distinct.push(*p);
        }
    }
    if distinct.len() < 3 {
        return Err(Error::DegenerateRing(format!(
            "{} distinct vertices",
            distinct.len()
        )));
    }
    let area = signed_area_deg2(ring);
    let extent = BoundingBox::covering(pts.iter().copied()).expect("non-empty");
    let scale = extent.lat_span().max(extent.lon_span());
    if area.abs() <= 1e-12 * scale * scale {
        return Err(Error::DegenerateRing("vertices are collinear".into()));
    }
    Ok(ring_area_m2_at(ring, centroid(ring).lat))
}

#[derive(Clone, Copy)]
enum Edge {
    LonMin(f64),
    LonMax(f64),
    LatMin(f64),
    LatMax(f64),
}

impl Edge {
    fn inside(self, p: LatLon) -> bool {
        match self {
            Edge::LonMin(v) => p.lon >= v,
            Edge::LonMax(v) => p.lon <= v,
            Edge::LatMin(v) => p.lat >= v,
            Edge::LatMax(v) => p.lat <= v,
        }
    }

    fn cut(self, a: LatLon, b: LatLon) -> LatLon {
        match self {
            Edge::LonMin(v) | Edge::LonMax(v) => {
                let t = (v - a.lon) / (b.lon - a.lon);
                LatLon::new(a.lat + t * (b.lat - a.lat), v)
            }
            Edge::LatMin(v) | Edge::LatMax(v) => {
                let t = (v - a.lat) / (b.lat - a.lat);
                LatLon::new(v, a.lon + t * (b.lon - a.lon))
            }
        }
    }
}

/// Sutherland–Hodgman clip of one ring against the rectangle. Returns a
/// closed ring, or an empty vector when nothing with positive area remains.
/// Concave input may produce zero-width bridges; they carry no area.
pub fn clip_ring_to_rect(ring: &[LatLon], rect: &BoundingBox) -> Ring {
    let mut poly: Vec<LatLon> = open_ring(ring).to_vec();
    for edge in [
        Edge::LonMin(rect.lon_min),
        Edge::LonMax(rect.lon_max),
        Edge::LatMin(rect.lat_min),
        Edge::LatMax(rect.lat_max),
    ] {
        if poly.is_empty() {
            break;
        }
        let n = poly.len();
        let mut out = Vec::with_capacity(n + 4);
        for i in 0..n {
            let cur = poly[i];
            let prev = poly[(i + n - 1) % n];
            match (edge.inside(prev), edge.inside(cur)) {
                (true, true) => out.push(cur),
                (true, false) => out.push(edge.cut(prev, cur)),
                (false, true) => {
                    out.push(edge.cut(prev, cur));
                    out.push(cur);
                }
                (false, false) => {}
            }
        }
        poly = out;
    }
    if poly.len() < 3 || signed_area_deg2(&poly) == 0.0 {
        return Vec::new();
    }
    poly.push(poly[0]);
    poly
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClippedRing {
    pub ring: Ring,
    /// Holes subtract from the intersection area.
    pub hole: bool,
}

/// Intersection of the rectangle with a polygon, as clipped outer and hole
/// rings. Empty when they do not overlap.
pub fn clip_rect_polygon(rect: &BoundingBox, poly: &Polygon) -> Vec<ClippedRing> {
    let mut out = Vec::new();
    let outer = clip_ring_to_rect(&poly.exterior, rect);
    if outer.is_empty() {
        return out;
    }
    out.push(ClippedRing {
        ring: outer,
        hole: false,
    });
    for h in &poly.holes {
        let ring = clip_ring_to_rect(h, rect);
        if !ring.is_empty() {
            out.push(ClippedRing { ring, hole: true });
        }
    }
    out
}

/// Net area of clipped pieces at a fixed anchor latitude.
pub fn clipped_area_m2(pieces: &[ClippedRing], lat0: f64) -> f64 {
    let net: f64 = pieces
        .iter()
        .map(|p| {
            let a = ring_area_m2_at(&p.ring, lat0);
            if p.hole {
                -a
            } else {
                a
            }
        })
        .sum();
    net.max(0.0)
}

pub fn polygon_area_m2_at(poly: &Polygon, lat0: f64) -> f64 {
    let holes: f64 = poly.holes.iter().map(|h| ring_area_m2_at(h, lat0)).sum();
    (ring_area_m2_at(&poly.exterior, lat0) - holes).max(0.0)
}

pub fn zone_area_m2_at(zone: &Zone, lat0: f64) -> f64 {
    zone.polygons
        .iter()
        .map(|p| polygon_area_m2_at(p, lat0))
        .sum()
}

pub fn intersection_area_m2_at(rect: &BoundingBox, zone: &Zone, lat0: f64) -> f64 {
    zone.polygons
        .iter()
        .map(|p| clipped_area_m2(&clip_rect_polygon(rect, p), lat0))
        .sum()
}

/// Which denominator the headline percentage uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapDefinition {
    /// intersection / cluster area
    PctOfCluster,
    /// intersection / area of the overlapped zones
    #[default]
    PctOfZone,
    /// intersection / union
    Iou,
}

impl std::str::FromStr for OverlapDefinition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pct_of_cluster" | "cluster" => Ok(OverlapDefinition::PctOfCluster),
            "pct_of_zone" | "zone" => Ok(OverlapDefinition::PctOfZone),
            "iou" => Ok(OverlapDefinition::Iou),
            other => Err(Error::MalformedRecord(format!(
                "unknown overlap definition {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneOverlap {
    pub source_id: String,
    pub label: LandUseLabel,
    pub zone_area_m2: f64,
    pub intersection_area_m2: f64,
    pub pct_of_cluster: f64,
    pub pct_of_zone: f64,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub cluster_id: String,
    pub predicted_label: LandUseLabel,
    pub cluster_area_m2: f64,
    /// One row per zone of the predicted label that the cluster touches.
    pub rows: Vec<ZoneOverlap>,
    pub intersection_area_m2: f64,
    /// Combined area of the zones listed in `rows`.
    pub overlapped_zone_area_m2: f64,
    pub pct_of_cluster: f64,
    pub pct_of_zone: f64,
    pub iou: f64,
    pub headline: OverlapDefinition,
    pub headline_pct: f64,
}

fn pct(num: f64, den: f64) -> f64 {
    if den <= 0.0 {
        0.0
    } else {
        (100.0 * num / den).clamp(0.0, 100.0)
    }
}

/// Compares a cluster rectangle with every zone carrying the predicted
/// label. All areas share one projection anchored at the rectangle's centre
/// latitude so the ratios are exact planar ratios.
///
/// Same-label zones must not overlap each other (enforced on load), so their
/// intersections with the rectangle are disjoint and simply add up.
pub fn overlap_report(
    cluster_id: &str,
    rect: &BoundingBox,
    predicted_label: LandUseLabel,
    zones: &[Zone],
    headline: OverlapDefinition,
) -> Result<OverlapReport> {
    rect.validate()?;
    let candidates: Vec<&Zone> = zones
        .iter()
        .filter(|z| z.label == predicted_label)
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoZonesForLabel(predicted_label));
    }
    let lat0 = rect.center().lat;
    let cluster_area = ring_area_m2_at(&rect.ring(), lat0);

    let mut rows = Vec::new();
    for zone in candidates {
        if !zone.bbox().is_some_and(|zb| zb.intersects(rect)) {
            continue;
        }
        let inter = intersection_area_m2_at(rect, zone, lat0);
        if inter <= 0.0 {
            continue;
        }
        let zone_area = zone_area_m2_at(zone, lat0);
        let inter = inter.min(zone_area).min(cluster_area);
        rows.push(ZoneOverlap {
            source_id: zone.source_id.clone(),
            label: zone.label,
            zone_area_m2: zone_area,
            intersection_area_m2: inter,
            pct_of_cluster: pct(inter, cluster_area),
            pct_of_zone: pct(inter, zone_area),
            iou: pct(inter, cluster_area + zone_area - inter),
        });
    }

    let inter: f64 = rows.iter().map(|r| r.intersection_area_m2).sum();
    let zone_area: f64 = rows.iter().map(|r| r.zone_area_m2).sum();
    let inter = inter.min(cluster_area);
    let pct_of_cluster = pct(inter, cluster_area);
    let pct_of_zone = pct(inter, zone_area);
    let iou = pct(inter, cluster_area + zone_area - inter);
    let headline_pct = match headline {
        OverlapDefinition::PctOfCluster => pct_of_cluster,
        OverlapDefinition::PctOfZone => pct_of_zone,
        OverlapDefinition::Iou => iou,
    };
    Ok(OverlapReport {
        cluster_id: cluster_id.to_string(),
        predicted_label,
        cluster_area_m2: cluster_area,
        rows,
        intersection_area_m2: inter,
        overlapped_zone_area_m2: zone_area,
        pct_of_cluster,
        pct_of_zone,
        iou,
        headline,
        headline_pct,
    })
}
