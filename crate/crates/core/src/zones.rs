//! Zoning maps as GeoJSON feature collections.
//!
//! Each feature is a `Polygon` or `MultiPolygon` whose `landuse` property is
//! mapped to a [`LandUseLabel`] through a [`LabelMap`]. Features whose
//! `landuse` value is not in the map are left out. Coordinates are
//! `[lon, lat]`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{open_ring, point_in_polygon, point_on_ring, ring_is_simple, segments_cross};
use crate::model::{LandUseLabel, LatLon, Polygon, Ring, Zone};

pub const LANDUSE_PROPERTY: &str = "landuse";

/// Raw `landuse` values (matched case-insensitively) to labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    map: HashMap<String, LandUseLabel>,
}

#[derive(Deserialize)]
struct LabelMapFile {
    labels: HashMap<String, String>,
}

impl Default for LabelMap {
    /// Maps each label's own name.
    fn default() -> Self {
        LabelMap {
            map: LandUseLabel::ALL
                .iter()
                .map(|l| (l.as_str().to_ascii_lowercase(), *l))
                .collect(),
        }
    }
}

impl LabelMap {
    pub fn new(pairs: impl IntoIterator<Item = (String, LandUseLabel)>) -> Self {
        LabelMap {
            map: pairs
                .into_iter()
                .map(|(k, v)| (k.trim().to_ascii_lowercase(), v))
                .collect(),
        }
    }

    /// TOML with a `[labels]` table, e.g. `"Commercial 1 Zone" = "Business"`.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: LabelMapFile =
            toml::from_str(text).map_err(|e| Error::MalformedRecord(format!("label map: {e}")))?;
        let pairs = file
            .labels
            .into_iter()
            .map(|(k, v)| Ok((k, v.parse::<LandUseLabel>()?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(pairs))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn get(&self, raw: &str) -> Option<LandUseLabel> {
        self.map.get(&raw.trim().to_ascii_lowercase()).copied()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ZoneSet {
    pub zones: Vec<Zone>,
    /// `landuse` values that had no mapping.
    pub unmapped: Vec<String>,
}

impl ZoneSet {
    pub fn with_label(&self, label: LandUseLabel) -> impl Iterator<Item = &Zone> {
        self.zones.iter().filter(move |z| z.label == label)
    }
}

pub fn load_zones(path: &Path, labels: &LabelMap) -> Result<ZoneSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_zones(&text, labels)
}

pub fn parse_zones(text: &str, labels: &LabelMap) -> Result<ZoneSet> {
    let root: Value = serde_json::from_str(text)?;
    let features: Vec<&Value> = match root["type"].as_str() {
        Some("FeatureCollection") => root["features"]
            .as_array()
            .ok_or_else(|| invalid("collection", "missing features array"))?
            .iter()
            .collect(),
        Some("Feature") => vec![&root],
        _ => return Err(invalid("collection", "expected a FeatureCollection")),
    };

    let mut set = ZoneSet::default();
    for (i, f) in features.into_iter().enumerate() {
        let id = feature_id(f, i);
        let Some(raw) = f["properties"][LANDUSE_PROPERTY].as_str() else {
            set.unmapped.push(String::new());
            continue;
        };
        let Some(label) = labels.get(raw) else {
            set.unmapped.push(raw.to_string());
            continue;
        };
        let polygons = parse_geometry(&f["geometry"], &id)?;
        let zone = Zone {
            label,
            polygons,
            source_id: id,
        };
        set.zones.push(canonicalize_zone(zone)?);
    }
    check_same_label_overlaps(&set.zones)?;
    Ok(set)
}

fn invalid(id: &str, reason: impl Into<String>) -> Error {
    Error::InvalidZone {
        id: id.to_string(),
        reason: reason.into(),
    }
}

fn feature_id(f: &Value, i: usize) -> String {
    let from = |v: &Value| match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    };
    from(&f["id"])
        .or_else(|| from(&f["properties"]["source_id"]))
        .or_else(|| from(&f["properties"]["id"]))
        .unwrap_or_else(|| format!("feature-{i}"))
}

fn parse_geometry(g: &Value, id: &str) -> Result<Vec<Polygon>> {
    match g["type"].as_str() {
        Some("Polygon") => Ok(vec![parse_polygon(&g["coordinates"], id)?]),
        Some("MultiPolygon") => g["coordinates"]
            .as_array()
            .ok_or_else(|| invalid(id, "MultiPolygon without coordinates"))?
            .iter()
            .map(|p| parse_polygon(p, id))
            .collect(),
        Some(other) => Err(invalid(id, format!("unsupported geometry type {other}"))),
        None => Err(invalid(id, "missing geometry")),
    }
}

fn parse_polygon(coords: &Value, id: &str) -> Result<Polygon> {
    let rings = coords
        .as_array()
        .ok_or_else(|| invalid(id, "polygon coordinates are not an array"))?;
    let mut rings = rings.iter().map(|r| parse_ring(r, id));
    let exterior = rings
        .next()
        .ok_or_else(|| invalid(id, "polygon has no rings"))??;
    let holes = rings.collect::<Result<Vec<_>>>()?;
    Ok(Polygon { exterior, holes })
}

fn parse_ring(ring: &Value, id: &str) -> Result<Ring> {
    ring.as_array()
        .ok_or_else(|| invalid(id, "ring is not an array"))?
        .iter()
        .map(|pos| match pos.as_array().map(Vec::as_slice) {
            Some([lon, lat, ..]) => match (lon.as_f64(), lat.as_f64()) {
                (Some(lon), Some(lat)) => Ok(LatLon::new(lat, lon)),
                _ => Err(invalid(id, "non-numeric position")),
            },
            _ => Err(invalid(id, "position needs [lon, lat]")),
        })
        .collect()
}

/// Closes open rings and rejects short or self-intersecting ones.
pub fn canonicalize_ring(mut ring: Ring, id: &str) -> Result<Ring> {
    if ring
        .iter()
        .any(|p| crate::model::check_lat_lon(p.lat, p.lon).is_err())
    {
        return Err(invalid(id, "vertex out of range"));
    }
    ring.dedup();
    if ring.is_empty() {
        return Err(invalid(id, "empty ring"));
    }
    if ring.first() != ring.last() {
        let first = ring[0];
        ring.push(first);
    }
    let open = open_ring(&ring);
    let mut distinct: Vec<LatLon> = Vec::new();
    for p in open {
        if !distinct.contains(p) {
            distinct.push(*p);
        }
    }
    if distinct.len() < 3 {
        return Err(invalid(id, "ring needs at least 3 distinct vertices"));
    }
    if distinct.len() != open.len() || !ring_is_simple(&ring) {
        return Err(invalid(id, "ring self-intersects"));
    }
    Ok(ring)
}

pub fn canonicalize_zone(zone: Zone) -> Result<Zone> {
    let id = zone.source_id.clone();
    if zone.polygons.is_empty() {
        return Err(invalid(&id, "no polygons"));
    }
    let polygons = zone
        .polygons
        .into_iter()
        .map(|p| {
            Ok(Polygon {
                exterior: canonicalize_ring(p.exterior, &id)?,
                holes: p
                    .holes
                    .into_iter()
                    .map(|h| canonicalize_ring(h, &id))
                    .collect::<Result<_>>()?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Zone { polygons, ..zone })
}

fn strictly_inside(p: LatLon, poly: &Polygon) -> bool {
    point_in_polygon(p, poly)
        && !point_on_ring(p, &poly.exterior)
        && !poly.holes.iter().any(|h| point_on_ring(p, h))
}

fn polygons_overlap(a: &Polygon, b: &Polygon) -> bool {
    let edges = |p: &Polygon| {
        let pts = open_ring(&p.exterior).to_vec();
        let n = pts.len();
        (0..n)
            .map(move |i| (pts[i], pts[(i + 1) % n]))
            .collect::<Vec<_>>()
    };
    let (ea, eb) = (edges(a), edges(b));
    if ea
        .iter()
        .any(|&(p, q)| eb.iter().any(|&(r, s)| segments_cross(p, q, r, s)))
    {
        return true;
    }
    open_ring(&a.exterior)
        .iter()
        .any(|&p| strictly_inside(p, b))
        || open_ring(&b.exterior)
            .iter()
            .any(|&p| strictly_inside(p, a))
}

/// Zones sharing a label must not overlap; shared borders are fine.
pub fn check_same_label_overlaps(zones: &[Zone]) -> Result<()> {
    for (i, za) in zones.iter().enumerate() {
        let Some(ba) = za.bbox() else { continue };
        for zb in &zones[i + 1..] {
            if za.label != zb.label || !zb.bbox().is_some_and(|bb| bb.intersects(&ba)) {
                continue;
            }
            let hit = za
                .polygons
                .iter()
                .any(|pa| zb.polygons.iter().any(|pb| polygons_overlap(pa, pb)));
            if hit {
                return Err(invalid(
                    &za.source_id,
                    format!("overlaps zone {} with the same label", zb.source_id),
                ));
            }
        }
    }
    Ok(())
}

fn ring_coords(ring: &[LatLon]) -> Value {
    Value::Array(ring.iter().map(|p| json!([p.lon, p.lat])).collect())
}

/// FeatureCollection with one feature per zone; `landuse` holds the label name.
pub fn zones_to_geojson(zones: &[Zone]) -> Value {
    let features: Vec<Value> = zones
        .iter()
        .map(|z| {
            let polys: Vec<Value> = z
                .polygons
                .iter()
                .map(|p| {
                    let mut rings = vec![ring_coords(&p.exterior)];
                    rings.extend(p.holes.iter().map(|h| ring_coords(h)));
                    Value::Array(rings)
                })
                .collect();
            let geometry = if polys.len() == 1 {
                json!({"type": "Polygon", "coordinates": polys[0]})
            } else {
                json!({"type": "MultiPolygon", "coordinates": polys})
            };
            let mut props = Map::new();
            props.insert(LANDUSE_PROPERTY.into(), json!(z.label.as_str()));
            json!({
                "type": "Feature",
                "id": z.source_id,
                "properties": props,
                "geometry": geometry,
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}
