//! Domain types shared by every stage of the pipeline.
//!
//! All coordinates are WGS84 degrees. Bounding boxes are half-open on both
//! axes: a point on the minimum edge is inside, a point on the maximum edge
//! is not, so adjacent boxes tile without counting an event twice.

use std::fmt;
use std::ops::Index;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of hourly bins in a day.
pub const HOURS: usize = 24;

/// One geo-tagged record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoEvent {
    pub lat: f64,
    pub lon: f64,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp_utc: i64,
    pub user_id: String,
}

impl GeoEvent {
    pub fn new(lat: f64, lon: f64, timestamp_utc: i64, user_id: impl Into<String>) -> Result<Self> {
        check_lat_lon(lat, lon)?;
        if timestamp_utc < 0 {
            return Err(Error::OutOfRange(format!(
                "negative timestamp {timestamp_utc}"
            )));
        }
        Ok(GeoEvent {
            lat,
            lon,
            timestamp_utc,
            user_id: user_id.into(),
        })
    }
}

pub(crate) fn check_lat_lon(lat: f64, lon: f64) -> Result<()> {
    if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
        return Err(Error::OutOfRange(format!("latitude {lat}")));
    }
    if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
        return Err(Error::OutOfRange(format!("longitude {lon}")));
    }
    Ok(())
}

/// A position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        LatLon { lat, lon }
    }
}

/// Axis-aligned latitude/longitude rectangle, half-open `[min, max)`.
///
/// Boxes that would cross the antimeridian cannot be represented; they show
/// up as `lon_min >= lon_max` and are rejected as degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self> {
        let b = BoundingBox {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
        };
        b.validate()?;
        Ok(b)
    }

    /// Checks range first, then extent.
    pub fn validate(&self) -> Result<()> {
        check_lat_lon(self.lat_min, self.lon_min)?;
        check_lat_lon(self.lat_max, self.lon_max)?;
        if self.lat_min >= self.lat_max {
            return Err(Error::DegenerateBox(format!(
                "lat_min {} >= lat_max {}",
                self.lat_min, self.lat_max
            )));
        }
        if self.lon_min >= self.lon_max {
            return Err(Error::DegenerateBox(format!(
                "lon_min {} >= lon_max {}",
                self.lon_min, self.lon_max
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.lat_min && lat < self.lat_max && lon >= self.lon_min && lon < self.lon_max
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        other.lat_min >= self.lat_min
            && other.lat_max <= self.lat_max
            && other.lon_min >= self.lon_min
            && other.lon_max <= self.lon_max
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.lat_min < other.lat_max
            && other.lat_min < self.lat_max
            && self.lon_min < other.lon_max
            && other.lon_min < self.lon_max
    }

    pub fn lat_span(&self) -> f64 {
        self.lat_max - self.lat_min
    }

    pub fn lon_span(&self) -> f64 {
        self.lon_max - self.lon_min
    }

    pub fn center(&self) -> LatLon {
        LatLon::new(
            0.5 * (self.lat_min + self.lat_max),
            0.5 * (self.lon_min + self.lon_max),
        )
    }

    /// Grows every edge outward by `delta` degrees, clamped to the valid range.
    pub fn expanded(&self, delta: f64) -> BoundingBox {
        BoundingBox {
            lat_min: (self.lat_min - delta).max(-90.0),
            lat_max: (self.lat_max + delta).min(90.0),
            lon_min: (self.lon_min - delta).max(-180.0),
            lon_max: (self.lon_max + delta).min(180.0),
        }
    }

    pub fn translated(&self, dlat: f64, dlon: f64) -> BoundingBox {
        BoundingBox {
            lat_min: self.lat_min + dlat,
            lat_max: self.lat_max + dlat,
            lon_min: self.lon_min + dlon,
            lon_max: self.lon_max + dlon,
        }
    }

    /// Closed counter-clockwise ring (lon as x, lat as y).
    pub fn ring(&self) -> Vec<LatLon> {
        vec![
            LatLon::new(self.lat_min, self.lon_min),
            LatLon::new(self.lat_min, self.lon_max),
            LatLon::new(self.lat_max, self.lon_max),
            LatLon::new(self.lat_max, self.lon_min),
            LatLon::new(self.lat_min, self.lon_min),
        ]
    }

    /// Smallest box covering `points`, or `None` when empty.
    ///
    /// The result is closed on the max edge; callers that need to capture the
    /// maximum point under half-open containment must nudge it outward.
    pub fn covering(points: impl IntoIterator<Item = LatLon>) -> Option<BoundingBox> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = BoundingBox {
            lat_min: first.lat,
            lat_max: first.lat,
            lon_min: first.lon,
            lon_max: first.lon,
        };
        for p in it {
            b.lat_min = b.lat_min.min(p.lat);
            b.lat_max = b.lat_max.max(p.lat);
            b.lon_min = b.lon_min.min(p.lon);
            b.lon_max = b.lon_max.max(p.lon);
        }
        Some(b)
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lat [{}, {}) lon [{}, {})",
            self.lat_min, self.lat_max, self.lon_min, self.lon_max
        )
    }
}

pub fn validate_bbox(b: &BoundingBox) -> Result<()> {
    b.validate()
}

/// Raw event counts per local hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HourlyCounts(pub [u64; HOURS]);

impl HourlyCounts {
    pub fn zeros() -> Self {
        HourlyCounts([0; HOURS])
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    /// Hours with no events.
    pub fn empty_hours(&self) -> Vec<usize> {
        (0..HOURS).filter(|&h| self.0[h] == 0).collect()
    }

    pub fn add(&mut self, other: &HourlyCounts) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += b;
        }
    }

    pub fn scaled(&self, k: u64) -> HourlyCounts {
        HourlyCounts(self.0.map(|c| c * k))
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }
}

impl Index<usize> for HourlyCounts {
    type Output = u64;
    fn index(&self, h: usize) -> &u64 {
        &self.0[h]
    }
}

/// 24 non-negative activity values, one per local hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TemporalSignature([f64; HOURS]);

impl TemporalSignature {
    pub fn new(values: [f64; HOURS]) -> Result<Self> {
        if let Some((h, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidTemplate(format!(
                "signature value at hour {h} is {v}"
            )));
        }
        Ok(TemporalSignature(values))
    }

    pub fn values(&self) -> &[f64; HOURS] {
        &self.0
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / HOURS as f64
    }

    pub fn scaled(&self, c: f64) -> TemporalSignature {
        TemporalSignature(self.0.map(|v| v * c))
    }

    /// Hour of the largest value (first on ties).
    pub fn peak_hour(&self) -> usize {
        let mut best = 0;
        for h in 1..HOURS {
            if self.0[h] > self.0[best] {
                best = h;
            }
        }
        best
    }
}

impl Index<usize> for TemporalSignature {
    type Output = f64;
    fn index(&self, h: usize) -> &f64 {
        &self.0[h]
    }
}

impl<'de> Deserialize<'de> for TemporalSignature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let values = <[f64; HOURS]>::deserialize(d)?;
        TemporalSignature::new(values).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LandUseLabel {
    Business,
    Residential,
    Education,
    Recreation,
}

impl LandUseLabel {
    pub const ALL: [LandUseLabel; 4] = [
        LandUseLabel::Business,
        LandUseLabel::Residential,
        LandUseLabel::Education,
        LandUseLabel::Recreation,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LandUseLabel::Business => "Business",
            LandUseLabel::Residential => "Residential",
            LandUseLabel::Education => "Education",
            LandUseLabel::Recreation => "Recreation",
        }
    }
}

impl fmt::Display for LandUseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LandUseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LandUseLabel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

/// A closed sequence of vertices; first and last vertex are equal.
pub type Ring = Vec<LatLon>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub exterior: Ring,
    #[serde(default)]
    pub holes: Vec<Ring>,
}

impl Polygon {
    pub fn from_bbox(b: &BoundingBox) -> Self {
        Polygon {
            exterior: b.ring(),
            holes: Vec::new(),
        }
    }

    pub fn bbox(&self) -> Option<BoundingBox> {
        BoundingBox::covering(self.exterior.iter().copied())
    }
}

/// An official zoning area with its land-use label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub label: LandUseLabel,
    pub polygons: Vec<Polygon>,
    pub source_id: String,
}

impl Zone {
    pub fn bbox(&self) -> Option<BoundingBox> {
        BoundingBox::covering(
            self.polygons
                .iter()
                .flat_map(|p| p.exterior.iter().copied()),
        )
    }
}
