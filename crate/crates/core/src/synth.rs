//! Synthetic cities with known land use.
//!
//! Every zone draws a Poisson number of events per day, each event's local
//! hour from the zone's hourly weights, a uniform second within that hour,
//! and a uniform position inside the zone polygon. Output is fully
//! determined by the profiles, the config and the seed.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::point_in_polygon;
use crate::ingest::validate_tz_offset;
use crate::model::{
    BoundingBox, GeoEvent, HourlyCounts, LandUseLabel, LatLon, Polygon, Zone, HOURS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneProfile {
    pub label: LandUseLabel,
    pub source_id: String,
    pub polygon: Polygon,
    /// Expected events per day.
    pub daily_rate: f64,
    /// Probability of each local hour; sums to 1.
    pub hourly_weights: [f64; HOURS],
}

impl ZoneProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.daily_rate.is_finite() && self.daily_rate > 0.0) {
            return Err(Error::InvalidProfile(format!(
                "{}: daily_rate {}",
                self.source_id, self.daily_rate
            )));
        }
        if self
            .hourly_weights
            .iter()
            .any(|w| !w.is_finite() || *w < 0.0)
        {
            return Err(Error::InvalidProfile(format!(
                "{}: negative or non-finite weight",
                self.source_id
            )));
        }
        let sum: f64 = self.hourly_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidProfile(format!(
                "{}: weights sum to {sum}",
                self.source_id
            )));
        }
        if self.polygon.bbox().is_none_or(|b| b.validate().is_err()) {
            return Err(Error::InvalidProfile(format!(
                "{}: polygon has no valid extent",
                self.source_id
            )));
        }
        Ok(())
    }

    pub fn zone(&self) -> Zone {
        Zone {
            label: self.label,
            polygons: vec![self.polygon.clone()],
            source_id: self.source_id.clone(),
        }
    }

    /// Mean-1 signature implied by the weights.
    pub fn expected_signature(&self) -> [f64; HOURS] {
        self.hourly_weights.map(|w| w * HOURS as f64)
    }
}

fn normalized(raw: [f64; HOURS]) -> [f64; HOURS] {
    let sum: f64 = raw.iter().sum();
    raw.map(|v| v / sum)
}

/// Hourly weights for the four reference land uses.
///
/// Business peaks at 13:00 with a second peak at 17:00. Residential rises
/// through the afternoon to a 22:00 maximum. Education peaks at 10:00, again
/// at 12:00, then tapers. Recreation peaks at 19:00 and drops sharply. Every
/// hour keeps at least 0.2% of the mass.
pub fn default_weights(label: LandUseLabel) -> [f64; HOURS] {
    let raw = match label {
        LandUseLabel::Business => [
            0.5, 0.3, 0.2, 0.2, 0.2, 0.4, 1.0, 2.0, 3.0, 3.5, 4.0, 4.5, //
            5.5, 7.0, 5.5, 5.0, 5.5, 6.5, 5.0, 3.5, 2.5, 2.0, 1.5, 1.0,
        ],
        LandUseLabel::Residential => [
            3.0, 2.0, 1.2, 0.8, 0.6, 0.6, 1.0, 1.6, 2.0, 2.0, 2.0, 2.2, //
            2.5, 2.8, 3.0, 3.3, 3.7, 4.2, 4.8, 5.4, 6.0, 6.6, 7.2, 5.0,
        ],
        LandUseLabel::Education => [
            0.3, 0.2, 0.2, 0.2, 0.2, 0.4, 1.0, 2.5, 4.5, 6.0, 8.0, 6.5, //
            7.0, 5.5, 5.0, 4.4, 3.8, 3.2, 2.6, 2.0, 1.5, 1.1, 0.8, 0.5,
        ],
        LandUseLabel::Recreation => [
            1.5, 1.0, 0.6, 0.4, 0.3, 0.3, 0.5, 0.8, 1.2, 1.5, 1.8, 2.0, //
            2.3, 2.5, 2.6, 2.8, 3.2, 4.0, 6.0, 9.0, 4.0, 2.8, 2.2, 1.8,
        ],
    };
    normalized(raw)
}

/// Activity only between 08:00 and 17:59; the night hours are truly empty.
pub fn daytime_only_weights() -> [f64; HOURS] {
    let mut raw = [0.0; HOURS];
    for (h, w) in raw.iter_mut().enumerate().take(18).skip(8) {
        *w = 6.0 - (h as f64 - 13.0).abs();
    }
    normalized(raw)
}

/// Side of each synthetic zone square, in degrees.
pub const ZONE_SIDE_DEG: f64 = 0.01;
/// Gap between neighbouring zone squares, in degrees.
pub const ZONE_GAP_DEG: f64 = 0.01;

/// Square zone `slot` (0..4) of a 2×2 layout centred on `center`.
pub fn layout_box(center: LatLon, slot: usize) -> BoundingBox {
    let (row, col) = ((slot / 2) as f64, (slot % 2) as f64);
    let pitch = ZONE_SIDE_DEG + ZONE_GAP_DEG;
    let origin = -(ZONE_SIDE_DEG + ZONE_GAP_DEG / 2.0);
    let lat_min = center.lat + origin + row * pitch;
    let lon_min = center.lon + origin + col * pitch;
    BoundingBox {
        lat_min,
        lat_max: lat_min + ZONE_SIDE_DEG,
        lon_min,
        lon_max: lon_min + ZONE_SIDE_DEG,
    }
}

/// Four square zones (Business, Residential, Education, Recreation) around
/// `center`, each with the default weights.
pub fn default_profiles_at(center: LatLon, daily_rate: f64) -> Vec<ZoneProfile> {
    LandUseLabel::ALL
        .iter()
        .enumerate()
        .map(|(slot, &label)| ZoneProfile {
            label,
            source_id: format!("{}-{}", label.as_str().to_ascii_lowercase(), slot + 1),
            polygon: Polygon::from_bbox(&layout_box(center, slot)),
            daily_rate,
            hourly_weights: default_weights(label),
        })
        .collect()
}

/// Brisbane CBD, 200 events per zone per day.
pub const DEFAULT_CENTER: LatLon = LatLon::new(-27.4698, 153.0251);
pub const DEFAULT_DAILY_RATE: f64 = 200.0;

pub fn default_profiles() -> Vec<ZoneProfile> {
    default_profiles_at(DEFAULT_CENTER, DEFAULT_DAILY_RATE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub days: u32,
    pub seed: u64,
    /// Local = UTC + offset; timestamps are placed so that local hours
    /// match the drawn hours.
    pub tz_offset_minutes: i32,
    /// UTC midnight of the first day (epoch seconds).
    pub start_day_utc: i64,
    pub users_per_zone: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            days: 30,
            seed: 7,
            tz_offset_minutes: 600,
            start_day_utc: 1_433_116_800, // 2015-06-01
            users_per_zone: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneTruth {
    pub label: LandUseLabel,
    pub source_id: String,
    pub counts: HourlyCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCity {
    pub events: Vec<GeoEvent>,
    pub truth: Vec<ZoneTruth>,
    pub zones: Vec<Zone>,
}

fn sample_in_polygon(rng: &mut impl Rng, poly: &Polygon, bbox: &BoundingBox) -> LatLon {
    let rectangular = poly.holes.is_empty() && *poly == Polygon::from_bbox(bbox);
    loop {
        let p = LatLon::new(
            rng.random_range(bbox.lat_min..bbox.lat_max),
            rng.random_range(bbox.lon_min..bbox.lon_max),
        );
        if rectangular || point_in_polygon(p, poly) {
            return p;
        }
    }
}

pub fn generate_city(profiles: &[ZoneProfile], config: &SynthConfig) -> Result<SyntheticCity> {
    if config.days == 0 {
        return Err(Error::InvalidProfile("days must be at least 1".into()));
    }
    if config.users_per_zone == 0 {
        return Err(Error::InvalidProfile(
            "users_per_zone must be at least 1".into(),
        ));
    }
    validate_tz_offset(config.tz_offset_minutes)?;
    if profiles.is_empty() {
        return Err(Error::InvalidProfile("no zone profiles".into()));
    }
    for p in profiles {
        p.validate()?;
    }
    let local_midnight = config.start_day_utc - i64::from(config.tz_offset_minutes) * 60;
    if local_midnight < 0 {
        return Err(Error::InvalidProfile("start day precedes the epoch".into()));
    }

    let per_zone: Vec<(Vec<GeoEvent>, ZoneTruth)> = profiles
        .par_iter()
        .enumerate()
        .map(|(zi, profile)| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(zi as u64);
            let daily = Poisson::new(profile.daily_rate).expect("validated rate");
            let hours = WeightedIndex::new(profile.hourly_weights).expect("validated weights");
            let bbox = profile.polygon.bbox().expect("validated polygon");
            let mut counts = HourlyCounts::zeros();
            let mut events = Vec::new();
            for day in 0..i64::from(config.days) {
                let n = daily.sample(&mut rng) as u64;
                for _ in 0..n {
                    let hour = hours.sample(&mut rng);
                    let second = rng.random_range(0..3600i64);
                    let pos = sample_in_polygon(&mut rng, &profile.polygon, &bbox);
                    let user = rng.random_range(0..config.users_per_zone);
                    counts.0[hour] += 1;
                    events.push(GeoEvent {
                        lat: pos.lat,
                        lon: pos.lon,
                        timestamp_utc: local_midnight + day * 86_400 + hour as i64 * 3600 + second,
                        user_id: format!("{}-u{user}", profile.source_id),
                    });
                }
            }
            let truth = ZoneTruth {
                label: profile.label,
                source_id: profile.source_id.clone(),
                counts,
            };
            (events, truth)
        })
        .collect();

    let mut city = SyntheticCity {
        events: Vec::new(),
        truth: Vec::with_capacity(profiles.len()),
        zones: profiles.iter().map(ZoneProfile::zone).collect(),
    };
    for (events, truth) in per_zone {
        city.events.extend(events);
        city.truth.push(truth);
    }
    Ok(city)
}

/// `lat,lon,ts,user` CSV as accepted by the ingest module.
pub fn events_to_csv(events: &[GeoEvent]) -> String {
    let mut out = String::with_capacity(events.len() * 48 + 16);
    out.push_str("lat,lon,ts,user\n");
    for e in events {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.lat, e.lon, e.timestamp_utc, e.user_id
        ));
    }
    out
}
