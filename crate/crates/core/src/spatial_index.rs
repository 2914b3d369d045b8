//! Uniform-grid index over an [`EventStore`].
//!
//! Events are bucketed by `(floor(lat / cell), floor(lon / cell))`. Buckets
//! are stored compressed: one sorted key array with offsets into a flat array
//! of store indices.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{local_hour, EventStore};
use crate::model::{BoundingBox, HourlyCounts, LatLon};

/// Roughly 500 m at mid latitudes.
pub const DEFAULT_CELL_SIZE_DEG: f64 = 0.005;

pub type CellKey = (i64, i64);

#[inline]
pub fn cell_of(lat: f64, lon: f64, cell_size_deg: f64) -> CellKey {
    (
        (lat / cell_size_deg).floor() as i64,
        (lon / cell_size_deg).floor() as i64,
    )
}

#[derive(Debug, Clone)]
pub struct SpatialIndex {
    store: Arc<EventStore>,
    cell_size_deg: f64,
    keys: Vec<CellKey>,
    offsets: Vec<usize>,
    refs: Vec<u32>,
    bounds: BoundingBox,
}

/// Matching events, as ascending indices into the store.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QueryResult {
    pub refs: Vec<u32>,
}

impl QueryResult {
    pub fn count(&self) -> usize {
        self.refs.len()
    }
}

impl SpatialIndex {
    pub fn build(store: Arc<EventStore>, cell_size_deg: f64) -> Result<Self> {
        if !(cell_size_deg.is_finite() && cell_size_deg > 0.0) {
            return Err(Error::InvalidCellSize(cell_size_deg));
        }
        if store.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let (lats, lons) = (store.lats(), store.lons());
        let mut keyed: Vec<(CellKey, u32)> = (0..store.len())
            .into_par_iter()
            .map(|i| (cell_of(lats[i], lons[i], cell_size_deg), i as u32))
            .collect();
        keyed.par_sort_unstable();

        let mut keys = Vec::new();
        let mut offsets = Vec::new();
        let mut refs = Vec::with_capacity(keyed.len());
        for (i, (key, idx)) in keyed.into_iter().enumerate() {
            if keys.last() != Some(&key) {
                keys.push(key);
                offsets.push(i);
            }
            refs.push(idx);
        }
        offsets.push(refs.len());

        let bounds = BoundingBox::covering(
            lats.iter()
                .zip(lons)
                .map(|(&lat, &lon)| LatLon::new(lat, lon)),
        )
        .expect("non-empty store");

        Ok(SpatialIndex {
            store,
            cell_size_deg,
            keys,
            offsets,
            refs,
            bounds,
        })
    }

    pub fn store(&self) -> &Arc<EventStore> {
        &self.store
    }

    pub fn cell_size_deg(&self) -> f64 {
        self.cell_size_deg
    }

    /// Closed extent of the indexed events (may have zero width).
    pub fn bounds(&self) -> BoundingBox {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn cell_count(&self) -> usize {
        self.keys.len()
    }

    /// Store indices bucketed under `key`.
    pub fn cell(&self, key: CellKey) -> &[u32] {
        match self.keys.binary_search(&key) {
            Ok(i) => &self.refs[self.offsets[i]..self.offsets[i + 1]],
            Err(_) => &[],
        }
    }

    /// Calls `f` with the store index of every event inside `b`.
    pub fn for_each_in(&self, b: &BoundingBox, mut f: impl FnMut(u32)) {
        let (lats, lons) = (self.store.lats(), self.store.lons());
        let (r0, c0) = cell_of(b.lat_min, b.lon_min, self.cell_size_deg);
        let (r1, c1) = cell_of(b.lat_max, b.lon_max, self.cell_size_deg);
        let mut visit_cells = |lo: usize, hi: usize| {
            for k in lo..hi {
                for &idx in &self.refs[self.offsets[k]..self.offsets[k + 1]] {
                    let i = idx as usize;
                    if b.contains(lats[i], lons[i]) {
                        f(idx);
                    }
                }
            }
        };

        let rows = (r1 - r0 + 1) as usize;
        if rows > self.keys.len() {
            // Box is huge relative to the occupied grid: scan keys directly.
            for k in 0..self.keys.len() {
                let (r, c) = self.keys[k];
                if (r0..=r1).contains(&r) && (c0..=c1).contains(&c) {
                    visit_cells(k, k + 1);
                }
            }
            return;
        }
        for r in r0..=r1 {
            let lo = self.keys.partition_point(|&k| k < (r, c0));
            let hi = self.keys.partition_point(|&k| k <= (r, c1));
            visit_cells(lo, hi);
        }
    }

    pub fn query_bbox(&self, b: &BoundingBox) -> QueryResult {
        let mut refs = Vec::new();
        self.for_each_in(b, |i| refs.push(i));
        refs.sort_unstable();
        QueryResult { refs }
    }

    pub fn count_in(&self, b: &BoundingBox) -> usize {
        let mut n = 0;
        self.for_each_in(b, |_| n += 1);
        n
    }

    pub fn hourly_histogram(&self, b: &BoundingBox, tz_offset_minutes: i32) -> HourlyCounts {
        let ts = self.store.timestamps();
        let mut counts = HourlyCounts::zeros();
        self.for_each_in(b, |i| {
            counts.0[local_hour(ts[i as usize], tz_offset_minutes)] += 1
        });
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GeoEvent;

    fn index_of(points: &[(f64, f64, i64)], cell: f64) -> SpatialIndex {
        let events: Vec<GeoEvent> = points
            .iter()
            .map(|&(lat, lon, ts)| GeoEvent::new(lat, lon, ts, "u").unwrap())
            .collect();
        SpatialIndex::build(Arc::new(EventStore::from_events(&events)), cell).unwrap()
    }

    #[test]
    fn floor_rule_for_cells() {
        assert_eq!(cell_of(0.0001, 0.0001, 0.001), (0, 0));
        assert_eq!(cell_of(0.001, 0.002, 0.001), (1, 2));
        assert_eq!(cell_of(-0.0001, -0.0001, 0.001), (-1, -1));
        let idx = index_of(&[(0.001, 0.002, 0)], 0.001);
        assert_eq!(idx.cell((1, 2)), &[0]);
    }

    #[test]
    fn build_rejects_bad_input() {
        let store = Arc::new(EventStore::default());
        assert!(matches!(
            SpatialIndex::build(store, 0.01),
            Err(Error::EmptyDataset)
        ));
        let events = [GeoEvent::new(0.0, 0.0, 0, "u").unwrap()];
        let store = Arc::new(EventStore::from_events(&events));
        assert!(SpatialIndex::build(store.clone(), 0.0).is_err());
        assert!(SpatialIndex::build(store, f64::NAN).is_err());
    }

    #[test]
    fn query_edges_follow_half_open_rule() {
        let idx = index_of(&[(0.0, 0.0, 0), (0.01, 0.005, 0), (0.005, 0.01, 0)], 0.005);
        let b = BoundingBox::new(0.0, 0.01, 0.0, 0.01).unwrap();
        assert_eq!(idx.query_bbox(&b).refs, vec![0]);
        let big = BoundingBox::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        assert_eq!(idx.query_bbox(&big).count(), 3);
        let far = BoundingBox::new(10.0, 11.0, 10.0, 11.0).unwrap();
        assert_eq!(idx.query_bbox(&far).count(), 0);
    }

    #[test]
    fn histogram_of_single_event() {
        // 2015-06-01T03:30Z is 13:30 at +10:00.
        let idx = index_of(&[(-27.47, 153.02, 1_433_129_400)], 0.005);
        let b = BoundingBox::new(-27.5, -27.4, 153.0, 153.1).unwrap();
        let h = idx.hourly_histogram(&b, 600);
        assert_eq!(h[13], 1);
        assert_eq!(h.total(), 1);
        let empty = BoundingBox::new(0.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(idx.hourly_histogram(&empty, 600), HourlyCounts::zeros());
    }

    #[test]
    fn world_box_uses_key_scan() {
        let idx = index_of(&[(-27.47, 153.02, 0), (51.5, -0.12, 0)], 0.0001);
        let world = BoundingBox::new(-90.0, 90.0, -180.0, 180.0).unwrap();
        assert_eq!(idx.count_in(&world), 2);
    }
}
