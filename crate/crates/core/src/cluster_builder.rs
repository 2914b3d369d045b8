//! Incremental cluster growing.
//!
//! A cluster is a lat/lon rectangle whose events cover all 24 local hours.
//! [`ClusterSession`] is the interactive form: a person moves or grows the
//! rectangle and watches the live hourly counts until every hour is covered.
//! [`auto_grow`] is the headless form: expand all four edges by a fixed step
//! until complete or a limit is hit.
//!
//! Either way, a rectangle with an empty hour never becomes a [`Cluster`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundingBox, HourlyCounts, TemporalSignature};
use crate::signature::{is_complete, normalize};
use crate::spatial_index::SpatialIndex;

/// Slack when comparing a grown span against `max_span_deg`.
const SPAN_EPS: f64 = 1e-9;

/// The index and settings a cluster is measured against.
#[derive(Debug, Clone, Copy)]
pub struct DatasetView<'a> {
    pub name: &'a str,
    pub index: &'a SpatialIndex,
    pub tz_offset_minutes: i32,
}

impl DatasetView<'_> {
    pub fn counts(&self, b: &BoundingBox) -> HourlyCounts {
        self.index.hourly_histogram(b, self.tz_offset_minutes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Incomplete,
    Complete,
    Discarded,
    Accepted,
}

impl SessionStatus {
    pub fn is_closed(self) -> bool {
        matches!(self, SessionStatus::Discarded | SessionStatus::Accepted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrowthPolicy {
    /// Outward move of each edge per iteration, in degrees.
    pub step_deg: f64,
    /// Largest permitted lat or lon extent, in degrees.
    pub max_span_deg: f64,
    pub max_iterations: usize,
}

impl Default for GrowthPolicy {
    fn default() -> Self {
        GrowthPolicy {
            step_deg: 0.0025,
            max_span_deg: 0.05,
            max_iterations: 20,
        }
    }
}

impl GrowthPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_deg.is_finite() && self.step_deg > 0.0) {
            return Err(Error::InvalidPolicy(format!("step_deg {}", self.step_deg)));
        }
        if !(self.max_span_deg.is_finite() && self.max_span_deg > 0.0) {
            return Err(Error::InvalidPolicy(format!(
                "max_span_deg {}",
                self.max_span_deg
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidPolicy(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum GrowthMethod {
    Manual {
        history: Vec<BoundingBox>,
    },
    Auto {
        seed: BoundingBox,
        policy: GrowthPolicy,
        iterations: usize,
    },
}

/// An accepted rectangle together with its complete hourly profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: String,
    pub dataset: String,
    pub bbox: BoundingBox,
    pub counts: HourlyCounts,
    pub signature: TemporalSignature,
    pub event_total: u64,
    pub provenance: GrowthMethod,
}

impl Cluster {
    fn from_counts(
        dataset: &str,
        bbox: BoundingBox,
        counts: HourlyCounts,
        provenance: GrowthMethod,
    ) -> Result<Self> {
        if !is_complete(&counts) {
            return Err(Error::IncompleteCluster {
                hours: counts.empty_hours(),
            });
        }
        Ok(Cluster {
            id: String::new(),
            dataset: dataset.to_string(),
            bbox,
            counts,
            signature: normalize(&counts)?,
            event_total: counts.total(),
            provenance,
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSession {
    pub session_id: String,
    pub dataset: String,
    pub bbox: BoundingBox,
    pub history: Vec<BoundingBox>,
    pub counts: HourlyCounts,
    pub status: SessionStatus,
    pub event_total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Finalized {
    Accepted { cluster: Cluster },
    Discarded,
}

impl ClusterSession {
    pub fn open(
        session_id: impl Into<String>,
        seed: BoundingBox,
        view: DatasetView<'_>,
    ) -> Result<Self> {
        seed.validate()?;
        let mut s = ClusterSession {
            session_id: session_id.into(),
            dataset: view.name.to_string(),
            bbox: seed,
            history: Vec::new(),
            counts: HourlyCounts::zeros(),
            status: SessionStatus::Incomplete,
            event_total: 0,
        };
        s.measure(view);
        Ok(s)
    }

    fn measure(&mut self, view: DatasetView<'_>) {
        self.counts = view.counts(&self.bbox);
        self.event_total = self.counts.total();
        self.status = if is_complete(&self.counts) {
            SessionStatus::Complete
        } else {
            SessionStatus::Incomplete
        };
    }

    fn ensure_open(&self) -> Result<()> {
        if self.status.is_closed() {
            return Err(Error::SessionClosed(format!(
                "session {} is {:?}",
                self.session_id, self.status
            )));
        }
        Ok(())
    }

    /// Replaces the rectangle with any valid one and re-measures. The old
    /// rectangle is appended to the history.
    pub fn revise(&mut self, new_bbox: BoundingBox, view: DatasetView<'_>) -> Result<()> {
        self.ensure_open()?;
        new_bbox.validate()?;
        self.history.push(self.bbox);
        self.bbox = new_bbox;
        self.measure(view);
        Ok(())
    }

    /// Accepting requires a complete rectangle; discarding always succeeds.
    /// Both close the session.
    pub fn finalize(&mut self, decision: Decision) -> Result<Finalized> {
        self.ensure_open()?;
        match decision {
            Decision::Discard => {
                self.status = SessionStatus::Discarded;
                Ok(Finalized::Discarded)
            }
            Decision::Accept => {
                let mut history = self.history.clone();
                history.push(self.bbox);
                let cluster = Cluster::from_counts(
                    &self.dataset,
                    self.bbox,
                    self.counts,
                    GrowthMethod::Manual { history },
                )?
                .with_id(self.session_id.clone());
                self.status = SessionStatus::Accepted;
                Ok(Finalized::Accepted { cluster })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthStep {
    pub bbox: BoundingBox,
    pub counts: HourlyCounts,
    pub complete: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    MaxSpanExceeded,
    MaxIterationsReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum GrowthResult {
    Cluster { cluster: Cluster },
    Discarded { reason: DiscardReason },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoGrowOutcome {
    pub seed: BoundingBox,
    pub policy: GrowthPolicy,
    pub trace: Vec<GrowthStep>,
    pub result: GrowthResult,
}

impl AutoGrowOutcome {
    pub fn cluster(&self) -> Option<&Cluster> {
        match &self.result {
            GrowthResult::Cluster { cluster } => Some(cluster),
            GrowthResult::Discarded { .. } => None,
        }
    }

    pub fn into_cluster(self) -> Option<Cluster> {
        match self.result {
            GrowthResult::Cluster { cluster } => Some(cluster),
            GrowthResult::Discarded { .. } => None,
        }
    }
}

/// Measures the seed, then repeatedly moves all four edges out by
/// `policy.step_deg` until the rectangle is complete. A rectangle wider or
/// taller than `max_span_deg` is never measured.
pub fn auto_grow(
    seed: BoundingBox,
    policy: &GrowthPolicy,
    view: DatasetView<'_>,
) -> Result<AutoGrowOutcome> {
    seed.validate()?;
    policy.validate()?;
    let mut trace = Vec::new();
    let mut bbox = seed;
    let finish = |trace, result| AutoGrowOutcome {
        seed,
        policy: *policy,
        trace,
        result,
    };

    for iteration in 1..=policy.max_iterations {
        if bbox.lat_span() > policy.max_span_deg + SPAN_EPS
            || bbox.lon_span() > policy.max_span_deg + SPAN_EPS
        {
            return Ok(finish(
                trace,
                GrowthResult::Discarded {
                    reason: DiscardReason::MaxSpanExceeded,
                },
            ));
        }
        let counts = view.counts(&bbox);
        let complete = is_complete(&counts);
        trace.push(GrowthStep {
            bbox,
            counts,
            complete,
        });
        if complete {
            let cluster = Cluster::from_counts(
                view.name,
                bbox,
                counts,
                GrowthMethod::Auto {
                    seed,
                    policy: *policy,
                    iterations: iteration,
                },
            )?;
            return Ok(finish(trace, GrowthResult::Cluster { cluster }));
        }
        bbox = bbox.expanded(policy.step_deg);
    }
    Ok(finish(
        trace,
        GrowthResult::Discarded {
            reason: DiscardReason::MaxIterationsReached,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::EventStore;
    use crate::model::GeoEvent;
    use std::sync::Arc;

    const DAY0: i64 = 1_433_116_800; // 2015-06-01T00:00Z

    /// One event per hour spread across a 0.01° square, plus a lone 03:00
    /// event far to the north-east.
    fn fixture() -> SpatialIndex {
        let mut events = Vec::new();
        for h in 0..24i64 {
            if h == 3 {
                continue;
            }
            let lat = 0.001 + 0.0003 * h as f64;
            events.push(GeoEvent::new(lat, lat, DAY0 + h * 3600 + 60, "u").unwrap());
        }
        events.push(GeoEvent::new(0.0195, 0.0195, DAY0 + 3 * 3600, "night").unwrap());
        SpatialIndex::build(Arc::new(EventStore::from_events(&events)), 0.005).unwrap()
    }

    fn view(index: &SpatialIndex) -> DatasetView<'_> {
        DatasetView {
            name: "fixture",
            index,
            tz_offset_minutes: 0,
        }
    }

    #[test]
    fn growing_to_include_the_night_event_completes() {
        let index = fixture();
        let seed = BoundingBox::new(0.0, 0.01, 0.0, 0.01).unwrap();
        let mut s = ClusterSession::open("s1", seed, view(&index)).unwrap();
        assert_eq!(s.status, SessionStatus::Incomplete);
        assert_eq!(s.counts.empty_hours(), vec![3]);
        assert!(matches!(
            s.finalize(Decision::Accept),
            Err(Error::IncompleteCluster { .. })
        ));

        s.revise(
            BoundingBox::new(0.0, 0.02, 0.0, 0.02).unwrap(),
            view(&index),
        )
        .unwrap();
        assert_eq!(s.status, SessionStatus::Complete);
        assert_eq!(s.history, vec![seed]);
        assert_eq!(s.event_total, 24);

        let Finalized::Accepted { cluster } = s.finalize(Decision::Accept).unwrap() else {
            panic!("expected a cluster");
        };
        assert_eq!(cluster.id, "s1");
        assert!((cluster.signature.mean() - 1.0).abs() < 1e-12);
        assert!(matches!(
            s.revise(seed, view(&index)),
            Err(Error::SessionClosed(_))
        ));
        assert!(matches!(
            s.finalize(Decision::Discard),
            Err(Error::SessionClosed(_))
        ));
    }

    #[test]
    fn revising_to_the_same_box_only_grows_history() {
        let index = fixture();
        let seed = BoundingBox::new(0.0, 0.01, 0.0, 0.01).unwrap();
        let mut s = ClusterSession::open("s", seed, view(&index)).unwrap();
        let before = s.counts;
        s.revise(seed, view(&index)).unwrap();
        assert_eq!(s.counts, before);
        assert_eq!(s.history.len(), 1);
    }

    #[test]
    fn empty_seed_and_discard() {
        let index = fixture();
        let ocean = BoundingBox::new(-40.0, -39.9, -20.0, -19.9).unwrap();
        let mut s = ClusterSession::open("s", ocean, view(&index)).unwrap();
        assert_eq!(s.event_total, 0);
        assert_eq!(s.status, SessionStatus::Incomplete);
        assert_eq!(s.finalize(Decision::Discard).unwrap(), Finalized::Discarded);
        assert_eq!(s.status, SessionStatus::Discarded);
    }

    #[test]
    fn auto_grow_reaches_the_night_event() {
        let index = fixture();
        let seed = BoundingBox::new(0.0, 0.01, 0.0, 0.01).unwrap();
        let out = auto_grow(seed, &GrowthPolicy::default(), view(&index)).unwrap();
        let cluster = out.cluster().expect("complete");
        assert!(cluster.bbox.contains(0.0195, 0.0195));
        assert_eq!(out.trace.len(), 5);
        for w in out.trace.windows(2) {
            assert!(w[1].bbox.contains_box(&w[0].bbox));
        }
    }

    #[test]
    fn complete_seed_with_single_iteration() {
        let index = fixture();
        let seed = BoundingBox::new(0.0, 0.02, 0.0, 0.02).unwrap();
        let policy = GrowthPolicy {
            max_iterations: 1,
            ..Default::default()
        };
        let out = auto_grow(seed, &policy, view(&index)).unwrap();
        assert_eq!(out.cluster().unwrap().bbox, seed);
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn hopeless_seed_is_discarded_at_max_span() {
        let index = fixture();
        let seed = BoundingBox::new(5.0, 5.005, 5.0, 5.005).unwrap();
        let out = auto_grow(seed, &GrowthPolicy::default(), view(&index)).unwrap();
        assert_eq!(
            out.result,
            GrowthResult::Discarded {
                reason: DiscardReason::MaxSpanExceeded
            }
        );
        let last = out.trace.last().unwrap().bbox;
        assert!(last.lat_span() <= 0.05 + 1e-9);
        assert_eq!(out.trace.len(), 10);

        let tight = GrowthPolicy {
            max_iterations: 3,
            ..Default::default()
        };
        let out = auto_grow(seed, &tight, view(&index)).unwrap();
        assert_eq!(
            out.result,
            GrowthResult::Discarded {
                reason: DiscardReason::MaxIterationsReached
            }
        );
    }

    #[test]
    fn policy_validation() {
        let bad = GrowthPolicy {
            step_deg: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = GrowthPolicy {
            max_iterations: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
