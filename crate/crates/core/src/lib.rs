//! Land-use detection from geo-tagged event streams.
//!
//! The pipeline:
//!
//! 1. [`ingest`] archived events into a columnar [`ingest::EventStore`].
//! 2. Index them on a uniform grid ([`spatial_index`]) for rectangle queries
//!    and hourly histograms.
//! 3. Turn hourly counts into mean-1 [`model::TemporalSignature`]s
//!    ([`signature`]).
//! 4. Build a labelled [`classify::ReferenceTemplate`] from a baseline city's
//!    known zones and label unknown clusters by minimum mean-squared error.
//! 5. Grow clusters until every hour has activity ([`cluster_builder`]),
//!    either interactively or with a fixed expansion policy.
//! 6. Validate predicted clusters against official zoning polygons
//!    ([`overlap`], [`zones`]).
//!
//! [`synth`] generates cities with known land use for end-to-end testing.

pub mod classify;
pub mod cluster_builder;
pub mod error;
pub mod geometry;
pub mod ingest;
pub mod model;
pub mod overlap;
pub mod report;
pub mod signature;
pub mod spatial_index;
pub mod synth;
pub mod zones;

pub use error::{Error, Result};
pub use model::{
    BoundingBox, GeoEvent, HourlyCounts, LandUseLabel, LatLon, TemporalSignature, HOURS,
};
