//! HTTP API over immutable dataset indexes and a mutable session table.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use indexmap::IndexMap;
use landsig_core::classify::{assign_label_with, ClassificationResult, ReferenceTemplate};
use landsig_core::cluster_builder::{
    ClusterSession, DatasetView, Decision, Finalized, GrowthPolicy,
};
use landsig_core::ingest::{read_store, DatasetManifest};
use landsig_core::overlap::{overlap_report, OverlapDefinition, OverlapReport};
use landsig_core::signature::{is_complete, normalize};
use landsig_core::spatial_index::SpatialIndex;
use landsig_core::zones::{load_zones, zones_to_geojson, LabelMap, ZoneSet};
use landsig_core::{BoundingBox, HourlyCounts, LandUseLabel, TemporalSignature};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tower_http::catch_panic::CatchPanicLayer;
use tower_http::services::ServeDir;

use crate::api::{ApiError, ApiResult};
use crate::config::ServiceConfig;

pub struct Dataset {
    pub manifest: DatasetManifest,
    pub index: SpatialIndex,
    pub tz_offset_minutes: i32,
    pub zones: Option<ZoneSet>,
}

impl Dataset {
    fn view(&self) -> DatasetView<'_> {
        DatasetView {
            name: &self.manifest.name,
            index: &self.index,
            tz_offset_minutes: self.tz_offset_minutes,
        }
    }
}

type SessionTable = Mutex<HashMap<String, Arc<Mutex<ClusterSession>>>>;

pub struct AppState {
    pub datasets: IndexMap<String, Dataset>,
    pub template: Option<ReferenceTemplate>,
    pub policy: GrowthPolicy,
    pub near_miss_margin: f64,
    pub overlap_definition: OverlapDefinition,
    sessions: SessionTable,
}

impl AppState {
    pub fn new(
        datasets: Vec<Dataset>,
        template: Option<ReferenceTemplate>,
        policy: GrowthPolicy,
        near_miss_margin: f64,
        overlap_definition: OverlapDefinition,
    ) -> ApiResult<Self> {
        let mut map = IndexMap::new();
        for d in datasets {
            let name = d.manifest.name.clone();
            if map.insert(name.clone(), d).is_some() {
                return Err(ApiError::bad_request(format!(
                    "dataset {name:?} registered twice"
                )));
            }
        }
        Ok(AppState {
            datasets: map,
            template,
            policy,
            near_miss_margin,
            overlap_definition,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    /// Loads every store, zone file and the template named by the config.
    pub fn from_config(cfg: &ServiceConfig) -> ApiResult<Self> {
        if cfg.datasets.is_empty() {
            return Err(ApiError::bad_request("config lists no datasets"));
        }
        let mut datasets = Vec::new();
        for dc in &cfg.datasets {
            let (store, mut manifest) = read_store(&cfg.resolve(&dc.store))?;
            if let Some(name) = &dc.name {
                manifest.name = name.clone();
            }
            if let Some(off) = dc.tz_offset_minutes {
                landsig_core::ingest::validate_tz_offset(off)?;
                manifest.tz_offset_minutes = off;
            }
            let index = SpatialIndex::build(Arc::new(store), cfg.cell_size_deg)?;
            let zones = match &dc.zones {
                Some(z) => {
                    let labels = match &dc.label_map {
                        Some(p) => LabelMap::load(&cfg.resolve(p))?,
                        None => LabelMap::default(),
                    };
                    Some(load_zones(&cfg.resolve(z), &labels)?)
                }
                None => None,
            };
            datasets.push(Dataset {
                tz_offset_minutes: manifest.tz_offset_minutes,
                manifest,
                index,
                zones,
            });
        }
        let template = match &cfg.template {
            Some(p) => Some(ReferenceTemplate::load(&cfg.resolve(p))?),
            None => None,
        };
        AppState::new(
            datasets,
            template,
            cfg.policy,
            cfg.near_miss_margin,
            cfg.overlap_definition,
        )
    }

    fn dataset(&self, name: &str) -> ApiResult<&Dataset> {
        self.datasets
            .get(name)
            .ok_or_else(|| ApiError::not_found(format!("unknown dataset {name:?}")))
    }

    fn template(&self) -> ApiResult<&ReferenceTemplate> {
        self.template
            .as_ref()
            .ok_or_else(|| ApiError::not_found("no reference template loaded"))
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<ClusterSession>>> {
        self.sessions
            .lock()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session {id:?}")))
    }

    fn classify(&self, sig: &TemporalSignature) -> ApiResult<ClassificationResult> {
        Ok(assign_label_with(
            sig,
            self.template()?,
            self.near_miss_margin,
        ))
    }
}

pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/datasets", get(list_datasets))
        .route("/template", get(get_template))
        .route("/zones", get(get_zones))
        .route("/signature", post(signature))
        .route("/classify", post(classify))
        .route("/overlap", post(overlap))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).patch(revise_session))
        .route("/sessions/{id}/finalize", post(finalize_session))
        .with_state(state);
    let api = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async { ApiError::not_found("no such endpoint") }),
    };
    api.layer(CatchPanicLayer::custom(|_| {
        ApiError::io("internal error").into_response()
    }))
}

pub async fn serve(cfg: ServiceConfig) -> ApiResult<()> {
    let state = Arc::new(AppState::from_config(&cfg)?);
    let static_dir = if cfg.serve_static {
        cfg.static_dir.as_ref().map(|d| cfg.resolve(d))
    } else {
        None
    };
    let addr: SocketAddr = format!("{}:{}", cfg.bind, cfg.port)
        .parse()
        .map_err(|e| ApiError::bad_request(format!("bind address: {e}")))?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ApiError::io(format!("cannot bind {addr}: {e}")))?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn body<T: DeserializeOwned>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetInfo {
    #[serde(flatten)]
    pub manifest: DatasetManifest,
    pub bounds: BoundingBox,
    pub has_zones: bool,
}

async fn list_datasets(State(st): State<Arc<AppState>>) -> Json<Vec<DatasetInfo>> {
    Json(
        st.datasets
            .values()
            .map(|d| DatasetInfo {
                manifest: d.manifest.clone(),
                bounds: d.index.bounds(),
                has_zones: d.zones.is_some(),
            })
            .collect(),
    )
}

async fn get_template(State(st): State<Arc<AppState>>) -> ApiResult<Json<ReferenceTemplate>> {
    Ok(Json(st.template()?.clone()))
}

#[derive(Debug, Deserialize)]
struct ZonesQuery {
    dataset: String,
}

async fn get_zones(
    State(st): State<Arc<AppState>>,
    q: Result<Query<ZonesQuery>, QueryRejection>,
) -> ApiResult<Json<Value>> {
    let Query(q) = q.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let zones = st.dataset(&q.dataset)?.zones.as_ref().ok_or_else(|| {
        ApiError::not_found(format!("no zones loaded for dataset {:?}", q.dataset))
    })?;
    Ok(Json(zones_to_geojson(&zones.zones)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionRequest {
    pub dataset: String,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignatureResponse {
    pub dataset: String,
    pub bbox: BoundingBox,
    pub counts: HourlyCounts,
    pub event_total: u64,
    pub complete: bool,
    pub empty_hours: Vec<usize>,
    /// Absent when the rectangle holds no events.
    pub signature: Option<TemporalSignature>,
}

fn measure(st: &AppState, req: &RegionRequest) -> ApiResult<SignatureResponse> {
    req.bbox.validate()?;
    let counts = st.dataset(&req.dataset)?.view().counts(&req.bbox);
    Ok(SignatureResponse {
        dataset: req.dataset.clone(),
        bbox: req.bbox,
        counts,
        event_total: counts.total(),
        complete: is_complete(&counts),
        empty_hours: counts.empty_hours(),
        signature: normalize(&counts).ok(),
    })
}

async fn signature(
    State(st): State<Arc<AppState>>,
    req: Result<Json<RegionRequest>, JsonRejection>,
) -> ApiResult<Json<SignatureResponse>> {
    Ok(Json(measure(&st, &body(req)?)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub dataset: String,
    pub bbox: BoundingBox,
    pub counts: HourlyCounts,
    pub signature: TemporalSignature,
    #[serde(flatten)]
    pub result: ClassificationResult,
}

/// Only complete rectangles are classified, matching what a session would
/// accept.
fn classify_region(st: &AppState, req: &RegionRequest) -> ApiResult<ClassifyResponse> {
    let m = measure(st, req)?;
    let signature = normalize(&m.counts)?;
    if !m.complete {
        return Err(landsig_core::Error::IncompleteCluster {
            hours: m.empty_hours,
        }
        .into());
    }
    Ok(ClassifyResponse {
        dataset: m.dataset,
        bbox: m.bbox,
        counts: m.counts,
        result: st.classify(&signature)?,
        signature,
    })
}

async fn classify(
    State(st): State<Arc<AppState>>,
    req: Result<Json<RegionRequest>, JsonRejection>,
) -> ApiResult<Json<ClassifyResponse>> {
    Ok(Json(classify_region(&st, &body(req)?)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapRequest {
    pub dataset: String,
    pub bbox: BoundingBox,
    /// Classified against the template when absent.
    #[serde(default)]
    pub label: Option<LandUseLabel>,
    #[serde(default)]
    pub cluster_id: Option<String>,
    #[serde(default)]
    pub definition: Option<OverlapDefinition>,
}

async fn overlap(
    State(st): State<Arc<AppState>>,
    req: Result<Json<OverlapRequest>, JsonRejection>,
) -> ApiResult<Json<OverlapReport>> {
    let req = body(req)?;
    let ds = st.dataset(&req.dataset)?;
    let label = match req.label {
        Some(l) => l,
        None => {
            let region = RegionRequest {
                dataset: req.dataset.clone(),
                bbox: req.bbox,
            };
            classify_region(&st, &region)?.result.label
        }
    };
    let zones = ds.zones.as_ref().map(|z| z.zones.as_slice()).unwrap_or(&[]);
    let report = overlap_report(
        req.cluster_id.as_deref().unwrap_or(""),
        &req.bbox,
        label,
        zones,
        req.definition.unwrap_or(st.overlap_definition),
    )?;
    Ok(Json(report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub session: ClusterSession,
    pub complete: bool,
    pub signature: Option<TemporalSignature>,
}

impl From<&ClusterSession> for SessionView {
    fn from(s: &ClusterSession) -> Self {
        SessionView {
            session: s.clone(),
            complete: is_complete(&s.counts),
            signature: normalize(&s.counts).ok(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    dataset: String,
    seed: BoundingBox,
}

async fn create_session(
    State(st): State<Arc<AppState>>,
    req: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<Response> {
    let req = body(req)?;
    let ds = st.dataset(&req.dataset)?;
    let id = uuid::Uuid::new_v4().to_string();
    let session = ClusterSession::open(id.clone(), req.seed, ds.view())?;
    let view = SessionView::from(&session);
    st.sessions
        .lock()
        .expect("session table lock")
        .insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_session(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<SessionView>> {
    let s = st.session(&id)?;
    let s = s.lock().expect("session lock");
    Ok(Json(SessionView::from(&*s)))
}

#[derive(Debug, Deserialize)]
struct ReviseSession {
    bbox: BoundingBox,
}

async fn revise_session(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    req: Result<Json<ReviseSession>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let s = st.session(&id)?;
    let req = body(req)?;
    let mut s = s.lock().expect("session lock");
    let ds = st.dataset(&s.dataset)?;
    s.revise(req.bbox, ds.view())?;
    Ok(Json(SessionView::from(&*s)))
}

#[derive(Debug, Deserialize)]
struct FinalizeSession {
    decision: Decision,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalizeResponse {
    pub session: SessionView,
    pub result: Finalized,
    /// Present for accepted clusters when a template is loaded.
    pub classification: Option<ClassificationResult>,
}

async fn finalize_session(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    req: Result<Json<FinalizeSession>, JsonRejection>,
) -> ApiResult<Json<FinalizeResponse>> {
    let s = st.session(&id)?;
    let req = body(req)?;
    let mut s = s.lock().expect("session lock");
    let result = s.finalize(req.decision)?;
    let classification = match &result {
        Finalized::Accepted { cluster } if st.template.is_some() => {
            Some(st.classify(&cluster.signature)?)
        }
        _ => None,
    };
    Ok(Json(FinalizeResponse {
        session: SessionView::from(&*s),
        result,
        classification,
    }))
}
