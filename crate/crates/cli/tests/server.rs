use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use landsig::api::{ApiError, ErrorCode};
use landsig::config::ServiceConfig;
use landsig::server::{router, AppState, Dataset};
use landsig_core::classify::build_template;
use landsig_core::cluster_builder::GrowthPolicy;
use landsig_core::ingest::{parse_dataset_text, write_store, EventStore};
use landsig_core::overlap::OverlapDefinition;
use landsig_core::spatial_index::SpatialIndex;
use landsig_core::synth::{
    default_profiles, events_to_csv, generate_city, SynthConfig, ZoneProfile,
};
use landsig_core::zones::{zones_to_geojson, ZoneSet};
use landsig_core::BoundingBox;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Fixture {
    app: Router,
    profiles: Vec<ZoneProfile>,
}

fn dataset(name: &str, seed: u64, zones: bool) -> (Dataset, Vec<ZoneProfile>) {
    let profiles = default_profiles();
    let city = generate_city(
        &profiles,
        &SynthConfig {
            seed,
            ..Default::default()
        },
    )
    .unwrap();
    let ds = parse_dataset_text(
        &events_to_csv(&city.events),
        landsig_core::ingest::SourceFormat::Csv,
        name.into(),
        600,
    )
    .unwrap();
    let index = SpatialIndex::build(Arc::new(ds.store), 0.005).unwrap();
    let zones = zones.then(|| ZoneSet {
        // Residential zoning left out on purpose.
        zones: city
            .zones
            .into_iter()
            .filter(|z| z.label != landsig_core::LandUseLabel::Residential)
            .collect(),
        unmapped: vec![],
    });
    (
        Dataset {
            manifest: ds.manifest,
            index,
            tz_offset_minutes: 600,
            zones,
        },
        profiles,
    )
}

fn fixture(with_template: bool, static_dir: Option<std::path::PathBuf>) -> Fixture {
    let (base, profiles) = dataset("base", 1, false);
    let (test, _) = dataset("test", 2, true);
    let template = with_template.then(|| {
        let zones: Vec<_> = profiles
            .iter()
            .map(|p| (p.label, vec![p.polygon.bbox().unwrap()]))
            .collect();
        build_template("base", &zones, &base.index, 600).unwrap()
    });
    let state = AppState::new(
        vec![base, test],
        template,
        GrowthPolicy::default(),
        0.05,
        OverlapDefinition::PctOfZone,
    )
    .unwrap();
    Fixture {
        app: router(Arc::new(state), static_dir),
        profiles,
    }
}

fn shared() -> &'static Fixture {
    static F: std::sync::OnceLock<Fixture> = std::sync::OnceLock::new();
    F.get_or_init(|| fixture(true, None))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call_raw(app, method, uri, body.map(|b| b.to_string())).await;
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, v)
}

async fn call_raw(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<String>,
) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, bytes)
}

fn bbox_json(b: &BoundingBox) -> Value {
    json!({"lat_min": b.lat_min, "lat_max": b.lat_max, "lon_min": b.lon_min, "lon_max": b.lon_max})
}

fn centre_box(p: &ZoneProfile, half: f64) -> BoundingBox {
    let c = p.polygon.bbox().unwrap().center();
    BoundingBox::new(c.lat - half, c.lat + half, c.lon - half, c.lon + half).unwrap()
}

fn assert_error(status: StatusCode, body: &Value, code: &str) {
    assert_eq!(body["code"], code, "{body}");
    let parsed: ApiError = serde_json::from_value(body.clone()).unwrap();
    assert_eq!(parsed.code.status(), status);
    let keys: Vec<_> = body.as_object().unwrap().keys().cloned().collect();
    assert!(keys
        .iter()
        .all(|k| ["code", "message", "detail"].contains(&k.as_str())));
}

#[tokio::test]
async fn datasets_lists_manifests() {
    let f = shared();
    let (s, v) = call(&f.app, Method::GET, "/datasets", None).await;
    assert_eq!(s, StatusCode::OK);
    let names: Vec<_> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["base", "test"]);
    assert_eq!(v[0]["tz_offset_minutes"], 600);
    assert_eq!(v[1]["has_zones"], true);
    assert!(v[0]["record_count"].as_u64().unwrap() > 20_000);
}

#[tokio::test]
async fn signature_of_empty_region() {
    let f = shared();
    let bbox = json!({"lat_min": 10.0, "lat_max": 10.1, "lon_min": 10.0, "lon_max": 10.1});
    let (s, v) = call(
        &f.app,
        Method::POST,
        "/signature",
        Some(json!({"dataset": "test", "bbox": bbox})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["counts"], json!(vec![0; 24]));
    assert_eq!(v["complete"], false);
    assert_eq!(v["signature"], Value::Null);
    assert_eq!(v["empty_hours"].as_array().unwrap().len(), 24);
}

#[tokio::test]
async fn classify_business_zone() {
    let f = shared();
    let b = f.profiles[0].polygon.bbox().unwrap();
    let body = json!({"dataset": "test", "bbox": bbox_json(&b)}).to_string();
    let (s, raw) = call_raw(&f.app, Method::POST, "/classify", Some(body)).await;
    assert_eq!(s, StatusCode::OK);
    let v: Value = serde_json::from_slice(&raw).unwrap();
    assert_eq!(v["label"], "Business");
    // The MSE row keeps template order.
    let text = String::from_utf8(raw).unwrap();
    let row = &text[text.find("\"mse_row\"").unwrap()..];
    let pos: Vec<usize> = ["Business", "Residential", "Education", "Recreation"]
        .iter()
        .map(|l| row.find(&format!("\"{l}\"")).unwrap())
        .collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
    assert!(v["margin"].as_f64().unwrap() > 0.05);
    assert_eq!(v["signature"].as_array().unwrap().len(), 24);
}

#[tokio::test]
async fn pure_queries_are_deterministic() {
    let f = shared();
    let b = bbox_json(&f.profiles[2].polygon.bbox().unwrap());
    for uri in ["/signature", "/classify", "/overlap"] {
        let body = json!({"dataset": "test", "bbox": b}).to_string();
        let a = call_raw(&f.app, Method::POST, uri, Some(body.clone())).await;
        let c = call_raw(&f.app, Method::POST, uri, Some(body)).await;
        assert_eq!(a, c, "{uri}");
    }
}

#[tokio::test]
async fn classify_errors() {
    let f = shared();
    let empty = json!({"lat_min": 10.0, "lat_max": 10.1, "lon_min": 10.0, "lon_max": 10.1});
    let (s, v) = call(
        &f.app,
        Method::POST,
        "/classify",
        Some(json!({"dataset": "test", "bbox": empty})),
    )
    .await;
    assert_error(s, &v, "EmptySignature");

    let tiny = bbox_json(&centre_box(&f.profiles[0], 0.0002));
    let (s, v) = call(
        &f.app,
        Method::POST,
        "/classify",
        Some(json!({"dataset": "test", "bbox": tiny})),
    )
    .await;
    assert_error(s, &v, "IncompleteCluster");
    assert!(!v["detail"]["empty_hours"].as_array().unwrap().is_empty());

    let flat = json!({"lat_min": 1.0, "lat_max": 1.0, "lon_min": 0.0, "lon_max": 1.0});
    let (s, v) = call(
        &f.app,
        Method::POST,
        "/signature",
        Some(json!({"dataset": "test", "bbox": flat})),
    )
    .await;
    assert_error(s, &v, "BadRequest");

    let ok = bbox_json(&f.profiles[0].polygon.bbox().unwrap());
    let (s, v) = call(
        &f.app,
        Method::POST,
        "/classify",
        Some(json!({"dataset": "nope", "bbox": ok})),
    )
    .await;
    assert_error(s, &v, "NotFound");

    let (s, bytes) = call_raw(&f.app, Method::POST, "/classify", Some("{not json".into())).await;
    assert_error(s, &serde_json::from_slice(&bytes).unwrap(), "BadRequest");

    let (s, v) = call(
        &f.app,
        Method::POST,
        "/classify",
        Some(json!({"dataset": "test"})),
    )
    .await;
    assert_error(s, &v, "BadRequest");
}

#[tokio::test]
async fn template_endpoint() {
    let f = shared();
    let (s, v) = call(&f.app, Method::GET, "/template", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["entries"].as_array().unwrap().len(), 4);

    let bare = fixture(false, None);
    let (s, v) = call(&bare.app, Method::GET, "/template", None).await;
    assert_error(s, &v, "NotFound");
}

#[tokio::test]
async fn zones_endpoint() {
    let f = shared();
    let (s, v) = call(&f.app, Method::GET, "/zones?dataset=test", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["type"], "FeatureCollection");
    assert_eq!(v["features"].as_array().unwrap().len(), 3);

    let (s, v) = call(&f.app, Method::GET, "/zones?dataset=base", None).await;
    assert_error(s, &v, "NotFound");
    let (s, v) = call(&f.app, Method::GET, "/zones", None).await;
    assert_error(s, &v, "BadRequest");
}

#[tokio::test]
async fn overlap_endpoint() {
    let f = shared();
    let b = f.profiles[0].polygon.bbox().unwrap();
    let (s, v) = call(
        &f.app,
        Method::POST,
        "/overlap",
        Some(json!({"dataset": "test", "bbox": bbox_json(&b), "cluster_id": "C1"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["predicted_label"], "Business");
    assert_eq!(v["cluster_id"], "C1");
    assert!((v["pct_of_cluster"].as_f64().unwrap() - 100.0).abs() < 0.1);
    assert_eq!(v["headline"], "pct_of_zone");

    // Residential zoning is not loaded for this dataset.
    let r = f.profiles[1].polygon.bbox().unwrap();
    let (s, v) = call(
        &f.app,
        Method::POST,
        "/overlap",
        Some(json!({"dataset": "test", "bbox": bbox_json(&r), "label": "Residential"})),
    )
    .await;
    assert_error(s, &v, "NoZonesForLabel");

    let (s, v) = call(
        &f.app,
        Method::POST,
        "/overlap",
        Some(json!({"dataset": "base", "bbox": bbox_json(&b), "label": "Business", "definition": "iou"})),
    )
    .await;
    assert_error(s, &v, "NoZonesForLabel");
}

#[tokio::test]
async fn session_protocol() {
    let f = shared();
    let seed = centre_box(&f.profiles[3], 0.0002);
    let (s, v) = call(
        &f.app,
        Method::POST,
        "/sessions",
        Some(json!({"dataset": "test", "seed": bbox_json(&seed)})),
    )
    .await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    let id = v["session_id"].as_str().unwrap().to_string();
    assert_eq!(v["status"], "incomplete");
    assert_eq!(v["complete"], false);

    let (s, v) = call(
        &f.app,
        Method::POST,
        &format!("/sessions/{id}/finalize"),
        Some(json!({"decision": "accept"})),
    )
    .await;
    assert_error(s, &v, "IncompleteCluster");

    let flat = json!({"lat_min": 1.0, "lat_max": 0.0, "lon_min": 0.0, "lon_max": 1.0});
    let (s, v) = call(
        &f.app,
        Method::PATCH,
        &format!("/sessions/{id}"),
        Some(json!({"bbox": flat})),
    )
    .await;
    assert_error(s, &v, "BadRequest");

    let grown = f.profiles[3].polygon.bbox().unwrap();
    let (s, v) = call(
        &f.app,
        Method::PATCH,
        &format!("/sessions/{id}"),
        Some(json!({"bbox": bbox_json(&grown)})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "complete");
    assert_eq!(v["complete"], true);
    assert_eq!(v["history"], json!([bbox_json(&seed)]));

    let (s, got) = call(&f.app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(got, v);

    let (s, v) = call(
        &f.app,
        Method::POST,
        &format!("/sessions/{id}/finalize"),
        Some(json!({"decision": "accept"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["result"]["outcome"], "accepted");
    assert_eq!(v["result"]["cluster"]["id"], id.as_str());
    assert_eq!(v["classification"]["label"], "Recreation");
    assert_eq!(v["session"]["status"], "accepted");

    let (s, v) = call(
        &f.app,
        Method::PATCH,
        &format!("/sessions/{id}"),
        Some(json!({"bbox": bbox_json(&seed)})),
    )
    .await;
    assert_error(s, &v, "SessionClosed");
    let (s, v) = call(
        &f.app,
        Method::POST,
        &format!("/sessions/{id}/finalize"),
        Some(json!({"decision": "discard"})),
    )
    .await;
    assert_error(s, &v, "SessionClosed");

    let (s, v) = call(&f.app, Method::GET, "/sessions/does-not-exist", None).await;
    assert_error(s, &v, "NotFound");
    let (s, v) = call(
        &f.app,
        Method::POST,
        "/sessions",
        Some(json!({"dataset": "test", "seed": flat})),
    )
    .await;
    assert_error(s, &v, "BadRequest");
}

#[tokio::test]
async fn discard_closes_session() {
    let f = fixture(false, None);
    let seed = centre_box(&f.profiles[0], 0.001);
    let (_, v) = call(
        &f.app,
        Method::POST,
        "/sessions",
        Some(json!({"dataset": "test", "seed": bbox_json(&seed)})),
    )
    .await;
    let id = v["session_id"].as_str().unwrap();
    let (s, v) = call(
        &f.app,
        Method::POST,
        &format!("/sessions/{id}/finalize"),
        Some(json!({"decision": "discard"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["result"]["outcome"], "discarded");
    assert_eq!(v["session"]["status"], "discarded");
    assert_eq!(v["classification"], Value::Null);
}

#[tokio::test]
async fn unknown_routes_and_static_files() {
    let f = shared();
    let (s, v) = call(&f.app, Method::GET, "/index.html", None).await;
    assert_error(s, &v, "NotFound");

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>ui</h1>").unwrap();
    let f = fixture(true, Some(dir.path().to_path_buf()));
    let (s, bytes) = call_raw(&f.app, Method::GET, "/index.html", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(bytes, b"<h1>ui</h1>");
    let (s, _) = call(&f.app, Method::GET, "/datasets", None).await;
    assert_eq!(s, StatusCode::OK);
}

#[test]
fn error_codes_have_distinct_statuses_per_class() {
    for code in ErrorCode::ALL {
        let s = code.status();
        assert!(s.is_client_error() || s.is_server_error());
        let text = serde_json::to_string(&code).unwrap();
        assert_eq!(text.trim_matches('"'), format!("{code:?}"));
    }
}

#[test]
fn config_loads_stores_and_zones() {
    let dir = tempfile::tempdir().unwrap();
    let profiles = default_profiles();
    let city = generate_city(
        &profiles,
        &SynthConfig {
            days: 5,
            ..Default::default()
        },
    )
    .unwrap();
    let store = EventStore::from_events(&city.events);
    let ds = parse_dataset_text(
        &events_to_csv(&city.events),
        landsig_core::ingest::SourceFormat::Csv,
        "bne".into(),
        600,
    )
    .unwrap();
    assert_eq!(ds.store, store);
    let data = dir.path().join("data");
    write_store(&data.join("bne"), &store, &ds.manifest).unwrap();
    std::fs::write(
        data.join("zones.geojson"),
        zones_to_geojson(&city.zones).to_string(),
    )
    .unwrap();
    let cfg_path = dir.path().join("landsig.toml");
    std::fs::write(
        &cfg_path,
        r#"
port = 9000
data_dir = "data"

[policy]
step_deg = 0.001

[[datasets]]
store = "bne"
name = "brisbane"
tz_offset_minutes = 570
zones = "zones.geojson"
"#,
    )
    .unwrap();
    let cfg = ServiceConfig::load(&cfg_path).unwrap();
    assert_eq!(cfg.port, 9000);
    assert_eq!(cfg.policy.step_deg, 0.001);
    assert_eq!(
        cfg.policy.max_span_deg,
        GrowthPolicy::default().max_span_deg
    );
    let state = AppState::from_config(&cfg).unwrap();
    let d = &state.datasets["brisbane"];
    assert_eq!(d.tz_offset_minutes, 570);
    assert_eq!(d.zones.as_ref().unwrap().zones.len(), 4);
    assert!(state.template.is_none());

    assert!(ServiceConfig::parse("prot = 1").is_err());
    assert!(ServiceConfig::parse("serve_static = true").is_err());
    let missing = ServiceConfig::parse("[[datasets]]\nstore = \"/nonexistent\"").unwrap();
    let err = AppState::from_config(&missing).err().unwrap();
    assert_eq!(err.code, ErrorCode::IoError);
}
