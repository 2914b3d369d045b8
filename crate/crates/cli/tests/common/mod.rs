//! Drives the `landsig` binary through a whole synthetic run.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_landsig"))
}

pub fn landsig(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run landsig")
}

pub fn landsig_ok(dir: &Path, args: &[&str]) -> Output {
    let out = landsig(dir, args);
    assert!(
        out.status.success(),
        "landsig {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// 0.002 degree seed boxes at each zone centre, as `--seed` arguments.
pub fn seed_args(ground_truth: &Path) -> Vec<String> {
    let truth: Value =
        serde_json::from_str(&std::fs::read_to_string(ground_truth).unwrap()).unwrap();
    let mut args = Vec::new();
    for z in truth["zones"].as_array().unwrap() {
        let b = &z["bbox"];
        let f = |k: &str| b[k].as_f64().unwrap();
        let (lat, lon) = (
            (f("lat_min") + f("lat_max")) / 2.0,
            (f("lon_min") + f("lon_max")) / 2.0,
        );
        args.push("--seed".to_string());
        for v in [lat - 0.001, lat + 0.001, lon - 0.001, lon + 0.001] {
            args.push(v.to_string());
        }
    }
    args
}

pub fn truth_labels(ground_truth: &Path) -> Vec<String> {
    let truth: Value =
        serde_json::from_str(&std::fs::read_to_string(ground_truth).unwrap()).unwrap();
    truth["zones"]
        .as_array()
        .unwrap()
        .iter()
        .map(|z| z["label"].as_str().unwrap().to_string())
        .collect()
}

/// synth ×2 → ingest ×2 → template → auto-grow ×4 → classify → validate →
/// report. Returns every artifact by relative path.
pub fn run_pipeline(dir: &Path, base_seed: u64, test_seed: u64) -> BTreeMap<String, Vec<u8>> {
    let s = |v: u64| v.to_string();
    landsig_ok(
        dir,
        &[
            "synth",
            "--days",
            "30",
            "--seed",
            &s(base_seed),
            "--out-dir",
            "base",
        ],
    );
    landsig_ok(
        dir,
        &[
            "synth",
            "--days",
            "30",
            "--seed",
            &s(test_seed),
            "--out-dir",
            "test",
        ],
    );
    landsig_ok(
        dir,
        &[
            "ingest",
            "--in",
            "base/events.csv",
            "--format",
            "csv",
            "--tz-offset",
            "600",
            "--out",
            "base/store",
            "--name",
            "base",
        ],
    );
    landsig_ok(
        dir,
        &[
            "ingest",
            "--in",
            "test/events.csv",
            "--format",
            "csv",
            "--tz-offset",
            "600",
            "--out",
            "test/store",
            "--name",
            "test",
        ],
    );
    landsig_ok(
        dir,
        &[
            "template",
            "--store",
            "base/store",
            "--zones",
            "base/zones.geojson",
            "--out",
            "template.json",
        ],
    );
    let seeds = seed_args(&dir.join("test/ground_truth.json"));
    for (i, seed) in seeds.chunks(5).enumerate() {
        let mut args: Vec<&str> = vec![
            "auto-grow",
            "--store",
            "test/store",
            "--out",
            "clusters.json",
        ];
        if i > 0 {
            args.push("--append");
        }
        args.extend(seed.iter().map(String::as_str));
        landsig_ok(dir, &args);
    }
    landsig_ok(
        dir,
        &[
            "classify",
            "--template",
            "template.json",
            "--clusters",
            "clusters.json",
            "--output",
            "csv",
            "--out",
            "mse.csv",
        ],
    );
    landsig_ok(
        dir,
        &[
            "classify",
            "--template",
            "template.json",
            "--clusters",
            "clusters.json",
            "--out",
            "classified.json",
        ],
    );
    landsig_ok(
        dir,
        &[
            "validate",
            "--clusters",
            "clusters.json",
            "--zones",
            "test/zones.geojson",
            "--template",
            "template.json",
            "--out",
            "overlap.csv",
            "--detail",
            "overlap-detail.csv",
        ],
    );
    landsig_ok(
        dir,
        &[
            "report",
            "--template",
            "template.json",
            "--clusters",
            "clusters.json",
            "--zones",
            "test/zones.geojson",
            "--out-dir",
            "report",
        ],
    );
    let mut files = BTreeMap::new();
    collect(dir, dir, &mut files);
    files
}

fn collect(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect(root, &p, out);
        } else {
            let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            out.insert(rel, std::fs::read(&p).unwrap());
        }
    }
}

/// Predicted labels from `classified.json`, in cluster order.
pub fn predicted_labels(dir: &Path) -> Vec<String> {
    let v: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("classified.json")).unwrap())
            .unwrap();
    v.as_array()
        .unwrap()
        .iter()
        .map(|r| r["label"].as_str().unwrap().to_string())
        .collect()
}
