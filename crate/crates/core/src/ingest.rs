//! Archived event files to a columnar event store.
//!
//! Two input shapes are accepted: newline-delimited archived tweet objects
//! and CSV with a `lat,lon,ts,user` header. Only position, time and user id
//! are kept.
//!
//! On disk a store is a directory holding `events.bin` (columnar, little
//! endian) and `manifest.toml`.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::DateTime;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{check_lat_lon, GeoEvent, HOURS};

pub const EVENTS_FILE: &str = "events.bin";
pub const MANIFEST_FILE: &str = "manifest.toml";

const STORE_MAGIC: &[u8; 4] = b"LSEV";
const STORE_VERSION: u32 = 1;
const MAX_TZ_OFFSET_MINUTES: i32 = 14 * 60;
const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceFormat {
    #[serde(rename = "tweet-json-ndjson")]
    TweetJsonNdjson,
    #[serde(rename = "csv")]
    Csv,
}

impl std::str::FromStr for SourceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tweet-json" | "tweet-json-ndjson" | "ndjson" => Ok(SourceFormat::TweetJsonNdjson),
            "csv" => Ok(SourceFormat::Csv),
            other => Err(Error::MalformedRecord(format!(
                "unknown source format {other:?}"
            ))),
        }
    }
}

/// Hour of the local wall clock under a fixed UTC offset (local = UTC + offset).
#[inline]
pub fn local_hour(timestamp_utc: i64, tz_offset_minutes: i32) -> usize {
    let local = timestamp_utc + i64::from(tz_offset_minutes) * 60;
    (local.rem_euclid(SECONDS_PER_DAY) / 3600) as usize
}

pub fn validate_tz_offset(tz_offset_minutes: i32) -> Result<()> {
    if tz_offset_minutes.abs() > MAX_TZ_OFFSET_MINUTES {
        return Err(Error::OutOfRange(format!(
            "tz offset {tz_offset_minutes} minutes exceeds ±{MAX_TZ_OFFSET_MINUTES}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedRecord {
    Event(GeoEvent),
    /// Well-formed record without a point geotag.
    Skip,
}

/// Parses one NDJSON object or one CSV row (`lat,lon,ts,user` column order).
pub fn parse_event_record(line: &str, format: SourceFormat) -> Result<ParsedRecord> {
    match format {
        SourceFormat::TweetJsonNdjson => parse_tweet(line),
        SourceFormat::Csv => {
            let fields = split_csv_row(line)?;
            if fields.len() != 4 {
                return Err(Error::MalformedRecord(format!(
                    "expected 4 CSV fields, found {}",
                    fields.len()
                )));
            }
            parse_csv_fields(&fields[0], &fields[1], &fields[2], &fields[3])
        }
    }
}

fn parse_tweet(line: &str) -> Result<ParsedRecord> {
    let v: Value = serde_json::from_str(line)
        .map_err(|e| Error::MalformedRecord(format!("invalid JSON: {e}")))?;
    if !v.is_object() {
        return Err(Error::MalformedRecord("record is not a JSON object".into()));
    }

    // `coordinates` is [lon, lat]; the legacy `geo` field is [lat, lon].
    let position = match point_pair(&v["coordinates"])? {
        Some([lon, lat]) => (lat, lon),
        None => match point_pair(&v["geo"])? {
            Some([lat, lon]) => (lat, lon),
            None => return Ok(ParsedRecord::Skip),
        },
    };

    let timestamp = tweet_timestamp(&v)?;
    let user = tweet_user(&v)?;
    check_lat_lon(position.0, position.1)?;
    Ok(ParsedRecord::Event(GeoEvent::new(
        position.0, position.1, timestamp, user,
    )?))
}

fn point_pair(field: &Value) -> Result<Option<[f64; 2]>> {
    match field {
        Value::Null => Ok(None),
        Value::Object(obj) => {
            if let Some(kind) = obj.get("type").and_then(Value::as_str) {
                if kind != "Point" {
                    return Ok(None);
                }
            }
            let pair = obj
                .get("coordinates")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::MalformedRecord("point without coordinates".into()))?;
            match pair.as_slice() {
                [a, b, ..] => match (a.as_f64(), b.as_f64()) {
                    (Some(a), Some(b)) => Ok(Some([a, b])),
                    _ => Err(Error::MalformedRecord("non-numeric coordinates".into())),
                },
                _ => Err(Error::MalformedRecord("coordinate pair too short".into())),
            }
        }
        _ => Err(Error::MalformedRecord(
            "unexpected geolocation value".into(),
        )),
    }
}

fn tweet_timestamp(v: &Value) -> Result<i64> {
    match &v["timestamp_ms"] {
        Value::String(s) => {
            if let Ok(ms) = s.trim().parse::<i64>() {
                return Ok(ms.div_euclid(1000));
            }
        }
        Value::Number(n) => {
            if let Some(ms) = n.as_i64() {
                return Ok(ms.div_euclid(1000));
            }
        }
        _ => {}
    }
    match &v["created_at"] {
        Value::String(s) => DateTime::parse_from_str(s, "%a %b %d %H:%M:%S %z %Y")
            .or_else(|_| DateTime::parse_from_rfc3339(s))
            .map(|dt| dt.timestamp())
            .map_err(|e| Error::MalformedRecord(format!("bad created_at {s:?}: {e}"))),
        Value::Number(n) => n
            .as_i64()
            .ok_or_else(|| Error::MalformedRecord("non-integer created_at".into())),
        _ => Err(Error::MalformedRecord("missing timestamp".into())),
    }
}

fn tweet_user(v: &Value) -> Result<String> {
    let user = &v["user"];
    if let Some(s) = user["id_str"].as_str() {
        return Ok(s.to_string());
    }
    if let Some(n) = user["id"].as_u64() {
        return Ok(n.to_string());
    }
    match &v["user_id"] {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(Error::MalformedRecord("missing user id".into())),
    }
}

fn split_csv_row(line: &str) -> Result<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(line.as_bytes());
    match rdr.records().next() {
        Some(Ok(rec)) => Ok(rec.iter().map(str::to_string).collect()),
        Some(Err(e)) => Err(Error::MalformedRecord(format!("CSV: {e}"))),
        None => Err(Error::MalformedRecord("empty CSV row".into())),
    }
}

fn parse_csv_fields(lat: &str, lon: &str, ts: &str, user: &str) -> Result<ParsedRecord> {
    let (lat, lon) = (lat.trim(), lon.trim());
    if lat.is_empty() || lon.is_empty() {
        return Ok(ParsedRecord::Skip);
    }
    let num = |s: &str, what: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::MalformedRecord(format!("bad {what} {s:?}")))
    };
    let lat = num(lat, "lat")?;
    let lon = num(lon, "lon")?;
    let ts = ts.trim();
    let ts = match ts.parse::<i64>() {
        Ok(t) => t,
        Err(_) => {
            let t = num(ts, "ts")?;
            if !t.is_finite() {
                return Err(Error::MalformedRecord(format!("bad ts {ts:?}")));
            }
            t.floor() as i64
        }
    };
    let user = user.trim();
    if user.is_empty() {
        return Err(Error::MalformedRecord("empty user id".into()));
    }
    Ok(ParsedRecord::Event(GeoEvent::new(lat, lon, ts, user)?))
}

/// Immutable columnar event storage. Event references elsewhere are indices
/// into these columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventStore {
    lat: Vec<f64>,
    lon: Vec<f64>,
    ts: Vec<i64>,
    user: Vec<u32>,
    users: Vec<String>,
}

impl EventStore {
    pub fn from_events<'a>(events: impl IntoIterator<Item = &'a GeoEvent>) -> Self {
        let mut store = EventStore::default();
        let mut dict: HashMap<String, u32> = HashMap::new();
        for e in events {
            let id = match dict.get(&e.user_id) {
                Some(&id) => id,
                None => {
                    let id = store.users.len() as u32;
                    store.users.push(e.user_id.clone());
                    dict.insert(e.user_id.clone(), id);
                    id
                }
            };
            store.lat.push(e.lat);
            store.lon.push(e.lon);
            store.ts.push(e.timestamp_utc);
            store.user.push(id);
        }
        store
    }

    pub fn len(&self) -> usize {
        self.lat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lat.is_empty()
    }

    pub fn lats(&self) -> &[f64] {
        &self.lat
    }

    pub fn lons(&self) -> &[f64] {
        &self.lon
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.ts
    }

    pub fn user_id(&self, i: usize) -> &str {
        &self.users[self.user[i] as usize]
    }

    pub fn event(&self, i: usize) -> GeoEvent {
        GeoEvent {
            lat: self.lat[i],
            lon: self.lon[i],
            timestamp_utc: self.ts[i],
            user_id: self.user_id(i).to_string(),
        }
    }

    pub fn events(&self) -> impl Iterator<Item = GeoEvent> + '_ {
        (0..self.len()).map(|i| self.event(i))
    }

    pub fn unique_users(&self) -> usize {
        self.users.len()
    }

    pub fn time_span(&self) -> Option<(i64, i64)> {
        let min = *self.ts.iter().min()?;
        let max = *self.ts.iter().max()?;
        Some((min, max))
    }

    /// Per-hour tally over the whole store.
    pub fn hourly_totals(&self, tz_offset_minutes: i32) -> [u64; HOURS] {
        let mut out = [0u64; HOURS];
        for &t in &self.ts {
            out[local_hour(t, tz_offset_minutes)] += 1;
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len();
        let mut buf = Vec::with_capacity(20 + n * 28);
        buf.extend_from_slice(STORE_MAGIC);
        buf.extend_from_slice(&STORE_VERSION.to_le_bytes());
        buf.extend_from_slice(&(n as u64).to_le_bytes());
        buf.extend_from_slice(&(self.users.len() as u32).to_le_bytes());
        self.lat
            .iter()
            .for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        self.lon
            .iter()
            .for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        self.ts
            .iter()
            .for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        self.user
            .iter()
            .for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        for u in &self.users {
            buf.extend_from_slice(&(u.len() as u32).to_le_bytes());
            buf.extend_from_slice(u.as_bytes());
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != STORE_MAGIC {
            return Err(Error::InvalidStore("bad magic".into()));
        }
        let version = u32::from_le_bytes(r.array()?);
        if version != STORE_VERSION {
            return Err(Error::InvalidStore(format!(
                "unsupported version {version}"
            )));
        }
        let n = u64::from_le_bytes(r.array()?) as usize;
        let n_users = u32::from_le_bytes(r.array()?) as usize;
        let lat = (0..n)
            .map(|_| r.array().map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        let lon = (0..n)
            .map(|_| r.array().map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        let ts = (0..n)
            .map(|_| r.array().map(i64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        let user = (0..n)
            .map(|_| r.array().map(u32::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        let mut users = Vec::with_capacity(n_users);
        for _ in 0..n_users {
            let len = u32::from_le_bytes(r.array()?) as usize;
            let s = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::InvalidStore("user id is not UTF-8".into()))?;
            users.push(s.to_string());
        }
        if r.pos != bytes.len() {
            return Err(Error::InvalidStore("trailing bytes".into()));
        }
        if user.iter().any(|&u| u as usize >= n_users) {
            return Err(Error::InvalidStore("user index out of range".into()));
        }
        Ok(EventStore {
            lat,
            lon,
            ts,
            user,
            users,
        })
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::InvalidStore("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("slice length checked"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    /// local = UTC + offset
    pub tz_offset_minutes: i32,
    pub record_count: u64,
    pub unique_users: u64,
    pub time_span: [i64; 2],
    pub source_format: SourceFormat,
    #[serde(default)]
    pub skipped_records: u64,
    #[serde(default)]
    pub malformed_records: u64,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        validate_tz_offset(self.tz_offset_minutes)?;
        if self.time_span[0] > self.time_span[1] {
            return Err(Error::InvalidStore("time span min exceeds max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct ManifestOverrides {
    pub name: Option<String>,
    pub tz_offset_minutes: i32,
}

/// What a load accepted, skipped and rejected. `accepted + skipped +
/// malformed` equals the number of non-blank data lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub total_lines: u64,
    pub accepted: u64,
    pub skipped: u64,
    pub malformed: u64,
    /// First few parse errors, with 1-based line numbers.
    pub sample_errors: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub store: EventStore,
    pub manifest: DatasetManifest,
    pub stats: IngestStats,
}

const MAX_SAMPLE_ERRORS: usize = 10;

pub fn load_dataset(
    path: &Path,
    format: SourceFormat,
    overrides: &ManifestOverrides,
) -> Result<LoadedDataset> {
    validate_tz_offset(overrides.tz_offset_minutes)?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = overrides.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    parse_dataset_text(&text, format, name, overrides.tz_offset_minutes)
}

/// Parses a whole file's contents. Blank lines are ignored; a CSV header
/// line is required and is not counted as a record.
pub fn parse_dataset_text(
    text: &str,
    format: SourceFormat,
    name: String,
    tz_offset_minutes: i32,
) -> Result<LoadedDataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());

    let columns = match format {
        SourceFormat::Csv => {
            let (_, header) = lines.next().ok_or(Error::EmptyDataset)?;
            Some(CsvColumns::from_header(header)?)
        }
        SourceFormat::TweetJsonNdjson => None,
    };
    let lines: Vec<(usize, &str)> = lines.collect();

    let parsed: Vec<Result<ParsedRecord>> = lines
        .par_iter()
        .map(|&(_, line)| match &columns {
            Some(cols) => cols.parse(line),
            None => parse_event_record(line, format),
        })
        .collect();

    let mut stats = IngestStats {
        total_lines: lines.len() as u64,
        ..Default::default()
    };
    let mut events = Vec::with_capacity(parsed.len());
    for ((lineno, _), outcome) in lines.iter().zip(parsed) {
        match outcome {
            Ok(ParsedRecord::Event(e)) => {
                stats.accepted += 1;
                events.push(e);
            }
            Ok(ParsedRecord::Skip) => stats.skipped += 1,
            Err(e) => {
                stats.malformed += 1;
                if stats.sample_errors.len() < MAX_SAMPLE_ERRORS {
                    stats
                        .sample_errors
                        .push(format!("line {}: {e}", lineno + 1));
                }
            }
        }
    }
    if events.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let store = EventStore::from_events(&events);
    let (min_ts, max_ts) = store.time_span().expect("non-empty store");
    let manifest = DatasetManifest {
        name,
        tz_offset_minutes,
        record_count: store.len() as u64,
        unique_users: store.unique_users() as u64,
        time_span: [min_ts, max_ts],
        source_format: format,
        skipped_records: stats.skipped,
        malformed_records: stats.malformed,
    };
    Ok(LoadedDataset {
        store,
        manifest,
        stats,
    })
}

struct CsvColumns {
    lat: usize,
    lon: usize,
    ts: usize,
    user: usize,
}

impl CsvColumns {
    fn from_header(header: &str) -> Result<Self> {
        let fields = split_csv_row(header)?;
        let find = |name: &str| {
            fields
                .iter()
                .position(|f| f.trim().eq_ignore_ascii_case(name))
                .ok_or_else(|| {
                    Error::MalformedRecord(format!("CSV header lacks a {name:?} column"))
                })
        };
        Ok(CsvColumns {
            lat: find("lat")?,
            lon: find("lon")?,
            ts: find("ts")?,
            user: find("user")?,
        })
    }

    fn parse(&self, line: &str) -> Result<ParsedRecord> {
        let fields = split_csv_row(line)?;
        let get = |i: usize| {
            fields
                .get(i)
                .map(String::as_str)
                .ok_or_else(|| Error::MalformedRecord(format!("missing CSV field {i}")))
        };
        parse_csv_fields(
            get(self.lat)?,
            get(self.lon)?,
            get(self.ts)?,
            get(self.user)?,
        )
    }
}

pub fn write_store(dir: &Path, store: &EventStore, manifest: &DatasetManifest) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let events_path = dir.join(EVENTS_FILE);
    let file = fs::File::create(&events_path).map_err(|e| Error::io(&events_path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&store.to_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&events_path, e))?;

    let manifest_path = dir.join(MANIFEST_FILE);
    let text = toml::to_string(manifest)
        .map_err(|e| Error::InvalidStore(format!("manifest serialization: {e}")))?;
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: DatasetManifest =
        toml::from_str(&text).map_err(|e| Error::InvalidStore(format!("manifest: {e}")))?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn read_store(dir: &Path) -> Result<(EventStore, DatasetManifest)> {
    let manifest = read_manifest(dir)?;
    let path = dir.join(EVENTS_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let store = EventStore::from_bytes(&bytes)?;
    if store.len() as u64 != manifest.record_count {
        return Err(Error::InvalidStore(format!(
            "manifest says {} records, store holds {}",
            manifest.record_count,
            store.len()
        )));
    }
    Ok((store, manifest))
}
