//! Subcommand definitions and their implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use landsig_core::classify::{
    assign_label_with, build_template, ClassificationResult, ReferenceTemplate,
    DEFAULT_NEAR_MISS_MARGIN,
};
use landsig_core::cluster_builder::{auto_grow, DatasetView, GrowthPolicy, GrowthResult};
use landsig_core::ingest::{
    load_dataset, read_store, write_store, DatasetManifest, ManifestOverrides, SourceFormat,
};
use landsig_core::model::LatLon;
use landsig_core::overlap::{overlap_report, OverlapDefinition};
use landsig_core::report::{
    overlap_detail_csv, overlap_table_csv, overlap_table_text, signature_svg,
};
use landsig_core::signature::{is_complete, normalize};
use landsig_core::spatial_index::{SpatialIndex, DEFAULT_CELL_SIZE_DEG};
use landsig_core::synth::{
    default_profiles_at, events_to_csv, generate_city, SynthConfig, DEFAULT_CENTER,
};
use landsig_core::zones::{load_zones, zones_to_geojson, LabelMap, ZoneSet};
use landsig_core::{BoundingBox, HourlyCounts, LandUseLabel, TemporalSignature, HOURS};
use serde::Serialize;

use crate::api::{ApiError, ApiResult};
use crate::config::ServiceConfig;
use crate::files::{write_json, write_text, ClustersFile, DiscardedSeed};

#[derive(Debug, Parser)]
#[command(
    name = "landsig",
    version,
    about = "Classify urban land use from hourly activity signatures"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a raw event file into a columnar store directory.
    Ingest(IngestArgs),
    /// Build a reference template from a store and a labelled zone file.
    Template(TemplateArgs),
    /// Assign land-use labels to a rectangle or to a clusters file.
    Classify(ClassifyArgs),
    /// Grow seed rectangles until every hour has activity.
    AutoGrow(AutoGrowArgs),
    /// Compare classified clusters with official zoning.
    Validate(ValidateArgs),
    /// Generate a synthetic city with known ground truth.
    Synth(SynthArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Write signature charts and tables.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    #[value(name = "tweet-json", alias = "tweet-json-ndjson", alias = "ndjson")]
    TweetJson,
    Csv,
}

impl From<FormatArg> for SourceFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::TweetJson => SourceFormat::TweetJsonNdjson,
            FormatArg::Csv => SourceFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DefinitionArg {
    PctOfCluster,
    PctOfZone,
    Iou,
}

impl From<DefinitionArg> for OverlapDefinition {
    fn from(d: DefinitionArg) -> Self {
        match d {
            DefinitionArg::PctOfCluster => OverlapDefinition::PctOfCluster,
            DefinitionArg::PctOfZone => OverlapDefinition::PctOfZone,
            DefinitionArg::Iou => OverlapDefinition::Iou,
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: FormatArg,
    /// Local time = UTC + this many minutes.
    #[arg(long, allow_negative_numbers = true)]
    pub tz_offset: i32,
    /// Store directory to create.
    #[arg(long)]
    pub out: PathBuf,
    /// Dataset name; defaults to the input file stem.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct StoreArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Overrides the offset recorded at ingest.
    #[arg(long, allow_negative_numbers = true)]
    pub tz_offset: Option<i32>,
    #[arg(long, default_value_t = DEFAULT_CELL_SIZE_DEG)]
    pub cell_size: f64,
}

pub struct OpenStore {
    pub manifest: DatasetManifest,
    pub index: SpatialIndex,
    pub tz_offset_minutes: i32,
}

impl OpenStore {
    pub fn view(&self) -> DatasetView<'_> {
        DatasetView {
            name: &self.manifest.name,
            index: &self.index,
            tz_offset_minutes: self.tz_offset_minutes,
        }
    }
}

impl StoreArgs {
    pub fn open(&self) -> ApiResult<OpenStore> {
        let (store, manifest) = read_store(&self.store)?;
        let tz_offset_minutes = match self.tz_offset {
            Some(off) => {
                landsig_core::ingest::validate_tz_offset(off)?;
                off
            }
            None => manifest.tz_offset_minutes,
        };
        Ok(OpenStore {
            index: SpatialIndex::build(Arc::new(store), self.cell_size)?,
            manifest,
            tz_offset_minutes,
        })
    }
}

#[derive(Debug, Args)]
pub struct ZoneArgs {
    /// GeoJSON FeatureCollection with a `landuse` property per feature.
    #[arg(long)]
    pub zones: PathBuf,
    /// TOML `[labels]` table mapping raw `landuse` values to labels.
    #[arg(long)]
    pub label_map: Option<PathBuf>,
}

impl ZoneArgs {
    pub fn load(&self) -> ApiResult<ZoneSet> {
        let labels = match &self.label_map {
            Some(p) => LabelMap::load(p)?,
            None => LabelMap::default(),
        };
        let set = load_zones(&self.zones, &labels)?;
        if !set.unmapped.is_empty() {
            eprintln!(
                "warning: unmapped landuse values ignored: {}",
                set.unmapped.join(", ")
            );
        }
        Ok(set)
    }
}

#[derive(Debug, Args)]
pub struct TemplateArgs {
    #[command(flatten)]
    pub store: StoreArgs,
    #[command(flatten)]
    pub zones: ZoneArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("target").required(true).args(["bbox", "clusters"]))]
pub struct ClassifyArgs {
    #[arg(long)]
    pub template: PathBuf,
    /// Needed with --bbox.
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub tz_offset: Option<i32>,
    #[arg(long, default_value_t = DEFAULT_CELL_SIZE_DEG)]
    pub cell_size: f64,
    /// LAT_MIN LAT_MAX LON_MIN LON_MAX
    #[arg(long, num_args = 4, allow_negative_numbers = true, value_names = ["LAT_MIN", "LAT_MAX", "LON_MIN", "LON_MAX"])]
    pub bbox: Option<Vec<f64>>,
    /// Classify every cluster in this file instead.
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_NEAR_MISS_MARGIN)]
    pub near_miss_margin: f64,
    /// `csv` prints one MSE row per cluster.
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct AutoGrowArgs {
    #[command(flatten)]
    pub store: StoreArgs,
    /// LAT_MIN LAT_MAX LON_MIN LON_MAX; repeat for several seeds.
    #[arg(long, num_args = 4, required = true, action = clap::ArgAction::Append, allow_negative_numbers = true,
          value_names = ["LAT_MIN", "LAT_MAX", "LON_MIN", "LON_MAX"])]
    pub seed: Vec<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub max_span: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Clusters file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Add to an existing clusters file instead of replacing it.
    #[arg(long)]
    pub append: bool,
    #[arg(long, default_value = "C")]
    pub id_prefix: String,
    /// Also write every growth step.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub clusters: PathBuf,
    #[command(flatten)]
    pub zones: ZoneArgs,
    #[arg(long)]
    pub template: PathBuf,
    #[arg(long, value_enum, default_value_t = DefinitionArg::PctOfZone)]
    pub definition: DefinitionArg,
    #[arg(long, default_value_t = DEFAULT_NEAR_MISS_MARGIN)]
    pub near_miss_margin: f64,
    /// Table CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-zone CSV with all three overlap definitions.
    #[arg(long)]
    pub detail: Option<PathBuf>,
    /// Full reports as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 30)]
    pub days: u32,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Mean events per zone per day.
    #[arg(long, default_value_t = landsig_core::synth::DEFAULT_DAILY_RATE)]
    pub rate: f64,
    #[arg(long, default_value_t = 600, allow_negative_numbers = true)]
    pub tz_offset: i32,
    #[arg(long, default_value_t = DEFAULT_CENTER.lat, allow_negative_numbers = true)]
    pub center_lat: f64,
    #[arg(long, default_value_t = DEFAULT_CENTER.lon, allow_negative_numbers = true)]
    pub center_lon: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configured port.
    #[arg(long)]
    pub port: Option<u16>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub template: PathBuf,
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    /// With --clusters, adds the overlap table.
    #[arg(long)]
    pub zones: Option<PathBuf>,
    #[arg(long)]
    pub label_map: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DefinitionArg::PctOfZone)]
    pub definition: DefinitionArg,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn run(cli: Cli) -> ApiResult<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Template(a) => template(a),
        Command::Classify(a) => classify(a),
        Command::AutoGrow(a) => auto_grow_cmd(a),
        Command::Validate(a) => validate(a),
        Command::Synth(a) => synth(a),
        Command::Serve(a) => serve(a),
        Command::Report(a) => report(a),
    }
}

fn parse_bbox(v: &[f64]) -> ApiResult<BoundingBox> {
    match v {
        [a, b, c, d] => Ok(BoundingBox::new(*a, *b, *c, *d)?),
        _ => Err(ApiError::bad_request("a bounding box needs 4 numbers")),
    }
}

fn print_json<T: Serialize>(v: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("output serializes")
    );
}

fn emit(out: Option<&Path>, text: &str) -> ApiResult<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    store: String,
    #[serde(flatten)]
    manifest: &'a DatasetManifest,
    total_lines: u64,
    sample_errors: &'a [String],
}

fn ingest(a: IngestArgs) -> ApiResult<()> {
    let overrides = ManifestOverrides {
        name: a.name,
        tz_offset_minutes: a.tz_offset,
    };
    let ds = load_dataset(&a.input, a.format.into(), &overrides)?;
    write_store(&a.out, &ds.store, &ds.manifest)?;
    print_json(&IngestSummary {
        store: a.out.display().to_string(),
        manifest: &ds.manifest,
        total_lines: ds.stats.total_lines,
        sample_errors: &ds.stats.sample_errors,
    });
    Ok(())
}

/// Each zone contributes the bounding boxes of its polygons.
pub fn template_zones(zones: &ZoneSet) -> Vec<(LandUseLabel, Vec<BoundingBox>)> {
    zones
        .zones
        .iter()
        .map(|z| {
            (
                z.label,
                z.polygons.iter().filter_map(|p| p.bbox()).collect(),
            )
        })
        .collect()
}

fn template(a: TemplateArgs) -> ApiResult<()> {
    let store = a.store.open()?;
    let zones = a.zones.load()?;
    let t = build_template(
        store.manifest.name.clone(),
        &template_zones(&zones),
        &store.index,
        store.tz_offset_minutes,
    )?;
    t.save(&a.out)?;
    for e in &t.entries {
        let total = e.counts.map(|c| c.total()).unwrap_or(0);
        eprintln!(
            "{:<12} {} events in {} box(es)",
            e.label.as_str(),
            total,
            e.boxes.len()
        );
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Classified {
    pub cluster_id: String,
    pub bbox: BoundingBox,
    pub counts: HourlyCounts,
    pub signature: TemporalSignature,
    #[serde(flatten)]
    pub result: ClassificationResult,
}

fn mse_table_csv(template: &ReferenceTemplate, rows: &[Classified]) -> String {
    let mut out = String::from("cluster");
    for l in template.labels() {
        write!(out, ",{l}").unwrap();
    }
    out.push_str(",predicted,margin\n");
    for r in rows {
        out.push_str(&r.cluster_id);
        for l in template.labels() {
            write!(out, ",{:.6}", r.result.mse_row[&l]).unwrap();
        }
        writeln!(out, ",{},{:.6}", r.result.label, r.result.margin).unwrap();
    }
    out
}

fn classify(a: ClassifyArgs) -> ApiResult<()> {
    let template = ReferenceTemplate::load(&a.template)?;
    let rows = match (&a.bbox, &a.clusters) {
        (Some(v), _) => {
            let bbox = parse_bbox(v)?;
            let store = StoreArgs {
                store: a
                    .store
                    .clone()
                    .ok_or_else(|| ApiError::bad_request("--bbox needs --store"))?,
                tz_offset: a.tz_offset,
                cell_size: a.cell_size,
            }
            .open()?;
            let counts = store.view().counts(&bbox);
            let signature = normalize(&counts)?;
            if !is_complete(&counts) {
                return Err(landsig_core::Error::IncompleteCluster {
                    hours: counts.empty_hours(),
                }
                .into());
            }
            vec![Classified {
                cluster_id: "bbox".into(),
                bbox,
                counts,
                result: assign_label_with(&signature, &template, a.near_miss_margin),
                signature,
            }]
        }
        (None, Some(path)) => ClustersFile::load(path)?
            .clusters
            .into_iter()
            .map(|c| Classified {
                result: assign_label_with(&c.signature, &template, a.near_miss_margin),
                cluster_id: c.id,
                bbox: c.bbox,
                counts: c.counts,
                signature: c.signature,
            })
            .collect(),
        (None, None) => unreachable!("clap requires one target"),
    };
    for r in &rows {
        if let Some(w) = &r.result.warning {
            eprintln!("warning: {}: {w}", r.cluster_id);
        }
    }
    let text = match a.output {
        OutputFormat::Csv => mse_table_csv(&template, &rows),
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&rows).expect("output serializes");
            s.push('\n');
            s
        }
    };
    emit(a.out.as_deref(), &text)
}

fn auto_grow_cmd(a: AutoGrowArgs) -> ApiResult<()> {
    let store = a.store.open()?;
    let defaults = GrowthPolicy::default();
    let policy = GrowthPolicy {
        step_deg: a.step.unwrap_or(defaults.step_deg),
        max_span_deg: a.max_span.unwrap_or(defaults.max_span_deg),
        max_iterations: a.max_iterations.unwrap_or(defaults.max_iterations),
    };
    policy.validate()?;
    let mut file = if a.append && a.out.exists() {
        let f = ClustersFile::load(&a.out)?;
        if f.dataset != store.manifest.name {
            return Err(ApiError::bad_request(format!(
                "{} holds clusters of dataset {:?}, not {:?}",
                a.out.display(),
                f.dataset,
                store.manifest.name
            )));
        }
        f
    } else {
        ClustersFile::new(store.manifest.name.clone())
    };
    let mut traces = Vec::new();
    for seed in a.seed.chunks(4) {
        let seed = parse_bbox(seed)?;
        let outcome = auto_grow(seed, &policy, store.view())?;
        match &outcome.result {
            GrowthResult::Cluster { cluster } => {
                let id = format!("{}{}", a.id_prefix, file.clusters.len() + 1);
                eprintln!(
                    "{id}: accepted {} ({} events)",
                    cluster.bbox, cluster.event_total
                );
                // Overlapping clusters are allowed but worth knowing about.
                for other in file
                    .clusters
                    .iter()
                    .filter(|o| o.bbox.intersects(&cluster.bbox))
                {
                    eprintln!("warning: {id} overlaps {}", other.id);
                }
                file.clusters.push(cluster.clone().with_id(id));
            }
            GrowthResult::Discarded { reason } => {
                eprintln!("seed {seed}: discarded ({reason:?})");
                file.discarded.push(DiscardedSeed {
                    seed,
                    reason: *reason,
                });
            }
        }
        traces.push(outcome);
    }
    write_json(&a.out, &file)?;
    if let Some(p) = &a.trace {
        write_json(p, &traces)?;
    }
    Ok(())
}

fn overlap_reports(
    clusters: &ClustersFile,
    zones: &ZoneSet,
    template: &ReferenceTemplate,
    definition: OverlapDefinition,
    margin: f64,
) -> ApiResult<Vec<landsig_core::overlap::OverlapReport>> {
    clusters
        .clusters
        .iter()
        .map(|c| {
            let label = assign_label_with(&c.signature, template, margin).label;
            Ok(overlap_report(
                &c.id,
                &c.bbox,
                label,
                &zones.zones,
                definition,
            )?)
        })
        .collect()
}

fn validate(a: ValidateArgs) -> ApiResult<()> {
    let clusters = ClustersFile::load(&a.clusters)?;
    let zones = a.zones.load()?;
    let template = ReferenceTemplate::load(&a.template)?;
    let reports = overlap_reports(
        &clusters,
        &zones,
        &template,
        a.definition.into(),
        a.near_miss_margin,
    )?;
    if let Some(p) = &a.detail {
        write_text(p, &overlap_detail_csv(&reports))?;
    }
    if let Some(p) = &a.json {
        write_json(p, &reports)?;
    }
    emit(a.out.as_deref(), &overlap_table_csv(&reports))
}

#[derive(Serialize)]
struct GroundTruth<'a> {
    days: u32,
    seed: u64,
    tz_offset_minutes: i32,
    zones: Vec<TruthEntry<'a>>,
}

#[derive(Serialize)]
struct TruthEntry<'a> {
    source_id: &'a str,
    label: LandUseLabel,
    bbox: BoundingBox,
    daily_rate: f64,
    counts: HourlyCounts,
    expected_signature: [f64; HOURS],
}

fn synth(a: SynthArgs) -> ApiResult<()> {
    let profiles = default_profiles_at(LatLon::new(a.center_lat, a.center_lon), a.rate);
    let cfg = SynthConfig {
        days: a.days,
        seed: a.seed,
        tz_offset_minutes: a.tz_offset,
        ..Default::default()
    };
    let city = generate_city(&profiles, &cfg)?;
    let dir = &a.out_dir;
    write_text(&dir.join("events.csv"), &events_to_csv(&city.events))?;
    write_json(&dir.join("zones.geojson"), &zones_to_geojson(&city.zones))?;
    let truth = GroundTruth {
        days: a.days,
        seed: a.seed,
        tz_offset_minutes: a.tz_offset,
        zones: profiles
            .iter()
            .zip(&city.truth)
            .map(|(p, t)| TruthEntry {
                source_id: &p.source_id,
                label: p.label,
                bbox: p.polygon.bbox().expect("profile polygons are valid"),
                daily_rate: p.daily_rate,
                counts: t.counts,
                expected_signature: p.expected_signature(),
            })
            .collect(),
    };
    write_json(&dir.join("ground_truth.json"), &truth)?;
    eprintln!("{} events in {} zones", city.events.len(), profiles.len());
    Ok(())
}

fn serve(a: ServeArgs) -> ApiResult<()> {
    let mut cfg = ServiceConfig::load(&a.config)?;
    if let Some(p) = a.port {
        cfg.port = p;
    }
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| ApiError::io(format!("runtime: {e}")))?;
    rt.block_on(crate::server::serve(cfg))
}

fn signature_csv(series: &[(&str, &TemporalSignature)]) -> String {
    let mut out = String::from("hour");
    for (name, _) in series {
        write!(out, ",{name}").unwrap();
    }
    out.push('\n');
    for h in 0..HOURS {
        write!(out, "{h}").unwrap();
        for (_, s) in series {
            write!(out, ",{:.6}", s[h]).unwrap();
        }
        out.push('\n');
    }
    out
}

fn report(a: ReportArgs) -> ApiResult<()> {
    let template = ReferenceTemplate::load(&a.template)?;
    let dir = &a.out_dir;
    let names: Vec<String> = template
        .entries
        .iter()
        .map(|e| e.label.to_string())
        .collect();
    let series: Vec<(&str, &TemporalSignature)> = names
        .iter()
        .zip(&template.entries)
        .map(|(n, e)| (n.as_str(), &e.signature))
        .collect();
    write_text(
        &dir.join("template.svg"),
        &signature_svg(&format!("Template: {}", template.source), &series),
    )?;
    write_text(&dir.join("template.csv"), &signature_csv(&series))?;

    let Some(path) = &a.clusters else {
        return Ok(());
    };
    let clusters = ClustersFile::load(path)?;
    for c in &clusters.clusters {
        let r = assign_label_with(&c.signature, &template, DEFAULT_NEAR_MISS_MARGIN);
        let ref_sig = &template
            .get(r.label)
            .expect("label comes from template")
            .signature;
        let ref_name = format!("template {}", r.label);
        let pair = [(c.id.as_str(), &c.signature), (ref_name.as_str(), ref_sig)];
        let title = format!("{} ({}): {}", c.id, clusters.dataset, r.label);
        write_text(
            &dir.join(format!("cluster-{}.svg", c.id)),
            &signature_svg(&title, &pair),
        )?;
    }
    let rows: Vec<(&str, &TemporalSignature)> = clusters
        .clusters
        .iter()
        .map(|c| (c.id.as_str(), &c.signature))
        .collect();
    write_text(&dir.join("clusters.csv"), &signature_csv(&rows))?;

    if let Some(z) = &a.zones {
        let zones = ZoneArgs {
            zones: z.clone(),
            label_map: a.label_map.clone(),
        }
        .load()?;
        let reports = overlap_reports(
            &clusters,
            &zones,
            &template,
            a.definition.into(),
            DEFAULT_NEAR_MISS_MARGIN,
        )?;
        write_text(&dir.join("overlap.csv"), &overlap_table_csv(&reports))?;
        let title = format!("Overlap with official land use ({})", clusters.dataset);
        write_text(
            &dir.join("overlap.txt"),
            &overlap_table_text(&title, &reports),
        )?;
    }
    Ok(())
}
