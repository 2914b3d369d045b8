//! Reference templates and minimum-MSE label assignment.

use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundingBox, HourlyCounts, LandUseLabel, TemporalSignature, HOURS};
use crate::signature::{is_complete, normalize};
use crate::spatial_index::SpatialIndex;

pub const TEMPLATE_VERSION: u32 = 1;

/// Margins below this attach a near-miss warning to a classification.
pub const DEFAULT_NEAR_MISS_MARGIN: f64 = 0.05;

/// Mean of squared per-hour differences.
pub fn mse(x: &TemporalSignature, y: &TemporalSignature) -> f64 {
    x.values()
        .iter()
        .zip(y.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / HOURS as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateEntry {
    pub label: LandUseLabel,
    pub signature: TemporalSignature,
    /// Raw counts the signature was normalized from, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<HourlyCounts>,
    /// Zone boxes aggregated into this entry.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boxes: Vec<BoundingBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTemplate {
    pub version: u32,
    pub source: String,
    pub entries: Vec<TemplateEntry>,
}

impl ReferenceTemplate {
    pub fn new(source: impl Into<String>, entries: Vec<TemplateEntry>) -> Result<Self> {
        let t = ReferenceTemplate {
            version: TEMPLATE_VERSION,
            source: source.into(),
            entries,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn from_signatures(
        source: impl Into<String>,
        sigs: impl IntoIterator<Item = (LandUseLabel, TemporalSignature)>,
    ) -> Result<Self> {
        let entries = sigs
            .into_iter()
            .map(|(label, signature)| TemplateEntry {
                label,
                signature,
                counts: None,
                boxes: Vec::new(),
            })
            .collect();
        Self::new(source, entries)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != TEMPLATE_VERSION {
            return Err(Error::InvalidTemplate(format!(
                "unsupported version {}",
                self.version
            )));
        }
        if self.entries.len() < 2 {
            return Err(Error::InvalidTemplate(format!(
                "need at least 2 entries, found {}",
                self.entries.len()
            )));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if self.entries[..i].iter().any(|p| p.label == e.label) {
                return Err(Error::InvalidTemplate(format!(
                    "duplicate label {}",
                    e.label
                )));
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> impl Iterator<Item = LandUseLabel> + '_ {
        self.entries.iter().map(|e| e.label)
    }

    pub fn get(&self, label: LandUseLabel) -> Option<&TemplateEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("template serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: ReferenceTemplate =
            serde_json::from_str(text).map_err(|e| Error::InvalidTemplate(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Aggregates every box of each label and normalizes. Labels keep their
/// first-seen order; each label must have activity in all 24 hours.
pub fn build_template(
    source: impl Into<String>,
    zones: &[(LandUseLabel, Vec<BoundingBox>)],
    index: &SpatialIndex,
    tz_offset_minutes: i32,
) -> Result<ReferenceTemplate> {
    let mut grouped: IndexMap<LandUseLabel, (HourlyCounts, Vec<BoundingBox>)> = IndexMap::new();
    for (label, boxes) in zones {
        let slot = grouped
            .entry(*label)
            .or_insert_with(|| (HourlyCounts::zeros(), Vec::new()));
        for b in boxes {
            b.validate()?;
            slot.0.add(&index.hourly_histogram(b, tz_offset_minutes));
            slot.1.push(*b);
        }
    }
    let mut entries = Vec::with_capacity(grouped.len());
    for (label, (counts, boxes)) in grouped {
        if !is_complete(&counts) {
            return Err(Error::IncompleteZone {
                label,
                hours: counts.empty_hours(),
            });
        }
        entries.push(TemplateEntry {
            label,
            signature: normalize(&counts)?,
            counts: Some(counts),
            boxes,
        });
    }
    ReferenceTemplate::new(source, entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub label: LandUseLabel,
    pub mse_row: IndexMap<LandUseLabel, f64>,
    /// Second-smallest MSE minus the smallest; 0 on an exact tie.
    pub margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Picks the smallest MSE in `row`; ties go to the earliest entry.
///
/// Panics if `row` is empty.
pub fn argmin_label(row: &[(LandUseLabel, f64)], near_miss_margin: f64) -> ClassificationResult {
    assert!(!row.is_empty(), "argmin over an empty MSE row");
    let mut best = 0;
    for (i, &(_, v)) in row.iter().enumerate().skip(1) {
        if v < row[best].1 {
            best = i;
        }
    }
    let runner_up = row
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &(_, v))| v)
        .fold(f64::INFINITY, f64::min);
    let margin = if runner_up.is_finite() {
        runner_up - row[best].1
    } else {
        f64::INFINITY
    };
    let warning = (margin < near_miss_margin).then(|| {
        format!(
            "near miss: runner-up MSE is within {margin:.4} of the best ({} at {:.4})",
            row[best].0, row[best].1
        )
    });
    ClassificationResult {
        label: row[best].0,
        mse_row: row.iter().copied().collect(),
        margin,
        warning,
    }
}

pub fn assign_label(sig: &TemporalSignature, template: &ReferenceTemplate) -> ClassificationResult {
    assign_label_with(sig, template, DEFAULT_NEAR_MISS_MARGIN)
}

pub fn assign_label_with(
    sig: &TemporalSignature,
    template: &ReferenceTemplate,
    near_miss_margin: f64,
) -> ClassificationResult {
    let row: Vec<(LandUseLabel, f64)> = template
        .entries
        .iter()
        .map(|e| (e.label, mse(sig, &e.signature)))
        .collect();
    argmin_label(&row, near_miss_margin)
}
