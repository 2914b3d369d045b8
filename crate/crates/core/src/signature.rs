//! Hourly counts to normalized temporal signatures.
//!
//! Signatures use the mean-1 convention: each hour is divided by the average
//! hourly count, so the 24 values average to exactly 1. The sum-1 variant
//! (each hour as a share of the total) is provided for comparison; it is the
//! mean-1 signature scaled by 1/24.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::model::{HourlyCounts, TemporalSignature, HOURS};

pub fn normalize(counts: &HourlyCounts) -> Result<TemporalSignature> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::EmptySignature);
    }
    let total = total as f64;
    let values = counts.0.map(|c| c as f64 * HOURS as f64 / total);
    TemporalSignature::new(values)
}

/// Each hour's share of the total; values sum to 1.
pub fn normalize_sum_one(counts: &HourlyCounts) -> Result<TemporalSignature> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::EmptySignature);
    }
    let total = total as f64;
    TemporalSignature::new(counts.0.map(|c| c as f64 / total))
}

/// True when every hour has at least one event.
pub fn is_complete(counts: &HourlyCounts) -> bool {
    counts.0.iter().all(|&c| c > 0)
}

/// `hour,value` header plus 24 rows.
pub fn to_csv(sig: &TemporalSignature) -> String {
    let mut out = String::from("hour,value\n");
    for (h, v) in sig.values().iter().enumerate() {
        writeln!(out, "{h},{v}").unwrap();
    }
    out
}

pub fn from_csv(text: &str) -> Result<TemporalSignature> {
    let mut values = [f64::NAN; HOURS];
    let mut seen = [false; HOURS];
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let (h, v) = line
            .split_once(',')
            .ok_or_else(|| Error::MalformedRecord(format!("bad signature row {line:?}")))?;
        let h: usize = h
            .trim()
            .parse()
            .ok()
            .filter(|&h| h < HOURS)
            .ok_or_else(|| Error::MalformedRecord(format!("bad hour {h:?}")))?;
        values[h] = v
            .trim()
            .parse()
            .map_err(|_| Error::MalformedRecord(format!("bad value {v:?}")))?;
        seen[h] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::MalformedRecord(
            "signature CSV needs all 24 hours".into(),
        ));
    }
    TemporalSignature::new(values)
}
