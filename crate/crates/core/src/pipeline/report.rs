use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageReport {
    pub source: String,
    pub stage: String,
    pub input_count: u64,
    pub kept_count: u64,
    pub dropped_by_reason: BTreeMap<String, u64>,
    pub bytes_in: u64,
    pub bytes_out: u64,
}

impl StageReport {
    pub fn dropped(&self) -> u64 {
        self.dropped_by_reason.values().sum()
    }

    pub fn is_conserved(&self) -> bool {
        self.kept_count + self.dropped() == self.input_count
    }

    pub fn drop_fraction(&self) -> f64 {
        if self.input_count == 0 {
            0.0
        } else {
            self.dropped() as f64 / self.input_count as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub config_digest: String,
    pub stages: Vec<StageReport>,
    /// Side counters that are not drops, e.g. records without a malware verdict.
    pub notes: BTreeMap<String, u64>,
    pub wall_time_ms: u64,
}

impl RunReport {
    /// Everything but the wall time; equal across reruns of the same config.
    pub fn counts(&self) -> (&[StageReport], &BTreeMap<String, u64>) {
        (&self.stages, &self.notes)
    }

    pub fn stage(&self, source: &str, stage: &str) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.source == source && s.stage == stage)
    }
}

/// Binary-unit byte count, e.g. `1.5 KiB`.
pub fn format_bytes(n: u64) -> String {
    const UNITS: [&str; 6] = ["KiB", "MiB", "GiB", "TiB", "PiB", "EiB"];
    if n < 1024 {
        return format!("{n} B");
    }
    let mut v = n as f64 / 1024.0;
    let mut unit = 0;
    while v >= 1024.0 && unit + 1 < UNITS.len() {
        v /= 1024.0;
        unit += 1;
    }
    format!("{v:.1} {}", UNITS[unit])
}

/// Human-readable drop table: one line per stage with the dropped share,
/// followed by its reasons.
pub fn stats(report: &RunReport) -> String {
    let mut out = String::new();
    for s in &report.stages {
        let _ = writeln!(
            out,
            "{} {}: {:.1}% ({} of {} dropped, {} -> {})",
            s.source,
            s.stage,
            100.0 * s.drop_fraction(),
            s.dropped(),
            s.input_count,
            format_bytes(s.bytes_in),
            format_bytes(s.bytes_out)
        );
        for (reason, n) in &s.dropped_by_reason {
            let _ = writeln!(out, "  {reason}: {n}");
        }
    }
    for (k, v) in &report.notes {
        let _ = writeln!(out, "note {k}: {v}");
    }
    out
}
