//! The comparison report: one row per verification target with the exact
//! value, the empirical estimate, its standard error, the z-score and the
//! verdict at the pre-registered sigma threshold.
//!
//! Reports are fully determined by the experiment configuration (seed
//! included); serialization is stable byte-for-byte. Wall-clock timing is
//! deliberately not part of the report — callers print it to stderr.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub name: String,
    pub exact: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub z_score: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub theta: f64,
    pub grid: Vec<f64>,
    pub replicates: u64,
    pub seed: u64,
    pub sigma: f64,
    /// Total simulated birth/immigration events across all replicates;
    /// deterministic given the seed, and the honest cost measure.
    pub total_events: u64,
    pub targets: Vec<TargetReport>,
    /// Named side values (exact asymptotes, distances, acceptance rates).
    pub diagnostics: BTreeMap<String, f64>,
    pub all_pass: bool,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Long-form CSV: one row per target plus one per diagnostic.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,name,exact,estimate,std_error,z_score,pass\n");
        for t in &self.targets {
            writeln!(
                out,
                "target,{},{},{},{},{},{}",
                t.name, t.exact, t.estimate, t.std_error, t.z_score, t.pass
            )
            .unwrap();
        }
        for (name, value) in &self.diagnostics {
            writeln!(out, "diagnostic,{name},{value},,,,").unwrap();
        }
        out
    }

    /// Aligned human-readable table with the given number of significant
    /// digits.
    pub fn to_table(&self, precision: usize) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "theta = {}, replicates = {}, seed = {}, sigma = {}, events = {}",
            fmt_sig(self.theta, precision),
            self.replicates,
            self.seed,
            self.sigma,
            self.total_events
        )
        .unwrap();
        writeln!(out, "grid = {:?}", self.grid).unwrap();
        let name_width = self
            .targets
            .iter()
            .map(|t| t.name.len())
            .chain(self.diagnostics.keys().map(|k| k.len()))
            .max()
            .unwrap_or(8)
            .max(8);
        writeln!(
            out,
            "{:<name_width$}  {:>14}  {:>14}  {:>12}  {:>8}  verdict",
            "target", "exact", "estimate", "std_error", "z"
        )
        .unwrap();
        for t in &self.targets {
            writeln!(
                out,
                "{:<name_width$}  {:>14}  {:>14}  {:>12}  {:>8}  {}",
                t.name,
                fmt_sig(t.exact, precision),
                fmt_sig(t.estimate, precision),
                fmt_sig(t.std_error, precision),
                fmt_sig(t.z_score, 3),
                if t.pass { "pass" } else { "FAIL" }
            )
            .unwrap();
        }
        for (name, value) in &self.diagnostics {
            writeln!(out, "{:<name_width$}  {:>14}", name, fmt_sig(*value, precision)).unwrap();
        }
        writeln!(
            out,
            "overall: {}",
            if self.all_pass { "all targets pass" } else { "SOME TARGETS FAIL" }
        )
        .unwrap();
        out
    }
}

/// Format with the given number of significant digits.
pub fn fmt_sig(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).clamp(0, 17) as usize;
    if magnitude.abs() > 6 {
        format!("{value:.*e}", digits.saturating_sub(1))
    } else {
        format!("{value:.decimals$}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> ComparisonReport {
        ComparisonReport {
            schema_version: SCHEMA_VERSION,
            theta: 2.0,
            grid: vec![0.0, 0.5, 1.0],
            replicates: 100,
            seed: 7,
            sigma: 3.0,
            total_events: 345,
            targets: vec![TargetReport {
                name: "mean_s[1]".into(),
                exact: 1.294,
                estimate: 1.301,
                std_error: 0.01,
                z_score: 0.7,
                pass: true,
            }],
            diagnostics: BTreeMap::from([("asymptote".to_string(), 0.75)]),
            all_pass: true,
        }
    }

    #[test]
    fn json_round_trips() {
        let report = sample_report();
        let text = report.to_json();
        let back = ComparisonReport::from_json(&text).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let csv = sample_report().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "kind,name,exact,estimate,std_error,z_score,pass");
        assert!(lines[1].starts_with("target,mean_s[1],"));
        assert!(lines[2].starts_with("diagnostic,asymptote,"));
    }

    #[test]
    fn table_marks_failures() {
        let mut report = sample_report();
        report.targets[0].pass = false;
        report.all_pass = false;
        let table = report.to_table(6);
        assert!(table.contains("FAIL"));
        assert!(table.contains("SOME TARGETS FAIL"));
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(1.294561, 6), "1.29456");
        assert_eq!(fmt_sig(0.00129456, 3), "0.00129");
        assert_eq!(fmt_sig(1294.561, 2), "1295");
        assert_eq!(fmt_sig(0.0, 6), "0");
    }
}
