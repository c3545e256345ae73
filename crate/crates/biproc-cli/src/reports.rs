//! Serializable report types for the subcommands that do not go through
//! the Monte Carlo harness, with the shared JSON/CSV/table rendering.

use biproc::esf::CountsOfCounts;
use biproc::montecarlo::report::fmt_sig;
use serde::Serialize;
use std::fmt::Write as _;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

pub trait Render: Serialize {
    fn to_csv(&self) -> String;
    fn to_table(&self, precision: usize) -> String;

    fn render(&self, format: Format, precision: usize) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Csv => self.to_csv(),
            Format::Table => self.to_table(precision),
        }
    }
}

/// Pad a partition label out to the sample size, e.g. (2) → "(2,0)" for n=2.
pub fn partition_label(c: &CountsOfCounts, n: u64) -> String {
    let padded = c.padded(n as usize);
    let inner: Vec<String> = padded.iter().map(|v| v.to_string()).collect();
    format!("({})", inner.join(","))
}

/// Joint-state label: per-cut partition labels joined by '|'.
pub fn joint_label(states: &[CountsOfCounts], targets: &[u64]) -> String {
    states
        .iter()
        .zip(targets)
        .map(|(c, &n)| partition_label(c, n))
        .collect::<Vec<_>>()
        .join("|")
}

#[derive(Debug, Serialize)]
pub struct ExactReport {
    pub schema_version: u32,
    pub theta: f64,
    pub cuts: Vec<f64>,
    /// E S_i per window; the diagonal of the covariance matrix repeats
    /// these because the window counts are Poisson.
    pub means: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_sample_variance: Option<f64>,
    /// Pairwise correlation, present under the log-equal design where it
    /// is the same for every pair.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairwise_correlation: Option<f64>,
    /// θ ln 2, present for the count-matched design with equal sizes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptote: Option<f64>,
}

impl Render for ExactReport {
    fn to_csv(&self) -> String {
        let mut out = String::from("quantity,i,j,value\n");
        for (i, m) in self.means.iter().enumerate() {
            writeln!(out, "mean_s,{},,{m}", i + 1).unwrap();
        }
        for (i, row) in self.covariance.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                writeln!(out, "cov_s,{},{},{v}", i + 1, j + 1).unwrap();
            }
        }
        if let Some(ev) = self.expected_sample_variance {
            writeln!(out, "expected_sample_variance,,,{ev}").unwrap();
        }
        if let Some(rho) = self.pairwise_correlation {
            writeln!(out, "pairwise_correlation,,,{rho}").unwrap();
        }
        if let Some(a) = self.asymptote {
            writeln!(out, "asymptote,,,{a}").unwrap();
        }
        out
    }

    fn to_table(&self, precision: usize) -> String {
        let mut out = String::new();
        writeln!(out, "theta = {}", fmt_sig(self.theta, precision)).unwrap();
        writeln!(
            out,
            "cuts  = [{}]",
            self.cuts
                .iter()
                .map(|c| fmt_sig(*c, precision))
                .collect::<Vec<_>>()
                .join(", ")
        )
        .unwrap();
        for (i, m) in self.means.iter().enumerate() {
            writeln!(out, "E S_{} = {}", i + 1, fmt_sig(*m, precision)).unwrap();
        }
        writeln!(out, "covariance matrix:").unwrap();
        for row in &self.covariance {
            let cells: Vec<String> = row
                .iter()
                .map(|v| format!("{:>12}", fmt_sig(*v, precision)))
                .collect();
            writeln!(out, "  {}", cells.join(" ")).unwrap();
        }
        if let Some(ev) = self.expected_sample_variance {
            writeln!(out, "E V_p = {}", fmt_sig(ev, precision)).unwrap();
        }
        if let Some(rho) = self.pairwise_correlation {
            writeln!(out, "pairwise correlation = {}", fmt_sig(rho, precision)).unwrap();
        }
        if let Some(a) = self.asymptote {
            writeln!(out, "large-sample asymptote = {}", fmt_sig(a, precision)).unwrap();
        }
        out
    }
}

#[derive(Debug, Serialize)]
pub struct DensityPoint {
    pub s: f64,
    pub density: f64,
}

#[derive(Debug, Serialize)]
pub struct GapMcSection {
    pub replicates: u64,
    /// Replicates that produced a gap sample (those with ≥ 1 family).
    pub samples: u64,
    pub mean_estimate: f64,
    pub mean_std_error: f64,
    pub mean_z: f64,
    pub variance_estimate: f64,
    pub variance_std_error: f64,
    /// z-score of the estimate against the mixture-law variance.
    pub z_mixture: f64,
    /// z-score of the estimate against the Li3(q)/t expression.
    pub z_li3: f64,
    /// Which variance formula the sampled gaps support: "mixture", "li3",
    /// "inconclusive" (both within sigma) or "neither".
    pub supported_variance: String,
    pub sigma: f64,
}

#[derive(Debug, Serialize)]
pub struct GapReport {
    pub schema_version: u32,
    pub t: f64,
    pub q: f64,
    pub mean: f64,
    pub second_moment: f64,
    pub variance_mixture: f64,
    pub variance_li3: f64,
    pub density: Vec<DensityPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<GapMcSection>,
}

impl Render for GapReport {
    fn to_csv(&self) -> String {
        let mut out = String::from("quantity,s,value\n");
        writeln!(out, "mean,,{}", self.mean).unwrap();
        writeln!(out, "second_moment,,{}", self.second_moment).unwrap();
        writeln!(out, "variance_mixture,,{}", self.variance_mixture).unwrap();
        writeln!(out, "variance_li3,,{}", self.variance_li3).unwrap();
        for p in &self.density {
            writeln!(out, "density,{},{}", p.s, p.density).unwrap();
        }
        if let Some(mc) = &self.mc {
            writeln!(out, "mc_samples,,{}", mc.samples).unwrap();
            writeln!(out, "mc_mean,,{}", mc.mean_estimate).unwrap();
            writeln!(out, "mc_mean_z,,{}", mc.mean_z).unwrap();
            writeln!(out, "mc_variance,,{}", mc.variance_estimate).unwrap();
            writeln!(out, "mc_z_mixture,,{}", mc.z_mixture).unwrap();
            writeln!(out, "mc_z_li3,,{}", mc.z_li3).unwrap();
            writeln!(out, "mc_supported_variance,,{}", mc.supported_variance).unwrap();
        }
        out
    }

    fn to_table(&self, precision: usize) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "t = {}, q = {}",
            fmt_sig(self.t, precision),
            fmt_sig(self.q, precision)
        )
        .unwrap();
        writeln!(out, "mean waiting time      = {}", fmt_sig(self.mean, precision)).unwrap();
        writeln!(
            out,
            "second moment          = {}",
            fmt_sig(self.second_moment, precision)
        )
        .unwrap();
        writeln!(
            out,
            "variance (mixture law) = {}",
            fmt_sig(self.variance_mixture, precision)
        )
        .unwrap();
        writeln!(
            out,
            "variance (Li3(q)/t)    = {}",
            fmt_sig(self.variance_li3, precision)
        )
        .unwrap();
        writeln!(out, "density:").unwrap();
        writeln!(out, "  {:>10}  {:>12}", "s", "f_t(s)").unwrap();
        for p in &self.density {
            writeln!(
                out,
                "  {:>10}  {:>12}",
                fmt_sig(p.s, precision),
                fmt_sig(p.density, precision)
            )
            .unwrap();
        }
        if let Some(mc) = &self.mc {
            writeln!(out, "monte carlo ({} samples of {} replicates):", mc.samples, mc.replicates)
                .unwrap();
            writeln!(
                out,
                "  mean     = {} ± {} (z = {})",
                fmt_sig(mc.mean_estimate, precision),
                fmt_sig(mc.mean_std_error, precision),
                fmt_sig(mc.mean_z, 3)
            )
            .unwrap();
            writeln!(
                out,
                "  variance = {} ± {} (z vs mixture = {}, z vs Li3/t = {})",
                fmt_sig(mc.variance_estimate, precision),
                fmt_sig(mc.variance_std_error, precision),
                fmt_sig(mc.z_mixture, 3),
                fmt_sig(mc.z_li3, 3)
            )
            .unwrap();
            writeln!(out, "  the data support the {} variance", mc.supported_variance).unwrap();
        }
        out
    }
}

#[derive(Debug, Serialize)]
pub struct PmfEntry {
    pub partition: String,
    pub probability: f64,
}

#[derive(Debug, Serialize)]
pub struct PmfReport {
    pub schema_version: u32,
    pub theta: f64,
    pub n: u64,
    pub entries: Vec<PmfEntry>,
    pub total: f64,
}

impl Render for PmfReport {
    fn to_csv(&self) -> String {
        let mut out = String::from("partition,probability\n");
        for e in &self.entries {
            writeln!(out, "\"{}\",{}", e.partition, e.probability).unwrap();
        }
        writeln!(out, "total,{}", self.total).unwrap();
        out
    }

    fn to_table(&self, precision: usize) -> String {
        let mut out = String::new();
        writeln!(out, "sampling formula, theta = {}, n = {}", self.theta, self.n).unwrap();
        let width = self.entries.iter().map(|e| e.partition.len()).max().unwrap_or(9);
        for e in &self.entries {
            writeln!(
                out,
                "{:<width$}  {}",
                e.partition,
                fmt_sig(e.probability, precision)
            )
            .unwrap();
        }
        writeln!(out, "{:<width$}  {}", "total", fmt_sig(self.total, precision)).unwrap();
        out
    }
}

#[derive(Debug, Serialize)]
pub struct LawEntry {
    pub state: String,
    pub empirical: f64,
    pub reference: f64,
}

#[derive(Debug, Serialize)]
pub struct CrpCheckReport {
    pub schema_version: u32,
    pub theta: f64,
    pub n: u64,
    pub runs: u64,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub pass: bool,
    pub law: Vec<LawEntry>,
}

impl Render for CrpCheckReport {
    fn to_csv(&self) -> String {
        let mut out = String::from("kind,state,empirical,reference\n");
        for e in &self.law {
            writeln!(out, "law,\"{}\",{},{}", e.state, e.empirical, e.reference).unwrap();
        }
        writeln!(out, "chi_square,,{},", self.chi_square).unwrap();
        writeln!(out, "p_value,,{},", self.p_value).unwrap();
        writeln!(out, "pass,,{},", self.pass).unwrap();
        out
    }

    fn to_table(&self, precision: usize) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "sequential sampler vs sampling formula: theta = {}, n = {}, runs = {}",
            self.theta, self.n, self.runs
        )
        .unwrap();
        let width = self.law.iter().map(|e| e.state.len()).max().unwrap_or(9);
        writeln!(out, "{:<width$}  {:>12}  {:>12}", "partition", "empirical", "exact").unwrap();
        for e in &self.law {
            writeln!(
                out,
                "{:<width$}  {:>12}  {:>12}",
                e.state,
                fmt_sig(e.empirical, precision),
                fmt_sig(e.reference, precision)
            )
            .unwrap();
        }
        writeln!(
            out,
            "chi-square = {} (df = {}), p = {} -> {}",
            fmt_sig(self.chi_square, precision),
            self.degrees_of_freedom,
            fmt_sig(self.p_value, 3),
            if self.pass { "pass" } else { "FAIL" }
        )
        .unwrap();
        out
    }
}

#[derive(Debug, Serialize)]
pub struct ConditioningReportOut {
    pub schema_version: u32,
    pub theta: f64,
    pub n: u64,
    pub x: f64,
    pub conditioning: String,
    pub accepted: u64,
    pub attempts: u64,
    pub acceptance_rate: f64,
    pub tv_distance: f64,
    pub law: Vec<LawEntry>,
}

impl Render for ConditioningReportOut {
    fn to_csv(&self) -> String {
        let mut out = String::from("kind,state,empirical,reference\n");
        for e in &self.law {
            writeln!(out, "law,\"{}\",{},{}", e.state, e.empirical, e.reference).unwrap();
        }
        writeln!(out, "tv_distance,,{},", self.tv_distance).unwrap();
        writeln!(out, "acceptance_rate,,{},", self.acceptance_rate).unwrap();
        out
    }

    fn to_table(&self, precision: usize) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "conditioned Poisson counts vs sampling formula: theta = {}, n = {}, x = {}, {}",
            self.theta, self.n, self.x, self.conditioning
        )
        .unwrap();
        let width = self.law.iter().map(|e| e.state.len()).max().unwrap_or(9);
        writeln!(out, "{:<width$}  {:>12}  {:>12}", "partition", "empirical", "exact").unwrap();
        for e in &self.law {
            writeln!(
                out,
                "{:<width$}  {:>12}  {:>12}",
                e.state,
                fmt_sig(e.empirical, precision),
                fmt_sig(e.reference, precision)
            )
            .unwrap();
        }
        writeln!(
            out,
            "accepted {} of {} attempts (rate {}), total variation distance = {}",
            self.accepted,
            self.attempts,
            fmt_sig(self.acceptance_rate, precision),
            fmt_sig(self.tv_distance, precision)
        )
        .unwrap();
        out
    }
}

#[derive(Debug, Serialize)]
pub struct EmbedReportOut {
    pub schema_version: u32,
    pub theta: f64,
    pub target_populations: Vec<u64>,
    pub cuts: Vec<f64>,
    pub accepted: u64,
    pub attempts: u64,
    pub acceptance_rate: f64,
    pub tv_distance: f64,
    pub law: Vec<LawEntry>,
}

impl Render for EmbedReportOut {
    fn to_csv(&self) -> String {
        let mut out = String::from("kind,state,conditioned,sequential\n");
        for e in &self.law {
            writeln!(out, "law,\"{}\",{},{}", e.state, e.empirical, e.reference).unwrap();
        }
        writeln!(out, "tv_distance,,{},", self.tv_distance).unwrap();
        writeln!(out, "acceptance_rate,,{},", self.acceptance_rate).unwrap();
        out
    }

    fn to_table(&self, precision: usize) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "conditioned trajectories vs sequential run: theta = {}, targets = {:?}",
            self.theta, self.target_populations
        )
        .unwrap();
        let width = self.law.iter().map(|e| e.state.len()).max().unwrap_or(9);
        writeln!(
            out,
            "{:<width$}  {:>12}  {:>12}",
            "joint state", "conditioned", "sequential"
        )
        .unwrap();
        for e in &self.law {
            writeln!(
                out,
                "{:<width$}  {:>12}  {:>12}",
                e.state,
                fmt_sig(e.empirical, precision),
                fmt_sig(e.reference, precision)
            )
            .unwrap();
        }
        writeln!(
            out,
            "accepted {} of {} attempts (rate {}), total variation distance = {}",
            self.accepted,
            self.attempts,
            fmt_sig(self.acceptance_rate, precision),
            fmt_sig(self.tv_distance, precision)
        )
        .unwrap();
        out
    }
}
