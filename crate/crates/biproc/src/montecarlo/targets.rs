//! Verification targets behind a runtime registry.
//!
//! Each *target family* (window means, covariances, the sample-variance
//! statistic, gap moments, …) lives behind the same trait, is registered
//! by name, and is selected at run time from the experiment config or the
//! CLI. A family expands into concrete targets for the experiment at hand
//! (one per window, one per window pair, …); every target pairs an exact
//! engine value with an estimator over the replicate table.

use crate::distributions::{LogSeriesLaw, ModelParams};
use crate::error::{Error, Result};
use crate::interval::{
    covariance_observable, expected_sample_variance, fisher_mean, fisher_moments,
    gap_time_moments, mean_observable, SampleSizes, TimeGrid,
};
use crate::numeric::KahanSum;
use crate::simulator::GapSample;
use std::collections::BTreeMap;

/// Everything a target family needs to produce exact values: the model,
/// the grid, the design's sample sizes when it is count-matched, and the
/// gap-sampling time when gaps are collected.
#[derive(Debug, Clone)]
pub struct ExperimentContext {
    pub params: ModelParams,
    pub grid: TimeGrid,
    pub sizes: Option<SampleSizes>,
    pub gap_time_at: Option<f64>,
}

/// Per-replicate raw statistics, replicate-major. The reductions walk it
/// in index order with compensated sums, so results do not depend on how
/// the replicates were scheduled.
#[derive(Debug, Clone)]
pub struct ReplicateTable {
    windows: usize,
    counts: Vec<u64>,
    gaps: Vec<Option<GapSample>>,
    total_events: u64,
}

impl ReplicateTable {
    pub fn new(windows: usize, counts: Vec<u64>, gaps: Vec<Option<GapSample>>, total_events: u64) -> Self {
        assert_eq!(counts.len() % windows.max(1), 0);
        Self {
            windows,
            counts,
            gaps,
            total_events,
        }
    }

    pub fn replicates(&self) -> usize {
        match self.windows {
            0 => self.gaps.len(),
            w => self.counts.len() / w,
        }
    }

    pub fn windows(&self) -> usize {
        self.windows
    }

    pub fn total_events(&self) -> u64 {
        self.total_events
    }

    /// S_i of replicate r.
    pub fn count(&self, r: usize, i: usize) -> u64 {
        self.counts[r * self.windows + i]
    }

    pub fn gaps(&self) -> &[Option<GapSample>] {
        &self.gaps
    }

    fn column(&self, i: usize) -> impl Iterator<Item = f64> + Clone + '_ {
        (0..self.replicates()).map(move |r| self.count(r, i) as f64)
    }
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Mean and standard error of a stream of observations.
fn mean_estimate(values: impl Iterator<Item = f64> + Clone) -> Estimate {
    let mut sum = KahanSum::new();
    let mut n = 0u64;
    for v in values.clone() {
        sum.add(v);
        n += 1;
    }
    let nf = n as f64;
    let mean = sum.value() / nf;
    let mut ss = KahanSum::new();
    for v in values {
        ss.add((v - mean) * (v - mean));
    }
    let var = if n > 1 { ss.value() / (nf - 1.0) } else { 0.0 };
    Estimate {
        value: mean,
        std_error: (var / nf).sqrt(),
    }
}

/// Unbiased variance (or covariance, when fed centered cross products)
/// with a moment-based standard error: the SE of the mean of the centered
/// products, scaled by the same n/(n−1).
fn second_moment_estimate(products: impl Iterator<Item = f64> + Clone, n: u64) -> Estimate {
    let scale = n as f64 / (n as f64 - 1.0);
    let inner = mean_estimate(products);
    Estimate {
        value: scale * inner.value,
        std_error: scale * inner.std_error,
    }
}

/// One concrete verification target: an exact value and an estimator.
pub trait Target: Send + Sync {
    /// Stable machine-friendly label, e.g. `mean_s[2]` or `cov_s[1,2]`.
    fn label(&self) -> String;
    fn exact(&self) -> f64;
    fn estimate(&self, table: &ReplicateTable) -> Estimate;
}

/// A named family of targets, expanded against a concrete experiment.
pub trait TargetFamily: Send + Sync {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    /// Whether the family makes sense for this experiment; inapplicable
    /// families are skipped when expanding the default target set but
    /// rejected when requested explicitly.
    fn applicable(&self, ctx: &ExperimentContext) -> bool;
    fn instantiate(&self, ctx: &ExperimentContext) -> Result<Vec<Box<dyn Target>>>;
}

/// Name-keyed registry of target families. Iteration order is the sorted
/// name order, which keeps reports deterministic.
pub struct TargetRegistry {
    families: BTreeMap<&'static str, Box<dyn TargetFamily>>,
}

impl TargetRegistry {
    pub fn empty() -> Self {
        Self {
            families: BTreeMap::new(),
        }
    }

    /// The built-in families.
    pub fn standard() -> Self {
        let mut registry = Self::empty();
        registry.register(Box::new(MeanS));
        registry.register(Box::new(VarS));
        registry.register(Box::new(CovS));
        registry.register(Box::new(SampleVariance));
        registry.register(Box::new(GapMean));
        registry.register(Box::new(GapVariance));
        registry.register(Box::new(GapSizeMean));
        registry
    }

    pub fn register(&mut self, family: Box<dyn TargetFamily>) {
        self.families.insert(family.name(), family);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.families.keys().copied().collect()
    }

    pub fn describe(&self) -> Vec<(&'static str, &'static str)> {
        self.families
            .values()
            .map(|f| (f.name(), f.describe()))
            .collect()
    }

    /// Expand the requested family names (all applicable families when the
    /// request is empty) into concrete targets for this experiment.
    pub fn resolve(
        &self,
        requested: &[String],
        ctx: &ExperimentContext,
    ) -> Result<Vec<Box<dyn Target>>> {
        let mut targets = Vec::new();
        if requested.is_empty() {
            for family in self.families.values() {
                if family.applicable(ctx) {
                    targets.extend(family.instantiate(ctx)?);
                }
            }
        } else {
            for name in requested {
                let family = self.families.get(name.as_str()).ok_or_else(|| {
                    Error::Config(format!(
                        "unknown target '{name}'; known targets: {}",
                        self.names().join(", ")
                    ))
                })?;
                if !family.applicable(ctx) {
                    return Err(Error::Config(format!(
                        "target '{name}' does not apply to this experiment ({})",
                        family.describe()
                    )));
                }
                targets.extend(family.instantiate(ctx)?);
            }
        }
        if targets.is_empty() {
            return Err(Error::Config(
                "no verification targets apply to this experiment".into(),
            ));
        }
        Ok(targets)
    }
}

fn exact_window_mean(ctx: &ExperimentContext, i: usize) -> Result<f64> {
    match &ctx.sizes {
        Some(sizes) => fisher_mean(&ctx.params, sizes.sizes()[i] as f64),
        None => mean_observable(&ctx.params, ctx.grid.window(i)),
    }
}

struct MeanS;

impl TargetFamily for MeanS {
    fn name(&self) -> &'static str {
        "mean_s"
    }
    fn describe(&self) -> &'static str {
        "Poisson mean of the observable-family count of each window"
    }
    fn applicable(&self, _ctx: &ExperimentContext) -> bool {
        true
    }
    fn instantiate(&self, ctx: &ExperimentContext) -> Result<Vec<Box<dyn Target>>> {
        (0..ctx.grid.windows())
            .map(|i| {
                Ok(Box::new(ColumnMean {
                    window: i,
                    exact: exact_window_mean(ctx, i)?,
                }) as Box<dyn Target>)
            })
            .collect()
    }
}

struct ColumnMean {
    window: usize,
    exact: f64,
}

impl Target for ColumnMean {
    fn label(&self) -> String {
        format!("mean_s[{}]", self.window + 1)
    }
    fn exact(&self) -> f64 {
        self.exact
    }
    fn estimate(&self, table: &ReplicateTable) -> Estimate {
        mean_estimate(table.column(self.window))
    }
}

struct VarS;

impl TargetFamily for VarS {
    fn name(&self) -> &'static str {
        "var_s"
    }
    fn describe(&self) -> &'static str {
        "variance of each window count; equals the mean because the counts are Poisson"
    }
    fn applicable(&self, _ctx: &ExperimentContext) -> bool {
        true
    }
    fn instantiate(&self, ctx: &ExperimentContext) -> Result<Vec<Box<dyn Target>>> {
        (0..ctx.grid.windows())
            .map(|i| {
                Ok(Box::new(ColumnVariance {
                    window: i,
                    exact: exact_window_mean(ctx, i)?,
                }) as Box<dyn Target>)
            })
            .collect()
    }
}

struct ColumnVariance {
    window: usize,
    exact: f64,
}

impl Target for ColumnVariance {
    fn label(&self) -> String {
        format!("var_s[{}]", self.window + 1)
    }
    fn exact(&self) -> f64 {
        self.exact
    }
    fn estimate(&self, table: &ReplicateTable) -> Estimate {
        let mean = mean_estimate(table.column(self.window)).value;
        let products = table.column(self.window).map(move |v| (v - mean) * (v - mean));
        second_moment_estimate(products, table.replicates() as u64)
    }
}

struct CovS;

impl TargetFamily for CovS {
    fn name(&self) -> &'static str {
        "cov_s"
    }
    fn describe(&self) -> &'static str {
        "covariance of every window-count pair"
    }
    fn applicable(&self, ctx: &ExperimentContext) -> bool {
        ctx.grid.windows() >= 2
    }
    fn instantiate(&self, ctx: &ExperimentContext) -> Result<Vec<Box<dyn Target>>> {
        let p = ctx.grid.windows();
        let fisher = match &ctx.sizes {
            Some(sizes) => Some(fisher_moments(&ctx.params, sizes)?),
            None => None,
        };
        let mut out: Vec<Box<dyn Target>> = Vec::new();
        for i in 0..p {
            for j in (i + 1)..p {
                let exact = match &fisher {
                    Some(fm) => fm.covariance[i][j],
                    None => {
                        covariance_observable(&ctx.params, ctx.grid.window(i), ctx.grid.window(j))?
                    }
                };
                out.push(Box::new(PairCovariance {
                    first: i,
                    second: j,
                    exact,
                }));
            }
        }
        Ok(out)
    }
}

struct PairCovariance {
    first: usize,
    second: usize,
    exact: f64,
}

impl Target for PairCovariance {
    fn label(&self) -> String {
        format!("cov_s[{},{}]", self.first + 1, self.second + 1)
    }
    fn exact(&self) -> f64 {
        self.exact
    }
    fn estimate(&self, table: &ReplicateTable) -> Estimate {
        let mean_a = mean_estimate(table.column(self.first)).value;
        let mean_b = mean_estimate(table.column(self.second)).value;
        let products = table
            .column(self.first)
            .zip(table.column(self.second))
            .map(move |(a, b)| (a - mean_a) * (b - mean_b));
        second_moment_estimate(products, table.replicates() as u64)
    }
}

struct SampleVariance;

impl TargetFamily for SampleVariance {
    fn name(&self) -> &'static str {
        "sample_variance"
    }
    fn describe(&self) -> &'static str {
        "expected sample variance (1/(p(p-1))) Σ (S_i - S_j)² of the window counts"
    }
    fn applicable(&self, ctx: &ExperimentContext) -> bool {
        ctx.grid.windows() >= 2
    }
    fn instantiate(&self, ctx: &ExperimentContext) -> Result<Vec<Box<dyn Target>>> {
        let exact = match &ctx.sizes {
            Some(sizes) => fisher_moments(&ctx.params, sizes)?.expected_sample_variance,
            None => expected_sample_variance(&ctx.params, &ctx.grid)?,
        };
        Ok(vec![Box::new(SampleVarianceTarget { exact })])
    }
}

struct SampleVarianceTarget {
    exact: f64,
}

impl Target for SampleVarianceTarget {
    fn label(&self) -> String {
        "sample_variance".into()
    }
    fn exact(&self) -> f64 {
        self.exact
    }
    fn estimate(&self, table: &ReplicateTable) -> Estimate {
        let p = table.windows();
        let norm = (p * (p - 1)) as f64;
        let per_replicate = (0..table.replicates()).map(move |r| {
            let mut acc = 0.0;
            for i in 0..p {
                for j in (i + 1)..p {
                    let d = table.count(r, i) as f64 - table.count(r, j) as f64;
                    acc += d * d;
                }
            }
            acc / norm
        });
        mean_estimate(per_replicate)
    }
}

fn gap_values(table: &ReplicateTable, f: impl Fn(&GapSample) -> f64 + Copy) -> Vec<f64> {
    table.gaps().iter().flatten().map(f).collect()
}

struct GapMean;

impl TargetFamily for GapMean {
    fn name(&self) -> &'static str {
        "gap_mean"
    }
    fn describe(&self) -> &'static str {
        "mean waiting time until a uniformly chosen family's next birth"
    }
    fn applicable(&self, ctx: &ExperimentContext) -> bool {
        ctx.gap_time_at.is_some()
    }
    fn instantiate(&self, ctx: &ExperimentContext) -> Result<Vec<Box<dyn Target>>> {
        let t = ctx.gap_time_at.expect("checked by applicable");
        Ok(vec![Box::new(GapMeanTarget {
            exact: gap_time_moments(t)?.mean,
        })])
    }
}

struct GapMeanTarget {
    exact: f64,
}

impl Target for GapMeanTarget {
    fn label(&self) -> String {
        "gap_mean".into()
    }
    fn exact(&self) -> f64 {
        self.exact
    }
    fn estimate(&self, table: &ReplicateTable) -> Estimate {
        let values = gap_values(table, |g| g.waiting_time);
        mean_estimate(values.iter().copied())
    }
}

struct GapVariance;

impl TargetFamily for GapVariance {
    fn name(&self) -> &'static str {
        "gap_variance"
    }
    fn describe(&self) -> &'static str {
        "variance of the waiting time, mixture-law form 2·Li3(q)/t − (Li2(q)/t)²"
    }
    fn applicable(&self, ctx: &ExperimentContext) -> bool {
        ctx.gap_time_at.is_some()
    }
    fn instantiate(&self, ctx: &ExperimentContext) -> Result<Vec<Box<dyn Target>>> {
        let t = ctx.gap_time_at.expect("checked by applicable");
        Ok(vec![Box::new(GapVarianceTarget {
            exact: gap_time_moments(t)?.variance,
        })])
    }
}

struct GapVarianceTarget {
    exact: f64,
}

impl Target for GapVarianceTarget {
    fn label(&self) -> String {
        "gap_variance".into()
    }
    fn exact(&self) -> f64 {
        self.exact
    }
    fn estimate(&self, table: &ReplicateTable) -> Estimate {
        let values = gap_values(table, |g| g.waiting_time);
        let mean = mean_estimate(values.iter().copied()).value;
        let products = values.iter().map(move |&v| (v - mean) * (v - mean));
        second_moment_estimate(products, values.len() as u64)
    }
}

struct GapSizeMean;

impl TargetFamily for GapSizeMean {
    fn name(&self) -> &'static str {
        "gap_size_mean"
    }
    fn describe(&self) -> &'static str {
        "mean size of the chosen family, q/((1-q)t) under the log-series law"
    }
    fn applicable(&self, ctx: &ExperimentContext) -> bool {
        ctx.gap_time_at.is_some()
    }
    fn instantiate(&self, ctx: &ExperimentContext) -> Result<Vec<Box<dyn Target>>> {
        let t = ctx.gap_time_at.expect("checked by applicable");
        Ok(vec![Box::new(GapSizeMeanTarget {
            exact: LogSeriesLaw::from_time(t)?.mean(),
        })])
    }
}

struct GapSizeMeanTarget {
    exact: f64,
}

impl Target for GapSizeMeanTarget {
    fn label(&self) -> String {
        "gap_size_mean".into()
    }
    fn exact(&self) -> f64 {
        self.exact
    }
    fn estimate(&self, table: &ReplicateTable) -> Estimate {
        let values = gap_values(table, |g| g.family_size as f64);
        mean_estimate(values.iter().copied())
    }
}
