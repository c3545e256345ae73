//! Experiment configuration: the model, the grid design, the replication
//! plan, and the named verification targets. Configurations load from a
//! TOML file or build programmatically; the CLI flags map onto the same
//! fields.
//!
//! ```toml
//! theta = 2.0
//! replicates = 100000
//! seed = 7
//! sigma = 3.0            # optional, default 3
//! targets = ["mean_s", "cov_s"]   # optional, default: every applicable family
//!
//! [grid]                 # exactly one of the three designs
//! cuts = [0.0, 0.5, 1.0]
//! # gamma = 1.0, p = 5
//! # sizes = [100, 100]
//! ```

use crate::distributions::ModelParams;
use crate::error::{Error, Result};
use crate::interval::{fisher_grid, log_equal_grid, SampleSizes, TimeGrid};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One of the three grid designs: explicit cut points, the log-equal
/// design (γ, p), or the count-matched design from per-window sample
/// sizes. Mixing designs is rejected at parse time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GridSpec {
    Cuts { cuts: Vec<f64> },
    LogEqual { gamma: f64, p: usize },
    Fisher { sizes: Vec<u64> },
}

impl GridSpec {
    pub fn build(&self, params: &ModelParams) -> Result<TimeGrid> {
        match self {
            GridSpec::Cuts { cuts } => TimeGrid::new(cuts.clone()),
            GridSpec::LogEqual { gamma, p } => log_equal_grid(*gamma, *p),
            GridSpec::Fisher { sizes } => fisher_grid(params, &SampleSizes::new(sizes.clone())?),
        }
    }

    /// The sample sizes when this is the count-matched design; the exact
    /// engine then uses the simplified moment formulas.
    pub fn fisher_sizes(&self) -> Result<Option<SampleSizes>> {
        match self {
            GridSpec::Fisher { sizes } => Ok(Some(SampleSizes::new(sizes.clone())?)),
            _ => Ok(None),
        }
    }
}

fn default_sigma() -> f64 {
    3.0
}

fn default_event_budget() -> f64 {
    crate::simulator::DEFAULT_EVENT_BUDGET
}

/// A complete replicated-experiment description. Identical configurations
/// (the seed included) produce byte-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub theta: f64,
    pub grid: GridSpec,
    pub replicates: u64,
    pub seed: u64,
    /// Pass/fail threshold on |z|; fixed before the run, never adjusted.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Registry names of the targets to verify; empty means every family
    /// applicable to this configuration.
    #[serde(default)]
    pub targets: Vec<String>,
    /// Also sample one gap time per replicate at this time, enabling the
    /// gap_* targets.
    #[serde(default)]
    pub gap_time_at: Option<f64>,
    /// Cap on the expected event count of a single replicate.
    #[serde(default = "default_event_budget")]
    pub event_budget: f64,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        ModelParams::new(self.theta)?;
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Config("sigma must be positive".into()));
        }
        if let Some(t) = self.gap_time_at {
            if !(t > 0.0) {
                return Err(Error::Config("gap_time_at must be positive".into()));
            }
        }
        Ok(())
    }
}
