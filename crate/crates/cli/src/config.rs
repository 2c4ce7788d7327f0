//! Experiment configuration: one TOML file describes workloads, algorithms,
//! budgets, and seeds. The SHA-256 hash of the resolved config is stamped
//! into every trial record so results stay traceable to the exact setup.

use optprofiler_core::error::{Error, Result};
use optprofiler_core::protocol::{Budget, Clock, Condition};
use optprofiler_core::workloads::WorkloadConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    /// Budget fraction at which targets are read off (see target setting).
    #[serde(default = "default_target_fraction")]
    pub target_fraction: f64,
    #[serde(default = "default_condition")]
    pub condition: Condition,
    #[serde(default = "default_r_max_time")]
    pub r_max_time: f64,
    #[serde(default = "default_r_max_step")]
    pub r_max_step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub workloads: Vec<WorkloadEntry>,
    pub algorithms: Vec<AlgorithmConfig>,
}

fn default_eval_every() -> u64 {
    10
}
fn default_target_fraction() -> f64 {
    0.75
}
fn default_condition() -> Condition {
    Condition::StepControl
}
fn default_r_max_time() -> f64 {
    2.75
}
fn default_r_max_step() -> f64 {
    1.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkloadEntry {
    #[serde(flatten)]
    pub workload: WorkloadConfig,
    pub budget: BudgetConfig,
}

/// Budget capacities for both conditions; the active one is chosen by the
/// run-level condition so the same config can drive either protocol.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_wall_clock_sec: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    /// Simulated clock cost per step; absent means the real clock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sec_per_step: Option<f64>,
}

impl BudgetConfig {
    pub fn build(&self, condition: Condition, clock_override: Option<f64>) -> Result<Budget> {
        let clock = match clock_override.or(self.sec_per_step) {
            Some(sec_per_step) => Clock::Simulated { sec_per_step },
            None => Clock::Real,
        };
        let budget = match condition {
            Condition::TimeControl => {
                let max_t = self.max_wall_clock_sec.ok_or_else(|| {
                    Error::config("time-control run needs budget.max_wall_clock_sec")
                })?;
                Budget::time_control(max_t, clock)
            }
            Condition::StepControl => {
                let max_s = self
                    .max_steps
                    .ok_or_else(|| Error::config("step-control run needs budget.max_steps"))?;
                Budget::step_control(max_s, clock)
            }
        };
        budget.validate()?;
        Ok(budget)
    }
}

/// Step prompt handed to the learned optimizer: the full estimated budget or
/// a fraction of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PromptRaw", into = "PromptRaw")]
pub enum PromptPolicy {
    Full,
    Fraction(f64),
}

impl Default for PromptPolicy {
    fn default() -> Self {
        PromptPolicy::Full
    }
}

impl PromptPolicy {
    pub fn fraction(&self) -> f64 {
        match self {
            PromptPolicy::Full => 1.0,
            PromptPolicy::Fraction(f) => *f,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PromptRaw {
    Text(String),
    Number(f64),
}

impl TryFrom<PromptRaw> for PromptPolicy {
    type Error = String;
    fn try_from(raw: PromptRaw) -> std::result::Result<Self, String> {
        match raw {
            PromptRaw::Text(s) if s == "full" => Ok(PromptPolicy::Full),
            PromptRaw::Text(s) => Err(format!("prompt must be \"full\" or a fraction, got '{s}'")),
            PromptRaw::Number(f) if f > 0.0 && f <= 1.0 => Ok(PromptPolicy::Fraction(f)),
            PromptRaw::Number(f) => Err(format!("prompt fraction must be in (0, 1], got {f}")),
        }
    }
}

impl From<PromptPolicy> for PromptRaw {
    fn from(p: PromptPolicy) -> Self {
        match p {
            PromptPolicy::Full => PromptRaw::Text("full".to_string()),
            PromptPolicy::Fraction(f) => PromptRaw::Number(f),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlgorithmConfig {
    Baseline {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base_lr: Option<f64>,
    },
    Learned {
        name: String,
        /// Weights file; absent runs the untrained (identity) rule.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        checkpoint: Option<PathBuf>,
        #[serde(default)]
        prompt: PromptPolicy,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        layer_sizes: Option<Vec<usize>>,
        #[serde(default)]
        init_seed: u64,
    },
}

impl AlgorithmConfig {
    pub fn name(&self) -> &str {
        match self {
            AlgorithmConfig::Baseline { name, .. } => name,
            AlgorithmConfig::Learned { name, .. } => name,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must be nonempty"));
        }
        let distinct: BTreeSet<_> = self.seeds.iter().collect();
        if distinct.len() != self.seeds.len() {
            return Err(Error::config("seeds must be distinct"));
        }
        if !(self.target_fraction > 0.0 && self.target_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "target_fraction must be in (0, 1], got {}",
                self.target_fraction
            )));
        }
        if self.eval_every == 0 {
            return Err(Error::config("eval_every must be >= 1"));
        }
        for (label, r) in [("r_max_time", self.r_max_time), ("r_max_step", self.r_max_step)] {
            if !(r > 1.0) || !r.is_finite() {
                return Err(Error::Config(format!("{label} must be > 1, got {r}")));
            }
        }
        if self.workloads.is_empty() {
            return Err(Error::config("at least one workload is required"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("at least one algorithm is required"));
        }
        let mut ids = BTreeSet::new();
        for w in &self.workloads {
            if !ids.insert(w.workload.id().to_string()) {
                return Err(Error::Config(format!(
                    "duplicate workload id '{}'",
                    w.workload.id()
                )));
            }
        }
        let mut names = BTreeSet::new();
        for a in &self.algorithms {
            if !names.insert(a.name().to_string()) {
                return Err(Error::Config(format!("duplicate algorithm name '{}'", a.name())));
            }
            if let AlgorithmConfig::Baseline { name, .. } = a {
                optprofiler_core::optim::Algorithm::from_str(name)?;
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, ignoring the output directory
    /// (moving results must not invalidate them).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    pub fn workload(&self, id: &str) -> Option<&WorkloadEntry> {
        self.workloads.iter().find(|w| w.workload.id() == id)
    }
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let config: RunConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

/// Output directory resolution: env OPTPROFILER_OUT > --out > config > "results".
pub fn resolve_out_dir(flag: Option<&Path>, config_out: Option<&Path>) -> PathBuf {
    if let Ok(env_out) = std::env::var("OPTPROFILER_OUT") {
        if !env_out.is_empty() {
            return PathBuf::from(env_out);
        }
    }
    flag.map(Path::to_path_buf)
        .or_else(|| config_out.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("results"))
}
