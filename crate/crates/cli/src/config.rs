//! Pipeline configuration. Relative paths resolve against the config file's
//! directory; every referenced file must exist when the config is loaded.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use synthgov_core::anonymizer::{AnonymizationParams, DEFAULT_MAX_CANDIDATES};
use synthgov_core::digest::sha256_hex;
use synthgov_core::gateway::RetryPolicy;
use synthgov_core::governance::{ChecklistStatus, TransformationChecklist, UseCaseDescriptor};
use synthgov_core::metrics::RegimeThresholds;
use synthgov_core::survey::MissingCode;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub schema: PathBuf,
    pub survey: PathBuf,
    #[serde(default)]
    pub template: Option<PathBuf>,
    #[serde(default)]
    pub questions: Option<PathBuf>,
    /// Stub answer distributions; defaults to the survey's own answers.
    #[serde(default)]
    pub stub: Option<PathBuf>,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub anonymization: AnonymizationConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    pub governance: GovernanceConfig,
    #[serde(default)]
    pub review: ReviewConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Missing codes whose records are dropped; other codes are imputed.
    #[serde(default = "default_exclude")]
    pub exclude_codes: Vec<i64>,
    /// Drop records whose category share falls below this, per variable.
    #[serde(default)]
    pub outlier_min_share: Option<f64>,
}

fn default_exclude() -> Vec<i64> {
    vec![MissingCode::Inapplicable.code()]
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            exclude_codes: default_exclude(),
            outlier_min_share: None,
        }
    }
}

impl PreprocessConfig {
    pub fn exclude_set(&self) -> Result<BTreeSet<MissingCode>> {
        self.exclude_codes
            .iter()
            .map(|&c| MissingCode::from_code(c).ok_or_else(|| CliError::Config(format!("{c} is not a missing code"))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnonymizationConfig {
    pub k: usize,
    pub m: usize,
    #[serde(default = "default_cap")]
    pub max_candidates: usize,
}

fn default_cap() -> usize {
    DEFAULT_MAX_CANDIDATES
}

impl Default for AnonymizationConfig {
    fn default() -> Self {
        Self {
            k: 2,
            m: 2,
            max_candidates: DEFAULT_MAX_CANDIDATES,
        }
    }
}

impl AnonymizationConfig {
    pub fn params(&self) -> Result<AnonymizationParams> {
        let params = AnonymizationParams {
            k: self.k,
            m: self.m,
            max_candidates: self.max_candidates,
        };
        params.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub profiles: usize,
    pub model_id: String,
    pub temperature: f64,
    pub concurrency: usize,
    pub retry: RetryPolicy,
    /// Requests re-dispatched on a fresh stub to check reproducibility.
    pub reproducibility_sample: usize,
    pub cost_per_request: f64,
    /// Share of failed requests tolerated before the stage fails.
    pub max_failure_share: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            profiles: 200,
            model_id: "stub".into(),
            temperature: 0.0,
            concurrency: 4,
            retry: RetryPolicy::default(),
            reproducibility_sample: 50,
            cost_per_request: 0.0,
            max_failure_share: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub heatmap_variable: Option<String>,
    pub regime: RegimeThresholds,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            heatmap_variable: Some("qualification".into()),
            regime: RegimeThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GovernanceConfig {
    pub use_case: UseCaseDescriptor,
    #[serde(default)]
    pub rules: Option<PathBuf>,
    #[serde(default)]
    pub oversight_statement: Option<String>,
    #[serde(default = "default_checklist")]
    pub checklist: TransformationChecklist,
    #[serde(default)]
    pub runtime_budget_seconds: Option<f64>,
    #[serde(default)]
    pub cost_budget: Option<f64>,
}

fn default_checklist() -> TransformationChecklist {
    TransformationChecklist::uniform(ChecklistStatus::NotApplicable)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReviewConfig {
    /// human : synthetic
    pub ratio: (usize, usize),
    pub question: Option<String>,
    pub max_tasks: usize,
}

impl Default for ReviewConfig {
    fn default() -> Self {
        Self {
            ratio: (1, 1),
            question: None,
            max_tasks: 20,
        }
    }
}

/// A validated config plus where it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub path: PathBuf,
    pub sha256: String,
}

impl LoadedConfig {
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(seed) = seed_override {
            config.seed = seed;
        }
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(Self {
            config,
            path: path.to_path_buf(),
            sha256: sha256_hex(text.as_bytes()),
        })
    }
}

impl PipelineConfig {
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.schema);
        fix(&mut self.survey);
        for p in [&mut self.template, &mut self.questions, &mut self.stub, &mut self.governance.rules]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut files = vec![&self.schema, &self.survey];
        files.extend(
            [&self.template, &self.questions, &self.stub, &self.governance.rules]
                .into_iter()
                .flatten(),
        );
        if let Some(missing) = files.iter().find(|p| !p.is_file()) {
            return Err(CliError::Config(format!("{} does not exist", missing.display())));
        }
        self.preprocess.exclude_set()?;
        if let Some(s) = self.preprocess.outlier_min_share {
            if !(0.0..1.0).contains(&s) {
                return Err(CliError::Config(format!("outlier share {s} outside [0, 1)")));
            }
        }
        self.anonymization.params()?;
        if self.simulation.profiles == 0 {
            return Err(CliError::Config("simulation.profiles must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.simulation.max_failure_share) {
            return Err(CliError::Config("simulation.max_failure_share outside [0, 1]".into()));
        }
        self.governance
            .checklist
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }
}
