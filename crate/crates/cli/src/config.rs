//! Campaign and study configuration, loaded from TOML.

use std::path::{Path, PathBuf};

use ipelicit_core::synth::TransformSpec;
use ipelicit_elicit::{ModelEndpoint, PromptKind, DEFAULT_MAX_ATTEMPTS};
use serde::{Deserialize, Serialize};

use crate::ingest::DatasetFormat;
use crate::CliError;

/// Which granularity of score a campaign computes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreLevel {
    /// Answer-level when the record has a prediction in the candidate set.
    #[default]
    Auto,
    Answer,
    Set,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthDataset {
    #[serde(default = "TransformSpec::base_setup")]
    pub spec: TransformSpec,
    pub p: f64,
    pub m: usize,
    pub count: usize,
    #[serde(default = "default_word_length")]
    pub word_length: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<DatasetFormat>,
    /// Generate ICL tasks instead of reading a file.
    #[serde(default)]
    pub synth: Option<SynthDataset>,
    /// Keep a random subset of this many questions.
    #[serde(default)]
    pub sample: Option<usize>,
    #[serde(default)]
    pub sample_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub dataset: DatasetSource,
    pub methods: Vec<PromptKind>,
    pub endpoints: Vec<ModelEndpoint>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub score_level: ScoreLevel,
    /// Seeded members per credal elicitation when only one endpoint is configured.
    #[serde(default = "default_credal_members")]
    pub credal_members: usize,
    /// Members that must succeed; defaults to all.
    #[serde(default)]
    pub credal_quorum: Option<usize>,
    /// Endpoint id that generates candidate sets; defaults to the first endpoint.
    #[serde(default)]
    pub candidate_generator: Option<String>,
    #[serde(default)]
    pub enforce_upper: bool,
    #[serde(default)]
    pub salvage_renormalize: bool,
    /// Reply script for `mock://` endpoints.
    #[serde(default)]
    pub mock_script: Option<PathBuf>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_max_attempts() -> u32 {
    DEFAULT_MAX_ATTEMPTS
}
fn default_concurrency() -> usize {
    4
}
fn default_credal_members() -> usize {
    5
}
fn default_word_length() -> usize {
    5
}

impl CampaignConfig {
    /// Reads a TOML file; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: CampaignConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(p) = self.dataset.path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.mock_script.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        if self.methods.contains(&PromptKind::Candidates) {
            return bad("`candidates` is not a scoring method; candidate sets are generated automatically");
        }
        if self.endpoints.is_empty() {
            return bad("at least one endpoint is required");
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1");
        }
        if self.concurrency == 0 {
            return bad("concurrency must be at least 1");
        }
        if self.credal_members == 0 {
            return bad("credal_members must be at least 1");
        }
        for e in &self.endpoints {
            e.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        let mut ids: Vec<&str> = self.endpoints.iter().map(ModelEndpoint::id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("endpoint ids must be unique; set `name` to tell endpoints apart");
        }
        if let Some(g) = &self.candidate_generator {
            if !self.endpoints.iter().any(|e| e.id() == g) {
                return Err(CliError::Config(format!(
                    "candidate_generator `{g}` is not a configured endpoint"
                )));
            }
        }
        match (&self.dataset.path, &self.dataset.synth) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return bad("dataset needs exactly one of `path` or `synth`"),
        }
        if self.dataset.path.is_some() && self.dataset.format.is_none() {
            return bad("dataset.format is required with dataset.path");
        }
        Ok(())
    }

    pub fn primary_endpoint(&self) -> &ModelEndpoint {
        &self.endpoints[0]
    }

    pub fn generator_endpoint(&self) -> &ModelEndpoint {
        self.candidate_generator
            .as_deref()
            .and_then(|g| self.endpoints.iter().find(|e| e.id() == g))
            .unwrap_or(&self.endpoints[0])
    }

    pub fn records_path(&self) -> PathBuf {
        self.output_dir.join("records.jsonl")
    }

    pub fn candidates_path(&self) -> PathBuf {
        self.output_dir.join("candidates.jsonl")
    }
}

/// Configuration for `synth run`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default = "TransformSpec::base_setup")]
    pub spec: TransformSpec,
    pub p_grid: Vec<f64>,
    pub m_grid: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_word_length")]
    pub word_length: usize,
    #[serde(default = "default_study_methods")]
    pub methods: Vec<PromptKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    /// Members of the seeded credal ensemble.
    #[serde(default = "default_credal_members")]
    pub credal_members: usize,
    pub endpoint: ModelEndpoint,
    #[serde(default)]
    pub mock_script: Option<PathBuf>,
}

fn default_repeats() -> usize {
    5
}

fn default_study_methods() -> Vec<PromptKind> {
    vec![PromptKind::Definetti, PromptKind::Probint]
}

impl StudyConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: StudyConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(p) = cfg.mock_script.as_mut() {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.p_grid.is_empty() || self.m_grid.is_empty() {
            return bad("p_grid and m_grid must be non-empty");
        }
        if self.p_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("p_grid values must lie in [0, 1]");
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        if self.methods.is_empty() || self.methods.contains(&PromptKind::Candidates) {
            return bad("methods must be non-empty and must not include `candidates`");
        }
        if self.max_attempts == 0 || self.credal_members == 0 {
            return bad("max_attempts and credal_members must be at least 1");
        }
        self.endpoint.validate().map_err(|e| CliError::Config(e.to_string()))
    }
}
