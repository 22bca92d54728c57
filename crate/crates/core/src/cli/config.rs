//! Pipeline configuration file, flag overrides and the config hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{CohortConfig, WorldConfig, DEFAULT_MAX_CHARS};
use crate::error::{Error, Result};
use crate::evaluation::EvalConfig;
use crate::extraction::PromptTemplate;
use crate::ranking::{BoostHyper, LinearHyper, SamplingConfig};
use crate::remote::RemoteBackendConfig;
use crate::standardization::{DEFAULT_DIMENSION, DEFAULT_THRESHOLD, DEFAULT_TOP_K};

/// Input files. Unset entries fall back to the outputs of `world` and
/// `synth` inside the output directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub ontology: Option<PathBuf>,
    pub disease_annotations: Option<PathBuf>,
    pub gene_annotations: Option<PathBuf>,
    pub cohort: Option<PathBuf>,
    pub notes: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub patients: usize,
    /// Untagged general terms mentioned in each narrative.
    pub distractors: usize,
    pub distractor_max_depth: usize,
    pub world: WorldConfig,
    pub cohort: CohortConfig,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            patients: 200,
            distractors: 3,
            distractor_max_depth: 2,
            world: WorldConfig::default(),
            cohort: CohortConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Gazetteer,
    Remote,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionSection {
    pub backend: Backend,
    pub max_chunk_chars: usize,
    /// Regexes matched against note type and text; matching notes are dropped.
    pub exclude_patterns: Vec<String>,
    pub remote: Option<RemoteBackendConfig>,
    pub prompt: PromptTemplate,
}

impl Default for ExtractionSection {
    fn default() -> Self {
        ExtractionSection {
            backend: Backend::Gazetteer,
            max_chunk_chars: DEFAULT_MAX_CHARS,
            exclude_patterns: Vec::new(),
            remote: None,
            prompt: PromptTemplate::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorKind {
    Threshold,
    Remote,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StandardizationSection {
    pub dimension: usize,
    pub top_k: usize,
    pub selector: SelectorKind,
    pub threshold: f64,
    pub remote: Option<RemoteBackendConfig>,
}

impl Default for StandardizationSection {
    fn default() -> Self {
        StandardizationSection {
            dimension: DEFAULT_DIMENSION,
            top_k: DEFAULT_TOP_K,
            selector: SelectorKind::Threshold,
            threshold: DEFAULT_THRESHOLD,
            remote: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankingSection {
    pub train_ratio: f64,
    pub sampling: SamplingConfig,
    pub linear: LinearHyper,
    pub boosted: BoostHyper,
}

impl Default for RankingSection {
    fn default() -> Self {
        RankingSection {
            train_ratio: 0.8,
            sampling: SamplingConfig::default(),
            linear: LinearHyper::default(),
            boosted: BoostHyper::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub cutoffs: Vec<usize>,
    pub bootstrap_iterations: usize,
    pub permutations: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        let d = EvalConfig::default();
        EvaluationSection {
            cutoffs: d.cutoffs,
            bootstrap_iterations: d.bootstrap_iterations,
            permutations: d.permutations,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub extraction: ExtractionSection,
    #[serde(default)]
    pub standardization: StandardizationSection,
    #[serde(default)]
    pub ranking: RankingSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_concurrency() -> usize {
    4
}

/// Flag values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub backend: Option<Backend>,
    pub cutoffs: Option<Vec<usize>>,
    pub out_dir: Option<PathBuf>,
    pub concurrency: Option<usize>,
}

impl PipelineConfig {
    /// Minimal config for `seed` with every other value at its default.
    pub fn with_seed(seed: u64) -> Self {
        toml::from_str(&format!("seed = {seed}")).expect("default config")
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads the file and resolves relative input paths against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.paths.ontology,
            &mut cfg.paths.disease_annotations,
            &mut cfg.paths.gene_annotations,
            &mut cfg.paths.cohort,
            &mut cfg.paths.notes,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(b) = o.backend {
            self.extraction.backend = b;
        }
        if let Some(k) = &o.cutoffs {
            self.evaluation.cutoffs = k.clone();
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
        if let Some(c) = o.concurrency {
            self.concurrency = c;
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            cutoffs: self.evaluation.cutoffs.clone(),
            bootstrap_iterations: self.evaluation.bootstrap_iterations,
            permutations: self.evaluation.permutations,
            seed: self.seed,
        }
    }

    /// Checks values that do not depend on files.
    pub fn validate(&self) -> Result<()> {
        if self.concurrency == 0 {
            return Err(Error::Config("concurrency must be at least 1".into()));
        }
        if self.extraction.max_chunk_chars == 0 {
            return Err(Error::Config("max_chunk_chars must be positive".into()));
        }
        if self.extraction.backend == Backend::Remote && self.extraction.remote.is_none() {
            return Err(Error::Config("remote extraction needs an [extraction.remote] section".into()));
        }
        if self.standardization.selector == SelectorKind::Remote && self.standardization.remote.is_none() {
            return Err(Error::Config("remote selector needs a [standardization.remote] section".into()));
        }
        if self.standardization.top_k == 0 || self.standardization.dimension == 0 {
            return Err(Error::Config("top_k and dimension must be positive".into()));
        }
        if !(self.ranking.train_ratio > 0.0 && self.ranking.train_ratio < 1.0) {
            return Err(Error::Config("train_ratio must lie strictly between 0 and 1".into()));
        }
        self.eval_config().validate()
    }

    /// SHA-256 of the canonical JSON form, leaving out settings that do not
    /// change pipeline artifacts: output location, worker count and the
    /// report-only evaluation section.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            for k in ["out_dir", "concurrency", "evaluation"] {
                m.remove(k);
            }
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}
