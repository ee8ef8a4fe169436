//! TOML configuration of a full run.
//!
//! Every section is optional; omitted keys take the documented defaults.
//! Relative paths are resolved against the directory of the config file.
//!
//! ```toml
//! [pipeline]
//! seed = 42
//!
//! [synth]                       # generate a corpus instead of reading one
//! n_docs_per_category = 250
//! noise_fraction = 0.2
//!
//! [label]
//! rule = "vocabulary_vote"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{FieldMap, Source, SyntheticSpec};
use crate::error::{Error, Result};
use crate::kmeans::KmeansConfig;
use crate::lda::{LdaConfig, LdaInput};
use crate::nn::{Architecture, NetSpec, TrainConfig};
use crate::rng::derive_seed;
use crate::tsne::TsneConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub pipeline: PipelineSection,
    pub ingest: IngestSection,
    pub synth: Option<SynthSection>,
    pub preprocess: PreprocessSection,
    pub vectorize: VectorizeSection,
    pub kmeans: KmeansSection,
    pub tsne: TsneSection,
    pub lda: LdaSection,
    pub label: LabelSection,
    pub train: TrainSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    /// Global seed; every stochastic stage derives its own stream from it.
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection {
            seed: 42,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// One raw input file. Without a `source` the file is read as a canonical
/// corpus (keys id, source, category, title, body).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputFile {
    pub path: PathBuf,
    #[serde(default)]
    pub source: Option<Source>,
    /// Category for every line, e.g. the hashtag a tweet file was scraped for.
    #[serde(default)]
    pub category: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub inputs: Vec<InputFile>,
    /// Field maps keyed by source name (`reddit`, `twitter`), replacing the
    /// built-in snscrape maps.
    pub fields: BTreeMap<String, FieldMap>,
    pub shuffle: bool,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection {
            inputs: Vec::new(),
            fields: BTreeMap::new(),
            shuffle: true,
        }
    }
}

impl IngestSection {
    pub fn field_map(&self, source: Source) -> FieldMap {
        self.fields
            .get(source.as_str())
            .cloned()
            .unwrap_or_else(|| FieldMap::default_for(source))
    }
}

/// Synthetic corpus over the built-in study-like categories and
/// vocabularies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_docs_per_category: usize,
    pub noise_fraction: f64,
    pub doc_length: (usize, usize),
    /// Defaults to a stream derived from the global seed.
    pub seed: Option<u64>,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            n_docs_per_category: 250,
            noise_fraction: 0.2,
            doc_length: (8, 20),
            seed: None,
        }
    }
}

impl SynthSection {
    pub fn spec(&self, global_seed: u64) -> SyntheticSpec {
        let seed = self.seed.unwrap_or_else(|| derive_seed(global_seed, "synth"));
        SyntheticSpec {
            doc_length: self.doc_length,
            ..SyntheticSpec::study_like(self.n_docs_per_category, self.noise_fraction, seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    /// Stopword file (one word per line); the shipped list when absent.
    pub stopwords: Option<PathBuf>,
    pub min_token_length: usize,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        PreprocessSection {
            stopwords: None,
            min_token_length: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VectorizeSection {
    pub min_df: usize,
    pub max_df_fraction: f64,
}

impl Default for VectorizeSection {
    fn default() -> Self {
        VectorizeSection {
            min_df: 1,
            max_df_fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KmeansSection {
    /// One model per entry.
    pub k: Vec<usize>,
    pub n_init: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub top_terms: usize,
}

impl Default for KmeansSection {
    fn default() -> Self {
        KmeansSection {
            k: vec![8, 3, 2],
            n_init: 10,
            max_iter: 300,
            tol: 1e-4,
            top_terms: 20,
        }
    }
}

impl KmeansSection {
    pub fn config(&self, k: usize, global_seed: u64) -> KmeansConfig {
        KmeansConfig {
            k,
            n_init: self.n_init,
            max_iter: self.max_iter,
            tol: self.tol,
            seed: derive_seed(global_seed, &format!("kmeans/{k}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneSection {
    pub enabled: bool,
    pub perplexity: f64,
    pub n_iter: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub learning_rate: f64,
    pub perplexity_tol: f64,
    pub perplexity_max_bisect: usize,
}

impl Default for TsneSection {
    fn default() -> Self {
        let d = TsneConfig::default();
        TsneSection {
            enabled: true,
            perplexity: d.perplexity,
            n_iter: d.n_iter,
            early_exaggeration: d.early_exaggeration,
            exaggeration_iters: d.exaggeration_iters,
            learning_rate: d.learning_rate,
            perplexity_tol: d.perplexity_tol,
            perplexity_max_bisect: d.perplexity_max_bisect,
        }
    }
}

impl TsneSection {
    pub fn config(&self, global_seed: u64) -> TsneConfig {
        TsneConfig {
            perplexity: self.perplexity,
            n_iter: self.n_iter,
            early_exaggeration: self.early_exaggeration,
            exaggeration_iters: self.exaggeration_iters,
            learning_rate: self.learning_rate,
            momentum_switch_iter: self.exaggeration_iters,
            seed: derive_seed(global_seed, "tsne"),
            perplexity_tol: self.perplexity_tol,
            perplexity_max_bisect: self.perplexity_max_bisect,
            ..TsneConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaSection {
    pub enabled: bool,
    pub k: Vec<usize>,
    pub sweeps: usize,
    pub burn_in: usize,
    /// Symmetric priors; `1/K` when absent.
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub input: LdaInput,
    pub top_terms: usize,
}

impl Default for LdaSection {
    fn default() -> Self {
        LdaSection {
            enabled: true,
            k: vec![8, 3, 2],
            sweeps: 1000,
            burn_in: 800,
            alpha: None,
            beta: None,
            input: LdaInput::Counts,
            top_terms: 20,
        }
    }
}

impl LdaSection {
    pub fn config(&self, k: usize, global_seed: u64) -> LdaConfig {
        let base = LdaConfig::new(k, derive_seed(global_seed, &format!("lda/{k}")));
        LdaConfig {
            alpha: self.alpha.unwrap_or(base.alpha),
            beta: self.beta.unwrap_or(base.beta),
            sweeps: self.sweeps,
            burn_in: self.burn_in,
            input: self.input,
            ..base
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// Cluster → sentiment table from a mapping file (or the study default).
    Mapping,
    /// Each cluster takes the planted vocabulary that dominates its top
    /// terms. Synthetic corpora only.
    VocabularyVote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelSection {
    /// Which k-means model supplies the clusters.
    pub k: usize,
    pub rule: LabelRule,
    /// Mapping file; the study default when absent.
    pub mapping: Option<PathBuf>,
    pub vote_top_terms: usize,
}

impl Default for LabelSection {
    fn default() -> Self {
        LabelSection {
            k: 8,
            rule: LabelRule::Mapping,
            mapping: None,
            vote_top_terms: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Sentiment runs: every architecture × every dropout rate.
    pub architectures: Vec<Architecture>,
    pub dropout_rates: Vec<f64>,
    /// Also train the primary configuration on the category task.
    pub classification: bool,
    pub primary_architecture: Architecture,
    pub primary_dropout: f64,
    /// Trailing fraction of the shuffled rows kept for testing.
    pub test_fraction: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub val_fraction: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub hidden_units: usize,
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub pool_size: usize,
    pub dense_units: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            architectures: Architecture::ALL.to_vec(),
            dropout_rates: vec![0.0, 0.3, 0.6],
            classification: true,
            primary_architecture: Architecture::Dnn,
            primary_dropout: 0.3,
            test_fraction: 0.2,
            epochs: t.epochs,
            batch_size: t.batch_size,
            val_fraction: t.val_fraction,
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            hidden_units: 64,
            conv_filters: 32,
            conv_kernel: 3,
            pool_size: 2,
            dense_units: 128,
        }
    }
}

impl TrainSection {
    /// Network and optimizer settings for one run, with seeds derived from
    /// the global seed and the run name.
    pub fn run_settings(
        &self,
        run: &str,
        architecture: Architecture,
        dropout_rate: f64,
        input_dim: usize,
        n_classes: usize,
        global_seed: u64,
    ) -> (NetSpec, TrainConfig) {
        let spec = NetSpec {
            hidden_units: self.hidden_units,
            conv_filters: self.conv_filters,
            conv_kernel: self.conv_kernel,
            pool_size: self.pool_size,
            dense_units: self.dense_units,
            ..NetSpec::new(
                architecture,
                input_dim,
                n_classes,
                dropout_rate,
                derive_seed(global_seed, &format!("nn/{run}/init")),
            )
        };
        let config = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            val_fraction: self.val_fraction,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            shuffle_seed: derive_seed(global_seed, &format!("nn/{run}/order")),
        };
        (spec, config)
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut config: PipelineConfig = toml::from_str(text).map_err(|e| {
            let section = e
                .span()
                .and_then(|span| section_at(text, span.start))
                .unwrap_or_else(|| "config".to_string());
            Error::config(section, e.message().to_string())
        })?;
        config.base_dir = base_dir.to_path_buf();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Static checks that need no file access.
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.synth {
            s.spec(self.pipeline.seed).validate()?;
        }
        if self.kmeans.k.is_empty() || self.kmeans.k.contains(&0) {
            return Err(Error::config("kmeans", "k must list positive cluster counts"));
        }
        if !self.kmeans.k.contains(&self.label.k) {
            return Err(Error::config(
                "label",
                format!("k = {} is not among the fitted k-means models {:?}", self.label.k, self.kmeans.k),
            ));
        }
        if self.label.rule == LabelRule::VocabularyVote && self.synth.is_none() {
            return Err(Error::config(
                "label",
                "rule = \"vocabulary_vote\" needs a [synth] corpus with planted vocabularies",
            ));
        }
        if self.lda.enabled {
            for &k in &self.lda.k {
                self.lda.config(k, 0).validate()?;
            }
        }
        let t = &self.train;
        if t.architectures.is_empty() || t.dropout_rates.is_empty() {
            return Err(Error::config("train", "architectures and dropout_rates must be non-empty"));
        }
        if !(t.test_fraction > 0.0 && t.test_fraction < 1.0) {
            return Err(Error::config(
                "train",
                format!("test_fraction {} outside (0, 1)", t.test_fraction),
            ));
        }
        if !(t.val_fraction > 0.0 && t.val_fraction < 1.0) {
            return Err(Error::config(
                "train",
                format!("val_fraction {} outside (0, 1)", t.val_fraction),
            ));
        }
        for &d in t.dropout_rates.iter().chain([&t.primary_dropout]) {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::config("train", format!("dropout rate {d} outside [0, 1)")));
            }
        }
        let (_, train) = t.run_settings("check", Architecture::Dnn, t.primary_dropout, 1, 2, 0);
        train.validate()
    }
}

/// Name of the `[section]` enclosing byte offset `pos`.
fn section_at(text: &str, pos: usize) -> Option<String> {
    text[..pos.min(text.len())]
        .lines()
        .rev()
        .find_map(|l| {
            let l = l.trim();
            l.strip_prefix('[')
                .and_then(|r| r.strip_suffix(']'))
                .map(|s| s.trim_matches(|c| c == '[' || c == ']').to_string())
        })
        .map(|s| s.split('.').next().unwrap_or_default().to_string())
}
