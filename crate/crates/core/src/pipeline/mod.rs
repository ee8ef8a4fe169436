//! The end-to-end run: ingest → preprocess → vectorize → {k-means, t-SNE,
//! LDA} → label → train → evaluate → report.
//!
//! Stages communicate only through files in the output directory, so any
//! stage can be rerun on its own once its inputs exist. [`run_all`] runs
//! them in order and writes `manifest.txt`; when a stage fails the manifest
//! lists what was written so far and names the failed stage.
//!
//! Output layout (paths relative to the output directory):
//!
//! | path | stage |
//! |---|---|
//! | `corpus.jsonl`, `synth/planted_labels.tsv` | ingest |
//! | `tokens.tsv` | preprocess |
//! | `vocabulary.tsv`, `tfidf.txt` | vectorize |
//! | `kmeans/k{K}.txt`, `kmeans/k{K}_top_terms.tsv` | cluster |
//! | `tsne/embedding.txt`, `tsne/kl_trace.txt` | embed |
//! | `lda/k{K}.txt`, `lda/k{K}_top_terms.tsv` | topics |
//! | `labels/mapping.toml`, `labels/sentiment.tsv`, `labels/class_balance.tsv` | label |
//! | `models/{run}.net`, `models/{run}_history.csv`, `tables/grid.csv` | train |
//! | `reports/{run}.txt`, `reports/planted_accuracy.csv` | evaluate |
//! | `tables/table2.*`, `tables/table3.*`, `figures/*.svg` | report |

mod artifacts;
mod config;

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;

pub use artifacts::{sha256_hex, Artifacts, Manifest, MANIFEST_FILE};
pub use config::{
    InputFile, IngestSection, KmeansSection, LabelRule, LabelSection, LdaSection, PipelineConfig,
    PipelineSection, PreprocessSection, SynthSection, TrainSection, TsneSection, VectorizeSection,
};

use crate::corpus::{self, Corpus};
use crate::error::{Error, Result};
use crate::kmeans;
use crate::labels::{self, Sentiment, SentimentMapping};
use crate::lda;
use crate::metrics::{classification_report, confusion_matrix};
use crate::nn::{self, Architecture};
use crate::plot;
use crate::preprocess::{self, PreprocessConfig, StopwordList, TokenizedDoc};
use crate::rng::derive_seed;
use crate::tables::{self, ExperimentGrid, GridRow, Task};
use crate::tfidf::{self, TfidfMatrix, Vocabulary};
use crate::tsne;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Ingest,
    Preprocess,
    Vectorize,
    Cluster,
    Embed,
    Topics,
    Label,
    Train,
    Evaluate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Ingest,
        Stage::Preprocess,
        Stage::Vectorize,
        Stage::Cluster,
        Stage::Embed,
        Stage::Topics,
        Stage::Label,
        Stage::Train,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Preprocess => "preprocess",
            Stage::Vectorize => "vectorize",
            Stage::Cluster => "cluster",
            Stage::Embed => "embed",
            Stage::Topics => "topics",
            Stage::Label => "label",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::config("pipeline", format!("unknown stage `{s}`")))
    }
}

pub const CORPUS: &str = "corpus.jsonl";
pub const PLANTED: &str = "synth/planted_labels.tsv";
pub const TOKENS: &str = "tokens.tsv";
pub const VOCABULARY: &str = "vocabulary.tsv";
pub const TFIDF: &str = "tfidf.txt";
pub const EMBEDDING: &str = "tsne/embedding.txt";
pub const KL_TRACE: &str = "tsne/kl_trace.txt";
pub const MAPPING: &str = "labels/mapping.toml";
pub const SENTIMENT_LABELS: &str = "labels/sentiment.tsv";
pub const CLASS_BALANCE: &str = "labels/class_balance.tsv";
pub const GRID: &str = "tables/grid.csv";
pub const PLANTED_ACCURACY: &str = "reports/planted_accuracy.csv";

pub fn kmeans_model_path(k: usize) -> String {
    format!("kmeans/k{k}.txt")
}

pub fn kmeans_terms_path(k: usize) -> String {
    format!("kmeans/k{k}_top_terms.tsv")
}

pub fn lda_model_path(k: usize) -> String {
    format!("lda/k{k}.txt")
}

pub fn lda_terms_path(k: usize) -> String {
    format!("lda/k{k}_top_terms.tsv")
}

/// One training run of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunKey {
    pub task: Task,
    pub architecture: Architecture,
    pub dropout_rate: f64,
}

impl RunKey {
    /// File stem, e.g. `sentiment_dnn_d30`.
    pub fn name(&self) -> String {
        format!(
            "{}_{}_d{}",
            self.task,
            self.architecture,
            (self.dropout_rate * 100.0).round() as i64
        )
    }

    pub fn model_path(&self) -> String {
        format!("models/{}.net", self.name())
    }

    pub fn history_path(&self) -> String {
        format!("models/{}_history.csv", self.name())
    }

    pub fn report_path(&self) -> String {
        format!("reports/{}.txt", self.name())
    }
}

/// Sentiment runs for every architecture × dropout rate, then the
/// category run for the primary configuration.
pub fn planned_runs(train: &TrainSection) -> Vec<RunKey> {
    let mut runs = Vec::new();
    for &architecture in &train.architectures {
        for &dropout_rate in &train.dropout_rates {
            runs.push(RunKey {
                task: Task::Sentiment,
                architecture,
                dropout_rate,
            });
        }
    }
    if train.classification {
        runs.push(RunKey {
            task: Task::Classification,
            architecture: train.primary_architecture,
            dropout_rate: train.primary_dropout,
        });
    }
    runs
}

/// Number of leading rows used for training; the rest is the test set.
pub fn split_point(n_rows: usize, test_fraction: f64) -> Result<usize> {
    let n_test = (n_rows as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n_rows {
        return Err(Error::Data(format!(
            "test_fraction {test_fraction} of {n_rows} rows leaves an empty train or test set"
        )));
    }
    Ok(n_rows - n_test)
}

/// Runs every stage in order into a fresh manifest.
pub fn run_all(config: &PipelineConfig) -> Result<Manifest> {
    let mut art = Artifacts::create(config.resolve(&config.pipeline.out_dir))?;
    for stage in Stage::ALL {
        run_logged(stage, config, &mut art)?;
    }
    art.write_manifest(None)?;
    Ok(art.manifest().clone())
}

/// Runs one stage against an existing output directory and updates its
/// manifest.
pub fn run_stage(stage: Stage, config: &PipelineConfig) -> Result<Manifest> {
    let mut art = Artifacts::open(config.resolve(&config.pipeline.out_dir))?;
    run_logged(stage, config, &mut art)?;
    art.write_manifest(None)?;
    Ok(art.manifest().clone())
}

fn run_logged(stage: Stage, config: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    info!("stage {stage}: start");
    match execute(stage, config, art) {
        Ok(()) => {
            info!("stage {stage}: done");
            Ok(())
        }
        Err(e) => {
            // The cause is what matters to the caller; a manifest write
            // failure here is only logged.
            if let Err(m) = art.write_manifest(Some(stage.as_str())) {
                warn!("could not write partial manifest: {m}");
            }
            Err(e.in_stage(stage.as_str()))
        }
    }
}

fn execute(stage: Stage, c: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    match stage {
        Stage::Ingest => ingest(c, art),
        Stage::Preprocess => preprocess_stage(c, art),
        Stage::Vectorize => vectorize_stage(c, art),
        Stage::Cluster => cluster_stage(c, art),
        Stage::Embed => embed_stage(c, art),
        Stage::Topics => topics_stage(c, art),
        Stage::Label => label_stage(c, art),
        Stage::Train => train_stage(c, art),
        Stage::Evaluate => evaluate_stage(c, art),
        Stage::Report => report_stage(c, art),
    }
}

// ---------------------------------------------------------------- loaders

fn load_corpus(art: &Artifacts) -> Result<Corpus> {
    corpus::read_corpus(art.reader(CORPUS)?)
}

fn load_tokens(art: &Artifacts) -> Result<Vec<TokenizedDoc>> {
    preprocess::read_tokenized(art.reader(TOKENS)?)
}

fn load_vocabulary(art: &Artifacts, n_docs: usize) -> Result<Vocabulary> {
    Vocabulary::read(art.reader(VOCABULARY)?, n_docs)
}

fn load_matrix(art: &Artifacts) -> Result<TfidfMatrix<f64>> {
    tfidf::load_matrix(art.reader(TFIDF)?)
}

fn load_planted(art: &Artifacts) -> Result<Option<HashMap<String, Sentiment>>> {
    if !art.exists(PLANTED) {
        return Ok(None);
    }
    let mut map = HashMap::new();
    for (i, line) in art.reader(PLANTED)?.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = || Error::parse(PLANTED, i + 1, "expected `id TAB sentiment`");
        let (id, s) = line.split_once('\t').ok_or_else(bad)?;
        map.insert(id.to_string(), s.parse().map_err(|_| bad())?);
    }
    Ok(Some(map))
}

/// `topic TAB rank TAB term TAB weight` lines back into per-topic lists.
fn read_top_terms<R: BufRead>(reader: R, file: &str) -> Result<Vec<Vec<(String, f64)>>> {
    let mut topics: Vec<Vec<(String, f64)>> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = || Error::parse(file, i + 1, "expected `topic TAB rank TAB term TAB weight`");
        let f: Vec<&str> = line.split('\t').collect();
        let [topic, _, term, w] = f.as_slice() else {
            return Err(bad());
        };
        let topic: usize = topic.parse().map_err(|_| bad())?;
        let w: f64 = w.parse().map_err(|_| bad())?;
        if topic >= topics.len() {
            topics.resize_with(topic + 1, Vec::new);
        }
        topics[topic].push((term.to_string(), w));
    }
    Ok(topics)
}

fn preprocess_config(c: &PipelineConfig) -> Result<PreprocessConfig> {
    let stopwords = match &c.preprocess.stopwords {
        None => StopwordList::classic_english(),
        Some(p) => {
            let path = c.resolve(p);
            let text = std::fs::read_to_string(&path).map_err(|e| {
                Error::config("preprocess", format!("stopword file {}: {e}", path.display()))
            })?;
            let tag = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            StopwordList::parse(&text, &tag)?
        }
    };
    Ok(PreprocessConfig {
        stopwords,
        min_token_length: c.preprocess.min_token_length,
    })
}

// ----------------------------------------------------------------- stages

fn ingest(c: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    let seed = c.pipeline.seed;
    let (corpus, planted) = match (&c.synth, c.ingest.inputs.is_empty()) {
        (Some(_), false) => {
            return Err(Error::config(
                "ingest",
                "both [synth] and ingest inputs are configured; choose one",
            ))
        }
        (None, true) => {
            return Err(Error::config(
                "ingest",
                "no inputs configured (add [[ingest.inputs]] or a [synth] section)",
            ))
        }
        (Some(s), true) => {
            let (corpus, planted) = corpus::generate_synthetic(&s.spec(seed))?;
            (corpus, Some(planted))
        }
        (None, false) => (read_inputs(c)?, None),
    };
    info!(
        "ingest: {} documents in {} categories",
        corpus.len(),
        corpus.categories.len()
    );
    if let Some(planted) = planted {
        let mut text = String::new();
        for (d, s) in corpus.documents.iter().zip(&planted) {
            text.push_str(&format!("{}\t{}\n", d.id, s));
        }
        art.write(PLANTED, text.as_bytes())?;
    }
    let corpus = if c.ingest.shuffle {
        corpus::shuffle(&corpus, derive_seed(seed, "shuffle"))
    } else {
        corpus
    };
    art.write_with(CORPUS, |buf| corpus::write_jsonl(&corpus, buf))
}

fn read_inputs(c: &PipelineConfig) -> Result<Corpus> {
    let mut parts = Vec::with_capacity(c.ingest.inputs.len());
    for input in &c.ingest.inputs {
        let path = c.resolve(&input.path);
        let file = std::fs::File::open(&path).map_err(|e| {
            Error::config("ingest", format!("input {}: {e}", path.display()))
        })?;
        let reader = std::io::BufReader::new(file);
        let docs = match input.source {
            None => corpus::read_corpus(reader)?.documents,
            Some(source) => {
                let outcome = corpus::parse_jsonl(
                    reader,
                    source,
                    &c.ingest.field_map(source),
                    input.category.as_deref(),
                )?;
                if outcome.skipped > 0 {
                    warn!(
                        "ingest: skipped {} malformed lines in {}",
                        outcome.skipped,
                        path.display()
                    );
                }
                outcome.documents
            }
        };
        parts.push(docs);
    }
    corpus::merge_corpora(parts)
}

fn preprocess_stage(c: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    let corpus = load_corpus(art)?;
    let out = preprocess::preprocess_corpus(&corpus, &preprocess_config(c)?)?;
    info!(
        "preprocess: {} documents kept, {} empty, {} duplicate",
        out.docs.len(),
        out.dropped_empty.len(),
        out.dropped_duplicate.len()
    );
    art.write_with(TOKENS, |buf| preprocess::write_tokenized(&out.docs, buf))
}

fn vectorize_stage(c: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    let docs = load_tokens(art)?;
    let vocab =
        tfidf::build_vocabulary(&docs, c.vectorize.min_df, c.vectorize.max_df_fraction)?;
    let v = tfidf::vectorize::<f64>(&docs, &vocab);
    // Rows without a single vocabulary term carry no signal for any
    // downstream model.
    let keep: Vec<usize> = (0..v.matrix.n_rows())
        .filter(|i| !v.matrix.rows[*i].is_empty())
        .collect();
    if !v.empty_rows.is_empty() {
        info!("vectorize: dropping {} rows with no vocabulary term", v.empty_rows.len());
    }
    let matrix = v.matrix.select(&keep);
    if matrix.n_rows() == 0 {
        return Err(Error::empty("vectorize: every row empty"));
    }
    info!("vectorize: {} rows × {} terms", matrix.n_rows(), matrix.n_cols);
    art.write_with(VOCABULARY, |buf| vocab.write(buf))?;
    art.write_with(TFIDF, |buf| tfidf::save_matrix(&matrix, buf))
}

fn cluster_stage(c: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    let docs = load_tokens(art)?;
    let vocab = load_vocabulary(art, docs.len())?;
    let matrix = load_matrix(art)?;
    for &k in &c.kmeans.k {
        let model = kmeans::fit(&matrix, &c.kmeans.config(k, c.pipeline.seed))?;
        info!("cluster: k = {k}, inertia {:.4}, {} iterations", model.inertia, model.n_iter_run);
        let terms = kmeans::top_terms(&model, &vocab, c.kmeans.top_terms)?;
        art.write_with(&kmeans_model_path(k), |buf| kmeans::save_model(&model, buf))?;
        art.write_with(&kmeans_terms_path(k), |buf| lda::write_top_terms(&terms, buf))?;
    }
    Ok(())
}

fn embed_stage(c: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    if !c.tsne.enabled {
        info!("embed: disabled");
        return Ok(());
    }
    let matrix = load_matrix(art)?;
    let out = tsne::embed(&matrix.rows, &c.tsne.config(c.pipeline.seed))?;
    if !out.unconverged_rows.is_empty() {
        warn!(
            "embed: perplexity calibration did not converge for {} rows",
            out.unconverged_rows.len()
        );
    }
    info!(
        "embed: final KL {:.4}",
        out.embedding.kl_trace.last().copied().unwrap_or(f64::NAN)
    );
    art.write_with(EMBEDDING, |buf| tsne::save_embedding(&out.embedding, buf))?;
    art.write_with(KL_TRACE, |buf| tsne::save_kl_trace(&out.embedding, buf))
}

fn topics_stage(c: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    if !c.lda.enabled {
        info!("topics: disabled");
        return Ok(());
    }
    let docs = load_tokens(art)?;
    let vocab = load_vocabulary(art, docs.len())?;
    // Models for different K are independent chains.
    let fitted: Vec<(usize, lda::TopicModel<f64>)> = c
        .lda
        .k
        .par_iter()
        .map(|&k| Ok((k, lda::fit(&docs, &vocab, &c.lda.config(k, c.pipeline.seed))?)))
        .collect::<Result<_>>()?;
    for (k, model) in &fitted {
        let terms = lda::top_terms(model, &vocab, c.lda.top_terms)?;
        art.write_with(&lda_model_path(*k), |buf| lda::save_model(model, buf))?;
        art.write_with(&lda_terms_path(*k), |buf| lda::write_top_terms(&terms, buf))?;
    }
    Ok(())
}

fn label_stage(c: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    let corpus = load_corpus(art)?;
    let matrix = load_matrix(art)?;
    let k = c.label.k;
    let (centroids, assignments) = kmeans::load_model::<f64, _>(art.reader(&kmeans_model_path(k))?)?;
    if assignments.len() != matrix.n_rows() {
        return Err(Error::Data(format!(
            "{} has {} assignments for {} matrix rows; rerun cluster",
            kmeans_model_path(k),
            assignments.len(),
            matrix.n_rows()
        )));
    }
    let mapping = match c.label.rule {
        LabelRule::Mapping => match &c.label.mapping {
            None => SentimentMapping::study_default(),
            Some(p) => {
                let path = c.resolve(p);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Error::config("label", format!("mapping file {}: {e}", path.display()))
                })?;
                SentimentMapping::from_toml(&text)?
            }
        },
        LabelRule::VocabularyVote => {
            let synth = c.synth.as_ref().ok_or_else(|| {
                Error::config("label", "vocabulary_vote needs a [synth] section")
            })?;
            let spec = synth.spec(c.pipeline.seed);
            let pre = preprocess_config(c)?;
            let stem = |words: &[String]| -> Vec<String> {
                words.iter().flat_map(|w| preprocess::process_text(w, &pre)).collect()
            };
            let vocabularies = [
                stem(&spec.vocabularies.negative),
                stem(&spec.vocabularies.neutral),
                stem(&spec.vocabularies.positive),
            ];
            let docs = load_tokens(art)?;
            let vocab = load_vocabulary(art, docs.len())?;
            let model = kmeans::ClusterModel {
                centroids,
                assignments: assignments.clone(),
                inertia: 0.0,
                n_iter_run: 0,
                inertia_trace: Vec::new(),
                config: c.kmeans.config(k, c.pipeline.seed),
            };
            let terms = kmeans::top_terms(&model, &vocab, c.label.vote_top_terms)?;
            labels::vocabulary_vote_mapping(&terms, &vocabularies)
        }
    };
    mapping.validate(k, &corpus.categories)?;
    let set = labels::apply_mapping(&assignments, &matrix.row_doc_index, &corpus, &mapping)?;
    let balance = labels::class_balance(&set.labels)?;
    info!(
        "label: negative {}, neutral {}, positive {}",
        balance.counts[0], balance.counts[1], balance.counts[2]
    );
    let mut text = String::from("sentiment\tcount\tfraction\n");
    for s in Sentiment::ALL {
        text.push_str(&format!(
            "{s}\t{}\t{:.4}\n",
            balance.counts[s.index()],
            balance.fractions[s.index()]
        ));
    }
    art.write(MAPPING, mapping.to_toml().as_bytes())?;
    art.write_with(SENTIMENT_LABELS, |buf| labels::write_labels(&set, buf))?;
    art.write(CLASS_BALANCE, text.as_bytes())
}

/// Rows, targets and split shared by training and evaluation.
struct TrainingData {
    matrix: TfidfMatrix<f64>,
    sentiment: Vec<usize>,
    category: Vec<usize>,
    corpus: Corpus,
    split: usize,
}

impl TrainingData {
    fn load(c: &PipelineConfig, art: &Artifacts) -> Result<Self> {
        let corpus = load_corpus(art)?;
        let matrix = load_matrix(art)?;
        let set = labels::read_labels(art.reader(SENTIMENT_LABELS)?)?;
        if set.doc_index != matrix.row_doc_index {
            return Err(Error::Data(format!(
                "{SENTIMENT_LABELS} does not match the rows of {TFIDF}; rerun label"
            )));
        }
        let category = labels::category_labels(&corpus, &matrix.row_doc_index)?;
        let split = split_point(matrix.n_rows(), c.train.test_fraction)?;
        Ok(TrainingData {
            sentiment: set.labels.iter().map(|s| s.index()).collect(),
            category,
            matrix,
            corpus,
            split,
        })
    }

    fn targets(&self, task: Task) -> (&[usize], usize) {
        match task {
            Task::Sentiment => (&self.sentiment, Sentiment::ALL.len()),
            Task::Classification => (&self.category, self.corpus.categories.len()),
        }
    }

    fn class_names(&self, task: Task) -> Vec<String> {
        match task {
            Task::Sentiment => Sentiment::ALL.iter().map(|s| s.to_string()).collect(),
            Task::Classification => self.corpus.categories.clone(),
        }
    }
}

fn train_stage(c: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    let data = TrainingData::load(c, art)?;
    let (x_train, x_test) = data.matrix.rows.split_at(data.split);
    let runs = planned_runs(&c.train);
    info!(
        "train: {} runs on {} training / {} test rows",
        runs.len(),
        x_train.len(),
        x_test.len()
    );
    let results: Vec<(nn::TrainedNet<f64>, nn::RunHistory, GridRow)> = runs
        .par_iter()
        .map(|run| {
            let (y, n_classes) = data.targets(run.task);
            let (y_train, y_test) = y.split_at(data.split);
            let (spec, tc) = c.train.run_settings(
                &run.name(),
                run.architecture,
                run.dropout_rate,
                data.matrix.n_cols,
                n_classes,
                c.pipeline.seed,
            );
            let (net, history) = nn::train(&spec, x_train, y_train, &tc)?;
            let last = history.last().ok_or_else(|| Error::Data("no epochs trained".into()))?;
            let (test_loss, test_acc) = nn::evaluate(&net.network, x_test, y_test)?;
            info!(
                "train: {} test accuracy {:.4}, loss {:.4}",
                run.name(),
                test_acc,
                test_loss
            );
            let row = GridRow {
                architecture: run.architecture,
                dropout_rate: run.dropout_rate,
                task: run.task,
                train_acc: last.train_acc,
                train_loss: last.train_loss,
                val_acc: last.val_acc,
                val_loss: last.val_loss,
                test_acc,
                test_loss,
            };
            Ok((net, history, row))
        })
        .collect::<Result<_>>()?;
    let mut grid = ExperimentGrid::default();
    for (run, (net, history, row)) in runs.iter().zip(results) {
        art.write_with(&run.model_path(), |buf| nn::save_checkpoint(&net, buf))?;
        art.write_with(&run.history_path(), |buf| nn::write_history(&history, buf))?;
        grid.push(row)?;
    }
    art.write(GRID, tables::grid_csv(&grid).as_bytes())
}

fn evaluate_stage(c: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    let data = TrainingData::load(c, art)?;
    let x_test = &data.matrix.rows[data.split..];
    let planted = load_planted(art)?;
    let planted_test: Option<Vec<usize>> = planted
        .as_ref()
        .map(|p| {
            data.matrix.row_doc_index[data.split..]
                .iter()
                .map(|&d| {
                    let id = &data.corpus.documents[d].id;
                    p.get(id).map(|s| s.index()).ok_or_else(|| {
                        Error::Data(format!("document {id} has no planted label"))
                    })
                })
                .collect::<Result<Vec<usize>>>()
        })
        .transpose()?;
    let mut planted_csv = String::from("run,architecture,dropout_rate,test_acc_planted\n");
    for run in planned_runs(&c.train) {
        let file = run.model_path();
        let net = nn::load_checkpoint::<f64, _>(art.reader(&file)?, &file)?;
        let pred = nn::predict(&net.network, x_test)?;
        let (y, n_classes) = data.targets(run.task);
        let names = data.class_names(run.task);
        let cm = confusion_matrix(&y[data.split..], &pred.classes, n_classes)?;
        let report = classification_report(&cm, &names);
        let mut text = format!(
            "{} ({}, dropout {}), {} test rows\n\n",
            run.task,
            tables::model_name(run.architecture),
            run.dropout_rate,
            report.n
        );
        text.push_str(&report.render());
        if let (Task::Sentiment, Some(truth)) = (run.task, &planted_test) {
            let cm = confusion_matrix(truth, &pred.classes, n_classes)?;
            let against = classification_report(&cm, &names);
            text.push_str("\nagainst planted labels\n\n");
            text.push_str(&against.render());
            planted_csv.push_str(&format!(
                "{},{},{},{}\n",
                run.name(),
                run.architecture,
                run.dropout_rate,
                against.accuracy
            ));
        }
        art.write(&run.report_path(), text.as_bytes())?;
    }
    if let Some(p) = &planted {
        // How well the unsupervised labels themselves recover the planted
        // sentiment, over every labeled row.
        let truth: Vec<usize> = data
            .matrix
            .row_doc_index
            .iter()
            .map(|&d| p.get(&data.corpus.documents[d].id).map_or(usize::MAX, |s| s.index()))
            .collect();
        if truth.iter().all(|&t| t != usize::MAX) {
            let cm = confusion_matrix(&truth, &data.sentiment, 3)?;
            let report = classification_report(&cm, &data.class_names(Task::Sentiment));
            let mut text = String::from("cluster-derived labels against planted labels (rows = planted)\n\n");
            text.push_str(&report.render());
            art.write("reports/label_agreement.txt", text.as_bytes())?;
        }
        art.write(PLANTED_ACCURACY, planted_csv.as_bytes())?;
    }
    Ok(())
}

fn report_stage(c: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    let grid = tables::read_grid_csv(art.reader(GRID)?, GRID)?;
    let t = &c.train;
    let mut tasks = vec![Task::Sentiment];
    if t.classification {
        tasks.push(Task::Classification);
    }
    let table2 = tables::task_table(&grid, t.primary_architecture, t.primary_dropout, &tasks)?;
    let table3 = tables::regularization_table(&grid, &t.architectures, &t.dropout_rates, Task::Sentiment)?;
    art.write("tables/table2.txt", table2.to_ascii().as_bytes())?;
    art.write("tables/table2.csv", table2.to_csv().as_bytes())?;
    art.write("tables/table3.txt", table3.to_ascii().as_bytes())?;
    art.write("tables/table3.csv", table3.to_csv().as_bytes())?;

    for &arch in &t.architectures {
        let series = t
            .dropout_rates
            .iter()
            .map(|&d| {
                let run = RunKey {
                    task: Task::Sentiment,
                    architecture: arch,
                    dropout_rate: d,
                };
                let file = run.history_path();
                let h = nn::read_history(art.reader(&file)?, &file)?;
                Ok((format!("{} dropout {d}", tables::model_name(arch)), h))
            })
            .collect::<Result<Vec<_>>>()?;
        let svg = plot::render_curves(
            &series,
            &format!("{}: training and validation by dropout rate", tables::model_name(arch)),
        )?;
        art.write(&format!("figures/curves_{arch}.svg"), svg.as_bytes())?;
    }

    if c.tsne.enabled {
        let corpus = load_corpus(art)?;
        let matrix = load_matrix(art)?;
        let coords = tsne::load_embedding::<f64, _>(art.reader(EMBEDDING)?)?;
        let categories = labels::category_labels(&corpus, &matrix.row_doc_index)?;
        let svg = plot::render_scatter(&coords, &categories, &corpus.categories, "t-SNE by category")?;
        art.write("figures/tsne_categories.svg", svg.as_bytes())?;
        let k = c.label.k;
        let (_, assignments) = kmeans::load_model::<f64, _>(art.reader(&kmeans_model_path(k))?)?;
        let names: Vec<String> = (0..k).map(|i| format!("cluster {i}")).collect();
        let svg = plot::render_scatter(
            &coords,
            &assignments,
            &names,
            &format!("k-means (k = {k}) clusters in t-SNE space"),
        )?;
        art.write("figures/tsne_kmeans.svg", svg.as_bytes())?;
    }

    if c.lda.enabled {
        for &k in &c.lda.k {
            let file = lda_terms_path(k);
            let topics = read_top_terms(art.reader(&file)?, &file)?;
            let svg = plot::render_topic_bars(
                &topics,
                &format!("Top {} terms per LDA topic (K = {k})", c.lda.top_terms),
            )?;
            art.write(&format!("figures/lda_topics_k{k}.svg"), svg.as_bytes())?;
        }
    }
    Ok(())
}

/// Planted-label test accuracy per sentiment run, from
/// `reports/planted_accuracy.csv`.
pub fn read_planted_accuracy<R: BufRead>(reader: R) -> Result<Vec<(RunKey, f64)>> {
    let file = PLANTED_ACCURACY;
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate().skip(1) {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = || Error::parse(file, i + 1, "expected run,architecture,dropout_rate,accuracy");
        let f: Vec<&str> = line.split(',').collect();
        let [_, arch, dropout, acc] = f.as_slice() else {
            return Err(bad());
        };
        out.push((
            RunKey {
                task: Task::Sentiment,
                architecture: arch.parse().map_err(|_| bad())?,
                dropout_rate: dropout.parse().map_err(|_| bad())?,
            },
            acc.parse().map_err(|_| bad())?,
        ));
    }
    Ok(out)
}
