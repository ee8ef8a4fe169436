use std::path::Path;

use postlabel::error::Error;
use postlabel::labels::read_labels;
use postlabel::pipeline::{self, run_all, run_stage, Manifest, PipelineConfig, Stage, MANIFEST_FILE};

/// A complete but small synthetic run: every stage executes, with reduced
/// iteration counts.
fn small_config(out: &Path, seed: u64) -> PipelineConfig {
    let text = format!(
        r#"
[pipeline]
seed = {seed}
out_dir = "{}"

[synth]
n_docs_per_category = 40
noise_fraction = 0.2

[tsne]
perplexity = 20.0
n_iter = 300

[lda]
sweeps = 60
burn_in = 40

[label]
rule = "vocabulary_vote"

[train]
epochs = 4
"#,
        out.display()
    );
    PipelineConfig::from_toml(&text, Path::new(".")).unwrap()
}

fn manifest_text(out: &Path) -> String {
    std::fs::read_to_string(out.join(MANIFEST_FILE)).unwrap()
}

#[test]
fn synthetic_run_is_complete_and_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let m1 = run_all(&small_config(a.path(), 5)).unwrap();
    let m2 = run_all(&small_config(b.path(), 5)).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(manifest_text(a.path()), manifest_text(b.path()));

    let paths: Vec<&str> = m1.entries.keys().map(String::as_str).collect();
    assert!(paths.len() >= 12, "{paths:?}");
    for needed in [
        "tfidf.txt",
        "kmeans/k8.txt",
        "kmeans/k3.txt",
        "kmeans/k2.txt",
        "tsne/embedding.txt",
        "lda/k8.txt",
        "lda/k3.txt",
        "lda/k2.txt",
        "labels/sentiment.tsv",
        "models/sentiment_dnn_d30.net",
        "models/sentiment_cnn1d_d60.net",
        "models/classification_dnn_d30.net",
        "reports/sentiment_dnn_d0.txt",
        "reports/planted_accuracy.csv",
        "tables/table2.txt",
        "tables/table3.csv",
        "figures/tsne_categories.svg",
        "figures/tsne_kmeans.svg",
        "figures/lda_topics_k8.svg",
        "figures/curves_cnn1d.svg",
    ] {
        assert!(paths.contains(&needed), "missing {needed}");
    }
    // The manifest on disk matches the files.
    let parsed = Manifest::parse(manifest_text(a.path()).as_bytes()).unwrap();
    for (rel, hash) in &parsed.entries {
        let bytes = std::fs::read(a.path().join(rel)).unwrap();
        assert_eq!(&pipeline::sha256_hex(&bytes), hash, "{rel}");
    }

    let table3 = std::fs::read_to_string(a.path().join("tables/table3.txt")).unwrap();
    assert_eq!(table3.lines().count(), 2 + 6);

    // A different seed changes the outputs.
    let c = tempfile::tempdir().unwrap();
    let m3 = run_all(&small_config(c.path(), 6)).unwrap();
    assert_ne!(m1.entries.get("corpus.jsonl"), m3.entries.get("corpus.jsonl"));
}

#[test]
fn missing_input_fails_in_ingest_with_partial_manifest() {
    let out = tempfile::tempdir().unwrap();
    let text = format!(
        "[pipeline]\nout_dir = \"{}\"\n\n[[ingest.inputs]]\npath = \"does/not/exist.jsonl\"\nsource = \"twitter\"\ncategory = \"botox\"\n",
        out.path().display()
    );
    let config = PipelineConfig::from_toml(&text, out.path()).unwrap();
    let err = run_all(&config).unwrap_err();
    assert!(err.to_string().contains("[ingest]"), "{err}");
    assert_eq!(err.exit_code(), 1);
    let manifest = Manifest::parse(manifest_text(out.path()).as_bytes()).unwrap();
    assert_eq!(manifest.failed_stage.as_deref(), Some("ingest"));
    assert!(manifest.entries.is_empty());
}

#[test]
fn stages_can_run_one_at_a_time() {
    let out = tempfile::tempdir().unwrap();
    let mut config = small_config(out.path(), 9);
    config.tsne.enabled = false;
    config.lda.enabled = false;
    config.kmeans.k = vec![8];
    config.train.architectures = vec![postlabel::nn::Architecture::Dnn];
    config.train.dropout_rates = vec![0.3];
    config.train.classification = false;

    // Labeling before vectorizing names the missing file.
    run_stage(Stage::Ingest, &config).unwrap();
    let err = run_stage(Stage::Label, &config).unwrap_err();
    assert!(matches!(err, Error::Stage { ref stage, .. } if stage == "label"));
    assert!(err.to_string().contains("tfidf.txt"), "{err}");

    for stage in [
        Stage::Preprocess,
        Stage::Vectorize,
        Stage::Cluster,
        Stage::Embed,
        Stage::Topics,
        Stage::Label,
        Stage::Train,
        Stage::Evaluate,
        Stage::Report,
    ] {
        run_stage(stage, &config).unwrap();
    }
    let manifest = Manifest::parse(manifest_text(out.path()).as_bytes()).unwrap();
    assert!(manifest.failed_stage.is_none());
    assert!(manifest.entries.contains_key("corpus.jsonl"));
    assert!(manifest.entries.contains_key("tables/table2.txt"));
    assert!(!manifest.entries.keys().any(|k| k.starts_with("tsne/")));
}

#[test]
fn test_split_preserves_class_proportions() {
    let out = tempfile::tempdir().unwrap();
    let mut config = small_config(out.path(), 3);
    config.synth.as_mut().unwrap().n_docs_per_category = 250;
    for stage in [Stage::Ingest, Stage::Preprocess, Stage::Vectorize] {
        run_stage(stage, &config).unwrap();
    }
    config.kmeans.k = vec![8];
    run_stage(Stage::Cluster, &config).unwrap();
    run_stage(Stage::Label, &config).unwrap();

    let f = std::fs::File::open(out.path().join(pipeline::SENTIMENT_LABELS)).unwrap();
    let labels = read_labels(std::io::BufReader::new(f)).unwrap().labels;
    let split = pipeline::split_point(labels.len(), config.train.test_fraction).unwrap();
    for s in postlabel::labels::Sentiment::ALL {
        let total = labels.iter().filter(|&&l| l == s).count();
        let in_test = labels[split..].iter().filter(|&&l| l == s).count();
        let fraction = in_test as f64 / total as f64;
        assert!((fraction - 0.2).abs() <= 0.10, "{s}: {in_test}/{total}");
    }
}
