//! Cluster → sentiment labeling, category override rules, one-hot targets.
//!
//! The mapping is an input artifact (a TOML file) rather than something
//! derived automatically: on real data it records an analyst's reading of
//! the cluster top terms. [`SentimentMapping::study_default`] carries the
//! outcome recorded for the plastic-surgery corpus.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Column order everywhere: negative, neutral, positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Negative,
    Neutral,
    Positive,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Negative, Sentiment::Neutral, Sentiment::Positive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sentiment::Negative => "negative",
            Sentiment::Neutral => "neutral",
            Sentiment::Positive => "positive",
        }
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sentiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Data(format!("unknown sentiment {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverrideRule {
    pub category: String,
    pub sentiment: Sentiment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentimentMapping {
    pub cluster_to_sentiment: BTreeMap<usize, Sentiment>,
    /// Applied in order; later rules win.
    pub overrides: Vec<OverrideRule>,
}

#[derive(Serialize, Deserialize)]
struct MappingFile {
    mapping: BTreeMap<String, Sentiment>,
    #[serde(default, rename = "override")]
    overrides: Vec<OverrideRule>,
}

impl SentimentMapping {
    /// Clusters 0, 4, 5 negative; 1, 6, 7 neutral; 2, 3 positive; every
    /// BotchedSurgeries post negative.
    pub fn study_default() -> Self {
        use Sentiment::*;
        let table = [
            Negative, Neutral, Positive, Positive, Negative, Negative, Neutral, Neutral,
        ];
        SentimentMapping {
            cluster_to_sentiment: table.into_iter().enumerate().collect(),
            overrides: vec![OverrideRule {
                category: "BotchedSurgeries".into(),
                sentiment: Negative,
            }],
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: MappingFile =
            toml::from_str(text).map_err(|e| Error::config("mapping", e.to_string()))?;
        let mut cluster_to_sentiment = BTreeMap::new();
        for (key, s) in file.mapping {
            let id: usize = key
                .trim()
                .parse()
                .map_err(|_| Error::config("mapping", format!("cluster id {key:?} not an integer")))?;
            if cluster_to_sentiment.insert(id, s).is_some() {
                return Err(Error::config("mapping", format!("cluster {id} mapped twice")));
            }
        }
        Ok(SentimentMapping {
            cluster_to_sentiment,
            overrides: file.overrides,
        })
    }

    pub fn to_toml(&self) -> String {
        let file = MappingFile {
            mapping: self
                .cluster_to_sentiment
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
            overrides: self.overrides.clone(),
        };
        toml::to_string(&file).expect("mapping serializes")
    }

    /// Checks totality over `0..k` and that override categories exist.
    pub fn validate(&self, k: usize, categories: &[String]) -> Result<()> {
        for id in 0..k {
            if !self.cluster_to_sentiment.contains_key(&id) {
                return Err(Error::config("mapping", format!("cluster {id} is unmapped")));
            }
        }
        if let Some((&id, _)) = self.cluster_to_sentiment.range(k..).next() {
            return Err(Error::config(
                "mapping",
                format!("cluster {id} does not exist (k = {k})"),
            ));
        }
        for rule in &self.overrides {
            if !categories.contains(&rule.category) {
                return Err(Error::config(
                    "mapping",
                    format!("override category {:?} not in corpus", rule.category),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Mapping,
    Override,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Mapping => "mapping",
            Provenance::Override => "override",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSet {
    /// Corpus document index per row.
    pub doc_index: Vec<usize>,
    pub labels: Vec<Sentiment>,
    pub provenance: Vec<Provenance>,
}

impl LabeledSet {
    pub fn one_hot<T: Scalar>(&self) -> Vec<[T; 3]> {
        one_hot(&self.labels)
    }
}

/// Labels each clustered row: cluster mapping first, then override rules
/// on the row's category. `row_doc_index` maps rows to corpus documents.
pub fn apply_mapping(
    assignments: &[usize],
    row_doc_index: &[usize],
    corpus: &Corpus,
    mapping: &SentimentMapping,
) -> Result<LabeledSet> {
    if assignments.len() != row_doc_index.len() {
        return Err(Error::Data(format!(
            "{} assignments for {} rows",
            assignments.len(),
            row_doc_index.len()
        )));
    }
    for rule in &mapping.overrides {
        if !corpus.categories.contains(&rule.category) {
            return Err(Error::config(
                "mapping",
                format!("override category {:?} not in corpus", rule.category),
            ));
        }
    }
    let mut labels = Vec::with_capacity(assignments.len());
    let mut provenance = Vec::with_capacity(assignments.len());
    for (&cluster, &doc) in assignments.iter().zip(row_doc_index) {
        let mut label = *mapping
            .cluster_to_sentiment
            .get(&cluster)
            .ok_or_else(|| Error::config("mapping", format!("cluster {cluster} is unmapped")))?;
        let category = &corpus
            .documents
            .get(doc)
            .ok_or_else(|| Error::Data(format!("row refers to missing document {doc}")))?
            .category;
        let mut prov = Provenance::Mapping;
        for rule in &mapping.overrides {
            if &rule.category == category {
                label = rule.sentiment;
                prov = Provenance::Override;
            }
        }
        labels.push(label);
        provenance.push(prov);
    }
    Ok(LabeledSet {
        doc_index: row_doc_index.to_vec(),
        labels,
        provenance,
    })
}

pub fn one_hot<T: Scalar>(labels: &[Sentiment]) -> Vec<[T; 3]> {
    labels
        .iter()
        .map(|s| {
            let mut row = [T::zero(); 3];
            row[s.index()] = T::one();
            row
        })
        .collect()
}

/// One-hot rows for integer classes in `0..n_classes`.
pub fn one_hot_classes<T: Scalar>(classes: &[usize], n_classes: usize) -> Vec<Vec<T>> {
    classes
        .iter()
        .map(|&c| {
            let mut row = vec![T::zero(); n_classes];
            row[c] = T::one();
            row
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassBalance {
    pub counts: [usize; 3],
    pub fractions: [f64; 3],
}

pub fn class_balance(labels: &[Sentiment]) -> Result<ClassBalance> {
    if labels.is_empty() {
        return Err(Error::empty("class_balance: labels"));
    }
    let mut counts = [0usize; 3];
    for s in labels {
        counts[s.index()] += 1;
    }
    let n = labels.len() as f64;
    Ok(ClassBalance {
        counts,
        fractions: counts.map(|c| c as f64 / n),
    })
}

/// Integer category class per row: the category's position in the corpus
/// category list.
pub fn category_labels(corpus: &Corpus, row_doc_index: &[usize]) -> Result<Vec<usize>> {
    row_doc_index
        .iter()
        .map(|&d| {
            let doc = corpus
                .documents
                .get(d)
                .ok_or_else(|| Error::Data(format!("row refers to missing document {d}")))?;
            corpus
                .category_index(&doc.category)
                .ok_or_else(|| Error::Data(format!("category {:?} not listed", doc.category)))
        })
        .collect()
}

/// Writes `doc_index TAB sentiment TAB provenance` lines.
pub fn write_labels<W: Write>(set: &LabeledSet, mut out: W) -> Result<()> {
    for ((d, s), p) in set.doc_index.iter().zip(&set.labels).zip(&set.provenance) {
        writeln!(out, "{d}\t{s}\t{}", p.as_str())?;
    }
    Ok(())
}

pub fn read_labels<R: BufRead>(reader: R) -> Result<LabeledSet> {
    let mut set = LabeledSet {
        doc_index: Vec::new(),
        labels: Vec::new(),
        provenance: Vec::new(),
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = |m: &str| Error::parse("labels", i + 1, m);
        let mut parts = line.split('\t');
        let (Some(d), Some(s), Some(p), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad("expected 3 TAB-separated fields"));
        };
        set.doc_index.push(d.parse().map_err(|_| bad("bad doc index"))?);
        set.labels.push(s.parse().map_err(|_| bad("bad sentiment"))?);
        set.provenance.push(match p {
            "mapping" => Provenance::Mapping,
            "override" => Provenance::Override,
            _ => return Err(bad("bad provenance")),
        });
    }
    Ok(set)
}

/// Maps each cluster to the sentiment vocabulary that carries the most
/// centroid weight among its top terms. For planted synthetic corpora only:
/// the vocabularies stand in for the analyst's reading of the top terms.
/// Clusters matching no vocabulary fall back to neutral.
pub fn vocabulary_vote_mapping(
    cluster_top_terms: &[Vec<(String, f64)>],
    stemmed_vocabularies: &[Vec<String>; 3],
) -> SentimentMapping {
    let cluster_to_sentiment = cluster_top_terms
        .iter()
        .enumerate()
        .map(|(c, terms)| {
            let mut score = [0.0f64; 3];
            for (term, w) in terms {
                for (s, vocab) in stemmed_vocabularies.iter().enumerate() {
                    if vocab.contains(term) {
                        score[s] += w;
                    }
                }
            }
            let best = if score.iter().all(|&x| x == 0.0) {
                Sentiment::Neutral
            } else {
                Sentiment::ALL[crate::scalar::argmax(&score)]
            };
            (c, best)
        })
        .collect();
    SentimentMapping {
        cluster_to_sentiment,
        overrides: Vec::new(),
    }
}
