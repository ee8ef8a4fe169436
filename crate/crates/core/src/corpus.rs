//! Corpus ingestion: JSON-lines parsing, merging, shuffling, and synthetic
//! corpora with planted sentiment.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::labels::Sentiment;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Reddit,
    Twitter,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Reddit => "reddit",
            Source::Twitter => "twitter",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reddit" => Ok(Source::Reddit),
            "twitter" => Ok(Source::Twitter),
            other => Err(Error::Data(format!("unknown source {other:?}"))),
        }
    }
}

/// One social-media post.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub source: Source,
    pub category: String,
    pub title: String,
    pub body: String,
    text: String,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        source: Source,
        category: impl Into<String>,
        title: impl Into<String>,
        body: impl Into<String>,
    ) -> Self {
        let title = title.into();
        let body = body.into();
        let text = join_text(&title, &body);
        Document {
            id: id.into(),
            source,
            category: category.into(),
            title,
            body,
            text,
        }
    }

    /// Title and body joined by one space, trimmed.
    pub fn text(&self) -> &str {
        &self.text
    }

    fn key(&self) -> (Source, &str) {
        (self.source, self.id.as_str())
    }
}

fn join_text(title: &str, body: &str) -> String {
    let (t, b) = (title.trim(), body.trim());
    match (t.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => t.to_string(),
        _ => format!("{t} {b}"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub documents: Vec<Document>,
    /// Distinct categories in first-appearance order.
    pub categories: Vec<String>,
    /// Seed of the last shuffle, if any.
    pub seed: Option<u64>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn category_index(&self, category: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == category)
    }
}

fn categories_of(docs: &[Document]) -> Vec<String> {
    let mut seen = HashSet::new();
    docs.iter()
        .filter(|d| seen.insert(d.category.as_str()))
        .map(|d| d.category.clone())
        .collect()
}

/// Logical field → JSON path (dot-separated object keys) for one source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldMap {
    pub id: String,
    #[serde(default)]
    pub category: Option<String>,
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub body: Option<String>,
}

impl FieldMap {
    /// snscrape Reddit submissions.
    pub fn reddit() -> Self {
        FieldMap {
            id: "id".into(),
            category: Some("subreddit".into()),
            title: Some("title".into()),
            body: Some("selftext".into()),
        }
    }

    /// snscrape tweets; the category normally comes from the input entry
    /// (one file per hashtag).
    pub fn twitter() -> Self {
        FieldMap {
            id: "id".into(),
            category: None,
            title: None,
            body: Some("content".into()),
        }
    }

    /// The canonical corpus file written by [`write_jsonl`].
    pub fn canonical() -> Self {
        FieldMap {
            id: "id".into(),
            category: Some("category".into()),
            title: Some("title".into()),
            body: Some("body".into()),
        }
    }

    pub fn default_for(source: Source) -> Self {
        match source {
            Source::Reddit => Self::reddit(),
            Source::Twitter => Self::twitter(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOutcome {
    pub documents: Vec<Document>,
    pub skipped: usize,
}

fn lookup<'a>(value: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(value, |v, key| v.get(key))
}

/// Reads a scalar JSON value as a string. `null` and absent become `None`.
fn scalar_string(value: Option<&Value>) -> Option<String> {
    match value? {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Parses one JSON object per line into documents.
///
/// Lines that are not JSON objects, or that lack a non-empty id or category,
/// are skipped and counted. Blank lines are ignored. `fixed_category` is used
/// when the field map has no category path or the path is absent.
pub fn parse_jsonl<R: BufRead>(
    reader: R,
    source: Source,
    fields: &FieldMap,
    fixed_category: Option<&str>,
) -> Result<ParseOutcome> {
    let mut documents = Vec::new();
    let mut skipped = 0;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = match serde_json::from_str(&line) {
            Ok(v @ Value::Object(_)) => v,
            _ => {
                skipped += 1;
                continue;
            }
        };
        let id = scalar_string(lookup(&value, &fields.id)).filter(|s| !s.is_empty());
        let category = fields
            .category
            .as_deref()
            .and_then(|p| scalar_string(lookup(&value, p)))
            .or_else(|| fixed_category.map(str::to_string))
            .filter(|s| !s.is_empty());
        let (Some(id), Some(category)) = (id, category) else {
            skipped += 1;
            continue;
        };
        let field = |path: &Option<String>| {
            path.as_deref()
                .and_then(|p| scalar_string(lookup(&value, p)))
                .unwrap_or_default()
        };
        documents.push(Document::new(
            id,
            source,
            category,
            field(&fields.title),
            field(&fields.body),
        ));
    }
    if documents.is_empty() {
        return Err(Error::empty("parse_jsonl: zero well-formed lines"));
    }
    Ok(ParseOutcome { documents, skipped })
}

/// Reads a canonical corpus file (keys id, source, category, title, body).
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CanonicalRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse("corpus", i + 1, e.to_string()))?;
        if rec.id.is_empty() || rec.category.is_empty() {
            return Err(Error::parse("corpus", i + 1, "empty id or category"));
        }
        docs.push(Document::new(
            rec.id,
            rec.source,
            rec.category,
            rec.title.unwrap_or_default(),
            rec.body.unwrap_or_default(),
        ));
    }
    merge_corpora(vec![docs])
}

#[derive(Serialize, Deserialize)]
struct CanonicalRecord {
    id: String,
    source: Source,
    category: String,
    title: Option<String>,
    body: Option<String>,
}

/// Writes the canonical corpus file, one object per line with exactly the
/// keys id, source, category, title, body.
pub fn write_jsonl<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    for d in &corpus.documents {
        let rec = CanonicalRecord {
            id: d.id.clone(),
            source: d.source,
            category: d.category.clone(),
            title: Some(d.title.clone()),
            body: Some(d.body.clone()),
        };
        serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Concatenates parts in order, keeping the first document for each
/// (source, id).
pub fn merge_corpora(parts: Vec<Vec<Document>>) -> Result<Corpus> {
    let mut seen = HashSet::new();
    let mut documents = Vec::new();
    for doc in parts.into_iter().flatten() {
        if seen.insert((doc.key().0, doc.key().1.to_string())) {
            documents.push(doc);
        }
    }
    if documents.is_empty() {
        return Err(Error::empty("merge_corpora: all parts empty"));
    }
    let categories = categories_of(&documents);
    Ok(Corpus {
        documents,
        categories,
        seed: None,
    })
}

/// Permutes documents with [`rng::SeededRng`]. The category list is kept as
/// built at merge time so category indices stay stable across shuffles.
pub fn shuffle(corpus: &Corpus, seed: u64) -> Corpus {
    let mut documents = corpus.documents.clone();
    documents.shuffle(&mut rng::seeded(seed));
    Corpus {
        documents,
        categories: corpus.categories.clone(),
        seed: Some(seed),
    }
}

/// Three disjoint sentiment vocabularies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentimentVocabularies {
    pub negative: Vec<String>,
    pub neutral: Vec<String>,
    pub positive: Vec<String>,
}

impl SentimentVocabularies {
    pub fn get(&self, s: Sentiment) -> &[String] {
        match s {
            Sentiment::Negative => &self.negative,
            Sentiment::Neutral => &self.neutral,
            Sentiment::Positive => &self.positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySpec {
    pub name: String,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_docs_per_category: usize,
    pub categories: Vec<CategorySpec>,
    pub vocabularies: SentimentVocabularies,
    /// Inclusive token-count range per document.
    pub doc_length: (usize, usize),
    pub noise_vocab: Vec<String>,
    pub noise_fraction: f64,
    pub seed: u64,
}

const NEGATIVE_TERMS: &[&str] = &[
    "botch", "regret", "ruin", "scar", "infect", "swollen", "lump", "pain", "disaster", "horror",
    "ugly", "damage", "lawsuit", "mistake", "deform", "nightmare", "awful", "terrible", "butcher",
    "fail", "worst", "sue", "wrong", "hurt", "bruise", "droop", "addict", "stubborn", "remove",
    "evil",
];
const NEUTRAL_TERMS: &[&str] = &[
    "clinic", "consult", "appoint", "procedure", "doctor", "surgeon", "cost", "price", "week",
    "month", "inject", "filler", "unit", "dose", "ml", "schedule", "insurance", "question",
    "photo", "nurse", "hospital", "anesthesia", "stitch", "bandage", "measure", "implant",
    "tissue", "20", "50", "100",
];
const POSITIVE_TERMS: &[&str] = &[
    "love", "gorgeous", "beautiful", "amaze", "happy", "confident", "glow", "thank", "grateful",
    "fabulous", "stun", "perfect", "recommend", "best", "smooth", "great", "excite", "proud",
    "wonderful", "favorite", "motivate", "comfort", "heal", "fresh", "young", "glad", "dream",
    "goal", "bless", "gratitude",
];
const NOISE_TERMS: &[&str] = &[
    "today", "time", "people", "thing", "look", "make", "year", "really", "know", "think",
    "want", "get", "go", "see", "say", "come", "take", "way", "friend", "home", "work", "life",
    "world", "city", "game", "music", "food", "coffee", "weather", "movie", "book", "car",
    "phone", "school", "night", "morning", "weekend", "family", "dog", "cat",
];

/// Categories of the studied corpus: three subreddits and five hashtags.
pub const STUDY_CATEGORIES: &[(&str, Source)] = &[
    ("PlasticSurgery", Source::Reddit),
    ("CosmeticSurgery", Source::Reddit),
    ("BotchedSurgeries", Source::Reddit),
    ("plasticsurgery", Source::Twitter),
    ("liposuction", Source::Twitter),
    ("lipinjections", Source::Twitter),
    ("botox", Source::Twitter),
    ("nosejob", Source::Twitter),
];

fn owned(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

impl SyntheticSpec {
    /// Eight study-like categories with the built-in vocabularies.
    pub fn study_like(n_docs_per_category: usize, noise_fraction: f64, seed: u64) -> Self {
        SyntheticSpec {
            n_docs_per_category,
            categories: STUDY_CATEGORIES
                .iter()
                .map(|&(name, source)| CategorySpec {
                    name: name.to_string(),
                    source,
                })
                .collect(),
            vocabularies: SentimentVocabularies {
                negative: owned(NEGATIVE_TERMS),
                neutral: owned(NEUTRAL_TERMS),
                positive: owned(POSITIVE_TERMS),
            },
            doc_length: (8, 20),
            noise_vocab: owned(NOISE_TERMS),
            noise_fraction,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config("synth", m));
        if self.n_docs_per_category == 0 {
            return bad("n_docs_per_category must be positive".into());
        }
        if self.categories.is_empty() {
            return bad("no categories".into());
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return bad(format!("noise_fraction {} not in [0,1)", self.noise_fraction));
        }
        let (lo, hi) = self.doc_length;
        if lo == 0 || lo > hi {
            return bad(format!("doc_length ({lo}, {hi}) invalid"));
        }
        let v = &self.vocabularies;
        let lists: [(&str, &[String]); 4] = [
            ("negative", &v.negative),
            ("neutral", &v.neutral),
            ("positive", &v.positive),
            ("noise", &self.noise_vocab),
        ];
        for (name, list) in &lists[..3] {
            if list.is_empty() {
                return bad(format!("{name} vocabulary empty"));
            }
        }
        if self.noise_fraction > 0.0 && self.noise_vocab.is_empty() {
            return bad("noise_fraction > 0 with empty noise vocabulary".into());
        }
        let mut owner = std::collections::HashMap::new();
        for (name, list) in lists {
            for w in list {
                if let Some(prev) = owner.insert(w.as_str(), name) {
                    if prev != name {
                        return bad(format!("term {w:?} in both {prev} and {name} vocabularies"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Generates a corpus whose documents each draw their sentiment-bearing
/// tokens from one planted vocabulary. Returns the planted label per document.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Corpus, Vec<Sentiment>)> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed);
    let mut docs = Vec::with_capacity(spec.n_docs_per_category * spec.categories.len());
    let mut planted = Vec::with_capacity(docs.capacity());
    for cat in &spec.categories {
        for i in 0..spec.n_docs_per_category {
            let sentiment = Sentiment::ALL[rng.random_range(0..3)];
            let vocab = spec.vocabularies.get(sentiment);
            let len = rng.random_range(spec.doc_length.0..=spec.doc_length.1);
            let n_noise = (len as f64 * spec.noise_fraction).round() as usize;
            let mut tokens: Vec<&str> = (0..len - n_noise.min(len))
                .map(|_| vocab[rng.random_range(0..vocab.len())].as_str())
                .collect();
            for _ in 0..n_noise.min(len) {
                tokens.push(&spec.noise_vocab[rng.random_range(0..spec.noise_vocab.len())]);
            }
            tokens.shuffle(&mut rng);
            let (title, body) = match cat.source {
                Source::Reddit => {
                    let cut = tokens.len().min(3);
                    (tokens[..cut].join(" "), tokens[cut..].join(" "))
                }
                Source::Twitter => (String::new(), tokens.join(" ")),
            };
            docs.push(Document::new(
                format!("{}-{:05}", cat.name, i),
                cat.source,
                cat.name.clone(),
                title,
                body,
            ));
            planted.push(sentiment);
        }
    }
    let corpus = merge_corpora(vec![docs])?;
    Ok((corpus, planted))
}
