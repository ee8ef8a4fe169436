//! Text normalization: lowercase, strip non-ASCII and punctuation, tokenize,
//! drop stopwords, Porter-stem, and remove duplicate documents.

mod porter;
mod stopwords;

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rayon::prelude::*;

pub use porter::porter_stem;
pub use stopwords::{StopwordList, CLASSIC_ENGLISH_TAG};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDoc {
    /// Index of the source document in the corpus.
    pub doc_index: usize,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub stopwords: StopwordList,
    /// Stemmed tokens shorter than this are dropped.
    pub min_token_length: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            stopwords: StopwordList::classic_english(),
            min_token_length: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preprocessed {
    pub docs: Vec<TokenizedDoc>,
    /// Documents with no tokens left after processing.
    pub dropped_empty: Vec<usize>,
    /// Documents whose token sequence repeats an earlier document's.
    pub dropped_duplicate: Vec<usize>,
}

/// Lowercases, deletes every non-ASCII codepoint, turns remaining
/// non-alphanumeric characters into spaces and collapses whitespace.
pub fn normalize_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for c in raw.chars().filter(char::is_ascii) {
        if c.is_ascii_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c.to_ascii_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

pub fn tokenize(normalized: &str) -> Vec<String> {
    normalized
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn remove_stopwords(tokens: Vec<String>, list: &StopwordList) -> Vec<String> {
    tokens.into_iter().filter(|t| !list.contains(t)).collect()
}

/// Full per-document pipeline on one text.
///
/// Stopwords are removed before stemming; stems that happen to coincide with
/// a stopword ("cans" → "can") are removed as well, so no output token is on
/// the list.
pub fn process_text(text: &str, config: &PreprocessConfig) -> Vec<String> {
    remove_stopwords(tokenize(&normalize_text(text)), &config.stopwords)
        .iter()
        .map(|t| porter_stem(t))
        .filter(|t| t.len() >= config.min_token_length && !config.stopwords.contains(t))
        .collect()
}

/// Runs the pipeline over every document, then drops empty documents and
/// later repeats of an identical token sequence.
pub fn preprocess_corpus(corpus: &Corpus, config: &PreprocessConfig) -> Result<Preprocessed> {
    if corpus.is_empty() {
        return Err(Error::empty("preprocess: corpus"));
    }
    let processed: Vec<Vec<String>> = corpus
        .documents
        .par_iter()
        .map(|d| process_text(d.text(), config))
        .collect();

    let mut seen: HashSet<&[String]> = HashSet::new();
    let mut out = Preprocessed {
        docs: Vec::new(),
        dropped_empty: Vec::new(),
        dropped_duplicate: Vec::new(),
    };
    for (i, tokens) in processed.iter().enumerate() {
        if tokens.is_empty() {
            out.dropped_empty.push(i);
        } else if !seen.insert(tokens.as_slice()) {
            out.dropped_duplicate.push(i);
        } else {
            out.docs.push(TokenizedDoc {
                doc_index: i,
                tokens: tokens.clone(),
            });
        }
    }
    if out.docs.is_empty() {
        return Err(Error::empty("preprocess: every document empty after processing"));
    }
    Ok(out)
}

/// Writes `doc_index TAB tokens` lines.
pub fn write_tokenized<W: Write>(docs: &[TokenizedDoc], mut out: W) -> Result<()> {
    for d in docs {
        writeln!(out, "{}\t{}", d.doc_index, d.tokens.join(" "))?;
    }
    Ok(())
}

pub fn read_tokenized<R: BufRead>(reader: R) -> Result<Vec<TokenizedDoc>> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (idx, toks) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse("tokens", i + 1, "missing TAB"))?;
        let doc_index = idx
            .parse()
            .map_err(|_| Error::parse("tokens", i + 1, format!("bad doc index {idx:?}")))?;
        docs.push(TokenizedDoc {
            doc_index,
            tokens: tokenize(toks),
        });
    }
    Ok(docs)
}
