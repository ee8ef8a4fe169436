//! Unigram vocabulary and L2-normalized sparse TF-IDF rows.
//!
//! Weights use raw term counts and the smoothed inverse document frequency
//! `ln((1 + N) / (1 + df)) + 1`; each row is then scaled to unit Euclidean
//! norm. Columns are the vocabulary in lexicographic order.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::preprocess::TokenizedDoc;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    /// Number of documents the frequencies were counted over.
    pub n_docs: usize,
}

impl Vocabulary {
    /// Builds from parallel term / document-frequency lists. Terms are sorted
    /// here, so input order does not matter.
    pub fn from_parts(terms: Vec<String>, doc_freq: Vec<usize>, n_docs: usize) -> Result<Self> {
        if terms.len() != doc_freq.len() {
            return Err(Error::Data("terms and doc_freq lengths differ".into()));
        }
        let n_terms = terms.len();
        let sorted: BTreeMap<String, usize> = terms.into_iter().zip(doc_freq).collect();
        if sorted.len() != n_terms {
            return Err(Error::Data("duplicate vocabulary term".into()));
        }
        let (terms, doc_freq): (Vec<String>, Vec<usize>) = sorted.into_iter().unzip();
        if let Some(&bad) = doc_freq.iter().find(|&&df| df == 0 || df > n_docs.max(1)) {
            return Err(Error::Data(format!("document frequency {bad} outside [1, {n_docs}]")));
        }
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect::<HashMap<_, _>>();
        Ok(Vocabulary {
            terms,
            index,
            doc_freq,
            n_docs,
        })
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self) -> &[usize] {
        &self.doc_freq
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, column: usize) -> &str {
        &self.terms[column]
    }

    /// Writes `term TAB doc_freq` lines in column order.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for (t, df) in self.terms.iter().zip(&self.doc_freq) {
            writeln!(out, "{t}\t{df}")?;
        }
        Ok(())
    }

    /// Reads a vocabulary file; `n_docs` is not stored in the file.
    pub fn read<R: BufRead>(reader: R, n_docs: usize) -> Result<Self> {
        let mut terms = Vec::new();
        let mut dfs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (t, df) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse("vocabulary", i + 1, "missing TAB"))?;
            terms.push(t.to_string());
            dfs.push(
                df.parse()
                    .map_err(|_| Error::parse("vocabulary", i + 1, "bad doc_freq"))?,
            );
        }
        Self::from_parts(terms, dfs, n_docs)
    }
}

/// Counts document frequencies and keeps terms with
/// `min_df <= df <= max_df_fraction * N`.
pub fn build_vocabulary(
    docs: &[TokenizedDoc],
    min_df: usize,
    max_df_fraction: f64,
) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::empty("build_vocabulary: docs"));
    }
    let n = docs.len();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for d in docs {
        let mut seen: Vec<&str> = d.tokens.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    let max_df = max_df_fraction * n as f64;
    let (terms, dfs): (Vec<String>, Vec<usize>) = df
        .into_iter()
        .filter(|&(_, c)| c >= min_df && (c as f64) <= max_df)
        .map(|(t, c)| (t.to_string(), c))
        .unzip();
    if terms.is_empty() {
        return Err(Error::Data(format!(
            "empty vocabulary with min_df = {min_df}, max_df_fraction = {max_df_fraction}"
        )));
    }
    Vocabulary::from_parts(terms, dfs, n)
}

/// Smoothed idf per vocabulary column.
pub fn idf<T: Scalar>(vocab: &Vocabulary, n_docs: usize) -> Vec<T> {
    let n1 = T::of_usize(n_docs + 1);
    vocab
        .doc_freq
        .iter()
        .map(|&df| (n1 / T::of_usize(df + 1)).ln() + T::one())
        .collect()
}

/// One sparse row: strictly increasing column ids with positive weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow<T> {
    pub cols: Vec<usize>,
    pub vals: Vec<T>,
}

impl<T: Scalar> SparseRow<T> {
    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.cols.iter().copied().zip(self.vals.iter().copied())
    }

    pub fn norm(&self) -> T {
        self.vals.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn dot(&self, other: &SparseRow<T>) -> T {
        let (mut i, mut j) = (0, 0);
        let mut acc = T::zero();
        while i < self.cols.len() && j < other.cols.len() {
            match self.cols[i].cmp(&other.cols[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.vals[i] * other.vals[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn dot_dense(&self, dense: &[T]) -> T {
        let mut acc = T::zero();
        for (c, v) in self.iter() {
            acc += v * dense[c];
        }
        acc
    }

    /// Writes the row into a zeroed dense buffer.
    pub fn scatter(&self, dense: &mut [T]) {
        for (c, v) in self.iter() {
            dense[c] = v;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfMatrix<T> {
    pub n_cols: usize,
    pub rows: Vec<SparseRow<T>>,
    /// Corpus document index of each row.
    pub row_doc_index: Vec<usize>,
}

impl<T: Scalar> TfidfMatrix<T> {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn dense_row(&self, i: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_cols];
        self.rows[i].scatter(&mut out);
        out
    }

    /// Keeps the listed rows, in the listed order.
    pub fn select(&self, rows: &[usize]) -> Self {
        TfidfMatrix {
            n_cols: self.n_cols,
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
            row_doc_index: rows.iter().map(|&i| self.row_doc_index[i]).collect(),
        }
    }

    pub fn empty_rows(&self) -> Vec<usize> {
        (0..self.rows.len()).filter(|&i| self.rows[i].is_empty()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vectorized<T> {
    pub matrix: TfidfMatrix<T>,
    /// Rows (positions in the input) with no in-vocabulary token.
    pub empty_rows: Vec<usize>,
}

/// Raw counts × idf, then L2 row normalization. Out-of-vocabulary tokens are
/// ignored; rows left with nothing are kept empty and reported.
pub fn vectorize<T: Scalar>(docs: &[TokenizedDoc], vocab: &Vocabulary) -> Vectorized<T> {
    let idf: Vec<T> = idf(vocab, vocab.n_docs);
    let rows: Vec<SparseRow<T>> = docs
        .par_iter()
        .map(|d| {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for t in &d.tokens {
                if let Some(c) = vocab.column(t) {
                    *counts.entry(c).or_default() += 1;
                }
            }
            let mut row = SparseRow {
                cols: Vec::with_capacity(counts.len()),
                vals: Vec::with_capacity(counts.len()),
            };
            for (c, n) in counts {
                row.cols.push(c);
                row.vals.push(T::of_usize(n) * idf[c]);
            }
            let norm = row.norm();
            if norm > T::zero() {
                for v in &mut row.vals {
                    *v /= norm;
                }
            }
            row
        })
        .collect();
    let empty_rows = (0..rows.len()).filter(|&i| rows[i].is_empty()).collect();
    Vectorized {
        matrix: TfidfMatrix {
            n_cols: vocab.len(),
            rows,
            row_doc_index: docs.iter().map(|d| d.doc_index).collect(),
        },
        empty_rows,
    }
}

const MATRIX_MAGIC: &str = "TFIDF v1";

pub fn save_matrix<T: Scalar, W: Write>(m: &TfidfMatrix<T>, mut out: W) -> Result<()> {
    writeln!(out, "{MATRIX_MAGIC} {} {}", m.n_rows(), m.n_cols)?;
    for (row, doc) in m.rows.iter().zip(&m.row_doc_index) {
        write!(out, "{doc}")?;
        for (c, v) in row.iter() {
            write!(out, " {c}:{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn load_matrix<T: Scalar, R: BufRead>(reader: R) -> Result<TfidfMatrix<T>> {
    let file = "tfidf matrix";
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::parse(file, 1, "missing header"))?;
    let dims = header
        .strip_prefix(MATRIX_MAGIC)
        .ok_or_else(|| Error::parse(file, 1, format!("expected {MATRIX_MAGIC:?} header")))?;
    let dims: Vec<usize> = dims
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(file, 1, "bad dimensions"))?;
    let &[n_rows, n_cols] = dims.as_slice() else {
        return Err(Error::parse(file, 1, "expected <n_rows> <n_cols>"));
    };
    let mut rows = Vec::with_capacity(n_rows);
    let mut row_doc_index = Vec::with_capacity(n_rows);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let doc = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(file, lineno, "bad doc index"))?;
        let mut row = SparseRow::default();
        for entry in fields {
            let (c, v) = entry
                .split_once(':')
                .ok_or_else(|| Error::parse(file, lineno, format!("bad entry {entry:?}")))?;
            let c: usize = c
                .parse()
                .map_err(|_| Error::parse(file, lineno, format!("bad column {c:?}")))?;
            let v: T = v
                .parse()
                .map_err(|_| Error::parse(file, lineno, format!("bad weight {v:?}")))?;
            if c >= n_cols {
                return Err(Error::parse(file, lineno, format!("column {c} out of range")));
            }
            if row.cols.last().is_some_and(|&last| last >= c) {
                return Err(Error::parse(file, lineno, "columns not strictly increasing"));
            }
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::parse(file, lineno, format!("non-positive weight {v}")));
            }
            row.cols.push(c);
            row.vals.push(v);
        }
        rows.push(row);
        row_doc_index.push(doc);
    }
    if rows.len() != n_rows {
        return Err(Error::parse(
            file,
            rows.len() + 1,
            format!("header promises {n_rows} rows, found {}", rows.len()),
        ));
    }
    Ok(TfidfMatrix {
        n_cols,
        rows,
        row_doc_index,
    })
}
