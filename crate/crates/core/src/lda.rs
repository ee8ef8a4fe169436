//! Latent Dirichlet allocation by collapsed Gibbs sampling.
//!
//! Topic assignments are resampled token by token from
//! `p(z = k | rest) ∝ (n_dk + α)(n_kw + β) / (n_k + Vβ)` with the current
//! token excluded from the counts. The reported topic-term (`phi`) and
//! document-topic (`theta`) distributions are smoothed posterior means
//! averaged over every sweep after burn-in.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use libm::lgamma;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans::ranked_columns;
use crate::preprocess::TokenizedDoc;
use crate::rng::{self, SeededRng};
use crate::scalar::Scalar;
use crate::tfidf::{idf, Vocabulary};

/// What the sampler treats as a document's word occurrences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LdaInput {
    /// Raw token counts over the TF-IDF vocabulary.
    #[default]
    Counts,
    /// `round(tf × idf)` pseudo-counts, i.e. the unnormalized TF-IDF weights
    /// rounded to integers.
    RoundedTfidf,
}

impl FromStr for LdaInput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "counts" => Ok(LdaInput::Counts),
            "rounded_tfidf" => Ok(LdaInput::RoundedTfidf),
            other => Err(Error::config(
                "lda",
                format!("lda_input must be counts or rounded_tfidf, got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaConfig {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub sweeps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub input: LdaInput,
}

impl LdaConfig {
    /// Symmetric priors `1/K`, 1000 sweeps with 800 burn-in.
    pub fn new(k: usize, seed: u64) -> Self {
        let prior = 1.0 / k.max(1) as f64;
        LdaConfig {
            k,
            alpha: prior,
            beta: prior,
            sweeps: 1000,
            burn_in: 800,
            seed,
            input: LdaInput::Counts,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config("lda", m));
        if self.k == 0 {
            return bad("K must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return bad(format!(
                "alpha ({}) and beta ({}) must be positive",
                self.alpha, self.beta
            ));
        }
        if self.burn_in >= self.sweeps {
            return bad(format!(
                "burn_in ({}) must be below sweeps ({})",
                self.burn_in, self.sweeps
            ));
        }
        Ok(())
    }
}

/// Word-id sequences built from tokenized documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdaDocuments {
    pub words: Vec<Vec<usize>>,
    /// Tokens not in the vocabulary.
    pub oov_dropped: usize,
}

pub fn lda_documents(docs: &[TokenizedDoc], vocab: &Vocabulary, input: LdaInput) -> LdaDocuments {
    let mut oov_dropped = 0;
    let mut words: Vec<Vec<usize>> = docs
        .iter()
        .map(|d| {
            let mut ids: Vec<usize> = d.tokens.iter().filter_map(|t| vocab.column(t)).collect();
            oov_dropped += d.tokens.len() - ids.len();
            ids.sort_unstable();
            ids
        })
        .collect();
    if input == LdaInput::RoundedTfidf {
        let weights: Vec<f64> = idf(vocab, vocab.n_docs);
        for ids in &mut words {
            let mut expanded = Vec::new();
            for run in ids.chunk_by(|a, b| a == b) {
                let n = (run.len() as f64 * weights[run[0]]).round() as usize;
                expanded.extend(std::iter::repeat_n(run[0], n));
            }
            *ids = expanded;
        }
    }
    LdaDocuments { words, oov_dropped }
}

/// Topic assignments and the count tables they induce.
#[derive(Debug, Clone)]
pub struct GibbsState {
    pub k: usize,
    pub v: usize,
    pub alpha: f64,
    pub beta: f64,
    pub words: Vec<Vec<usize>>,
    pub z: Vec<Vec<usize>>,
    /// Row-major N×K.
    pub n_dk: Vec<u32>,
    /// Row-major K×V.
    pub n_kw: Vec<u32>,
    pub n_k: Vec<u32>,
    pub oov_dropped: usize,
    rng: SeededRng,
}

impl GibbsState {
    /// Assigns every token a uniformly random topic.
    pub fn from_words(words: Vec<Vec<usize>>, v: usize, config: &LdaConfig) -> Result<Self> {
        config.validate()?;
        if words.iter().all(Vec::is_empty) {
            return Err(Error::empty("lda: no in-vocabulary tokens"));
        }
        if let Some(&w) = words.iter().flatten().find(|&&w| w >= v) {
            return Err(Error::Data(format!("word id {w} outside vocabulary of {v}")));
        }
        let k = config.k;
        let mut rng = rng::seeded(config.seed);
        let mut state = GibbsState {
            k,
            v,
            alpha: config.alpha,
            beta: config.beta,
            z: Vec::with_capacity(words.len()),
            n_dk: vec![0; words.len() * k],
            n_kw: vec![0; k * v],
            n_k: vec![0; k],
            words: Vec::new(),
            oov_dropped: 0,
            rng: rng::seeded(0),
        };
        for (d, doc) in words.iter().enumerate() {
            let zs: Vec<usize> = doc.iter().map(|_| rng.random_range(0..k)).collect();
            for (&w, &t) in doc.iter().zip(&zs) {
                state.n_dk[d * k + t] += 1;
                state.n_kw[t * v + w] += 1;
                state.n_k[t] += 1;
            }
            state.z.push(zs);
        }
        state.words = words;
        state.rng = rng;
        Ok(state)
    }

    pub fn n_docs(&self) -> usize {
        self.words.len()
    }

    pub fn n_tokens(&self) -> usize {
        self.words.iter().map(Vec::len).sum()
    }

    /// Verifies the count tables against the assignments exactly.
    pub fn check_counts(&self) -> Result<()> {
        let (k, v) = (self.k, self.v);
        let mut n_dk = vec![0u32; self.n_docs() * k];
        let mut n_kw = vec![0u32; k * v];
        let mut n_k = vec![0u32; k];
        for (d, (doc, zs)) in self.words.iter().zip(&self.z).enumerate() {
            for (&w, &t) in doc.iter().zip(zs) {
                n_dk[d * k + t] += 1;
                n_kw[t * v + w] += 1;
                n_k[t] += 1;
            }
        }
        let row_sums_ok = (0..k).all(|t| {
            self.n_kw[t * v..(t + 1) * v].iter().map(|&c| c as u64).sum::<u64>() == self.n_k[t] as u64
        }) && (0..self.n_docs()).all(|d| {
            self.n_dk[d * k..(d + 1) * k].iter().map(|&c| c as usize).sum::<usize>()
                == self.words[d].len()
        });
        if n_dk != self.n_dk || n_kw != self.n_kw || n_k != self.n_k || !row_sums_ok {
            return Err(Error::Numeric("lda: count tables out of sync with assignments".into()));
        }
        Ok(())
    }
}

/// Builds word ids from `docs` (dropping out-of-vocabulary tokens) and draws
/// the initial assignments.
pub fn initialize(docs: &[TokenizedDoc], vocab: &Vocabulary, config: &LdaConfig) -> Result<GibbsState> {
    if docs.is_empty() {
        return Err(Error::empty("lda: docs"));
    }
    let built = lda_documents(docs, vocab, config.input);
    if built.oov_dropped > 0 {
        log::info!("lda: dropped {} out-of-vocabulary tokens", built.oov_dropped);
    }
    let mut state = GibbsState::from_words(built.words, vocab.len(), config)?;
    state.oov_dropped = built.oov_dropped;
    Ok(state)
}

/// Resamples every token once, in document then position order.
pub fn gibbs_sweep(state: &mut GibbsState) {
    let (k, v) = (state.k, state.v);
    let v_beta = v as f64 * state.beta;
    let mut weights = vec![0.0f64; k];
    for d in 0..state.words.len() {
        for i in 0..state.words[d].len() {
            let w = state.words[d][i];
            let old = state.z[d][i];
            state.n_dk[d * k + old] -= 1;
            state.n_kw[old * v + w] -= 1;
            state.n_k[old] -= 1;

            let mut total = 0.0;
            for (t, slot) in weights.iter_mut().enumerate() {
                total += (state.n_dk[d * k + t] as f64 + state.alpha)
                    * (state.n_kw[t * v + w] as f64 + state.beta)
                    / (state.n_k[t] as f64 + v_beta);
                *slot = total;
            }
            let u = state.rng.random::<f64>() * total;
            let new = weights.iter().position(|&c| u < c).unwrap_or(k - 1);

            state.z[d][i] = new;
            state.n_dk[d * k + new] += 1;
            state.n_kw[new * v + w] += 1;
            state.n_k[new] += 1;
        }
    }
}

/// Collapsed joint log-likelihood `ln p(w | z) + ln p(z)`.
pub fn log_likelihood(state: &GibbsState) -> f64 {
    let (k, v) = (state.k, state.v);
    let (a, b) = (state.alpha, state.beta);
    let mut ll = 0.0;
    for t in 0..k {
        ll += lgamma(v as f64 * b) - v as f64 * lgamma(b) - lgamma(state.n_k[t] as f64 + v as f64 * b);
        ll += state.n_kw[t * v..(t + 1) * v]
            .iter()
            .map(|&c| lgamma(c as f64 + b))
            .sum::<f64>();
    }
    for (d, doc) in state.words.iter().enumerate() {
        ll += lgamma(k as f64 * a) - k as f64 * lgamma(a) - lgamma(doc.len() as f64 + k as f64 * a);
        ll += state.n_dk[d * k..(d + 1) * k]
            .iter()
            .map(|&c| lgamma(c as f64 + a))
            .sum::<f64>();
    }
    ll
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel<T> {
    /// K×V, rows sum to 1.
    pub phi: Vec<Vec<T>>,
    /// N×K, rows sum to 1.
    pub theta: Vec<Vec<T>>,
    /// Count tables after the final sweep.
    pub n_kw: Vec<u32>,
    pub n_dk: Vec<u32>,
    pub n_k: Vec<u32>,
    /// Log-likelihood after each sweep.
    pub log_likelihood_trace: Vec<f64>,
    pub oov_dropped: usize,
    pub config: LdaConfig,
}

impl<T> TopicModel<T> {
    pub fn k(&self) -> usize {
        self.phi.len()
    }
}

pub fn fit<T: Scalar>(docs: &[TokenizedDoc], vocab: &Vocabulary, config: &LdaConfig) -> Result<TopicModel<T>> {
    fit_observed(docs, vocab, config, |_, _| Ok(()))
}

/// [`fit`], calling `observe(sweep, state)` after every sweep (1-based).
pub fn fit_observed<T: Scalar>(
    docs: &[TokenizedDoc],
    vocab: &Vocabulary,
    config: &LdaConfig,
    observe: impl FnMut(usize, &GibbsState) -> Result<()>,
) -> Result<TopicModel<T>> {
    let state = initialize(docs, vocab, config)?;
    run_chain(state, config, observe)
}

/// Runs the sweeps on an initialized state and averages the post-burn-in
/// posterior means.
pub fn run_chain<T: Scalar>(
    mut state: GibbsState,
    config: &LdaConfig,
    mut observe: impl FnMut(usize, &GibbsState) -> Result<()>,
) -> Result<TopicModel<T>> {
    config.validate()?;
    let (k, v, n) = (state.k, state.v, state.n_docs());
    let (a, b) = (state.alpha, state.beta);
    let mut phi = vec![0.0f64; k * v];
    let mut theta = vec![0.0f64; n * k];
    let mut trace = Vec::with_capacity(config.sweeps);
    for sweep in 1..=config.sweeps {
        gibbs_sweep(&mut state);
        let ll = log_likelihood(&state);
        if !ll.is_finite() {
            return Err(Error::Numeric(format!("lda: log-likelihood not finite at sweep {sweep}")));
        }
        trace.push(ll);
        observe(sweep, &state)?;
        if sweep > config.burn_in {
            for t in 0..k {
                let denom = state.n_k[t] as f64 + v as f64 * b;
                for w in 0..v {
                    phi[t * v + w] += (state.n_kw[t * v + w] as f64 + b) / denom;
                }
            }
            for d in 0..n {
                let denom = state.words[d].len() as f64 + k as f64 * a;
                for t in 0..k {
                    theta[d * k + t] += (state.n_dk[d * k + t] as f64 + a) / denom;
                }
            }
        }
    }
    let samples = (config.sweeps - config.burn_in) as f64;
    let rows = |flat: &[f64], width: usize| -> Vec<Vec<T>> {
        flat.chunks(width)
            .map(|r| r.iter().map(|&x| T::lit(x / samples)).collect())
            .collect()
    };
    Ok(TopicModel {
        phi: rows(&phi, v),
        theta: rows(&theta, k),
        n_kw: state.n_kw,
        n_dk: state.n_dk,
        n_k: state.n_k,
        log_likelihood_trace: trace,
        oov_dropped: state.oov_dropped,
        config: config.clone(),
    })
}

/// The `m` most probable terms per topic, descending; equal probabilities
/// in lexicographic term order.
pub fn top_terms<T: Scalar>(model: &TopicModel<T>, vocab: &Vocabulary, m: usize) -> Result<Vec<Vec<(String, T)>>> {
    if let Some(row) = model.phi.first() {
        if row.len() != vocab.len() {
            return Err(Error::Data(format!(
                "topic width {} does not match vocabulary size {}",
                row.len(),
                vocab.len()
            )));
        }
    }
    let m = if m > vocab.len() {
        log::warn!("lda top_terms: m = {m} exceeds vocabulary size {}, clamping", vocab.len());
        vocab.len()
    } else {
        m
    };
    Ok(model
        .phi
        .iter()
        .map(|row| {
            ranked_columns(row, m)
                .into_iter()
                .map(|w| (vocab.term(w).to_string(), row[w]))
                .collect()
        })
        .collect())
}

const MODEL_MAGIC: &str = "LDA v1";

/// `LDA v1 K V`, then one `col:prob` line per topic.
pub fn save_model<T: Scalar, W: Write>(model: &TopicModel<T>, mut out: W) -> Result<()> {
    let v = model.phi.first().map_or(0, Vec::len);
    writeln!(out, "{MODEL_MAGIC} {} {v}", model.k())?;
    for row in &model.phi {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > T::zero())
            .map(|(c, p)| format!("{c}:{p}"))
            .collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Reads the phi rows of a topic file.
pub fn load_phi<T: Scalar, R: BufRead>(reader: R) -> Result<Vec<Vec<T>>> {
    let file = "topic model";
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::parse(file, 1, "missing header"))?;
    let dims: Vec<usize> = header
        .strip_prefix(MODEL_MAGIC)
        .map(|s| s.split_whitespace().filter_map(|x| x.parse().ok()).collect())
        .unwrap_or_default();
    let &[k, v] = dims.as_slice() else {
        return Err(Error::parse(file, 1, format!("expected `{MODEL_MAGIC} K V`")));
    };
    let mut phi = Vec::with_capacity(k);
    for (i, line) in lines.enumerate() {
        let line = line?;
        let mut row = vec![T::zero(); v];
        for entry in line.split_whitespace() {
            let parsed = entry
                .split_once(':')
                .and_then(|(c, p)| Some((c.parse::<usize>().ok()?, p.parse::<T>().ok()?)));
            match parsed {
                Some((c, p)) if c < v => row[c] = p,
                _ => return Err(Error::parse(file, i + 2, format!("bad entry {entry:?}"))),
            }
        }
        phi.push(row);
    }
    if phi.len() != k {
        return Err(Error::parse(file, phi.len() + 1, format!("expected {k} topic rows")));
    }
    Ok(phi)
}

/// `topic TAB rank TAB term TAB prob` lines, ranks from 1.
pub fn write_top_terms<T: Scalar + fmt::Display, W: Write>(terms: &[Vec<(String, T)>], mut out: W) -> Result<()> {
    for (topic, list) in terms.iter().enumerate() {
        for (rank, (term, p)) in list.iter().enumerate() {
            writeln!(out, "{topic}\t{}\t{term}\t{p}", rank + 1)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tfidf::build_vocabulary;

    fn docs(raw: &[&[&str]]) -> Vec<TokenizedDoc> {
        raw.iter()
            .enumerate()
            .map(|(i, t)| TokenizedDoc {
                doc_index: i,
                tokens: t.iter().map(|s| s.to_string()).collect(),
            })
            .collect()
    }

    fn small() -> (Vec<TokenizedDoc>, Vocabulary) {
        let d = docs(&[&["a", "b", "a"], &["c", "b"], &["a", "d", "d", "c"]]);
        let v = build_vocabulary(&d, 1, 1.0).unwrap();
        (d, v)
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = LdaConfig::new(8, 1);
        assert_eq!((c.alpha, c.beta, c.sweeps, c.burn_in), (0.125, 0.125, 1000, 800));
        assert!(LdaConfig { burn_in: 1000, ..c.clone() }.validate().is_err());
        assert!(LdaConfig { alpha: 0.0, ..c.clone() }.validate().is_err());
        assert!(LdaConfig::new(0, 1).validate().is_err());
    }

    #[test]
    fn k1_initialization_puts_everything_in_topic_zero() {
        let (d, v) = small();
        let s = initialize(&d, &v, &LdaConfig::new(1, 3)).unwrap();
        assert!(s.z.iter().flatten().all(|&t| t == 0));
        assert_eq!(s.n_k, vec![9]);
        s.check_counts().unwrap();
    }

    #[test]
    fn initialization_is_seeded_and_consistent() {
        let (d, v) = small();
        let a = initialize(&d, &v, &LdaConfig::new(3, 9)).unwrap();
        let b = initialize(&d, &v, &LdaConfig::new(3, 9)).unwrap();
        assert_eq!(a.z, b.z);
        a.check_counts().unwrap();
    }

    #[test]
    fn oov_tokens_are_counted_and_all_oov_fails() {
        let (_, v) = small();
        let s = initialize(&docs(&[&["a", "zz", "qq"]]), &v, &LdaConfig::new(2, 1)).unwrap();
        assert_eq!(s.oov_dropped, 2);
        assert_eq!(s.n_tokens(), 1);
        assert!(initialize(&docs(&[&["zz"]]), &v, &LdaConfig::new(2, 1)).is_err());
    }

    #[test]
    fn k1_sweep_is_identity() {
        let (d, v) = small();
        let mut s = initialize(&d, &v, &LdaConfig::new(1, 3)).unwrap();
        let before = s.z.clone();
        gibbs_sweep(&mut s);
        assert_eq!(s.z, before);
    }

    #[test]
    fn single_token_two_topics_is_a_fair_coin() {
        // With the token removed all counts are zero, so both topics have
        // conditional weight (0 + 1)(0 + 1)/(0 + V) and are equally likely.
        let config = LdaConfig {
            alpha: 1.0,
            beta: 1.0,
            ..LdaConfig::new(2, 0)
        };
        let mut s = GibbsState::from_words(vec![vec![0]], 4, &config).unwrap();
        let trials = 20_000;
        let mut ones = 0;
        for _ in 0..trials {
            gibbs_sweep(&mut s);
            ones += s.z[0][0];
        }
        let frac = ones as f64 / trials as f64;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn rounded_tfidf_input_expands_by_idf() {
        let d = docs(&[&["a", "a", "b"], &["a"]]);
        let v = build_vocabulary(&d, 1, 1.0).unwrap();
        // idf(a) = 1, idf(b) = ln(3/2) + 1 ≈ 1.405 → round(1.405) = 1.
        let built = lda_documents(&d, &v, LdaInput::RoundedTfidf);
        assert_eq!(built.words, vec![vec![0, 0, 1], vec![0]]);
        let d = docs(&[&["b", "b", "b", "a"], &["a"]]);
        let v = build_vocabulary(&d, 1, 1.0).unwrap();
        // 3 × 1.405 = 4.22 → 4 copies of b.
        assert_eq!(lda_documents(&d, &v, LdaInput::RoundedTfidf).words[0], vec![0, 1, 1, 1, 1]);
    }

    #[test]
    fn top_terms_ties_and_clamp() {
        let (d, v) = small();
        let model = TopicModel::<f64> {
            phi: vec![vec![0.1, 0.4, 0.4, 0.1]],
            theta: vec![],
            n_kw: vec![],
            n_dk: vec![],
            n_k: vec![],
            log_likelihood_trace: vec![],
            oov_dropped: 0,
            config: LdaConfig::new(1, 0),
        };
        let t = top_terms(&model, &v, 3).unwrap();
        let names: Vec<&str> = t[0].iter().map(|(s, _)| s.as_str()).collect();
        assert_eq!(names, ["b", "c", "a"]);
        assert_eq!(top_terms(&model, &v, 99).unwrap()[0].len(), 4);
        let _ = d;
    }

    #[test]
    fn model_file_round_trip() {
        let (d, v) = small();
        let config = LdaConfig {
            sweeps: 20,
            burn_in: 10,
            ..LdaConfig::new(2, 4)
        };
        let model: TopicModel<f64> = fit(&d, &v, &config).unwrap();
        let mut buf = Vec::new();
        save_model(&model, &mut buf).unwrap();
        assert!(buf.starts_with(b"LDA v1 2 4\n"));
        assert_eq!(load_phi::<f64, _>(&buf[..]).unwrap(), model.phi);
        let mut out = Vec::new();
        write_top_terms(&top_terms(&model, &v, 2).unwrap(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("0\t1\t"));
    }
}
