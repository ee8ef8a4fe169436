//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Library-level criteria use independent brute-force oracles written here;
//! pipeline criteria drive the `postlabel` binary.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use postlabel::kmeans::{self, DenseRows, KmeansConfig};
use postlabel::lda::{self, LdaConfig, TopicModel};
use postlabel::metrics::{classification_report, confusion_matrix};
use postlabel::pipeline::{self, Manifest, MANIFEST_FILE};
use postlabel::preprocess::{porter_stem, TokenizedDoc};
use postlabel::rng;
use postlabel::scalar::squared_distance;
use postlabel::tfidf::{self, build_vocabulary, SparseRow};
use postlabel::tsne::{self, SquareMatrix, TsneConfig};

// Pinned tolerances and thresholds.
const TFIDF_TOL: f64 = 1e-12;
const KMEANS_TOL: f64 = 1e-9;
/// Restarts for the optimality check; Lloyd is a local method and 20
/// k-means++ restarts still miss the optimum on one instance here.
const KMEANS_RESTARTS: usize = 50;
const TSNE_GRAD_TOL: f64 = 1e-5;
const PERPLEXITY_TOL: f64 = 1e-3;
const LDA_PURITY: f64 = 0.9;
const LDA_K1_TOL: f64 = 1e-12;
const NN_GRAD_TOL: f64 = 1e-4;
const PLANTED_ACCURACY_MIN: f64 = 0.90;
const DROPOUT_MARGIN: f64 = 0.005;
const REPORT_TRIALS: usize = 1000;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    if ok {
        Ok(detail.into())
    } else {
        Err(detail.into())
    }
}

fn within(elapsed: Duration, budget_secs: u64) -> Result<(), String> {
    if elapsed.as_secs_f64() <= budget_secs as f64 {
        Ok(())
    } else {
        Err(format!("took {:.1}s, budget {budget_secs}s", elapsed.as_secs_f64()))
    }
}

// ------------------------------------------------------------------ 1

fn tfidf_brute_force(docs: &[Vec<String>]) -> Vec<Vec<f64>> {
    let mut terms: Vec<&String> = docs.iter().flatten().collect();
    terms.sort();
    terms.dedup();
    let n = docs.len() as f64;
    docs.iter()
        .map(|d| {
            let mut row: Vec<f64> = terms
                .iter()
                .map(|t| {
                    let tf = d.iter().filter(|x| x == t).count() as f64;
                    let df = docs.iter().filter(|e| e.contains(t)).count() as f64;
                    tf * (((1.0 + n) / (1.0 + df)).ln() + 1.0)
                })
                .collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
            row
        })
        .collect()
}

fn tokenized(docs: &[Vec<String>]) -> Vec<TokenizedDoc> {
    docs.iter()
        .enumerate()
        .map(|(doc_index, tokens)| TokenizedDoc {
            doc_index,
            tokens: tokens.clone(),
        })
        .collect()
}

fn criterion_tfidf() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..25u64 {
        let mut r = rng::seeded(1000 + seed);
        let n_terms = r.random_range(1..=20);
        let docs: Vec<Vec<String>> = (0..r.random_range(1..=10))
            .map(|_| {
                (0..r.random_range(1..=12))
                    .map(|_| format!("w{:02}", r.random_range(0..n_terms)))
                    .collect()
            })
            .collect();
        let expected = tfidf_brute_force(&docs);
        let vocab = build_vocabulary(&tokenized(&docs), 1, 1.0).map_err(|e| e.to_string())?;
        let m = tfidf::vectorize::<f64>(&tokenized(&docs), &vocab).matrix;
        for (i, row) in expected.iter().enumerate() {
            let got = m.dense_row(i);
            if got.len() != row.len() {
                return Err(format!("corpus {seed}: {} columns, expected {}", got.len(), row.len()));
            }
            for (a, b) in got.iter().zip(row) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    within(start.elapsed(), 5)?;
    check(worst <= TFIDF_TOL, format!("25 corpora, max |diff| {worst:.2e} (tol {TFIDF_TOL:.0e})"))
}

// ------------------------------------------------------------------ 2

fn criterion_porter() -> Outcome {
    let start = Instant::now();
    let voc = include_str!("../../core/tests/fixtures/porter_voc.txt");
    let out = include_str!("../../core/tests/fixtures/porter_output.txt");
    let words: Vec<&str> = voc.lines().filter(|l| !l.is_empty()).collect();
    let stems: Vec<&str> = out.lines().filter(|l| !l.is_empty()).collect();
    if words.len() != stems.len() {
        return Err("fixture files differ in length".into());
    }
    let wrong = words.iter().zip(&stems).filter(|(w, s)| porter_stem(w) != **s).count();
    within(start.elapsed(), 5)?;
    check(wrong == 0, format!("{} / {} words match", words.len() - wrong, words.len()))
}

// ------------------------------------------------------------------ 3

fn exhaustive_inertia(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let dim = points[0].len();
    let mut best = f64::INFINITY;
    for code in 0..k.pow(n as u32) {
        let mut c = code;
        let labels: Vec<usize> = (0..n)
            .map(|_| {
                let l = c % k;
                c /= k;
                l
            })
            .collect();
        let mut total = 0.0;
        for cluster in 0..k {
            let members: Vec<&Vec<f64>> =
                (0..n).filter(|&i| labels[i] == cluster).map(|i| &points[i]).collect();
            if members.is_empty() {
                continue;
            }
            let mean: Vec<f64> = (0..dim)
                .map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64)
                .collect();
            total += members.iter().map(|p| squared_distance(p, &mean)).sum::<f64>();
        }
        best = best.min(total);
    }
    best
}

fn criterion_kmeans() -> Outcome {
    let start = Instant::now();
    let mut misses = Vec::new();
    let mut upticks = 0;
    for seed in 0..50u64 {
        let mut r = rng::seeded(2000 + seed);
        let n = r.random_range(3..=10);
        let dim = r.random_range(1..=3);
        let k = r.random_range(1..=3);
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| r.random_range(-5.0..5.0)).collect())
            .collect();
        let config = KmeansConfig {
            n_init: KMEANS_RESTARTS,
            ..KmeansConfig::new(k, seed)
        };
        let model = kmeans::fit(&DenseRows::from_rows(&points), &config).map_err(|e| e.to_string())?;
        if (model.inertia - exhaustive_inertia(&points, k)).abs() > KMEANS_TOL {
            misses.push(seed);
        }
        upticks += model.inertia_trace.windows(2).filter(|w| w[1] > w[0]).count();
    }
    within(start.elapsed(), 30)?;
    check(
        misses.is_empty() && upticks == 0,
        format!("50 instances, {} off-optimum {misses:?}, {upticks} inertia increases", misses.len()),
    )
}

// ------------------------------------------------------------------ 4

fn kl_direct(p: &SquareMatrix<f64>, y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let w = |i: usize, j: usize| {
        1.0 / (1.0 + (y[i][0] - y[j][0]).powi(2) + (y[i][1] - y[j][1]).powi(2))
    };
    let z: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| w(i, j)).sum();
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p.data[i * n + j];
            if i != j && pij > 0.0 {
                kl += pij * (pij * z / w(i, j)).ln();
            }
        }
    }
    kl
}

fn blob_rows(per_blob: usize, seed: u64) -> (Vec<SparseRow<f64>>, Vec<usize>) {
    let mut r = rng::seeded(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for blob in 0..2 {
        for _ in 0..per_blob {
            let cols: Vec<usize> = (0..10).map(|c| blob * 10 + c).collect();
            let mut vals: Vec<f64> = (0..10).map(|_| r.random_range(0.1..1.0)).collect();
            let norm = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
            vals.iter_mut().for_each(|v| *v /= norm);
            rows.push(SparseRow { cols, vals });
            labels.push(blob);
        }
    }
    (rows, labels)
}

fn separable(coords: &[[f64; 2]], labels: &[usize]) -> bool {
    (0..3600).any(|k| {
        let t = k as f64 * std::f64::consts::PI / 3600.0;
        let proj = |i: usize| coords[i][0] * t.cos() + coords[i][1] * t.sin();
        let range = |class: usize| {
            (0..coords.len())
                .filter(|&i| labels[i] == class)
                .map(proj)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        let (a, b) = (range(0), range(1));
        a.1 < b.0 || b.1 < a.0
    })
}

fn criterion_tsne() -> Outcome {
    let start = Instant::now();
    // (a) gradient
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut r = rng::seeded(3000 + seed);
        let n = r.random_range(3..=8);
        let mut p = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..i {
                let v: f64 = r.random_range(0.05..1.0);
                p.data[i * n + j] = v;
                p.data[j * n + i] = v;
            }
        }
        let total: f64 = p.data.iter().sum();
        p.data.iter_mut().for_each(|v| *v /= total);
        let y: Vec<[f64; 2]> = (0..n).map(|_| [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)]).collect();
        let g = tsne::gradient(&p, &y);
        let h = 1e-5;
        for i in 0..n {
            for d in 0..2 {
                let (mut a, mut b) = (y.clone(), y.clone());
                a[i][d] += h;
                b[i][d] -= h;
                let num = (kl_direct(&p, &a) - kl_direct(&p, &b)) / (2.0 * h);
                worst = worst.max((g[i][d] - num).abs() / g[i][d].abs().max(num.abs()).max(1e-8));
            }
        }
    }
    // (b) perplexity calibration on 500 points
    let (rows, _) = blob_rows(250, 2);
    let d = tsne::cosine_distance_matrix(&rows).map_err(|e| e.to_string())?;
    let j = tsne::joint_probabilities(&d, 50.0, 1e-5, 50).map_err(|e| e.to_string())?;
    let perp_gap = j.row_perplexity.iter().map(|p| (p - 50.0).abs()).fold(0.0, f64::max);
    let perp_ok = perp_gap <= PERPLEXITY_TOL || j.unconverged_rows.is_empty();
    // (c) planted blobs
    let (rows, labels) = blob_rows(20, 5);
    let config = TsneConfig {
        perplexity: 10.0,
        learning_rate: 50.0,
        seed: 3,
        ..TsneConfig::default()
    };
    let out = tsne::embed(&rows, &config).map_err(|e| e.to_string())?;
    let sep = separable(&out.embedding.coords, &labels);
    within(start.elapsed(), 180)?;
    check(
        worst < TSNE_GRAD_TOL && perp_ok && sep,
        format!(
            "grad rel err {worst:.2e}; perplexity max gap {perp_gap:.1e}, {} unconverged; blobs separable: {sep}",
            j.unconverged_rows.len()
        ),
    )
}

// ------------------------------------------------------------------ 5

fn criterion_lda() -> Outcome {
    let start = Instant::now();
    let mut r = rng::seeded(4000);
    let docs: Vec<TokenizedDoc> = (0..200)
        .map(|i| {
            let prefix = if i % 2 == 0 { "a" } else { "b" };
            TokenizedDoc {
                doc_index: i,
                tokens: (0..r.random_range(15..=25))
                    .map(|_| format!("{prefix}{:02}", r.random_range(0..50)))
                    .collect(),
            }
        })
        .collect();
    let vocab = build_vocabulary(&docs, 1, 1.0).map_err(|e| e.to_string())?;
    let mut invariant_failures = 0;
    let mut sweeps = 0;
    let model: TopicModel<f64> = lda::fit_observed(&docs, &vocab, &LdaConfig::new(2, 11), |_, s| {
        sweeps += 1;
        if s.check_counts().is_err() {
            invariant_failures += 1;
        }
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    let purity: Vec<f64> = lda::top_terms(&model, &vocab, 10)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|t| {
            let a = t.iter().filter(|(w, _)| w.starts_with('a')).count();
            a.max(t.len() - a) as f64 / t.len() as f64
        })
        .collect();
    // K = 1: phi is the smoothed corpus term frequency.
    let k1 = LdaConfig {
        sweeps: 20,
        burn_in: 5,
        ..LdaConfig::new(1, 3)
    };
    let single: TopicModel<f64> = lda::fit(&docs, &vocab, &k1).map_err(|e| e.to_string())?;
    let total: usize = docs.iter().map(|d| d.tokens.len()).sum();
    let v = vocab.len() as f64;
    let k1_gap = vocab
        .terms()
        .iter()
        .enumerate()
        .map(|(w, term)| {
            let c = docs.iter().flat_map(|d| &d.tokens).filter(|t| *t == term).count() as f64;
            (single.phi[0][w] - (c + k1.beta) / (total as f64 + v * k1.beta)).abs()
        })
        .fold(0.0, f64::max);
    within(start.elapsed(), 120)?;
    check(
        purity.iter().all(|&p| p >= LDA_PURITY) && invariant_failures == 0 && sweeps == 1000 && k1_gap <= LDA_K1_TOL,
        format!(
            "top-10 purity {purity:?}; count invariants held on {}/{sweeps} sweeps; K=1 phi gap {k1_gap:.1e}",
            sweeps - invariant_failures
        ),
    )
}

// ------------------------------------------------------------------ 6

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_postlabel"))
}

fn criterion_grad_check(scratch: &Path) -> Outcome {
    let start = Instant::now();
    let out = binary()
        .args(["--quiet", "--seed", "7", "--out"])
        .arg(scratch.join("gradcheck"))
        .args(["grad-check", "--trials", "3", "--input-dim", "10"])
        .arg("--tolerance")
        .arg(NN_GRAD_TOL.to_string())
        .output()
        .map_err(|e| e.to_string())?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    let last = stdout.lines().last().unwrap_or_default().to_string();
    let pairs = ["dnn\t0\t", "dnn\t0.3\t", "cnn1d\t0\t", "cnn1d\t0.3\t"];
    let covered = pairs.iter().all(|p| stdout.lines().any(|l| l.starts_with(p)));
    within(start.elapsed(), 60)?;
    check(
        out.status.success() && covered && last.ends_with("PASS"),
        format!("both architectures × dropout {{0, 0.3}}: {last}"),
    )
}

// ------------------------------------------------------------------ 7, 9

fn synthetic_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const FULL_SYNTHETIC: &str = r#"
[pipeline]
seed = 42

[synth]
n_docs_per_category = 250
noise_fraction = 0.2

[label]
rule = "vocabulary_vote"
"#;

fn run_all(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), String> {
    let mut cmd = binary();
    cmd.arg("--quiet").arg("--config").arg(config).arg("--out").arg(out);
    if let Some(s) = seed {
        cmd.args(["--seed", &s.to_string()]);
    }
    let res = cmd.arg("run-all").output().map_err(|e| e.to_string())?;
    if res.status.success() {
        Ok(())
    } else {
        Err(format!(
            "run-all exited with {:?}: {}",
            res.status.code(),
            String::from_utf8_lossy(&res.stderr).trim()
        ))
    }
}

fn planted_accuracy(out: &Path) -> Result<Vec<(pipeline::RunKey, f64)>, String> {
    let f = std::fs::File::open(out.join(pipeline::PLANTED_ACCURACY)).map_err(|e| e.to_string())?;
    pipeline::read_planted_accuracy(std::io::BufReader::new(f)).map_err(|e| e.to_string())
}

fn is_percent(s: &str) -> bool {
    matches!(s.split_once('.'), Some((a, b)) if !a.is_empty() && a.bytes().all(|c| c.is_ascii_digit()) && b.len() == 2 && b.bytes().all(|c| c.is_ascii_digit()))
}

fn is_loss(s: &str) -> bool {
    matches!(s.split_once('.'), Some((a, b)) if a.bytes().all(|c| c.is_ascii_digit()) && b.len() == 4 && b.bytes().all(|c| c.is_ascii_digit()))
}

/// Checks a table CSV: expected first cells per row, and accuracy/loss
/// columns in the published number formats.
fn table_rows_ok(csv: &str, expected_keys: &[Vec<&str>]) -> Result<(), String> {
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    if rows.len() != expected_keys.len() {
        return Err(format!("{} rows, expected {}", rows.len(), expected_keys.len()));
    }
    for (row, keys) in rows.iter().zip(expected_keys) {
        if &row[..keys.len()] != keys.as_slice() {
            return Err(format!("row {row:?} does not start with {keys:?}"));
        }
        for (i, cell) in row[keys.len()..].iter().enumerate() {
            let ok = if i % 2 == 0 { is_percent(cell) } else { is_loss(cell) };
            if !ok {
                return Err(format!("cell `{cell}` in row {row:?} is not in the table format"));
            }
        }
    }
    Ok(())
}

fn criterion_end_to_end(scratch: &Path) -> Outcome {
    let start = Instant::now();
    let dir = scratch.join("e2e");
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let config = synthetic_config(&dir, FULL_SYNTHETIC);
    let out = dir.join("out");
    run_all(&config, &out, None)?;
    let elapsed = start.elapsed();
    let acc = planted_accuracy(&out)?;
    let dnn30 = acc
        .iter()
        .find(|(k, _)| k.architecture == postlabel::nn::Architecture::Dnn && k.dropout_rate == 0.3)
        .map(|(_, a)| *a)
        .ok_or("no planted accuracy for dnn dropout 0.3")?;
    let read = |name: &str| std::fs::read_to_string(out.join(name)).map_err(|e| e.to_string());
    table_rows_ok(&read("tables/table2.csv")?, &[vec!["Sentiment"], vec!["Classification"]])
        .map_err(|e| format!("table2: {e}"))?;
    let table3_keys: Vec<Vec<&str>> = ["DNN", "1D-CNN"]
        .iter()
        .flat_map(|m| ["0", "30", "60"].map(|d| vec![*m, d]))
        .collect();
    table_rows_ok(&read("tables/table3.csv")?, &table3_keys).map_err(|e| format!("table3: {e}"))?;
    for name in ["tables/table2.txt", "tables/table3.txt"] {
        let text = read(name)?;
        let expected = if name.contains("table2") { 2 + 2 } else { 2 + 6 };
        if text.lines().count() != expected {
            return Err(format!("{name} has {} lines, expected {expected}", text.lines().count()));
        }
    }
    within(elapsed, 600)?;
    check(
        dnn30 >= PLANTED_ACCURACY_MIN,
        format!(
            "8×250 docs, noise 0.2: DNN dropout 0.3 planted test accuracy {dnn30:.4} (min {PLANTED_ACCURACY_MIN}); tables complete; {:.0}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn read_manifest(out: &Path) -> Result<(String, Manifest), String> {
    let text = std::fs::read_to_string(out.join(MANIFEST_FILE)).map_err(|e| e.to_string())?;
    let m = Manifest::parse(text.as_bytes()).map_err(|e| e.to_string())?;
    Ok((text, m))
}

fn criterion_determinism(scratch: &Path) -> Outcome {
    let dir = scratch.join("e2e");
    let config = dir.join("config.toml");
    let second = dir.join("out-again");
    run_all(&config, &second, None)?;
    let (a_text, a) = read_manifest(&dir.join("out"))?;
    let (b_text, b) = read_manifest(&second)?;
    let differing: Vec<&String> = a
        .entries
        .iter()
        .filter(|(k, v)| b.entries.get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    check(
        a_text == b_text && differing.is_empty() && a.entries.len() == b.entries.len(),
        format!("{} artifacts, {} differing {differing:?}", a.entries.len(), differing.len()),
    )
}

// ------------------------------------------------------------------ 8

const DROPOUT_SWEEP: &str = r#"
[synth]
n_docs_per_category = 250
noise_fraction = 0.2

[kmeans]
k = [8]

[tsne]
enabled = false

[lda]
enabled = false

[label]
rule = "vocabulary_vote"

[train]
architectures = ["dnn"]
dropout_rates = [0.0, 0.6]
classification = false
primary_dropout = 0.0
"#;

fn criterion_dropout(scratch: &Path) -> Outcome {
    let dir = scratch.join("dropout");
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let config = synthetic_config(&dir, DROPOUT_SWEEP);
    let (mut sum0, mut sum6) = (0.0, 0.0);
    let seeds = [11u64, 12, 13, 14, 15];
    for seed in seeds {
        let out = dir.join(format!("seed{seed}"));
        run_all(&config, &out, Some(seed))?;
        for (k, acc) in planted_accuracy(&out)? {
            if k.dropout_rate == 0.0 {
                sum0 += acc;
            } else if k.dropout_rate == 0.6 {
                sum6 += acc;
            }
        }
    }
    let n = seeds.len() as f64;
    let (m0, m6) = (sum0 / n, sum6 / n);
    check(
        m6 >= m0 - DROPOUT_MARGIN,
        format!("mean planted test accuracy over 5 seeds: dropout 0 {m0:.4}, dropout 0.6 {m6:.4} (margin {DROPOUT_MARGIN})"),
    )
}

// ------------------------------------------------------------------ 10

fn criterion_reports() -> Outcome {
    let start = Instant::now();
    let mut r = rng::seeded(5000);
    for trial in 0..REPORT_TRIALS {
        let c = r.random_range(2..=8);
        let n = r.random_range(1..=300);
        let y_true: Vec<usize> = (0..n).map(|_| r.random_range(0..c)).collect();
        let y_pred: Vec<usize> = (0..n).map(|_| r.random_range(0..c)).collect();
        let cm = confusion_matrix(&y_true, &y_pred, c).map_err(|e| e.to_string())?;
        let rep = classification_report(&cm, &[]);
        let trace: usize = (0..c).map(|i| cm.counts[i][i]).sum();
        if rep.accuracy != trace as f64 / n as f64 || rep.n != n {
            return Err(format!("trial {trial}: accuracy {} vs trace/n {}", rep.accuracy, trace as f64 / n as f64));
        }
        for (k, m) in rep.per_class.iter().enumerate() {
            if m.support != cm.counts[k].iter().sum::<usize>()
                || m.support != y_true.iter().filter(|&&t| t == k).count()
            {
                return Err(format!("trial {trial}: support of class {k} is {}", m.support));
            }
        }
    }
    within(start.elapsed(), 5)?;
    Ok(format!("{REPORT_TRIALS} fuzzed reports: accuracy = trace/n and support = row sums exactly"))
}

fn main() {
    let scratch = tempfile::tempdir().expect("scratch directory");
    let scratch = scratch.path();
    let criteria: Vec<Criterion<'_>> = vec![
        ("TF-IDF oracle equivalence", Box::new(criterion_tfidf)),
        ("Porter stemmer golden suite", Box::new(criterion_porter)),
        ("k-means small-instance optimality", Box::new(criterion_kmeans)),
        ("t-SNE numeric suite", Box::new(criterion_tsne)),
        ("LDA planted-topic recovery", Box::new(criterion_lda)),
        ("neural-net gradient check", Box::new(move || criterion_grad_check(scratch))),
        ("end-to-end synthetic pipeline", Box::new(move || criterion_end_to_end(scratch))),
        ("dropout direction check", Box::new(move || criterion_dropout(scratch))),
        ("determinism audit", Box::new(move || criterion_determinism(scratch))),
        ("report arithmetic", Box::new(criterion_reports)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
