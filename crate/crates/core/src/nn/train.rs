use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::model::{cross_entropy, loss_and_grads, forward, Mode, Network, Tensor};
use super::NetSpec;
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::{argmax, Scalar};
use crate::tfidf::SparseRow;

/// Rows scored per forward pass when evaluating or predicting.
const EVAL_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Trailing fraction of the training rows held out for validation.
    pub val_fraction: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seeds minibatch order and dropout masks.
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 15,
            batch_size: 32,
            val_fraction: 0.2,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config("train", m));
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad(format!("val_fraction {} outside [0, 1)", self.val_fraction));
        }
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        if !(self.epsilon > 0.0) {
            return bad("Adam epsilon must be positive".into());
        }
        Ok(())
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[Tensor<T>]) -> Self {
        AdamState {
            step: 0,
            m: params.iter().map(|t| vec![T::zero(); t.len()]).collect(),
            v: params.iter().map(|t| vec![T::zero(); t.len()]).collect(),
        }
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step<T: Scalar>(
    params: &mut [Tensor<T>],
    grads: &[Vec<T>],
    state: &mut AdamState<T>,
    config: &TrainConfig,
) {
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::lit(config.beta1), T::lit(config.beta2));
    let c1 = T::one() - T::lit(config.beta1.powi(t));
    let c2 = T::one() - T::lit(config.beta2.powi(t));
    let lr = T::lit(config.learning_rate);
    let eps = T::lit(config.epsilon);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        for (((w, &gi), mi), vi) in p.data.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + (T::one() - b1) * gi;
            *vi = b2 * *vi + (T::one() - b2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunHistory {
    pub epochs: Vec<EpochMetrics>,
}

impl RunHistory {
    pub fn last(&self) -> Option<&EpochMetrics> {
        self.epochs.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedNet<T> {
    pub network: Network<T>,
    pub adam: AdamState<T>,
    pub config: TrainConfig,
}

fn densify<T: Scalar>(rows: &[&SparseRow<T>], width: usize) -> Result<Vec<T>> {
    let mut x = vec![T::zero(); rows.len() * width];
    for (i, row) in rows.iter().enumerate() {
        if let Some(&c) = row.cols.last() {
            if c >= width {
                return Err(Error::Shape {
                    layer: "input".into(),
                    message: format!("row {i} has column {c}, but the network expects width {width}"),
                });
            }
        }
        row.scatter(&mut x[i * width..(i + 1) * width]);
    }
    Ok(x)
}

/// Mean loss and accuracy with dropout off.
pub fn evaluate<T: Scalar>(net: &Network<T>, x: &[SparseRow<T>], y: &[usize]) -> Result<(f64, f64)> {
    if x.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let pred = predict(net, x)?;
    let c = net.spec.n_classes;
    let flat: Vec<T> = pred.probs.iter().flatten().copied().collect();
    let loss = cross_entropy(&flat, y, c).as_f64();
    let correct = pred.classes.iter().zip(y).filter(|(a, b)| a == b).count();
    Ok((loss, correct as f64 / x.len() as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub probs: Vec<Vec<T>>,
    /// Arg-max class per row; ties go to the lowest index.
    pub classes: Vec<usize>,
}

pub fn predict<T: Scalar>(net: &Network<T>, x: &[SparseRow<T>]) -> Result<Prediction<T>> {
    let width = net.spec.input_dim;
    let c = net.spec.n_classes;
    let mut probs = Vec::with_capacity(x.len());
    for chunk in x.chunks(EVAL_BATCH) {
        let rows: Vec<&SparseRow<T>> = chunk.iter().collect();
        let dense = densify(&rows, width)?;
        let p = forward(net, &dense, rows.len(), Mode::Infer)?;
        probs.extend(p.chunks(c).map(|r| r.to_vec()));
    }
    let classes = probs.iter().map(|p| argmax(p)).collect();
    Ok(Prediction { probs, classes })
}

/// Trains a freshly initialized network.
///
/// The last `val_fraction` of the rows (in the given order) are held out for
/// validation; the rest are visited in a fresh seeded order each epoch.
/// After every epoch, loss and accuracy on both parts are recomputed in a
/// full pass with dropout off.
pub fn train<T: Scalar>(
    spec: &NetSpec,
    x: &[SparseRow<T>],
    y: &[usize],
    config: &TrainConfig,
) -> Result<(TrainedNet<T>, RunHistory)> {
    spec.validate()?;
    config.validate()?;
    if x.len() != y.len() {
        return Err(Error::Data(format!("{} rows but {} labels", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::empty("training set"));
    }
    let n = x.len();
    let n_val = ((n as f64) * config.val_fraction).round() as usize;
    let n_val = n_val.min(n - 1);
    let n_fit = n - n_val;
    let (x_fit, x_val) = x.split_at(n_fit);
    let (y_fit, y_val) = y.split_at(n_fit);
    if let Some(&bad) = y.iter().find(|&&c| c >= spec.n_classes) {
        return Err(Error::Data(format!(
            "label {bad} out of range for {} classes",
            spec.n_classes
        )));
    }
    if let Some(class) = (0..spec.n_classes).find(|c| !y_fit.contains(c)) {
        return Err(Error::Data(format!(
            "class {class} has no rows in the training portion ({n_fit} rows after holding out validation)"
        )));
    }

    let mut network = Network::init(spec)?;
    let mut adam = AdamState::new(&network.params);
    let mut history = RunHistory::default();
    let order_seed = rng::derive_seed(config.shuffle_seed, "nn/order");
    let mask_seed = rng::derive_seed(config.shuffle_seed, "nn/dropout");
    let mut step: u64 = 0;
    for epoch in 1..=config.epochs {
        let order = rng::permutation(n_fit, rng::derive_index(order_seed, epoch as u64));
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let rows: Vec<&SparseRow<T>> = batch.iter().map(|&i| &x_fit[i]).collect();
            let targets: Vec<usize> = batch.iter().map(|&i| y_fit[i]).collect();
            let dense = densify(&rows, spec.input_dim)?;
            let mode = Mode::Train {
                mask_seed: rng::derive_index(mask_seed, step),
            };
            let (loss, grads) = loss_and_grads(&network, &dense, rows.len(), &targets, mode)?;
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "training diverged in epoch {epoch}, batch {}; lower the learning rate",
                    b + 1
                )));
            }
            adam_step(&mut network.params, &grads, &mut adam, config);
            step += 1;
        }
        let (train_loss, train_acc) = evaluate(&network, x_fit, y_fit)?;
        let (val_loss, val_acc) = evaluate(&network, x_val, y_val)?;
        log::debug!(
            "{} epoch {epoch}: train loss {train_loss:.4} acc {train_acc:.4}, val loss {val_loss:.4} acc {val_acc:.4}",
            spec.architecture
        );
        history.epochs.push(EpochMetrics {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
        });
    }
    Ok((
        TrainedNet {
            network,
            adam,
            config: config.clone(),
        },
        history,
    ))
}

const HISTORY_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

pub fn write_history<W: Write>(history: &RunHistory, mut out: W) -> Result<()> {
    writeln!(out, "{HISTORY_HEADER}")?;
    for e in &history.epochs {
        writeln!(
            out,
            "{},{},{},{},{}",
            e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc
        )?;
    }
    Ok(())
}

pub fn read_history<R: BufRead>(reader: R, file: &str) -> Result<RunHistory> {
    let mut lines = reader.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim() == HISTORY_HEADER => {}
        _ => return Err(Error::parse(file, 1, format!("expected header `{HISTORY_HEADER}`"))),
    }
    let mut epochs = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::parse(file, lineno, "expected 5 fields"));
        }
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::parse(file, lineno, format!("bad number `{s}`")))
        };
        epochs.push(EpochMetrics {
            epoch: fields[0]
                .trim()
                .parse()
                .map_err(|_| Error::parse(file, lineno, "bad epoch"))?,
            train_loss: num(fields[1])?,
            train_acc: num(fields[2])?,
            val_loss: num(fields[3])?,
            val_acc: num(fields[4])?,
        });
    }
    Ok(RunHistory { epochs })
}
