use rand::Rng;
use rayon::prelude::*;

use super::linalg::{add_bias, column_sums, matmul, matmul_a_bt, matmul_at_b};
use super::{Architecture, NetSpec};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

/// Probabilities are floored here before taking logs.
pub(crate) const PROB_FLOOR: f64 = 1e-12;

/// A named parameter tensor stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(name: &str, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            name: name.to_string(),
            shape,
            data: vec![T::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub spec: NetSpec,
    pub params: Vec<Tensor<T>>,
}

impl<T: Scalar> Network<T> {
    /// He-uniform weights `U(-√(6/fan_in), √(6/fan_in))`, zero biases, drawn
    /// tensor by tensor from the spec's seed.
    pub fn init(spec: &NetSpec) -> Result<Self> {
        spec.validate()?;
        let mut r = rng::seeded(rng::derive_seed(spec.seed, "nn/init"));
        let params = spec
            .tensor_layout()
            .into_iter()
            .map(|(name, shape, fan_in)| {
                let mut t = Tensor::zeros(name, shape);
                if !name.ends_with(".bias") {
                    let limit = (6.0 / fan_in as f64).sqrt();
                    for v in &mut t.data {
                        *v = T::lit(r.random_range(-limit..limit));
                    }
                }
                t
            })
            .collect();
        Ok(Network {
            spec: spec.clone(),
            params,
        })
    }

    /// All parameters zero; the network predicts the uniform distribution.
    pub fn zeros(spec: &NetSpec) -> Result<Self> {
        spec.validate()?;
        let params = spec
            .tensor_layout()
            .into_iter()
            .map(|(name, shape, _)| Tensor::zeros(name, shape))
            .collect();
        Ok(Network {
            spec: spec.clone(),
            params,
        })
    }

    pub fn param(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.iter().find(|t| t.name == name)
    }

    fn data(&self, i: usize) -> &[T] {
        &self.params[i].data
    }
}

/// Whether dropout is active for a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout off: activations pass through unchanged.
    Infer,
    /// Inverted dropout with a mask drawn from `mask_seed`; the same seed
    /// always yields the same mask.
    Train { mask_seed: u64 },
}

/// Inverted-dropout mask: each entry is `0` with probability `rate` and
/// `1/(1-rate)` otherwise, so the expected activation is unchanged.
pub fn dropout_mask<T: Scalar>(len: usize, rate: f64, seed: u64) -> Vec<T> {
    let keep = T::lit(1.0 / (1.0 - rate));
    let mut r = rng::seeded(seed);
    (0..len)
        .map(|_| {
            if r.random::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect()
}

/// Intermediate values kept for the backward pass.
struct Cache<T> {
    /// Pre-activation of the first ReLU layer (dense hidden or conv).
    z1: Vec<T>,
    /// For the CNN, the conv position that won each pooling window.
    pool_arg: Vec<usize>,
    /// Activations after dropout, i.e. the input of the next dense layer.
    dropped: Vec<T>,
    mask: Option<Vec<T>>,
    /// CNN only: dense(128) pre-activation and its ReLU.
    z3: Vec<T>,
    h: Vec<T>,
    probs: Vec<T>,
}

fn check_input<T: Scalar>(spec: &NetSpec, x: &[T], batch: usize) -> Result<()> {
    if x.len() != batch * spec.input_dim {
        return Err(Error::Shape {
            layer: "input".into(),
            message: format!(
                "expected {batch} rows of width {}, got {} values",
                spec.input_dim,
                x.len()
            ),
        });
    }
    Ok(())
}

fn softmax_rows<T: Scalar>(logits: &mut [T], c: usize) {
    for row in logits.chunks_mut(c) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut z = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
}

fn relu<T: Scalar>(z: &[T]) -> Vec<T> {
    z.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect()
}

fn apply_mask<T: Scalar>(spec: &NetSpec, act: &mut [T], mode: Mode) -> Option<Vec<T>> {
    match mode {
        Mode::Train { mask_seed } if spec.dropout_rate > 0.0 => {
            let mask = dropout_mask(act.len(), spec.dropout_rate, mask_seed);
            for (a, &m) in act.iter_mut().zip(&mask) {
                *a *= m;
            }
            Some(mask)
        }
        _ => None,
    }
}

fn forward_cached<T: Scalar>(net: &Network<T>, x: &[T], batch: usize, mode: Mode) -> Result<Cache<T>> {
    let spec = &net.spec;
    check_input(spec, x, batch)?;
    let v = spec.input_dim;
    let c = spec.n_classes;
    match spec.architecture {
        Architecture::Dnn => {
            let h = spec.hidden_units;
            let mut z1 = matmul(x, net.data(0), batch, v, h);
            add_bias(&mut z1, net.data(1));
            let mut dropped = relu(&z1);
            let mask = apply_mask(spec, &mut dropped, mode);
            let mut probs = matmul(&dropped, net.data(2), batch, h, c);
            add_bias(&mut probs, net.data(3));
            softmax_rows(&mut probs, c);
            Ok(Cache {
                z1,
                pool_arg: Vec::new(),
                dropped,
                mask,
                z3: Vec::new(),
                h: Vec::new(),
                probs,
            })
        }
        Architecture::Cnn1d => {
            let (f, k, pool) = (spec.conv_filters, spec.conv_kernel, spec.pool_size);
            let (l, p) = (spec.conv_len(), spec.pooled_len());
            let kernel = net.data(0);
            let conv_bias = net.data(1);
            // z1[b][t][f]
            let mut z1 = vec![T::zero(); batch * l * f];
            z1.par_chunks_mut(l * f).enumerate().for_each(|(b, zb)| {
                let xb = &x[b * v..(b + 1) * v];
                for t in 0..l {
                    let window = &xb[t..t + k];
                    for (fi, out) in zb[t * f..(t + 1) * f].iter_mut().enumerate() {
                        let mut acc = conv_bias[fi];
                        for (&w, &xv) in kernel[fi * k..(fi + 1) * k].iter().zip(window) {
                            acc += w * xv;
                        }
                        *out = acc;
                    }
                }
            });
            // Max-pool the ReLU output; ties keep the earliest position.
            let width = p * f;
            let mut pooled = vec![T::zero(); batch * width];
            let mut pool_arg = vec![0usize; batch * width];
            for b in 0..batch {
                for pi in 0..p {
                    for fi in 0..f {
                        let mut best_t = pi * pool;
                        let mut best = T::neg_infinity();
                        for t in pi * pool..(pi + 1) * pool {
                            let r = z1[(b * l + t) * f + fi].max(T::zero());
                            if r > best {
                                best = r;
                                best_t = t;
                            }
                        }
                        let out = b * width + pi * f + fi;
                        pooled[out] = best;
                        pool_arg[out] = best_t;
                    }
                }
            }
            let mask = apply_mask(spec, &mut pooled, mode);
            let d = spec.dense_units;
            let mut z3 = matmul(&pooled, net.data(2), batch, width, d);
            add_bias(&mut z3, net.data(3));
            let h = relu(&z3);
            let mut probs = matmul(&h, net.data(4), batch, d, c);
            add_bias(&mut probs, net.data(5));
            softmax_rows(&mut probs, c);
            Ok(Cache {
                z1,
                pool_arg,
                dropped: pooled,
                mask,
                z3,
                h,
                probs,
            })
        }
    }
}

/// Class probabilities, `batch × n_classes` row-major.
pub fn forward<T: Scalar>(net: &Network<T>, x: &[T], batch: usize, mode: Mode) -> Result<Vec<T>> {
    Ok(forward_cached(net, x, batch, mode)?.probs)
}

/// Mean cross-entropy of `probs` against class indices, with probabilities
/// floored at 1e-12.
pub(crate) fn cross_entropy<T: Scalar>(probs: &[T], targets: &[usize], c: usize) -> T {
    let floor = T::lit(PROB_FLOOR);
    let total: T = targets
        .iter()
        .enumerate()
        .map(|(b, &y)| -probs[b * c + y].max(floor).ln())
        .sum();
    total / T::of_usize(targets.len().max(1))
}

fn check_targets(targets: &[usize], batch: usize, c: usize) -> Result<()> {
    if targets.len() != batch {
        return Err(Error::Shape {
            layer: "output".into(),
            message: format!("{} targets for a batch of {batch}", targets.len()),
        });
    }
    if let Some((i, &y)) = targets.iter().enumerate().find(|(_, &y)| y >= c) {
        return Err(Error::Data(format!("target {i} is class {y}, but the network has {c} classes")));
    }
    Ok(())
}

/// Mean cross-entropy over the batch and its gradient with respect to every
/// parameter tensor, in storage order.
///
/// The output-layer error is `(p - y)/B`, the exact softmax/cross-entropy
/// gradient away from the probability floor.
pub fn loss_and_grads<T: Scalar>(
    net: &Network<T>,
    x: &[T],
    batch: usize,
    targets: &[usize],
    mode: Mode,
) -> Result<(T, Vec<Vec<T>>)> {
    let spec = &net.spec;
    let c = spec.n_classes;
    check_targets(targets, batch, c)?;
    let cache = forward_cached(net, x, batch, mode)?;
    let loss = cross_entropy(&cache.probs, targets, c);

    let inv_b = T::one() / T::of_usize(batch);
    let mut delta_out = cache.probs.clone();
    for (b, &y) in targets.iter().enumerate() {
        delta_out[b * c + y] -= T::one();
    }
    delta_out.iter_mut().for_each(|d| *d *= inv_b);

    let v = spec.input_dim;
    let unmask = |grad: &mut [T]| {
        if let Some(mask) = &cache.mask {
            for (g, &m) in grad.iter_mut().zip(mask) {
                *g *= m;
            }
        }
    };
    match spec.architecture {
        Architecture::Dnn => {
            let h = spec.hidden_units;
            let d_w2 = matmul_at_b(&cache.dropped, &delta_out, batch, h, c);
            let d_b2 = column_sums(&delta_out, c);
            let mut delta = matmul_a_bt(&delta_out, net.data(2), batch, c, h);
            unmask(&mut delta);
            for (g, &z) in delta.iter_mut().zip(&cache.z1) {
                if z <= T::zero() {
                    *g = T::zero();
                }
            }
            let d_w1 = matmul_at_b(x, &delta, batch, v, h);
            let d_b1 = column_sums(&delta, h);
            Ok((loss, vec![d_w1, d_b1, d_w2, d_b2]))
        }
        Architecture::Cnn1d => {
            let (f, k) = (spec.conv_filters, spec.conv_kernel);
            let l = spec.conv_len();
            let width = spec.flatten_width();
            let d = spec.dense_units;
            let d_w4 = matmul_at_b(&cache.h, &delta_out, batch, d, c);
            let d_b4 = column_sums(&delta_out, c);
            let mut delta3 = matmul_a_bt(&delta_out, net.data(4), batch, c, d);
            for (g, &z) in delta3.iter_mut().zip(&cache.z3) {
                if z <= T::zero() {
                    *g = T::zero();
                }
            }
            let d_w3 = matmul_at_b(&cache.dropped, &delta3, batch, width, d);
            let d_b3 = column_sums(&delta3, d);
            let mut delta_pool = matmul_a_bt(&delta3, net.data(2), batch, d, width);
            unmask(&mut delta_pool);
            // Route each pooled gradient back to its winning position, then
            // through the conv ReLU.
            let mut delta_conv = vec![T::zero(); batch * l * f];
            for b in 0..batch {
                for j in 0..width {
                    let fi = j % f;
                    let t = cache.pool_arg[b * width + j];
                    let idx = (b * l + t) * f + fi;
                    if cache.z1[idx] > T::zero() {
                        delta_conv[idx] += delta_pool[b * width + j];
                    }
                }
            }
            let mut d_kernel = vec![T::zero(); f * k];
            let mut d_conv_bias = vec![T::zero(); f];
            for b in 0..batch {
                let xb = &x[b * v..(b + 1) * v];
                for t in 0..l {
                    for fi in 0..f {
                        let g = delta_conv[(b * l + t) * f + fi];
                        if g == T::zero() {
                            continue;
                        }
                        d_conv_bias[fi] += g;
                        for j in 0..k {
                            d_kernel[fi * k + j] += g * xb[t + j];
                        }
                    }
                }
            }
            Ok((loss, vec![d_kernel, d_conv_bias, d_w3, d_b3, d_w4, d_b4]))
        }
    }
}

/// Loss only, sharing the forward pass used for training.
pub(crate) fn loss_only<T: Scalar>(
    net: &Network<T>,
    x: &[T],
    batch: usize,
    targets: &[usize],
    mode: Mode,
) -> Result<T> {
    check_targets(targets, batch, net.spec.n_classes)?;
    let probs = forward(net, x, batch, mode)?;
    Ok(cross_entropy(&probs, targets, net.spec.n_classes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_predicts_uniform_and_loses_ln_c() {
        for arch in Architecture::ALL {
            let spec = NetSpec::new(arch, 12, 3, 0.0, 0);
            let net = Network::<f64>::zeros(&spec).unwrap();
            let x: Vec<f64> = (0..24).map(|i| (i as f64 * 0.37).sin()).collect();
            let probs = forward(&net, &x, 2, Mode::Infer).unwrap();
            for p in probs {
                assert!((p - 1.0 / 3.0).abs() < 1e-15);
            }
            let loss = loss_only(&net, &x, 2, &[0, 2], Mode::Infer).unwrap();
            assert!((loss - 3f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn dropout_mask_preserves_the_mean() {
        let rate = 0.3;
        let masks = 10_000;
        let width = 16;
        let mut sum = vec![0.0f64; width];
        for s in 0..masks {
            let m: Vec<f64> = dropout_mask(width, rate, rng::derive_index(5, s));
            for (acc, v) in sum.iter_mut().zip(m) {
                *acc += v;
            }
        }
        for (j, total) in sum.iter().enumerate() {
            let mean = total / masks as f64;
            assert!((mean - 1.0).abs() < 0.02, "unit {j}: {mean}");
        }
        let overall: f64 = sum.iter().sum::<f64>() / (masks as usize * width) as f64;
        assert!((overall - 1.0).abs() < 0.02, "{overall}");
    }

    #[test]
    fn infer_mode_ignores_dropout_and_train_mode_is_reproducible() {
        let spec = NetSpec::new(Architecture::Dnn, 8, 3, 0.5, 4);
        let net = Network::<f64>::init(&spec).unwrap();
        let x: Vec<f64> = (0..16).map(|i| i as f64 / 16.0).collect();
        let a = forward(&net, &x, 2, Mode::Infer).unwrap();
        let no_drop = Network {
            spec: NetSpec { dropout_rate: 0.0, ..spec.clone() },
            params: net.params.clone(),
        };
        assert_eq!(a, forward(&no_drop, &x, 2, Mode::Train { mask_seed: 1 }).unwrap());
        let t1 = forward(&net, &x, 2, Mode::Train { mask_seed: 9 }).unwrap();
        let t2 = forward(&net, &x, 2, Mode::Train { mask_seed: 9 }).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn he_uniform_respects_fan_in_bounds() {
        let spec = NetSpec::new(Architecture::Cnn1d, 20, 3, 0.0, 2);
        let net = Network::<f64>::init(&spec).unwrap();
        for ((name, _, fan_in), t) in spec.tensor_layout().into_iter().zip(&net.params) {
            let limit = (6.0 / fan_in as f64).sqrt();
            if name.ends_with(".bias") {
                assert!(t.data.iter().all(|&v| v == 0.0));
            } else {
                assert!(t.data.iter().all(|v| v.abs() <= limit));
                assert!(t.data.iter().any(|&v| v != 0.0));
            }
        }
    }

    #[test]
    fn shape_errors_name_the_layer() {
        let spec = NetSpec::new(Architecture::Dnn, 8, 3, 0.0, 0);
        let net = Network::<f64>::zeros(&spec).unwrap();
        let err = forward(&net, &[0.0; 7], 1, Mode::Infer).unwrap_err();
        assert!(matches!(err, Error::Shape { ref layer, .. } if layer == "input"));
        let err = loss_and_grads(&net, &[0.0; 8], 1, &[3], Mode::Infer).unwrap_err();
        assert!(err.to_string().contains("class 3"));
    }
}
