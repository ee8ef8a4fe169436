//! Small feed-forward classifiers over TF-IDF rows.
//!
//! Two architectures are supported:
//!
//! * `dnn`: `input → dense(64) → ReLU → dropout → dense(C) → softmax`
//! * `cnn1d`: the TF-IDF row is read as a length-`V` sequence with one
//!   channel; `conv(32 filters, width 3, valid) → ReLU → maxpool(2) →
//!   dropout → flatten → dense(128) → ReLU → dense(C) → softmax`.
//!
//! Flattening is channels-last: pooled position `p`, filter `f` lands at
//! column `p·F + f`. Training uses Adam on mean categorical cross-entropy.

mod checkpoint;
mod gradcheck;
mod linalg;
mod model;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use gradcheck::{grad_check, grad_check_suite, GradCheckReport, TensorCheck, GRAD_CHECK_TOLERANCE};
pub use model::{dropout_mask, forward, loss_and_grads, Mode, Network, Tensor};
pub use train::{
    adam_step, evaluate, predict, read_history, train, write_history, AdamState, EpochMetrics,
    Prediction, RunHistory, TrainConfig, TrainedNet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Dnn,
    Cnn1d,
}

impl Architecture {
    pub const ALL: [Architecture; 2] = [Architecture::Dnn, Architecture::Cnn1d];

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Dnn => "dnn",
            Architecture::Cnn1d => "cnn1d",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dnn" => Ok(Architecture::Dnn),
            "cnn1d" | "cnn" => Ok(Architecture::Cnn1d),
            other => Err(Error::config(
                "train",
                format!("unknown architecture `{other}` (expected dnn or cnn1d)"),
            )),
        }
    }
}

/// Shape and regularization of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub architecture: Architecture,
    pub input_dim: usize,
    pub n_classes: usize,
    pub hidden_units: usize,
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub pool_size: usize,
    pub dense_units: usize,
    /// Probability of zeroing an activation during training.
    pub dropout_rate: f64,
    pub seed: u64,
}

impl NetSpec {
    pub fn new(
        architecture: Architecture,
        input_dim: usize,
        n_classes: usize,
        dropout_rate: f64,
        seed: u64,
    ) -> Self {
        NetSpec {
            architecture,
            input_dim,
            n_classes,
            hidden_units: 64,
            conv_filters: 32,
            conv_kernel: 3,
            pool_size: 2,
            dense_units: 128,
            dropout_rate,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config("train", m));
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        if self.n_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.n_classes));
        }
        if self.input_dim == 0 {
            return bad("input dimension is 0".into());
        }
        match self.architecture {
            Architecture::Dnn => {
                if self.hidden_units == 0 {
                    return bad("hidden_units is 0".into());
                }
            }
            Architecture::Cnn1d => {
                if self.conv_filters == 0 || self.conv_kernel == 0 || self.pool_size == 0 {
                    return bad("conv_filters, conv_kernel and pool_size must be positive".into());
                }
                if self.dense_units == 0 {
                    return bad("dense_units is 0".into());
                }
                if self.pooled_len() == 0 {
                    return Err(Error::Shape {
                        layer: "maxpool".into(),
                        message: format!(
                            "input width {} leaves nothing after a width-{} convolution and pool {}",
                            self.input_dim, self.conv_kernel, self.pool_size
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// Output length of the valid convolution.
    pub fn conv_len(&self) -> usize {
        (self.input_dim + 1).saturating_sub(self.conv_kernel)
    }

    /// Positions left after non-overlapping max pooling (remainder dropped).
    pub fn pooled_len(&self) -> usize {
        self.conv_len() / self.pool_size.max(1)
    }

    /// Width of the flattened pooled feature map.
    pub fn flatten_width(&self) -> usize {
        self.pooled_len() * self.conv_filters
    }

    /// Width of the layer dropout is applied to.
    pub fn dropout_width(&self) -> usize {
        match self.architecture {
            Architecture::Dnn => self.hidden_units,
            Architecture::Cnn1d => self.flatten_width(),
        }
    }

    /// Parameter tensors as `(name, shape, fan_in)` in storage order.
    pub fn tensor_layout(&self) -> Vec<(&'static str, Vec<usize>, usize)> {
        let c = self.n_classes;
        match self.architecture {
            Architecture::Dnn => {
                let (v, h) = (self.input_dim, self.hidden_units);
                vec![
                    ("hidden.weight", vec![v, h], v),
                    ("hidden.bias", vec![h], v),
                    ("output.weight", vec![h, c], h),
                    ("output.bias", vec![c], h),
                ]
            }
            Architecture::Cnn1d => {
                let (f, k, w, d) = (
                    self.conv_filters,
                    self.conv_kernel,
                    self.flatten_width(),
                    self.dense_units,
                );
                vec![
                    ("conv.kernel", vec![f, k], k),
                    ("conv.bias", vec![f], k),
                    ("dense.weight", vec![w, d], w),
                    ("dense.bias", vec![d], w),
                    ("output.weight", vec![d, c], d),
                    ("output.bias", vec![c], d),
                ]
            }
        }
    }

    pub fn n_parameters(&self) -> usize {
        self.tensor_layout()
            .iter()
            .map(|(_, s, _)| s.iter().product::<usize>())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_width_follows_valid_conv_and_floor_pool() {
        for (v, expected_len) in [(3, 0), (4, 1), (5, 1), (10, 4), (11, 4), (12, 5), (200, 99)] {
            let spec = NetSpec::new(Architecture::Cnn1d, v, 3, 0.0, 0);
            assert_eq!(spec.conv_len(), v - 2);
            assert_eq!(spec.pooled_len(), expected_len, "V = {v}");
            assert_eq!(spec.flatten_width(), expected_len * 32);
        }
        let spec = NetSpec::new(Architecture::Cnn1d, 3, 3, 0.0, 0);
        assert!(matches!(spec.validate(), Err(Error::Shape { .. })));
    }

    #[test]
    fn layouts_count_parameters() {
        let dnn = NetSpec::new(Architecture::Dnn, 10, 3, 0.0, 0);
        assert_eq!(dnn.n_parameters(), 10 * 64 + 64 + 64 * 3 + 3);
        let cnn = NetSpec::new(Architecture::Cnn1d, 10, 3, 0.0, 0);
        assert_eq!(cnn.n_parameters(), 32 * 3 + 32 + 128 * 128 + 128 + 128 * 3 + 3);
    }

    #[test]
    fn rejects_bad_dropout_and_class_counts() {
        assert!(NetSpec::new(Architecture::Dnn, 10, 3, 1.0, 0).validate().is_err());
        assert!(NetSpec::new(Architecture::Dnn, 10, 1, 0.0, 0).validate().is_err());
        assert!("lstm".parse::<Architecture>().is_err());
        assert_eq!("cnn1d".parse::<Architecture>().unwrap(), Architecture::Cnn1d);
    }
}
