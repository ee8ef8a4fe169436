//! Plain-text network checkpoints.
//!
//! ```text
//! postlabel-net v1
//! architecture dnn
//! input_dim 120
//! ...                      (remaining spec and training fields, one per line)
//! adam_step 750
//! tensor hidden.weight 120 64
//! <row-major values, space separated>
//! moment1 hidden.weight
//! <values>
//! moment2 hidden.weight
//! <values>
//! ...
//! ```
//!
//! Values are written in shortest round-trip form, so loading reproduces
//! the saved network bit for bit.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::model::{Network, Tensor};
use super::train::{AdamState, TrainConfig, TrainedNet};
use super::NetSpec;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &str = "postlabel-net v1";

fn values_line<T: Scalar>(values: &[T]) -> String {
    let mut s = String::with_capacity(values.len() * 12);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v}");
    }
    s
}

pub fn save_checkpoint<T: Scalar, W: Write>(net: &TrainedNet<T>, mut out: W) -> Result<()> {
    let s = &net.network.spec;
    let c = &net.config;
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "architecture {}", s.architecture)?;
    writeln!(out, "input_dim {}", s.input_dim)?;
    writeln!(out, "n_classes {}", s.n_classes)?;
    writeln!(out, "hidden_units {}", s.hidden_units)?;
    writeln!(out, "conv_filters {}", s.conv_filters)?;
    writeln!(out, "conv_kernel {}", s.conv_kernel)?;
    writeln!(out, "pool_size {}", s.pool_size)?;
    writeln!(out, "dense_units {}", s.dense_units)?;
    writeln!(out, "dropout_rate {}", s.dropout_rate)?;
    writeln!(out, "seed {}", s.seed)?;
    writeln!(out, "epochs {}", c.epochs)?;
    writeln!(out, "batch_size {}", c.batch_size)?;
    writeln!(out, "val_fraction {}", c.val_fraction)?;
    writeln!(out, "learning_rate {}", c.learning_rate)?;
    writeln!(out, "beta1 {}", c.beta1)?;
    writeln!(out, "beta2 {}", c.beta2)?;
    writeln!(out, "epsilon {}", c.epsilon)?;
    writeln!(out, "shuffle_seed {}", c.shuffle_seed)?;
    writeln!(out, "adam_step {}", net.adam.step)?;
    for (i, t) in net.network.params.iter().enumerate() {
        let dims: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
        writeln!(out, "tensor {} {}", t.name, dims.join(" "))?;
        writeln!(out, "{}", values_line(&t.data))?;
        writeln!(out, "moment1 {}", t.name)?;
        writeln!(out, "{}", values_line(&net.adam.m[i]))?;
        writeln!(out, "moment2 {}", t.name)?;
        writeln!(out, "{}", values_line(&net.adam.v[i]))?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
    file: String,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse(self.file.clone(), self.line, message)
    }

    fn values<T: Scalar>(&mut self, expected: usize) -> Result<Vec<T>> {
        let line = self.next()?;
        let vals: Vec<T> = line
            .split_ascii_whitespace()
            .map(|tok| tok.parse::<T>().map_err(|_| self.err(format!("bad value `{tok}`"))))
            .collect::<Result<_>>()?;
        if vals.len() != expected {
            return Err(self.err(format!("expected {expected} values, found {}", vals.len())));
        }
        Ok(vals)
    }

    fn header(&mut self, keyword: &str) -> Result<Vec<String>> {
        let line = self.next()?;
        let mut parts = line.split_ascii_whitespace().map(str::to_string);
        match parts.next() {
            Some(k) if k == keyword => Ok(parts.collect()),
            _ => Err(self.err(format!("expected `{keyword}` line"))),
        }
    }
}

pub fn load_checkpoint<T: Scalar, R: BufRead>(reader: R, file: &str) -> Result<TrainedNet<T>> {
    let mut lines = Lines {
        inner: reader.lines(),
        line: 0,
        file: file.to_string(),
    };
    if lines.next()?.trim() != MAGIC {
        return Err(lines.err(format!("missing `{MAGIC}` header")));
    }
    const KEYS: [&str; 19] = [
        "architecture",
        "input_dim",
        "n_classes",
        "hidden_units",
        "conv_filters",
        "conv_kernel",
        "pool_size",
        "dense_units",
        "dropout_rate",
        "seed",
        "epochs",
        "batch_size",
        "val_fraction",
        "learning_rate",
        "beta1",
        "beta2",
        "epsilon",
        "shuffle_seed",
        "adam_step",
    ];
    let mut fields = HashMap::new();
    for key in KEYS {
        let rest = lines.header(key)?;
        if rest.len() != 1 {
            return Err(lines.err(format!("`{key}` takes one value")));
        }
        fields.insert(key, rest[0].clone());
    }
    fn get<V: std::str::FromStr, R: BufRead>(
        lines: &Lines<R>,
        fields: &HashMap<&str, String>,
        key: &str,
    ) -> Result<V> {
        fields[key]
            .parse()
            .map_err(|_| lines.err(format!("bad value for `{key}`: {}", fields[key])))
    }
    let spec = NetSpec {
        architecture: fields["architecture"].parse()?,
        input_dim: get(&lines, &fields, "input_dim")?,
        n_classes: get(&lines, &fields, "n_classes")?,
        hidden_units: get(&lines, &fields, "hidden_units")?,
        conv_filters: get(&lines, &fields, "conv_filters")?,
        conv_kernel: get(&lines, &fields, "conv_kernel")?,
        pool_size: get(&lines, &fields, "pool_size")?,
        dense_units: get(&lines, &fields, "dense_units")?,
        dropout_rate: get(&lines, &fields, "dropout_rate")?,
        seed: get(&lines, &fields, "seed")?,
    };
    spec.validate()?;
    let config = TrainConfig {
        epochs: get(&lines, &fields, "epochs")?,
        batch_size: get(&lines, &fields, "batch_size")?,
        val_fraction: get(&lines, &fields, "val_fraction")?,
        learning_rate: get(&lines, &fields, "learning_rate")?,
        beta1: get(&lines, &fields, "beta1")?,
        beta2: get(&lines, &fields, "beta2")?,
        epsilon: get(&lines, &fields, "epsilon")?,
        shuffle_seed: get(&lines, &fields, "shuffle_seed")?,
    };
    let step: u64 = get(&lines, &fields, "adam_step")?;

    let layout = spec.tensor_layout();
    let mut params = Vec::with_capacity(layout.len());
    let mut m = Vec::with_capacity(layout.len());
    let mut v = Vec::with_capacity(layout.len());
    for (name, shape, _) in layout {
        let rest = lines.header("tensor")?;
        let dims: Vec<usize> = rest.get(1..).unwrap_or_default().iter().filter_map(|d| d.parse().ok()).collect();
        if rest.first().map(String::as_str) != Some(name) || dims != shape {
            return Err(Error::Shape {
                layer: name.to_string(),
                message: format!(
                    "{file} line {}: checkpoint has `{}`, expected {name} {shape:?}",
                    lines.line,
                    rest.join(" ")
                ),
            });
        }
        let len = shape.iter().product();
        params.push(Tensor {
            name: name.to_string(),
            shape,
            data: lines.values(len)?,
        });
        lines.header("moment1")?;
        m.push(lines.values(len)?);
        lines.header("moment2")?;
        v.push(lines.values(len)?);
    }
    Ok(TrainedNet {
        network: Network { spec, params },
        adam: AdamState { step, m, v },
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Architecture;

    #[test]
    fn checkpoint_round_trips_exactly() {
        for arch in Architecture::ALL {
            let spec = NetSpec::new(arch, 9, 3, 0.3, 11);
            let network = Network::<f64>::init(&spec).unwrap();
            let mut adam = AdamState::new(&network.params);
            adam.step = 4;
            adam.m[0][0] = 1.0 / 3.0;
            adam.v[2][1] = 1e-300;
            let net = TrainedNet {
                network,
                adam,
                config: TrainConfig::default(),
            };
            let mut buf = Vec::new();
            save_checkpoint(&net, &mut buf).unwrap();
            let back: TrainedNet<f64> = load_checkpoint(&buf[..], "net.txt").unwrap();
            assert_eq!(back, net);
        }
    }

    #[test]
    fn truncated_checkpoint_reports_the_line() {
        let spec = NetSpec::new(Architecture::Dnn, 5, 2, 0.0, 1);
        let net = TrainedNet {
            network: Network::<f64>::init(&spec).unwrap(),
            adam: AdamState::new(&Network::<f64>::init(&spec).unwrap().params),
            config: TrainConfig::default(),
        };
        let mut buf = Vec::new();
        save_checkpoint(&net, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(22).collect::<Vec<_>>().join("\n");
        let err = load_checkpoint::<f64, _>(cut.as_bytes(), "net.txt").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 23, .. }), "{err}");
    }
}
