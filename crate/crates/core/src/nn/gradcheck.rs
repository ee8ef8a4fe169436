//! Finite-difference verification of the analytic gradients.

use rand::Rng;

use super::model::{loss_and_grads, loss_only, Mode, Network};
use super::{Architecture, NetSpec};
use crate::error::{Error, Result};
use crate::rng;

/// Default acceptance bound on the relative error.
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;

/// Central-difference step.
const STEP: f64 = 1e-5;

/// Denominator floor of the relative error. Central differences at step 1e-5
/// carry roughly 1e-11 of rounding noise, so gradients much smaller than this
/// floor are compared absolutely instead of relatively.
const RELATIVE_FLOOR: f64 = 1e-6;

const BATCH: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub architecture: Architecture,
    pub dropout_rate: f64,
    pub tensor: String,
    pub entries: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checks: Vec<TensorCheck>,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }

    pub fn render(&self) -> String {
        let mut out = String::from("architecture\tdropout\ttensor\tentries\tmax_rel_err\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{:.3e}\n",
                c.architecture, c.dropout_rate, c.tensor, c.entries, c.max_rel_err
            ));
        }
        out.push_str(&format!(
            "max relative error {:.3e} (tolerance {:.0e}): {}\n",
            self.max_rel_err,
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        ));
        out
    }
}

fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(RELATIVE_FLOOR)
}

/// Compares every gradient entry of `n_trials` random networks built from
/// `spec` (batch of 4 random rows) against central differences. Dropout, if
/// enabled, uses one fixed mask per trial for all loss evaluations.
pub fn grad_check(spec: &NetSpec, n_trials: usize, tolerance: f64) -> Result<GradCheckReport> {
    spec.validate()?;
    if spec.input_dim > 20 {
        return Err(Error::config(
            "grad_check",
            format!("input width {} is too large for exhaustive checking (max 20)", spec.input_dim),
        ));
    }
    let layout = spec.tensor_layout();
    let mut worst = vec![0.0f64; layout.len()];
    for trial in 0..n_trials.max(1) {
        let trial_seed = rng::derive_index(spec.seed, trial as u64);
        let mut r = rng::seeded(trial_seed);
        let mut net = Network::<f64>::init(&NetSpec {
            seed: trial_seed,
            ..spec.clone()
        })?;
        // Nonzero biases so their gradients are exercised away from zero.
        for t in net.params.iter_mut().filter(|t| t.name.ends_with(".bias")) {
            for v in &mut t.data {
                *v = r.random_range(-0.1..0.1);
            }
        }
        let x: Vec<f64> = (0..BATCH * spec.input_dim)
            .map(|_| r.random_range(0.0..1.0))
            .collect();
        let targets: Vec<usize> = (0..BATCH).map(|_| r.random_range(0..spec.n_classes)).collect();
        let mode = if spec.dropout_rate > 0.0 {
            Mode::Train {
                mask_seed: r.random(),
            }
        } else {
            Mode::Infer
        };
        let (_, grads) = loss_and_grads(&net, &x, BATCH, &targets, mode)?;
        for (ti, grad) in grads.iter().enumerate() {
            for (j, &analytic) in grad.iter().enumerate() {
                let original = net.params[ti].data[j];
                net.params[ti].data[j] = original + STEP;
                let plus = loss_only(&net, &x, BATCH, &targets, mode)?;
                net.params[ti].data[j] = original - STEP;
                let minus = loss_only(&net, &x, BATCH, &targets, mode)?;
                net.params[ti].data[j] = original;
                let numeric = (plus - minus) / (2.0 * STEP);
                worst[ti] = worst[ti].max(relative_error(analytic, numeric));
            }
        }
    }
    let checks: Vec<TensorCheck> = layout
        .into_iter()
        .zip(&worst)
        .map(|((name, shape, _), &err)| TensorCheck {
            architecture: spec.architecture,
            dropout_rate: spec.dropout_rate,
            tensor: name.to_string(),
            entries: shape.iter().product(),
            max_rel_err: err,
        })
        .collect();
    let max_rel_err = worst.iter().copied().fold(0.0, f64::max);
    Ok(GradCheckReport {
        checks,
        max_rel_err,
        tolerance,
    })
}

/// Both architectures, with dropout off and at 0.3 (fixed mask).
pub fn grad_check_suite(
    input_dim: usize,
    n_classes: usize,
    n_trials: usize,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut checks = Vec::new();
    let mut max_rel_err = 0.0f64;
    for arch in Architecture::ALL {
        for dropout in [0.0, 0.3] {
            let spec = NetSpec::new(arch, input_dim, n_classes, dropout, seed);
            let report = grad_check(&spec, n_trials, tolerance)?;
            max_rel_err = max_rel_err.max(report.max_rel_err);
            checks.extend(report.checks);
        }
    }
    Ok(GradCheckReport {
        checks,
        max_rel_err,
        tolerance,
    })
}
