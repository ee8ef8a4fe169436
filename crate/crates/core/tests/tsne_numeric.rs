use postlabel::rng;
use postlabel::tfidf::SparseRow;
use postlabel::tsne::{
    calibrate_row, cosine_distance_matrix, embed, fit, gradient, joint_probabilities,
    kl_divergence, objective, SquareMatrix, TsneConfig,
};
use proptest::prelude::*;
use rand::Rng;

/// KL(P || Q(Y)) written out directly from the definition.
fn kl_reference(p: &SquareMatrix<f64>, y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let w = |i: usize, j: usize| {
        let dx = y[i][0] - y[j][0];
        let dy = y[i][1] - y[j][1];
        1.0 / (1.0 + dx * dx + dy * dy)
    };
    let mut z = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                z += w(i, j);
            }
        }
    }
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p.data[i * n + j];
            if i != j && pij > 0.0 {
                kl += pij * (pij / (w(i, j) / z)).ln();
            }
        }
    }
    kl
}

fn random_instance(seed: u64) -> (SquareMatrix<f64>, Vec<[f64; 2]>) {
    let mut r = rng::seeded(seed);
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
    let y = (0..n)
        .map(|_| [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)])
        .collect();
    (p, y)
}

/// Max over entries of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
pub fn gradient_check_error(p: &SquareMatrix<f64>, y: &[[f64; 2]]) -> f64 {
    let analytic = gradient(p, y);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..y.len() {
        for d in 0..2 {
            let mut plus = y.to_vec();
            let mut minus = y.to_vec();
            plus[i][d] += h;
            minus[i][d] -= h;
            let numeric = (kl_reference(p, &plus) - kl_reference(p, &minus)) / (2.0 * h);
            let a = analytic[i][d];
            let scale = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / scale);
        }
    }
    worst
}

#[test]
fn gradient_matches_central_differences() {
    for seed in 0..20 {
        let (p, y) = random_instance(seed);
        let err = gradient_check_error(&p, &y);
        assert!(err < 1e-5, "instance {seed}: relative error {err}");
    }
}

#[test]
fn objective_matches_reference_and_is_translation_invariant() {
    for seed in 100..110 {
        let (p, y) = random_instance(seed);
        assert!((objective(&p, &y) - kl_reference(&p, &y)).abs() < 1e-12);
        let shifted: Vec<[f64; 2]> = y.iter().map(|[a, b]| [a + 3.7, b - 1.25]).collect();
        assert!((objective(&p, &y) - objective(&p, &shifted)).abs() < 1e-12);
    }
}

fn entropy_bits(d: &[f64], beta: f64) -> f64 {
    let w: Vec<f64> = d.iter().map(|x| (-beta * x).exp()).collect();
    let z: f64 = w.iter().sum();
    -w.iter().map(|v| v / z).filter(|&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>()
}

#[test]
fn calibration_agrees_with_grid_search() {
    let d = [0.1, 0.2, 0.9];
    let target_bits = 1.0; // perplexity 2
    let mut best = (f64::INFINITY, 0.0);
    let step = 1e-6;
    let mut beta = 0.0;
    while beta <= 40.0 {
        let gap = (entropy_bits(&d, beta) - target_bits).abs();
        if gap < best.0 {
            best = (gap, beta);
        }
        beta += step;
    }
    let grid_entropy = entropy_bits(&d, best.1);
    let c = calibrate_row(&d, 2.0, 1e-5, 50).unwrap();
    assert!(c.converged);
    let h: f64 = -c.p.iter().map(|p| p * p.log2()).sum::<f64>();
    assert!((h - grid_entropy).abs() < 1e-4, "bisection {h} vs grid {grid_entropy}");
    assert!((c.beta - best.1).abs() < 1e-3);
}

/// Two groups of unit rows over disjoint column blocks, plus jitter.
pub fn two_blob_rows(per_blob: usize, seed: u64) -> (Vec<SparseRow<f64>>, Vec<usize>) {
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

/// Whether some direction (searched on a fine angular grid) separates the
/// two classes of 2-D points.
pub fn separable_by_projection(coords: &[[f64; 2]], labels: &[usize]) -> bool {
    (0..3600).any(|k| {
        let t = k as f64 * std::f64::consts::PI / 3600.0;
        let (c, s) = (t.cos(), t.sin());
        let proj = |i: usize| coords[i][0] * c + coords[i][1] * s;
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

#[test]
fn planted_blobs_are_separable() {
    // Forty points: the step size follows the usual small-sample rule
    // max(N / (4 * exaggeration), 50) instead of the default 200.
    let (rows, labels) = two_blob_rows(20, 5);
    let config = TsneConfig {
        perplexity: 10.0,
        learning_rate: 50.0,
        seed: 3,
        ..TsneConfig::default()
    };
    let out = embed(&rows, &config).unwrap();
    assert!(out.unconverged_rows.is_empty());
    assert!(separable_by_projection(&out.embedding.coords, &labels));
    let again = embed(&rows, &config).unwrap();
    assert_eq!(again.embedding.coords, out.embedding.coords);
}

#[test]
fn kl_decreases_after_exaggeration() {
    let (rows, _) = two_blob_rows(100, 8);
    let config = TsneConfig {
        perplexity: 30.0,
        seed: 1,
        ..TsneConfig::default()
    };
    let trace = embed(&rows, &config).unwrap().embedding.kl_trace;
    assert_eq!(trace.len(), config.n_iter);
    assert!(trace.iter().all(|&k| k >= 0.0 && k.is_finite()));
    let start = config.exaggeration_iters + 10;
    assert!(trace[config.n_iter - 1] <= trace[config.exaggeration_iters]);
    for t in start..trace.len() - 1 {
        assert!(
            trace[t + 1] <= trace[t] * 1.01,
            "uptick > 1% at {t}: {} -> {}",
            trace[t],
            trace[t + 1]
        );
    }
    for t in (start..trace.len() - 50).step_by(50) {
        assert!(trace[t + 50] <= trace[t], "window at {t} did not decrease");
    }
}

#[test]
fn perplexity_fifty_on_five_hundred_points() {
    let (rows, _) = two_blob_rows(250, 2);
    let d = cosine_distance_matrix(&rows).unwrap();
    let j = joint_probabilities(&d, 50.0, 1e-5, 50).unwrap();
    assert!(j.unconverged_rows.is_empty());
    for (i, p) in j.row_perplexity.iter().enumerate() {
        assert!((p - 50.0).abs() <= 1e-3, "row {i}: {p}");
    }
    let total: f64 = j.p.data.iter().sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(j.p.is_symmetric());
}

#[test]
fn fit_rejects_divergence_with_iteration() {
    let (rows, _) = two_blob_rows(10, 1);
    let d = cosine_distance_matrix(&rows).unwrap();
    let j = joint_probabilities(&d, 5.0, 1e-5, 50).unwrap();
    let config = TsneConfig {
        perplexity: 5.0,
        learning_rate: 1e300,
        ..TsneConfig::default()
    };
    let err = fit(&j.p, &config).unwrap_err();
    assert!(err.to_string().contains("iteration"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn kl_is_nonnegative(raw in prop::collection::vec((0.001f64..1.0, 0.001f64..1.0), 2..12)) {
        let (sp, sq): (f64, f64) = raw.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let p: Vec<f64> = raw.iter().map(|(x, _)| x / sp).collect();
        let q: Vec<f64> = raw.iter().map(|(_, y)| y / sq).collect();
        prop_assert!(kl_divergence(&p, &q) >= -1e-15);
    }
}
