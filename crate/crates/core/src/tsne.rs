//! Exact t-SNE to two dimensions over cosine distances.
//!
//! Affinities: per-point Gaussian kernels `exp(-beta_i * d_ij)` on cosine
//! distance, each `beta_i` bisected so the conditional distribution has the
//! requested perplexity (entropy in bits), then symmetrized and normalized.
//! Optimization: gradient descent with momentum on KL(P || Q) where Q is the
//! Student-t (one degree of freedom) kernel over the embedding.

use std::io::{BufRead, Write};

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;
use crate::tfidf::SparseRow;

/// Floor applied to P entries before normalization and to Q entries.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub n_iter: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_iter: usize,
    pub seed: u64,
    pub perplexity_tol: f64,
    pub perplexity_max_bisect: usize,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 50.0,
            n_iter: 1000,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch_iter: 250,
            seed: 0,
            perplexity_tol: 1e-5,
            perplexity_max_bisect: 50,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n_points: usize) -> Result<()> {
        let bad = |m: String| Err(Error::config("tsne", m));
        if n_points < 2 {
            return bad(format!("need at least 2 points, got {n_points}"));
        }
        if !(self.perplexity > 0.0) || self.perplexity >= (n_points - 1) as f64 {
            return bad(format!(
                "perplexity {} must be in (0, N - 1 = {})",
                self.perplexity,
                n_points - 1
            ));
        }
        if self.n_iter < self.exaggeration_iters {
            return bad("n_iter must be at least exaggeration_iters".into());
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive".into());
        }
        Ok(())
    }
}

/// Dense row-major N×N matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// `1 - <row_i, row_j>` for unit-norm rows, clamped to [0, 2].
pub fn cosine_distance_matrix<T: Scalar>(rows: &[SparseRow<T>]) -> Result<SquareMatrix<T>> {
    let empty: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].is_empty()).collect();
    if !empty.is_empty() {
        return Err(Error::Data(format!(
            "cosine distance undefined for empty rows {empty:?}"
        )));
    }
    let n = rows.len();
    let two = T::lit(2.0);
    let upper: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| (T::one() - rows[i].dot(&rows[j])).max(T::zero()).min(two))
                .collect()
        })
        .collect();
    let mut d = SquareMatrix::zeros(n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            d.data[i * n + j] = v;
            d.data[j * n + i] = v;
        }
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowCalibration<T> {
    /// Conditional probabilities over the other points, summing to 1.
    pub p: Vec<T>,
    pub beta: f64,
    /// `2^H` of `p`, H in bits.
    pub perplexity: f64,
    pub converged: bool,
}

/// Conditional distribution `exp(-beta * d) / Z` and its entropy in bits.
fn conditional(d: &[f64], d_min: f64, beta: f64) -> (Vec<f64>, f64) {
    let mut p: Vec<f64> = d.iter().map(|&x| (-(x - d_min) * beta).exp()).collect();
    let z: f64 = p.iter().sum();
    let mut h = 0.0;
    for v in &mut p {
        *v /= z;
        if *v > 0.0 {
            h -= *v * v.log2();
        }
    }
    (p, h)
}

/// Bisects the precision of point i's Gaussian kernel so that the
/// conditional distribution over the other points has the target
/// perplexity. `d_row` excludes the point itself.
pub fn calibrate_row<T: Scalar>(
    d_row: &[T],
    perplexity: f64,
    tol: f64,
    max_bisect: usize,
) -> Result<RowCalibration<T>> {
    if d_row.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("calibrate_row: non-finite distance".into()));
    }
    if d_row.is_empty() {
        return Err(Error::Data("calibrate_row: no neighbors".into()));
    }
    let d: Vec<f64> = d_row.iter().map(|x| x.as_f64()).collect();
    let d_min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut beta = 1.0;
    let (mut p, mut h) = conditional(&d, d_min, beta);
    let mut converged = false;
    for _ in 0..max_bisect {
        let perp = h.exp2();
        if (perp - perplexity).abs() <= tol {
            converged = true;
            break;
        }
        if perp > perplexity {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (lo + beta) / 2.0;
        }
        (p, h) = conditional(&d, d_min, beta);
    }
    if !converged {
        converged = (h.exp2() - perplexity).abs() <= tol;
    }
    Ok(RowCalibration {
        p: p.into_iter().map(T::lit).collect(),
        beta,
        perplexity: h.exp2(),
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointProbabilities<T> {
    pub p: SquareMatrix<T>,
    /// Achieved perplexity per row.
    pub row_perplexity: Vec<f64>,
    /// Rows whose bisection did not reach the tolerance.
    pub unconverged_rows: Vec<usize>,
}

/// Calibrated conditionals, symmetrized as `(P + P^T) / 2N`, floored at
/// [`PROB_FLOOR`] off the diagonal, then renormalized to sum to 1.
pub fn joint_probabilities<T: Scalar>(
    d: &SquareMatrix<T>,
    perplexity: f64,
    tol: f64,
    max_bisect: usize,
) -> Result<JointProbabilities<T>> {
    let n = d.n;
    if n < 2 {
        return Err(Error::Data("joint_probabilities: need at least 2 points".into()));
    }
    let rows: Vec<RowCalibration<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let others: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| d.get(i, j).as_f64())
                .collect();
            if others.len() == 1 {
                return Ok(RowCalibration {
                    p: vec![1.0],
                    beta: 0.0,
                    perplexity: 1.0,
                    converged: true,
                });
            }
            calibrate_row(&others, perplexity, tol, max_bisect)
        })
        .collect::<Result<_>>()?;
    let mut cond = vec![0.0f64; n * n];
    for (i, r) in rows.iter().enumerate() {
        let mut it = r.p.iter();
        for j in (0..n).filter(|&j| j != i) {
            cond[i * n + j] = *it.next().unwrap();
        }
    }
    let denom = 2.0 * n as f64;
    let mut joint = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                joint[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / denom).max(PROB_FLOOR);
            }
        }
    }
    let total: f64 = joint.iter().sum();
    let p = SquareMatrix {
        n,
        data: joint.into_iter().map(|v| T::lit(v / total)).collect(),
    };
    Ok(JointProbabilities {
        p,
        row_perplexity: rows.iter().map(|r| r.perplexity).collect(),
        unconverged_rows: rows
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.converged)
            .map(|(i, _)| i)
            .collect(),
    })
}

/// `Σ p ln(p / q)` over entries with `p > 0`.
pub fn kl_divergence<T: Scalar>(p: &[T], q: &[T]) -> T {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > T::zero())
        .map(|(&a, &b)| a * (a / b).ln())
        .sum()
}

#[inline]
fn kernel<T: Scalar>(y: &[[T; 2]], i: usize, j: usize) -> T {
    let dx = y[i][0] - y[j][0];
    let dy = y[i][1] - y[j][1];
    T::one() / (T::one() + dx * dx + dy * dy)
}

/// Student-t joint probabilities of an embedding, floored at
/// [`PROB_FLOOR`], with a zero diagonal.
pub fn student_t_q<T: Scalar>(y: &[[T; 2]]) -> SquareMatrix<T> {
    let n = y.len();
    let z = kernel_sum(y);
    let floor = T::lit(PROB_FLOOR);
    let mut q = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                q.data[i * n + j] = (kernel(y, i, j) / z).max(floor);
            }
        }
    }
    q
}

fn kernel_sum<T: Scalar>(y: &[[T; 2]]) -> T {
    let n = y.len();
    let row_sums: Vec<T> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = T::zero();
            for j in (0..n).filter(|&j| j != i) {
                s += kernel(y, i, j);
            }
            s
        })
        .collect();
    row_sums.into_iter().sum()
}

/// KL(P || Q(Y)).
pub fn objective<T: Scalar>(p: &SquareMatrix<T>, y: &[[T; 2]]) -> T {
    kl_divergence(&p.data, &student_t_q(y).data)
}

/// Gradient of KL(exaggeration·P || Q(Y)) with respect to Y, and
/// KL(P || Q(Y)) for the unexaggerated P, in one pass.
fn gradient_and_kl<T: Scalar>(
    p: &SquareMatrix<T>,
    y: &[[T; 2]],
    exaggeration: T,
) -> (Vec<[T; 2]>, T) {
    let n = y.len();
    let z = kernel_sum(y);
    let floor = T::lit(PROB_FLOOR);
    let four = T::lit(4.0);
    let per_row: Vec<([T; 2], T)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = [T::zero(); 2];
            let mut kl = T::zero();
            for j in (0..n).filter(|&j| j != i) {
                let w = kernel(y, i, j);
                // Written out rather than `max` so a collapsed kernel sum
                // (0/0) surfaces as NaN instead of being floored away.
                let q = w / z;
                let q = if q < floor { floor } else { q };
                let pij = p.get(i, j);
                if pij > T::zero() {
                    kl += pij * (pij / q).ln();
                }
                let coeff = (exaggeration * pij - q) * w;
                g[0] += coeff * (y[i][0] - y[j][0]);
                g[1] += coeff * (y[i][1] - y[j][1]);
            }
            ([g[0] * four, g[1] * four], kl)
        })
        .collect();
    let kl = per_row.iter().map(|r| r.1).sum();
    (per_row.into_iter().map(|r| r.0).collect(), kl)
}

/// `4 Σ_j (p_ij - q_ij)(1 + |y_i - y_j|^2)^-1 (y_i - y_j)` for every i.
pub fn gradient<T: Scalar>(p: &SquareMatrix<T>, y: &[[T; 2]]) -> Vec<[T; 2]> {
    gradient_and_kl(p, y, T::one()).0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding2D<T> {
    pub coords: Vec<[T; 2]>,
    /// KL(P || Q) after each iteration's update.
    pub kl_trace: Vec<T>,
    pub config: TsneConfig,
}

/// Optimizes a 2-D embedding for the joint probabilities `p`.
pub fn fit<T: Scalar>(p: &SquareMatrix<T>, config: &TsneConfig) -> Result<Embedding2D<T>> {
    let n = p.n;
    let mut rng = rng::seeded(config.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid stddev");
    let mut y: Vec<[T; 2]> = (0..n)
        .map(|_| [T::lit(normal.sample(&mut rng)), T::lit(normal.sample(&mut rng))])
        .collect();
    let mut update = vec![[T::zero(); 2]; n];
    let lr = T::lit(config.learning_rate);
    let mut kl_trace = Vec::with_capacity(config.n_iter);
    for iter in 0..config.n_iter {
        let exaggeration = if iter < config.exaggeration_iters {
            T::lit(config.early_exaggeration)
        } else {
            T::one()
        };
        let momentum = T::lit(if iter < config.momentum_switch_iter {
            config.initial_momentum
        } else {
            config.final_momentum
        });
        let (grad, kl) = gradient_and_kl(p, &y, exaggeration);
        if !kl.is_finite() {
            return Err(Error::Numeric(format!(
                "t-SNE diverged at iteration {iter}; lower the learning rate"
            )));
        }
        if iter > 0 {
            kl_trace.push(kl);
        }
        for ((yi, ui), gi) in y.iter_mut().zip(&mut update).zip(&grad) {
            for d in 0..2 {
                ui[d] = momentum * ui[d] - lr * gi[d];
                yi[d] += ui[d];
            }
        }
        if y.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "t-SNE diverged at iteration {iter}; lower the learning rate"
            )));
        }
    }
    if config.n_iter > 0 {
        kl_trace.push(objective(p, &y));
    }
    Ok(Embedding2D {
        coords: y,
        kl_trace,
        config: config.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct EmbedOutcome<T> {
    pub embedding: Embedding2D<T>,
    pub row_perplexity: Vec<f64>,
    pub unconverged_rows: Vec<usize>,
}

/// Cosine distances → calibrated joint P → optimized embedding.
pub fn embed<T: Scalar>(rows: &[SparseRow<T>], config: &TsneConfig) -> Result<EmbedOutcome<T>> {
    config.validate(rows.len())?;
    let d = cosine_distance_matrix(rows)?;
    let joint = joint_probabilities(
        &d,
        config.perplexity,
        config.perplexity_tol,
        config.perplexity_max_bisect,
    )?;
    if !joint.unconverged_rows.is_empty() {
        log::warn!(
            "t-SNE: {} rows did not reach perplexity {} within tolerance",
            joint.unconverged_rows.len(),
            config.perplexity
        );
    }
    let embedding = fit(&joint.p, config)?;
    Ok(EmbedOutcome {
        embedding,
        row_perplexity: joint.row_perplexity,
        unconverged_rows: joint.unconverged_rows,
    })
}

pub fn save_embedding<T: Scalar, W: Write>(e: &Embedding2D<T>, mut out: W) -> Result<()> {
    writeln!(out, "TSNE v1 {}", e.coords.len())?;
    for (i, [x, y]) in e.coords.iter().enumerate() {
        writeln!(out, "{i} {x} {y}")?;
    }
    Ok(())
}

pub fn save_kl_trace<T: Scalar, W: Write>(e: &Embedding2D<T>, mut out: W) -> Result<()> {
    for (i, kl) in e.kl_trace.iter().enumerate() {
        writeln!(out, "{} {kl}", i + 1)?;
    }
    Ok(())
}

pub fn load_embedding<T: Scalar, R: BufRead>(reader: R) -> Result<Vec<[T; 2]>> {
    let file = "embedding";
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::parse(file, 1, "missing header"))?;
    let n: usize = header
        .strip_prefix("TSNE v1 ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::parse(file, 1, "expected `TSNE v1 N`"))?;
    let mut coords = Vec::with_capacity(n);
    for (i, line) in lines.enumerate() {
        let line = line?;
        let f: Vec<&str> = line.split(' ').collect();
        let parsed = (f.len() == 3)
            .then(|| Some((f[0].parse::<usize>().ok()?, f[1].parse().ok()?, f[2].parse().ok()?)))
            .flatten();
        match parsed {
            Some((row, x, y)) if row == coords.len() => coords.push([x, y]),
            _ => return Err(Error::parse(file, i + 2, "expected `row x y`")),
        }
    }
    if coords.len() != n {
        return Err(Error::parse(file, n + 1, "row count differs from header"));
    }
    Ok(coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sparse(cols: &[usize], vals: &[f64]) -> SparseRow<f64> {
        SparseRow {
            cols: cols.to_vec(),
            vals: vals.to_vec(),
        }
    }

    #[test]
    fn cosine_distance_examples() {
        let s = 0.5f64.sqrt();
        let rows = vec![
            sparse(&[0], &[1.0]),
            sparse(&[0], &[1.0]),
            sparse(&[1], &[1.0]),
            sparse(&[0, 1], &[s, s]),
        ];
        let d = cosine_distance_matrix(&rows).unwrap();
        assert_eq!(d.get(0, 1), 0.0);
        assert_eq!(d.get(0, 2), 1.0);
        assert_eq!(d.get(2, 2), 0.0);
        assert!(d.is_symmetric());
        // Antipodal rows only arise from signed vectors.
        let anti = vec![sparse(&[0], &[1.0]), sparse(&[0], &[-1.0])];
        assert_eq!(cosine_distance_matrix(&anti).unwrap().get(0, 1), 2.0);
    }

    #[test]
    fn empty_rows_rejected_by_id() {
        let err = cosine_distance_matrix(&[sparse(&[0], &[1.0]), sparse(&[], &[])]).unwrap_err();
        assert!(err.to_string().contains("[1]"));
    }

    #[test]
    fn equal_distances_give_uniform_row() {
        let c = calibrate_row(&[0.3f64, 0.3], 2.0, 1e-5, 50).unwrap();
        assert_eq!(c.p, vec![0.5, 0.5]);
        assert!(c.converged);
        assert!((c.perplexity - 2.0).abs() < 1e-12);
    }

    #[test]
    fn max_perplexity_limit_is_near_uniform() {
        let d = [0.1f64, 0.4, 0.5, 0.9, 1.3];
        let c = calibrate_row(&d, 4.999, 1e-6, 200).unwrap();
        for p in c.p {
            assert!((p - 0.2).abs() < 0.01, "{p}");
        }
    }

    #[test]
    fn non_finite_distance_rejected() {
        assert!(calibrate_row(&[0.1f64, f64::NAN], 1.5, 1e-5, 50).is_err());
    }

    #[test]
    fn joint_two_points_and_equidistant_triple() {
        let mut d = SquareMatrix::<f64>::zeros(2);
        d.data = vec![0.0, 0.7, 0.7, 0.0];
        let j = joint_probabilities(&d, 1.0, 1e-5, 50).unwrap();
        assert_eq!(j.p.data, vec![0.0, 0.5, 0.5, 0.0]);

        let mut d = SquareMatrix::<f64>::zeros(3);
        d.data = vec![0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        let j = joint_probabilities(&d, 2.0, 1e-5, 50).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                let expect = if i == k { 0.0 } else { 1.0 / 6.0 };
                assert!((j.p.get(i, k) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.5f64, 0.5], &[0.5, 0.5]), 0.0);
        let kl = kl_divergence(&[0.5f64, 0.5], &[0.9, 0.1]);
        let expect = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln();
        assert!((kl - expect).abs() < 1e-15);
        assert!((kl - 0.510_826).abs() < 1e-6);
    }

    #[test]
    fn symmetric_pair_gradients_are_opposite() {
        let mut p = SquareMatrix::<f64>::zeros(2);
        p.data = vec![0.0, 0.5, 0.5, 0.0];
        let y = [[1e-3, -2e-3], [-1e-3, 2e-3]];
        let g = gradient(&p, &y);
        assert_eq!(g[0][0], -g[1][0]);
        assert_eq!(g[0][1], -g[1][1]);
    }

    #[test]
    fn gradient_vanishes_when_p_equals_q() {
        let y = [[0.0f64, 0.0], [1.0, 0.5], [-0.3, 2.0], [0.7, -1.1]];
        let q = student_t_q(&y);
        for g in gradient(&q, &y) {
            assert!(g[0].abs() < 1e-15 && g[1].abs() < 1e-15);
        }
    }

    #[test]
    fn config_validation() {
        let c = TsneConfig::default();
        assert!(c.validate(40).is_err());
        assert!(c.validate(52).is_ok());
        let c = TsneConfig {
            n_iter: 100,
            ..TsneConfig::default()
        };
        assert!(c.validate(500).is_err());
    }

    #[test]
    fn embedding_file_round_trip() {
        let e = Embedding2D {
            coords: vec![[0.25f64, -1.5], [3.0, 1e-9]],
            kl_trace: vec![0.5, 0.25],
            config: TsneConfig::default(),
        };
        let mut buf = Vec::new();
        save_embedding(&e, &mut buf).unwrap();
        assert!(buf.starts_with(b"TSNE v1 2\n0 0.25 -1.5\n"));
        assert_eq!(load_embedding::<f64, _>(&buf[..]).unwrap(), e.coords);
        let mut buf = Vec::new();
        save_kl_trace(&e, &mut buf).unwrap();
        assert_eq!(buf, b"1 0.5\n2 0.25\n");
    }
}
