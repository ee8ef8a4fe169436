//! k-means++ seeding and Lloyd iterations with restarts, over sparse TF-IDF
//! rows or dense coordinates.
//!
//! On unit-norm TF-IDF rows squared Euclidean distance equals
//! `2 - 2 cos`, so this is cosine clustering in disguise.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::{squared_distance, Scalar};
use crate::tfidf::{TfidfMatrix, Vocabulary};

/// Read-only access to a set of points, whatever their storage.
pub trait PointSet<T: Scalar>: Sync {
    fn n_points(&self) -> usize;
    fn dim(&self) -> usize;
    /// Squared Euclidean distance from point `i` to a dense vector whose
    /// squared norm is `center_sq_norm`.
    fn sq_dist(&self, i: usize, center: &[T], center_sq_norm: T) -> T;
    /// Adds point `i` into `acc`.
    fn add_to(&self, i: usize, acc: &mut [T]);
    fn to_dense(&self, i: usize) -> Vec<T> {
        let mut v = vec![T::zero(); self.dim()];
        self.add_to(i, &mut v);
        v
    }
    /// Bit pattern of point `i`, used to count distinct points.
    fn fingerprint(&self, i: usize) -> Vec<u64>;
}

/// Row-major dense points.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseRows<T> {
    pub dim: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> DenseRows<T> {
    pub fn new(dim: usize, data: Vec<T>) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim), "data length not a multiple of dim");
        DenseRows { dim, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let dim = rows.first().map_or(1, Vec::len);
        Self::new(dim, rows.concat())
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

impl<T: Scalar> PointSet<T> for DenseRows<T> {
    fn n_points(&self) -> usize {
        self.data.len() / self.dim
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn sq_dist(&self, i: usize, center: &[T], _: T) -> T {
        squared_distance(self.row(i), center)
    }

    fn add_to(&self, i: usize, acc: &mut [T]) {
        for (a, &x) in acc.iter_mut().zip(self.row(i)) {
            *a += x;
        }
    }

    fn fingerprint(&self, i: usize) -> Vec<u64> {
        self.row(i).iter().map(|x| x.as_f64().to_bits()).collect()
    }
}

impl<T: Scalar> PointSet<T> for TfidfMatrix<T> {
    fn n_points(&self) -> usize {
        self.rows.len()
    }

    fn dim(&self) -> usize {
        self.n_cols
    }

    fn sq_dist(&self, i: usize, center: &[T], center_sq_norm: T) -> T {
        // ||c||^2 plus, on the row's support, (x - c)^2 - c^2.
        let mut d = center_sq_norm;
        for (c, x) in self.rows[i].iter() {
            let y = center[c];
            d += (x - y) * (x - y) - y * y;
        }
        d.max(T::zero())
    }

    fn add_to(&self, i: usize, acc: &mut [T]) {
        for (c, x) in self.rows[i].iter() {
            acc[c] += x;
        }
    }

    fn fingerprint(&self, i: usize) -> Vec<u64> {
        self.rows[i]
            .iter()
            .flat_map(|(c, x)| [c as u64, x.as_f64().to_bits()])
            .collect()
    }
}

pub fn distinct_points<T: Scalar, P: PointSet<T> + ?Sized>(points: &P) -> usize {
    (0..points.n_points())
        .map(|i| points.fingerprint(i))
        .collect::<HashSet<_>>()
        .len()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansConfig {
    pub k: usize,
    pub n_init: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

/// Hard ceiling on `max_iter`.
pub const MAX_ITER_CEILING: usize = 1000;

impl KmeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KmeansConfig {
            k,
            n_init: 10,
            max_iter: 300,
            tol: 1e-4,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config("kmeans", m));
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if self.n_init == 0 {
            return bad("n_init must be at least 1".into());
        }
        if self.max_iter == 0 || self.max_iter > MAX_ITER_CEILING {
            return bad(format!("max_iter must be in 1..={MAX_ITER_CEILING}"));
        }
        if !(self.tol >= 0.0) {
            return bad("tol must be nonnegative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel<T> {
    pub centroids: Vec<Vec<T>>,
    pub assignments: Vec<usize>,
    pub inertia: T,
    pub n_iter_run: usize,
    /// Inertia reported by each Lloyd step of the winning run.
    pub inertia_trace: Vec<T>,
    pub config: KmeansConfig,
}

impl<T: Scalar> ClusterModel<T> {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

fn sq_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum()
}

/// k-means++ seeding: the first center uniformly at random, each further
/// center drawn with probability proportional to its squared distance from
/// the nearest center chosen so far.
pub fn kmeanspp_init<T: Scalar, P: PointSet<T> + ?Sized>(
    points: &P,
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<T>>> {
    let n = points.n_points();
    let distinct = distinct_points(points);
    if k == 0 || distinct < k {
        return Err(Error::Data(format!(
            "k-means++ needs at least k = {k} distinct points, found {distinct}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let first = points.to_dense(rng.random_range(0..n));
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| points.sq_dist(i, &first, sq_norm(&first)).as_f64())
        .collect();
    let mut centers = vec![first];
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in nearest.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` past the running sum; take the last
            // point with mass.
            chosen.unwrap_or_else(|| nearest.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            return Err(Error::Numeric("k-means++: all remaining mass is zero".into()));
        };
        let c = points.to_dense(pick);
        let c_norm = sq_norm(&c);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(points.sq_dist(i, &c, c_norm).as_f64());
        }
        centers.push(c);
    }
    Ok(centers)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LloydStep<T> {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<T>>,
    /// Against the input centroids.
    pub inertia: T,
}

/// Nearest centroid per point (lowest id on ties) and the distance to it.
pub fn assign<T: Scalar, P: PointSet<T> + ?Sized>(
    points: &P,
    centroids: &[Vec<T>],
) -> (Vec<usize>, Vec<T>) {
    let norms: Vec<T> = centroids.iter().map(|c| sq_norm(c)).collect();
    (0..points.n_points())
        .map(|i| {
            let mut best = (0, points.sq_dist(i, &centroids[0], norms[0]));
            for (j, c) in centroids.iter().enumerate().skip(1) {
                let d = points.sq_dist(i, c, norms[j]);
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .unzip()
}

/// One assignment + update step. A cluster left empty is re-seeded at the
/// point farthest from its assigned centroid, so k stays constant.
pub fn lloyd_step<T: Scalar, P: PointSet<T> + ?Sized>(
    points: &P,
    centroids: &[Vec<T>],
) -> LloydStep<T> {
    let k = centroids.len();
    let dim = points.dim();
    let (assignments, dists) = assign(points, centroids);
    let inertia = dists.iter().copied().sum();
    let mut sums = vec![vec![T::zero(); dim]; k];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        points.add_to(i, &mut sums[a]);
        counts[a] += 1;
    }
    let mut used = HashSet::new();
    let mut order: Vec<usize> = (0..dists.len()).collect();
    // Farthest first; stable, so ties go to the lower index.
    order.sort_by(|&a, &b| dists[b].partial_cmp(&dists[a]).unwrap());
    let mut far = order.into_iter();
    for (j, sum) in sums.iter_mut().enumerate() {
        if counts[j] > 0 {
            let n = T::of_usize(counts[j]);
            for v in sum.iter_mut() {
                *v /= n;
            }
        } else {
            let p = far
                .by_ref()
                .find(|&i| used.insert(points.fingerprint(i)))
                .unwrap_or(0);
            *sum = points.to_dense(p);
        }
    }
    LloydStep {
        assignments,
        centroids: sums,
        inertia,
    }
}

struct RunResult<T> {
    centroids: Vec<Vec<T>>,
    assignments: Vec<usize>,
    inertia: T,
    n_iter: usize,
    trace: Vec<T>,
}

fn single_run<T: Scalar, P: PointSet<T> + ?Sized>(
    points: &P,
    config: &KmeansConfig,
    seed: u64,
) -> Result<RunResult<T>> {
    let mut centroids = kmeanspp_init(points, config.k, seed)?;
    let mut trace = Vec::new();
    let mut n_iter = 0;
    let tol = T::lit(config.tol);
    while n_iter < config.max_iter {
        let step = lloyd_step(points, &centroids);
        n_iter += 1;
        trace.push(step.inertia);
        let shift: T = centroids
            .iter()
            .zip(&step.centroids)
            .map(|(a, b)| squared_distance(a, b))
            .sum::<T>()
            .sqrt();
        centroids = step.centroids;
        if shift < tol {
            break;
        }
    }
    let (assignments, dists) = assign(points, &centroids);
    Ok(RunResult {
        centroids,
        assignments,
        inertia: dists.into_iter().sum(),
        n_iter,
        trace,
    })
}

/// Runs `n_init` seeded restarts (run `i` seeded with `seed + i`) in parallel
/// and keeps the lowest final inertia, lowest run index on ties.
pub fn fit<T: Scalar, P: PointSet<T> + ?Sized>(
    points: &P,
    config: &KmeansConfig,
) -> Result<ClusterModel<T>> {
    config.validate()?;
    let runs: Vec<RunResult<T>> = (0..config.n_init)
        .into_par_iter()
        .map(|r| single_run(points, config, config.seed.wrapping_add(r as u64)))
        .collect::<Result<_>>()?;
    let best = runs
        .into_iter()
        .reduce(|best, r| if r.inertia < best.inertia { r } else { best })
        .expect("n_init >= 1");
    Ok(ClusterModel {
        centroids: best.centroids,
        assignments: best.assignments,
        inertia: best.inertia,
        n_iter_run: best.n_iter,
        inertia_trace: best.trace,
        config: config.clone(),
    })
}

/// The `m` heaviest centroid components per cluster with their weights,
/// descending; equal weights in lexicographic term order.
pub fn top_terms<T: Scalar>(
    model: &ClusterModel<T>,
    vocab: &Vocabulary,
    m: usize,
) -> Result<Vec<Vec<(String, T)>>> {
    if let Some(c) = model.centroids.first() {
        if c.len() != vocab.len() {
            return Err(Error::Data(format!(
                "centroid dimension {} does not match vocabulary size {}",
                c.len(),
                vocab.len()
            )));
        }
    }
    let m = if m > vocab.len() {
        log::warn!("top_terms: m = {m} exceeds vocabulary size {}, clamping", vocab.len());
        vocab.len()
    } else {
        m
    };
    Ok(model
        .centroids
        .iter()
        .map(|c| ranked_columns(c, m)
            .into_iter()
            .map(|j| (vocab.term(j).to_string(), c[j]))
            .collect())
        .collect())
}

/// Column indices of the `m` largest weights; ties go to the lower column
/// (columns are in lexicographic term order).
pub(crate) fn ranked_columns<T: Scalar>(weights: &[T], m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..weights.len()).collect();
    idx.sort_by(|&a, &b| weights[b].partial_cmp(&weights[a]).unwrap().then(a.cmp(&b)));
    idx.truncate(m);
    idx
}

const MODEL_MAGIC: &str = "KMEANS v1";

pub fn save_model<T: Scalar, W: Write>(model: &ClusterModel<T>, mut out: W) -> Result<()> {
    let dim = model.centroids.first().map_or(0, Vec::len);
    writeln!(out, "{MODEL_MAGIC} {} {dim}", model.k())?;
    for c in &model.centroids {
        let line: Vec<String> = c.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    for (row, a) in model.assignments.iter().enumerate() {
        writeln!(out, "{row} {a}")?;
    }
    Ok(())
}

/// Centroids and assignments from a model file.
pub fn load_model<T: Scalar, R: BufRead>(reader: R) -> Result<(Vec<Vec<T>>, Vec<usize>)> {
    let file = "kmeans model";
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(file, 1, "missing header"))?;
    let header = header?;
    let dims: Vec<usize> = header
        .strip_prefix(MODEL_MAGIC)
        .ok_or_else(|| Error::parse(file, 1, "bad header"))?
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(file, 1, "bad dimensions"))?;
    let &[k, dim] = dims.as_slice() else {
        return Err(Error::parse(file, 1, "expected k and dim"));
    };
    let mut centroids = Vec::with_capacity(k);
    let mut assignments = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let lineno = i + 1;
        if centroids.len() < k {
            let c: Vec<T> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(file, lineno, "bad centroid value"))?;
            if c.len() != dim {
                return Err(Error::parse(file, lineno, "centroid length != dim"));
            }
            centroids.push(c);
        } else {
            let (row, a) = line
                .split_once(' ')
                .ok_or_else(|| Error::parse(file, lineno, "expected `row cluster`"))?;
            let row: usize = row.parse().map_err(|_| Error::parse(file, lineno, "bad row"))?;
            let a: usize = a.parse().map_err(|_| Error::parse(file, lineno, "bad cluster"))?;
            if row != assignments.len() || a >= k {
                return Err(Error::parse(file, lineno, "row out of order or cluster out of range"));
            }
            assignments.push(a);
        }
    }
    Ok((centroids, assignments))
}
