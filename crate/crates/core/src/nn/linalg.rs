//! Row-major matrix products, parallel over output rows.
//!
//! Each output element is accumulated by one thread in a fixed order, so
//! results do not depend on the number of workers.

use rayon::prelude::*;

use crate::scalar::Scalar;

/// `A (m×k) · B (k×n)`. Zero entries of `A` are skipped, which makes
/// sparse TF-IDF inputs cheap.
pub fn matmul<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![T::zero(); m * n];
    c.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (cj, &bj) in row.iter_mut().zip(b_row) {
                *cj += aip * bj;
            }
        }
    });
    c
}

/// `Aᵀ · B` for `A (m×k)`, `B (m×n)`: the `k×n` weight-gradient product.
pub fn matmul_at_b<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    let mut c = vec![T::zero(); k * n];
    c.par_chunks_mut(n.max(1)).enumerate().for_each(|(p, row)| {
        for i in 0..m {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let b_row = &b[i * n..(i + 1) * n];
            for (cj, &bj) in row.iter_mut().zip(b_row) {
                *cj += aip * bj;
            }
        }
    });
    c
}

/// `A · Bᵀ` for `A (m×n)`, `B (k×n)`: back-propagation through a dense layer.
pub fn matmul_a_bt<T: Scalar>(a: &[T], b: &[T], m: usize, n: usize, k: usize) -> Vec<T> {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![T::zero(); m * k];
    c.par_chunks_mut(k.max(1)).enumerate().for_each(|(i, row)| {
        let a_row = &a[i * n..(i + 1) * n];
        for (p, cp) in row.iter_mut().enumerate() {
            *cp = crate::scalar::dot(a_row, &b[p * n..(p + 1) * n]);
        }
    });
    c
}

/// Adds `bias` to every row of the `m×n` matrix `x`.
pub fn add_bias<T: Scalar>(x: &mut [T], bias: &[T]) {
    for row in x.chunks_mut(bias.len().max(1)) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// Column sums of an `m×n` matrix, accumulated top to bottom.
pub fn column_sums<T: Scalar>(x: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    for row in x.chunks(n.max(1)) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}
