//! Reference computations that share no code with the library.

#![allow(dead_code)]

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// Exact rank by Gaussian elimination over the rationals. Every `f64`
/// converts to a rational exactly, so this is the rank of the matrix as
/// stored, with no tolerance anywhere.
pub fn rational_rank(rows: &[Vec<f64>]) -> usize {
    let mut m: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| BigRational::from_float(v).expect("finite entry")).collect())
        .collect();
    let n_cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..n_cols {
        let Some(p) = (rank..m.len()).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let pivot = m[rank][col].clone();
        for i in rank + 1..m.len() {
            if m[i][col].is_zero() {
                continue;
            }
            let f = &m[i][col] / &pivot;
            for j in col..n_cols {
                let delta = &f * &m[rank][j];
                m[i][j] -= delta;
            }
        }
        rank += 1;
    }
    rank
}

/// Rational matrix-vector product.
pub fn rational_apply(rows: &[Vec<f64>], p: &[f64]) -> Vec<BigRational> {
    rows.iter()
        .map(|r| {
            r.iter().zip(p).fold(BigRational::zero(), |acc, (&a, &b)| {
                acc + BigRational::from_float(a).unwrap() * BigRational::from_float(b).unwrap()
            })
        })
        .collect()
}

pub fn rational_l1(a: &[BigRational], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(BigRational::zero(), |acc, (x, &y)| acc + (x - BigRational::from_float(y).unwrap()).abs())
        .to_f64()
        .unwrap()
}

/// Resolving matrix straight from its definition, summing `p_x(x)` into row
/// `table[x][y]` of column `y`.
pub fn resolving_by_definition(p_x: &[f64], table: &[Vec<usize>], n_z: usize) -> Vec<Vec<f64>> {
    let n_y = table.first().map_or(0, |r| r.len());
    let mut r = vec![vec![0.0; n_y]; n_z];
    for (x, row) in table.iter().enumerate() {
        for (y, &z) in row.iter().enumerate() {
            r[z][y] += p_x[x];
        }
    }
    r
}

/// W1 on the integer line through the cumulative distribution functions.
pub fn line_w1(p: &[f64], q: &[f64]) -> f64 {
    let (mut fp, mut fq, mut acc) = (0.0, 0.0, 0.0);
    for i in 0..p.len().saturating_sub(1) {
        fp += p[i];
        fq += q[i];
        acc += (fp - fq).abs();
    }
    acc
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

/// Inverse of a bijective table by direct search: `inv[z] = (x, y)`.
pub fn brute_inverse(table: &[Vec<usize>], n_z: usize) -> Vec<Option<(usize, usize)>> {
    let mut inv = vec![None; n_z];
    for (x, row) in table.iter().enumerate() {
        for (y, &z) in row.iter().enumerate() {
            assert!(inv[z].is_none(), "table is not injective at z = {z}");
            inv[z] = Some((x, y));
        }
    }
    inv
}

/// Every map from `n` positions to `k` values, in lexicographic order.
pub fn all_maps(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = k.pow(n as u32);
    (0..total).map(move |mut code| {
        let mut v = vec![0; n];
        for slot in v.iter_mut() {
            *slot = code % k;
            code /= k;
        }
        v
    })
}
