// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Slow, direct reference implementations of the analysis routines.

#![allow(dead_code, clippy::needless_range_loop)]

use glyphforge_core::encoder::Embedding;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_vectors(seed: u64, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

pub fn embeddings(prefix: &str, vectors: &[Vec<f64>]) -> Vec<Embedding> {
    vectors
        .iter()
        .enumerate()
        .map(|(i, v)| Embedding::new(format!("{prefix}{i:03}"), v.clone()))
        .collect()
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for i in 0..a.len() {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    ab / (aa.sqrt() * bb.sqrt())
}

pub fn rdm(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                m[i][j] = 1.0 - cos(&vectors[i], &vectors[j]);
            }
        }
    }
    m
}

pub fn upper(m: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..m.len() {
        for j in i + 1..m.len() {
            out.push(m[i][j]);
        }
    }
    out
}

/// Mid-rank of every value by counting.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let below = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

pub fn spearman(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    pearson(&ranks(&upper(a)), &ranks(&upper(b)))
}

pub fn match_matrix(s: &[Vec<f64>], a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    s.iter().map(|x| a.iter().map(|y| cos(x, y)).collect()).collect()
}

/// `(matches, total)` overall, scanning each row for its first maximum.
pub fn matching(m: &[Vec<f64>], sketch_cat: &[&str], pict_cat: &[&str]) -> (usize, usize, Vec<usize>) {
    let mut hits = 0;
    let mut best_cols = Vec::new();
    for (r, row) in m.iter().enumerate() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let best = row.iter().position(|&v| v == max).unwrap();
        best_cols.push(best);
        if sketch_cat[r] == pict_cat[best] {
            hits += 1;
        }
    }
    (hits, m.len(), best_cols)
}

pub struct Residual {
    pub category: String,
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    pub d_hat: Vec<f64>,
}

/// Residual queries with categories visited in sorted order.
pub fn residuals(members: &[(String, Vec<f64>)]) -> Vec<Residual> {
    let mut cats: Vec<String> = members.iter().map(|m| m.0.clone()).collect();
    cats.sort();
    cats.dedup();
    let dim = members[0].1.len();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut vs = Vec::new();
    for c in &cats {
        let mut sum = vec![0.0; dim];
        let mut count = 0.0;
        for (cat, z) in members {
            if cat == c {
                let n = norm(z);
                for k in 0..dim {
                    sum[k] += z[k] / n;
                }
                count += 1.0;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();
        let n = norm(&mean);
        vs.push(mean.iter().map(|m| m / n).collect::<Vec<f64>>());
    }
    let mut d = vec![0.0; dim];
    for v in &vs {
        for k in 0..dim {
            d[k] += v[k] / vs.len() as f64;
        }
    }
    let dn = norm(&d);
    let d_hat: Vec<f64> = d.iter().map(|x| x / dn).collect();
    cats.into_iter()
        .zip(vs)
        .map(|(category, v)| {
            let proj: f64 = (0..dim).map(|k| v[k] * d_hat[k]).sum();
            let r = (0..dim).map(|k| v[k] - proj * d_hat[k]).collect();
            Residual {
                category,
                v,
                r,
                d_hat: d_hat.clone(),
            }
        })
        .collect()
}

/// Every candidate scored, fully sorted (score descending, id ascending),
/// then cut to `k`.
pub fn top_k(query: &[f64], candidates: &[(String, Vec<f64>)], k: usize) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = candidates.iter().map(|(id, v)| (id.clone(), cos(query, v))).collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}
