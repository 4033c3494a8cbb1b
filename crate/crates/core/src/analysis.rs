// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Evaluation mathematics over embedding sets.
//!
//! Dissimilarity matrices and their rank correlation with permutation
//! tests, paired cosine summaries, zero-shot label ranking, cross-corpus
//! matching, and residualized category queries for retrieval.
//!
//! Every ranking breaks ties deterministically: by id for label and sign
//! rankings, by lowest column for argmax matching.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoder::Embedding;
use crate::error::{contract, Error, Result};
use crate::math;

/// Default number of Monte-Carlo permutations.
pub const DEFAULT_PERMUTATIONS: usize = 5000;

/// Default retrieval depth.
pub const DEFAULT_TOP_K: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cosine {
    pub value: f64,
    /// One of the vectors was all zeros; `value` is then 0.
    pub degenerate: bool,
}

pub fn cosine(x: &[f64], y: &[f64]) -> Result<Cosine> {
    if x.len() != y.len() {
        return Err(contract(format!(
            "cosine of vectors with dimensions {} and {}",
            x.len(),
            y.len()
        )));
    }
    let nx = math::sqrt(x.iter().map(|v| v * v).sum());
    let ny = math::sqrt(y.iter().map(|v| v * v).sum());
    if nx == 0.0 || ny == 0.0 {
        return Ok(Cosine {
            value: 0.0,
            degenerate: true,
        });
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok(Cosine {
        value: dot / (nx * ny),
        degenerate: false,
    })
}

fn unit(values: &[f64]) -> Option<Vec<f64>> {
    let norm = math::sqrt(values.iter().map(|v| v * v).sum());
    (norm > 0.0).then(|| values.iter().map(|v| v / norm).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Embeddings of uniform dimension with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    embeddings: Vec<Embedding>,
    dim: usize,
}

impl EmbeddingSet {
    pub fn new(embeddings: Vec<Embedding>) -> Result<Self> {
        let dim = embeddings.first().map_or(0, |e| e.dim());
        if let Some(e) = embeddings.iter().find(|e| e.dim() != dim) {
            return Err(contract(format!(
                "embedding `{}` has dimension {}, expected {dim}",
                e.id,
                e.dim()
            )));
        }
        let mut seen = BTreeSet::new();
        for e in &embeddings {
            if !seen.insert(e.id.as_str()) {
                return Err(contract(format!("duplicate embedding id `{}`", e.id)));
            }
        }
        if embeddings.iter().flat_map(|e| &e.values).any(|v| !v.is_finite()) {
            return Err(contract("embeddings must be finite"));
        }
        Ok(EmbeddingSet { embeddings, dim })
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embeddings(&self) -> &[Embedding] {
        &self.embeddings
    }

    pub fn ids(&self) -> Vec<String> {
        self.embeddings.iter().map(|e| e.id.clone()).collect()
    }

    pub fn into_embeddings(self) -> Vec<Embedding> {
        self.embeddings
    }
}

/// Dense row-major matrix with row and column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Representational dissimilarity matrix: `1 - cosine` between items.
#[derive(Debug, Clone, PartialEq)]
pub struct Rdm {
    ids: Vec<String>,
    data: Vec<f64>,
}

impl Rdm {
    /// Builds an RDM from raw entries, checking symmetry and the zero
    /// diagonal.
    pub fn from_entries(ids: Vec<String>, data: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if data.len() != n * n {
            return Err(contract("RDM entries do not form a square matrix"));
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(contract("RDM diagonal must be zero"));
            }
            for j in 0..i {
                if data[i * n + j] != data[j * n + i] {
                    return Err(contract("RDM must be symmetric"));
                }
            }
        }
        Ok(Rdm { ids, data })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n() + j]
    }

    /// Upper triangle without the diagonal, row by row.
    pub fn upper(&self) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect()
    }

    /// Entries with `transform` applied off the diagonal.
    pub fn map_entries(&self, transform: impl Fn(f64) -> f64) -> Rdm {
        let n = self.n();
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(k, &v)| if k / n == k % n { 0.0 } else { transform(v) })
            .collect();
        Rdm {
            ids: self.ids.clone(),
            data,
        }
    }
}

pub fn build_rdm(set: &EmbeddingSet) -> Result<Rdm> {
    let n = set.len();
    if n < 2 {
        return Err(contract("an RDM needs at least two items"));
    }
    let units: Vec<Vec<f64>> = set
        .embeddings()
        .iter()
        .map(|e| unit(&e.values).unwrap_or_else(|| vec![0.0; e.dim()]))
        .collect();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = if units[i] == units[j] {
                0.0
            } else {
                (1.0 - dot(&units[i], &units[j])).clamp(0.0, 2.0)
            };
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    Ok(Rdm { ids: set.ids(), data })
}

/// `sketch_rdm - image_rdm`, element-wise.
pub fn delta_rdm(sketch_rdm: &Rdm, image_rdm: &Rdm) -> Result<Matrix> {
    if sketch_rdm.ids != image_rdm.ids {
        return Err(contract("RDMs must share item ids in the same order"));
    }
    let n = sketch_rdm.n();
    Ok(Matrix {
        rows: n,
        cols: n,
        row_ids: sketch_rdm.ids.clone(),
        col_ids: sketch_rdm.ids.clone(),
        data: sketch_rdm
            .data
            .iter()
            .zip(&image_rdm.data)
            .map(|(s, i)| s - i)
            .collect(),
    })
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok(sxy / math::sqrt(sxx * syy))
}

fn check_pair(a: &Rdm, b: &Rdm) -> Result<()> {
    if a.n() != b.n() {
        return Err(contract(format!("RDM sizes differ: {} vs {}", a.n(), b.n())));
    }
    if a.n() < 3 {
        return Err(contract("rank correlation needs RDMs of at least 3 items"));
    }
    Ok(())
}

/// Spearman correlation of the two upper triangles.
pub fn spearman_upper(rdm_a: &Rdm, rdm_b: &Rdm) -> Result<f64> {
    check_pair(rdm_a, rdm_b)?;
    pearson(&average_ranks(&rdm_a.upper()), &average_ranks(&rdm_b.upper()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationReport {
    pub observed: f64,
    /// Value the two-sided test is centered on (0 for correlations).
    pub null_center: f64,
    pub permutations: usize,
    /// `(1 + #{|perm - center| >= |observed - center|}) / (1 + permutations)`
    pub p_value: f64,
    pub seed: u64,
}

impl PermutationReport {
    fn from_null(observed: f64, null_center: f64, null: &[f64], seed: u64) -> Self {
        let obs = math::abs(observed - null_center);
        let extreme = null.iter().filter(|&&v| math::abs(v - null_center) >= obs).count();
        PermutationReport {
            observed,
            null_center,
            permutations: null.len(),
            p_value: (1 + extreme) as f64 / (1 + null.len()) as f64,
            seed,
        }
    }
}

/// Relabeling `i` of `n` items: stream `i` of a ChaCha generator keyed by
/// `seed`, so every permutation is independent of evaluation order.
pub fn permutation(n: usize, seed: u64, index: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng);
    p
}

/// Two-sided Monte-Carlo test of [`spearman_upper`], relabeling rows and
/// columns of `rdm_b` jointly.
pub fn rsa_permutation(rdm_a: &Rdm, rdm_b: &Rdm, n_perm: usize, seed: u64) -> Result<PermutationReport> {
    if n_perm == 0 {
        return Err(crate::error::domain("at least one permutation is required"));
    }
    let observed = spearman_upper(rdm_a, rdm_b)?;
    let n = rdm_a.n();
    // A relabeling only rearranges the off-diagonal entries of `rdm_b`, so
    // its ranks can be computed once and gathered per permutation.
    let ranks_a = average_ranks(&rdm_a.upper());
    let ranks_b_upper = average_ranks(&rdm_b.upper());
    let mut ranks_b = vec![0.0; n * n];
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            ranks_b[i * n + j] = ranks_b_upper[k];
            ranks_b[j * n + i] = ranks_b_upper[k];
            k += 1;
        }
    }
    let mut gathered = vec![0.0; ranks_a.len()];
    let mut null = Vec::with_capacity(n_perm);
    for index in 0..n_perm {
        let pi = permutation(n, seed, index as u64);
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                gathered[k] = ranks_b[pi[i] * n + pi[j]];
                k += 1;
            }
        }
        null.push(pearson(&ranks_a, &gathered)?);
    }
    Ok(PermutationReport::from_null(observed, 0.0, &null, seed))
}

fn check_aligned(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<()> {
    if a.len() != b.len() {
        return Err(contract(format!("set sizes differ: {} vs {}", a.len(), b.len())));
    }
    if a.dim() != b.dim() {
        return Err(contract("embedding dimensions differ"));
    }
    if let Some((x, y)) = a.embeddings().iter().zip(b.embeddings()).find(|(x, y)| x.id != y.id) {
        return Err(contract(format!("misaligned pair `{}` / `{}`", x.id, y.id)));
    }
    Ok(())
}

/// Mean cosine over aligned image/sketch pairs, tested against random
/// re-pairings of the sketches.
///
/// The null is centered on the mean over all image×sketch pairs, which is
/// the exact expectation of a random re-pairing.
pub fn mean_paired_cosine(
    images: &EmbeddingSet,
    sketches: &EmbeddingSet,
    n_perm: usize,
    seed: u64,
) -> Result<(f64, PermutationReport)> {
    check_aligned(images, sketches)?;
    if images.is_empty() {
        return Err(contract("no pairs to compare"));
    }
    if n_perm == 0 {
        return Err(crate::error::domain("at least one permutation is required"));
    }
    let n = images.len();
    let mut sims = vec![0.0; n * n];
    for (i, a) in images.embeddings().iter().enumerate() {
        for (j, b) in sketches.embeddings().iter().enumerate() {
            sims[i * n + j] = cosine(&a.values, &b.values)?.value;
        }
    }
    let mean = (0..n).map(|i| sims[i * n + i]).sum::<f64>() / n as f64;
    let center = sims.iter().sum::<f64>() / (n * n) as f64;
    let null: Vec<f64> = (0..n_perm)
        .map(|index| {
            let pi = permutation(n, seed, index as u64);
            (0..n).map(|i| sims[i * n + pi[i]]).sum::<f64>() / n as f64
        })
        .collect();
    Ok((mean, PermutationReport::from_null(mean, center, &null, seed)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranked {
    pub id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

fn rank_by_score(scored: Vec<(String, f64)>, k: usize) -> Vec<Ranked> {
    let mut scored = scored;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (id, score))| Ranked { id, score, rank: i + 1 })
        .collect()
}

/// Labels ranked by cosine to `sketch`, best first.
pub fn zero_shot_classify(sketch: &Embedding, labels: &EmbeddingSet, k: usize) -> Result<Vec<Ranked>> {
    if labels.is_empty() {
        return Err(contract("label set is empty"));
    }
    if k > labels.len() {
        return Err(contract(format!("k = {k} exceeds {} labels", labels.len())));
    }
    let scored = labels
        .embeddings()
        .iter()
        .map(|l| Ok((l.id.clone(), cosine(&sketch.values, &l.values)?.value)))
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_by_score(scored, k))
}

/// Sketch × pictograph cosine matrix over L2-normalized rows.
pub type MatchMatrix = Matrix;

pub fn match_matrix(sketches: &EmbeddingSet, pictographs: &EmbeddingSet) -> Result<MatchMatrix> {
    if sketches.dim() != pictographs.dim() && !sketches.is_empty() && !pictographs.is_empty() {
        return Err(contract(format!(
            "sketch dimension {} differs from pictograph dimension {}",
            sketches.dim(),
            pictographs.dim()
        )));
    }
    let norm = |set: &EmbeddingSet| -> Vec<Vec<f64>> {
        set.embeddings()
            .iter()
            .map(|e| unit(&e.values).unwrap_or_else(|| vec![0.0; e.dim()]))
            .collect()
    };
    let (s, a) = (norm(sketches), norm(pictographs));
    let data = s
        .iter()
        .flat_map(|row| a.iter().map(move |col| dot(row, col)))
        .collect();
    Ok(Matrix {
        rows: s.len(),
        cols: a.len(),
        row_ids: sketches.ids(),
        col_ids: pictographs.ids(),
        data,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub matches: usize,
    pub total: usize,
}

impl Tally {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.matches as f64 / self.total as f64
        }
    }

    fn add(&mut self, hit: bool) {
        self.total += 1;
        self.matches += usize::from(hit);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchingAccuracy {
    /// Best-matching column for every row.
    pub best_column: Vec<usize>,
    pub per_category: BTreeMap<String, Tally>,
    /// Keyed by sketchability level, when levels were supplied.
    pub per_sketchability: BTreeMap<u8, Tally>,
    /// Keyed by `(category, sketchability)`.
    pub per_category_sketchability: BTreeMap<(String, u8), Tally>,
    pub overall: Tally,
}

/// Match/mismatch accounting of the row-wise argmax of `m`.
pub fn matching_accuracy<S: AsRef<str>, P: AsRef<str>>(
    m: &MatchMatrix,
    sketch_categories: &[S],
    pictograph_categories: &[P],
    sketchability: Option<&[u8]>,
) -> Result<MatchingAccuracy> {
    if sketch_categories.len() != m.rows || pictograph_categories.len() != m.cols {
        return Err(contract("category labels must cover every row and column"));
    }
    if sketchability.is_some_and(|s| s.len() != m.rows) {
        return Err(contract("sketchability levels must cover every row"));
    }
    if m.cols == 0 {
        return Err(contract("no pictographs to match against"));
    }
    let mut out = MatchingAccuracy {
        best_column: Vec::with_capacity(m.rows),
        per_category: BTreeMap::new(),
        per_sketchability: BTreeMap::new(),
        per_category_sketchability: BTreeMap::new(),
        overall: Tally::default(),
    };
    for r in 0..m.rows {
        let row = m.row(r);
        let best = (1..m.cols).fold(0, |b, c| if row[c] > row[b] { c } else { b });
        out.best_column.push(best);
        let category = sketch_categories[r].as_ref();
        let hit = category == pictograph_categories[best].as_ref();
        out.overall.add(hit);
        out.per_category.entry(category.into()).or_default().add(hit);
        if let Some(levels) = sketchability {
            out.per_sketchability.entry(levels[r]).or_default().add(hit);
            out.per_category_sketchability
                .entry((category.into(), levels[r]))
                .or_default()
                .add(hit);
        }
    }
    Ok(out)
}

/// Residualized per-category query direction.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryQuery {
    pub category: String,
    /// Unit mean of the category's unit embeddings.
    pub v: Vec<f64>,
    /// `v` with its component along the global mean direction removed.
    pub residual: Vec<f64>,
    /// Unit global mean direction shared by all categories.
    pub d_hat: Vec<f64>,
}

/// Builds one query per category (sorted by name) from labelled sketch
/// embeddings.
pub fn residual_query(sketches: &EmbeddingSet) -> Result<Vec<CategoryQuery>> {
    let mut groups: BTreeMap<&str, Vec<Vec<f64>>> = BTreeMap::new();
    for e in sketches.embeddings() {
        let category = e
            .category
            .as_deref()
            .ok_or_else(|| contract(format!("embedding `{}` has no category", e.id)))?;
        let z = unit(&e.values).ok_or_else(|| Error::Degenerate(format!("embedding `{}` is all zeros", e.id)))?;
        groups.entry(category).or_default().push(z);
    }
    if groups.len() < 2 {
        return Err(contract("residual queries need at least two categories"));
    }
    let dim = sketches.dim();
    let mut means = Vec::with_capacity(groups.len());
    for (category, members) in &groups {
        let mut mean = vec![0.0; dim];
        for z in members {
            mean.iter_mut().zip(z).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= members.len() as f64);
        let v =
            unit(&mean).ok_or_else(|| Error::Degenerate(format!("category `{category}` has a zero mean embedding")))?;
        means.push(((*category).into(), v));
    }
    let mut d = vec![0.0; dim];
    for (_, v) in &means {
        d.iter_mut().zip(v).for_each(|(a, b)| *a += b);
    }
    d.iter_mut().for_each(|a| *a /= means.len() as f64);
    let d_hat = unit(&d).ok_or_else(|| Error::Degenerate("global mean direction is zero".into()))?;
    Ok(means
        .into_iter()
        .map(|(category, v): (String, Vec<f64>)| {
            let along = dot(&v, &d_hat);
            let residual = v.iter().zip(&d_hat).map(|(a, b)| a - along * b).collect();
            CategoryQuery {
                category,
                v,
                residual,
                d_hat: d_hat.clone(),
            }
        })
        .collect())
}

/// Residual norms below this count as zero.
const ZERO_RESIDUAL: f64 = 1e-12;

/// Signs ranked by cosine to the query residual, best first.
pub fn top_k_retrieve(query: &CategoryQuery, signs: &EmbeddingSet, k: usize) -> Result<Vec<Ranked>> {
    if k > signs.len() {
        return Err(contract(format!("k = {k} exceeds {} signs", signs.len())));
    }
    if signs.dim() != query.residual.len() && !signs.is_empty() {
        return Err(contract("sign and query dimensions differ"));
    }
    let norm = math::sqrt(dot(&query.residual, &query.residual));
    if norm <= ZERO_RESIDUAL {
        return Err(Error::Degenerate(format!(
            "residual query for `{}` is zero",
            query.category
        )));
    }
    let r: Vec<f64> = query.residual.iter().map(|v| v / norm).collect();
    let scored = signs
        .embeddings()
        .iter()
        .map(|s| {
            let c = unit(&s.values).unwrap_or_else(|| vec![0.0; s.dim()]);
            (s.id.clone(), dot(&r, &c))
        })
        .collect();
    Ok(rank_by_score(scored, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn emb(id: &str, v: &[f64]) -> Embedding {
        Embedding::new(id, v.to_vec())
    }

    fn set(vs: &[&[f64]]) -> EmbeddingSet {
        EmbeddingSet::new(vs.iter().enumerate().map(|(i, v)| emb(&format!("e{i}"), v)).collect()).unwrap()
    }

    #[test]
    fn cosine_closed_forms() {
        assert!((cosine(&[2.0, 3.0], &[2.0, 3.0]).unwrap().value - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap().value, 0.0);
        let c = cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap().value;
        assert!((c - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let z = cosine(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(z.degenerate && z.value == 0.0);
        assert!(matches!(cosine(&[1.0], &[1.0, 2.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn set_invariants() {
        assert!(EmbeddingSet::new(vec![emb("a", &[1.0]), emb("a", &[2.0])]).is_err());
        assert!(EmbeddingSet::new(vec![emb("a", &[1.0]), emb("b", &[2.0, 1.0])]).is_err());
    }

    #[test]
    fn rdm_special_cases() {
        let same = build_rdm(&set(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]])).unwrap();
        assert!(same.data().iter().all(|&v| v == 0.0));
        let anti = build_rdm(&set(&[&[1.0, 2.0], &[-1.0, -2.0]])).unwrap();
        assert_eq!(anti.get(0, 1), 2.0);
        assert_eq!(anti.get(1, 0), 2.0);
        assert!(build_rdm(&set(&[&[1.0]])).is_err());
    }

    #[test]
    fn delta_special_cases() {
        let a = build_rdm(&set(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]])).unwrap();
        let d = delta_rdm(&a, &a).unwrap();
        assert!(d.data.iter().all(|&v| v == 0.0));
        let zero = Rdm::from_entries(a.ids().to_vec(), vec![0.0; 9]).unwrap();
        assert_eq!(delta_rdm(&a, &zero).unwrap().data, a.data());
        let other = Rdm::from_entries(vec!["x".to_string(), "y".to_string(), "z".to_string()], vec![0.0; 9]).unwrap();
        assert!(delta_rdm(&a, &other).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn constant_rdm_has_undefined_rho() {
        let a = build_rdm(&set(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]])).unwrap();
        let c = Rdm::from_entries(a.ids().to_vec(), {
            let mut d = vec![0.5; 9];
            d[0] = 0.0;
            d[4] = 0.0;
            d[8] = 0.0;
            d
        })
        .unwrap();
        assert_eq!(spearman_upper(&a, &c), Err(Error::UndefinedCorrelation));
    }

    #[test]
    fn zero_shot_ties_by_id() {
        let labels = EmbeddingSet::new(vec![
            emb("b", &[1.0, 0.0]),
            emb("a", &[2.0, 0.0]),
            emb("c", &[0.0, 1.0]),
        ])
        .unwrap();
        let top = zero_shot_classify(&emb("s", &[1.0, 0.0]), &labels, 3).unwrap();
        let ids: Vec<&str> = top.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(top[0].rank, 1);
        assert!(zero_shot_classify(&emb("s", &[1.0, 0.0]), &labels, 4).is_err());
        let empty = EmbeddingSet::new(vec![]).unwrap();
        assert!(zero_shot_classify(&emb("s", &[1.0, 0.0]), &empty, 0).is_err());
    }

    #[test]
    fn matching_edge_cases() {
        let s = set(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let a = set(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]]);
        let m = match_matrix(&s, &a).unwrap();
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(1, 0), 1.0);
        assert_eq!(m.get(0, 0), 0.0);
        let acc = matching_accuracy(&m, &["x", "y"], &["y", "x", "z"], Some(&[1, 2])).unwrap();
        assert_eq!(acc.overall, Tally { matches: 2, total: 2 });
        assert_eq!(acc.per_sketchability[&2], Tally { matches: 1, total: 1 });
        let wrong = matching_accuracy(&m, &["y", "x"], &["y", "x", "z"], None).unwrap();
        assert_eq!(wrong.overall.accuracy(), 0.0);
        assert!(matching_accuracy(&m, &["x"], &["y", "x", "z"], None).is_err());
        let bad = set(&[&[1.0, 0.0]]);
        assert!(match_matrix(&bad, &a).is_err());
    }

    #[test]
    fn residual_special_cases() {
        // Two categories mirrored about the x axis: d̂ = x, residuals ±y.
        let s = EmbeddingSet::new(vec![
            emb("a1", &[1.0, 1.0]).with_category("a"),
            emb("b1", &[1.0, -1.0]).with_category("b"),
        ])
        .unwrap();
        let q = residual_query(&s).unwrap();
        assert!((q[0].d_hat[0] - 1.0).abs() < 1e-15);
        assert!((q[0].residual[1] - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(q[0].residual[0].abs() < 1e-15);

        // Orthogonal to d̂ keeps v; parallel leaves nothing.
        let s = EmbeddingSet::new(vec![
            emb("a1", &[1.0, 0.0, 0.0]).with_category("a"),
            emb("b1", &[0.0, 1.0, 0.0]).with_category("b"),
            emb("c1", &[0.0, -1.0, 0.0]).with_category("c"),
        ])
        .unwrap();
        let q = residual_query(&s).unwrap();
        // d = (1/3, 0, 0): "a" is parallel, "b"/"c" orthogonal.
        assert!(q[0].residual.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(q[1].residual, q[1].v);
        assert!(matches!(top_k_retrieve(&q[0], &s, 1), Err(Error::Degenerate(_))));

        let one = EmbeddingSet::new(vec![emb("a1", &[1.0]).with_category("a")]).unwrap();
        assert!(residual_query(&one).is_err());
        let unlabeled = EmbeddingSet::new(vec![emb("a1", &[1.0]), emb("b", &[1.0]).with_category("b")]).unwrap();
        assert!(residual_query(&unlabeled).is_err());
        let cancel = EmbeddingSet::new(vec![
            emb("a1", &[1.0, 0.0]).with_category("a"),
            emb("b1", &[-1.0, 0.0]).with_category("b"),
        ])
        .unwrap();
        assert!(matches!(residual_query(&cancel), Err(Error::Degenerate(_))));
    }

    #[test]
    fn retrieval_edge_cases() {
        let s = EmbeddingSet::new(vec![
            emb("a1", &[1.0, 1.0]).with_category("a"),
            emb("b1", &[1.0, -1.0]).with_category("b"),
        ])
        .unwrap();
        let q = residual_query(&s).unwrap();
        let signs = EmbeddingSet::new(vec![
            emb("near", &[0.1, 1.0]),
            emb("far", &[0.1, -1.0]),
            emb("self", &q[0].residual),
        ])
        .unwrap();
        let top = top_k_retrieve(&q[0], &signs, 3).unwrap();
        assert_eq!(top[0].id, "self");
        assert_eq!(top[1].id, "near");
        let two = EmbeddingSet::new(vec![emb("near", &[0.1, 1.0]), emb("far", &[0.1, -1.0])]).unwrap();
        assert_eq!(top_k_retrieve(&q[0], &two, 1).unwrap()[0].id, "near");
        assert!(top_k_retrieve(&q[0], &two, 3).is_err());
    }

    #[test]
    fn mean_paired_special_cases() {
        let a = set(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let (m, rep) = mean_paired_cosine(&a, &a, 100, 3).unwrap();
        assert!((m - 1.0).abs() < 1e-15);
        assert!(rep.p_value > 0.0);
        let b = set(&[&[0.0, 1.0], &[1.0, 0.0], &[1.0, -1.0]]);
        let (m, _) = mean_paired_cosine(&a, &b, 10, 3).unwrap();
        assert!(m.abs() < 1e-15);
        let c = EmbeddingSet::new(vec![
            emb("x", &[1.0, 0.0]),
            emb("e1", &[0.0, 1.0]),
            emb("e2", &[1.0, 1.0]),
        ])
        .unwrap();
        assert!(mean_paired_cosine(&a, &c, 10, 3).is_err());
    }

    #[test]
    fn permutations_are_deterministic_streams() {
        assert_eq!(permutation(10, 4, 7), permutation(10, 4, 7));
        assert_ne!(permutation(10, 4, 7), permutation(10, 4, 8));
        let mut p = permutation(10, 4, 7);
        p.sort();
        assert_eq!(p, (0..10).collect::<Vec<_>>());
    }
}
