//! Randomized Tukey HSD test over a documents x systems score matrix.
//!
//! For each permutation the scores inside every document row are shuffled
//! independently, and the test statistic is the widest spread between
//! per-system score sums. Comparing each observed pairwise difference
//! against that max-spread null distribution controls the family-wise error
//! across all system pairs.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KpError, Result};

/// Documents x systems score matrix with no missing cells.
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    systems: Vec<String>,
    docs: Vec<String>,
    /// Row-major: `scores[doc][system]`.
    scores: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(systems: Vec<String>, docs: Vec<String>, scores: Vec<Vec<f64>>) -> Result<Self> {
        if systems.len() < 2 {
            return Err(KpError::InvalidArgument(
                "score matrix needs at least 2 systems".into(),
            ));
        }
        if docs.len() < 2 {
            return Err(KpError::InvalidArgument(
                "score matrix needs at least 2 documents".into(),
            ));
        }
        if docs.len() != scores.len() {
            return Err(KpError::InvalidArgument(format!(
                "{} doc ids but {} score rows",
                docs.len(),
                scores.len()
            )));
        }
        if systems.iter().collect::<HashSet<_>>().len() != systems.len() {
            return Err(KpError::InvalidArgument("duplicate system names".into()));
        }
        if docs.iter().collect::<HashSet<_>>().len() != docs.len() {
            return Err(KpError::InvalidArgument("duplicate document ids".into()));
        }
        for (doc, row) in docs.iter().zip(&scores) {
            if row.len() != systems.len() {
                return Err(KpError::InvalidArgument(format!(
                    "document {doc:?} has {} scores for {} systems",
                    row.len(),
                    systems.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(KpError::InvalidArgument(format!(
                    "document {doc:?} has a non-finite score"
                )));
            }
        }
        Ok(ScoreMatrix {
            systems,
            docs,
            scores,
        })
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn docs(&self) -> &[String] {
        &self.docs
    }

    pub fn n_systems(&self) -> usize {
        self.systems.len()
    }

    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.scores
    }

    /// Per-system mean scores.
    pub fn system_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_systems()];
        for row in &self.scores {
            for (sum, v) in sums.iter_mut().zip(row) {
                *sum += v;
            }
        }
        let n = self.n_docs() as f64;
        sums.iter().map(|s| s / n).collect()
    }

    /// Parse a TSV matrix: header `doc_id<TAB>system...`, one row per
    /// document. Lines starting with `#` are ignored.
    pub fn from_tsv<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader)
            .lines()
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(|e| KpError::io("<score matrix>", e))?
            .into_iter()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| KpError::EmptyInput("empty score matrix".into()))?;
        let mut columns = header.split('\t');
        let first = columns.next().unwrap_or_default();
        if first != "doc_id" {
            return Err(KpError::InvalidArgument(format!(
                "score matrix header must start with doc_id, got {first:?}"
            )));
        }
        let systems: Vec<String> = columns.map(str::to_string).collect();

        let mut docs = Vec::new();
        let mut scores = Vec::new();
        for line in lines {
            let mut fields = line.split('\t');
            let doc = fields.next().unwrap_or_default().to_string();
            let row = fields
                .map(|v| {
                    v.parse::<f64>().map_err(|_| {
                        KpError::InvalidArgument(format!("bad score {v:?} for doc {doc:?}"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            docs.push(doc);
            scores.push(row);
        }
        ScoreMatrix::new(systems, docs, scores)
    }

    /// Parse the JSON form: `{"systems": [...], "docs": [...], "scores": [[...]]}`.
    pub fn from_json<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            systems: Vec<String>,
            docs: Vec<String>,
            scores: Vec<Vec<f64>>,
        }
        let raw: Raw = serde_json::from_reader(reader)
            .map_err(|e| KpError::InvalidArgument(format!("bad score matrix json: {e}")))?;
        ScoreMatrix::new(raw.systems, raw.docs, raw.scores)
    }

    /// Build from per-system score columns over the same documents.
    pub fn from_columns(systems: Vec<String>, docs: Vec<String>, columns: &[Vec<f64>]) -> Result<Self> {
        if systems.len() != columns.len() {
            return Err(KpError::InvalidArgument(format!(
                "{} systems but {} score columns",
                systems.len(),
                columns.len()
            )));
        }
        for column in columns {
            if column.len() != docs.len() {
                return Err(KpError::InvalidArgument(
                    "every system must score the identical document set".into(),
                ));
            }
        }
        let scores = (0..docs.len())
            .map(|d| columns.iter().map(|c| c[d]).collect())
            .collect();
        ScoreMatrix::new(systems, docs, scores)
    }
}

/// Result of the randomized test: symmetric pairwise p-value matrix plus the
/// inputs needed to reproduce it.
#[derive(Debug, Clone, Serialize)]
pub struct HsdResult {
    pub systems: Vec<String>,
    pub means: Vec<f64>,
    /// `p_values[i][j]`, symmetric, diagonal fixed at 1.
    pub p_values: Vec<Vec<f64>>,
    pub permutations: u64,
    pub alpha: f64,
    pub seed: u64,
    /// Every document row was constant, so no pair can ever separate.
    pub degenerate: bool,
}

impl HsdResult {
    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.p_values[i][j]
    }

    /// Pairs (i, j) with p <= alpha.
    pub fn significant_pairs(&self) -> Vec<(usize, usize)> {
        let m = self.systems.len();
        let mut pairs = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                if self.p_values[i][j] <= self.alpha {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    /// For each system, the systems it significantly beats (p <= alpha and a
    /// strictly higher mean).
    pub fn beats(&self) -> Vec<Vec<usize>> {
        let m = self.systems.len();
        let mut beats = vec![Vec::new(); m];
        for (i, j) in self.significant_pairs() {
            if self.means[i] > self.means[j] {
                beats[i].push(j);
            } else if self.means[j] > self.means[i] {
                beats[j].push(i);
            }
        }
        beats
    }
}

/// Letter label for a system index: a..z, then aa, ab, ...
pub fn system_letter(index: usize) -> String {
    let mut letters = Vec::new();
    let mut value = index;
    loop {
        letters.push(b'a' + (value % 26) as u8);
        if value < 26 {
            break;
        }
        value = value / 26 - 1;
    }
    letters.reverse();
    String::from_utf8(letters).expect("ascii letters")
}

/// Run the randomized Tukey HSD test.
///
/// Each permutation shuffles every document row independently with its own
/// RNG stream (ChaCha8, keyed by `seed`, stream = permutation index), so the
/// outcome is bit-identical for a given seed regardless of thread count.
pub fn tukey_hsd(
    matrix: &ScoreMatrix,
    permutations: u64,
    alpha: f64,
    seed: u64,
) -> Result<HsdResult> {
    if permutations < 1000 {
        return Err(KpError::InvalidArgument(
            "need at least 1000 permutations".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(KpError::InvalidArgument("alpha must be in (0, 1)".into()));
    }

    let m = matrix.n_systems();
    let rows = matrix.rows();
    let degenerate = rows
        .iter()
        .all(|row| row.iter().all(|v| *v == row[0]));

    // Observed pairwise differences, in the sum domain (scaling by the
    // document count changes nothing and saves divisions in the hot loop).
    let mut observed_sums = vec![0.0; m];
    for row in rows {
        for (sum, v) in observed_sums.iter_mut().zip(row) {
            *sum += v;
        }
    }
    let mut pair_index = Vec::new();
    let mut thresholds = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            pair_index.push((i, j));
            thresholds.push((observed_sums[i] - observed_sums[j]).abs());
        }
    }

    // Sort thresholds so each permutation only needs a binary search to
    // learn how many pairs its statistic reaches.
    let mut order: Vec<usize> = (0..thresholds.len()).collect();
    order.sort_by(|&a, &b| thresholds[a].total_cmp(&thresholds[b]));
    let sorted: Vec<f64> = order.iter().map(|&k| thresholds[k]).collect();

    let histogram = (0..permutations)
        .into_par_iter()
        .fold(
            || (vec![0u64; sorted.len() + 1], vec![0.0f64; m], Vec::new()),
            |(mut hist, mut sums, mut scratch), b| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b + 1);
                sums.iter_mut().for_each(|s| *s = 0.0);
                for row in rows {
                    scratch.clear();
                    scratch.extend_from_slice(row);
                    for i in (1..m).rev() {
                        let j = rng.random_range(0..=i);
                        scratch.swap(i, j);
                    }
                    for (sum, v) in sums.iter_mut().zip(&scratch) {
                        *sum += v;
                    }
                }
                let mut max = f64::NEG_INFINITY;
                let mut min = f64::INFINITY;
                for &s in &sums {
                    max = max.max(s);
                    min = min.min(s);
                }
                let stat = max - min;
                // Number of pairs whose observed difference the permuted
                // statistic reaches (ties count as reached).
                let reached = sorted.partition_point(|d| *d <= stat);
                hist[reached] += 1;
                (hist, sums, scratch)
            },
        )
        .map(|(hist, _, _)| hist)
        .reduce(
            || vec![0u64; sorted.len() + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    // hits for the pair at sorted position r = permutations whose statistic
    // reached at least r + 1 pairs.
    let mut suffix = 0u64;
    let mut hits_sorted = vec![0u64; sorted.len()];
    for r in (0..sorted.len()).rev() {
        suffix += histogram[r + 1];
        hits_sorted[r] = suffix;
    }

    let mut p_values = vec![vec![1.0; m]; m];
    for (rank, &k) in order.iter().enumerate() {
        let (i, j) = pair_index[k];
        let p = (hits_sorted[rank] + 1) as f64 / (permutations + 1) as f64;
        p_values[i][j] = p;
        p_values[j][i] = p;
    }

    Ok(HsdResult {
        systems: matrix.systems().to_vec(),
        means: matrix.system_means(),
        p_values,
        permutations,
        alpha,
        seed,
        degenerate,
    })
}
