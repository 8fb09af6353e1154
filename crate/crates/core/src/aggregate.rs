//! Post-inference aggregation: majority voting over generated sequences and
//! applying filter verdicts to ranked prediction lists.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{KpError, Result};
use crate::textnorm;

/// Raw model output for one document: one sequence for greedy decoding,
/// several for beam search.
#[derive(Debug, Clone)]
pub struct PredictionRecord {
    pub doc_id: String,
    pub sequences: Vec<Vec<String>>,
}

/// One ranked keyphrase with its voting score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredKeyphrase {
    pub keyphrase: String,
    pub score: f64,
}

/// Ranked, normalized, deduplicated keyphrases for one document.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPredictions {
    pub doc_id: String,
    pub keyphrases: Vec<ScoredKeyphrase>,
}

impl RankedPredictions {
    pub fn phrases(&self) -> Vec<String> {
        self.keyphrases.iter().map(|k| k.keyphrase.clone()).collect()
    }
}

/// Count, for each normalized keyphrase, the number of sequences containing
/// it (a sequence votes at most once per phrase), then rank by frequency.
/// Ties break by best average within-sequence position, then lexicographic.
pub fn majority_vote(record: &PredictionRecord) -> RankedPredictions {
    struct Tally {
        freq: u64,
        position_sum: f64,
    }

    let mut tallies: HashMap<String, Tally> = HashMap::new();
    for sequence in &record.sequences {
        let mut seen = HashSet::new();
        for (idx, raw) in sequence.iter().enumerate() {
            let normalized = textnorm::normalize(raw);
            if normalized.is_empty() || !seen.insert(normalized.clone()) {
                continue;
            }
            let tally = tallies.entry(normalized).or_insert(Tally {
                freq: 0,
                position_sum: 0.0,
            });
            tally.freq += 1;
            tally.position_sum += (idx + 1) as f64;
        }
    }

    let mut ranked: Vec<(String, u64, f64)> = tallies
        .into_iter()
        .map(|(phrase, t)| (phrase, t.freq, t.position_sum / t.freq as f64))
        .collect();
    ranked.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then(a.2.partial_cmp(&b.2).expect("positions are finite"))
            .then_with(|| a.0.cmp(&b.0))
    });

    RankedPredictions {
        doc_id: record.doc_id.clone(),
        keyphrases: ranked
            .into_iter()
            .map(|(keyphrase, freq, _)| ScoredKeyphrase {
                keyphrase,
                score: freq as f64,
            })
            .collect(),
    }
}

/// What to do with predictions that have no verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    #[default]
    Keep,
    Drop,
}

impl std::str::FromStr for MissingPolicy {
    type Err = KpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keep" => Ok(MissingPolicy::Keep),
            "drop" => Ok(MissingPolicy::Drop),
            other => Err(KpError::InvalidArgument(format!(
                "bad missing-policy {other:?} (expected keep or drop)"
            ))),
        }
    }
}

/// Relevance verdicts keyed by (doc id, normalized keyphrase).
#[derive(Debug, Clone, Default)]
pub struct VerdictSet {
    verdicts: HashMap<(String, String), bool>,
}

impl VerdictSet {
    pub fn insert(&mut self, doc_id: &str, keyphrase: &str, relevant: bool) -> Option<bool> {
        self.verdicts
            .insert((doc_id.to_string(), textnorm::normalize(keyphrase)), relevant)
    }

    pub fn get(&self, doc_id: &str, normalized_keyphrase: &str) -> Option<bool> {
        self.verdicts
            .get(&(doc_id.to_string(), normalized_keyphrase.to_string()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.verdicts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verdicts.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct FilterDiagnostics {
    pub removed: usize,
    pub missing: usize,
}

/// Drop keyphrases whose verdict is false; survivors keep their order.
pub fn apply_filter(
    predictions: &RankedPredictions,
    verdicts: &VerdictSet,
    missing_policy: MissingPolicy,
) -> (RankedPredictions, FilterDiagnostics) {
    let mut diagnostics = FilterDiagnostics::default();
    let mut kept = Vec::new();
    for entry in &predictions.keyphrases {
        let verdict = verdicts.get(&predictions.doc_id, &entry.keyphrase);
        let keep = match verdict {
            Some(relevant) => {
                if !relevant {
                    diagnostics.removed += 1;
                }
                relevant
            }
            None => {
                diagnostics.missing += 1;
                match missing_policy {
                    MissingPolicy::Keep => true,
                    MissingPolicy::Drop => {
                        diagnostics.removed += 1;
                        false
                    }
                }
            }
        };
        if keep {
            kept.push(entry.clone());
        }
    }
    (
        RankedPredictions {
            doc_id: predictions.doc_id.clone(),
            keyphrases: kept,
        },
        diagnostics,
    )
}

// --- file formats ---------------------------------------------------------

#[derive(Deserialize)]
struct RawPredictionLine {
    id: String,
    #[serde(default)]
    sequences: Option<Vec<SequenceRepr>>,
    #[serde(default)]
    keyphrases: Option<Vec<String>>,
    #[serde(default)]
    scores: Option<Vec<f64>>,
}

/// A generated sequence is either a list of keyphrases or a single string
/// holding delimiter-joined keyphrases.
#[derive(Deserialize)]
#[serde(untagged)]
enum SequenceRepr {
    List(Vec<String>),
    Joined(String),
}

/// Read a JSON-lines prediction file. Each line is either
/// `{"id", "sequences": [...]}` (raw model output) or
/// `{"id", "keyphrases": [...]}` (an already-ranked list).
pub fn load_prediction_records(
    path: impl AsRef<Path>,
    delimiter: &str,
) -> Result<Vec<PredictionRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| KpError::io(path, e))?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| KpError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPredictionLine = serde_json::from_str(&line)
            .map_err(|e| KpError::parse(path, line_no, e.to_string()))?;
        if !seen.insert(raw.id.clone()) {
            return Err(KpError::parse(
                path,
                line_no,
                format!("duplicate prediction id {:?}", raw.id),
            ));
        }
        let sequences = match (raw.sequences, raw.keyphrases) {
            (Some(seqs), _) => seqs
                .into_iter()
                .map(|s| match s {
                    SequenceRepr::List(items) => items,
                    SequenceRepr::Joined(joined) => joined
                        .split(delimiter)
                        .map(|piece| piece.trim().to_string())
                        .filter(|piece| !piece.is_empty())
                        .collect(),
                })
                .collect(),
            (None, Some(keyphrases)) => vec![keyphrases],
            (None, None) => {
                return Err(KpError::parse(
                    path,
                    line_no,
                    "line has neither \"sequences\" nor \"keyphrases\"",
                ))
            }
        };
        records.push(PredictionRecord {
            doc_id: raw.id,
            sequences,
        });
    }
    Ok(records)
}

/// Read a JSON-lines file of already-ranked predictions, preserving scores
/// when present.
pub fn load_ranked_predictions(path: impl AsRef<Path>) -> Result<Vec<RankedPredictions>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| KpError::io(path, e))?;
    let mut ranked = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| KpError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPredictionLine = serde_json::from_str(&line)
            .map_err(|e| KpError::parse(path, line_no, e.to_string()))?;
        if !seen.insert(raw.id.clone()) {
            return Err(KpError::parse(
                path,
                line_no,
                format!("duplicate prediction id {:?}", raw.id),
            ));
        }
        let keyphrases = raw.keyphrases.ok_or_else(|| {
            KpError::parse(path, line_no, "ranked prediction line needs \"keyphrases\"")
        })?;
        let scores = raw.scores.unwrap_or_default();
        if !scores.is_empty() && scores.len() != keyphrases.len() {
            return Err(KpError::parse(
                path,
                line_no,
                "\"scores\" length differs from \"keyphrases\"",
            ));
        }
        let n = keyphrases.len();
        let mut entries = Vec::with_capacity(n);
        let mut seen_norm = HashSet::new();
        for (i, kp) in keyphrases.into_iter().enumerate() {
            let normalized = textnorm::normalize(&kp);
            if normalized.is_empty() || !seen_norm.insert(normalized.clone()) {
                continue;
            }
            let score = scores.get(i).copied().unwrap_or((n - i) as f64);
            entries.push(ScoredKeyphrase {
                keyphrase: normalized,
                score,
            });
        }
        ranked.push(RankedPredictions {
            doc_id: raw.id,
            keyphrases: entries,
        });
    }
    Ok(ranked)
}

#[derive(Serialize)]
struct RankedLine<'a> {
    id: &'a str,
    keyphrases: Vec<&'a str>,
    scores: Vec<f64>,
}

/// Write ranked predictions as JSON-lines (`{"id", "keyphrases", "scores"}`).
pub fn write_ranked_predictions<W: Write>(
    mut out: W,
    ranked: &[RankedPredictions],
) -> std::io::Result<()> {
    for record in ranked {
        let line = RankedLine {
            id: &record.doc_id,
            keyphrases: record.keyphrases.iter().map(|k| k.keyphrase.as_str()).collect(),
            scores: record.keyphrases.iter().map(|k| k.score).collect(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct RawVerdictLine {
    id: String,
    keyphrase: String,
    #[serde(default)]
    relevant: Option<bool>,
    #[serde(default)]
    score: Option<f64>,
}

/// Read a JSON-lines verdict file. Lines carry either a boolean `relevant`
/// or a real `score` thresholded by `threshold`.
pub fn load_verdicts(path: impl AsRef<Path>, threshold: Option<f64>) -> Result<VerdictSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| KpError::io(path, e))?;
    let mut set = VerdictSet::default();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| KpError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawVerdictLine = serde_json::from_str(&line)
            .map_err(|e| KpError::parse(path, line_no, e.to_string()))?;
        let relevant = match (raw.relevant, raw.score) {
            (Some(r), _) => r,
            (None, Some(score)) => {
                let threshold = threshold.ok_or_else(|| {
                    KpError::parse(
                        path,
                        line_no,
                        "verdict line has a score; pass --threshold to binarize it",
                    )
                })?;
                score >= threshold
            }
            (None, None) => {
                return Err(KpError::parse(
                    path,
                    line_no,
                    "verdict line needs \"relevant\" or \"score\"",
                ))
            }
        };
        if set.insert(&raw.id, &raw.keyphrase, relevant).is_some() {
            return Err(KpError::parse(
                path,
                line_no,
                format!("duplicate verdict for ({:?}, {:?})", raw.id, raw.keyphrase),
            ));
        }
    }
    Ok(set)
}
