//! End-to-end evaluation: match every document's ranked predictions against
//! its golden keyphrases across matcher x cutoff x subset combinations and
//! macro-average the scores.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::aggregate::RankedPredictions;
use crate::corpus::{partition_present_absent, CorpusSplit};
use crate::error::{KpError, Result};
use crate::matcher::{run_match, Cutoff, MatchReport, MatcherKind};
use crate::metrics::{aggregate, score_document, DocScore, Subset};
use crate::textnorm;

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub matchers: Vec<MatcherKind>,
    pub cutoffs: Vec<Cutoff>,
    pub subsets: Vec<Subset>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            matchers: vec![MatcherKind::Exact, MatcherKind::Partial],
            cutoffs: vec![Cutoff::Top(5), Cutoff::GoldenSize],
            subsets: vec![Subset::Present, Subset::Absent, Subset::All],
        }
    }
}

/// Macro-averaged scores for one (matcher, cutoff, subset) combination.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub matcher: MatcherKind,
    pub cutoff: Cutoff,
    pub subset: Subset,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    /// Documents entering the average.
    pub docs_scored: usize,
    /// Documents skipped because their golden subset was empty.
    pub docs_excluded: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct EvalDiagnostics {
    /// Corpus documents with no prediction record (scored as empty lists).
    pub docs_without_predictions: usize,
}

#[derive(Debug)]
pub struct EvalReport {
    pub rows: Vec<SummaryRow>,
    pub doc_scores: Vec<DocScore>,
    pub match_reports: Vec<MatchReport>,
    pub diagnostics: EvalDiagnostics,
}

/// Evaluate ranked predictions against a corpus split.
///
/// Every prediction id must belong to the split; corpus documents without
/// predictions count as empty prediction lists. Documents whose golden
/// subset is empty are excluded from that subset's average.
pub fn evaluate(
    split: &CorpusSplit,
    predictions: &[RankedPredictions],
    config: &EvalConfig,
) -> Result<EvalReport> {
    if config.matchers.is_empty() || config.cutoffs.is_empty() || config.subsets.is_empty() {
        return Err(KpError::InvalidArgument(
            "evaluation needs at least one matcher, cutoff and subset".into(),
        ));
    }

    let known: HashSet<&str> = split.documents.iter().map(|d| d.id.as_str()).collect();
    let mut unknown: Vec<String> = predictions
        .iter()
        .filter(|p| !known.contains(p.doc_id.as_str()))
        .map(|p| p.doc_id.clone())
        .collect();
    if !unknown.is_empty() {
        unknown.sort();
        unknown.truncate(10);
        return Err(KpError::UnknownDocIds(unknown));
    }

    let by_id: HashMap<&str, &RankedPredictions> =
        predictions.iter().map(|p| (p.doc_id.as_str(), p)).collect();
    let diagnostics = EvalDiagnostics {
        docs_without_predictions: split
            .documents
            .iter()
            .filter(|d| !by_id.contains_key(d.id.as_str()))
            .count(),
    };

    // Per-document work is independent; documents keep corpus order so the
    // output is identical for any worker count.
    let per_doc: Vec<(Vec<DocScore>, Vec<MatchReport>)> = split
        .documents
        .par_iter()
        .map(|doc| {
            let pred_stems: Vec<String> = by_id
                .get(doc.id.as_str())
                .map(|p| {
                    p.keyphrases
                        .iter()
                        .map(|k| textnorm::stem_phrase(&k.keyphrase))
                        .collect()
                })
                .unwrap_or_default();

            let (present, absent) = partition_present_absent(doc);
            let stems_of = |kps: &[String]| -> Vec<String> {
                kps.iter().map(|k| textnorm::normalize_and_stem(k)).collect()
            };
            let golden_all = stems_of(&doc.keyphrases);
            let golden_present = stems_of(&present);
            let golden_absent = stems_of(&absent);

            let mut scores = Vec::new();
            let mut reports = Vec::new();
            for &matcher in &config.matchers {
                for &cutoff in &config.cutoffs {
                    for &subset in &config.subsets {
                        let golden = match subset {
                            Subset::All => &golden_all,
                            Subset::Present => &golden_present,
                            Subset::Absent => &golden_absent,
                        };
                        let report = run_match(&doc.id, &pred_stems, golden, cutoff, matcher);
                        let golden_size = report.golden_size();
                        if golden_size > 0 {
                            scores.push(score_document(&report, golden_size, subset));
                        }
                        reports.push(report);
                    }
                }
            }
            (scores, reports)
        })
        .collect();

    let mut doc_scores = Vec::new();
    let mut match_reports = Vec::new();
    for (scores, reports) in per_doc {
        doc_scores.extend(scores);
        match_reports.extend(reports);
    }

    let mut rows = Vec::new();
    for &matcher in &config.matchers {
        for &cutoff in &config.cutoffs {
            for &subset in &config.subsets {
                let selected: Vec<DocScore> = doc_scores
                    .iter()
                    .filter(|s| s.matcher == matcher && s.cutoff == cutoff && s.subset == subset)
                    .cloned()
                    .collect();
                let docs_excluded = split.documents.len() - selected.len();
                let row = match aggregate(&selected) {
                    Ok(agg) => SummaryRow {
                        matcher,
                        cutoff,
                        subset,
                        mean_precision: agg.mean_precision,
                        mean_recall: agg.mean_recall,
                        mean_f1: agg.mean_f1,
                        docs_scored: agg.doc_count,
                        docs_excluded,
                    },
                    Err(_) => SummaryRow {
                        matcher,
                        cutoff,
                        subset,
                        mean_precision: 0.0,
                        mean_recall: 0.0,
                        mean_f1: 0.0,
                        docs_scored: 0,
                        docs_excluded,
                    },
                };
                rows.push(row);
            }
        }
    }

    Ok(EvalReport {
        rows,
        doc_scores,
        match_reports,
        diagnostics,
    })
}
