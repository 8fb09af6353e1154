//! Precision/recall/F1 scoring of match reports, macro aggregation and
//! binary filter evaluation with confusion matrices.

use std::fmt;

use serde::Serialize;

use crate::error::{KpError, Result};
use crate::matcher::{Cutoff, MatchReport, MatcherKind};

/// Which part of the golden set a score was computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Present,
    Absent,
    All,
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subset::Present => write!(f, "present"),
            Subset::Absent => write!(f, "absent"),
            Subset::All => write!(f, "all"),
        }
    }
}

impl std::str::FromStr for Subset {
    type Err = KpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "present" => Ok(Subset::Present),
            "absent" => Ok(Subset::Absent),
            "all" => Ok(Subset::All),
            other => Err(KpError::InvalidArgument(format!(
                "bad subset {other:?} (expected present, absent or all)"
            ))),
        }
    }
}

/// Per-document score under one (matcher, cutoff, subset) combination.
#[derive(Debug, Clone, Serialize)]
pub struct DocScore {
    pub doc_id: String,
    pub matcher: MatcherKind,
    pub cutoff: Cutoff,
    pub subset: Subset,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision over predictions considered, recall over the golden subset,
/// F1 their harmonic mean (0 when both are 0).
pub fn score_document(report: &MatchReport, golden_size: usize, subset: Subset) -> DocScore {
    let matches = report.matched_pairs.len() as f64;
    let considered = report.considered();
    let precision = if considered == 0 {
        0.0
    } else {
        matches / considered as f64
    };
    let recall = if golden_size == 0 {
        0.0
    } else {
        matches / golden_size as f64
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    DocScore {
        doc_id: report.doc_id.clone(),
        matcher: report.matcher,
        cutoff: report.cutoff,
        subset,
        precision,
        recall,
        f1,
    }
}

/// Macro average over documents.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateScore {
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    pub doc_count: usize,
}

pub fn aggregate(scores: &[DocScore]) -> Result<AggregateScore> {
    if scores.is_empty() {
        return Err(KpError::EmptyInput("no document scores to aggregate".into()));
    }
    let n = scores.len() as f64;
    Ok(AggregateScore {
        mean_precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
        mean_recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
        mean_f1: scores.iter().map(|s| s.f1).sum::<f64>() / n,
        doc_count: scores.len(),
    })
}

/// 2x2 confusion counts for the binary filtering task, with row-normalized
/// rates (rows are actual classes, diagonal first).
#[derive(Debug, Clone, Serialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / total as f64
    }

    /// (tp rate, fn rate): how actual-true examples were classified.
    pub fn true_row(&self) -> (f64, f64) {
        let n = self.tp + self.fn_;
        if n == 0 {
            (0.0, 0.0)
        } else {
            (self.tp as f64 / n as f64, self.fn_ as f64 / n as f64)
        }
    }

    /// (tn rate, fp rate): how actual-false examples were classified.
    pub fn false_row(&self) -> (f64, f64) {
        let n = self.tn + self.fp;
        if n == 0 {
            (0.0, 0.0)
        } else {
            (self.tn as f64 / n as f64, self.fp as f64 / n as f64)
        }
    }

    /// Aligned 2x2 text grid, rows = actual, columns = predicted.
    pub fn render_grid(&self) -> String {
        let (tpr, fnr) = self.true_row();
        let (tnr, fpr) = self.false_row();
        let mut out = String::new();
        out.push_str("              pred:true   pred:false\n");
        out.push_str(&format!(
            "actual:true   {:>9}    {:>9}    ({:.2} / {:.2})\n",
            self.tp, self.fn_, tpr, fnr
        ));
        out.push_str(&format!(
            "actual:false  {:>9}    {:>9}    ({:.2} / {:.2})\n",
            self.fp, self.tn, fpr, tnr
        ));
        out
    }
}

/// Accuracy and confusion matrix over (label, predicted) verdict pairs.
pub fn binary_eval(verdicts: &[(bool, bool)]) -> Result<(f64, ConfusionMatrix)> {
    if verdicts.is_empty() {
        return Err(KpError::EmptyInput("no verdict pairs".into()));
    }
    let mut cm = ConfusionMatrix {
        tp: 0,
        fn_: 0,
        fp: 0,
        tn: 0,
    };
    for &(label, predicted) in verdicts {
        match (label, predicted) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok((cm.accuracy(), cm))
}
