//! Python bindings for the kpeval toolkit.
//!
//! Exposes the text normalization, matching, scoring, voting, filtering,
//! sampling and significance-testing operations with plain Python types.

use std::collections::HashMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use kpeval_core::aggregate::{
    apply_filter, majority_vote, MissingPolicy, PredictionRecord, RankedPredictions,
    ScoredKeyphrase, VerdictSet,
};
use kpeval_core::corpus::{
    self, CorpusFormat, Document as CoreDocument, LoadOptions, SplitName,
};
use kpeval_core::matcher::{run_match, Cutoff, MatcherKind};
use kpeval_core::metrics::{self, Subset};
use kpeval_core::pipeline::{self, EvalConfig};
use kpeval_core::sampler::{self, CooccurrenceGraph as CoreGraph, NegativeKind};
use kpeval_core::significance::{self, ScoreMatrix};
use kpeval_core::textnorm;
use kpeval_core::KpError;

fn to_py_err(e: KpError) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// One corpus record: id, title, abstract and golden keyphrases.
#[pyclass(name = "Document", from_py_object)]
#[derive(Clone)]
struct PyDocument {
    inner: CoreDocument,
}

#[pymethods]
impl PyDocument {
    #[new]
    fn new(id: String, title: String, abstract_text: String, keyphrases: Vec<String>) -> Self {
        PyDocument {
            inner: CoreDocument {
                id,
                title,
                abstract_text,
                keyphrases,
            },
        }
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn title(&self) -> String {
        self.inner.title.clone()
    }

    #[getter]
    fn abstract_text(&self) -> String {
        self.inner.abstract_text.clone()
    }

    #[getter]
    fn keyphrases(&self) -> Vec<String> {
        self.inner.keyphrases.clone()
    }

    /// (present, absent) golden keyphrases under the stemmed presence test.
    fn partition_present_absent(&self) -> (Vec<String>, Vec<String>) {
        corpus::partition_present_absent(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Document(id={:?}, keyphrases={})",
            self.inner.id,
            self.inner.keyphrases.len()
        )
    }
}

/// Keyphrase co-occurrence graph with connected components.
#[pyclass(name = "CooccurrenceGraph")]
struct PyGraph {
    inner: CoreGraph,
}

#[pymethods]
impl PyGraph {
    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn component_count(&self) -> usize {
        self.inner.component_count()
    }

    /// Component label of a normalized keyphrase, or None.
    fn component_of(&self, keyphrase: &str) -> Option<usize> {
        self.inner.component_of(&textnorm::normalize(keyphrase))
    }

    /// All components as lists of member keyphrases.
    fn components(&self) -> Vec<Vec<String>> {
        self.inner
            .components()
            .map(|members| members.map(str::to_string).collect())
            .collect()
    }
}

#[pyfunction]
fn normalize(text: &str) -> String {
    textnorm::normalize(text)
}

#[pyfunction]
fn stem_phrase(phrase: &str) -> String {
    textnorm::stem_phrase(phrase)
}

#[pyfunction]
fn normalize_and_stem(text: &str) -> String {
    textnorm::normalize_and_stem(text)
}

#[pyfunction]
#[pyo3(signature = (path, split = "test", max_skipped = 0))]
fn load_corpus(path: &str, split: &str, max_skipped: usize) -> PyResult<Vec<PyDocument>> {
    let split: SplitName = split.parse().map_err(to_py_err)?;
    let options = LoadOptions {
        split: Some(split),
        max_skipped,
    };
    let loaded = corpus::load_corpus(path, CorpusFormat::Jsonl, &options).map_err(to_py_err)?;
    Ok(loaded
        .split
        .documents
        .into_iter()
        .map(|inner| PyDocument { inner })
        .collect())
}

fn parse_cutoff(cutoff: Option<&str>) -> PyResult<Cutoff> {
    match cutoff {
        None => Ok(Cutoff::All),
        Some(s) => s.parse().map_err(to_py_err),
    }
}

/// Match stemmed predictions against stemmed golden keyphrases.
///
/// Returns a dict with matched pairs and the leftovers on both sides.
#[pyfunction]
#[pyo3(signature = (predictions, golden, matcher = "exact", cutoff = None, doc_id = "doc"))]
fn match_keyphrases(
    py: Python<'_>,
    predictions: Vec<String>,
    golden: Vec<String>,
    matcher: &str,
    cutoff: Option<&str>,
    doc_id: &str,
) -> PyResult<Py<PyAny>> {
    let kind: MatcherKind = matcher.parse().map_err(to_py_err)?;
    let cutoff = parse_cutoff(cutoff)?;
    let report = run_match(doc_id, &predictions, &golden, cutoff, kind);
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("doc_id", &report.doc_id)?;
    dict.set_item("matched_pairs", report.matched_pairs.clone())?;
    dict.set_item("unmatched_predictions", report.unmatched_predictions.clone())?;
    dict.set_item("unmatched_golden", report.unmatched_golden.clone())?;
    let golden_size = report.golden_size();
    let score = metrics::score_document(&report, golden_size, Subset::All);
    dict.set_item("precision", score.precision)?;
    dict.set_item("recall", score.recall)?;
    dict.set_item("f1", score.f1)?;
    Ok(dict.into())
}

/// Majority voting over generated sequences: returns (keyphrase, frequency)
/// pairs, rank order.
#[pyfunction]
fn vote(sequences: Vec<Vec<String>>) -> Vec<(String, f64)> {
    let record = PredictionRecord {
        doc_id: String::new(),
        sequences,
    };
    majority_vote(&record)
        .keyphrases
        .into_iter()
        .map(|k| (k.keyphrase, k.score))
        .collect()
}

/// Keep ranked keyphrases whose verdict is true. `verdicts` maps keyphrase
/// to a boolean; phrases without a verdict follow `missing_policy`.
#[pyfunction]
#[pyo3(signature = (keyphrases, verdicts, missing_policy = "keep"))]
fn filter_keyphrases(
    keyphrases: Vec<String>,
    verdicts: HashMap<String, bool>,
    missing_policy: &str,
) -> PyResult<Vec<String>> {
    let policy: MissingPolicy = missing_policy.parse().map_err(to_py_err)?;
    let n = keyphrases.len();
    let ranked = RankedPredictions {
        doc_id: String::new(),
        keyphrases: keyphrases
            .into_iter()
            .enumerate()
            .map(|(i, keyphrase)| ScoredKeyphrase {
                keyphrase: textnorm::normalize(&keyphrase),
                score: (n - i) as f64,
            })
            .collect(),
    };
    let mut set = VerdictSet::default();
    for (keyphrase, relevant) in &verdicts {
        set.insert("", keyphrase, *relevant);
    }
    let (filtered, _) = apply_filter(&ranked, &set, policy);
    Ok(filtered.keyphrases.into_iter().map(|k| k.keyphrase).collect())
}

/// Accuracy and confusion counts over (label, predicted) pairs.
#[pyfunction]
fn binary_eval(py: Python<'_>, pairs: Vec<(bool, bool)>) -> PyResult<Py<PyAny>> {
    let (accuracy, cm) = metrics::binary_eval(&pairs).map_err(to_py_err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("accuracy", accuracy)?;
    dict.set_item("tp", cm.tp)?;
    dict.set_item("fn", cm.fn_)?;
    dict.set_item("fp", cm.fp)?;
    dict.set_item("tn", cm.tn)?;
    dict.set_item("true_row", cm.true_row())?;
    dict.set_item("false_row", cm.false_row())?;
    Ok(dict.into())
}

/// Build the co-occurrence graph over a list of documents.
#[pyfunction]
fn build_graph(documents: Vec<PyDocument>) -> PyGraph {
    let split = corpus::CorpusSplit {
        name: SplitName::Train,
        documents: documents.into_iter().map(|d| d.inner).collect(),
    };
    PyGraph {
        inner: sampler::build_graph(&split),
    }
}

fn examples_to_py(examples: Vec<sampler::FilterTrainingExample>) -> Vec<(String, String, bool, String)> {
    examples
        .into_iter()
        .map(|e| {
            let kind = match e.negative_kind {
                NegativeKind::None => "none",
                NegativeKind::Soft => "soft",
                NegativeKind::Hard => "hard",
            };
            (e.doc_id, e.keyphrase, e.label, kind.to_string())
        })
        .collect()
}

/// Soft negative sampling for one document:
/// (doc_id, keyphrase, label, kind) tuples.
#[pyfunction]
#[pyo3(signature = (document, graph, ratio = 1, seed = 42))]
fn sample_soft(
    document: &PyDocument,
    graph: &PyGraph,
    ratio: usize,
    seed: u64,
) -> PyResult<Vec<(String, String, bool, String)>> {
    let (examples, _) =
        sampler::sample_soft(&document.inner, &graph.inner, ratio, seed).map_err(to_py_err)?;
    Ok(examples_to_py(examples))
}

/// Mixed soft/hard negative sampling for one document. `generated` is the
/// ranked keyphrase list produced for this document.
#[pyfunction]
#[pyo3(signature = (document, graph, generated, i_soft = 1, j_hard = 1, seed = 42))]
fn sample_mixed(
    document: &PyDocument,
    graph: &PyGraph,
    generated: Vec<String>,
    i_soft: usize,
    j_hard: usize,
    seed: u64,
) -> PyResult<Vec<(String, String, bool, String)>> {
    let n = generated.len();
    let ranked = RankedPredictions {
        doc_id: document.inner.id.clone(),
        keyphrases: generated
            .into_iter()
            .enumerate()
            .map(|(i, keyphrase)| ScoredKeyphrase {
                keyphrase: textnorm::normalize(&keyphrase),
                score: (n - i) as f64,
            })
            .collect(),
    };
    let (examples, _) = sampler::sample_mixed(
        &document.inner,
        &graph.inner,
        &ranked,
        i_soft,
        j_hard,
        seed,
    )
    .map_err(to_py_err)?;
    Ok(examples_to_py(examples))
}

/// Evaluate predicted keyphrase lists against a corpus.
///
/// `predictions` maps doc id to a ranked list of raw keyphrases. Returns one
/// dict per (matcher, cutoff, subset) combination.
#[pyfunction]
#[pyo3(signature = (documents, predictions, cutoffs = vec!["5".to_string(), "O".to_string()]))]
fn evaluate(
    py: Python<'_>,
    documents: Vec<PyDocument>,
    predictions: HashMap<String, Vec<String>>,
    cutoffs: Vec<String>,
) -> PyResult<Vec<Py<PyAny>>> {
    let split = corpus::CorpusSplit {
        name: SplitName::Test,
        documents: documents.into_iter().map(|d| d.inner).collect(),
    };
    let ranked: Vec<RankedPredictions> = predictions
        .into_iter()
        .map(|(doc_id, keyphrases)| {
            let record = PredictionRecord {
                doc_id,
                sequences: vec![keyphrases],
            };
            majority_vote(&record)
        })
        .collect();
    let config = EvalConfig {
        cutoffs: cutoffs
            .iter()
            .map(|c| c.parse().map_err(to_py_err))
            .collect::<PyResult<Vec<Cutoff>>>()?,
        ..Default::default()
    };
    let report = pipeline::evaluate(&split, &ranked, &config).map_err(to_py_err)?;
    let mut rows = Vec::new();
    for row in &report.rows {
        let dict = pyo3::types::PyDict::new(py);
        dict.set_item("matcher", row.matcher.to_string())?;
        dict.set_item("cutoff", row.cutoff.to_string())?;
        dict.set_item("subset", row.subset.to_string())?;
        dict.set_item("precision", row.mean_precision)?;
        dict.set_item("recall", row.mean_recall)?;
        dict.set_item("f1", row.mean_f1)?;
        dict.set_item("docs", row.docs_scored)?;
        dict.set_item("excluded", row.docs_excluded)?;
        rows.push(dict.into());
    }
    Ok(rows)
}

/// Randomized Tukey HSD test.
///
/// `scores` is documents x systems. Returns a dict with the symmetric
/// p-value matrix, per-system means and the systems each one beats.
#[pyfunction]
#[pyo3(signature = (systems, scores, permutations = 10_000, alpha = 0.05, seed = 42))]
fn tukey_hsd(
    py: Python<'_>,
    systems: Vec<String>,
    scores: Vec<Vec<f64>>,
    permutations: u64,
    alpha: f64,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let docs = (0..scores.len()).map(|i| format!("doc{i}")).collect();
    let matrix = ScoreMatrix::new(systems, docs, scores)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let result = significance::tukey_hsd(&matrix, permutations, alpha, seed).map_err(to_py_err)?;
    let beats: Vec<Vec<String>> = result
        .beats()
        .iter()
        .map(|list| list.iter().map(|&j| result.systems[j].clone()).collect())
        .collect();
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("systems", result.systems.clone())?;
    dict.set_item("means", result.means.clone())?;
    dict.set_item("p_values", result.p_values.clone())?;
    dict.set_item("beats", beats)?;
    dict.set_item("degenerate", result.degenerate)?;
    Ok(dict.into())
}

#[pymodule]
fn kpeval_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDocument>()?;
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(stem_phrase, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_and_stem, m)?)?;
    m.add_function(wrap_pyfunction!(load_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(match_keyphrases, m)?)?;
    m.add_function(wrap_pyfunction!(vote, m)?)?;
    m.add_function(wrap_pyfunction!(filter_keyphrases, m)?)?;
    m.add_function(wrap_pyfunction!(binary_eval, m)?)?;
    m.add_function(wrap_pyfunction!(build_graph, m)?)?;
    m.add_function(wrap_pyfunction!(sample_soft, m)?)?;
    m.add_function(wrap_pyfunction!(sample_mixed, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(tukey_hsd, m)?)?;
    Ok(())
}
