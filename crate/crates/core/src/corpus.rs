//! Corpus loading, validation and present/absent partitioning.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{KpError, Result};
use crate::textnorm;

/// One corpus record: identifier, text fields and the golden keyphrase set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    /// Golden keyphrases in annotation order, deduplicated by normalized form.
    pub keyphrases: Vec<String>,
}

impl Document {
    /// Stemmed forms of the golden keyphrases, annotation order preserved.
    pub fn golden_stems(&self) -> Vec<String> {
        self.keyphrases
            .iter()
            .map(|k| textnorm::normalize_and_stem(k))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Valid,
    Test,
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitName::Train => write!(f, "train"),
            SplitName::Valid => write!(f, "valid"),
            SplitName::Test => write!(f, "test"),
        }
    }
}

impl std::str::FromStr for SplitName {
    type Err = KpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitName::Train),
            "valid" => Ok(SplitName::Valid),
            "test" => Ok(SplitName::Test),
            other => Err(KpError::InvalidArgument(format!(
                "unknown split name {other:?} (expected train, valid or test)"
            ))),
        }
    }
}

/// A named list of documents with unique ids.
#[derive(Debug, Clone)]
pub struct CorpusSplit {
    pub name: SplitName,
    pub documents: Vec<Document>,
}

/// Supported on-disk corpus layouts. JSON-lines is the only one today.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    #[default]
    Jsonl,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub split: Option<SplitName>,
    /// Number of malformed lines tolerated (skipped with a diagnostic)
    /// before the load fails. Zero fails on the first malformed line.
    pub max_skipped: usize,
}

/// Per-load diagnostics: skipped lines and silently repaired keyphrase lists.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LoadDiagnostics {
    pub skipped_lines: Vec<(usize, String)>,
    pub duplicate_keyphrases_dropped: usize,
    pub empty_keyphrases_dropped: usize,
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub split: CorpusSplit,
    pub diagnostics: LoadDiagnostics,
}

#[derive(Deserialize)]
struct RawDocument {
    id: String,
    title: String,
    #[serde(rename = "abstract")]
    abstract_text: String,
    keyphrases: Vec<String>,
}

/// Read a JSON-lines corpus file (`id`, `title`, `abstract`, `keyphrases`).
pub fn load_corpus(
    path: impl AsRef<Path>,
    format: CorpusFormat,
    options: &LoadOptions,
) -> Result<LoadedCorpus> {
    let CorpusFormat::Jsonl = format;
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| KpError::io(path, e))?;
    let reader = BufReader::new(file);

    let mut documents = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut diagnostics = LoadDiagnostics::default();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| KpError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_document(&line, &mut seen_ids, &mut diagnostics) {
            Ok(doc) => documents.push(doc),
            Err(message) => {
                diagnostics.skipped_lines.push((line_no, message));
                if diagnostics.skipped_lines.len() > options.max_skipped {
                    let (line_no, message) = diagnostics.skipped_lines.last().unwrap();
                    return Err(KpError::parse(path, *line_no, message.clone()));
                }
            }
        }
    }

    if documents.is_empty() {
        return Err(KpError::EmptyCorpus { path: path.into() });
    }

    Ok(LoadedCorpus {
        split: CorpusSplit {
            name: options.split.unwrap_or(SplitName::Test),
            documents,
        },
        diagnostics,
    })
}

fn parse_document(
    line: &str,
    seen_ids: &mut HashSet<String>,
    diagnostics: &mut LoadDiagnostics,
) -> std::result::Result<Document, String> {
    let raw: RawDocument = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if raw.id.is_empty() {
        return Err("empty document id".to_string());
    }
    if !seen_ids.insert(raw.id.clone()) {
        return Err(format!("duplicate document id {:?}", raw.id));
    }

    let mut keyphrases = Vec::new();
    let mut seen_norm = HashSet::new();
    for kp in &raw.keyphrases {
        let trimmed = kp.trim();
        let normalized = textnorm::normalize(trimmed);
        if normalized.is_empty() {
            diagnostics.empty_keyphrases_dropped += 1;
            continue;
        }
        if seen_norm.insert(normalized) {
            keyphrases.push(trimmed.to_string());
        } else {
            diagnostics.duplicate_keyphrases_dropped += 1;
        }
    }
    if keyphrases.is_empty() {
        seen_ids.remove(&raw.id);
        return Err(format!("document {:?} has no usable keyphrases", raw.id));
    }

    Ok(Document {
        id: raw.id,
        title: raw.title,
        abstract_text: raw.abstract_text,
        keyphrases,
    })
}

/// Decide for each golden keyphrase whether its stemmed form occurs, at
/// token boundaries, inside the stemmed title + " " + abstract.
///
/// Returns the raw keyphrases split into (present, absent); together they
/// are exactly `doc.keyphrases`.
pub fn partition_present_absent(doc: &Document) -> (Vec<String>, Vec<String>) {
    let text = format!("{} {}", doc.title, doc.abstract_text);
    let hay: Vec<String> = textnorm::normalize(&text)
        .split_whitespace()
        .map(textnorm::stem_token)
        .collect();

    let mut present = Vec::new();
    let mut absent = Vec::new();
    for kp in &doc.keyphrases {
        let needle: Vec<String> = textnorm::normalize_and_stem(kp)
            .split_whitespace()
            .map(str::to_string)
            .collect();
        if contains_window(&hay, &needle) {
            present.push(kp.clone());
        } else {
            absent.push(kp.clone());
        }
    }
    (present, absent)
}

fn contains_window(hay: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || needle.len() > hay.len() {
        return false;
    }
    hay.windows(needle.len())
        .any(|w| w.iter().zip(needle).all(|(a, b)| a == b))
}

/// Corpus-level summary: document count, mean golden set size and the share
/// of golden keyphrases that are absent from their document's text.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusStats {
    pub doc_count: usize,
    pub mean_keyphrases_per_doc: f64,
    pub absent_ratio: f64,
}

pub fn corpus_stats(split: &CorpusSplit) -> Result<CorpusStats> {
    if split.documents.is_empty() {
        return Err(KpError::EmptyInput("corpus split has no documents".into()));
    }
    let mut total = 0usize;
    let mut absent_total = 0usize;
    for doc in &split.documents {
        let (_, absent) = partition_present_absent(doc);
        total += doc.keyphrases.len();
        absent_total += absent.len();
    }
    Ok(CorpusStats {
        doc_count: split.documents.len(),
        mean_keyphrases_per_doc: total as f64 / split.documents.len() as f64,
        absent_ratio: absent_total as f64 / total as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_jsonl(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f
    }

    fn doc(title: &str, abstract_text: &str, keyphrases: &[&str]) -> Document {
        Document {
            id: "d".into(),
            title: title.into(),
            abstract_text: abstract_text.into(),
            keyphrases: keyphrases.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn load_simple_document() {
        let f = write_jsonl(&[r#"{"id":"d1","title":"T","abstract":"A","keyphrases":["k1","k2"]}"#]);
        let loaded = load_corpus(f.path(), CorpusFormat::Jsonl, &LoadOptions::default()).unwrap();
        assert_eq!(loaded.split.documents.len(), 1);
        let d = &loaded.split.documents[0];
        assert_eq!(d.id, "d1");
        assert_eq!(d.keyphrases, vec!["k1", "k2"]);
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write_jsonl(&[]);
        let err = load_corpus(f.path(), CorpusFormat::Jsonl, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, KpError::EmptyCorpus { .. }));
    }

    #[test]
    fn duplicate_keyphrases_are_dropped_with_warning() {
        let f = write_jsonl(&[r#"{"id":"d1","title":"T","abstract":"A","keyphrases":["kp","kp"]}"#]);
        let loaded = load_corpus(f.path(), CorpusFormat::Jsonl, &LoadOptions::default()).unwrap();
        assert_eq!(loaded.split.documents[0].keyphrases, vec!["kp"]);
        assert_eq!(loaded.diagnostics.duplicate_keyphrases_dropped, 1);
    }

    #[test]
    fn near_duplicates_collapse_to_first_raw_form() {
        let f = write_jsonl(&[
            r#"{"id":"d1","title":"T","abstract":"A","keyphrases":["Self-Attention","self attention!"]}"#,
        ]);
        let loaded = load_corpus(f.path(), CorpusFormat::Jsonl, &LoadOptions::default()).unwrap();
        assert_eq!(loaded.split.documents[0].keyphrases, vec!["Self-Attention"]);
    }

    #[test]
    fn malformed_line_fails_by_default() {
        let f = write_jsonl(&[
            r#"{"id":"d1","title":"T","abstract":"A","keyphrases":["k"]}"#,
            "not json",
        ]);
        let err = load_corpus(f.path(), CorpusFormat::Jsonl, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, KpError::Parse { line: 2, .. }));
    }

    #[test]
    fn malformed_line_skipped_with_tolerance() {
        let f = write_jsonl(&[
            "not json",
            r#"{"id":"d1","title":"T","abstract":"A","keyphrases":["k"]}"#,
        ]);
        let options = LoadOptions {
            max_skipped: 1,
            ..Default::default()
        };
        let loaded = load_corpus(f.path(), CorpusFormat::Jsonl, &options).unwrap();
        assert_eq!(loaded.split.documents.len(), 1);
        assert_eq!(loaded.diagnostics.skipped_lines.len(), 1);
        assert_eq!(loaded.diagnostics.skipped_lines[0].0, 1);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let f = write_jsonl(&[
            r#"{"id":"d1","title":"T","abstract":"A","keyphrases":["k"]}"#,
            r#"{"id":"d1","title":"U","abstract":"B","keyphrases":["q"]}"#,
        ]);
        let err = load_corpus(f.path(), CorpusFormat::Jsonl, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, KpError::Parse { line: 2, .. }));
    }

    #[test]
    fn presence_follows_stemming() {
        // "neural network" stems to a substring of the stemmed title.
        let d = doc("Neural networks", "", &["neural network"]);
        let (present, absent) = partition_present_absent(&d);
        assert_eq!(present, vec!["neural network"]);
        assert!(absent.is_empty());
    }

    #[test]
    fn keyphrase_equal_to_title_is_present() {
        let d = doc("graph attention", "", &["graph attention"]);
        let (present, _) = partition_present_absent(&d);
        assert_eq!(present.len(), 1);
    }

    #[test]
    fn unrelated_keyphrase_is_absent() {
        let d = doc("graph attention", "spectral methods", &["quantum chemistry"]);
        let (present, absent) = partition_present_absent(&d);
        assert!(present.is_empty());
        assert_eq!(absent, vec!["quantum chemistry"]);
    }

    #[test]
    fn presence_requires_token_boundaries() {
        // "art" occurs inside "particle" at character level but must not count.
        let d = doc("particle physics", "", &["art"]);
        let (present, absent) = partition_present_absent(&d);
        assert!(present.is_empty());
        assert_eq!(absent.len(), 1);
    }

    #[test]
    fn partition_covers_golden_set() {
        let d = doc(
            "Deep learning for ranking",
            "We study neural ranking models.",
            &["deep learning", "ranking models", "quantum chemistry", "t5"],
        );
        let (present, absent) = partition_present_absent(&d);
        assert_eq!(present.len() + absent.len(), d.keyphrases.len());
        let all: std::collections::HashSet<_> =
            present.iter().chain(absent.iter()).cloned().collect();
        assert_eq!(all.len(), d.keyphrases.len());
    }

    #[test]
    fn stats_all_present() {
        let split = CorpusSplit {
            name: SplitName::Test,
            documents: vec![
                doc("alpha beta", "", &["alpha", "beta"]),
                doc("gamma delta", "", &["gamma", "delta"]),
            ],
        };
        let stats = corpus_stats(&split).unwrap();
        assert_eq!(stats.doc_count, 2);
        assert_eq!(stats.mean_keyphrases_per_doc, 2.0);
        assert_eq!(stats.absent_ratio, 0.0);
    }

    #[test]
    fn stats_half_absent() {
        let split = CorpusSplit {
            name: SplitName::Test,
            documents: vec![doc("alpha", "", &["alpha", "zeta"])],
        };
        let stats = corpus_stats(&split).unwrap();
        assert_eq!(stats.absent_ratio, 0.5);
    }

    #[test]
    fn stats_hand_counted_fixture() {
        // 10 documents, two keyphrases each; 3 of the 20 are absent.
        let mut documents = Vec::new();
        for i in 0..10 {
            let absent = i < 3;
            documents.push(Document {
                id: format!("d{i}"),
                title: format!("topic{i} alpha{i}"),
                abstract_text: "shared context".into(),
                keyphrases: vec![
                    format!("topic{i}"),
                    if absent {
                        format!("missing{i}")
                    } else {
                        format!("alpha{i}")
                    },
                ],
            });
        }
        let split = CorpusSplit {
            name: SplitName::Test,
            documents,
        };
        let stats = corpus_stats(&split).unwrap();
        assert!((stats.absent_ratio - 0.15).abs() < 1e-12);
    }

    #[test]
    fn empty_split_stats_error() {
        let split = CorpusSplit {
            name: SplitName::Test,
            documents: vec![],
        };
        assert!(corpus_stats(&split).is_err());
    }
}
