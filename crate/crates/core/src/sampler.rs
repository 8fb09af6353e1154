//! Keyphrase co-occurrence graph, soft/mixed negative sampling and
//! fine-tuning example files for the generation and filtering tasks.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::aggregate::RankedPredictions;
use crate::corpus::{partition_present_absent, CorpusSplit, Document};
use crate::error::{KpError, Result};
use crate::textnorm;

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(len: usize) -> Self {
        UnionFind {
            parent: (0..len).collect(),
            size: vec![1; len],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Keyphrase nodes (normalized forms), edges between phrases annotated
/// together on some document, and the resulting connected components.
#[derive(Debug, Clone)]
pub struct CooccurrenceGraph {
    nodes: Vec<String>,
    stems: Vec<String>,
    index: HashMap<String, usize>,
    component_id: Vec<usize>,
    components: Vec<Vec<usize>>,
}

impl CooccurrenceGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn node(&self, idx: usize) -> &str {
        &self.nodes[idx]
    }

    pub fn node_index(&self, normalized: &str) -> Option<usize> {
        self.index.get(normalized).copied()
    }

    pub fn component_of(&self, normalized: &str) -> Option<usize> {
        self.node_index(normalized).map(|i| self.component_id[i])
    }

    /// Member phrases of one component, in node insertion order.
    pub fn component_members(&self, component: usize) -> impl Iterator<Item = &str> {
        self.components[component].iter().map(|&i| self.nodes[i].as_str())
    }

    pub fn components(&self) -> impl Iterator<Item = impl Iterator<Item = &str>> {
        (0..self.components.len()).map(|c| self.component_members(c))
    }
}

/// Node set = normalized golden keyphrases of the split; two phrases are
/// connected when some document's golden set contains both. A per-document
/// star to the first phrase yields the same components as the full clique.
pub fn build_graph(split: &CorpusSplit) -> CooccurrenceGraph {
    let mut nodes: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut doc_nodes: Vec<Vec<usize>> = Vec::with_capacity(split.documents.len());

    for doc in &split.documents {
        let mut ids = Vec::with_capacity(doc.keyphrases.len());
        for kp in &doc.keyphrases {
            let normalized = textnorm::normalize(kp);
            let id = *index.entry(normalized.clone()).or_insert_with(|| {
                nodes.push(normalized);
                nodes.len() - 1
            });
            ids.push(id);
        }
        doc_nodes.push(ids);
    }

    let mut uf = UnionFind::new(nodes.len());
    for ids in &doc_nodes {
        for window in ids.windows(2) {
            uf.union(window[0], window[1]);
        }
    }

    // Remap union-find roots to dense component labels in node order.
    let mut label_of_root: HashMap<usize, usize> = HashMap::new();
    let mut component_id = vec![0; nodes.len()];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for i in 0..nodes.len() {
        let root = uf.find(i);
        let label = *label_of_root.entry(root).or_insert_with(|| {
            components.push(Vec::new());
            components.len() - 1
        });
        component_id[i] = label;
        components[label].push(i);
    }

    let stems = nodes.iter().map(|n| textnorm::stem_phrase(n)).collect();
    CooccurrenceGraph {
        nodes,
        stems,
        index,
        component_id,
        components,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeKind {
    None,
    Soft,
    Hard,
}

/// One filtering-model training row.
#[derive(Debug, Clone, Serialize)]
pub struct FilterTrainingExample {
    pub doc_id: String,
    pub keyphrase: String,
    pub label: bool,
    pub negative_kind: NegativeKind,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct SampleDiagnostics {
    /// Positives whose component pool was empty, routed to the global pool.
    pub component_fallbacks: usize,
    /// Soft draws taken from the global pool because the component pool ran
    /// out mid-draw.
    pub pool_backfills: usize,
    /// Hard-negative slots that had to be backfilled with soft negatives.
    pub hard_shortfall: usize,
}

/// Where a positive's soft-negative candidates came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolOrigin {
    Component,
    Global,
}

/// RNG stream for one document, derived from the run seed and the doc id so
/// results do not depend on scheduling.
fn doc_rng(seed: u64, doc_id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(doc_id.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Candidate soft negatives for one positive keyphrase: same-component
/// phrases not stem-equal to any of the document's golden keyphrases, or
/// the global pool when that set is empty. Sorted lexicographically.
pub fn soft_candidate_pool(
    doc: &Document,
    graph: &CooccurrenceGraph,
    positive_normalized: &str,
) -> Result<(Vec<String>, PoolOrigin)> {
    let golden_stems: HashSet<String> = doc
        .keyphrases
        .iter()
        .map(|k| textnorm::normalize_and_stem(k))
        .collect();
    let component = graph.component_of(positive_normalized).ok_or_else(|| {
        KpError::MissingGraphNode {
            doc_id: doc.id.clone(),
            phrase: positive_normalized.to_string(),
        }
    })?;

    let component_pool = pool_from(
        graph.components[component].iter().copied(),
        graph,
        &golden_stems,
    );
    if !component_pool.is_empty() {
        return Ok((component_pool, PoolOrigin::Component));
    }
    Ok((global_pool(graph, &golden_stems), PoolOrigin::Global))
}

fn pool_from(
    ids: impl Iterator<Item = usize>,
    graph: &CooccurrenceGraph,
    golden_stems: &HashSet<String>,
) -> Vec<String> {
    let mut pool: Vec<String> = ids
        .filter(|&i| !golden_stems.contains(&graph.stems[i]))
        .map(|i| graph.nodes[i].clone())
        .collect();
    pool.sort();
    pool
}

fn global_pool(graph: &CooccurrenceGraph, golden_stems: &HashSet<String>) -> Vec<String> {
    pool_from(0..graph.node_count(), graph, golden_stems)
}

/// Draw `count` items without replacement via a partial Fisher-Yates pass.
fn draw<R: Rng>(pool: &mut Vec<String>, count: usize, rng: &mut R) -> Vec<String> {
    let mut out = Vec::with_capacity(count.min(pool.len()));
    for _ in 0..count {
        if pool.is_empty() {
            break;
        }
        let idx = rng.random_range(0..pool.len());
        out.push(pool.swap_remove(idx));
    }
    out
}

/// One positive example per golden keyphrase plus `ratio` soft negatives
/// drawn from its candidate pool. Deterministic for a given seed.
pub fn sample_soft(
    doc: &Document,
    graph: &CooccurrenceGraph,
    ratio: usize,
    seed: u64,
) -> Result<(Vec<FilterTrainingExample>, SampleDiagnostics)> {
    sample_mixed_inner(doc, graph, None, ratio, 0, seed)
}

/// Per positive: `i_soft` soft negatives plus `j_hard` hard negatives taken
/// in rank order from the generated keyphrases not stem-equal to any golden
/// one. Hard shortfalls are backfilled with soft negatives.
pub fn sample_mixed(
    doc: &Document,
    graph: &CooccurrenceGraph,
    generated: &RankedPredictions,
    i_soft: usize,
    j_hard: usize,
    seed: u64,
) -> Result<(Vec<FilterTrainingExample>, SampleDiagnostics)> {
    if i_soft + j_hard == 0 {
        return Err(KpError::InvalidArgument(
            "mixed sampling needs i_soft + j_hard >= 1".into(),
        ));
    }
    sample_mixed_inner(doc, graph, Some(generated), i_soft, j_hard, seed)
}

fn sample_mixed_inner(
    doc: &Document,
    graph: &CooccurrenceGraph,
    generated: Option<&RankedPredictions>,
    i_soft: usize,
    j_hard: usize,
    seed: u64,
) -> Result<(Vec<FilterTrainingExample>, SampleDiagnostics)> {
    let mut rng = doc_rng(seed, &doc.id);
    let mut diagnostics = SampleDiagnostics::default();
    let mut examples = Vec::new();

    let golden_stems: HashSet<String> = doc
        .keyphrases
        .iter()
        .map(|k| textnorm::normalize_and_stem(k))
        .collect();

    // Hard-negative candidates, rank order, consumed across positives.
    let mut hard_candidates: Vec<String> = match generated {
        Some(ranked) => ranked
            .keyphrases
            .iter()
            .map(|k| k.keyphrase.clone())
            .filter(|k| !golden_stems.contains(&textnorm::stem_phrase(k)))
            .collect(),
        None => Vec::new(),
    };
    hard_candidates.reverse(); // pop() then yields rank order

    for kp in &doc.keyphrases {
        let positive = textnorm::normalize(kp);
        examples.push(FilterTrainingExample {
            doc_id: doc.id.clone(),
            keyphrase: positive.clone(),
            label: true,
            negative_kind: NegativeKind::None,
        });

        let mut hard_taken = 0;
        while hard_taken < j_hard {
            match hard_candidates.pop() {
                Some(hard) => {
                    examples.push(FilterTrainingExample {
                        doc_id: doc.id.clone(),
                        keyphrase: hard,
                        label: false,
                        negative_kind: NegativeKind::Hard,
                    });
                    hard_taken += 1;
                }
                None => break,
            }
        }
        let backfill = j_hard - hard_taken;
        diagnostics.hard_shortfall += backfill;

        let soft_wanted = i_soft + backfill;
        if soft_wanted == 0 {
            continue;
        }
        let (mut pool, origin) = soft_candidate_pool(doc, graph, &positive)?;
        if origin == PoolOrigin::Global {
            diagnostics.component_fallbacks += 1;
        }
        let mut drawn = draw(&mut pool, soft_wanted, &mut rng);
        if drawn.len() < soft_wanted && origin == PoolOrigin::Component {
            // Component pool exhausted; top up from the rest of the graph.
            let mut global = global_pool(graph, &golden_stems);
            global.retain(|g| !drawn.contains(g));
            let extra = draw(&mut global, soft_wanted - drawn.len(), &mut rng);
            diagnostics.pool_backfills += extra.len();
            drawn.extend(extra);
        }
        if drawn.is_empty() {
            return Err(KpError::NoNegatives {
                doc_id: doc.id.clone(),
            });
        }
        for soft in drawn {
            examples.push(FilterTrainingExample {
                doc_id: doc.id.clone(),
                keyphrase: soft,
                label: false,
                negative_kind: NegativeKind::Soft,
            });
        }
    }

    Ok((examples, diagnostics))
}

// --- training-file emission -------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterExampleFormat {
    PairsTsv,
    PromptText,
}

impl std::str::FromStr for FilterExampleFormat {
    type Err = KpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pairs-tsv" => Ok(FilterExampleFormat::PairsTsv),
            "prompt-text" => Ok(FilterExampleFormat::PromptText),
            other => Err(KpError::InvalidArgument(format!(
                "bad filter example format {other:?} (expected pairs-tsv or prompt-text)"
            ))),
        }
    }
}

/// Serialized filtering-model input: keyphrase and document text with the
/// relevance marker, truncated to `token_budget` whitespace tokens.
pub fn filter_prompt(keyphrase: &str, doc: &Document, token_budget: usize) -> String {
    let fixed_tokens = 1 // "Keyphrase:"
        + keyphrase.split_whitespace().count()
        + 1 // "Document:"
        + 1; // "Relevant:"
    let doc_text = format!("{}. {}", doc.title, doc.abstract_text);
    let doc_budget = token_budget.saturating_sub(fixed_tokens);
    let truncated = textnorm::truncate_tokens(&doc_text, doc_budget);
    format!("Keyphrase: {keyphrase} Document: {truncated} Relevant:")
}

/// Write filter training examples.
///
/// `pairs-tsv` emits `doc_id<TAB>keyphrase<TAB>label`; `prompt-text` emits
/// `<input><TAB><true|false>` with the serialized prompt above.
pub fn emit_filter_examples<W: Write>(
    mut out: W,
    examples: &[FilterTrainingExample],
    documents: &HashMap<&str, &Document>,
    format: FilterExampleFormat,
    token_budget: usize,
) -> Result<()> {
    if examples.is_empty() {
        return Err(KpError::EmptyInput("no filter examples to emit".into()));
    }
    for example in examples {
        let label = if example.label { "true" } else { "false" };
        let line = match format {
            FilterExampleFormat::PairsTsv => {
                format!("{}\t{}\t{}", example.doc_id, example.keyphrase, label)
            }
            FilterExampleFormat::PromptText => {
                let doc = documents.get(example.doc_id.as_str()).ok_or_else(|| {
                    KpError::InvalidArgument(format!(
                        "example references unknown document {:?}",
                        example.doc_id
                    ))
                })?;
                let prompt = filter_prompt(&example.keyphrase, doc, token_budget);
                format!("{prompt}\t{label}")
            }
        };
        writeln!(out, "{line}").map_err(|e| KpError::io("<output>", e))?;
    }
    Ok(())
}

/// One generation-model training row.
#[derive(Debug, Clone, Serialize)]
pub struct GenTrainingExample {
    pub doc_id: String,
    pub input_text: String,
    pub target_text: String,
    pub sorted_variant: bool,
}

/// Compose the text-to-text pair for one document. With `sorted_variant`,
/// present keyphrases come before absent ones, annotation order kept
/// within each group.
pub fn build_generation_example(
    doc: &Document,
    sorted_variant: bool,
    delimiter: &str,
    task_prefix: &str,
    token_budget: usize,
) -> GenTrainingExample {
    let input = format!("{task_prefix}{}. {}", doc.title, doc.abstract_text);
    let input_text = textnorm::truncate_tokens(&input, token_budget);
    let ordered: Vec<String> = if sorted_variant {
        let (present, absent) = partition_present_absent(doc);
        present.into_iter().chain(absent).collect()
    } else {
        doc.keyphrases.clone()
    };
    GenTrainingExample {
        doc_id: doc.id.clone(),
        input_text,
        target_text: ordered.join(&format!("{delimiter} ")),
        sorted_variant,
    }
}

#[derive(Serialize)]
struct GenLine<'a> {
    id: &'a str,
    input: &'a str,
    target: &'a str,
}

/// Write one JSON-lines record (`{"id","input","target"}`) per document.
pub fn emit_generation_examples<W: Write>(
    mut out: W,
    split: &CorpusSplit,
    sorted_variant: bool,
    delimiter: &str,
    task_prefix: &str,
    token_budget: usize,
) -> Result<()> {
    if split.documents.is_empty() {
        return Err(KpError::EmptyInput("corpus split has no documents".into()));
    }
    for doc in &split.documents {
        let example =
            build_generation_example(doc, sorted_variant, delimiter, task_prefix, token_budget);
        let line = GenLine {
            id: &example.doc_id,
            input: &example.input_text,
            target: &example.target_text,
        };
        serde_json::to_writer(&mut out, &line).map_err(|e| {
            KpError::io("<output>", std::io::Error::other(e))
        })?;
        out.write_all(b"\n").map_err(|e| KpError::io("<output>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::ScoredKeyphrase;
    use crate::corpus::SplitName;

    fn doc(id: &str, keyphrases: &[&str]) -> Document {
        Document {
            id: id.into(),
            title: format!("title of {id}"),
            abstract_text: String::new(),
            keyphrases: keyphrases.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn split(docs: Vec<Document>) -> CorpusSplit {
        CorpusSplit {
            name: SplitName::Train,
            documents: docs,
        }
    }

    fn component_sets(graph: &CooccurrenceGraph) -> Vec<Vec<String>> {
        let mut sets: Vec<Vec<String>> = graph
            .components()
            .map(|members| {
                let mut v: Vec<String> = members.map(str::to_string).collect();
                v.sort();
                v
            })
            .collect();
        sets.sort();
        sets
    }

    #[test]
    fn chain_closure() {
        let graph = build_graph(&split(vec![
            doc("d1", &["a", "b"]),
            doc("d2", &["b", "c"]),
            doc("d3", &["x"]),
        ]));
        assert_eq!(
            component_sets(&graph),
            vec![
                vec!["a".to_string(), "b".to_string(), "c".to_string()],
                vec!["x".to_string()],
            ]
        );
    }

    #[test]
    fn singleton_documents_make_singleton_components() {
        let graph = build_graph(&split(vec![
            doc("d1", &["a"]),
            doc("d2", &["b"]),
            doc("d3", &["c"]),
        ]));
        assert_eq!(graph.component_count(), graph.node_count());
    }

    fn figure_like_corpus() -> CorpusSplit {
        split(vec![
            doc(
                "d1",
                &[
                    "information retrieval",
                    "search engine",
                    "word embeddings",
                    "query expansion",
                ],
            ),
            doc("d2", &["query expansion", "document ranking"]),
            doc("d3", &["reinforcement learning", "markov decision process"]),
        ])
    }

    #[test]
    fn component_example_pools() {
        let corpus = figure_like_corpus();
        let graph = build_graph(&corpus);
        let d2 = &corpus.documents[1];
        let (pool, origin) = soft_candidate_pool(d2, &graph, "query expansion").unwrap();
        assert_eq!(origin, PoolOrigin::Component);
        assert_eq!(
            pool,
            vec![
                "information retrieval".to_string(),
                "search engine".to_string(),
                "word embeddings".to_string(),
            ]
        );

        let d3 = &corpus.documents[2];
        let (pool, origin) = soft_candidate_pool(d3, &graph, "reinforcement learning").unwrap();
        assert_eq!(origin, PoolOrigin::Global);
        assert_eq!(pool.len(), 5); // every other document's keyphrases
    }

    #[test]
    fn soft_ratio_one_doubles_example_count() {
        let corpus = figure_like_corpus();
        let graph = build_graph(&corpus);
        let d1 = &corpus.documents[0];
        let (examples, _) = sample_soft(d1, &graph, 1, 7).unwrap();
        assert_eq!(examples.len(), 2 * d1.keyphrases.len());
        let positives = examples.iter().filter(|e| e.label).count();
        assert_eq!(positives, d1.keyphrases.len());
    }

    #[test]
    fn soft_negatives_never_stem_equal_to_golden() {
        let corpus = split(vec![
            doc("d1", &["word embedding", "ranking"]),
            doc("d2", &["word embeddings", "evaluation"]),
            doc("d3", &["other topic", "ranking"]),
        ]);
        let graph = build_graph(&corpus);
        for d in &corpus.documents {
            let stems: HashSet<String> = d
                .keyphrases
                .iter()
                .map(|k| textnorm::normalize_and_stem(k))
                .collect();
            let (examples, _) = sample_soft(d, &graph, 1, 13).unwrap();
            for example in examples.iter().filter(|e| !e.label) {
                assert!(
                    !stems.contains(&textnorm::stem_phrase(&example.keyphrase)),
                    "negative {:?} stem-collides with golden of {}",
                    example.keyphrase,
                    d.id
                );
            }
        }
    }

    #[test]
    fn soft_sampling_deterministic_per_seed() {
        let corpus = figure_like_corpus();
        let graph = build_graph(&corpus);
        let d1 = &corpus.documents[0];
        let (a, _) = sample_soft(d1, &graph, 1, 42).unwrap();
        let (b, _) = sample_soft(d1, &graph, 1, 42).unwrap();
        let (c, _) = sample_soft(d1, &graph, 1, 43).unwrap();
        let keys =
            |v: &[FilterTrainingExample]| v.iter().map(|e| e.keyphrase.clone()).collect::<Vec<_>>();
        assert_eq!(keys(&a), keys(&b));
        // Different seeds are allowed to coincide but these pools make it
        // vanishingly unlikely for every draw.
        let _ = c;
    }

    #[test]
    fn single_document_corpus_has_no_negatives() {
        let corpus = split(vec![doc("d1", &["a", "b"])]);
        let graph = build_graph(&corpus);
        let err = sample_soft(&corpus.documents[0], &graph, 1, 1).unwrap_err();
        assert!(matches!(err, KpError::NoNegatives { .. }));
    }

    fn ranked(doc_id: &str, phrases: &[&str]) -> RankedPredictions {
        RankedPredictions {
            doc_id: doc_id.into(),
            keyphrases: phrases
                .iter()
                .enumerate()
                .map(|(i, p)| ScoredKeyphrase {
                    keyphrase: p.to_string(),
                    score: (phrases.len() - i) as f64,
                })
                .collect(),
        }
    }

    #[test]
    fn mixed_takes_hard_negatives_in_rank_order() {
        let corpus = split(vec![doc("d1", &["a"]), doc("d2", &["b", "c"])]);
        let graph = build_graph(&corpus);
        let generated = ranked("d1", &["a", "q", "r"]);
        let (examples, diag) =
            sample_mixed(&corpus.documents[0], &graph, &generated, 1, 1, 5).unwrap();
        let hards: Vec<&str> = examples
            .iter()
            .filter(|e| e.negative_kind == NegativeKind::Hard)
            .map(|e| e.keyphrase.as_str())
            .collect();
        assert_eq!(hards, vec!["q"]);
        assert_eq!(diag.hard_shortfall, 0);
        assert_eq!(examples.len(), 3); // 1 positive + 1 soft + 1 hard
    }

    #[test]
    fn mixed_without_hard_candidates_backfills_soft() {
        let corpus = split(vec![doc("d1", &["a", "b", "c"]), doc("d2", &["x", "y", "z"])]);
        let graph = build_graph(&corpus);
        // Generated set equals the golden set: no hard negatives available.
        let generated = ranked("d1", &["a", "b", "c"]);
        let (examples, diag) =
            sample_mixed(&corpus.documents[0], &graph, &generated, 1, 1, 5).unwrap();
        assert_eq!(diag.hard_shortfall, 3);
        assert!(examples
            .iter()
            .all(|e| e.negative_kind != NegativeKind::Hard));
        // 3 positives + (1 soft + 1 backfilled soft) each.
        assert_eq!(examples.len(), 9);
    }

    #[test]
    fn mixed_arity() {
        let corpus = split(vec![
            doc("d1", &["a", "b", "c"]),
            doc("d2", &["p", "q", "r", "s"]),
        ]);
        let graph = build_graph(&corpus);
        let generated = ranked("d1", &["a", "h1", "h2", "h3"]);
        let (examples, _) = sample_mixed(&corpus.documents[0], &graph, &generated, 1, 1, 5).unwrap();
        assert_eq!(examples.len(), 9); // 3 positives + 3 soft + 3 hard
    }

    #[test]
    fn filter_prompt_truncation() {
        let long_abstract = vec!["tok"; 1000].join(" ");
        let d = Document {
            id: "d".into(),
            title: "Title".into(),
            abstract_text: long_abstract,
            keyphrases: vec!["kp".into()],
        };
        let prompt = filter_prompt("kp", &d, 512);
        assert_eq!(prompt.split_whitespace().count(), 512);
        assert!(prompt.starts_with("Keyphrase: kp Document: Title."));
        assert!(prompt.ends_with("Relevant:"));
    }

    #[test]
    fn filter_prompt_untouched_when_within_budget() {
        let d = doc("d1", &["kp"]);
        let prompt = filter_prompt("kp", &d, 512);
        assert_eq!(prompt, format!("Keyphrase: kp Document: title of d1.  Relevant:"));
    }

    #[test]
    fn pairs_tsv_layout() {
        let examples = vec![FilterTrainingExample {
            doc_id: "d1".into(),
            keyphrase: "nlp".into(),
            label: true,
            negative_kind: NegativeKind::None,
        }];
        let mut buf = Vec::new();
        emit_filter_examples(
            &mut buf,
            &examples,
            &HashMap::new(),
            FilterExampleFormat::PairsTsv,
            512,
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "d1\tnlp\ttrue\n");
    }

    #[test]
    fn soft_label_balance_in_emitted_examples() {
        let corpus = figure_like_corpus();
        let graph = build_graph(&corpus);
        let mut all = Vec::new();
        for d in &corpus.documents {
            let (mut examples, _) = sample_soft(d, &graph, 1, 11).unwrap();
            all.append(&mut examples);
        }
        let positives = all.iter().filter(|e| e.label).count();
        assert_eq!(positives * 2, all.len());
    }

    #[test]
    fn sorted_variant_orders_present_first() {
        let d = Document {
            id: "d".into(),
            title: "graph attention networks".into(),
            abstract_text: "we study attention".into(),
            keyphrases: vec![
                "quantum chemistry".into(), // absent
                "graph attention".into(),   // present
            ],
        };
        let example = build_generation_example(&d, true, ";", "", 512);
        assert_eq!(example.target_text, "graph attention; quantum chemistry");
        let unsorted = build_generation_example(&d, false, ";", "", 512);
        assert_eq!(unsorted.target_text, "quantum chemistry; graph attention");
    }

    #[test]
    fn sorted_variant_is_stable_within_groups() {
        let d = Document {
            id: "d".into(),
            title: "alpha beta".into(),
            abstract_text: String::new(),
            keyphrases: vec!["alpha".into(), "beta".into(), "zeta".into(), "omega".into()],
        };
        let example = build_generation_example(&d, true, ";", "", 512);
        assert_eq!(example.target_text, "alpha; beta; zeta; omega");
    }

    #[test]
    fn generation_example_input_shape() {
        let d = doc("d1", &["kp"]);
        let example = build_generation_example(&d, false, ";", "generate keyphrases: ", 512);
        assert_eq!(example.input_text, "generate keyphrases: title of d1. ");
    }

    /// Brute-force components: clique edges per document, plain DFS.
    fn dfs_components(docs: &[Vec<usize>], node_count: usize) -> Vec<usize> {
        let mut adjacency = vec![Vec::new(); node_count];
        for ids in docs {
            for (i, &a) in ids.iter().enumerate() {
                for &b in &ids[i + 1..] {
                    adjacency[a].push(b);
                    adjacency[b].push(a);
                }
            }
        }
        let mut label = vec![usize::MAX; node_count];
        let mut next = 0;
        for start in 0..node_count {
            if label[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            while let Some(node) = stack.pop() {
                if label[node] != usize::MAX {
                    continue;
                }
                label[node] = next;
                stack.extend(adjacency[node].iter().copied());
            }
            next += 1;
        }
        label
    }

    proptest::proptest! {
        #[test]
        fn components_match_dfs_oracle_and_ignore_doc_order(
            docs in proptest::collection::vec(
                proptest::collection::vec(0usize..30, 1..6),
                1..50,
            ),
            doc_perm_seed in proptest::prelude::any::<u64>(),
        ) {
            let make_split = |order: &[usize]| -> CorpusSplit {
                split(
                    order
                        .iter()
                        .map(|&i| {
                            let mut seen = std::collections::HashSet::new();
                            let keyphrases: Vec<&str> = docs[i]
                                .iter()
                                .map(|&t| NODE_NAMES[t])
                                .filter(|n| seen.insert(*n))
                                .collect();
                            doc(&format!("d{i}"), &keyphrases)
                        })
                        .collect(),
                )
            };
            let order: Vec<usize> = (0..docs.len()).collect();
            let graph = build_graph(&make_split(&order));

            // Oracle over the same node universe.
            let mut names: Vec<&str> = Vec::new();
            let mut ids: Vec<Vec<usize>> = Vec::new();
            for d in &docs {
                let mut row = Vec::new();
                for &t in d {
                    let name = NODE_NAMES[t];
                    let id = match names.iter().position(|n| *n == name) {
                        Some(id) => id,
                        None => {
                            names.push(name);
                            names.len() - 1
                        }
                    };
                    if !row.contains(&id) {
                        row.push(id);
                    }
                }
                ids.push(row);
            }
            let oracle = dfs_components(&ids, names.len());

            proptest::prop_assert_eq!(graph.node_count(), names.len());
            for (a_idx, a) in names.iter().enumerate() {
                for (b_idx, b) in names.iter().enumerate() {
                    let same_oracle = oracle[a_idx] == oracle[b_idx];
                    let same_graph = graph.component_of(a) == graph.component_of(b);
                    proptest::prop_assert_eq!(same_oracle, same_graph, "{} vs {}", a, b);
                }
            }

            // Document order never changes the partition.
            let mut shuffled = order.clone();
            let mut state = doc_perm_seed;
            for i in (1..shuffled.len()).rev() {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                let j = (state >> 33) as usize % (i + 1);
                shuffled.swap(i, j);
            }
            let reordered = build_graph(&make_split(&shuffled));
            for (a_idx, a) in names.iter().enumerate() {
                for b in &names[a_idx + 1..] {
                    proptest::prop_assert_eq!(
                        graph.component_of(a) == graph.component_of(b),
                        reordered.component_of(a) == reordered.component_of(b)
                    );
                }
            }
        }
    }

    const NODE_NAMES: [&str; 30] = [
        "n00", "n01", "n02", "n03", "n04", "n05", "n06", "n07", "n08", "n09", "n10", "n11",
        "n12", "n13", "n14", "n15", "n16", "n17", "n18", "n19", "n20", "n21", "n22", "n23",
        "n24", "n25", "n26", "n27", "n28", "n29",
    ];
}
