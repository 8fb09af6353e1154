//! Exact and partial matching between predicted and golden stemmed
//! keyphrases with one-to-one, no-double-count semantics: once a golden
//! keyphrase is matched it is removed and cannot match again.

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

/// How many ranked predictions take part in the match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cutoff {
    /// First `n` predictions.
    Top(usize),
    /// As many predictions as the document has golden keyphrases.
    GoldenSize,
    /// The whole list.
    All,
}

impl Serialize for Cutoff {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl fmt::Display for Cutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cutoff::Top(n) => write!(f, "{n}"),
            Cutoff::GoldenSize => write!(f, "O"),
            Cutoff::All => write!(f, "all"),
        }
    }
}

impl std::str::FromStr for Cutoff {
    type Err = crate::KpError;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "O" | "o" => Ok(Cutoff::GoldenSize),
            "all" => Ok(Cutoff::All),
            other => other
                .parse::<usize>()
                .ok()
                .filter(|n| *n >= 1)
                .map(Cutoff::Top)
                .ok_or_else(|| {
                    crate::KpError::InvalidArgument(format!(
                        "bad cutoff {other:?} (expected a positive integer, \"O\" or \"all\")"
                    ))
                }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatcherKind {
    Exact,
    Partial,
}

impl fmt::Display for MatcherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatcherKind::Exact => write!(f, "exact"),
            MatcherKind::Partial => write!(f, "partial"),
        }
    }
}

impl std::str::FromStr for MatcherKind {
    type Err = crate::KpError;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "exact" => Ok(MatcherKind::Exact),
            "partial" => Ok(MatcherKind::Partial),
            other => Err(crate::KpError::InvalidArgument(format!(
                "bad matcher {other:?} (expected exact or partial)"
            ))),
        }
    }
}

/// Outcome of matching one document's predictions against its golden set.
#[derive(Debug, Clone, Serialize)]
pub struct MatchReport {
    pub doc_id: String,
    pub matcher: MatcherKind,
    pub cutoff: Cutoff,
    /// (predicted stemmed, golden stemmed) pairs; each golden appears at
    /// most once.
    pub matched_pairs: Vec<(String, String)>,
    /// Predictions within the cutoff that matched nothing.
    pub unmatched_predictions: Vec<String>,
    /// Golden keyphrases never consumed by a match.
    pub unmatched_golden: Vec<String>,
}

impl MatchReport {
    /// Predictions that took part after dedup and cutoff.
    pub fn considered(&self) -> usize {
        self.matched_pairs.len() + self.unmatched_predictions.len()
    }

    /// Golden set size after stem-level dedup.
    pub fn golden_size(&self) -> usize {
        self.matched_pairs.len() + self.unmatched_golden.len()
    }
}

/// `needle` occurs in `hay` as a contiguous run of whole tokens. Equal
/// strings qualify.
pub fn token_boundary_substring(needle: &str, hay: &str) -> bool {
    if needle == hay {
        return true;
    }
    let hay_tokens: Vec<&str> = hay.split(' ').collect();
    let needle_tokens: Vec<&str> = needle.split(' ').collect();
    if needle_tokens.is_empty() || needle_tokens.len() > hay_tokens.len() {
        return false;
    }
    hay_tokens
        .windows(needle_tokens.len())
        .any(|w| w == needle_tokens.as_slice())
}

fn partial_matches(p: &str, k: &str) -> bool {
    token_boundary_substring(p, k) || token_boundary_substring(k, p)
}

/// Deduplicate preserving first occurrence, then truncate at the cutoff.
fn prepare(predictions: &[String], cutoff: Cutoff, golden_size: usize) -> Vec<&str> {
    let mut seen = HashSet::new();
    let deduped = predictions
        .iter()
        .map(String::as_str)
        .filter(|p| !p.is_empty() && seen.insert(*p));
    let limit = match cutoff {
        Cutoff::Top(n) => n,
        Cutoff::GoldenSize => golden_size,
        Cutoff::All => usize::MAX,
    };
    deduped.take(limit).collect()
}

fn dedup_golden(golden: &[String]) -> Vec<&str> {
    let mut seen = HashSet::new();
    golden
        .iter()
        .map(String::as_str)
        .filter(|g| !g.is_empty() && seen.insert(*g))
        .collect()
}

/// Scan predictions in rank order; a prediction matches iff its stemmed form
/// equals a still-available golden stemmed form.
pub fn exact_match(
    doc_id: &str,
    predictions: &[String],
    golden: &[String],
    cutoff: Cutoff,
) -> MatchReport {
    run_match(doc_id, predictions, golden, cutoff, MatcherKind::Exact)
}

/// Scan predictions in rank order; a prediction matches an available golden
/// where either side is a token-boundary substring of the other. A golden
/// equal to the prediction is preferred; otherwise the first available
/// candidate in golden-list order is consumed.
pub fn partial_match(
    doc_id: &str,
    predictions: &[String],
    golden: &[String],
    cutoff: Cutoff,
) -> MatchReport {
    run_match(doc_id, predictions, golden, cutoff, MatcherKind::Partial)
}

pub fn run_match(
    doc_id: &str,
    predictions: &[String],
    golden: &[String],
    cutoff: Cutoff,
    matcher: MatcherKind,
) -> MatchReport {
    let golden = dedup_golden(golden);
    let considered = prepare(predictions, cutoff, golden.len());

    let mut available = vec![true; golden.len()];
    let mut matched_pairs = Vec::new();
    let mut unmatched_predictions = Vec::new();

    for p in considered {
        let equal = golden
            .iter()
            .enumerate()
            .position(|(idx, g)| available[idx] && *g == p);
        let hit = match matcher {
            MatcherKind::Exact => equal,
            // The equal golden (at most one) is taken first; consuming a
            // containment-only candidate instead could strand a later
            // prediction and push the partial count below the exact count.
            MatcherKind::Partial => equal.or_else(|| {
                golden
                    .iter()
                    .enumerate()
                    .position(|(idx, g)| available[idx] && partial_matches(p, g))
            }),
        };
        match hit {
            Some(idx) => {
                available[idx] = false;
                matched_pairs.push((p.to_string(), golden[idx].to_string()));
            }
            None => unmatched_predictions.push(p.to_string()),
        }
    }

    let unmatched_golden = golden
        .iter()
        .zip(&available)
        .filter(|(_, avail)| **avail)
        .map(|(g, _)| g.to_string())
        .collect();

    MatchReport {
        doc_id: doc_id.to_string(),
        matcher,
        cutoff,
        matched_pairs,
        unmatched_predictions,
        unmatched_golden,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strs(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn exact_identity() {
        let r = exact_match(
            "d",
            &strs(&["neural network"]),
            &strs(&["neural network"]),
            Cutoff::All,
        );
        assert_eq!(r.matched_pairs.len(), 1);
        assert!(r.unmatched_golden.is_empty());
    }

    #[test]
    fn duplicate_prediction_counts_once() {
        let r = exact_match("d", &strs(&["a", "a"]), &strs(&["a"]), Cutoff::All);
        assert_eq!(r.matched_pairs.len(), 1);
        assert_eq!(r.considered(), 1);
    }

    #[test]
    fn cutoff_limits_scan() {
        let r = exact_match(
            "d",
            &strs(&["x", "y", "z"]),
            &strs(&["y", "q"]),
            Cutoff::Top(2),
        );
        assert_eq!(r.matched_pairs, vec![("y".to_string(), "y".to_string())]);
        assert_eq!(r.considered(), 2);
        assert_eq!(r.unmatched_golden, vec!["q"]);
    }

    #[test]
    fn golden_size_cutoff() {
        let r = exact_match(
            "d",
            &strs(&["a", "b", "c"]),
            &strs(&["c", "b"]),
            Cutoff::GoldenSize,
        );
        // Only the first two predictions are considered.
        assert_eq!(r.considered(), 2);
        assert_eq!(r.matched_pairs.len(), 1);
    }

    #[test]
    fn partial_prefix_substring() {
        let r = partial_match(
            "d",
            &strs(&["neural"]),
            &strs(&["neural network evalu"]),
            Cutoff::All,
        );
        assert_eq!(r.matched_pairs.len(), 1);
    }

    #[test]
    fn partial_reverse_containment() {
        let r = partial_match(
            "d",
            &strs(&["deep neural network"]),
            &strs(&["neural network"]),
            Cutoff::All,
        );
        assert_eq!(r.matched_pairs.len(), 1);
    }

    #[test]
    fn partial_requires_token_boundary() {
        // "art" is a raw substring of "particl" but not at a token boundary.
        let r = partial_match("d", &strs(&["art"]), &strs(&["particl"]), Cutoff::All);
        assert!(r.matched_pairs.is_empty());
    }

    #[test]
    fn partial_consumes_first_available_golden() {
        let r = partial_match(
            "d",
            &strs(&["net", "neural net"]),
            &strs(&["neural net"]),
            Cutoff::All,
        );
        assert_eq!(
            r.matched_pairs,
            vec![("net".to_string(), "neural net".to_string())]
        );
        assert_eq!(r.unmatched_predictions, vec!["neural net"]);
    }

    #[test]
    fn golden_deduplicated_by_stem_equality() {
        let r = exact_match("d", &strs(&["a"]), &strs(&["a", "a", "b"]), Cutoff::All);
        assert_eq!(r.golden_size(), 2);
    }

    #[test]
    fn partial_prefers_equal_golden() {
        // Found by the property test below: if "c d" may consume "c" by
        // containment before trying its own twin, later predictions strand
        // and the partial count drops below the exact count.
        let preds = strs(&["c d", "c", "b c"]);
        let golden = strs(&["b c", "c", "c d"]);
        let exact = exact_match("d", &preds, &golden, Cutoff::All);
        let partial = partial_match("d", &preds, &golden, Cutoff::All);
        assert_eq!(exact.matched_pairs.len(), 3);
        assert_eq!(partial.matched_pairs.len(), 3);
        for (p, g) in &partial.matched_pairs {
            assert_eq!(p, g);
        }
    }

    // Brute-force oracles used by the property tests below and by the
    // acceptance suite.
    pub(crate) fn multiset_intersection_count(considered: &[&str], golden: &[&str]) -> usize {
        let mut remaining: Vec<&str> = golden.to_vec();
        let mut count = 0;
        for p in considered {
            if let Some(pos) = remaining.iter().position(|g| g == p) {
                remaining.swap_remove(pos);
                count += 1;
            }
        }
        count
    }

    /// Maximum bipartite matching by augmenting paths; fine for tiny inputs.
    pub(crate) fn max_bipartite_matching(edges: &[Vec<usize>], n_right: usize) -> usize {
        fn augment(
            u: usize,
            edges: &[Vec<usize>],
            owner: &mut [Option<usize>],
            visited: &mut [bool],
        ) -> bool {
            for &v in &edges[u] {
                if visited[v] {
                    continue;
                }
                visited[v] = true;
                if owner[v].is_none()
                    || augment(owner[v].unwrap(), edges, owner, visited)
                {
                    owner[v] = Some(u);
                    return true;
                }
            }
            false
        }
        let mut owner = vec![None; n_right];
        let mut size = 0;
        for u in 0..edges.len() {
            let mut visited = vec![false; n_right];
            if augment(u, edges, &mut owner, &mut visited) {
                size += 1;
            }
        }
        size
    }

    proptest! {
        #[test]
        fn exact_equals_multiset_intersection(
            preds in proptest::collection::vec(0usize..12, 0..8),
            golden in proptest::collection::vec(0usize..12, 0..8),
            cutoff in 1usize..9,
        ) {
            let alphabet = phrase_alphabet();
            let preds: Vec<String> =
                preds.iter().map(|i| alphabet[*i].to_string()).collect();
            let golden: Vec<String> =
                golden.iter().map(|i| alphabet[*i].to_string()).collect();
            let r = exact_match("d", &preds, &golden, Cutoff::Top(cutoff));

            let mut seen = std::collections::HashSet::new();
            let considered: Vec<&str> = preds
                .iter()
                .map(String::as_str)
                .filter(|p| seen.insert(*p))
                .take(cutoff)
                .collect();
            let golden_set = dedup_golden(&golden);
            let expected = multiset_intersection_count(&considered, &golden_set);
            prop_assert_eq!(r.matched_pairs.len(), expected);
        }

        #[test]
        fn partial_at_least_exact_and_at_most_optimal(
            preds in proptest::collection::vec(0usize..12, 0..8),
            golden in proptest::collection::vec(0usize..12, 0..8),
        ) {
            let alphabet = phrase_alphabet();
            let preds: Vec<String> =
                preds.iter().map(|i| alphabet[*i].to_string()).collect();
            let golden: Vec<String> =
                golden.iter().map(|i| alphabet[*i].to_string()).collect();

            let exact = exact_match("d", &preds, &golden, Cutoff::All);
            let partial = partial_match("d", &preds, &golden, Cutoff::All);
            prop_assert!(partial.matched_pairs.len() >= exact.matched_pairs.len());

            let mut seen = std::collections::HashSet::new();
            let considered: Vec<&str> = preds
                .iter()
                .map(String::as_str)
                .filter(|p| seen.insert(*p))
                .collect();
            let golden_set = dedup_golden(&golden);
            let edges: Vec<Vec<usize>> = considered
                .iter()
                .map(|p| {
                    golden_set
                        .iter()
                        .enumerate()
                        .filter(|(_, g)| partial_matches(p, g))
                        .map(|(i, _)| i)
                        .collect()
                })
                .collect();
            let optimal = max_bipartite_matching(&edges, golden_set.len());
            prop_assert!(partial.matched_pairs.len() <= optimal);
        }

        #[test]
        fn exact_invariant_under_golden_order(
            preds in proptest::collection::vec(0usize..12, 0..8),
            golden in proptest::collection::vec(0usize..12, 0..8),
        ) {
            let alphabet = phrase_alphabet();
            let preds: Vec<String> =
                preds.iter().map(|i| alphabet[*i].to_string()).collect();
            let golden: Vec<String> =
                golden.iter().map(|i| alphabet[*i].to_string()).collect();
            let mut reversed = golden.clone();
            reversed.reverse();
            let a = exact_match("d", &preds, &golden, Cutoff::All);
            let b = exact_match("d", &preds, &reversed, Cutoff::All);
            prop_assert_eq!(a.matched_pairs.len(), b.matched_pairs.len());
        }
    }

    pub(crate) fn phrase_alphabet() -> [&'static str; 12] {
        [
            "a", "b", "c", "a b", "b c", "a b c", "d", "c d", "x", "y z", "z", "y",
        ]
    }
}
