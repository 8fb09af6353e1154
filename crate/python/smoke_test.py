#!/usr/bin/env python3
"""Smoke test for the kpeval_py extension module.

Build the module first:

    cargo build -p kpeval-py --release --features extension-module

then run this script; it copies the cdylib next to itself under the
importable name and exercises every binding.
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent


def import_module():
    candidates = [
        REPO_ROOT / "target" / "release" / "libkpeval_py.so",
        REPO_ROOT / "target" / "debug" / "libkpeval_py.so",
        REPO_ROOT / "target" / "release" / "libkpeval_py.dylib",
        REPO_ROOT / "target" / "debug" / "libkpeval_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("build kpeval-py first: cargo build -p kpeval-py --release "
                 "--features extension-module")
    staging = Path(tempfile.mkdtemp(prefix="kpeval_py_"))
    shutil.copy2(built, staging / "kpeval_py.so")
    sys.path.insert(0, str(staging))
    import kpeval_py
    return kpeval_py


def main():
    kp = import_module()

    # Text normalization and stemming.
    assert kp.normalize("Self-Attention") == "self attention"
    assert kp.normalize("  word   embeddings ") == "word embeddings"
    assert kp.stem_phrase("word embeddings") == "word embed"
    assert kp.normalize_and_stem("Caresses PONIES!") == "caress poni"

    # Corpus loading and present/absent partitioning.
    corpus = [
        {"id": "d1", "title": "Neural ranking models",
         "abstract": "Deep networks for document ranking.",
         "keyphrases": ["neural ranking", "document ranking", "quantum leap"]},
        {"id": "d2", "title": "Word embeddings",
         "abstract": "Embeddings for retrieval.",
         "keyphrases": ["word embeddings", "retrieval"]},
        {"id": "d3", "title": "Reinforcement learning",
         "abstract": "Policy gradients.",
         "keyphrases": ["reinforcement learning", "policy gradients"]},
    ]
    with tempfile.NamedTemporaryFile("w", suffix=".jsonl", delete=False) as f:
        for row in corpus:
            f.write(json.dumps(row) + "\n")
        corpus_path = f.name
    docs = kp.load_corpus(corpus_path)
    assert [d.id for d in docs] == ["d1", "d2", "d3"]
    present, absent = docs[0].partition_present_absent()
    assert "neural ranking" in present
    assert absent == ["quantum leap"]

    # Matching (stemmed inputs) and scoring.
    preds = [kp.normalize_and_stem(p) for p in ["Neural Ranking", "tensor tricks"]]
    golden = [kp.normalize_and_stem(g) for g in docs[0].keyphrases]
    report = kp.match_keyphrases(preds, golden, matcher="exact")
    assert len(report["matched_pairs"]) == 1
    assert math.isclose(report["precision"], 0.5)
    partial = kp.match_keyphrases(["rank"], golden, matcher="partial")
    assert len(partial["matched_pairs"]) == 1

    # Majority voting.
    ranking = kp.vote([["a", "b"], ["a"], ["a", "c"]])
    assert ranking[0] == ("a", 3.0)
    assert [phrase for phrase, _ in ranking] == ["a", "b", "c"]

    # Verdict filtering.
    kept = kp.filter_keyphrases(["a", "b", "c"], {"a": True, "b": False}, "keep")
    assert kept == ["a", "c"]

    # Binary filter evaluation.
    outcome = kp.binary_eval([(True, True)] * 74 + [(True, False)] * 26 +
                             [(False, False)] * 99 + [(False, True)] * 1)
    assert math.isclose(outcome["accuracy"], 0.865)

    # Co-occurrence graph and negative sampling.
    graph = kp.build_graph(docs)
    assert graph.component_count >= 2
    examples = kp.sample_soft(docs[0], graph, ratio=1, seed=7)
    labels = [label for _, _, label, _ in examples]
    assert labels.count(True) == len(docs[0].keyphrases)
    assert labels.count(False) == len(docs[0].keyphrases)
    again = kp.sample_soft(docs[0], graph, ratio=1, seed=7)
    assert examples == again

    mixed = kp.sample_mixed(docs[0], graph, ["neural ranking", "made up phrase"],
                            i_soft=1, j_hard=1, seed=7)
    hard = [kp_ for _, kp_, _, kind in mixed if kind == "hard"]
    assert hard == ["made up phrase"]

    # End-to-end evaluation: golden as predictions scores F1 = 1 at @O.
    rows = kp.evaluate(docs, {d.id: list(d.keyphrases) for d in docs},
                       cutoffs=["O"])
    all_rows = [r for r in rows if r["subset"] == "all"]
    assert all_rows and all(math.isclose(r["f1"], 1.0) for r in all_rows)

    # Randomized Tukey HSD.
    scores = [[0.9, 0.1], [0.8, 0.2], [0.7, 0.3], [0.9, 0.0], [0.8, 0.1]]
    hsd = kp.tukey_hsd(["big", "small"], scores, permutations=20000, seed=3)
    assert hsd["p_values"][0][1] < 0.2
    assert hsd["beats"][0] == ["small"] or hsd["p_values"][0][1] > 0.05
    same = kp.tukey_hsd(["x", "y"], [[0.5, 0.5], [0.3, 0.3]],
                        permutations=1000, seed=3)
    assert same["p_values"][0][1] == 1.0

    print("kpeval_py smoke test: all checks passed")


if __name__ == "__main__":
    main()
