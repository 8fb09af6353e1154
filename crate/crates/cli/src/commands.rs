//! Subcommand implementations: load inputs, call into kpeval-core, render
//! TSV/JSON reports with provenance headers.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use kpeval_core::aggregate::{
    apply_filter, load_prediction_records, load_ranked_predictions, load_verdicts, majority_vote,
    write_ranked_predictions, MissingPolicy, RankedPredictions,
};
use kpeval_core::corpus::{load_corpus, CorpusFormat, LoadOptions, LoadedCorpus};
use kpeval_core::matcher::{Cutoff, MatcherKind};
use kpeval_core::metrics::{binary_eval as run_binary_eval, Subset};
use kpeval_core::pipeline::{evaluate, EvalConfig};
use kpeval_core::sampler::{
    build_graph, emit_filter_examples, emit_generation_examples, sample_mixed as run_sample_mixed,
    sample_soft as run_sample_soft, FilterExampleFormat, FilterTrainingExample, SampleDiagnostics,
};
use kpeval_core::significance::{system_letter, tukey_hsd, HsdResult, ScoreMatrix};
use kpeval_core::textnorm;

use crate::meta::{write_output, RunMeta};
use crate::{
    BinaryEvalArgs, EvalArgs, FilterArgs, HsdArgs, NormalizeArgs, OutputFormat, SampleGenerationArgs,
    SampleMixedArgs, SampleSoftArgs, StatsArgs, VoteArgs,
};

fn load_split(path: &Path, split: &str, max_skipped: usize) -> Result<LoadedCorpus> {
    let options = LoadOptions {
        split: Some(split.parse()?),
        max_skipped,
    };
    Ok(load_corpus(path, CorpusFormat::Jsonl, &options)?)
}

pub fn stats(args: StatsArgs) -> Result<()> {
    let loaded = load_split(&args.corpus, &args.split, args.max_skipped)?;
    let stats = kpeval_core::corpus::corpus_stats(&loaded.split)?;

    let mut meta = RunMeta::new("stats");
    meta.set("split", &args.split);
    meta.add_input(&args.corpus)?;

    let content = match args.format {
        OutputFormat::Json => {
            let payload = serde_json::json!({
                "meta": meta,
                "stats": stats,
                "diagnostics": loaded.diagnostics,
            });
            format!("{}\n", serde_json::to_string_pretty(&payload)?)
        }
        OutputFormat::Tsv => {
            let mut out = meta.tsv_header();
            out.push_str(&format!(
                "# diagnostics: skipped_lines={} duplicate_keyphrases_dropped={} empty_keyphrases_dropped={}\n",
                loaded.diagnostics.skipped_lines.len(),
                loaded.diagnostics.duplicate_keyphrases_dropped,
                loaded.diagnostics.empty_keyphrases_dropped,
            ));
            out.push_str("split\tdoc_count\tmean_keyphrases_per_doc\tabsent_ratio\n");
            out.push_str(&format!(
                "{}\t{}\t{:.6}\t{:.6}\n",
                args.split, stats.doc_count, stats.mean_keyphrases_per_doc, stats.absent_ratio
            ));
            out
        }
    };
    write_output(args.output.as_deref(), &content)
}

pub fn normalize(args: NormalizeArgs) -> Result<()> {
    let phrases: Vec<String> = if !args.phrases.is_empty() {
        args.phrases
    } else if let Some(path) = &args.input {
        let file = std::fs::File::open(path)
            .with_context(|| format!("cannot open {}", path.display()))?;
        BufReader::new(file)
            .lines()
            .collect::<std::io::Result<Vec<_>>>()?
    } else {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf)?;
        buf.lines().map(str::to_string).collect()
    };

    let mut out = String::new();
    for raw in &phrases {
        let normalized = textnorm::normalize(raw);
        if args.show_stems {
            let stemmed = textnorm::stem_phrase(&normalized);
            out.push_str(&format!("{raw}\t{normalized}\t{stemmed}\n"));
        } else {
            out.push_str(&format!("{raw}\t{normalized}\n"));
        }
    }
    write_output(args.output.as_deref(), &out)
}

pub fn vote(args: VoteArgs) -> Result<()> {
    let records = load_prediction_records(&args.predictions, &args.delimiter)?;
    let ranked: Vec<RankedPredictions> = records.iter().map(majority_vote).collect();
    let file = std::fs::File::create(&args.output)
        .with_context(|| format!("cannot create {}", args.output.display()))?;
    write_ranked_predictions(std::io::BufWriter::new(file), &ranked)?;
    Ok(())
}

pub fn filter(args: FilterArgs) -> Result<()> {
    let policy: MissingPolicy = args.missing_policy.parse()?;
    let ranked = load_ranked_predictions(&args.predictions)?;
    let verdicts = load_verdicts(&args.verdicts, args.threshold)?;

    let mut removed = 0;
    let mut missing = 0;
    let filtered: Vec<RankedPredictions> = ranked
        .iter()
        .map(|record| {
            let (kept, diagnostics) = apply_filter(record, &verdicts, policy);
            removed += diagnostics.removed;
            missing += diagnostics.missing;
            kept
        })
        .collect();

    let file = std::fs::File::create(&args.output)
        .with_context(|| format!("cannot create {}", args.output.display()))?;
    write_ranked_predictions(std::io::BufWriter::new(file), &filtered)?;
    eprintln!(
        "{}",
        serde_json::json!({ "removed": removed, "missing": missing })
    );
    Ok(())
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let loaded = load_split(&args.corpus, "test", args.max_skipped)?;
    let records = load_prediction_records(&args.predictions, &args.delimiter)?;
    let ranked: Vec<RankedPredictions> = records.iter().map(majority_vote).collect();

    let config = EvalConfig {
        matchers: args
            .matcher
            .iter()
            .map(|m| m.parse::<MatcherKind>().map_err(Into::into))
            .collect::<Result<Vec<_>>>()?,
        cutoffs: args
            .cutoff
            .iter()
            .map(|c| c.parse::<Cutoff>().map_err(Into::into))
            .collect::<Result<Vec<_>>>()?,
        subsets: args
            .subset
            .iter()
            .map(|s| s.parse::<Subset>().map_err(Into::into))
            .collect::<Result<Vec<_>>>()?,
    };
    let report = evaluate(&loaded.split, &ranked, &config)?;

    let mut meta = RunMeta::new("eval");
    meta.set("matcher", args.matcher.join(","));
    meta.set("cutoff", args.cutoff.join(","));
    meta.set("subset", args.subset.join(","));
    meta.set("delimiter", &args.delimiter);
    meta.add_input(&args.corpus)?;
    meta.add_input(&args.predictions)?;

    if let Some(path) = &args.dump_scores {
        let mut out = meta.tsv_header();
        out.push_str("doc_id\tmatcher\tcutoff\tsubset\tprecision\trecall\tf1\n");
        for score in &report.doc_scores {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\n",
                score.doc_id,
                score.matcher,
                score.cutoff,
                score.subset,
                score.precision,
                score.recall,
                score.f1
            ));
        }
        std::fs::write(path, out)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }

    if let Some(path) = &args.dump_matches {
        let mut out = String::new();
        for match_report in &report.match_reports {
            out.push_str(&serde_json::to_string(match_report)?);
            out.push('\n');
        }
        std::fs::write(path, out)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }

    let content = match args.format {
        OutputFormat::Json => {
            let payload = serde_json::json!({
                "meta": meta,
                "rows": report.rows,
                "diagnostics": report.diagnostics,
            });
            format!("{}\n", serde_json::to_string_pretty(&payload)?)
        }
        OutputFormat::Tsv => {
            let mut out = meta.tsv_header();
            out.push_str(&format!(
                "# diagnostics: docs_without_predictions={}\n",
                report.diagnostics.docs_without_predictions
            ));
            out.push_str("matcher\tcutoff\tsubset\tprecision\trecall\tf1\tdocs\texcluded\n");
            for row in &report.rows {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\n",
                    row.matcher,
                    row.cutoff,
                    row.subset,
                    row.mean_precision,
                    row.mean_recall,
                    row.mean_f1,
                    row.docs_scored,
                    row.docs_excluded
                ));
            }
            out
        }
    };
    write_output(args.output.as_deref(), &content)
}

/// Labeled (doc id, keyphrase, label) rows: pairs TSV or JSON-lines.
fn load_labeled_examples(path: &Path) -> Result<Vec<(String, String, bool)>> {
    #[derive(serde::Deserialize)]
    struct JsonExample {
        id: String,
        keyphrase: String,
        label: bool,
    }

    let file =
        std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut examples = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed.starts_with('{') {
            let example: JsonExample = serde_json::from_str(trimmed)
                .with_context(|| format!("{}:{}", path.display(), idx + 1))?;
            examples.push((example.id, example.keyphrase, example.label));
        } else {
            let fields: Vec<&str> = trimmed.split('\t').collect();
            if fields.len() != 3 {
                bail!(
                    "{}:{}: expected 3 tab-separated fields, got {}",
                    path.display(),
                    idx + 1,
                    fields.len()
                );
            }
            let label = match fields[2] {
                "true" => true,
                "false" => false,
                other => bail!(
                    "{}:{}: bad label {other:?} (expected true or false)",
                    path.display(),
                    idx + 1
                ),
            };
            examples.push((fields[0].to_string(), fields[1].to_string(), label));
        }
    }
    if examples.is_empty() {
        bail!("{}: no labeled examples", path.display());
    }
    Ok(examples)
}

pub fn binary_eval(args: BinaryEvalArgs) -> Result<()> {
    let examples = load_labeled_examples(&args.examples)?;
    let verdicts = load_verdicts(&args.verdicts, args.threshold)?;

    let mut pairs = Vec::with_capacity(examples.len());
    let mut missing = Vec::new();
    for (doc_id, keyphrase, label) in &examples {
        match verdicts.get(doc_id, &textnorm::normalize(keyphrase)) {
            Some(predicted) => pairs.push((*label, predicted)),
            None => missing.push(format!("({doc_id}, {keyphrase})")),
        }
    }
    if !missing.is_empty() {
        missing.truncate(5);
        bail!(
            "{} examples have no verdict, e.g. {}",
            examples.len() - pairs.len(),
            missing.join(", ")
        );
    }
    let (accuracy, confusion) = run_binary_eval(&pairs)?;

    let mut meta = RunMeta::new("binary-eval");
    meta.add_input(&args.examples)?;
    meta.add_input(&args.verdicts)?;

    let content = match args.format {
        OutputFormat::Json => {
            let (tp_rate, fn_rate) = confusion.true_row();
            let (tn_rate, fp_rate) = confusion.false_row();
            let payload = serde_json::json!({
                "meta": meta,
                "accuracy": accuracy,
                "confusion": {
                    "tp": confusion.tp,
                    "fn": confusion.fn_,
                    "fp": confusion.fp,
                    "tn": confusion.tn,
                    "true_row": [tp_rate, fn_rate],
                    "false_row": [tn_rate, fp_rate],
                },
            });
            format!("{}\n", serde_json::to_string_pretty(&payload)?)
        }
        OutputFormat::Tsv => {
            let (tp_rate, fn_rate) = confusion.true_row();
            let (tn_rate, fp_rate) = confusion.false_row();
            let mut out = meta.tsv_header();
            out.push_str("metric\tvalue\n");
            out.push_str(&format!("accuracy\t{accuracy:.6}\n"));
            out.push_str(&format!("tp\t{}\n", confusion.tp));
            out.push_str(&format!("fn\t{}\n", confusion.fn_));
            out.push_str(&format!("fp\t{}\n", confusion.fp));
            out.push_str(&format!("tn\t{}\n", confusion.tn));
            out.push_str(&format!("tp_rate\t{tp_rate:.6}\n"));
            out.push_str(&format!("fn_rate\t{fn_rate:.6}\n"));
            out.push_str(&format!("tn_rate\t{tn_rate:.6}\n"));
            out.push_str(&format!("fp_rate\t{fp_rate:.6}\n"));
            out.push('\n');
            out.push_str(&confusion.render_grid());
            out
        }
    };
    write_output(args.output.as_deref(), &content)
}

fn write_filter_examples(
    output: &Path,
    examples: &[FilterTrainingExample],
    documents: &HashMap<&str, &kpeval_core::corpus::Document>,
    format: &str,
    token_budget: usize,
    diagnostics: &SampleDiagnostics,
) -> Result<()> {
    let format: FilterExampleFormat = format.parse()?;
    let file = std::fs::File::create(output)
        .with_context(|| format!("cannot create {}", output.display()))?;
    emit_filter_examples(
        std::io::BufWriter::new(file),
        examples,
        documents,
        format,
        token_budget,
    )?;
    eprintln!("{}", serde_json::json!(diagnostics));
    Ok(())
}

pub fn sample_soft(args: SampleSoftArgs) -> Result<()> {
    if args.ratio < 1 {
        bail!("--ratio must be at least 1");
    }
    let loaded = load_split(&args.corpus, "train", args.max_skipped)?;
    let graph = build_graph(&loaded.split);

    let mut examples = Vec::new();
    let mut totals = SampleDiagnostics::default();
    for doc in &loaded.split.documents {
        let (mut doc_examples, diagnostics) =
            run_sample_soft(doc, &graph, args.ratio, args.seed)?;
        examples.append(&mut doc_examples);
        totals.component_fallbacks += diagnostics.component_fallbacks;
        totals.pool_backfills += diagnostics.pool_backfills;
        totals.hard_shortfall += diagnostics.hard_shortfall;
    }

    let documents: HashMap<&str, &kpeval_core::corpus::Document> = loaded
        .split
        .documents
        .iter()
        .map(|d| (d.id.as_str(), d))
        .collect();
    write_filter_examples(
        &args.output,
        &examples,
        &documents,
        &args.format,
        args.token_budget,
        &totals,
    )
}

pub fn sample_mixed(args: SampleMixedArgs) -> Result<()> {
    if args.i_soft + args.j_hard == 0 {
        bail!("--i-soft + --j-hard must be at least 1");
    }
    let loaded = load_split(&args.corpus, "valid", args.max_skipped)?;
    let graph = build_graph(&loaded.split);

    let records = load_prediction_records(&args.generated, &args.delimiter)?;
    let ranked: HashMap<String, RankedPredictions> = records
        .iter()
        .map(|r| (r.doc_id.clone(), majority_vote(r)))
        .collect();

    let mut examples = Vec::new();
    let mut totals = SampleDiagnostics::default();
    for doc in &loaded.split.documents {
        let generated = ranked.get(&doc.id).ok_or_else(|| {
            anyhow!("no generated predictions for document {:?}", doc.id)
        })?;
        let (mut doc_examples, diagnostics) = run_sample_mixed(
            doc,
            &graph,
            generated,
            args.i_soft,
            args.j_hard,
            args.seed,
        )?;
        examples.append(&mut doc_examples);
        totals.component_fallbacks += diagnostics.component_fallbacks;
        totals.pool_backfills += diagnostics.pool_backfills;
        totals.hard_shortfall += diagnostics.hard_shortfall;
    }

    let documents: HashMap<&str, &kpeval_core::corpus::Document> = loaded
        .split
        .documents
        .iter()
        .map(|d| (d.id.as_str(), d))
        .collect();
    write_filter_examples(
        &args.output,
        &examples,
        &documents,
        &args.format,
        args.token_budget,
        &totals,
    )
}

pub fn sample_generation(args: SampleGenerationArgs) -> Result<()> {
    let loaded = load_split(&args.corpus, "train", args.max_skipped)?;
    let file = std::fs::File::create(&args.output)
        .with_context(|| format!("cannot create {}", args.output.display()))?;
    emit_generation_examples(
        std::io::BufWriter::new(file),
        &loaded.split,
        args.sorted,
        &args.delimiter,
        &args.prefix,
        args.token_budget,
    )?;
    Ok(())
}

/// One `eval --dump-scores` file, reduced to doc -> score for a selection.
fn scores_from_dump(
    path: &Path,
    matcher: &str,
    cutoff: &str,
    subset: &str,
    metric: &str,
) -> Result<Vec<(String, f64)>> {
    let metric_column = match metric {
        "precision" => 4,
        "recall" => 5,
        "f1" => 6,
        other => bail!("bad metric {other:?} (expected precision, recall or f1)"),
    };
    let file =
        std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            header_seen = true;
            let expected = "doc_id\tmatcher\tcutoff\tsubset\tprecision\trecall\tf1";
            if line != expected {
                bail!(
                    "{}:{}: unexpected dump header (want {expected:?})",
                    path.display(),
                    idx + 1
                );
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            bail!("{}:{}: expected 7 fields", path.display(), idx + 1);
        }
        if fields[1] != matcher || fields[2] != cutoff || fields[3] != subset {
            continue;
        }
        let value: f64 = fields[metric_column]
            .parse()
            .with_context(|| format!("{}:{}: bad score", path.display(), idx + 1))?;
        rows.push((fields[0].to_string(), value));
    }
    if rows.is_empty() {
        bail!(
            "{}: no rows match matcher={matcher} cutoff={cutoff} subset={subset}",
            path.display()
        );
    }
    Ok(rows)
}

fn matrix_from_dumps(args: &HsdArgs) -> Result<ScoreMatrix> {
    // Canonical spellings, so e.g. `--cutoff o` matches dump rows.
    let matcher = args.matcher.parse::<MatcherKind>()?.to_string();
    let cutoff = args.cutoff.parse::<Cutoff>()?.to_string();
    let subset = args.subset.parse::<Subset>()?.to_string();
    let names: Vec<String> = if args.names.is_empty() {
        args.dumps
            .iter()
            .map(|p| {
                p.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .ok_or_else(|| anyhow!("cannot derive a system name from {}", p.display()))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        if args.names.len() != args.dumps.len() {
            bail!(
                "{} names for {} dumps",
                args.names.len(),
                args.dumps.len()
            );
        }
        args.names.clone()
    };

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut docs: Vec<String> = Vec::new();
    for (idx, path) in args.dumps.iter().enumerate() {
        let rows = scores_from_dump(path, &matcher, &cutoff, &subset, &args.metric)?;
        if idx == 0 {
            docs = rows.iter().map(|(d, _)| d.clone()).collect();
            columns.push(rows.into_iter().map(|(_, v)| v).collect());
        } else {
            let map: BTreeMap<String, f64> = rows.into_iter().collect();
            let column = docs
                .iter()
                .map(|d| {
                    map.get(d).copied().ok_or_else(|| {
                        anyhow!("{}: missing score for document {d:?}", path.display())
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if map.len() != docs.len() {
                bail!(
                    "{}: scores a different document set than {}",
                    path.display(),
                    args.dumps[0].display()
                );
            }
            columns.push(column);
        }
    }
    Ok(ScoreMatrix::from_columns(names, docs, &columns)?)
}

fn load_matrix(args: &HsdArgs) -> Result<ScoreMatrix> {
    if let Some(path) = &args.matrix {
        let content = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let is_json = content.trim_start().starts_with('{');
        let matrix = if is_json {
            ScoreMatrix::from_json(content.as_bytes())?
        } else {
            ScoreMatrix::from_tsv(content.as_bytes())?
        };
        Ok(matrix)
    } else if !args.dumps.is_empty() {
        matrix_from_dumps(args)
    } else {
        bail!("pass --matrix FILE or --dumps FILE...");
    }
}

fn render_hsd_tsv(meta: &RunMeta, result: &HsdResult) -> String {
    let mut out = meta.tsv_header();
    if result.degenerate {
        out.push_str("# diagnostics: degenerate matrix (all document rows constant)\n");
    }
    let beats = result.beats();
    out.push_str("system\tletter\tmean\tbeats\n");
    for (i, system) in result.systems.iter().enumerate() {
        let beaten: String = beats[i].iter().map(|&j| system_letter(j)).collect();
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{}\n",
            system,
            system_letter(i),
            result.means[i],
            beaten
        ));
    }
    out.push('\n');
    out.push_str("p_value");
    for i in 0..result.systems.len() {
        out.push_str(&format!("\t{}", system_letter(i)));
    }
    out.push('\n');
    for (i, row) in result.p_values.iter().enumerate() {
        out.push_str(&system_letter(i));
        for p in row {
            out.push_str(&format!("\t{p:.6}"));
        }
        out.push('\n');
    }
    out
}

pub fn hsd(args: HsdArgs) -> Result<()> {
    let matrix = load_matrix(&args)?;
    let result = tukey_hsd(&matrix, args.permutations, args.alpha, args.seed)?;

    let mut meta = RunMeta::new("hsd");
    meta.set("permutations", args.permutations);
    meta.set("alpha", args.alpha);
    meta.set("seed", args.seed);
    if args.matrix.is_none() {
        meta.set("matcher", &args.matcher);
        meta.set("cutoff", &args.cutoff);
        meta.set("subset", &args.subset);
        meta.set("metric", &args.metric);
    }
    if let Some(path) = &args.matrix {
        meta.add_input(path)?;
    }
    for path in &args.dumps {
        meta.add_input(path)?;
    }

    let content = match args.format {
        OutputFormat::Json => {
            let beats = result.beats();
            let letters: Vec<String> =
                (0..result.systems.len()).map(system_letter).collect();
            let beats_letters: Vec<String> = beats
                .iter()
                .map(|list| list.iter().map(|&j| system_letter(j)).collect())
                .collect();
            let payload = serde_json::json!({
                "meta": meta,
                "systems": result.systems,
                "letters": letters,
                "means": result.means,
                "p_values": result.p_values,
                "beats": beats_letters,
                "permutations": result.permutations,
                "alpha": result.alpha,
                "seed": result.seed,
                "degenerate": result.degenerate,
            });
            format!("{}\n", serde_json::to_string_pretty(&payload)?)
        }
        OutputFormat::Tsv => render_hsd_tsv(&meta, &result),
    };
    write_output(args.output.as_deref(), &content)
}
