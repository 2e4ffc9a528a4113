//! The five workflow commands: template generation, training (with sweeps),
//! evaluation, graph prediction, and representation export.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chronoprompt::backend::{MaskedLmBackend, MockInfiller, MockMlm, SpanInfiller};
use chronoprompt::corpus::Split;
use chronoprompt::evaluator::{
    evaluate, evaluate_with_buckets, export_representations, predict_graph, EventGraphInput,
    MetricsMode, MetricsReport,
};
use chronoprompt::seeding::derive_seed;
use chronoprompt::synthetic::vocabulary;
use chronoprompt::templates::{
    enumerate_scaffolds, generate_candidates, load_pool, parse_manual_template, save_pool,
    score_templates, select_topk_indices, Template,
};
use chronoprompt::trainer::train;
use chronoprompt::verbalizer::{bind_to_backend, RelationSchema};
use chronoprompt::TrainConfig;
use serde::Serialize;

use crate::artifacts::{
    load_checkpoint, load_split, prepare_run_dir, run_dir, save_checkpoint, write_json,
};
use crate::config::RunConfig;
use crate::{ExportArgs, Failure, GenerateArgs, PredictArgs, ReportArgs, TrainArgs};

/// Resolved run metadata written next to every artifact; content-addressed,
/// deliberately free of timestamps.
#[derive(Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    config_hash: &'a str,
    config: &'a RunConfig,
}

fn build_backend(config: &RunConfig, words: &BTreeSet<String>) -> MockMlm {
    MockMlm::with_dims(
        config.backend.seed,
        words,
        config.backend.hidden_dim,
        config.backend.feature_dim,
        config.backend.max_len,
    )
}

pub fn generate_templates(config: &RunConfig, args: &GenerateArgs) -> Result<()> {
    config.require_mock_backend()?;
    let schema = config.resolve_schema()?;
    let train_corpus = load_split(config, &schema, Split::Train)?;
    let (small_train, small_dev) = chronoprompt::corpus::sample_fewshot(
        &train_corpus,
        &schema,
        args.fewshot_per_label,
        derive_seed(config.seed, "fewshot"),
    )?;
    eprintln!(
        "few-shot pools: {} train / {} dev instances",
        small_train.len(),
        small_dev.len()
    );

    let infiller = MockInfiller::new(derive_seed(config.seed, "infiller"));
    let mut pool = generate_candidates(
        &enumerate_scaffolds(),
        &small_train,
        &schema,
        &infiller,
        args.beam_width,
        args.max_fill_tokens,
    )?;
    if let Some(text) = &args.manual_template {
        pool.push(parse_manual_template(text)?);
    }
    eprintln!("scoring {} candidate templates", pool.len());

    let fill_words: Vec<String> = infiller
        .fill_vocabulary()
        .iter()
        .flat_map(|phrase| phrase.split_whitespace().map(str::to_string))
        .collect();
    let fill_refs: Vec<&str> = fill_words.iter().map(String::as_str).collect();
    let template_refs: Vec<&Template> = pool.iter().collect();
    let words = vocabulary(&[&small_train, &small_dev], &schema, &template_refs, &fill_refs);
    let mut backend = build_backend(config, &words);
    let bound = bind_to_backend(&schema, &backend)?;

    let scoring_config = TrainConfig {
        epochs: args.scoring_epochs,
        ..config.train.clone()
    };
    let mut scored =
        score_templates(&pool, &small_train, &small_dev, &mut backend, &bound, &scoring_config)?;
    for idx in select_topk_indices(&scored, args.topk)? {
        scored[idx].selected = true;
    }

    let out = &config.paths.templates;
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    save_pool(&scored, out)?;
    let best = scored
        .iter()
        .filter(|t| t.selected)
        .map(|t| t.dev_f1.unwrap_or(0.0))
        .fold(f64::NEG_INFINITY, f64::max);
    println!(
        "wrote {} templates ({} selected, best few-shot dev F1 {best:.3}) to {}",
        scored.len(),
        args.topk.min(scored.len()),
        out.display()
    );
    Ok(())
}

/// Pick the training template: an explicit manual template wins, then an
/// index into the pool, then the best selected pool entry.
fn choose_template(config: &RunConfig, args: &TrainArgs) -> Result<Template> {
    if let Some(text) = &args.manual_template {
        return Ok(parse_manual_template(text)?);
    }
    let path = &config.paths.templates;
    if !path.is_file() {
        return Err(Failure::Missing(format!(
            "template pool {} (run generate-templates first or pass --manual-template)",
            path.display()
        ))
        .into());
    }
    let pool = load_pool(path)?;
    if let Some(idx) = args.template_index {
        return pool.get(idx).cloned().ok_or_else(|| {
            Failure::Usage(format!(
                "--template-index {idx} out of range for pool of {}",
                pool.len()
            ))
            .into()
        });
    }
    pool.iter()
        .filter(|t| t.selected)
        .max_by(|a, b| {
            a.dev_f1
                .unwrap_or(0.0)
                .partial_cmp(&b.dev_f1.unwrap_or(0.0))
                .expect("scores are finite")
        })
        .cloned()
        .ok_or_else(|| {
            Failure::Usage(format!(
                "no selected template in {}; pass --template-index",
                path.display()
            ))
            .into()
        })
}

pub fn cmd_train(config: &RunConfig, out: Option<&Path>, args: &TrainArgs) -> Result<()> {
    if let Some(spec) = &args.sweep {
        return sweep(config, out, args, spec);
    }
    let (dir, dev_f1) = train_once(config, out, args)?;
    eprintln!("run directory: {} (dev F1 {dev_f1:.3})", dir.display());
    Ok(())
}

/// One full training run; returns the run directory and best dev F1.
fn train_once(config: &RunConfig, out: Option<&Path>, args: &TrainArgs) -> Result<(PathBuf, f64)> {
    config.require_mock_backend()?;
    if config.train.con_enabled && config.train.batch_size < 2 {
        return Err(Failure::Usage(
            "contrastive learning needs batch_size >= 2; disable it with --contrastive off"
                .into(),
        )
        .into());
    }
    let schema = config.resolve_schema()?;
    let template = choose_template(config, args)?;
    let train_corpus = load_split(config, &schema, Split::Train)?;
    let dev_corpus = load_split(config, &schema, Split::Dev)?;

    let words =
        vocabulary(&[&train_corpus, &dev_corpus], &schema, &[&template], &[]);
    let mut backend = build_backend(config, &words);
    let bound = bind_to_backend(&schema, &backend)?;

    let config_hash = config.hash();
    let dir = run_dir(&config.runs_root(out), &config_hash, config.seed);
    prepare_run_dir(&dir, args.force)?;
    write_json(
        &dir.join("meta.json"),
        &RunMeta { command: "train", config_hash: &config_hash, config },
    )?;

    let outcome =
        train(&train_corpus, &dev_corpus, &template, &mut backend, &bound, &config.train)?;

    let mut history = std::io::BufWriter::new(
        std::fs::File::create(dir.join("history.jsonl"))
            .with_context(|| format!("creating history in {}", dir.display()))?,
    );
    for step in &outcome.history.steps {
        serde_json::to_writer(&mut history, step)?;
        history.write_all(b"\n")?;
    }
    history.flush()?;

    save_checkpoint(&dir, &config_hash, &schema, &template, &backend, &outcome.checkpoint)?;
    write_json(&dir.join("dev_metrics.json"), &outcome.checkpoint.dev_metrics)?;

    if let Some(step) = outcome.diverged_at {
        return Err(Failure::Diverged(step).into());
    }

    // Test-set report with the best checkpoint restored.
    backend.restore(&outcome.checkpoint.params)?;
    match load_split(config, &schema, Split::Test) {
        Ok(test_corpus) => {
            let report =
                evaluate(&backend, &test_corpus, &template, &bound, config.eval_mode)?;
            write_json(&dir.join("test_metrics.json"), &report)?;
            println!(
                "test {}: P {:.3} R {:.3} F1 {:.3}",
                mode_name(config.eval_mode),
                report.precision,
                report.recall,
                report.f1
            );
        }
        Err(e) if e.downcast_ref::<Failure>().is_some() => {
            eprintln!("no test split found; skipping test report");
        }
        Err(e) => return Err(e),
    }

    let dev_f1 = outcome.checkpoint.dev_metrics.f1;
    println!(
        "best epoch {} dev F1 {dev_f1:.3}; artifacts in {}",
        outcome.checkpoint.epoch,
        dir.display()
    );
    Ok((dir, dev_f1))
}

/// `--sweep tau=0.05,0.1,...`: one run per value plus an aggregate report.
fn sweep(config: &RunConfig, out: Option<&Path>, args: &TrainArgs, spec: &str) -> Result<()> {
    let (param, values) = parse_sweep(spec)?;
    #[derive(Serialize)]
    struct SweepPoint {
        value: f64,
        dev_f1: f64,
        run_dir: PathBuf,
    }
    let mut points = Vec::with_capacity(values.len());
    for value in values {
        let mut variant = config.clone();
        match param.as_str() {
            "tau" => variant.train.weights.tau = value,
            "alpha" => variant.train.weights.alpha = value,
            "beta" => variant.train.weights.beta = value,
            _ => unreachable!("parse_sweep validated the name"),
        }
        variant.train.weights.validate()?;
        eprintln!("sweep {param} = {value}");
        let (dir, dev_f1) = train_once(&variant, out, args)?;
        points.push(SweepPoint { value, dev_f1, run_dir: dir });
    }
    let report = config.runs_root(out).join(format!("sweep-{param}.json"));
    write_json(&report, &points)?;
    println!("swept {param} over {} values; report at {}", points.len(), report.display());
    for p in &points {
        println!("  {param} = {:<8} dev F1 {:.3}", p.value, p.dev_f1);
    }
    Ok(())
}

fn parse_sweep(spec: &str) -> Result<(String, Vec<f64>)> {
    let usage = || {
        Failure::Usage(format!(
            "--sweep expects PARAM=V1,V2,... with PARAM one of tau, alpha, beta; got {spec:?}"
        ))
    };
    let (param, rest) = spec.split_once('=').ok_or_else(usage)?;
    if !matches!(param, "tau" | "alpha" | "beta") {
        return Err(usage().into());
    }
    let values: Vec<f64> = rest
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| usage())?;
    if values.is_empty() {
        return Err(usage().into());
    }
    Ok((param.to_string(), values))
}

fn mode_name(mode: MetricsMode) -> &'static str {
    match mode {
        MetricsMode::StrictMicro => "strict_micro",
        MetricsMode::VagueExcluded => "vague_excluded",
    }
}

/// Rebuild schema/bound/template from a checkpoint for the read-only
/// commands.
fn reload(
    checkpoint: &Path,
) -> Result<(crate::artifacts::StoredCheckpoint, MockMlm, RelationSchema)> {
    let (stored, backend) = load_checkpoint(checkpoint)?;
    let schema = if stored.schema_id == "synthetic-order" {
        chronoprompt::synthetic::separable_schema()
    } else {
        chronoprompt::verbalizer::builtin_schema(&stored.schema_id)?
    };
    Ok((stored, backend, schema))
}

/// Reports land in --out when given, else next to the checkpoint.
fn report_path(out: Option<&Path>, checkpoint: &Path, name: &str) -> PathBuf {
    match out {
        Some(dir) => dir.join(name),
        None => {
            let base =
                if checkpoint.is_dir() { checkpoint } else { checkpoint.parent().unwrap() };
            base.join(name)
        }
    }
}

pub fn cmd_eval(config: &RunConfig, out: Option<&Path>, args: &ReportArgs) -> Result<()> {
    let (stored, backend, schema) = reload(&args.checkpoint)?;
    let bound = bind_to_backend(&schema, &backend)?;
    let split = args.split;
    let corpus = load_split(config, &schema, split)?;
    let mode = args.mode.unwrap_or(config.eval_mode);
    let report: MetricsReport = if args.buckets {
        let train_corpus = load_split(config, &schema, Split::Train)?;
        evaluate_with_buckets(&backend, &corpus, &train_corpus, &stored.template, &bound, mode)?
    } else {
        evaluate(&backend, &corpus, &stored.template, &bound, mode)?
    };
    let out = report_path(
        out,
        &args.checkpoint,
        &format!("eval-{split}-{}.json", mode_name(mode)),
    );
    write_json(&out, &report)?;
    println!(
        "{split} {}: P {:.3} R {:.3} F1 {:.3} ({} instances) -> {}",
        mode_name(mode),
        report.precision,
        report.recall,
        report.f1,
        corpus.len(),
        out.display()
    );
    if let Some(buckets) = &report.buckets {
        for b in buckets {
            let f1 = b.f1.map_or("n/a".to_string(), |v| format!("{v:.3}"));
            println!("  {:?}: {} instances, F1 {}", b.bucket, b.count, f1);
        }
    }
    Ok(())
}

pub fn cmd_predict(out: Option<&Path>, args: &PredictArgs) -> Result<()> {
    let (stored, backend, schema) = reload(&args.checkpoint)?;
    let bound = bind_to_backend(&schema, &backend)?;
    if !args.input.is_file() {
        return Err(Failure::Missing(format!("input file {}", args.input.display())).into());
    }
    let input: EventGraphInput = crate::artifacts::read_json(&args.input)?;
    let edges = predict_graph(&backend, &stored.template, &input, &bound)?;
    let out = report_path(out, &args.checkpoint, "predicted_graph.json");
    write_json(&out, &edges)?;
    let conflicts = edges.iter().filter(|e| e.note.is_some()).count();
    println!(
        "{} events -> {} edges ({} consistency notes) -> {}",
        input.events.len(),
        edges.len(),
        conflicts,
        out.display()
    );
    for e in &edges {
        match &e.note {
            Some(note) => println!("  {} -> {}: {} [{}]", e.from, e.to, e.label, note),
            None => println!("  {} -> {}: {}", e.from, e.to, e.label),
        }
    }
    Ok(())
}

pub fn cmd_export_reprs(config: &RunConfig, out: Option<&Path>, args: &ExportArgs) -> Result<()> {
    let (stored, backend, schema) = reload(&args.checkpoint)?;
    let bound = bind_to_backend(&schema, &backend)?;
    let corpus = load_split(config, &schema, args.split)?;
    let out = report_path(out, &args.checkpoint, &format!("reprs-{}.tsv", args.split));
    let rows = export_representations(&backend, &corpus, &stored.template, &bound, &out)?;
    println!(
        "wrote {rows} rows of {}-dim vectors to {}",
        backend.hidden_dim(),
        out.display()
    );
    Ok(())
}
