//! Prediction and metrics: micro precision/recall/F1 in two counting modes,
//! per-label one-vs-rest F1, seen/unseen trigger buckets, mask-vector export,
//! and all-pairs relation prediction over a sentence's events.

use std::collections::BTreeSet;
use std::io::Write as IoWrite;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backend::MaskedLmBackend;
use crate::corpus::{Corpus, EventPairInstance};
use crate::error::{Error, Result};
use crate::objectives::relation_distribution;
use crate::templates::{instantiate, MaskMode, Template};
use crate::verbalizer::{BoundVerbalizer, RelationSchema};

/// How micro counts treat the VAGUE label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricsMode {
    /// Every instance counts; precision, recall, and F1 coincide.
    StrictMicro,
    /// VAGUE predictions are abstentions (dropped from the precision
    /// denominator) and VAGUE gold instances are dropped from the recall
    /// denominator.
    VagueExcluded,
}

/// Test instances grouped by whether their trigger surfaces occur as
/// training triggers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketKind {
    BothUnseen,
    OneUnseen,
    BothSeen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub bucket: BucketKind,
    pub count: usize,
    /// Micro-F1 within the bucket; null when the bucket is empty.
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: MetricsMode,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// One-vs-rest F1 per label; null for labels absent from both gold and
    /// predictions.
    pub per_label_f1: std::collections::BTreeMap<String, Option<f64>>,
    pub labels: Vec<String>,
    /// Counts indexed confusion[gold][predicted].
    pub confusion: Vec<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub buckets: Option<Vec<BucketReport>>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn f1_of(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Index of the first maximum, so argmax ties resolve to the lowest label.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Predicted label index per instance.
pub fn predict_labels(
    backend: &dyn MaskedLmBackend,
    corpus: &Corpus,
    template: &Template,
    bound: &BoundVerbalizer,
) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(corpus.len());
    for instance in corpus.instances() {
        let prompt = instantiate(template, instance, bound, backend, MaskMode::RelCls, 0)?;
        let dist = relation_distribution(backend, &prompt, bound)?;
        out.push(argmax(&dist));
    }
    Ok(out)
}

/// Micro metrics from aligned gold/predicted label indices.
pub fn metrics_from_pairs(
    gold: &[usize],
    pred: &[usize],
    schema: &RelationSchema,
    mode: MetricsMode,
) -> MetricsReport {
    assert_eq!(gold.len(), pred.len());
    let n_labels = schema.labels().len();
    let mut confusion = vec![vec![0u64; n_labels]; n_labels];
    for (&g, &p) in gold.iter().zip(pred) {
        confusion[g][p] += 1;
    }

    let vague = schema.label_index("VAGUE");
    let (precision, recall, f1) = match mode {
        MetricsMode::StrictMicro => {
            let correct = gold.iter().zip(pred).filter(|(g, p)| g == p).count() as f64;
            let acc = ratio(correct, gold.len() as f64);
            (acc, acc, acc)
        }
        MetricsMode::VagueExcluded => {
            let is_vague = |idx: usize| Some(idx) == vague;
            let num = gold
                .iter()
                .zip(pred)
                .filter(|(g, p)| g == p && !is_vague(**g))
                .count() as f64;
            let p_den = pred.iter().filter(|&&p| !is_vague(p)).count() as f64;
            let r_den = gold.iter().filter(|&&g| !is_vague(g)).count() as f64;
            let p = ratio(num, p_den);
            let r = ratio(num, r_den);
            (p, r, f1_of(p, r))
        }
    };

    let mut per_label_f1 = std::collections::BTreeMap::new();
    for (idx, label) in schema.labels().iter().enumerate() {
        let tp = confusion[idx][idx];
        let fp: u64 = (0..n_labels).map(|g| confusion[g][idx]).sum::<u64>() - tp;
        let fn_: u64 = confusion[idx].iter().sum::<u64>() - tp;
        let value = if tp + fp + fn_ == 0 {
            None
        } else {
            Some(ratio(2.0 * tp as f64, (2 * tp + fp + fn_) as f64))
        };
        per_label_f1.insert(label.clone(), value);
    }

    MetricsReport {
        mode,
        precision,
        recall,
        f1,
        per_label_f1,
        labels: schema.labels().to_vec(),
        confusion,
        buckets: None,
    }
}

/// Predict every instance and report micro metrics under `mode`.
pub fn evaluate(
    backend: &dyn MaskedLmBackend,
    corpus: &Corpus,
    template: &Template,
    bound: &BoundVerbalizer,
    mode: MetricsMode,
) -> Result<MetricsReport> {
    let pred = predict_labels(backend, corpus, template, bound)?;
    let gold = gold_indices(corpus, &bound.schema)?;
    Ok(metrics_from_pairs(&gold, &pred, &bound.schema, mode))
}

/// Like [`evaluate`], additionally grouping test instances by whether their
/// triggers occur in `train` and reporting per-bucket counts and F1.
pub fn evaluate_with_buckets(
    backend: &dyn MaskedLmBackend,
    test: &Corpus,
    train: &Corpus,
    template: &Template,
    bound: &BoundVerbalizer,
    mode: MetricsMode,
) -> Result<MetricsReport> {
    let pred = predict_labels(backend, test, template, bound)?;
    let gold = gold_indices(test, &bound.schema)?;
    let mut report = metrics_from_pairs(&gold, &pred, &bound.schema, mode);
    let assignment = bucket_split(test, train);
    report.buckets = Some(bucket_reports(&gold, &pred, &assignment, &bound.schema, mode));
    Ok(report)
}

fn gold_indices(corpus: &Corpus, schema: &RelationSchema) -> Result<Vec<usize>> {
    corpus
        .instances()
        .iter()
        .map(|i| {
            schema.label_index(&i.label).ok_or_else(|| Error::SchemaMismatch {
                label: i.label.clone(),
                schema_id: schema.schema_id.clone(),
                context: format!("instance {}", i.instance_id),
            })
        })
        .collect()
}

/// Bucket of each test instance. Trigger identity is the lowercased surface
/// form; an instance's bucket depends on how many of its two triggers occur
/// anywhere as training triggers.
pub fn bucket_split(test: &Corpus, train: &Corpus) -> Vec<BucketKind> {
    let mut seen = BTreeSet::new();
    for instance in train.instances() {
        seen.insert(instance.trigger1_text().to_lowercase());
        seen.insert(instance.trigger2_text().to_lowercase());
    }
    test.instances()
        .iter()
        .map(|instance| {
            let a = seen.contains(&instance.trigger1_text().to_lowercase());
            let b = seen.contains(&instance.trigger2_text().to_lowercase());
            match (a, b) {
                (false, false) => BucketKind::BothUnseen,
                (true, true) => BucketKind::BothSeen,
                _ => BucketKind::OneUnseen,
            }
        })
        .collect()
}

/// Per-bucket counts and micro-F1 under `mode`.
pub fn bucket_reports(
    gold: &[usize],
    pred: &[usize],
    assignment: &[BucketKind],
    schema: &RelationSchema,
    mode: MetricsMode,
) -> Vec<BucketReport> {
    [BucketKind::BothUnseen, BucketKind::OneUnseen, BucketKind::BothSeen]
        .into_iter()
        .map(|bucket| {
            let idx: Vec<usize> =
                (0..assignment.len()).filter(|&i| assignment[i] == bucket).collect();
            let f1 = if idx.is_empty() {
                None
            } else {
                let g: Vec<usize> = idx.iter().map(|&i| gold[i]).collect();
                let p: Vec<usize> = idx.iter().map(|&i| pred[i]).collect();
                Some(metrics_from_pairs(&g, &p, schema, mode).f1)
            };
            BucketReport { bucket, count: idx.len(), f1 }
        })
        .collect()
}

/// Write one TSV row per instance: instance id, gold label, then the mask
/// hidden vector. Returns the number of data rows.
pub fn export_representations(
    backend: &dyn MaskedLmBackend,
    corpus: &Corpus,
    template: &Template,
    bound: &BoundVerbalizer,
    path: &Path,
) -> Result<usize> {
    let ioerr = |e: std::io::Error| Error::io(path.display().to_string(), e);
    let file = std::fs::File::create(path).map_err(ioerr)?;
    let mut w = std::io::BufWriter::new(file);
    let d = backend.hidden_dim();
    let mut header = String::from("instance_id\tlabel");
    for i in 0..d {
        header.push_str(&format!("\th{i}"));
    }
    writeln!(w, "{header}").map_err(ioerr)?;
    let mut rows = 0;
    for instance in corpus.instances() {
        let prompt = instantiate(template, instance, bound, backend, MaskMode::RelCls, 0)?;
        let row = backend.forward(&prompt.ids, &prompt.mask_indices)?;
        let mut line = format!("{}\t{}", instance.instance_id, instance.label);
        for v in &row[0].hidden {
            line.push_str(&format!("\t{v}"));
        }
        writeln!(w, "{line}").map_err(ioerr)?;
        rows += 1;
    }
    w.flush().map_err(ioerr)?;
    Ok(rows)
}

/// A sentence with pre-detected event spans for all-pairs prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventGraphInput {
    pub tokens: Vec<String>,
    /// Half-open token spans, pairwise disjoint.
    pub events: Vec<(usize, usize)>,
}

/// Directed labeled edge between two event indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

/// Predict a relation for every ordered event pair. Queries always run with
/// the spans in sentence order; the reversed direction reports the inverse
/// label, so the emitted graph is inverse-consistent by construction.
pub fn predict_graph(
    backend: &dyn MaskedLmBackend,
    template: &Template,
    input: &EventGraphInput,
    bound: &BoundVerbalizer,
) -> Result<Vec<Edge>> {
    let k = input.events.len();
    if k < 2 {
        return Err(Error::TooFewEvents { got: k });
    }
    let schema = &bound.schema;
    let placeholder = schema.labels()[0].clone();
    let mut edges = Vec::with_capacity(k * (k - 1));
    for i in 0..k {
        for j in (i + 1)..k {
            let (lo, hi) = if input.events[i].0 < input.events[j].0 { (i, j) } else { (j, i) };
            let instance = EventPairInstance {
                instance_id: format!("pair-{lo}-{hi}"),
                doc_id: "graph".into(),
                tokens: input.tokens.clone(),
                trigger1_span: input.events[lo],
                trigger2_span: input.events[hi],
                label: placeholder.clone(),
            };
            instance.validate(schema)?;
            let prompt = instantiate(template, &instance, bound, backend, MaskMode::RelCls, 0)?;
            let dist = relation_distribution(backend, &prompt, bound)?;
            let label_idx = argmax(&dist);
            let forward = schema.labels()[label_idx].clone();
            let backward = schema.labels()[schema.inverse_index(label_idx)].clone();
            edges.push(Edge { from: lo, to: hi, label: forward, note: None });
            edges.push(Edge { from: hi, to: lo, label: backward, note: None });
        }
    }
    annotate_inverse_consistency(&mut edges, schema);
    Ok(edges)
}

/// Mark every edge whose opposite-direction counterpart is not its schema
/// inverse. Exposed separately so externally produced edge lists can be
/// checked too.
pub fn annotate_inverse_consistency(edges: &mut [Edge], schema: &RelationSchema) {
    let lookup: Vec<(usize, usize, String)> =
        edges.iter().map(|e| (e.from, e.to, e.label.clone())).collect();
    for edge in edges.iter_mut() {
        let Some(expected) = schema.inverse_label(&edge.label) else { continue };
        if let Some((_, _, back)) =
            lookup.iter().find(|(f, t, _)| *f == edge.to && *t == edge.from)
        {
            if back != expected {
                edge.note = Some(format!(
                    "r({},{})={} conflicts with r({},{})={}",
                    edge.from, edge.to, edge.label, edge.to, edge.from, back
                ));
            }
        }
    }
}
