//! Event-pair datasets: loading, validation, few-shot sampling, batching.
//!
//! The canonical on-disk format is JSONL, one instance per line:
//!
//! ```json
//! {"instance_id": "d1-e3-e7", "doc_id": "d1", "tokens": ["The", "board", "met", ...],
//!  "trigger1": [2, 3], "trigger2": [9, 10], "label": "BEFORE"}
//! ```
//!
//! Trigger spans are 0-based half-open token intervals, the first trigger
//! always starts before the second, and cross-sentence pairs arrive already
//! concatenated. Converters from raw dataset distributions live outside the
//! library (see `scripts/`).

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;
use crate::verbalizer::RelationSchema;

/// Dataset split tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Dev => write!(f, "dev"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// A token index interval `[start, end)`.
pub type Span = (usize, usize);

/// One annotated event pair: a (possibly concatenated) sentence, two trigger
/// spans in text order, and a gold relation label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventPairInstance {
    pub instance_id: String,
    pub doc_id: String,
    pub tokens: Vec<String>,
    #[serde(rename = "trigger1")]
    pub trigger1_span: Span,
    #[serde(rename = "trigger2")]
    pub trigger2_span: Span,
    pub label: String,
}

impl EventPairInstance {
    /// Surface form of the first trigger (tokens joined by single spaces).
    pub fn trigger1_text(&self) -> String {
        self.tokens[self.trigger1_span.0..self.trigger1_span.1].join(" ")
    }

    /// Surface form of the second trigger.
    pub fn trigger2_text(&self) -> String {
        self.tokens[self.trigger2_span.0..self.trigger2_span.1].join(" ")
    }

    /// Check span bounds, disjointness, trigger order, and label membership.
    pub fn validate(&self, schema: &RelationSchema) -> Result<()> {
        let n = self.tokens.len();
        for (name, (s, e)) in [
            ("trigger1", self.trigger1_span),
            ("trigger2", self.trigger2_span),
        ] {
            if s >= e || e > n {
                return Err(Error::Validation {
                    instance_id: self.instance_id.clone(),
                    message: format!("{name} span [{s}, {e}) out of range for {n} tokens"),
                });
            }
        }
        if self.trigger1_span.1 > self.trigger2_span.0 && self.trigger2_span.1 > self.trigger1_span.0
        {
            return Err(Error::Validation {
                instance_id: self.instance_id.clone(),
                message: format!(
                    "trigger spans overlap: [{}, {}) and [{}, {})",
                    self.trigger1_span.0,
                    self.trigger1_span.1,
                    self.trigger2_span.0,
                    self.trigger2_span.1
                ),
            });
        }
        if self.trigger1_span.0 >= self.trigger2_span.0 {
            return Err(Error::Validation {
                instance_id: self.instance_id.clone(),
                message: "trigger1 must start before trigger2".into(),
            });
        }
        if schema.label_index(&self.label).is_none() {
            return Err(Error::SchemaMismatch {
                label: self.label.clone(),
                schema_id: schema.schema_id.clone(),
                context: format!("instance {}", self.instance_id),
            });
        }
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::Validation {
                    instance_id: self.instance_id.clone(),
                    message: format!("token {i} is empty or contains whitespace: {tok:?}"),
                });
            }
        }
        Ok(())
    }
}

/// An ordered collection of validated instances under one schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub schema_id: String,
    pub split: Split,
    instances: Vec<EventPairInstance>,
}

impl Corpus {
    /// Build a corpus from instances, enforcing per-instance invariants and
    /// instance-id uniqueness.
    pub fn new(
        schema: &RelationSchema,
        split: Split,
        instances: Vec<EventPairInstance>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for inst in &instances {
            inst.validate(schema)?;
            if !seen.insert(inst.instance_id.clone()) {
                return Err(Error::Validation {
                    instance_id: inst.instance_id.clone(),
                    message: "duplicate instance_id in corpus".into(),
                });
            }
        }
        Ok(Corpus {
            schema_id: schema.schema_id.clone(),
            split,
            instances,
        })
    }

    pub fn instances(&self) -> &[EventPairInstance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Count of instances per label, in schema label order.
    pub fn label_counts(&self, schema: &RelationSchema) -> Vec<usize> {
        let mut counts = vec![0usize; schema.labels().len()];
        for inst in &self.instances {
            if let Some(idx) = schema.label_index(&inst.label) {
                counts[idx] += 1;
            }
        }
        counts
    }
}

/// One training batch; instances are borrowed clones of corpus entries.
#[derive(Debug, Clone)]
pub struct Batch {
    pub batch_index: usize,
    pub instances: Vec<EventPairInstance>,
}

/// Load a corpus from the canonical JSONL format.
///
/// Errors name the offending line and field (parse), instance id
/// (validation), or label (schema mismatch). An empty file yields an empty
/// corpus.
pub fn load_corpus(path: &Path, schema: &RelationSchema, split: Split) -> Result<Corpus> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(&display, e))?;
    let reader = BufReader::new(file);
    let mut instances = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&display, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: EventPairInstance =
            serde_json::from_str(&line).map_err(|e| Error::CorpusParse {
                path: display.clone(),
                line: lineno + 1,
                message: e.to_string(),
            })?;
        instances.push(inst);
    }
    Corpus::new(schema, split, instances)
}

/// Serialize a corpus back to the canonical JSONL format.
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|e| Error::io(&display, e))?;
    let mut w = BufWriter::new(file);
    for inst in corpus.instances() {
        let line = serde_json::to_string(inst).expect("instance serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(&display, e))?;
    }
    w.flush().map_err(|e| Error::io(&display, e))
}

/// Sample small disjoint train/dev corpora with up to `per_label` instances
/// of each label in each, fewer when a label is rarer. Selection is a
/// deterministic function of `seed`.
pub fn sample_fewshot(
    corpus: &Corpus,
    schema: &RelationSchema,
    per_label: usize,
    seed: u64,
) -> Result<(Corpus, Corpus)> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus {
            context: "sample_fewshot".into(),
        });
    }
    if per_label == 0 {
        return Err(Error::Config {
            message: "per_label must be at least 1".into(),
        });
    }
    let mut by_label: Vec<Vec<&EventPairInstance>> = vec![Vec::new(); schema.labels().len()];
    for inst in corpus.instances() {
        let idx = schema.label_index(&inst.label).expect("validated corpus");
        by_label[idx].push(inst);
    }
    let mut small_train = Vec::new();
    let mut small_dev = Vec::new();
    for (idx, group) in by_label.iter().enumerate() {
        let mut picks: Vec<&EventPairInstance> = group.clone();
        let mut rng = seeding::rng_from(seeding::derive_seed_indexed(seed, "fewshot", idx as u64));
        picks.shuffle(&mut rng);
        let take_train = per_label.min(picks.len());
        let take_dev = per_label.min(picks.len() - take_train);
        small_train.extend(picks[..take_train].iter().map(|&i| i.clone()));
        small_dev.extend(picks[take_train..take_train + take_dev].iter().map(|&i| i.clone()));
    }
    Ok((
        Corpus::new(schema, Split::Train, small_train)?,
        Corpus::new(schema, Split::Dev, small_dev)?,
    ))
}

/// Partition a corpus into batches. Every instance lands in exactly one
/// batch; all batches are full except possibly the last; with `shuffle` the
/// order is a deterministic permutation under `seed`.
pub fn batches(corpus: &Corpus, batch_size: usize, seed: u64, shuffle: bool) -> Result<Vec<Batch>> {
    if batch_size < 1 {
        return Err(Error::BatchSize { got: batch_size });
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    if shuffle {
        let mut rng = seeding::rng_from(seeding::derive_seed(seed, "batch-shuffle"));
        order.shuffle(&mut rng);
    }
    let out = order
        .chunks(batch_size)
        .enumerate()
        .map(|(batch_index, chunk)| Batch {
            batch_index,
            instances: chunk
                .iter()
                .map(|&i| corpus.instances()[i].clone())
                .collect(),
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use crate::verbalizer::builtin_schema;

    fn matres() -> RelationSchema {
        builtin_schema("matres").unwrap()
    }

    fn inst(id: &str, label: &str) -> EventPairInstance {
        EventPairInstance {
            instance_id: id.into(),
            doc_id: "d0".into(),
            tokens: vec![
                "the".into(),
                "meeting".into(),
                "ended".into(),
                "before".into(),
                "lunch".into(),
                "started".into(),
            ],
            trigger1_span: (2, 3),
            trigger2_span: (5, 6),
            label: label.into(),
        }
    }

    #[test]
    fn load_roundtrip_preserves_order_and_content() {
        let schema = matres();
        let corpus = Corpus::new(
            &schema,
            Split::Train,
            vec![inst("a", "BEFORE"), inst("b", "AFTER"), inst("c", "VAGUE")],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        save_corpus(&corpus, &path).unwrap();
        let reloaded = load_corpus(&path, &schema, Split::Train).unwrap();
        assert_eq!(corpus, reloaded);
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        File::create(&path).unwrap();
        let corpus = load_corpus(&path, &matres(), Split::Test).unwrap();
        assert!(corpus.is_empty());
    }

    #[test]
    fn malformed_record_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let mut f = File::create(&path).unwrap();
        writeln!(f, "{}", serde_json::to_string(&inst("a", "BEFORE")).unwrap()).unwrap();
        writeln!(f, "{{\"instance_id\": \"b\"}}").unwrap();
        let err = load_corpus(&path, &matres(), Split::Train).unwrap_err();
        match err {
            Error::CorpusParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn label_outside_schema_is_rejected() {
        let schema = matres();
        let err = Corpus::new(&schema, Split::Train, vec![inst("a", "INCLUDES")]).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch { .. }));
    }

    #[test]
    fn out_of_range_span_names_instance() {
        let schema = matres();
        let mut bad = inst("odd", "BEFORE");
        bad.trigger2_span = (5, 9);
        let err = Corpus::new(&schema, Split::Train, vec![bad]).unwrap_err();
        match err {
            Error::Validation { instance_id, .. } => assert_eq!(instance_id, "odd"),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn trigger_order_and_overlap_are_enforced() {
        let schema = matres();
        let mut swapped = inst("s", "BEFORE");
        swapped.trigger1_span = (5, 6);
        swapped.trigger2_span = (2, 3);
        assert!(Corpus::new(&schema, Split::Train, vec![swapped]).is_err());

        let mut overlapping = inst("o", "BEFORE");
        overlapping.trigger1_span = (2, 4);
        overlapping.trigger2_span = (3, 6);
        assert!(Corpus::new(&schema, Split::Train, vec![overlapping]).is_err());
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let schema = matres();
        let err =
            Corpus::new(&schema, Split::Train, vec![inst("a", "BEFORE"), inst("a", "AFTER")])
                .unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
    }

    #[test]
    fn fewshot_full_labels_yields_disjoint_per_label_samples() {
        let schema = matres();
        let mut all = Vec::new();
        for label in ["BEFORE", "AFTER", "EQUAL", "VAGUE"] {
            for k in 0..8 {
                all.push(inst(&format!("{label}-{k}"), label));
            }
        }
        let corpus = Corpus::new(&schema, Split::Train, all).unwrap();
        let (tr, dev) = sample_fewshot(&corpus, &schema, 4, 11).unwrap();
        assert_eq!(tr.label_counts(&schema), vec![4, 4, 4, 4]);
        assert_eq!(dev.label_counts(&schema), vec![4, 4, 4, 4]);
        let tr_ids: HashSet<_> = tr.instances().iter().map(|i| &i.instance_id).collect();
        assert!(dev
            .instances()
            .iter()
            .all(|i| !tr_ids.contains(&i.instance_id)));
    }

    #[test]
    fn fewshot_scarce_label_appears_once() {
        let schema = matres();
        let mut all = vec![inst("only-equal", "EQUAL")];
        for k in 0..20 {
            all.push(inst(&format!("b{k}"), "BEFORE"));
        }
        let corpus = Corpus::new(&schema, Split::Train, all).unwrap();
        let (tr, dev) = sample_fewshot(&corpus, &schema, 8, 3).unwrap();
        let count = |c: &Corpus| {
            c.instances()
                .iter()
                .filter(|i| i.instance_id == "only-equal")
                .count()
        };
        assert_eq!(count(&tr) + count(&dev), 1);
    }

    #[test]
    fn fewshot_is_deterministic() {
        let schema = builtin_schema("matres").unwrap();
        let corpus = synthetic::separable_corpus(&synthetic::separable_schema(), Split::Train, 60, 5)
            .unwrap();
        let schema2 = synthetic::separable_schema();
        let a = sample_fewshot(&corpus, &schema2, 3, 42).unwrap();
        let b = sample_fewshot(&corpus, &schema2, 3, 42).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        drop(schema);
    }

    #[test]
    fn fewshot_empty_corpus_errors() {
        let schema = matres();
        let corpus = Corpus::new(&schema, Split::Train, vec![]).unwrap();
        assert!(sample_fewshot(&corpus, &schema, 2, 0).is_err());
    }

    #[test]
    fn batch_sizes_follow_arithmetic() {
        let schema = matres();
        let all: Vec<_> = (0..40).map(|k| inst(&format!("i{k}"), "BEFORE")).collect();
        let corpus = Corpus::new(&schema, Split::Train, all).unwrap();
        let bs = batches(&corpus, 16, 0, false).unwrap();
        let sizes: Vec<usize> = bs.iter().map(|b| b.instances.len()).collect();
        assert_eq!(sizes, vec![16, 16, 8]);
    }

    #[test]
    fn unshuffled_batches_preserve_corpus_order() {
        let schema = matres();
        let all: Vec<_> = (0..5).map(|k| inst(&format!("i{k}"), "BEFORE")).collect();
        let corpus = Corpus::new(&schema, Split::Train, all).unwrap();
        let bs = batches(&corpus, 2, 9, false).unwrap();
        let flat: Vec<&str> = bs
            .iter()
            .flat_map(|b| b.instances.iter().map(|i| i.instance_id.as_str()))
            .collect();
        assert_eq!(flat, vec!["i0", "i1", "i2", "i3", "i4"]);
    }

    #[test]
    fn shuffled_batches_are_deterministic_partition() {
        let schema = matres();
        let all: Vec<_> = (0..23).map(|k| inst(&format!("i{k}"), "BEFORE")).collect();
        let corpus = Corpus::new(&schema, Split::Train, all).unwrap();
        let a = batches(&corpus, 4, 77, true).unwrap();
        let b = batches(&corpus, 4, 77, true).unwrap();
        let ids = |bs: &[Batch]| -> Vec<String> {
            bs.iter()
                .flat_map(|b| b.instances.iter().map(|i| i.instance_id.clone()))
                .collect()
        };
        assert_eq!(ids(&a), ids(&b));
        let mut sorted = ids(&a);
        sorted.sort();
        let mut expected: Vec<String> = (0..23).map(|k| format!("i{k}")).collect();
        expected.sort();
        assert_eq!(sorted, expected);
    }

    #[test]
    fn zero_batch_size_errors() {
        let schema = matres();
        let corpus = Corpus::new(&schema, Split::Train, vec![inst("a", "BEFORE")]).unwrap();
        assert!(matches!(
            batches(&corpus, 0, 0, false),
            Err(Error::BatchSize { got: 0 })
        ));
    }
}
