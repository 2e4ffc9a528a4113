//! Synthetic event-pair corpora for desk-scale experiments, plus a
//! vocabulary builder for constructing mock backends that can encode them.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{Corpus, EventPairInstance, Split};
use crate::error::Result;
use crate::seeding::{derive_seed, rng_from};
use crate::templates::{Template, TRIGGER_QUOTE};
use crate::verbalizer::RelationSchema;

/// Trigger verbs; lexical order over them defines the synthetic labels.
pub const TRIGGER_VERBS: [&str; 12] = [
    "arrive", "bloom", "collapse", "depart", "erupt", "finish", "gather", "halt", "ignite",
    "jump", "launch", "march",
];

const CTX_A: [&str; 3] = ["yesterday", "today", "reportedly"];
const CTX_B: [&str; 3] = ["and", "while", "as"];
const CTX_C: [&str; 3] = ["downtown", "nearby", "quietly"];

/// Two-label schema whose relation is decidable from the triggers alone.
pub fn separable_schema() -> RelationSchema {
    RelationSchema::new(
        "synthetic-order",
        &[("BEFORE", "before", "AFTER"), ("AFTER", "after", "BEFORE")],
    )
    .expect("fixed schema is valid")
}

fn five_token_instance(
    id: String,
    ctx: (&str, &str, &str),
    t1: &str,
    t2: &str,
    label: &str,
) -> EventPairInstance {
    EventPairInstance {
        instance_id: id,
        doc_id: "synthetic".into(),
        tokens: vec![ctx.0.into(), t1.into(), ctx.1.into(), t2.into(), ctx.2.into()],
        trigger1_span: (1, 2),
        trigger2_span: (3, 4),
        label: label.into(),
    }
}

/// Corpus whose gold label is BEFORE exactly when the first trigger sorts
/// alphabetically before the second, making the task solvable from trigger
/// identity alone. Trigger pairs sit at least three lexicon positions apart
/// so the two classes stay well separated.
pub fn separable_corpus(
    schema: &RelationSchema,
    split: Split,
    n: usize,
    seed: u64,
) -> Result<Corpus> {
    let mut rng = rng_from(derive_seed(seed, "separable"));
    let mut instances = Vec::with_capacity(n);
    for i in 0..n {
        let i1 = rng.gen_range(0..TRIGGER_VERBS.len());
        let i2 = loop {
            let j = rng.gen_range(0..TRIGGER_VERBS.len());
            if i1.abs_diff(j) >= 3 {
                break j;
            }
        };
        let (t1, t2) = (TRIGGER_VERBS[i1], TRIGGER_VERBS[i2]);
        let label = if t1 < t2 { "BEFORE" } else { "AFTER" };
        let ctx = (
            *CTX_A.choose(&mut rng).unwrap(),
            *CTX_B.choose(&mut rng).unwrap(),
            *CTX_C.choose(&mut rng).unwrap(),
        );
        instances.push(five_token_instance(format!("{split}-{i}"), ctx, t1, t2, label));
    }
    Corpus::new(schema, split, instances)
}

/// Corpus with uniformly random triggers and labels, for metric and bucket
/// property tests; carries no learnable signal.
pub fn random_corpus(
    schema: &RelationSchema,
    split: Split,
    n: usize,
    seed: u64,
) -> Result<Corpus> {
    let mut rng = rng_from(derive_seed(seed, "random"));
    let labels = schema.labels().to_vec();
    let mut instances = Vec::with_capacity(n);
    for i in 0..n {
        let t1 = *TRIGGER_VERBS.choose(&mut rng).unwrap();
        let t2 = *TRIGGER_VERBS.choose(&mut rng).unwrap();
        let label = labels[rng.gen_range(0..labels.len())].clone();
        let ctx = (
            *CTX_A.choose(&mut rng).unwrap(),
            *CTX_B.choose(&mut rng).unwrap(),
            *CTX_C.choose(&mut rng).unwrap(),
        );
        instances.push(five_token_instance(format!("{split}-{i}"), ctx, t1, t2, &label));
    }
    Corpus::new(schema, split, instances)
}

/// Every word a mock backend must know to encode the given corpora rendered
/// under the given templates: corpus tokens, answer words, filler words, the
/// trigger quote, and any extras.
pub fn vocabulary(
    corpora: &[&Corpus],
    schema: &RelationSchema,
    templates: &[&Template],
    extra: &[&str],
) -> BTreeSet<String> {
    let mut words = BTreeSet::new();
    for corpus in corpora {
        for instance in corpus.instances() {
            words.extend(instance.tokens.iter().cloned());
        }
    }
    words.extend(schema.words().iter().cloned());
    for template in templates {
        for filler in &template.fillers {
            words.extend(filler.split_whitespace().map(str::to_string));
        }
    }
    words.insert(TRIGGER_QUOTE.to_string());
    words.extend(extra.iter().map(|s| s.to_string()));
    words
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::templates::{scaffold_by_id, TemplateSource};

    #[test]
    fn separable_labels_follow_trigger_order() {
        let schema = separable_schema();
        let corpus = separable_corpus(&schema, Split::Train, 60, 5).unwrap();
        assert_eq!(corpus.len(), 60);
        for inst in corpus.instances() {
            let t1 = inst.trigger1_text();
            let t2 = inst.trigger2_text();
            assert_ne!(t1, t2);
            let expected = if t1 < t2 { "BEFORE" } else { "AFTER" };
            assert_eq!(inst.label, expected, "{}", inst.instance_id);
        }
    }

    #[test]
    fn separable_corpus_is_deterministic_and_seed_sensitive() {
        let schema = separable_schema();
        let a = separable_corpus(&schema, Split::Train, 20, 9).unwrap();
        let b = separable_corpus(&schema, Split::Train, 20, 9).unwrap();
        assert_eq!(
            serde_json::to_string(a.instances()).unwrap(),
            serde_json::to_string(b.instances()).unwrap()
        );
        let c = separable_corpus(&schema, Split::Train, 20, 10).unwrap();
        assert_ne!(
            serde_json::to_string(a.instances()).unwrap(),
            serde_json::to_string(c.instances()).unwrap()
        );
    }

    #[test]
    fn separable_corpus_covers_both_labels() {
        let schema = separable_schema();
        let corpus = separable_corpus(&schema, Split::Train, 80, 1).unwrap();
        let counts = corpus.label_counts(&schema);
        assert!(counts.iter().all(|&c| c > 10), "{counts:?}");
    }

    #[test]
    fn random_corpus_validates_and_uses_schema_labels() {
        let schema = separable_schema();
        let corpus = random_corpus(&schema, Split::Test, 40, 3).unwrap();
        assert_eq!(corpus.len(), 40);
        for inst in corpus.instances() {
            assert!(schema.label_index(&inst.label).is_some());
        }
    }

    #[test]
    fn vocabulary_covers_rendering_needs() {
        let schema = separable_schema();
        let corpus = separable_corpus(&schema, Split::Train, 10, 2).unwrap();
        let template = Template::new(
            scaffold_by_id(3).unwrap(),
            [
                String::new(),
                "Event".into(),
                "happened".into(),
                "to".into(),
                ".".into(),
            ],
            TemplateSource::Manual,
        );
        let words = vocabulary(&[&corpus], &schema, &[&template], &["bonus"]);
        for inst in corpus.instances() {
            for t in &inst.tokens {
                assert!(words.contains(t));
            }
        }
        for w in ["before", "after", "Event", "happened", "to", ".", "'", "bonus"] {
            assert!(words.contains(w), "missing {w}");
        }
    }
}
