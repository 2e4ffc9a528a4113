//! Shared fixtures for the pipeline benchmarks.

use chronoprompt::corpus::Split;
use chronoprompt::synthetic::{separable_corpus, separable_schema, vocabulary};
use chronoprompt::templates::{scaffold_by_id, Template, TemplateSource};
use chronoprompt::verbalizer::{bind_to_backend, BoundVerbalizer, RelationSchema};
use chronoprompt::{Corpus, MockMlm};

pub fn fixture_template() -> Template {
    Template::new(
        scaffold_by_id(3).unwrap(),
        [
            String::new(),
            "Event".into(),
            "happened".into(),
            "to".into(),
            ".".into(),
        ],
        TemplateSource::Manual,
    )
}

/// Corpus, backend, and bound verbalizer sized like one training batch.
pub fn fixture(n: usize) -> (RelationSchema, Corpus, Template, MockMlm, BoundVerbalizer) {
    let schema = separable_schema();
    let corpus = separable_corpus(&schema, Split::Train, n, 31).unwrap();
    let template = fixture_template();
    let vocab = vocabulary(&[&corpus], &schema, &[&template], &[]);
    let backend = MockMlm::new(19, &vocab);
    let bound = bind_to_backend(&schema, &backend).unwrap();
    (schema, corpus, template, backend, bound)
}
