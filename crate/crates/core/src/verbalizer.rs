//! Relation label sets and the injective label-to-answer-word mapping read
//! off at the mask position.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::backend::{MaskedLmBackend, TokenId};
use crate::error::{Error, Result};

/// A label inventory plus its verbalizer words and inverse-relation map.
///
/// Labels, words, and inverses are parallel vectors indexed by label id, so
/// iteration order is the declaration order everywhere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSchema {
    pub schema_id: String,
    labels: Vec<String>,
    words: Vec<String>,
    inverse: Vec<usize>,
}

impl RelationSchema {
    /// Build a schema from (label, answer word, inverse label) triples.
    pub fn new(schema_id: &str, triples: &[(&str, &str, &str)]) -> Result<Self> {
        let labels: Vec<String> = triples.iter().map(|t| t.0.to_string()).collect();
        let words: Vec<String> = triples.iter().map(|t| t.1.to_string()).collect();
        let mut inverse = Vec::with_capacity(triples.len());
        for (label, _, inv) in triples {
            let idx = labels.iter().position(|l| l == inv).ok_or_else(|| {
                Error::InvalidSchema {
                    schema_id: schema_id.to_string(),
                    message: format!("inverse of {label} names unknown label {inv}"),
                }
            })?;
            inverse.push(idx);
        }
        let schema = RelationSchema {
            schema_id: schema_id.to_string(),
            labels,
            words,
            inverse,
        };
        schema.validate()?;
        Ok(schema)
    }

    /// Enforce label uniqueness, verbalizer injectivity, and inverse-map
    /// involution.
    pub fn validate(&self) -> Result<()> {
        if self.labels.is_empty() {
            return Err(Error::InvalidSchema {
                schema_id: self.schema_id.clone(),
                message: "schema has no labels".into(),
            });
        }
        if self.labels.len() != self.words.len() || self.labels.len() != self.inverse.len() {
            return Err(Error::InvalidSchema {
                schema_id: self.schema_id.clone(),
                message: "labels, words, and inverse map differ in length".into(),
            });
        }
        let mut seen_labels = HashSet::new();
        for label in &self.labels {
            if !seen_labels.insert(label) {
                return Err(Error::InvalidSchema {
                    schema_id: self.schema_id.clone(),
                    message: format!("duplicate label {label}"),
                });
            }
        }
        let mut seen_words = HashSet::new();
        for (label, word) in self.labels.iter().zip(&self.words) {
            if word.is_empty() || word.chars().any(char::is_whitespace) {
                return Err(Error::InvalidSchema {
                    schema_id: self.schema_id.clone(),
                    message: format!("answer word for {label} must be one non-empty word, got {word:?}"),
                });
            }
            if !seen_words.insert(word) {
                return Err(Error::InvalidSchema {
                    schema_id: self.schema_id.clone(),
                    message: format!("verbalizer not injective: {word:?} used more than once"),
                });
            }
        }
        for (idx, &inv) in self.inverse.iter().enumerate() {
            if inv >= self.labels.len() || self.inverse[inv] != idx {
                return Err(Error::InvalidSchema {
                    schema_id: self.schema_id.clone(),
                    message: format!("inverse map is not an involution at {}", self.labels[idx]),
                });
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Answer word for a label id.
    pub fn word(&self, label_idx: usize) -> &str {
        &self.words[label_idx]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn inverse_index(&self, label_idx: usize) -> usize {
        self.inverse[label_idx]
    }

    pub fn inverse_label(&self, label: &str) -> Option<&str> {
        self.label_index(label)
            .map(|idx| self.labels[self.inverse[idx]].as_str())
    }

    /// Replace answer words for the named labels, e.g. from a JSON override
    /// file `{"LABEL": "word"}`. Unknown labels and injectivity violations
    /// are rejected.
    pub fn apply_overrides(&mut self, overrides: &BTreeMap<String, String>) -> Result<()> {
        for (label, word) in overrides {
            let idx = self.label_index(label).ok_or_else(|| Error::SchemaMismatch {
                label: label.clone(),
                schema_id: self.schema_id.clone(),
                context: "verbalizer override".into(),
            })?;
            self.words[idx] = word.clone();
        }
        self.validate()
    }
}

/// Built-in schemas for the two benchmark label sets.
///
/// The default answer words are a documented project choice; override via
/// config when a backend's vocabulary prefers other single-token words.
pub fn builtin_schema(dataset_id: &str) -> Result<RelationSchema> {
    match dataset_id {
        "matres" => RelationSchema::new(
            "matres",
            &[
                ("BEFORE", "before", "AFTER"),
                ("AFTER", "after", "BEFORE"),
                ("EQUAL", "simultaneously", "EQUAL"),
                ("VAGUE", "vaguely", "VAGUE"),
            ],
        ),
        "tbdense" => RelationSchema::new(
            "tbdense",
            &[
                ("BEFORE", "before", "AFTER"),
                ("AFTER", "after", "BEFORE"),
                ("SIMULTANEOUS", "simultaneously", "SIMULTANEOUS"),
                ("INCLUDES", "around", "INCLUDED IN"),
                ("INCLUDED IN", "during", "INCLUDES"),
                ("VAGUE", "vaguely", "VAGUE"),
            ],
        ),
        other => Err(Error::UnknownSchema {
            id: other.to_string(),
            known: "matres, tbdense".into(),
        }),
    }
}

/// A schema whose answer words have been resolved to single vocabulary token
/// ids under a concrete backend. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundVerbalizer {
    pub schema: RelationSchema,
    token_ids: Vec<TokenId>,
}

/// Resolve every answer word to exactly one known vocabulary token.
pub fn bind_to_backend(
    schema: &RelationSchema,
    backend: &dyn MaskedLmBackend,
) -> Result<BoundVerbalizer> {
    schema.validate()?;
    let mut token_ids = Vec::with_capacity(schema.labels().len());
    for (idx, word) in schema.words().iter().enumerate() {
        let tokenized = backend.tokenize(word);
        if tokenized.ids.len() != 1 {
            return Err(Error::Binding {
                label: schema.labels()[idx].clone(),
                word: word.clone(),
                message: format!("encodes to {} tokens, need exactly 1", tokenized.ids.len()),
            });
        }
        let id = tokenized.ids[0];
        if id == backend.unk_token_id() {
            return Err(Error::Binding {
                label: schema.labels()[idx].clone(),
                word: word.clone(),
                message: "not in backend vocabulary".into(),
            });
        }
        if token_ids.contains(&id) {
            return Err(Error::Binding {
                label: schema.labels()[idx].clone(),
                word: word.clone(),
                message: "token id collides with another answer word".into(),
            });
        }
        token_ids.push(id);
    }
    Ok(BoundVerbalizer {
        schema: schema.clone(),
        token_ids: token_ids.clone(),
    })
}

impl BoundVerbalizer {
    /// Token id for a label id.
    pub fn token_id(&self, label_idx: usize) -> TokenId {
        self.token_ids[label_idx]
    }

    /// All answer token ids in schema label order.
    pub fn answer_token_ids(&self) -> &[TokenId] {
        &self.token_ids
    }

    /// Label id for an answer token, if the token is an answer word.
    pub fn label_of_token(&self, token: TokenId) -> Option<usize> {
        self.token_ids.iter().position(|&t| t == token)
    }
}
