//! Cloze-prompt construction and multi-task prompt tuning for temporal
//! relation extraction between event pairs.
//!
//! The crate is organised around the stages of a prompt-tuning run:
//!
//! - [`corpus`]: event-pair datasets (JSONL loading, few-shot sampling,
//!   batching) plus synthetic corpora for desk-scale experiments.
//! - [`verbalizer`]: relation label sets and the injective label-to-answer-word
//!   mapping read off at the mask position.
//! - [`backend`]: the masked-LM and span-infiller interfaces together with
//!   deterministic mock implementations that make every number in the
//!   pipeline reproducible and differentiable.
//! - [`templates`]: the twelve slot-order scaffolds, candidate generation by
//!   span infilling, few-shot scoring, and prompt instantiation in all four
//!   masking modes.
//! - [`objectives`]: classification, trigger-reasoning, contrastive, and
//!   total losses with analytic gradients.
//! - [`trainer`]: the multi-task fine-tuning loop, optimizer, schedule, and
//!   checkpointing.
//! - [`evaluator`]: micro precision/recall/F1, per-label F1, few-shot event
//!   buckets, representation export, and all-pairs temporal-graph prediction.

pub mod backend;
pub mod corpus;
pub mod error;
pub mod evaluator;
pub mod objectives;
pub mod seeding;
pub mod synthetic;
pub mod templates;
pub mod trainer;
pub mod verbalizer;

pub use backend::{MaskedLmBackend, MockInfiller, MockMlm, SpanInfiller, TokenId};
pub use corpus::{Batch, Corpus, EventPairInstance, Split};
pub use error::{Error, Result};
pub use evaluator::{MetricsMode, MetricsReport};
pub use objectives::{BatchLossReport, LossWeights};
pub use templates::{MaskMode, PromptInstance, Template, TemplateScaffold};
pub use trainer::{AuxMode, Checkpoint, TrainConfig, TrainOutcome};
pub use verbalizer::{BoundVerbalizer, RelationSchema};
