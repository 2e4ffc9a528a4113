//! Model-backend interfaces and their deterministic mock implementations.
//!
//! Two capabilities are abstracted: a trainable masked LM (scoring and hidden
//! vectors at query positions, with gradient accumulation over a flat
//! parameter vector) and a span infiller (ranked fills for blank sentinels in
//! a query). The mocks are bit-reproducible under a fixed seed and genuinely
//! trainable, so the full pipeline runs at desk scale.

mod mock_infiller;
mod mock_mlm;

pub use mock_infiller::{MockInfiller, BLANK_SENTINELS};
pub use mock_mlm::MockMlm;

use crate::corpus::Span;
use crate::error::{Error, Result};

/// Index into a backend's vocabulary.
pub type TokenId = usize;

/// Tokenization result: ids plus byte-offset alignment into the input text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenized {
    pub ids: Vec<TokenId>,
    /// Byte span in the input for each produced token.
    pub char_spans: Vec<(usize, usize)>,
}

/// Per-query-position forward output.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardRow {
    /// One score per vocabulary entry.
    pub logits: Vec<f64>,
    /// Hidden vector of the backend's fixed dimension.
    pub hidden: Vec<f64>,
}

/// Loss gradient with respect to one query position's outputs. An empty
/// vector means zero gradient for that output head.
#[derive(Debug, Clone, Default)]
pub struct OutputGrad {
    pub position: usize,
    pub d_logits: Vec<f64>,
    pub d_hidden: Vec<f64>,
}

/// Trainable masked language model.
///
/// `forward` is pure given parameters; gradient accumulation and parameter
/// updates require exclusive access.
pub trait MaskedLmBackend {
    fn tokenize(&self, text: &str) -> Tokenized;
    /// Id for one word; the UNK id when out of vocabulary.
    fn encode_word(&self, word: &str) -> TokenId;
    fn token_text(&self, id: TokenId) -> &str;
    fn vocab_size(&self) -> usize;
    fn hidden_dim(&self) -> usize;
    fn max_len(&self) -> usize;
    fn mask_token_id(&self) -> TokenId;
    fn unk_token_id(&self) -> TokenId;

    /// Score and hidden vector at each query position.
    fn forward(&self, ids: &[TokenId], positions: &[usize]) -> Result<Vec<ForwardRow>>;

    /// Accumulate parameter gradients for output-space gradients at the given
    /// positions of one input. Callers may accumulate several inputs before
    /// stepping.
    fn accumulate_output_grads(&mut self, ids: &[TokenId], grads: &[OutputGrad]) -> Result<()>;

    fn zero_grads(&mut self);
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn grads(&self) -> &[f64];
    /// Reset trainable parameters to their initial values.
    fn reset_parameters(&mut self);
    fn snapshot(&self) -> Vec<f64>;
    fn restore(&mut self, params: &[f64]) -> Result<()>;
}

/// One ranked infill: a fill string per blank and the total log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct InfillCandidate {
    pub fills: [String; 5],
    pub log_prob: f64,
}

/// Sequence-to-sequence span infiller over queries containing the five blank
/// sentinels in order.
pub trait SpanInfiller {
    /// Up to `beam_width` fill tuples, sorted by descending log-probability.
    fn infill(
        &self,
        query: &[String],
        beam_width: usize,
        max_fill_tokens: usize,
    ) -> Result<Vec<InfillCandidate>>;

    /// Log-probability of a fixed fill tuple against a query.
    fn score(&self, query: &[String], fills: &[String; 5]) -> Result<f64>;

    /// Closed set of words the infiller can emit, for word-level vocabulary
    /// construction. Backends with open vocabularies return an empty list.
    fn fill_vocabulary(&self) -> Vec<String> {
        Vec::new()
    }
}

/// Encode words and replace the listed spans with mask tokens, one mask per
/// subword. Returns the token ids and the mask positions.
pub fn mask_positions(
    backend: &dyn MaskedLmBackend,
    tokens: &[String],
    spans: &[Span],
) -> Result<(Vec<TokenId>, Vec<usize>)> {
    for &(s, e) in spans {
        if s >= e || e > tokens.len() {
            return Err(Error::Alignment {
                message: format!("span [{s}, {e}) out of range for {} tokens", tokens.len()),
            });
        }
    }
    let mut ids = Vec::with_capacity(tokens.len());
    let mut mask_indices = Vec::new();
    for (word_idx, word) in tokens.iter().enumerate() {
        let word_ids = backend.tokenize(word).ids;
        if word_ids.is_empty() {
            return Err(Error::Alignment {
                message: format!("token {word:?} maps to zero subwords"),
            });
        }
        let masked = spans.iter().any(|&(s, e)| word_idx >= s && word_idx < e);
        for sub in word_ids {
            if masked {
                mask_indices.push(ids.len());
                ids.push(backend.mask_token_id());
            } else {
                ids.push(sub);
            }
        }
    }
    Ok((ids, mask_indices))
}

/// Hidden vector at a mask position.
pub fn hidden_at_mask(
    backend: &dyn MaskedLmBackend,
    ids: &[TokenId],
    mask_index: usize,
) -> Result<Vec<f64>> {
    if ids.get(mask_index) != Some(&backend.mask_token_id()) {
        return Err(Error::NotAMask { index: mask_index });
    }
    let rows = backend.forward(ids, &[mask_index])?;
    Ok(rows.into_iter().next().expect("one row per position").hidden)
}
