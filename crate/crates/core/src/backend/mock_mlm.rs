//! Deterministic, trainable mock masked LM.
//!
//! Outputs are a frozen pseudo-random base (seeded hashes of the local token
//! window) plus a linear head over sparse hashed context features: each
//! (token, signed-distance-bucket) pair around the query position activates
//! one signed feature. The trainable tables are linear in those features, so
//! analytic gradients are exact and small datasets are genuinely fittable.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::seeding::{signed_uniform, KeyHasher};

use super::{ForwardRow, MaskedLmBackend, OutputGrad, TokenId, Tokenized};

pub const MASK_TOKEN: &str = "[MASK]";
pub const UNK_TOKEN: &str = "[UNK]";

const DEFAULT_HIDDEN_DIM: usize = 16;
const DEFAULT_FEATURE_DIM: usize = 256;
const DEFAULT_MAX_LEN: usize = 256;
/// Magnitude of the frozen pseudo-random output component.
const BASE_SCALE: f64 = 0.25;
/// Relative distances beyond this collapse into one bucket per side.
const DISTANCE_CLAMP: i64 = 5;
/// Window radius feeding the frozen base component.
const BASE_WINDOW: usize = 3;

#[derive(Debug, Clone)]
pub struct MockMlm {
    seed: u64,
    vocab: Vec<String>,
    word_to_id: BTreeMap<String, TokenId>,
    hidden_dim: usize,
    feature_dim: usize,
    max_len: usize,
    /// Vocabulary head (feature-major, feature_dim x vocab) followed by the
    /// hidden head (feature_dim x hidden_dim).
    params: Vec<f64>,
    grads: Vec<f64>,
}

impl MockMlm {
    pub fn new(seed: u64, words: &BTreeSet<String>) -> Self {
        Self::with_dims(
            seed,
            words,
            DEFAULT_HIDDEN_DIM,
            DEFAULT_FEATURE_DIM,
            DEFAULT_MAX_LEN,
        )
    }

    pub fn with_dims(
        seed: u64,
        words: &BTreeSet<String>,
        hidden_dim: usize,
        feature_dim: usize,
        max_len: usize,
    ) -> Self {
        let mut vocab = vec![MASK_TOKEN.to_string(), UNK_TOKEN.to_string()];
        vocab.extend(
            words
                .iter()
                .filter(|w| w.as_str() != MASK_TOKEN && w.as_str() != UNK_TOKEN)
                .cloned(),
        );
        Self::from_vocab_list(seed, vocab, hidden_dim, feature_dim, max_len)
    }

    /// Rebuild a backend from an explicit vocabulary list, e.g. a checkpoint.
    /// The list must start with the two special tokens.
    pub fn from_vocab_list(
        seed: u64,
        vocab: Vec<String>,
        hidden_dim: usize,
        feature_dim: usize,
        max_len: usize,
    ) -> Self {
        assert_eq!(vocab[0], MASK_TOKEN, "vocab starts with the mask token");
        assert_eq!(vocab[1], UNK_TOKEN, "vocab continues with the unk token");
        let word_to_id = vocab
            .iter()
            .enumerate()
            .map(|(id, w)| (w.clone(), id))
            .collect();
        let param_len = feature_dim * vocab.len() + feature_dim * hidden_dim;
        MockMlm {
            seed,
            vocab,
            word_to_id,
            hidden_dim,
            feature_dim,
            max_len,
            params: vec![0.0; param_len],
            grads: vec![0.0; param_len],
        }
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Sparse signed context features at one query position.
    fn features(&self, ids: &[TokenId], position: usize) -> Vec<(usize, f64)> {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        let bias = KeyHasher::new(self.seed).mix_bytes(b"bias-feature").finish();
        acc.insert(bias as usize % self.feature_dim, 1.0);
        for (j, &id) in ids.iter().enumerate() {
            let delta = (j as i64 - position as i64).clamp(-DISTANCE_CLAMP, DISTANCE_CLAMP);
            let h = KeyHasher::new(self.seed)
                .mix_bytes(b"context-feature")
                .mix_u64(id as u64)
                .mix_i64(delta)
                .finish();
            let idx = h as usize % self.feature_dim;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            *acc.entry(idx).or_insert(0.0) += sign;
        }
        acc.into_iter().filter(|&(_, w)| w != 0.0).collect()
    }

    /// Digest of the token window feeding the frozen base outputs.
    fn window_digest(&self, ids: &[TokenId], position: usize) -> u64 {
        let lo = position.saturating_sub(BASE_WINDOW);
        let hi = (position + BASE_WINDOW + 1).min(ids.len());
        let mut h = KeyHasher::new(self.seed).mix_bytes(b"base-window");
        for j in lo..hi {
            h = h.mix_i64(j as i64 - position as i64).mix_u64(ids[j] as u64);
        }
        h.finish()
    }

    fn check_input(&self, ids: &[TokenId], positions: &[usize]) -> Result<()> {
        if ids.len() > self.max_len {
            return Err(Error::Backend {
                message: format!("input of {} tokens exceeds max length {}", ids.len(), self.max_len),
            });
        }
        if let Some(&bad) = ids.iter().find(|&&id| id >= self.vocab.len()) {
            return Err(Error::Backend {
                message: format!("token id {bad} outside vocabulary of {}", self.vocab.len()),
            });
        }
        if let Some(&bad) = positions.iter().find(|&&p| p >= ids.len()) {
            return Err(Error::Backend {
                message: format!("query position {bad} outside input of {} tokens", ids.len()),
            });
        }
        Ok(())
    }

    fn hidden_offset(&self) -> usize {
        self.feature_dim * self.vocab.len()
    }
}

impl MaskedLmBackend for MockMlm {
    fn tokenize(&self, text: &str) -> Tokenized {
        let mut ids = Vec::new();
        let mut char_spans = Vec::new();
        let bytes = text.as_bytes();
        let mut start = None;
        for (i, &b) in bytes.iter().enumerate() {
            let ws = (b as char).is_ascii_whitespace();
            match (start, ws) {
                (None, false) => start = Some(i),
                (Some(s), true) => {
                    ids.push(self.encode_word(&text[s..i]));
                    char_spans.push((s, i));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            ids.push(self.encode_word(&text[s..]));
            char_spans.push((s, text.len()));
        }
        Tokenized { ids, char_spans }
    }

    fn encode_word(&self, word: &str) -> TokenId {
        self.word_to_id.get(word).copied().unwrap_or(1)
    }

    fn token_text(&self, id: TokenId) -> &str {
        &self.vocab[id]
    }

    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    fn max_len(&self) -> usize {
        self.max_len
    }

    fn mask_token_id(&self) -> TokenId {
        0
    }

    fn unk_token_id(&self) -> TokenId {
        1
    }

    fn forward(&self, ids: &[TokenId], positions: &[usize]) -> Result<Vec<ForwardRow>> {
        self.check_input(ids, positions)?;
        let v = self.vocab.len();
        let d = self.hidden_dim;
        let hidden_offset = self.hidden_offset();
        let mut rows = Vec::with_capacity(positions.len());
        for &p in positions {
            let digest = self.window_digest(ids, p);
            let mut logits: Vec<f64> = (0..v)
                .map(|t| {
                    BASE_SCALE
                        * signed_uniform(
                            KeyHasher::new(digest).mix_bytes(b"logit").mix_u64(t as u64).finish(),
                        )
                })
                .collect();
            let mut hidden: Vec<f64> = (0..d)
                .map(|k| {
                    BASE_SCALE
                        * signed_uniform(
                            KeyHasher::new(digest).mix_bytes(b"hidden").mix_u64(k as u64).finish(),
                        )
                })
                .collect();
            for (f, w) in self.features(ids, p) {
                let wrow = &self.params[f * v..(f + 1) * v];
                for (t, l) in logits.iter_mut().enumerate() {
                    *l += w * wrow[t];
                }
                let hrow = &self.params[hidden_offset + f * d..hidden_offset + (f + 1) * d];
                for (k, h) in hidden.iter_mut().enumerate() {
                    *h += w * hrow[k];
                }
            }
            rows.push(ForwardRow { logits, hidden });
        }
        Ok(rows)
    }

    fn accumulate_output_grads(&mut self, ids: &[TokenId], grads: &[OutputGrad]) -> Result<()> {
        let positions: Vec<usize> = grads.iter().map(|g| g.position).collect();
        self.check_input(ids, &positions)?;
        let v = self.vocab.len();
        let d = self.hidden_dim;
        let hidden_offset = self.hidden_offset();
        for g in grads {
            if !g.d_logits.is_empty() && g.d_logits.len() != v {
                return Err(Error::DimensionMismatch { expected: v, got: g.d_logits.len() });
            }
            if !g.d_hidden.is_empty() && g.d_hidden.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: g.d_hidden.len() });
            }
            for (f, w) in self.features(ids, g.position) {
                if !g.d_logits.is_empty() {
                    let grow = &mut self.grads[f * v..(f + 1) * v];
                    for (t, &dl) in g.d_logits.iter().enumerate() {
                        grow[t] += w * dl;
                    }
                }
                if !g.d_hidden.is_empty() {
                    let grow = &mut self.grads[hidden_offset + f * d..hidden_offset + (f + 1) * d];
                    for (k, &dh) in g.d_hidden.iter().enumerate() {
                        grow[k] += w * dh;
                    }
                }
            }
        }
        Ok(())
    }

    fn zero_grads(&mut self) {
        self.grads.fill(0.0);
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn grads(&self) -> &[f64] {
        &self.grads
    }

    fn reset_parameters(&mut self) {
        self.params.fill(0.0);
        self.grads.fill(0.0);
    }

    fn snapshot(&self) -> Vec<f64> {
        self.params.clone()
    }

    fn restore(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }
}
