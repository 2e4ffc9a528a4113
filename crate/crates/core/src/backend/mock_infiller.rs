//! Deterministic mock span infiller.
//!
//! Each blank draws from a fixed phrase table; a phrase's log-probability is
//! a seeded hash of (blank, phrase, query digest), log-softmax-normalized
//! over that blank's table. Blanks are independent given the query, so the
//! prefix beam below decodes the exact top-w tuples and small tables keep
//! brute-force enumeration feasible for oracle tests.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::seeding::{signed_uniform, KeyHasher};

use super::{InfillCandidate, SpanInfiller};

/// Blank markers, in the order they must appear in queries.
pub const BLANK_SENTINELS: [&str; 5] = ["<X>", "<Y>", "<Z>", "<M>", "<N>"];

/// Log-probability assigned to fills outside the phrase table, standing in
/// for the vanishing tail mass of an open-vocabulary model.
const OFF_TABLE_LOG_PROB: f64 = -100.0;

/// Spread of raw phrase scores before normalization.
const SCORE_SCALE: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct MockInfiller {
    seed: u64,
    tables: [Vec<String>; 5],
}

impl MockInfiller {
    pub fn new(seed: u64) -> Self {
        let t = |phrases: &[&str]| phrases.iter().map(|p| p.to_string()).collect::<Vec<_>>();
        MockInfiller {
            seed,
            tables: [
                t(&["", "note that", "in the report", "context :", "recently"]),
                t(&["", "the event", "then", "we find", "notably"]),
                t(&["", "happened", "occurs", "is placed", "unfolds"]),
                t(&["", "to", "compared with", "against", "with"]),
                t(&["", ".", "in time .", "overall .", "as stated ."]),
            ],
        }
    }

    pub fn with_tables(seed: u64, tables: [Vec<String>; 5]) -> Self {
        MockInfiller { seed, tables }
    }

    pub fn tables(&self) -> &[Vec<String>; 5] {
        &self.tables
    }

    fn query_digest(&self, query: &[String]) -> Result<u64> {
        let mut next_sentinel = 0;
        for tok in query {
            if let Some(pos) = BLANK_SENTINELS.iter().position(|s| s == tok) {
                if pos != next_sentinel {
                    return Err(Error::Backend {
                        message: format!("blank sentinel {tok} out of order in infill query"),
                    });
                }
                next_sentinel += 1;
            }
        }
        if next_sentinel != BLANK_SENTINELS.len() {
            return Err(Error::Backend {
                message: format!("infill query has {next_sentinel} of 5 blank sentinels"),
            });
        }
        let mut h = KeyHasher::new(self.seed).mix_bytes(b"query");
        for tok in query {
            h = h.mix_bytes(tok.as_bytes()).mix_u64(0x1f);
        }
        Ok(h.finish())
    }

    /// Log-probabilities for one blank's table under a query.
    fn blank_scores(&self, blank: usize, digest: u64) -> Vec<f64> {
        let raw: Vec<f64> = self.tables[blank]
            .iter()
            .map(|phrase| {
                SCORE_SCALE
                    * signed_uniform(
                        KeyHasher::new(self.seed)
                            .mix_bytes(b"fill-score")
                            .mix_u64(blank as u64)
                            .mix_bytes(phrase.as_bytes())
                            .mix_u64(digest)
                            .finish(),
                    )
            })
            .collect();
        let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + raw.iter().map(|r| (r - max).exp()).sum::<f64>().ln();
        raw.iter().map(|r| r - lse).collect()
    }
}

fn normalize_fill(fill: &str) -> String {
    fill.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl SpanInfiller for MockInfiller {
    fn infill(
        &self,
        query: &[String],
        beam_width: usize,
        max_fill_tokens: usize,
    ) -> Result<Vec<InfillCandidate>> {
        if beam_width == 0 {
            return Err(Error::Backend { message: "beam width must be at least 1".into() });
        }
        let digest = self.query_digest(query)?;
        // Prefix beam of width w over independent per-blank scores finds the
        // exact top-w tuples: a prefix outside the top w is dominated by w
        // completions of better prefixes.
        let mut partials: Vec<(f64, Vec<usize>)> = vec![(0.0, Vec::new())];
        for blank in 0..5 {
            let scores = self.blank_scores(blank, digest);
            let mut next = Vec::with_capacity(partials.len() * scores.len());
            for (score, prefix) in &partials {
                for (idx, s) in scores.iter().enumerate() {
                    if self.tables[blank][idx].split_whitespace().count() > max_fill_tokens {
                        continue;
                    }
                    let mut ext = prefix.clone();
                    ext.push(idx);
                    next.push((score + s, ext));
                }
            }
            if next.is_empty() {
                return Err(Error::Backend {
                    message: format!("no phrase for blank {blank} fits in {max_fill_tokens} tokens"),
                });
            }
            next.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            next.truncate(beam_width);
            partials = next;
        }
        Ok(partials
            .into_iter()
            .map(|(log_prob, idxs)| InfillCandidate {
                fills: std::array::from_fn(|b| self.tables[b][idxs[b]].clone()),
                log_prob,
            })
            .collect())
    }

    fn score(&self, query: &[String], fills: &[String; 5]) -> Result<f64> {
        let digest = self.query_digest(query)?;
        let mut total = 0.0;
        for (blank, fill) in fills.iter().enumerate() {
            let fill = normalize_fill(fill);
            let scores = self.blank_scores(blank, digest);
            total += match self.tables[blank].iter().position(|p| *p == fill) {
                Some(idx) => scores[idx],
                None => OFF_TABLE_LOG_PROB,
            };
        }
        Ok(total)
    }

    fn fill_vocabulary(&self) -> Vec<String> {
        let words: BTreeSet<String> = self
            .tables
            .iter()
            .flatten()
            .flat_map(|p| p.split_whitespace())
            .map(|w| w.to_string())
            .collect();
        words.into_iter().collect()
    }
}
