//! The four training losses: relation classification over answer-word
//! logits, paired masked-trigger cross-entropy, supervised contrastive loss
//! over mask hidden vectors, and their weighted composition.
//!
//! Loss functions also expose output-space gradients (with respect to logits
//! and hidden vectors) so any backend can map them onto its parameters.

use serde::{Deserialize, Serialize};

use crate::backend::{ForwardRow, MaskedLmBackend, TokenId};
use crate::error::{Error, Result};
use crate::templates::{MaskMode, PromptInstance};
use crate::verbalizer::BoundVerbalizer;

/// Probability floor applied before logarithms; hits are reported.
pub const PROB_FLOOR: f64 = 1e-12;

/// Trade-off weights and the contrastive temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { alpha: 1.0, beta: 0.5, tau: 0.2 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Config {
                message: format!("tau must be positive, got {}", self.tau),
            });
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::Config {
                message: format!("alpha and beta must be non-negative, got {} and {}", self.alpha, self.beta),
            });
        }
        Ok(())
    }
}

/// Classification loss over one batch: the mean drives training, the sum is
/// recorded alongside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreLoss {
    pub mean: f64,
    pub sum: f64,
    /// True when any gold probability was clamped to the floor.
    pub floored: bool,
}

/// Per-batch loss breakdown with the predicted label distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLossReport {
    pub l_tre: f64,
    pub l_tre_sum: f64,
    pub l_ter: f64,
    pub l_con: f64,
    pub l_total: f64,
    pub distributions: Vec<Vec<f64>>,
    pub prob_floor_hit: bool,
}

impl BatchLossReport {
    /// Assemble a report; the total is composed here and nowhere else, so
    /// the composition identity holds by construction.
    pub fn compose(
        tre: &TreLoss,
        l_ter: f64,
        l_con: f64,
        weights: &LossWeights,
        distributions: Vec<Vec<f64>>,
    ) -> Self {
        BatchLossReport {
            l_tre: tre.mean,
            l_tre_sum: tre.sum,
            l_ter,
            l_con,
            l_total: loss_total(tre.mean, l_ter, l_con, weights),
            distributions,
            prob_floor_hit: tre.floored,
        }
    }
}

/// Softmax restricted to the answer-word coordinates of a logit row.
pub fn restricted_softmax(logits: &[f64], answer_ids: &[TokenId]) -> Vec<f64> {
    let picked: Vec<f64> = answer_ids.iter().map(|&id| logits[id]).collect();
    let max = picked.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = picked.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Predicted label distribution for a classification prompt.
pub fn relation_distribution(
    backend: &dyn MaskedLmBackend,
    prompt: &PromptInstance,
    bound: &BoundVerbalizer,
) -> Result<Vec<f64>> {
    if prompt.mode != MaskMode::RelCls {
        return Err(Error::Config {
            message: format!("relation_distribution needs a rel_cls prompt, got {:?}", prompt.mode),
        });
    }
    let rows = backend.forward(&prompt.ids, &prompt.mask_indices)?;
    Ok(restricted_softmax(&rows[0].logits, bound.answer_token_ids()))
}

/// Mean and sum over instances of the negative log gold probability.
pub fn loss_tre(distributions: &[Vec<f64>], gold: &[usize]) -> TreLoss {
    assert_eq!(distributions.len(), gold.len());
    let mut sum = 0.0;
    let mut floored = false;
    for (dist, &g) in distributions.iter().zip(gold) {
        let p = dist[g];
        if p < PROB_FLOOR {
            floored = true;
        }
        sum += -p.max(PROB_FLOOR).ln();
    }
    let mean = if gold.is_empty() { 0.0 } else { sum / gold.len() as f64 };
    TreLoss { mean, sum, floored }
}

/// Gradient of the batch-mean classification loss with respect to one
/// instance's full logit row: (p - onehot) / batch at the answer ids.
pub fn tre_logit_grad(
    distribution: &[f64],
    gold_idx: usize,
    answer_ids: &[TokenId],
    vocab_size: usize,
    batch_size: usize,
) -> Vec<f64> {
    let mut d = vec![0.0; vocab_size];
    for (label_idx, &token) in answer_ids.iter().enumerate() {
        let onehot = if label_idx == gold_idx { 1.0 } else { 0.0 };
        d[token] = (distribution[label_idx] - onehot) / batch_size as f64;
    }
    d
}

/// Full-vocabulary softmax cross-entropy at one position: loss and d_logits.
pub fn full_softmax_ce(logits: &[f64], gold: TokenId) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = -(exps[gold] / z).max(PROB_FLOOR).ln();
    let d = exps
        .iter()
        .enumerate()
        .map(|(t, e)| e / z - if t == gold { 1.0 } else { 0.0 })
        .collect();
    (loss, d)
}

/// Cross-entropy of one masked prompt, averaged over its mask positions.
/// Returns the loss and d_logits per mask position (already carrying the
/// 1/positions factor).
pub fn prompt_ce(rows: &[ForwardRow], gold: &[TokenId]) -> (f64, Vec<Vec<f64>>) {
    assert_eq!(rows.len(), gold.len());
    assert!(!rows.is_empty());
    let scale = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(rows.len());
    for (row, &g) in rows.iter().zip(gold) {
        let (l, mut d) = full_softmax_ce(&row.logits, g);
        loss += scale * l;
        d.iter_mut().for_each(|x| *x *= scale);
        grads.push(d);
    }
    (loss, grads)
}

fn check_ter_pair(p1: &PromptInstance, p2: &PromptInstance) -> Result<()> {
    let ok = matches!(
        (p1.mode, p2.mode),
        (MaskMode::TerE1, MaskMode::TerE2) | (MaskMode::Rand, MaskMode::Rand)
    );
    if !ok || p1.instance_id != p2.instance_id {
        return Err(Error::Config {
            message: format!(
                "auxiliary pair must be ter_e1/ter_e2 or rand/rand from one instance, got {:?}/{:?} for {} and {}",
                p1.mode, p2.mode, p1.instance_id, p2.instance_id
            ),
        });
    }
    Ok(())
}

/// One-half the summed masked-token cross-entropies of an auxiliary prompt
/// pair; multi-word triggers average over their mask positions.
pub fn loss_ter(
    backend: &dyn MaskedLmBackend,
    p1: &PromptInstance,
    p2: &PromptInstance,
) -> Result<f64> {
    check_ter_pair(p1, p2)?;
    let mut total = 0.0;
    for p in [p1, p2] {
        let rows = backend.forward(&p.ids, &p.mask_indices)?;
        let (ce, _) = prompt_ce(&rows, &p.gold_ids);
        total += ce;
    }
    Ok(0.5 * total)
}

/// Supervised contrastive loss over a batch of mask hidden vectors: for each
/// anchor with positives (same label, excluding self), the mean over
/// positives of -log softmax similarity, summed over anchors.
pub fn loss_con(hidden: &[Vec<f64>], labels: &[usize], tau: f64) -> Result<f64> {
    con_loss_and_grads(hidden, labels, tau).map(|(l, _)| l)
}

/// Contrastive loss plus its gradient with respect to every hidden vector.
pub fn con_loss_and_grads(
    hidden: &[Vec<f64>],
    labels: &[usize],
    tau: f64,
) -> Result<(f64, Vec<Vec<f64>>)> {
    if hidden.len() != labels.len() || hidden.len() < 2 {
        return Err(Error::BatchSize { got: hidden.len() });
    }
    if !(tau > 0.0) {
        return Err(Error::Config { message: format!("tau must be positive, got {tau}") });
    }
    let n = hidden.len();
    let d = hidden[0].len();
    for h in hidden {
        if h.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: h.len() });
        }
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut loss = 0.0;
    let mut grads = vec![vec![0.0; d]; n];
    for i in 0..n {
        let positives: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if positives.is_empty() {
            continue;
        }
        let sims: Vec<f64> = (0..n)
            .map(|k| if k == i { f64::NEG_INFINITY } else { dot(&hidden[k], &hidden[i]) / tau })
            .collect();
        let max = sims.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = sims.iter().map(|&s| (s - max).exp()).sum();
        let lse = max + denom.ln();
        let inv_np = 1.0 / positives.len() as f64;
        for &j in &positives {
            loss += -inv_np * (sims[j] - lse);
        }
        // d loss_i / d h_i and d loss_i / d h_m for m != i.
        let weights: Vec<f64> = sims.iter().map(|&s| (s - lse).exp()).collect();
        for k in 0..n {
            if k == i {
                continue;
            }
            let pos_term = if labels[k] == labels[i] { inv_np } else { 0.0 };
            let coeff = (weights[k] - pos_term) / tau;
            for t in 0..d {
                grads[i][t] += coeff * hidden[k][t];
                grads[k][t] += coeff * hidden[i][t];
            }
        }
    }
    Ok((loss, grads))
}

/// Contrastive loss over L2-normalized copies of the hidden vectors, with
/// gradients chained through the normalization back to the raw vectors.
/// The unnormalized form is the default; this variant exists because
/// normalized embeddings are common contrastive practice.
pub fn con_loss_and_grads_normalized(
    hidden: &[Vec<f64>],
    labels: &[usize],
    tau: f64,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut norms = Vec::with_capacity(hidden.len());
    let mut unit = Vec::with_capacity(hidden.len());
    for h in hidden {
        let n = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(Error::Config {
                message: "cannot L2-normalize a zero hidden vector".into(),
            });
        }
        norms.push(n);
        unit.push(h.iter().map(|x| x / n).collect::<Vec<f64>>());
    }
    let (loss, unit_grads) = con_loss_and_grads(&unit, labels, tau)?;
    let grads = unit_grads
        .iter()
        .zip(&unit)
        .zip(&norms)
        .map(|((g, u), &n)| {
            let along = g.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
            g.iter().zip(u).map(|(a, b)| (a - along * b) / n).collect()
        })
        .collect();
    Ok((loss, grads))
}

/// Weighted composition of the three losses.
pub fn loss_total(l_tre: f64, l_ter: f64, l_con: f64, weights: &LossWeights) -> f64 {
    l_tre + weights.alpha * l_ter + weights.beta * l_con
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;
    use rand::Rng;

    // Reference values computed by an independent script.
    const ORACLE_PROBS: [f64; 4] = [
        0.64391425988797235,
        0.23688281808991013,
        0.087144318742032573,
        0.032058603280084988,
    ];
    const ORACLE_TRE: f64 = 0.44018969856119528;
    const LN4: f64 = 1.3862943611198906;
    const ORACLE_TER_ASYM: f64 = 1.0397207708399179;
    const FOUR_LN3: f64 = 4.3944491546724391;
    const ORACLE_CON3: f64 = 0.013430696978236113;

    #[test]
    fn restricted_softmax_matches_oracle() {
        // Answer words at ids 1..=4 of a 6-token vocabulary; the other
        // logits are noise that must not leak into the normalization.
        let logits = vec![9.0, 2.0, 1.0, 0.0, -1.0, 9.0];
        let p = restricted_softmax(&logits, &[1, 2, 3, 4]);
        for (got, want) in p.iter().zip(ORACLE_PROBS) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn restricted_softmax_equal_logits_and_singleton() {
        let logits = vec![0.7; 5];
        let p = restricted_softmax(&logits, &[0, 2, 3, 4]);
        for got in &p {
            assert!((got - 0.25).abs() < 1e-12);
        }
        let single = restricted_softmax(&logits, &[3]);
        assert_eq!(single, vec![1.0]);
    }

    #[test]
    fn restricted_softmax_is_shift_invariant() {
        let logits = vec![0.3, -1.2, 2.4, 0.0];
        let shifted: Vec<f64> = logits.iter().map(|l| l + 123.456).collect();
        let a = restricted_softmax(&logits, &[0, 1, 2, 3]);
        let b = restricted_softmax(&shifted, &[0, 1, 2, 3]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn loss_tre_matches_oracles() {
        let gold_first = loss_tre(&[ORACLE_PROBS.to_vec()], &[0]);
        assert!((gold_first.mean - ORACLE_TRE).abs() < 1e-9);
        assert!(!gold_first.floored);

        let perfect = loss_tre(&[vec![0.0, 1.0, 0.0]], &[1]);
        assert!(perfect.mean.abs() < 1e-12);

        let uniform = loss_tre(&[vec![0.25; 4]], &[2]);
        assert!((uniform.mean - LN4).abs() < 1e-9);
    }

    #[test]
    fn loss_tre_mean_and_sum_bookkeeping() {
        let dists = vec![vec![0.5, 0.5], vec![0.25, 0.75], vec![1.0, 0.0]];
        let l = loss_tre(&dists, &[0, 1, 0]);
        assert!((l.sum - l.mean * 3.0).abs() < 1e-12);
        assert!(l.mean > 0.0);
    }

    #[test]
    fn loss_tre_floors_zero_probability_and_flags() {
        let l = loss_tre(&[vec![0.0, 1.0]], &[0]);
        assert!(l.floored);
        assert!((l.mean - -PROB_FLOOR.ln()).abs() < 1e-6);
    }

    #[test]
    fn prompt_ce_uniform_and_asymmetric_oracles() {
        // Uniform over V: loss is ln V regardless of gold.
        let v = 7;
        let row = ForwardRow { logits: vec![1.3; v], hidden: vec![] };
        let (l, _) = prompt_ce(&[row], &[4]);
        assert!((l - (v as f64).ln()).abs() < 1e-9);

        // p1(gold)=0.5 over {gold, other}; p2(gold)=0.25 over 4 tokens.
        let ln = |x: f64| x.ln();
        let half = 0.5 * (ln(2.0) + ln(4.0));
        assert!((half - ORACLE_TER_ASYM).abs() < 1e-12);
    }

    #[test]
    fn full_softmax_ce_gradient_sums_to_zero() {
        let logits = vec![0.1, -0.4, 2.0, 0.7];
        let (_, d) = full_softmax_ce(&logits, 2);
        assert!(d.iter().sum::<f64>().abs() < 1e-12);
        assert!(d[2] < 0.0);
    }

    #[test]
    fn con_identical_vectors_two_classes_is_four_ln_three() {
        let h = vec![vec![0.3, -0.7, 1.1]; 4];
        let labels = vec![0, 0, 1, 1];
        let l = loss_con(&h, &labels, 0.37).unwrap();
        assert!((l - FOUR_LN3).abs() < 1e-9, "{l}");
    }

    #[test]
    fn con_three_sample_hand_oracle() {
        let h = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let labels = vec![0, 0, 1];
        let l = loss_con(&h, &labels, 0.2).unwrap();
        assert!((l - ORACLE_CON3).abs() < 1e-9, "{l}");
        assert!((l - 0.01343).abs() < 1e-6);
    }

    #[test]
    fn con_all_unique_labels_is_zero() {
        let h = vec![vec![0.2, 0.4], vec![-1.0, 0.3], vec![0.9, 0.9]];
        let (l, grads) = con_loss_and_grads(&h, &[0, 1, 2], 0.2).unwrap();
        assert_eq!(l, 0.0);
        for g in grads {
            assert!(g.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn con_is_label_permutation_invariant() {
        let mut rng = seeding::rng_from(31);
        let h: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let labels = vec![0, 1, 0, 2, 1, 0];
        let relabeled: Vec<usize> = labels.iter().map(|&l| [7, 3, 5][l]).collect();
        let a = loss_con(&h, &labels, 0.2).unwrap();
        let b = loss_con(&h, &relabeled, 0.2).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn con_is_invariant_under_joint_tau_and_dot_scaling() {
        let mut rng = seeding::rng_from(77);
        let h: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let labels = vec![0, 1, 0, 1, 0];
        let a = loss_con(&h, &labels, 0.2).unwrap();
        // Scaling every vector by c scales dot products by c^2.
        let c = 1.7;
        let scaled: Vec<Vec<f64>> = h.iter().map(|v| v.iter().map(|x| x * c).collect()).collect();
        let b = loss_con(&scaled, &labels, 0.2 * c * c).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn con_rejects_bad_batches() {
        assert!(matches!(
            loss_con(&[vec![1.0]], &[0], 0.2),
            Err(Error::BatchSize { got: 1 })
        ));
        assert!(matches!(
            loss_con(&[vec![1.0], vec![1.0, 2.0]], &[0, 0], 0.2),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(loss_con(&[vec![1.0], vec![2.0]], &[0, 0], 0.0).is_err());
    }

    #[test]
    fn con_gradients_match_finite_differences() {
        let mut rng = seeding::rng_from(5);
        let n = 6;
        let d = 5;
        let h: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let labels = vec![0, 1, 0, 1, 2, 0];
        let tau = 0.2;
        let (_, grads) = con_loss_and_grads(&h, &labels, tau).unwrap();
        let step = 1e-6;
        for i in 0..n {
            for t in 0..d {
                let mut up = h.clone();
                up[i][t] += step;
                let mut down = h.clone();
                down[i][t] -= step;
                let fd = (loss_con(&up, &labels, tau).unwrap()
                    - loss_con(&down, &labels, tau).unwrap())
                    / (2.0 * step);
                let a = grads[i][t];
                let denom = a.abs().max(fd.abs()).max(1e-8);
                assert!(((a - fd) / denom).abs() < 1e-5, "h[{i}][{t}]: {a} vs {fd}");
            }
        }
    }

    #[test]
    fn normalized_con_ignores_vector_magnitudes() {
        let mut rng = seeding::rng_from(8);
        let h: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let labels = vec![0, 1, 0, 1, 1];
        let (a, _) = con_loss_and_grads_normalized(&h, &labels, 0.2).unwrap();
        let mut scaled = h.clone();
        for (i, v) in scaled.iter_mut().enumerate() {
            let c = 0.5 + i as f64;
            v.iter_mut().for_each(|x| *x *= c);
        }
        let (b, _) = con_loss_and_grads_normalized(&scaled, &labels, 0.2).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn normalized_con_gradients_match_finite_differences() {
        let mut rng = seeding::rng_from(13);
        let h: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..3).map(|_| rng.gen_range(0.2..1.0)).collect())
            .collect();
        let labels = vec![0, 0, 1, 1];
        let tau = 0.2;
        let (_, grads) = con_loss_and_grads_normalized(&h, &labels, tau).unwrap();
        let step = 1e-6;
        for i in 0..h.len() {
            for t in 0..h[0].len() {
                let mut up = h.clone();
                up[i][t] += step;
                let mut down = h.clone();
                down[i][t] -= step;
                let fd = (con_loss_and_grads_normalized(&up, &labels, tau).unwrap().0
                    - con_loss_and_grads_normalized(&down, &labels, tau).unwrap().0)
                    / (2.0 * step);
                let a = grads[i][t];
                let denom = a.abs().max(fd.abs()).max(1e-8);
                assert!(((a - fd) / denom).abs() < 1e-5, "h[{i}][{t}]: {a} vs {fd}");
            }
        }
    }

    #[test]
    fn normalized_con_rejects_zero_vectors() {
        let h = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        assert!(con_loss_and_grads_normalized(&h, &[0, 0], 0.2).is_err());
    }

    #[test]
    fn batch_report_composes_by_construction() {
        let tre = TreLoss { mean: 0.9, sum: 1.8, floored: false };
        let w = LossWeights { alpha: 1.1, beta: 0.4, tau: 0.2 };
        let r = BatchLossReport::compose(&tre, 0.3, 0.2, &w, vec![vec![0.5, 0.5]]);
        assert_eq!(r.l_total, r.l_tre + w.alpha * r.l_ter + w.beta * r.l_con);
        assert_eq!(r.l_tre_sum, 1.8);
        assert!(!r.prob_floor_hit);
    }

    #[test]
    fn total_loss_composes_exactly() {
        let w = LossWeights { alpha: 1.0, beta: 0.5, tau: 0.2 };
        assert_eq!(loss_total(1.0, 0.4, 0.2, &w), 1.5);
        let off = LossWeights { alpha: 0.0, beta: 0.0, tau: 0.2 };
        assert_eq!(loss_total(0.77, 123.0, 9.0, &off), 0.77);

        let mut rng = seeding::rng_from(100);
        for _ in 0..100 {
            let w = LossWeights {
                alpha: rng.gen_range(0.0..2.0),
                beta: rng.gen_range(0.0..2.0),
                tau: 0.2,
            };
            let (a, b, c) = (
                rng.gen_range(0.0..3.0),
                rng.gen_range(0.0..3.0),
                rng.gen_range(0.0..3.0),
            );
            let total = loss_total(a, b, c, &w);
            assert_eq!(total - (a + w.alpha * b + w.beta * c), 0.0);
        }
    }

    #[test]
    fn weights_validate_ranges() {
        assert!(LossWeights::default().validate().is_ok());
        assert!(LossWeights { alpha: 1.1, beta: 0.5, tau: 0.2 }.validate().is_ok());
        assert!(LossWeights { alpha: 1.0, beta: 0.5, tau: 0.0 }.validate().is_err());
        assert!(LossWeights { alpha: -0.1, beta: 0.5, tau: 0.2 }.validate().is_err());
    }

    #[test]
    fn tre_logit_grad_places_mass_on_answer_ids_only() {
        let dist = vec![0.7, 0.2, 0.1];
        let d = tre_logit_grad(&dist, 0, &[2, 5, 7], 10, 4);
        assert!((d[2] - (0.7 - 1.0) / 4.0).abs() < 1e-12);
        assert!((d[5] - 0.2 / 4.0).abs() < 1e-12);
        assert!((d[7] - 0.1 / 4.0).abs() < 1e-12);
        for (i, &x) in d.iter().enumerate() {
            if ![2, 5, 7].contains(&i) {
                assert_eq!(x, 0.0);
            }
        }
    }
}
