//! Multi-task fine-tuning: batched prompt classification with optional
//! trigger-reasoning and contrastive terms, a decoupled-weight-decay
//! adaptive optimizer, a linear learning-rate schedule, and best-dev
//! checkpointing.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{MaskedLmBackend, OutputGrad};
use crate::corpus::{batches, Corpus, EventPairInstance};
use crate::error::{Error, Result};
use crate::evaluator::{evaluate, MetricsMode, MetricsReport};
use crate::objectives::{
    con_loss_and_grads, con_loss_and_grads_normalized, loss_tre, prompt_ce, restricted_softmax,
    tre_logit_grad, BatchLossReport, LossWeights,
};
use crate::seeding::{derive_seed, derive_seed_indexed};
use crate::templates::{instantiate, MaskMode, Template};
use crate::verbalizer::BoundVerbalizer;

/// Which auxiliary prompt pair accompanies each classification prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuxMode {
    /// Mask the quoted copy of trigger one, then of trigger two.
    Ter,
    /// Mask one random non-trigger token, twice.
    Rand,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weights: LossWeights,
    pub seed: u64,
    pub aux_mode: AuxMode,
    pub con_enabled: bool,
    /// L2-normalize hidden vectors inside the contrastive loss; off by
    /// default so the loss uses raw dot products.
    #[serde(default)]
    pub con_normalize: bool,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            epochs: 10,
            learning_rate: 5e-5,
            weights: LossWeights::default(),
            seed: 0,
            aux_mode: AuxMode::Ter,
            con_enabled: true,
            con_normalize: false,
            weight_decay: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::BatchSize { got: 0 });
        }
        if self.epochs == 0 {
            return Err(Error::Config { message: "epochs must be positive".into() });
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config {
                message: format!("learning rate must be positive, got {}", self.learning_rate),
            });
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config {
                message: format!("weight decay must be non-negative, got {}", self.weight_decay),
            });
        }
        self.weights.validate()
    }

    /// Hash of the serialized config; field order is fixed by the struct, so
    /// equal configs hash equally across runs and platforms.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex_digest(json.as_bytes())
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Identifier for a parameter snapshot: digest of the raw float bits.
pub fn snapshot_id(params: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(params.len() * 8);
    for p in params {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    hex_digest(&bytes)
}

/// Learning rate decayed linearly from `lr0` to zero over `total` steps;
/// step 0 trains at full rate, the step after the last would be zero.
pub fn linear_lr(lr0: f64, step: u64, total: u64) -> f64 {
    assert!(total > 0);
    lr0 * ((total - step.min(total)) as f64 / total as f64)
}

/// Adaptive optimizer with decoupled weight decay, state sized to the
/// parameter vector it is stepped with.
#[derive(Debug, Clone)]
pub struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamW {
    pub fn new(n_params: usize, weight_decay: f64) -> Self {
        AdamW {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * params[i]);
        }
    }
}

/// Loss breakdown logged once per optimizer step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub l_tre: f64,
    pub l_ter: f64,
    pub l_con: f64,
    pub l_total: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub steps: Vec<StepRecord>,
    /// Dev micro-F1 measured after each completed epoch.
    pub epoch_dev_f1: Vec<f64>,
    /// Steps on which a gold probability had to be clamped before the log.
    pub prob_floor_hits: u64,
}

/// Self-describing snapshot of the best-dev parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub snapshot_id: String,
    pub params: Vec<f64>,
    /// Epoch (0-based) whose dev evaluation produced this snapshot.
    pub epoch: usize,
    pub dev_metrics: MetricsReport,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: TrainHistory,
    /// Step at which a non-finite loss stopped training, if any.
    pub diverged_at: Option<u64>,
}

/// Compute every configured loss over one batch and accumulate the exact
/// gradient of the weighted total into the backend, without stepping.
/// `step` seeds the random-mask draws, so repeating a step re-creates the
/// same auxiliary prompts.
pub fn batch_losses_and_grads(
    backend: &mut dyn MaskedLmBackend,
    instances: &[EventPairInstance],
    template: &Template,
    bound: &BoundVerbalizer,
    config: &TrainConfig,
    step: u64,
) -> Result<BatchLossReport> {
    let b = instances.len();
    if b == 0 {
        return Err(Error::BatchSize { got: 0 });
    }
    let answer_ids = bound.answer_token_ids().to_vec();
    let vocab_size = backend.vocab_size();

    // Classification forward pass over the batch.
    let mut distributions = Vec::with_capacity(b);
    let mut golds = Vec::with_capacity(b);
    let mut hiddens = Vec::with_capacity(b);
    let mut cls_prompts = Vec::with_capacity(b);
    for instance in instances {
        let prompt = instantiate(template, instance, bound, backend, MaskMode::RelCls, 0)?;
        let rows = backend.forward(&prompt.ids, &prompt.mask_indices)?;
        distributions.push(restricted_softmax(&rows[0].logits, &answer_ids));
        hiddens.push(rows[0].hidden.clone());
        golds.push(bound.schema.label_index(&instance.label).ok_or_else(|| {
            Error::SchemaMismatch {
                label: instance.label.clone(),
                schema_id: bound.schema.schema_id.clone(),
                context: format!("instance {}", instance.instance_id),
            }
        })?);
        cls_prompts.push(prompt);
    }
    let tre = loss_tre(&distributions, &golds);

    // Contrastive term over the mask hidden vectors; a one-instance
    // trailing batch has no pairs and contributes zero.
    let (l_con, con_grads) = if config.con_enabled && b >= 2 {
        if config.con_normalize {
            con_loss_and_grads_normalized(&hiddens, &golds, config.weights.tau)?
        } else {
            con_loss_and_grads(&hiddens, &golds, config.weights.tau)?
        }
    } else {
        (0.0, vec![vec![]; b])
    };

    // Accumulate classification and contrastive gradients.
    for i in 0..b {
        let d_logits = tre_logit_grad(&distributions[i], golds[i], &answer_ids, vocab_size, b);
        let d_hidden: Vec<f64> = con_grads[i].iter().map(|g| config.weights.beta * g).collect();
        let grad = OutputGrad {
            position: cls_prompts[i].mask_indices[0],
            d_logits,
            d_hidden,
        };
        backend.accumulate_output_grads(&cls_prompts[i].ids, &[grad])?;
    }

    // Auxiliary pair per instance: forward, accumulate scaled gradients, and
    // average the pair losses over the batch.
    let mut l_ter = 0.0;
    if config.aux_mode != AuxMode::Off {
        for (i, instance) in instances.iter().enumerate() {
            let modes = match config.aux_mode {
                AuxMode::Ter => [MaskMode::TerE1, MaskMode::TerE2],
                AuxMode::Rand => [MaskMode::Rand, MaskMode::Rand],
                AuxMode::Off => unreachable!(),
            };
            for (half, mode) in modes.into_iter().enumerate() {
                let aux_seed = derive_seed_indexed(
                    derive_seed(config.seed, "aux"),
                    if half == 0 { "first" } else { "second" },
                    step * config.batch_size as u64 + i as u64,
                );
                let prompt = instantiate(template, instance, bound, backend, mode, aux_seed)?;
                let rows = backend.forward(&prompt.ids, &prompt.mask_indices)?;
                let (ce, mut d_rows) = prompt_ce(&rows, &prompt.gold_ids);
                l_ter += 0.5 * ce / b as f64;
                let scale = config.weights.alpha * 0.5 / b as f64;
                let grads: Vec<OutputGrad> = prompt
                    .mask_indices
                    .iter()
                    .zip(d_rows.drain(..))
                    .map(|(&position, mut d_logits)| {
                        d_logits.iter_mut().for_each(|x| *x *= scale);
                        OutputGrad { position, d_logits, d_hidden: vec![] }
                    })
                    .collect();
                backend.accumulate_output_grads(&prompt.ids, &grads)?;
            }
        }
    }

    Ok(BatchLossReport::compose(&tre, l_ter, l_con, &config.weights, distributions))
}

/// Fine-tune `backend` on `train_corpus` with the configured objectives,
/// evaluating on `dev_corpus` after every epoch. Returns the best-dev
/// checkpoint (ties keep the earlier epoch) and the full loss history.
/// A non-finite total loss stops training before that step is applied or
/// logged; the outcome then reports the divergence step.
pub fn train(
    train_corpus: &Corpus,
    dev_corpus: &Corpus,
    template: &Template,
    backend: &mut dyn MaskedLmBackend,
    bound: &BoundVerbalizer,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_corpus.is_empty() {
        return Err(Error::EmptyCorpus { context: "training corpus".into() });
    }
    if dev_corpus.is_empty() {
        return Err(Error::EmptyCorpus { context: "dev corpus".into() });
    }

    let batches_per_epoch = train_corpus.len().div_ceil(config.batch_size) as u64;
    let total_steps = config.epochs as u64 * batches_per_epoch;
    let config_hash = config.config_hash();

    let mut optimizer = AdamW::new(backend.params().len(), config.weight_decay);
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, Checkpoint)> = None;
    let mut diverged_at = None;
    let mut step: u64 = 0;

    'epochs: for epoch in 0..config.epochs {
        let epoch_seed = derive_seed_indexed(config.seed, "epoch", epoch as u64);
        for batch in batches(train_corpus, config.batch_size, epoch_seed, true)? {
            let report =
                batch_losses_and_grads(backend, &batch.instances, template, bound, config, step)?;
            if report.prob_floor_hit {
                history.prob_floor_hits += 1;
            }
            if !report.l_total.is_finite() {
                diverged_at = Some(step);
                backend.zero_grads();
                break 'epochs;
            }

            let grads = backend.grads().to_vec();
            let lr = linear_lr(config.learning_rate, step, total_steps);
            optimizer.step(backend.params_mut(), &grads, lr);
            backend.zero_grads();

            history.steps.push(StepRecord {
                step,
                l_tre: report.l_tre,
                l_ter: report.l_ter,
                l_con: report.l_con,
                l_total: report.l_total,
            });
            step += 1;
        }

        let dev_metrics =
            evaluate(&*backend, dev_corpus, template, bound, MetricsMode::StrictMicro)?;
        let dev_f1 = dev_metrics.f1;
        history.epoch_dev_f1.push(dev_f1);
        if best.as_ref().map_or(true, |(f, _)| dev_f1 > *f) {
            let params = backend.snapshot();
            best = Some((
                dev_f1,
                Checkpoint {
                    snapshot_id: snapshot_id(&params),
                    params,
                    epoch,
                    dev_metrics,
                    config_hash: config_hash.clone(),
                },
            ));
        }
    }

    let checkpoint = match best {
        Some((_, c)) => c,
        // Divergence before the first epoch completed: snapshot the current
        // parameters so the outcome is still self-describing.
        None => {
            let dev_metrics =
                evaluate(&*backend, dev_corpus, template, bound, MetricsMode::StrictMicro)?;
            let params = backend.snapshot();
            Checkpoint {
                snapshot_id: snapshot_id(&params),
                params,
                epoch: 0,
                dev_metrics,
                config_hash,
            }
        }
    };

    Ok(TrainOutcome { checkpoint, history, diverged_at })
}
