//! Candidate template generation, few-shot scoring, and top-K selection.

use std::collections::BTreeSet;

use crate::backend::{MaskedLmBackend, SpanInfiller};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::trainer::{train, AuxMode, TrainConfig};
use crate::verbalizer::{BoundVerbalizer, RelationSchema};

use super::instantiate::build_infill_query;
use super::{normalize_fillers, Template, TemplateScaffold, TemplateSource};

fn tag_infiller_error(e: Error, permutation_id: u8) -> Error {
    match e {
        Error::Backend { message } => Error::Infiller { permutation_id, message },
        other => other,
    }
}

/// Decode up to `beam_width` filler tuples per scaffold, ranked by the sum
/// over `small_train` of fill log-probability. Queries substitute the gold
/// label's verbalizer word for the label slot; candidates are deduplicated on
/// their rendered form before ranking.
pub fn generate_candidates(
    scaffolds: &[TemplateScaffold],
    small_train: &Corpus,
    schema: &RelationSchema,
    infiller: &dyn SpanInfiller,
    beam_width: usize,
    max_fill_tokens: usize,
) -> Result<Vec<Template>> {
    if small_train.is_empty() {
        return Err(Error::EmptyCorpus {
            context: "generate_candidates".into(),
        });
    }
    if beam_width == 0 {
        return Err(Error::Config {
            message: "beam width must be at least 1".into(),
        });
    }
    let mut pool = Vec::new();
    for scaffold in scaffolds {
        let queries: Vec<Vec<String>> = small_train
            .instances()
            .iter()
            .map(|inst| build_infill_query(scaffold, inst, schema))
            .collect::<Result<Vec<_>>>()?;
        let mut tuples: BTreeSet<[String; 5]> = BTreeSet::new();
        for q in &queries {
            let candidates = infiller
                .infill(q, beam_width, max_fill_tokens)
                .map_err(|e| tag_infiller_error(e, scaffold.permutation_id))?;
            for cand in candidates {
                tuples.insert(normalize_fillers(&cand.fills));
            }
        }
        let mut scored: Vec<([String; 5], f64)> = Vec::with_capacity(tuples.len());
        for fills in tuples {
            let mut joint = 0.0;
            for q in &queries {
                joint += infiller
                    .score(q, &fills)
                    .map_err(|e| tag_infiller_error(e, scaffold.permutation_id))?;
            }
            scored.push((fills, joint));
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(beam_width);
        for (fills, joint) in scored {
            let mut t = Template::new(*scaffold, fills, TemplateSource::Generated);
            t.joint_score = joint;
            pool.push(t);
        }
    }
    Ok(pool)
}

/// Score each template by fine-tuning the backend on `small_train` with the
/// classification loss only and reading the final-epoch dev micro-F1.
/// Parameters are reset between templates, so scores are order-independent.
pub fn score_templates(
    pool: &[Template],
    small_train: &Corpus,
    small_dev: &Corpus,
    backend: &mut dyn MaskedLmBackend,
    bound: &BoundVerbalizer,
    scoring_config: &TrainConfig,
) -> Result<Vec<Template>> {
    let mut config = scoring_config.clone();
    config.aux_mode = AuxMode::Off;
    config.con_enabled = false;
    let mut out = Vec::with_capacity(pool.len());
    for template in pool {
        backend.reset_parameters();
        let outcome = train(small_train, small_dev, template, backend, bound, &config)?;
        let mut t = template.clone();
        t.dev_f1 = Some(outcome.history.epoch_dev_f1.last().copied().unwrap_or(0.0));
        out.push(t);
    }
    backend.reset_parameters();
    Ok(out)
}

/// Indices of the top `min(k, len)` templates: descending dev F1, ties broken
/// by descending joint score, then pool order.
pub fn select_topk_indices(pool: &[Template], k: usize) -> Result<Vec<usize>> {
    for t in pool {
        if t.dev_f1.is_none() {
            return Err(Error::UnscoredTemplate {
                permutation_id: t.scaffold.permutation_id,
            });
        }
    }
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    idx.sort_by(|&a, &b| {
        pool[b]
            .dev_f1
            .unwrap()
            .total_cmp(&pool[a].dev_f1.unwrap())
            .then(pool[b].joint_score.total_cmp(&pool[a].joint_score))
            .then(a.cmp(&b))
    });
    idx.truncate(k.min(pool.len()));
    Ok(idx)
}

/// The top `min(k, len)` templates, marked selected.
pub fn select_topk(pool: &[Template], k: usize) -> Result<Vec<Template>> {
    Ok(select_topk_indices(pool, k)?
        .into_iter()
        .map(|i| {
            let mut t = pool[i].clone();
            t.selected = true;
            t
        })
        .collect())
}
