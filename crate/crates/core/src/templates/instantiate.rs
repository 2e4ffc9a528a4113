//! Template rendering and masked-prompt construction.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::backend::{MaskedLmBackend, TokenId, BLANK_SENTINELS};
use crate::corpus::EventPairInstance;
use crate::error::{Error, Result};
use crate::seeding;
use crate::verbalizer::{BoundVerbalizer, RelationSchema};

use super::{ContentSlot, Template, TemplateScaffold};

/// Quotation token wrapped around rendered triggers so the model can locate
/// them regardless of scaffold position.
pub const TRIGGER_QUOTE: &str = "'";

/// What produced each rendered token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Word from filler slot 0..5.
    Filler { blank: usize },
    /// Sentence token at its original offset; `in_trigger` names the trigger
    /// span it falls inside, if any.
    Sent { offset: usize, in_trigger: Option<u8> },
    /// Quote around trigger slot 1 or 2.
    Quote { which: u8 },
    /// Trigger slot copy of trigger `which`, word `k` of the span.
    Trigger { which: u8, k: usize },
    /// The label slot.
    Label,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedToken {
    pub text: String,
    pub prov: Provenance,
}

/// Prompt masking modes: relation classification, the two trigger-reasoning
/// prompts, and the random-mask ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    RelCls,
    TerE1,
    TerE2,
    Rand,
}

/// A fully encoded masked prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptInstance {
    pub instance_id: String,
    pub ids: Vec<TokenId>,
    pub mask_indices: Vec<usize>,
    /// Gold token per mask index.
    pub gold_ids: Vec<TokenId>,
    pub mode: MaskMode,
}

/// Render a template against an instance: fillers split into words, the
/// sentence inlined, triggers quoted in their slots, and the gold verbalizer
/// word in the label slot.
pub fn render(
    template: &Template,
    instance: &EventPairInstance,
    schema: &RelationSchema,
) -> Result<Vec<RenderedToken>> {
    let label_idx = schema.label_index(&instance.label).ok_or_else(|| Error::SchemaMismatch {
        label: instance.label.clone(),
        schema_id: schema.schema_id.clone(),
        context: format!("rendering instance {}", instance.instance_id),
    })?;
    let mut out = Vec::new();
    let push_filler = |out: &mut Vec<RenderedToken>, blank: usize| {
        for word in template.fillers[blank].split_whitespace() {
            out.push(RenderedToken {
                text: word.to_string(),
                prov: Provenance::Filler { blank },
            });
        }
    };
    let push_trigger = |out: &mut Vec<RenderedToken>, which: u8| {
        let (s, e) = if which == 1 { instance.trigger1_span } else { instance.trigger2_span };
        out.push(RenderedToken {
            text: TRIGGER_QUOTE.to_string(),
            prov: Provenance::Quote { which },
        });
        for (k, tok) in instance.tokens[s..e].iter().enumerate() {
            out.push(RenderedToken {
                text: tok.clone(),
                prov: Provenance::Trigger { which, k },
            });
        }
        out.push(RenderedToken {
            text: TRIGGER_QUOTE.to_string(),
            prov: Provenance::Quote { which },
        });
    };
    for (slot_idx, &slot) in template.scaffold.slot_order.iter().enumerate() {
        push_filler(&mut out, slot_idx);
        match slot {
            ContentSlot::Sent => {
                for (offset, tok) in instance.tokens.iter().enumerate() {
                    let in_trigger = if offset >= instance.trigger1_span.0
                        && offset < instance.trigger1_span.1
                    {
                        Some(1)
                    } else if offset >= instance.trigger2_span.0 && offset < instance.trigger2_span.1
                    {
                        Some(2)
                    } else {
                        None
                    };
                    out.push(RenderedToken {
                        text: tok.clone(),
                        prov: Provenance::Sent { offset, in_trigger },
                    });
                }
            }
            ContentSlot::T1 => push_trigger(&mut out, 1),
            ContentSlot::T2 => push_trigger(&mut out, 2),
            ContentSlot::Label => out.push(RenderedToken {
                text: schema.word(label_idx).to_string(),
                prov: Provenance::Label,
            }),
        }
    }
    push_filler(&mut out, 4);
    Ok(out)
}

/// Render a scaffold as an infiller query: blank sentinels in the filler
/// slots, content slots filled as in `render`.
pub(crate) fn build_infill_query(
    scaffold: &TemplateScaffold,
    instance: &EventPairInstance,
    schema: &RelationSchema,
) -> Result<Vec<String>> {
    let empty = Template::new(
        *scaffold,
        Default::default(),
        super::TemplateSource::Generated,
    );
    let rendered = render(&empty, instance, schema)?;
    let mut iter = rendered.into_iter().peekable();
    let mut out = vec![BLANK_SENTINELS[0].to_string()];
    for (slot_idx, &slot) in scaffold.slot_order.iter().enumerate() {
        while let Some(tok) = iter.peek() {
            let belongs = match (slot, tok.prov) {
                (ContentSlot::Sent, Provenance::Sent { .. }) => true,
                (
                    ContentSlot::T1,
                    Provenance::Quote { which: 1 } | Provenance::Trigger { which: 1, .. },
                ) => true,
                (
                    ContentSlot::T2,
                    Provenance::Quote { which: 2 } | Provenance::Trigger { which: 2, .. },
                ) => true,
                (ContentSlot::Label, Provenance::Label) => true,
                _ => false,
            };
            if !belongs {
                break;
            }
            out.push(iter.next().unwrap().text);
        }
        out.push(BLANK_SENTINELS[slot_idx + 1].to_string());
    }
    debug_assert!(iter.next().is_none(), "all rendered tokens consumed");
    Ok(out)
}

/// Instantiate a template into a masked prompt.
///
/// REL_CLS masks the label slot and the gold answer is the verbalizer word.
/// TER_E1/TER_E2 mask the named trigger's slot copy word-by-word, keep the
/// gold label word in the label slot, and the gold answers are the trigger
/// words. RAND keeps the label word and masks one random filler or
/// non-trigger sentence token under `seed`.
pub fn instantiate(
    template: &Template,
    instance: &EventPairInstance,
    bound: &BoundVerbalizer,
    backend: &dyn MaskedLmBackend,
    mode: MaskMode,
    seed: u64,
) -> Result<PromptInstance> {
    let rendered = render(template, instance, &bound.schema)?;
    if rendered.len() > backend.max_len() {
        return Err(Error::PromptTooLong {
            instance_id: instance.instance_id.clone(),
            len: rendered.len(),
            max: backend.max_len(),
        });
    }
    let label_idx = bound
        .schema
        .label_index(&instance.label)
        .expect("render already checked the label");
    let mut ids: Vec<TokenId> = rendered.iter().map(|t| backend.encode_word(&t.text)).collect();
    let require_known = |position: usize| -> Result<TokenId> {
        let id = ids[position];
        if id == backend.unk_token_id() {
            return Err(Error::Validation {
                instance_id: instance.instance_id.clone(),
                message: format!(
                    "gold word {:?} is not in the backend vocabulary",
                    rendered[position].text
                ),
            });
        }
        Ok(id)
    };
    let mask_trigger = |which: u8| -> Vec<usize> {
        rendered
            .iter()
            .enumerate()
            .filter(|(_, t)| matches!(t.prov, Provenance::Trigger { which: w, .. } if w == which))
            .map(|(i, _)| i)
            .collect()
    };
    let label_pos = rendered
        .iter()
        .position(|t| t.prov == Provenance::Label)
        .expect("every scaffold has a label slot");
    let (mask_indices, gold_ids) = match mode {
        MaskMode::RelCls => (vec![label_pos], vec![bound.token_id(label_idx)]),
        MaskMode::TerE1 | MaskMode::TerE2 => {
            let which = if mode == MaskMode::TerE1 { 1 } else { 2 };
            let positions = mask_trigger(which);
            let gold = positions
                .iter()
                .map(|&p| require_known(p))
                .collect::<Result<Vec<_>>>()?;
            (positions, gold)
        }
        MaskMode::Rand => {
            let eligible: Vec<usize> = rendered
                .iter()
                .enumerate()
                .filter(|(i, t)| {
                    let ok = matches!(
                        t.prov,
                        Provenance::Filler { .. } | Provenance::Sent { in_trigger: None, .. }
                    );
                    ok && ids[*i] != backend.unk_token_id()
                })
                .map(|(i, _)| i)
                .collect();
            let mut rng = seeding::rng_from(seeding::derive_seed(seed, "rand-mask"));
            let &pos = eligible.choose(&mut rng).ok_or_else(|| Error::Template {
                message: format!(
                    "no eligible token to mask in instance {}",
                    instance.instance_id
                ),
            })?;
            (vec![pos], vec![ids[pos]])
        }
    };
    for &p in &mask_indices {
        ids[p] = backend.mask_token_id();
    }
    Ok(PromptInstance {
        instance_id: instance.instance_id.clone(),
        ids,
        mask_indices,
        gold_ids,
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MockMlm;
    use crate::templates::{parse_manual_template, TemplateSource};
    use crate::verbalizer::{bind_to_backend, builtin_schema};
    use std::collections::BTreeSet;

    fn instance() -> EventPairInstance {
        EventPairInstance {
            instance_id: "i0".into(),
            doc_id: "d0".into(),
            tokens: vec![
                "the".into(),
                "selection".into(),
                "preceded".into(),
                "the".into(),
                "creation".into(),
            ],
            trigger1_span: (1, 2),
            trigger2_span: (4, 5),
            label: "BEFORE".into(),
        }
    }

    fn backend_for(instance: &EventPairInstance) -> MockMlm {
        let schema = builtin_schema("matres").unwrap();
        let mut words: BTreeSet<String> = instance.tokens.iter().cloned().collect();
        words.extend(schema.words().iter().cloned());
        words.insert(TRIGGER_QUOTE.into());
        for w in ["Event", "happened", "to", "."] {
            words.insert(w.into());
        }
        MockMlm::new(17, &words)
    }

    fn prompt5() -> Template {
        parse_manual_template("{sent} Event {e1} happened {mask} to {e2} .").unwrap()
    }

    fn texts(rendered: &[RenderedToken]) -> Vec<&str> {
        rendered.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn render_prompt5_shape() {
        let schema = builtin_schema("matres").unwrap();
        let rendered = render(&prompt5(), &instance(), &schema).unwrap();
        assert_eq!(
            texts(&rendered),
            vec![
                "the", "selection", "preceded", "the", "creation", "Event", "'", "selection",
                "'", "happened", "before", "to", "'", "creation", "'", "."
            ]
        );
    }

    #[test]
    fn rel_cls_masks_exactly_the_label_slot() {
        let inst = instance();
        let backend = backend_for(&inst);
        let schema = builtin_schema("matres").unwrap();
        let bound = bind_to_backend(&schema, &backend).unwrap();
        let p = instantiate(&prompt5(), &inst, &bound, &backend, MaskMode::RelCls, 0).unwrap();
        assert_eq!(p.mask_indices.len(), 1);
        assert_eq!(p.ids[p.mask_indices[0]], backend.mask_token_id());
        assert_eq!(p.gold_ids, vec![bound.token_id(0)]);
        assert_eq!(
            p.ids.iter().filter(|&&id| id == backend.mask_token_id()).count(),
            1
        );
        // Triggers appear in order around the mask.
        let sel = backend.encode_word("selection");
        let cre = backend.encode_word("creation");
        let first_sel = p.ids.iter().position(|&i| i == sel).unwrap();
        let last_cre = p.ids.iter().rposition(|&i| i == cre).unwrap();
        assert!(first_sel < last_cre);
    }

    #[test]
    fn ter_modes_mask_the_slot_copy_and_keep_the_label_word() {
        let inst = instance();
        let backend = backend_for(&inst);
        let schema = builtin_schema("matres").unwrap();
        let bound = bind_to_backend(&schema, &backend).unwrap();
        let rel = instantiate(&prompt5(), &inst, &bound, &backend, MaskMode::RelCls, 0).unwrap();
        let e1 = instantiate(&prompt5(), &inst, &bound, &backend, MaskMode::TerE1, 0).unwrap();
        assert_eq!(e1.gold_ids, vec![backend.encode_word("selection")]);
        assert_eq!(e1.mask_indices.len(), 1);
        // The label word is present, not masked.
        assert!(e1.ids.contains(&backend.encode_word("before")));
        // Diff against REL_CLS is confined to the trigger slot and label slot.
        let diffs: Vec<usize> = rel
            .ids
            .iter()
            .zip(&e1.ids)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| i)
            .collect();
        let mut allowed = e1.mask_indices.clone();
        allowed.extend(rel.mask_indices.clone());
        for d in diffs {
            assert!(allowed.contains(&d), "unexpected diff at {d}");
        }
        // The in-sentence trigger copy survives masking.
        assert!(e1.ids.contains(&backend.encode_word("selection")));

        let e2 = instantiate(&prompt5(), &inst, &bound, &backend, MaskMode::TerE2, 0).unwrap();
        assert_eq!(e2.gold_ids, vec![backend.encode_word("creation")]);
    }

    #[test]
    fn multi_word_trigger_gets_one_mask_per_word() {
        let mut inst = instance();
        inst.tokens = vec![
            "the".into(),
            "shut".into(),
            "down".into(),
            "preceded".into(),
            "creation".into(),
        ];
        inst.trigger1_span = (1, 3);
        inst.trigger2_span = (4, 5);
        let mut words: BTreeSet<String> = inst.tokens.iter().cloned().collect();
        let schema = builtin_schema("matres").unwrap();
        words.extend(schema.words().iter().cloned());
        words.insert(TRIGGER_QUOTE.into());
        for w in ["Event", "happened", "to", "."] {
            words.insert(w.into());
        }
        let backend = MockMlm::new(17, &words);
        let bound = bind_to_backend(&schema, &backend).unwrap();
        let e1 = instantiate(&prompt5(), &inst, &bound, &backend, MaskMode::TerE1, 0).unwrap();
        assert_eq!(e1.mask_indices.len(), 2);
        assert_eq!(
            e1.gold_ids,
            vec![backend.encode_word("shut"), backend.encode_word("down")]
        );
        assert_eq!(e1.mask_indices[0] + 1, e1.mask_indices[1]);
    }

    #[test]
    fn rand_mode_is_seed_deterministic_and_avoids_triggers_and_label() {
        let inst = instance();
        let backend = backend_for(&inst);
        let schema = builtin_schema("matres").unwrap();
        let bound = bind_to_backend(&schema, &backend).unwrap();
        let rendered = render(&prompt5(), &inst, &schema).unwrap();
        let a = instantiate(&prompt5(), &inst, &bound, &backend, MaskMode::Rand, 42).unwrap();
        let b = instantiate(&prompt5(), &inst, &bound, &backend, MaskMode::Rand, 42).unwrap();
        assert_eq!(a, b);
        for seed in 0..200 {
            let p = instantiate(&prompt5(), &inst, &bound, &backend, MaskMode::Rand, seed).unwrap();
            assert_eq!(p.mask_indices.len(), 1);
            let prov = rendered[p.mask_indices[0]].prov;
            assert!(
                matches!(
                    prov,
                    Provenance::Filler { .. } | Provenance::Sent { in_trigger: None, .. }
                ),
                "seed {seed} masked {prov:?}"
            );
        }
    }

    #[test]
    fn too_long_render_is_rejected_by_name() {
        let inst = instance();
        let schema = builtin_schema("matres").unwrap();
        let mut words: BTreeSet<String> = inst.tokens.iter().cloned().collect();
        words.extend(schema.words().iter().cloned());
        words.insert(TRIGGER_QUOTE.into());
        let backend = MockMlm::with_dims(1, &words, 4, 32, 8);
        let bound = bind_to_backend(&schema, &backend).unwrap();
        let template = Template::new(
            crate::templates::scaffold_by_id(11).unwrap(),
            Default::default(),
            TemplateSource::Generated,
        );
        let err = instantiate(&template, &inst, &bound, &backend, MaskMode::RelCls, 0).unwrap_err();
        match err {
            Error::PromptTooLong { instance_id, .. } => assert_eq!(instance_id, "i0"),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn infill_query_places_sentinels_around_content() {
        let inst = instance();
        let schema = builtin_schema("matres").unwrap();
        let scaffold = crate::templates::scaffold_by_id(3).unwrap();
        let q = build_infill_query(&scaffold, &inst, &schema).unwrap();
        assert_eq!(
            q,
            vec![
                "<X>", "the", "selection", "preceded", "the", "creation", "<Y>", "'", "selection",
                "'", "<Z>", "before", "<M>", "'", "creation", "'", "<N>"
            ]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>()
        );
    }
}
