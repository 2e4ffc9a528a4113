//! Cloze template scaffolds, rendering, and prompt instantiation.
//!
//! A scaffold is one of the 12 orderings of (sentence, trigger1, trigger2,
//! label) that keep trigger1 before trigger2, interleaved with five filler
//! slots: `<X> slot1 <Y> slot2 <Z> slot3 <M> slot4 <N>`. A template fixes the
//! filler texts; instantiating it against an event pair produces a masked
//! prompt in one of four modes.

mod generate;
mod instantiate;

pub use generate::{generate_candidates, score_templates, select_topk, select_topk_indices};
pub use instantiate::{
    instantiate, render, MaskMode, PromptInstance, Provenance, RenderedToken, TRIGGER_QUOTE,
};

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four content slots of a scaffold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentSlot {
    Sent,
    T1,
    T2,
    Label,
}

use ContentSlot::{Label, Sent, T1, T2};

/// The 12 slot orders, in the order the pool file numbers them (1-based).
const SLOT_ORDERS: [[ContentSlot; 4]; 12] = [
    [Sent, Label, T1, T2],
    [Label, Sent, T1, T2],
    [Sent, T1, Label, T2],
    [Label, T1, Sent, T2],
    [T1, Sent, Label, T2],
    [T1, Label, Sent, T2],
    [T1, T2, Label, Sent],
    [T1, T2, Sent, Label],
    [T1, Sent, T2, Label],
    [T1, Label, T2, Sent],
    [Sent, T1, T2, Label],
    [Label, T1, T2, Sent],
];

/// One ordering of the four content slots, with trigger1 before trigger2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateScaffold {
    pub permutation_id: u8,
    pub slot_order: [ContentSlot; 4],
}

/// All 12 scaffolds.
pub fn enumerate_scaffolds() -> Vec<TemplateScaffold> {
    SLOT_ORDERS
        .iter()
        .enumerate()
        .map(|(i, &slot_order)| TemplateScaffold {
            permutation_id: (i + 1) as u8,
            slot_order,
        })
        .collect()
}

/// Scaffold for a 1-based permutation id, e.g. from a pool file.
pub fn scaffold_by_id(permutation_id: u8) -> Result<TemplateScaffold> {
    if permutation_id == 0 || permutation_id as usize > SLOT_ORDERS.len() {
        return Err(Error::Template {
            message: format!("permutation_id {permutation_id} outside 1..=12"),
        });
    }
    Ok(TemplateScaffold {
        permutation_id,
        slot_order: SLOT_ORDERS[permutation_id as usize - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateSource {
    Generated,
    Manual,
}

/// A scaffold with concrete filler texts and its pipeline scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub scaffold: TemplateScaffold,
    pub fillers: [String; 5],
    pub source: TemplateSource,
    /// Sum over the generation corpus of fill log-probabilities; 0 for
    /// manual templates, which skip generation.
    pub joint_score: f64,
    pub dev_f1: Option<f64>,
    pub selected: bool,
}

impl Template {
    pub fn new(scaffold: TemplateScaffold, fillers: [String; 5], source: TemplateSource) -> Self {
        Template {
            scaffold,
            fillers: normalize_fillers(&fillers),
            source,
            joint_score: 0.0,
            dev_f1: None,
            selected: false,
        }
    }
}

pub(crate) fn normalize_fillers(fillers: &[String; 5]) -> [String; 5] {
    std::array::from_fn(|i| fillers[i].split_whitespace().collect::<Vec<_>>().join(" "))
}

#[derive(Serialize, Deserialize)]
struct PoolRecord {
    permutation_id: u8,
    fillers: Vec<String>,
    source: TemplateSource,
    joint_score: f64,
    dev_f1: Option<f64>,
    #[serde(default)]
    selected: bool,
}

/// Write a template pool as JSONL, one record per template, in pool order.
pub fn save_pool(pool: &[Template], path: &Path) -> Result<()> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|e| Error::io(&display, e))?;
    let mut w = BufWriter::new(file);
    for t in pool {
        let record = PoolRecord {
            permutation_id: t.scaffold.permutation_id,
            fillers: t.fillers.to_vec(),
            source: t.source,
            joint_score: t.joint_score,
            dev_f1: t.dev_f1,
            selected: t.selected,
        };
        let line = serde_json::to_string(&record).expect("record serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(&display, e))?;
    }
    w.flush().map_err(|e| Error::io(&display, e))
}

pub fn load_pool(path: &Path) -> Result<Vec<Template>> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(&display, e))?;
    let reader = BufReader::new(file);
    let mut pool = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&display, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PoolRecord = serde_json::from_str(&line).map_err(|e| Error::CorpusParse {
            path: display.clone(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        let fillers: [String; 5] = record.fillers.try_into().map_err(|v: Vec<String>| {
            Error::CorpusParse {
                path: display.clone(),
                line: lineno + 1,
                message: format!("expected 5 fillers, got {}", v.len()),
            }
        })?;
        pool.push(Template {
            scaffold: scaffold_by_id(record.permutation_id)?,
            fillers: normalize_fillers(&fillers),
            source: record.source,
            joint_score: record.joint_score,
            dev_f1: record.dev_f1,
            selected: record.selected,
        });
    }
    Ok(pool)
}

/// Parse a hand-written template such as
/// `"{sent} The temporal relation between {e1} and {e2} is {mask} ."`.
///
/// Each placeholder must appear exactly once and `{e1}` before `{e2}`; the
/// text between placeholders becomes the fillers. Triggers are quoted by the
/// renderer, so the text should not quote `{e1}`/`{e2}` itself.
pub fn parse_manual_template(text: &str) -> Result<Template> {
    const PLACEHOLDERS: [(&str, ContentSlot); 4] = [
        ("{sent}", Sent),
        ("{e1}", T1),
        ("{e2}", T2),
        ("{mask}", Label),
    ];
    let mut found: Vec<(usize, usize, ContentSlot)> = Vec::new();
    for (pat, slot) in PLACEHOLDERS {
        let mut hits = text.match_indices(pat);
        let (at, _) = hits.next().ok_or_else(|| Error::Template {
            message: format!("manual template is missing {pat}"),
        })?;
        if hits.next().is_some() {
            return Err(Error::Template {
                message: format!("manual template repeats {pat}"),
            });
        }
        found.push((at, pat.len(), slot));
    }
    found.sort_by_key(|&(at, _, _)| at);
    let slot_order: [ContentSlot; 4] = std::array::from_fn(|i| found[i].2);
    let t1_at = slot_order.iter().position(|&s| s == T1).unwrap();
    let t2_at = slot_order.iter().position(|&s| s == T2).unwrap();
    if t1_at > t2_at {
        return Err(Error::Template {
            message: "manual template puts {e2} before {e1}".into(),
        });
    }
    let scaffold = enumerate_scaffolds()
        .into_iter()
        .find(|s| s.slot_order == slot_order)
        .expect("any order with e1 before e2 is one of the 12");
    let mut fillers: [String; 5] = Default::default();
    let mut cursor = 0;
    for (i, &(at, len, _)) in found.iter().enumerate() {
        fillers[i] = text[cursor..at].to_string();
        cursor = at + len;
    }
    fillers[4] = text[cursor..].to_string();
    Ok(Template::new(scaffold, fillers, TemplateSource::Manual))
}
