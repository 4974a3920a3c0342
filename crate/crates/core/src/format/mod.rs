//! Question text, short answers, multiple-choice options and the output
//! record.

mod choice;
mod templates;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::graph::SceneGraph;
use crate::lexicon::{Pools, Synonyms, Taxonomy};
use crate::qgen::{AnswerStyle, Draft, GenParams};
use crate::seed::{qa_seed, sha256_hex, substream};

pub use choice::{to_multiple_choice, MultipleChoice};
pub use templates::{fill, slot_names, template_slots, TemplateLibrary, TemplateSet};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("template file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("template file: {0}")]
    Io(#[from] std::io::Error),
    #[error("template file names unknown generator {0:?}")]
    UnknownGenerator(String),
    #[error("no templates for {0}")]
    MissingGenerator(String),
    #[error("template for {generator} uses slot {{{slot}}} it cannot fill: {template:?}")]
    UnknownSlot {
        generator: String,
        slot: String,
        template: String,
    },
    #[error("unbalanced braces in template {0:?}")]
    Malformed(String),
    #[error("answer clause {key:?} for {generator} is missing or lacks {{value}}/{{image}}")]
    BadClause { generator: String, key: String },
    #[error("slot {0:?} has no value")]
    MissingSlot(String),
    #[error("{generator}: only {found} distinct distractors available")]
    DistractorExhaustion { generator: String, found: usize },
}

/// Which form a record presents as its primary rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Short,
    Mc,
}

/// Everything needed to reproduce a record's rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatParams {
    pub seed: u64,
    pub sample_index: u64,
    pub position_margin: f64,
    pub depth_margin: f64,
    pub answer_style: AnswerStyle,
    pub format: Format,
    pub answer_type: String,
}

/// One generated question in both short-answer and multiple-choice form.
/// When distractors run out the record keeps only the short form:
/// `mc_options` is empty and `mc_answer_index` is null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaPair {
    pub qa_id: String,
    pub image_ids: Vec<String>,
    pub generator: String,
    pub question: String,
    pub short_answer: String,
    pub mc_options: Vec<String>,
    pub mc_answer_index: Option<usize>,
    pub format_params: FormatParams,
}

impl QaPair {
    pub fn has_mc(&self) -> bool {
        self.mc_answer_index.is_some()
    }

    /// Exactly one option equals the short answer and options are distinct.
    pub fn mc_is_sound(&self) -> bool {
        let Some(idx) = self.mc_answer_index else {
            return self.mc_options.is_empty();
        };
        let mut seen = std::collections::HashSet::new();
        self.mc_options.len() == 4
            && self.mc_options.iter().all(|o| seen.insert(o))
            && self.mc_options.get(idx) == Some(&self.short_answer)
            && self.mc_options.iter().filter(|o| **o == self.short_answer).count() == 1
    }
}

/// Word lists used when inventing distractors.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub taxonomy: Option<Arc<Taxonomy>>,
    pub synonyms: Synonyms,
    pub pools: Pools,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon {
            taxonomy: Some(Arc::new(Taxonomy::builtin())),
            synonyms: Synonyms::builtin(),
            pools: Pools::builtin(),
        }
    }
}

/// Deterministic record id.
pub fn qa_id(corpus_seed: u64, image_ids: &[&str], generator: &str, sample_index: u64) -> String {
    let key = format!(
        "{corpus_seed}\u{1f}{}\u{1f}{generator}\u{1f}{sample_index}",
        image_ids.join("\u{1e}")
    );
    sha256_hex(key.as_bytes())[..16].to_string()
}

/// Inputs for turning one draft into a record.
#[derive(Debug, Clone, Copy)]
pub struct Assembly<'a> {
    pub corpus_seed: u64,
    pub sample_index: u64,
    pub graphs: &'a [&'a SceneGraph],
    pub params: &'a GenParams,
    pub style: AnswerStyle,
    pub format: Format,
}

/// Renders question, short answer and options for a draft. The question and
/// option order come from sub-streams of the record's seed, so they do not
/// depend on how the draft itself was sampled.
pub fn assemble(
    library: &TemplateLibrary,
    lexicon: &Lexicon,
    draft: &Draft,
    a: Assembly<'_>,
) -> Result<QaPair, FormatError> {
    let ids: Vec<&str> = a.graphs.iter().map(|g| g.image.id.as_str()).collect();
    let name = draft.generator.name();
    let seed = qa_seed(a.corpus_seed, &ids, name, a.sample_index);
    let mut slots = draft.probe.slots();
    if draft.generator.is_multi() {
        slots.insert("image_count", a.graphs.len().to_string());
    }
    let question = library.render_question(draft.generator, &slots, &mut substream(seed, "question"))?;
    let short_answer = library.render_answer(draft.generator, &draft.answer, a.style);
    let (mc_options, mc_answer_index) =
        match to_multiple_choice(draft, a.graphs, lexicon, &mut substream(seed, "mc")) {
            Ok(mc) => (
                mc.options
                    .iter()
                    .map(|o| library.render_answer(draft.generator, o, a.style))
                    .collect(),
                Some(mc.answer_index),
            ),
            Err(e @ FormatError::DistractorExhaustion { .. }) => {
                log::warn!("{e}; keeping the short-answer form only");
                (Vec::new(), None)
            }
            Err(e) => return Err(e),
        };
    Ok(QaPair {
        qa_id: qa_id(a.corpus_seed, &ids, name, a.sample_index),
        image_ids: ids.iter().map(|s| s.to_string()).collect(),
        generator: name.to_string(),
        question,
        short_answer,
        mc_options,
        mc_answer_index,
        format_params: FormatParams {
            seed,
            sample_index: a.sample_index,
            position_margin: a.params.position_margin,
            depth_margin: a.params.depth_margin,
            answer_style: a.style,
            format: a.format,
            answer_type: draft.answer.type_name().to_string(),
        },
    })
}
