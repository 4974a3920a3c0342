use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::Deserialize;

use super::FormatError;
use crate::qgen::{render_answer, render_comparison_with, Answer, AnswerStyle, Generator};

/// Templates for one generator.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct TemplateSet {
    pub questions: Vec<String>,
    #[serde(default)]
    pub answer_clauses: BTreeMap<String, String>,
}

/// Question and answer-clause templates for every registered generator.
#[derive(Debug, Clone)]
pub struct TemplateLibrary {
    sets: BTreeMap<Generator, TemplateSet>,
}

/// Slots a generator's probe fills.
pub fn slot_names(generator: Generator) -> &'static [&'static str] {
    use Generator::*;
    match generator {
        ExistsObject => &["label", "label_plural"],
        MostObject | LeastObject | LeftMostObject | RightMostObject | TopMostObject
        | BottomMostObject | CloserObject | FartherObject => &["labels_list"],
        ExistsAttribute => &["attribute", "label", "label_plural"],
        AttributeBBox => &["label", "bbox"],
        TypedAttributeBBox => &["label", "bbox", "type"],
        ExistsRelation => &["subject", "object"],
        RelationBBox => &["bbox_a", "bbox_b"],
        HeadRelation => &["labels_list", "relation", "predicate", "anchor"],
        SameObjectSeg | DiffObjectSeg => &["points_list", "point"],
        CloserPoint | FartherPoint => &["points_list"],
        CloserToAnchorObject | FartherToAnchorObject => &["labels_list", "anchor"],
        SceneGraphObjectQA => &["expression"],
        SceneGraphAttributeQA => &["expression", "type"],
        SceneGraphRelationQA => &["expression_a", "expression_b"],
        HasObjectMulti | HasNotObjectMulti | HasMostObjectMulti | HasLeastObjectMulti
        | CommonAttributeMulti | CompareAttributeMulti | CountObjectMulti => {
            &["label", "label_plural", "image_count"]
        }
        HasAttributedObjectMulti | HasNotAttributedObjectMulti | CountAttributeObjectMulti => {
            &["attribute", "label", "label_plural", "image_count"]
        }
        HasRelationMulti | HasNotRelationMulti => &[
            "subject",
            "predicate",
            "relation",
            "negated_relation",
            "object",
            "image_count",
        ],
        CommonObjectMulti => &["image_count"],
        CompareRelationMulti => &["subject", "object", "image_count"],
    }
}

/// Slot names in a template, in order of appearance.
pub fn template_slots(template: &str) -> Result<Vec<&str>, FormatError> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find(['{', '}']) {
        if rest.as_bytes()[open] == b'}' {
            return Err(FormatError::Malformed(template.to_string()));
        }
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| FormatError::Malformed(template.to_string()))?;
        let name = &after[..close];
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_lowercase() || c == '_') {
            return Err(FormatError::Malformed(template.to_string()));
        }
        out.push(name);
        rest = &after[close + 1..];
    }
    Ok(out)
}

/// Substitutes `{slot}` markers.
pub fn fill(template: &str, slots: &BTreeMap<&str, String>) -> Result<String, FormatError> {
    let mut out = String::with_capacity(template.len() + 32);
    let mut rest = template;
    for name in template_slots(template)? {
        let marker = format!("{{{name}}}");
        let at = rest.find(&marker).expect("slot was just parsed");
        out.push_str(&rest[..at]);
        out.push_str(slots.get(name).ok_or_else(|| FormatError::MissingSlot(name.to_string()))?);
        rest = &rest[at + marker.len()..];
    }
    out.push_str(rest);
    Ok(out)
}

const CLAUSE_KEYS: [&str; 2] = ["first", "next"];

fn is_comparison(g: Generator) -> bool {
    matches!(g, Generator::CompareRelationMulti | Generator::CompareAttributeMulti)
}

impl TemplateLibrary {
    /// The bundled template file.
    pub fn builtin() -> Self {
        Self::from_json(include_str!("../../data/templates.json")).expect("bundled templates are valid")
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Parses and validates a template document. Every registered generator
    /// must have at least one question, every slot must be one the generator
    /// fills, and comparison generators need `first`/`next` clauses.
    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let raw: BTreeMap<String, TemplateSet> = serde_json::from_str(text)?;
        let mut sets = BTreeMap::new();
        for (name, set) in raw {
            let g = Generator::from_name(&name).ok_or_else(|| FormatError::UnknownGenerator(name.clone()))?;
            let allowed = slot_names(g);
            for q in &set.questions {
                for slot in template_slots(q)? {
                    if !allowed.contains(&slot) {
                        return Err(FormatError::UnknownSlot {
                            generator: name.clone(),
                            slot: slot.to_string(),
                            template: q.clone(),
                        });
                    }
                }
            }
            if is_comparison(g) {
                for key in CLAUSE_KEYS {
                    let ok = set
                        .answer_clauses
                        .get(key)
                        .is_some_and(|c| c.contains("{value}") && c.contains("{image}"));
                    if !ok {
                        return Err(FormatError::BadClause {
                            generator: name.clone(),
                            key: key.to_string(),
                        });
                    }
                }
            }
            sets.insert(g, set);
        }
        for &g in Generator::ALL {
            if sets.get(&g).is_none_or(|s| s.questions.is_empty()) {
                return Err(FormatError::MissingGenerator(g.name().to_string()));
            }
        }
        Ok(TemplateLibrary { sets })
    }

    pub fn questions(&self, generator: Generator) -> &[String] {
        &self.sets[&generator].questions
    }

    pub fn template_count(&self) -> usize {
        self.sets.values().map(|s| s.questions.len()).sum()
    }

    /// Picks a template uniformly and fills it.
    pub fn render_question<R: Rng + ?Sized>(
        &self,
        generator: Generator,
        slots: &BTreeMap<&str, String>,
        rng: &mut R,
    ) -> Result<String, FormatError> {
        let qs = self.questions(generator);
        fill(&qs[rng.random_range(0..qs.len())], slots)
    }

    /// Short answer text, using this library's clauses for comparisons.
    pub fn render_answer(&self, generator: Generator, answer: &Answer, style: AnswerStyle) -> String {
        match answer {
            Answer::Comparison(c) if is_comparison(generator) => {
                let clauses = &self.sets[&generator].answer_clauses;
                let get = |k: &str, d: &'static str| clauses.get(k).map_or(d, String::as_str);
                render_comparison_with(c, get("first", ""), get("next", ""), get("separator", ", "), get("end", "."))
            }
            _ => render_answer(answer, style),
        }
    }
}
