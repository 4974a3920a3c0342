use std::collections::BTreeMap;

use crate::lexicon::AttrType;
use crate::render::{join_list, plural, NormBox, NormPoint};

/// Predicates that read as verbs rather than taking "is".
const VERB_PREDICATES: &[&str] = &["has", "have"];

/// Affirmative and negated verb phrase for a predicate:
/// `("is to the left of", "isn't to the left of")`, `("has", "doesn't have")`.
pub fn copula_phrase(predicate: &str) -> (String, String) {
    let first = predicate.split_whitespace().next().unwrap_or("");
    if VERB_PREDICATES.contains(&first) {
        let rest = predicate[first.len()..].trim_start();
        let neg = if rest.is_empty() {
            "doesn't have".to_string()
        } else {
            format!("doesn't have {rest}")
        };
        (predicate.to_string(), neg)
    } else {
        (format!("is {predicate}"), format!("isn't {predicate}"))
    }
}

/// The related neighbor in a referring expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefRelation {
    pub predicate: String,
    pub neighbor_label: String,
    pub neighbor_attributes: Vec<String>,
    /// When true the described object is the edge's subject
    /// ("object that is behind the shelf"); otherwise the neighbor is
    /// ("object that the word is to the right of").
    pub target_is_subject: bool,
}

/// A description intended to pick out exactly one object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefExpr {
    pub label: Option<String>,
    pub attributes: Vec<String>,
    pub relation: Option<RefRelation>,
}

fn noun_phrase(attrs: &[String], noun: &str) -> String {
    if attrs.is_empty() {
        noun.to_string()
    } else {
        format!("{} {noun}", attrs.join(" and "))
    }
}

impl RefExpr {
    /// Renders the expression without a leading article, e.g.
    /// `leafy and small object that the word is to the right of`.
    pub fn render(&self) -> String {
        self.render_with(" that ")
    }

    /// Same as [`RefExpr::render`] with a non-restrictive clause:
    /// `object, which is behind the empty and wood shelf`.
    pub fn render_which(&self) -> String {
        self.render_with(", which ")
    }

    fn render_with(&self, connective: &str) -> String {
        let np = noun_phrase(&self.attributes, self.label.as_deref().unwrap_or("object"));
        match &self.relation {
            None => np,
            Some(r) => {
                let (verb, _) = copula_phrase(&r.predicate);
                let neighbor = noun_phrase(&r.neighbor_attributes, &r.neighbor_label);
                if r.target_is_subject {
                    format!("{np}{connective}{verb} the {neighbor}")
                } else {
                    format!("{np}{connective}the {neighbor} {verb}")
                }
            }
        }
    }
}

/// What a question asks about, in structured form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Probe {
    Label { label: String },
    Labels { labels: Vec<String> },
    AttributedLabel { attribute: String, label: String },
    Region { label: String, region: NormBox, attr_type: Option<AttrType> },
    LabelPair { subject: String, object: String },
    RegionPair { subject: NormBox, object: NormBox },
    HeadRelation { candidates: Vec<String>, predicate: String, anchor: String },
    Triple { subject: String, predicate: String, object: String },
    /// Two points to choose between, with an optional reference point.
    PointChoice { anchor: Option<NormPoint>, points: [NormPoint; 2] },
    AnchoredLabels { anchor: String, candidates: Vec<String> },
    Referring { expr: RefExpr, attr_type: Option<AttrType> },
    ReferringPair { from: RefExpr, to: RefExpr },
    Whole,
}

impl Probe {
    /// Template slot values derived from this probe.
    pub fn slots(&self) -> BTreeMap<&'static str, String> {
        let mut s = BTreeMap::new();
        match self {
            Probe::Label { label } => {
                s.insert("label", label.clone());
                s.insert("label_plural", plural(label));
            }
            Probe::Labels { labels } => {
                s.insert("labels_list", join_list(labels));
            }
            Probe::AttributedLabel { attribute, label } => {
                s.insert("attribute", attribute.clone());
                s.insert("label", label.clone());
                s.insert("label_plural", plural(label));
            }
            Probe::Region { label, region, attr_type } => {
                s.insert("label", label.clone());
                s.insert("bbox", region.to_string());
                if let Some(t) = attr_type {
                    s.insert("type", t.name().to_string());
                }
            }
            Probe::LabelPair { subject, object } => {
                s.insert("subject", subject.clone());
                s.insert("object", object.clone());
            }
            Probe::RegionPair { subject, object } => {
                s.insert("bbox_a", subject.to_string());
                s.insert("bbox_b", object.to_string());
            }
            Probe::HeadRelation { candidates, predicate, anchor } => {
                s.insert("labels_list", join_list(candidates));
                s.insert("relation", copula_phrase(predicate).0);
                s.insert("predicate", predicate.clone());
                s.insert("anchor", anchor.clone());
            }
            Probe::Triple { subject, predicate, object } => {
                let (pos, neg) = copula_phrase(predicate);
                s.insert("subject", subject.clone());
                s.insert("predicate", predicate.clone());
                s.insert("relation", pos);
                s.insert("negated_relation", neg);
                s.insert("object", object.clone());
            }
            Probe::PointChoice { anchor, points } => {
                let rendered: Vec<String> = points.iter().map(ToString::to_string).collect();
                s.insert("points_list", join_list(&rendered));
                if let Some(a) = anchor {
                    s.insert("point", a.to_string());
                }
            }
            Probe::AnchoredLabels { anchor, candidates } => {
                s.insert("labels_list", join_list(candidates));
                s.insert("anchor", anchor.clone());
            }
            Probe::Referring { expr, attr_type } => {
                s.insert("expression", expr.render());
                if let Some(t) = attr_type {
                    s.insert("type", t.name().to_string());
                }
            }
            Probe::ReferringPair { from, to } => {
                s.insert("expression_a", from.render_which());
                s.insert("expression_b", to.render_which());
            }
            Probe::Whole => {}
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn referring_expressions_read_naturally() {
        let e = RefExpr {
            label: None,
            attributes: vec!["leafy".into(), "small".into()],
            relation: Some(RefRelation {
                predicate: "to the right of".into(),
                neighbor_label: "word".into(),
                neighbor_attributes: vec![],
                target_is_subject: false,
            }),
        };
        assert_eq!(e.render(), "leafy and small object that the word is to the right of");
        let e = RefExpr {
            label: None,
            attributes: vec![],
            relation: Some(RefRelation {
                predicate: "behind".into(),
                neighbor_label: "shelf".into(),
                neighbor_attributes: vec!["empty".into(), "wood".into()],
                target_is_subject: true,
            }),
        };
        assert_eq!(e.render(), "object that is behind the empty and wood shelf");
        assert_eq!(e.render_which(), "object, which is behind the empty and wood shelf");
    }

    #[test]
    fn copula_handles_has() {
        assert_eq!(copula_phrase("has").1, "doesn't have");
        assert_eq!(copula_phrase("to the left of").0, "is to the left of");
    }
}
