use serde::{Deserialize, Serialize};

use crate::render::{number_word, NormPoint};

/// How counts are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerStyle {
    #[default]
    Digits,
    Words,
}

/// Per-image values in a comparison answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    pub subject: String,
    /// Present for relation comparisons.
    pub object: Option<String>,
    /// `(image index, values)` in image order; values already sorted.
    pub entries: Vec<(usize, Vec<String>)>,
}

/// A typed answer value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Answer {
    Count(u64),
    Label(String),
    /// Sorted attribute set, comma-joined when rendered.
    Attributes(Vec<String>),
    /// Relation predicates in stored order, joined with " and ".
    Predicates(Vec<String>),
    Point(NormPoint),
    Image(usize),
    /// Sorted label set, comma-joined when rendered.
    Labels(Vec<String>),
    Comparison(Comparison),
}

impl Answer {
    pub fn type_name(&self) -> &'static str {
        match self {
            Answer::Count(_) => "count",
            Answer::Label(_) => "label",
            Answer::Attributes(_) => "attributes",
            Answer::Predicates(_) => "predicates",
            Answer::Point(_) => "point",
            Answer::Image(_) => "image",
            Answer::Labels(_) => "labels",
            Answer::Comparison(_) => "comparison",
        }
    }
}

/// Renders a comparison with custom clause templates. `first` and `next`
/// may use `{subject}`, `{object}`, `{value}` and `{image}`.
pub fn render_comparison_with(
    c: &Comparison,
    first: &str,
    next: &str,
    separator: &str,
    end: &str,
) -> String {
    let mut out = String::new();
    for (i, (image, values)) in c.entries.iter().enumerate() {
        let value = values.join(" and ");
        let tpl = if i == 0 { first } else { next };
        if i > 0 {
            out.push_str(separator);
        }
        out.push_str(
            &tpl.replace("{subject}", &c.subject)
                .replace("{object}", c.object.as_deref().unwrap_or(""))
                .replace("{value}", &value)
                .replace("{image}", &format!("Image {image}")),
        );
    }
    out.push_str(end);
    out
}

pub(crate) const REL_FIRST: &str = "{subject} is {value} {object} in {image}";
pub(crate) const REL_NEXT: &str = "{value} {object} in {image}";
pub(crate) const ATTR_FIRST: &str = "{subject} is {value} in {image}";
pub(crate) const ATTR_NEXT: &str = "{value} in {image}";

/// Renders an answer with the default clause wording.
pub fn render_answer(answer: &Answer, style: AnswerStyle) -> String {
    match answer {
        Answer::Count(n) => match style {
            AnswerStyle::Digits => n.to_string(),
            AnswerStyle::Words => number_word(*n).map_or_else(|| n.to_string(), str::to_string),
        },
        Answer::Label(l) => l.to_lowercase(),
        Answer::Attributes(v) | Answer::Labels(v) => v.join(", ").to_lowercase(),
        Answer::Predicates(v) => v.join(" and ").to_lowercase(),
        Answer::Point(p) => p.to_string(),
        Answer::Image(i) => format!("Image {i}"),
        Answer::Comparison(c) => {
            if c.object.is_some() {
                render_comparison_with(c, REL_FIRST, REL_NEXT, ", ", ".")
            } else {
                render_comparison_with(c, ATTR_FIRST, ATTR_NEXT, ", ", ".")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_in_both_styles() {
        assert_eq!(render_answer(&Answer::Count(1), AnswerStyle::Digits), "1");
        assert_eq!(render_answer(&Answer::Count(2), AnswerStyle::Words), "two");
        assert_eq!(render_answer(&Answer::Count(0), AnswerStyle::Words), "zero");
        assert_eq!(render_answer(&Answer::Count(21), AnswerStyle::Words), "21");
    }

    #[test]
    fn comparison_sentences_match_clause_pattern() {
        let c = Comparison {
            subject: "window".into(),
            object: Some("windows".into()),
            entries: vec![
                (0, vec!["to the right of".into()]),
                (1, vec!["to the left of".into()]),
            ],
        };
        assert_eq!(
            render_answer(&Answer::Comparison(c), AnswerStyle::Digits),
            "window is to the right of windows in Image 0, to the left of windows in Image 1."
        );
        let c = Comparison {
            subject: "kite".into(),
            object: None,
            entries: vec![(0, vec!["blue".into()]), (1, vec!["yellow".into(), "flying".into()])],
        };
        assert_eq!(
            render_answer(&Answer::Comparison(c), AnswerStyle::Digits),
            "kite is blue in Image 0, yellow and flying in Image 1."
        );
    }

    #[test]
    fn predicate_join() {
        let a = Answer::Predicates(vec!["behind".into(), "to the left of".into()]);
        assert_eq!(render_answer(&a, AnswerStyle::Digits), "behind and to the left of");
    }
}
