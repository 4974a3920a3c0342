//! Multi-image generators: selection, comparison and aggregation over a
//! tuple of 2-4 graphs.
//!
//! Candidate probes are always enumerated from the sorted union over every
//! graph in the tuple, so the set of eligible probes does not depend on the
//! tuple's order. Permuting the tuple therefore permutes only the image
//! indices in the answer.

use std::collections::BTreeSet;

use rand::Rng;

use super::util::pick;
use super::{Answer, Comparison, Draft, GenContext, GenOutcome, Generator, Probe, SkipReason};
use crate::graph::SceneGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionKind {
    HasRelationMulti,
    HasNotRelationMulti,
    HasObjectMulti,
    HasNotObjectMulti,
    HasAttributedObjectMulti,
    HasNotAttributedObjectMulti,
    HasMostObjectMulti,
    HasLeastObjectMulti,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparisonKind {
    CommonObjectMulti,
    CommonAttributeMulti,
    CompareRelationMulti,
    CompareAttributeMulti,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationKind {
    CountObjectMulti,
    CountAttributeObjectMulti,
}

fn qa(generator: Generator, probe: Probe, answer: Answer, hints: Vec<Answer>) -> GenOutcome {
    GenOutcome::Qa(Draft {
        generator,
        probe,
        answer,
        hints,
    })
}

fn image_hints(n: usize, answer: usize) -> Vec<Answer> {
    (0..n).filter(|&i| i != answer).map(Answer::Image).collect()
}

pub(crate) fn count_label(g: &SceneGraph, label: &str) -> u64 {
    g.objects.iter().filter(|o| o.label == label).count() as u64
}

pub(crate) fn count_attributed(g: &SceneGraph, attribute: &str, label: &str) -> u64 {
    g.objects
        .iter()
        .filter(|o| o.label == label && o.has_attribute(attribute))
        .count() as u64
}

pub(crate) fn has_triple(g: &SceneGraph, subject: &str, predicate: &str, object: &str) -> bool {
    g.relations.iter().any(|e| {
        e.predicates.iter().any(|p| p == predicate)
            && g.object(&e.subject).is_some_and(|s| s.label == subject)
            && g.object(&e.object).is_some_and(|o| o.label == object)
    })
}

/// Values a label carries in one image, first-seen order without repeats.
pub(crate) fn label_attributes(g: &SceneGraph, label: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for o in g.objects.iter().filter(|o| o.label == label) {
        for a in &o.attributes {
            if !out.contains(a) {
                out.push(a.clone());
            }
        }
    }
    out
}

/// Predicates linking two labels in one image, first-seen order.
pub(crate) fn pair_predicates(g: &SceneGraph, subject: &str, object: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for e in &g.relations {
        let matches = g.object(&e.subject).is_some_and(|s| s.label == subject)
            && g.object(&e.object).is_some_and(|o| o.label == object);
        if matches {
            for p in &e.predicates {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
        }
    }
    out
}

fn all_labels(graphs: &[&SceneGraph]) -> BTreeSet<String> {
    graphs
        .iter()
        .flat_map(|g| g.objects.iter().map(|o| o.label.clone()))
        .collect()
}

fn all_attributed(graphs: &[&SceneGraph]) -> BTreeSet<(String, String)> {
    graphs
        .iter()
        .flat_map(|g| {
            g.objects
                .iter()
                .flat_map(|o| o.attributes.iter().map(|a| (a.clone(), o.label.clone())))
        })
        .collect()
}

fn all_triples(graphs: &[&SceneGraph]) -> BTreeSet<(String, String, String)> {
    let mut out = BTreeSet::new();
    for g in graphs {
        for e in &g.relations {
            if let (Some(s), Some(o)) = (g.object(&e.subject), g.object(&e.object)) {
                for p in &e.predicates {
                    out.insert((s.label.clone(), p.clone(), o.label.clone()));
                }
            }
        }
    }
    out
}

fn all_label_pairs(graphs: &[&SceneGraph]) -> BTreeSet<(String, String)> {
    all_triples(graphs).into_iter().map(|(s, _, o)| (s, o)).collect()
}

/// The single index where `flags` differs from every other entry, if the
/// flags have exactly one `target` value.
fn lone(flags: &[bool], target: bool) -> Option<usize> {
    let hits: Vec<usize> = (0..flags.len()).filter(|&i| flags[i] == target).collect();
    (hits.len() == 1).then(|| hits[0])
}

/// Index of a strict maximum (or minimum) count.
fn strict_extremum(counts: &[u64], most: bool) -> Option<usize> {
    let best = if most {
        *counts.iter().max()?
    } else {
        *counts.iter().min()?
    };
    if most && best == 0 {
        return None;
    }
    lone(&counts.iter().map(|&c| c == best).collect::<Vec<_>>(), true)
}

/// "Which image ..." questions. Every eligible probe has exactly one image
/// that satisfies it (or, for the negated kinds, exactly one that fails).
pub fn gen_multi_selection<R: Rng + ?Sized>(
    _ctx: &GenContext,
    graphs: &[&SceneGraph],
    kind: SelectionKind,
    rng: &mut R,
) -> GenOutcome {
    use SelectionKind::*;
    let n = graphs.len();
    let eligible: Vec<(Probe, usize)> = match kind {
        HasObjectMulti | HasNotObjectMulti => all_labels(graphs)
            .into_iter()
            .filter_map(|label| {
                let flags: Vec<bool> = graphs.iter().map(|g| count_label(g, &label) > 0).collect();
                let i = lone(&flags, kind == HasObjectMulti)?;
                Some((Probe::Label { label }, i))
            })
            .collect(),
        HasAttributedObjectMulti | HasNotAttributedObjectMulti => all_attributed(graphs)
            .into_iter()
            .filter_map(|(attribute, label)| {
                let flags: Vec<bool> = graphs
                    .iter()
                    .map(|g| count_attributed(g, &attribute, &label) > 0)
                    .collect();
                let i = lone(&flags, kind == HasAttributedObjectMulti)?;
                Some((Probe::AttributedLabel { attribute, label }, i))
            })
            .collect(),
        HasRelationMulti | HasNotRelationMulti => all_triples(graphs)
            .into_iter()
            .filter_map(|(subject, predicate, object)| {
                let flags: Vec<bool> = graphs
                    .iter()
                    .map(|g| has_triple(g, &subject, &predicate, &object))
                    .collect();
                let i = lone(&flags, kind == HasRelationMulti)?;
                Some((
                    Probe::Triple {
                        subject,
                        predicate,
                        object,
                    },
                    i,
                ))
            })
            .collect(),
        HasMostObjectMulti | HasLeastObjectMulti => all_labels(graphs)
            .into_iter()
            .filter_map(|label| {
                let counts: Vec<u64> = graphs.iter().map(|g| count_label(g, &label)).collect();
                let i = strict_extremum(&counts, kind == HasMostObjectMulti)?;
                Some((Probe::Label { label }, i))
            })
            .collect(),
    };
    let Some((probe, i)) = pick(&eligible, rng) else {
        return GenOutcome::Skip(SkipReason::InsufficientCandidates);
    };
    let generator = match kind {
        HasRelationMulti => Generator::HasRelationMulti,
        HasNotRelationMulti => Generator::HasNotRelationMulti,
        HasObjectMulti => Generator::HasObjectMulti,
        HasNotObjectMulti => Generator::HasNotObjectMulti,
        HasAttributedObjectMulti => Generator::HasAttributedObjectMulti,
        HasNotAttributedObjectMulti => Generator::HasNotAttributedObjectMulti,
        HasMostObjectMulti => Generator::HasMostObjectMulti,
        HasLeastObjectMulti => Generator::HasLeastObjectMulti,
    };
    qa(generator, probe.clone(), Answer::Image(*i), image_hints(n, *i))
}

/// Labels present in every graph of the tuple, sorted.
pub(crate) fn common_labels(graphs: &[&SceneGraph]) -> Vec<String> {
    all_labels(graphs)
        .into_iter()
        .filter(|l| graphs.iter().all(|g| count_label(g, l) > 0))
        .collect()
}

/// Attributes that some object with `label` carries in every graph, sorted.
pub(crate) fn common_attributes(graphs: &[&SceneGraph], label: &str) -> Vec<String> {
    let mut sets = graphs
        .iter()
        .map(|g| label_attributes(g, label).into_iter().collect::<BTreeSet<_>>());
    let Some(first) = sets.next() else {
        return Vec::new();
    };
    sets.fold(first, |acc, s| acc.intersection(&s).cloned().collect())
        .into_iter()
        .collect()
}

/// Per-image values, keeping only images where the value list is non-empty.
/// Eligible when at least two images contribute and they do not all agree.
fn differing(values: Vec<Vec<String>>) -> Option<Vec<(usize, Vec<String>)>> {
    let entries: Vec<(usize, Vec<String>)> = values
        .into_iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .collect();
    let distinct: BTreeSet<BTreeSet<&String>> =
        entries.iter().map(|(_, v)| v.iter().collect()).collect();
    (entries.len() >= 2 && distinct.len() >= 2).then_some(entries)
}

pub(crate) fn relation_entries(
    graphs: &[&SceneGraph],
    subject: &str,
    object: &str,
) -> Option<Vec<(usize, Vec<String>)>> {
    differing(graphs.iter().map(|g| pair_predicates(g, subject, object)).collect())
}

pub(crate) fn attribute_entries(graphs: &[&SceneGraph], label: &str) -> Option<Vec<(usize, Vec<String>)>> {
    differing(graphs.iter().map(|g| label_attributes(g, label)).collect())
}

/// What the images share, or how the same label differs between them.
pub fn gen_multi_comparison<R: Rng + ?Sized>(
    _ctx: &GenContext,
    graphs: &[&SceneGraph],
    kind: ComparisonKind,
    rng: &mut R,
) -> GenOutcome {
    match kind {
        ComparisonKind::CommonObjectMulti => {
            let common = common_labels(graphs);
            if common.is_empty() {
                return GenOutcome::Skip(SkipReason::NoEligibleObjects);
            }
            qa(Generator::CommonObjectMulti, Probe::Whole, Answer::Labels(common), vec![])
        }
        ComparisonKind::CommonAttributeMulti => {
            let eligible: Vec<(String, Vec<String>)> = common_labels(graphs)
                .into_iter()
                .map(|l| {
                    let attrs = common_attributes(graphs, &l);
                    (l, attrs)
                })
                .filter(|(_, a)| !a.is_empty())
                .collect();
            let Some((label, attrs)) = pick(&eligible, rng) else {
                return GenOutcome::Skip(SkipReason::NoEligibleObjects);
            };
            qa(
                Generator::CommonAttributeMulti,
                Probe::Label { label: label.clone() },
                Answer::Attributes(attrs.clone()),
                vec![],
            )
        }
        ComparisonKind::CompareRelationMulti => {
            let eligible: Vec<((String, String), Vec<(usize, Vec<String>)>)> = all_label_pairs(graphs)
                .into_iter()
                .filter_map(|(s, o)| {
                    let entries = relation_entries(graphs, &s, &o)?;
                    Some(((s, o), entries))
                })
                .collect();
            let Some(((subject, object), entries)) = pick(&eligible, rng) else {
                return GenOutcome::Skip(SkipReason::InsufficientCandidates);
            };
            qa(
                Generator::CompareRelationMulti,
                Probe::LabelPair {
                    subject: subject.clone(),
                    object: object.clone(),
                },
                Answer::Comparison(Comparison {
                    subject: subject.clone(),
                    object: Some(object.clone()),
                    entries: entries.clone(),
                }),
                vec![],
            )
        }
        ComparisonKind::CompareAttributeMulti => {
            let eligible: Vec<(String, Vec<(usize, Vec<String>)>)> = all_labels(graphs)
                .into_iter()
                .filter_map(|l| {
                    let entries = attribute_entries(graphs, &l)?;
                    Some((l, entries))
                })
                .collect();
            let Some((label, entries)) = pick(&eligible, rng) else {
                return GenOutcome::Skip(SkipReason::InsufficientCandidates);
            };
            qa(
                Generator::CompareAttributeMulti,
                Probe::Label { label: label.clone() },
                Answer::Comparison(Comparison {
                    subject: label.clone(),
                    object: None,
                    entries: entries.clone(),
                }),
                vec![],
            )
        }
    }
}

/// Totals across every image in the tuple.
pub fn gen_multi_aggregation<R: Rng + ?Sized>(
    _ctx: &GenContext,
    graphs: &[&SceneGraph],
    kind: AggregationKind,
    rng: &mut R,
) -> GenOutcome {
    match kind {
        AggregationKind::CountObjectMulti => {
            let labels: Vec<String> = all_labels(graphs).into_iter().collect();
            let Some(label) = pick(&labels, rng) else {
                return GenOutcome::Skip(SkipReason::NoEligibleObjects);
            };
            let total = graphs.iter().map(|g| count_label(g, label)).sum();
            qa(
                Generator::CountObjectMulti,
                Probe::Label { label: label.clone() },
                Answer::Count(total),
                vec![],
            )
        }
        AggregationKind::CountAttributeObjectMulti => {
            let pairs: Vec<(String, String)> = all_attributed(graphs).into_iter().collect();
            let Some((attribute, label)) = pick(&pairs, rng) else {
                return GenOutcome::Skip(SkipReason::NoEligibleObjects);
            };
            let total = graphs.iter().map(|g| count_attributed(g, attribute, label)).sum();
            qa(
                Generator::CountAttributeObjectMulti,
                Probe::AttributedLabel {
                    attribute: attribute.clone(),
                    label: label.clone(),
                },
                Answer::Count(total),
                vec![],
            )
        }
    }
}

/// Per-label counts for every graph.
#[cfg(test)]
fn count_table(graphs: &[&SceneGraph]) -> std::collections::BTreeMap<String, Vec<u64>> {
    all_labels(graphs)
        .into_iter()
        .map(|l| {
            let row = graphs.iter().map(|g| count_label(g, &l)).collect();
            (l, row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{BBox, ImageMeta, ObjectNode, RelationEdge};
    use crate::qgen::render_answer;
    use crate::seed::rng;

    fn img(id: &str, objs: &[(&str, &[&str])]) -> SceneGraph {
        let mut g = SceneGraph::new(ImageMeta::new(id, 100, 100));
        for (i, (label, attrs)) in objs.iter().enumerate() {
            let x = i as f64 * 5.0;
            g = g.with_object(
                ObjectNode::new(format!("o{i}"), *label, BBox::new(x, 0.0, x + 4.0, 4.0))
                    .with_attributes(attrs.iter().copied()),
            );
        }
        g
    }

    #[test]
    fn only_first_image_has_buildings() {
        let a = img("a", &[("buildings", &[]), ("sky", &[])]);
        let b = img("b", &[("sky", &[])]);
        let out = gen_multi_selection(&GenContext::default(), &[&a, &b], SelectionKind::HasObjectMulti, &mut rng(0));
        let d = out.qa().unwrap();
        assert_eq!(d.probe, Probe::Label { label: "buildings".into() });
        assert_eq!(d.answer, Answer::Image(0));
    }

    #[test]
    fn identical_images_leave_nothing_to_select() {
        let a = img("a", &[("cup", &["red"]), ("cup", &[])]);
        let b = img("b", &[("cup", &["red"]), ("cup", &[])]);
        use SelectionKind::*;
        for k in [
            HasRelationMulti,
            HasNotRelationMulti,
            HasObjectMulti,
            HasNotObjectMulti,
            HasAttributedObjectMulti,
            HasNotAttributedObjectMulti,
            HasMostObjectMulti,
            HasLeastObjectMulti,
        ] {
            let out = gen_multi_selection(&GenContext::default(), &[&a, &b], k, &mut rng(1));
            assert_eq!(out, GenOutcome::Skip(SkipReason::InsufficientCandidates), "{k:?}");
        }
    }

    #[test]
    fn common_pot_and_flying_kite() {
        let a = img("a", &[("pot", &[]), ("kite", &["flying", "blue"])]);
        let b = img("b", &[("pot", &[]), ("kite", &["yellow", "flying"]), ("tree", &[])]);
        let out = gen_multi_comparison(&GenContext::default(), &[&a, &b], ComparisonKind::CommonObjectMulti, &mut rng(0));
        assert_eq!(out.qa().unwrap().answer, Answer::Labels(vec!["kite".into(), "pot".into()]));
        let out = gen_multi_comparison(&GenContext::default(), &[&a, &b], ComparisonKind::CommonAttributeMulti, &mut rng(0));
        assert_eq!(out.qa().unwrap().answer, Answer::Attributes(vec!["flying".into()]));
    }

    #[test]
    fn kite_attribute_difference_sentence() {
        let a = img("a", &[("kite", &["blue"])]);
        let b = img("b", &[("kite", &["yellow", "flying"])]);
        let out = gen_multi_comparison(&GenContext::default(), &[&a, &b], ComparisonKind::CompareAttributeMulti, &mut rng(0));
        assert_eq!(
            render_answer(&out.qa().unwrap().answer, Default::default()),
            "kite is blue in Image 0, yellow and flying in Image 1."
        );
    }

    #[test]
    fn window_relation_difference_sentence() {
        let a = img("a", &[("window", &[]), ("windows", &[])])
            .with_relation(RelationEdge::new("o0", "o1", ["to the right of"]));
        let b = img("b", &[("window", &[]), ("windows", &[])])
            .with_relation(RelationEdge::new("o0", "o1", ["to the left of"]));
        let out = gen_multi_comparison(&GenContext::default(), &[&a, &b], ComparisonKind::CompareRelationMulti, &mut rng(0));
        assert_eq!(
            render_answer(&out.qa().unwrap().answer, Default::default()),
            "window is to the right of windows in Image 0, to the left of windows in Image 1."
        );
    }

    #[test]
    fn coat_total_is_two() {
        let a = img("a", &[("coat", &["black"])]);
        let b = img("b", &[("coat", &[])]);
        let out = gen_multi_aggregation(&GenContext::default(), &[&a, &b], AggregationKind::CountObjectMulti, &mut rng(0));
        assert_eq!(out.qa().unwrap().answer, Answer::Count(2));
        let out = gen_multi_aggregation(&GenContext::default(), &[&a, &b], AggregationKind::CountAttributeObjectMulti, &mut rng(0));
        assert_eq!(out.qa().unwrap().answer, Answer::Count(1));
    }

    #[test]
    fn empty_tuple_has_nothing_to_count() {
        let a = img("a", &[]);
        let b = img("b", &[]);
        let out = gen_multi_aggregation(&GenContext::default(), &[&a, &b], AggregationKind::CountObjectMulti, &mut rng(0));
        assert_eq!(out, GenOutcome::Skip(SkipReason::NoEligibleObjects));
    }

    #[test]
    fn most_windows() {
        let a = img("a", &[("window", &[])]);
        let b = img("b", &[("window", &[]), ("window", &[])]);
        assert_eq!(count_table(&[&a, &b])["window"], vec![1, 2]);
        let out = gen_multi_selection(&GenContext::default(), &[&a, &b], SelectionKind::HasMostObjectMulti, &mut rng(0));
        assert_eq!(out.qa().unwrap().answer, Answer::Image(1));
        let out = gen_multi_selection(&GenContext::default(), &[&a, &b], SelectionKind::HasLeastObjectMulti, &mut rng(0));
        assert_eq!(out.qa().unwrap().answer, Answer::Image(0));
    }
}
