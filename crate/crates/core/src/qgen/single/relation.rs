use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use super::{draft, other_labels};
use crate::graph::SceneGraph;
use crate::qgen::util::{norm_box, pick, sample, unique_box_objects};
use crate::qgen::{Answer, GenContext, GenOutcome, Generator, Probe, SkipReason};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationKind {
    ExistsRelation,
    RelationBBox,
    HeadRelation,
}

pub fn gen_relation<R: Rng + ?Sized>(
    _ctx: &GenContext,
    graph: &SceneGraph,
    kind: RelationKind,
    rng: &mut R,
) -> GenOutcome {
    if graph.relations.is_empty() {
        return GenOutcome::Skip(SkipReason::NoEligibleObjects);
    }
    let label_of = |id: &str| graph.object(id).map(|o| o.label.as_str());
    match kind {
        RelationKind::ExistsRelation => {
            let mut by_pair: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
            for (i, e) in graph.relations.iter().enumerate() {
                if let (Some(s), Some(o)) = (label_of(&e.subject), label_of(&e.object)) {
                    by_pair.entry((s, o)).or_default().push(i);
                }
            }
            let eligible: Vec<((&str, &str), usize)> = by_pair
                .into_iter()
                .filter(|((s, o), edges)| s != o && edges.len() == 1)
                .map(|(k, edges)| (k, edges[0]))
                .collect();
            let Some(&((s, o), i)) = pick(&eligible, rng) else {
                return GenOutcome::Skip(SkipReason::NoUniqueReferent);
            };
            draft(
                Generator::ExistsRelation,
                Probe::LabelPair {
                    subject: s.to_string(),
                    object: o.to_string(),
                },
                Answer::Predicates(graph.relations[i].predicates.clone()),
                vec![],
            )
        }
        RelationKind::RelationBBox => {
            let unique: BTreeSet<&str> = unique_box_objects(graph)
                .into_iter()
                .map(|i| graph.objects[i].id.as_str())
                .collect();
            let eligible: Vec<usize> = graph
                .relations
                .iter()
                .enumerate()
                .filter(|(_, e)| unique.contains(e.subject.as_str()) && unique.contains(e.object.as_str()))
                .map(|(i, _)| i)
                .collect();
            let Some(&i) = pick(&eligible, rng) else {
                return GenOutcome::Skip(SkipReason::NoUniqueReferent);
            };
            let e = &graph.relations[i];
            let (Some(s), Some(o)) = (graph.object(&e.subject), graph.object(&e.object)) else {
                return GenOutcome::Skip(SkipReason::NoEligibleObjects);
            };
            draft(
                Generator::RelationBBox,
                Probe::RegionPair {
                    subject: norm_box(graph, s),
                    object: norm_box(graph, o),
                },
                Answer::Predicates(e.predicates.clone()),
                vec![],
            )
        }
        RelationKind::HeadRelation => {
            let mut positives: BTreeMap<(&str, &str), BTreeSet<&str>> = BTreeMap::new();
            for e in &graph.relations {
                if let (Some(s), Some(o)) = (label_of(&e.subject), label_of(&e.object)) {
                    for p in &e.predicates {
                        positives.entry((o, p.as_str())).or_default().insert(s);
                    }
                }
            }
            let labels: BTreeSet<&str> = graph.objects.iter().map(|o| o.label.as_str()).collect();
            let eligible: Vec<((&str, &str), Vec<&str>, Vec<&str>)> = positives
                .into_iter()
                .filter_map(|((anchor, pred), pos)| {
                    let pos_list: Vec<&str> = pos.iter().copied().filter(|l| *l != anchor).collect();
                    let neg: Vec<&str> = labels
                        .iter()
                        .copied()
                        .filter(|l| *l != anchor && !pos.contains(l))
                        .collect();
                    (!pos_list.is_empty() && neg.len() >= 3).then_some(((anchor, pred), pos_list, neg))
                })
                .collect();
            let Some(((anchor, pred), pos, neg)) = pick(&eligible, rng) else {
                return GenOutcome::Skip(SkipReason::InsufficientCandidates);
            };
            let answer = *pick(pos, rng).expect("non-empty positives");
            let mut candidates: Vec<String> = sample(neg, 3, rng)
                .into_iter()
                .map(str::to_string)
                .collect();
            candidates.push(answer.to_string());
            candidates.sort();
            let hints = other_labels(&candidates, answer);
            draft(
                Generator::HeadRelation,
                Probe::HeadRelation {
                    candidates,
                    predicate: pred.to_string(),
                    anchor: anchor.to_string(),
                },
                Answer::Label(answer.to_string()),
                hints,
            )
        }
    }
}
