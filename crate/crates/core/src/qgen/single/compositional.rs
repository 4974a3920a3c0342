use rand::Rng;

use super::draft;
use crate::graph::{ObjectNode, SceneGraph};
use crate::lexicon::AttrType;
use crate::qgen::util::{pick, sorted_set};
use crate::qgen::{Answer, GenContext, GenError, GenOutcome, Generator, Probe, RefExpr, RefRelation, SkipReason};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompositionalKind {
    SceneGraphObjectQA,
    SceneGraphRelationQA,
    SceneGraphAttributeQA,
}

fn describes(o: &ObjectNode, label: Option<&str>, attrs: &[String]) -> bool {
    label.is_none_or(|l| o.label == l) && attrs.iter().all(|a| o.has_attribute(a))
}

/// Indices of every object the expression describes.
pub(crate) fn resolve(graph: &SceneGraph, expr: &RefExpr) -> Vec<usize> {
    graph
        .objects
        .iter()
        .enumerate()
        .filter(|(_, x)| describes(x, expr.label.as_deref(), &expr.attributes))
        .filter(|(_, x)| match &expr.relation {
            None => true,
            Some(r) => graph.relations.iter().any(|e| {
                if !e.predicates.contains(&r.predicate) {
                    return false;
                }
                let (mine, theirs) = if r.target_is_subject {
                    (&e.subject, &e.object)
                } else {
                    (&e.object, &e.subject)
                };
                mine == &x.id
                    && graph
                        .object(theirs)
                        .is_some_and(|y| describes(y, Some(&r.neighbor_label), &r.neighbor_attributes))
            }),
        })
        .map(|(i, _)| i)
        .collect()
}

fn subset<R: Rng + ?Sized>(items: &[String], rng: &mut R) -> Vec<String> {
    items.iter().filter(|_| rng.random_bool(0.5)).cloned().collect()
}

/// A random attribute-plus-relation description of `target`, using an edge
/// whose other endpoint is not `avoid`.
fn describe<R: Rng + ?Sized>(
    graph: &SceneGraph,
    target: usize,
    avoid: Option<&str>,
    with_label: bool,
    withheld: &[String],
    rng: &mut R,
) -> Option<RefExpr> {
    let t = &graph.objects[target];
    let incident: Vec<_> = graph
        .relations
        .iter()
        .filter(|e| {
            let other = if e.subject == t.id {
                &e.object
            } else if e.object == t.id {
                &e.subject
            } else {
                return false;
            };
            Some(other.as_str()) != avoid && other != &t.id
        })
        .collect();
    let e = *pick(&incident, rng)?;
    let target_is_subject = e.subject == t.id;
    let neighbor = graph.object(if target_is_subject { &e.object } else { &e.subject })?;
    let own: Vec<String> = t
        .attributes
        .iter()
        .filter(|a| !withheld.contains(a))
        .cloned()
        .collect();
    Some(RefExpr {
        label: with_label.then(|| t.label.clone()),
        attributes: subset(&own, rng),
        relation: Some(RefRelation {
            predicate: pick(&e.predicates, rng)?.clone(),
            neighbor_label: neighbor.label.clone(),
            neighbor_attributes: subset(&neighbor.attributes, rng),
            target_is_subject,
        }),
    })
}

fn unique_match(graph: &SceneGraph, expr: &RefExpr, target: usize) -> bool {
    resolve(graph, expr) == [target]
}

/// Questions built from referring expressions that combine attributes with
/// one relation; an expression is kept only if it resolves to exactly its
/// target.
pub fn gen_compositional<R: Rng + ?Sized>(
    ctx: &GenContext,
    graph: &SceneGraph,
    kind: CompositionalKind,
    rng: &mut R,
) -> Result<GenOutcome, GenError> {
    let taxonomy = match kind {
        CompositionalKind::SceneGraphAttributeQA => {
            Some(ctx.taxonomy(Generator::SceneGraphAttributeQA.name())?)
        }
        _ => None,
    };
    if graph.relations.is_empty() {
        return Ok(GenOutcome::Skip(SkipReason::NoEligibleObjects));
    }
    let connected: Vec<usize> = (0..graph.objects.len())
        .filter(|&i| {
            let id = &graph.objects[i].id;
            graph.relations.iter().any(|e| &e.subject == id || &e.object == id)
        })
        .collect();
    for _ in 0..ctx.params.search_retries {
        match kind {
            CompositionalKind::SceneGraphObjectQA => {
                let Some(&t) = pick(&connected, rng) else { break };
                let Some(expr) = describe(graph, t, None, false, &[], rng) else { continue };
                if unique_match(graph, &expr, t) {
                    return Ok(draft(
                        Generator::SceneGraphObjectQA,
                        Probe::Referring { expr, attr_type: None },
                        Answer::Label(graph.objects[t].label.clone()),
                        vec![],
                    ));
                }
            }
            CompositionalKind::SceneGraphAttributeQA => {
                let taxonomy = taxonomy.expect("checked above");
                let typed: Vec<(usize, AttrType)> = connected
                    .iter()
                    .flat_map(|&i| {
                        let mut ts: Vec<AttrType> = graph.objects[i]
                            .attributes
                            .iter()
                            .filter_map(|a| taxonomy.type_of(a))
                            .collect();
                        ts.sort();
                        ts.dedup();
                        ts.into_iter().map(move |t| (i, t))
                    })
                    .collect();
                let Some(&(t, ty)) = pick(&typed, rng) else {
                    return Ok(GenOutcome::Skip(SkipReason::NoEligibleObjects));
                };
                let asked: Vec<String> = graph.objects[t]
                    .attributes
                    .iter()
                    .filter(|a| taxonomy.type_of(a) == Some(ty))
                    .cloned()
                    .collect();
                let with_label = rng.random_bool(0.5);
                let Some(expr) = describe(graph, t, None, with_label, &asked, rng) else { continue };
                if unique_match(graph, &expr, t) {
                    return Ok(draft(
                        Generator::SceneGraphAttributeQA,
                        Probe::Referring {
                            expr,
                            attr_type: Some(ty),
                        },
                        Answer::Attributes(sorted_set(asked.iter().map(String::as_str))),
                        vec![],
                    ));
                }
            }
            CompositionalKind::SceneGraphRelationQA => {
                let Some(e) = pick(&graph.relations, rng) else { break };
                let (Some(x), Some(y)) = (graph.object_index(&e.subject), graph.object_index(&e.object)) else {
                    continue;
                };
                let Some(from) = describe(graph, x, Some(&e.object), false, &[], rng) else { continue };
                let Some(to) = describe(graph, y, Some(&e.subject), false, &[], rng) else { continue };
                if unique_match(graph, &from, x) && unique_match(graph, &to, y) {
                    return Ok(draft(
                        Generator::SceneGraphRelationQA,
                        Probe::ReferringPair { from, to },
                        Answer::Predicates(e.predicates.clone()),
                        vec![],
                    ));
                }
            }
        }
    }
    Ok(GenOutcome::Skip(SkipReason::NoUniqueReferent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{BBox, ImageMeta, RelationEdge};
    use crate::seed::rng;

    #[test]
    fn stone_object_color() {
        let g = SceneGraph::new(ImageMeta::new("img", 200, 100))
            .with_object(
                ObjectNode::new("s", "rock", BBox::new(100.0, 10.0, 150.0, 60.0))
                    .with_attributes(["stone", "brown"]),
            )
            .with_object(
                ObjectNode::new("a", "arrow", BBox::new(10.0, 10.0, 50.0, 40.0))
                    .with_attributes(["green"]),
            )
            .with_relation(RelationEdge::new("a", "s", ["to the left of"]));
        let mut found = false;
        for s in 0..50 {
            let out = gen_compositional(&GenContext::default(), &g, CompositionalKind::SceneGraphAttributeQA, &mut rng(s))
                .unwrap();
            if let GenOutcome::Qa(d) = out {
                if let Probe::Referring { attr_type: Some(AttrType::Color), expr } = &d.probe {
                    if expr.relation.as_ref().unwrap().neighbor_label == "arrow" {
                        assert_eq!(d.answer, Answer::Attributes(vec!["brown".into()]));
                        found = true;
                    }
                }
            }
        }
        assert!(found);
    }

    #[test]
    fn identical_twins_are_ambiguous() {
        let mut g = SceneGraph::new(ImageMeta::new("img", 100, 100))
            .with_object(ObjectNode::new("t", "table", BBox::new(0.0, 50.0, 100.0, 100.0)));
        for id in ["a", "b"] {
            g = g
                .with_object(
                    ObjectNode::new(id, "cup", BBox::new(10.0, 10.0, 20.0, 20.0)).with_attributes(["red"]),
                )
                .with_relation(RelationEdge::new(id, "t", ["on"]));
        }
        for kind in [
            CompositionalKind::SceneGraphObjectQA,
            CompositionalKind::SceneGraphRelationQA,
        ] {
            let out = gen_compositional(&GenContext::default(), &g, kind, &mut rng(9)).unwrap();
            // the table is uniquely "object that the cup is on"; cups never resolve
            if let GenOutcome::Qa(d) = &out {
                assert_eq!(d.answer, Answer::Label("table".into()));
            }
        }
        let out = gen_compositional(&GenContext::default(), &g, CompositionalKind::SceneGraphRelationQA, &mut rng(9))
            .unwrap();
        assert_eq!(out, GenOutcome::Skip(SkipReason::NoUniqueReferent));
    }
}
