use std::collections::BTreeMap;

use rand::Rng;

use super::draft;
use crate::graph::SceneGraph;
use crate::lexicon::AttrType;
use crate::qgen::util::{norm_box, pick, sorted_set, unique_box_objects};
use crate::qgen::{Answer, GenContext, GenError, GenOutcome, Generator, Probe, SkipReason};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeKind {
    ExistsAttribute,
    AttributeBBox,
    TypedAttributeBBox,
}

pub fn gen_attribute<R: Rng + ?Sized>(
    ctx: &GenContext,
    graph: &SceneGraph,
    kind: AttributeKind,
    rng: &mut R,
) -> Result<GenOutcome, GenError> {
    match kind {
        AttributeKind::ExistsAttribute => {
            let mut pairs: BTreeMap<(&str, &str), u64> = BTreeMap::new();
            for o in &graph.objects {
                for a in &o.attributes {
                    *pairs.entry((a.as_str(), o.label.as_str())).or_insert(0) += 1;
                }
            }
            let keys: Vec<_> = pairs.keys().copied().collect();
            let Some(&(attribute, label)) = pick(&keys, rng) else {
                return Ok(GenOutcome::Skip(SkipReason::NoEligibleObjects));
            };
            Ok(draft(
                Generator::ExistsAttribute,
                Probe::AttributedLabel {
                    attribute: attribute.to_string(),
                    label: label.to_string(),
                },
                Answer::Count(pairs[&(attribute, label)]),
                vec![],
            ))
        }
        AttributeKind::AttributeBBox => {
            let eligible: Vec<usize> = unique_box_objects(graph)
                .into_iter()
                .filter(|&i| !graph.objects[i].attributes.is_empty())
                .collect();
            let Some(&i) = pick(&eligible, rng) else {
                return Ok(GenOutcome::Skip(SkipReason::NoEligibleObjects));
            };
            let o = &graph.objects[i];
            Ok(draft(
                Generator::AttributeBBox,
                Probe::Region {
                    label: o.label.clone(),
                    region: norm_box(graph, o),
                    attr_type: None,
                },
                Answer::Attributes(sorted_set(o.attributes.iter().map(String::as_str))),
                vec![],
            ))
        }
        AttributeKind::TypedAttributeBBox => {
            let taxonomy = ctx.taxonomy(Generator::TypedAttributeBBox.name())?;
            let mut eligible: Vec<(usize, AttrType)> = Vec::new();
            for i in unique_box_objects(graph) {
                let mut types: Vec<AttrType> = graph.objects[i]
                    .attributes
                    .iter()
                    .filter_map(|a| taxonomy.type_of(a))
                    .collect();
                types.sort();
                types.dedup();
                eligible.extend(types.into_iter().map(|t| (i, t)));
            }
            let Some(&(i, ty)) = pick(&eligible, rng) else {
                return Ok(GenOutcome::Skip(SkipReason::NoEligibleObjects));
            };
            let o = &graph.objects[i];
            let values = sorted_set(
                o.attributes
                    .iter()
                    .map(String::as_str)
                    .filter(|a| taxonomy.type_of(a) == Some(ty)),
            );
            Ok(draft(
                Generator::TypedAttributeBBox,
                Probe::Region {
                    label: o.label.clone(),
                    region: norm_box(graph, o),
                    attr_type: Some(ty),
                },
                Answer::Attributes(values),
                vec![],
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{BBox, ImageMeta, ObjectNode};
    use crate::seed::rng;

    #[test]
    fn kite_region_attributes() {
        let g = SceneGraph::new(ImageMeta::new("img", 1000, 1000)).with_object(
            ObjectNode::new("k", "kite", BBox::new(130.0, 260.0, 240.0, 470.0))
                .with_attributes(["blue"]),
        );
        let out = gen_attribute(&GenContext::default(), &g, AttributeKind::AttributeBBox, &mut rng(0))
            .unwrap();
        let d = out.qa().unwrap();
        assert_eq!(d.answer, Answer::Attributes(vec!["blue".into()]));
        assert_eq!(d.probe.slots()["bbox"], "(0.13, 0.26, 0.24, 0.47)");
    }

    #[test]
    fn no_attributes_means_skip() {
        let g = SceneGraph::new(ImageMeta::new("img", 100, 100))
            .with_object(ObjectNode::new("k", "kite", BBox::new(1.0, 1.0, 20.0, 20.0)));
        for kind in [
            AttributeKind::ExistsAttribute,
            AttributeKind::AttributeBBox,
            AttributeKind::TypedAttributeBBox,
        ] {
            let out = gen_attribute(&GenContext::default(), &g, kind, &mut rng(0)).unwrap();
            assert_eq!(out, GenOutcome::Skip(SkipReason::NoEligibleObjects));
        }
    }

    #[test]
    fn typed_requires_taxonomy() {
        let g = SceneGraph::new(ImageMeta::new("img", 100, 100));
        let ctx = GenContext::new(Default::default(), None);
        assert_eq!(
            gen_attribute(&ctx, &g, AttributeKind::TypedAttributeBBox, &mut rng(0)),
            Err(GenError::TaxonomyMissing("TypedAttributeBBoxGenerator"))
        );
    }

    #[test]
    fn typed_picks_only_matching_type() {
        let g = SceneGraph::new(ImageMeta::new("img", 100, 100)).with_object(
            ObjectNode::new("h", "hat", BBox::new(89.0, 47.0, 96.0, 51.0))
                .with_attributes(["round", "red"]),
        );
        let mut seen = std::collections::BTreeSet::new();
        for s in 0..40 {
            let out = gen_attribute(&GenContext::default(), &g, AttributeKind::TypedAttributeBBox, &mut rng(s))
                .unwrap();
            let d = out.qa().unwrap().clone();
            if let Probe::Region { attr_type: Some(t), .. } = d.probe {
                let expect = if t == AttrType::Shape { "round" } else { "red" };
                assert_eq!(d.answer, Answer::Attributes(vec![expect.into()]));
                seen.insert(t);
            }
        }
        assert_eq!(seen.len(), 2);
    }
}
