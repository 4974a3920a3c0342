//! Independent answer checking.
//!
//! Given a draft and the graphs it was generated from, the oracle recomputes
//! the answer from the probe alone by exhaustive scans over the raw graph
//! data. It shares no selection logic with the generators; only the graph
//! types and the rendering functions are common. The comparison is on
//! rendered strings, so two answers agree exactly when the user would see the
//! same text.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::graph::{ObjectNode, SceneGraph};
use crate::lexicon::{AttrType, Taxonomy};
use crate::qgen::{
    render_answer, Answer, AnswerStyle, Comparison, Draft, Family, GenContext, Generator, Probe,
    RefExpr,
};
use crate::render::{NormBox, NormPoint};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Mismatch {
    #[error("{generator}: expected {expected:?}, draft says {found:?}")]
    Answer {
        generator: Generator,
        expected: String,
        found: String,
    },
    #[error("{generator}: {reason}")]
    Invalid { generator: Generator, reason: String },
}

type Check<T> = Result<T, String>;

fn ensure(cond: bool, reason: impl FnOnce() -> String) -> Check<()> {
    if cond {
        Ok(())
    } else {
        Err(reason())
    }
}

fn count_where(g: &SceneGraph, f: impl Fn(&ObjectNode) -> bool) -> u64 {
    let mut n = 0;
    for o in &g.objects {
        if f(o) {
            n += 1;
        }
    }
    n
}

fn boxes_equal(g: &SceneGraph, o: &ObjectNode, region: &NormBox) -> bool {
    NormBox::from_bbox(&o.bbox, g.image.width, g.image.height) == *region
}

/// The single object drawn in `region`.
fn object_in_region<'a>(g: &'a SceneGraph, region: &NormBox) -> Check<&'a ObjectNode> {
    let hits: Vec<&ObjectNode> = g.objects.iter().filter(|o| boxes_equal(g, o, region)).collect();
    ensure(hits.len() == 1, || format!("{} objects drawn at {region}", hits.len()))?;
    Ok(hits[0])
}

fn sorted_unique(items: impl IntoIterator<Item = String>) -> Vec<String> {
    items.into_iter().collect::<BTreeSet<_>>().into_iter().collect()
}

fn typed_values(taxonomy: &Taxonomy, o: &ObjectNode, ty: AttrType) -> Vec<String> {
    sorted_unique(o.attributes.iter().filter(|a| taxonomy.type_of(a) == Some(ty)).cloned())
}

fn edge_predicates<'a>(g: &'a SceneGraph, s: &ObjectNode, o: &ObjectNode) -> Vec<&'a String> {
    g.relations
        .iter()
        .filter(|e| e.subject == s.id && e.object == o.id)
        .flat_map(|e| e.predicates.iter())
        .collect()
}

fn label_of<'a>(g: &'a SceneGraph, id: &str) -> Option<&'a str> {
    g.objects.iter().find(|o| o.id == id).map(|o| o.label.as_str())
}

fn is_described(o: &ObjectNode, label: Option<&String>, attributes: &[String]) -> bool {
    if let Some(l) = label {
        if &o.label != l {
            return false;
        }
    }
    attributes.iter().all(|a| o.attributes.iter().any(|b| b == a))
}

/// Objects an expression picks out, by scanning every object and edge.
fn referents<'a>(g: &'a SceneGraph, expr: &RefExpr) -> Vec<&'a ObjectNode> {
    let mut out = Vec::new();
    for x in &g.objects {
        if !is_described(x, expr.label.as_ref(), &expr.attributes) {
            continue;
        }
        let ok = match &expr.relation {
            None => true,
            Some(r) => g.objects.iter().any(|y| {
                if !is_described(y, Some(&r.neighbor_label), &r.neighbor_attributes) {
                    return false;
                }
                let (s, o) = if r.target_is_subject { (x, y) } else { (y, x) };
                edge_predicates(g, s, o).iter().any(|p| **p == r.predicate)
            }),
        };
        if ok {
            out.push(x);
        }
    }
    out
}

fn unique_referent<'a>(g: &'a SceneGraph, expr: &RefExpr) -> Check<&'a ObjectNode> {
    let hits = referents(g, expr);
    ensure(hits.len() == 1, || {
        format!("\"{}\" resolves to {} objects", expr.render(), hits.len())
    })?;
    Ok(hits[0])
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Object depth by full raster scan.
fn scan_depth(g: &SceneGraph, o: &ObjectNode) -> Option<f64> {
    if let Some(d) = o.depth {
        return Some(d);
    }
    let r = g.raster()?;
    let mut samples = Vec::new();
    let mask = o.mask.as_ref().filter(|m| m.error().is_none());
    for y in 0..r.height() {
        for x in 0..r.width() {
            let inside = match mask {
                Some(m) => m.contains_pixel(x, y),
                None => {
                    let (fx, fy) = (f64::from(x), f64::from(y));
                    fx + 1.0 > o.bbox.x_min.floor()
                        && fx < o.bbox.x_max.ceil()
                        && fy + 1.0 > o.bbox.y_min.floor()
                        && fy < o.bbox.y_max.ceil()
                }
            };
            if inside {
                samples.push(f64::from(r.get(x, y)));
            }
        }
    }
    median(samples)
}

fn covering(g: &SceneGraph, p: NormPoint) -> HashSet<&str> {
    let (x, y) = p.to_pixel(g.image.width, g.image.height);
    g.objects
        .iter()
        .filter(|o| o.mask.as_ref().is_some_and(|m| m.contains_pixel(x, y)))
        .map(|o| o.id.as_str())
        .collect()
}

fn expect_probe<T>(found: Option<T>) -> Check<T> {
    found.ok_or_else(|| "probe shape does not fit this generator".to_string())
}

/// The one candidate that wins, checking the winner is strict.
fn strict_winner<'a>(scored: &[(&'a str, f64)], smaller_wins: bool, gap: f64) -> Check<&'a str> {
    ensure(scored.len() >= 2, || "fewer than two candidates".into())?;
    let mut v: Vec<(&str, f64)> = scored.to_vec();
    v.sort_by(|a, b| {
        let o = a.1.total_cmp(&b.1);
        if smaller_wins {
            o
        } else {
            o.reverse()
        }
    });
    ensure((v[0].1 - v[1].1).abs() > gap, || {
        format!("{} and {} are within the margin", v[0].0, v[1].0)
    })?;
    Ok(v[0].0)
}

fn single(generator: Generator, ctx: &GenContext, g: &SceneGraph, probe: &Probe) -> Check<Answer> {
    use Generator::*;
    let taxonomy = || {
        ctx.taxonomy
            .as_deref()
            .ok_or_else(|| "no taxonomy loaded".to_string())
    };
    match generator {
        ExistsObject => {
            let Probe::Label { label } = probe else { return expect_probe(None) };
            Ok(Answer::Count(count_where(g, |o| &o.label == label)))
        }
        MostObject | LeastObject => {
            let Probe::Labels { labels } = probe else { return expect_probe(None) };
            let scored: Vec<(&str, f64)> = labels
                .iter()
                .map(|l| (l.as_str(), count_where(g, |o| &o.label == l) as f64))
                .collect();
            ensure(scored.iter().all(|s| s.1 >= 1.0), || "a candidate is absent".into())?;
            let distinct: BTreeSet<u64> = scored.iter().map(|s| s.1 as u64).collect();
            ensure(distinct.len() == scored.len(), || "candidate counts tie".into())?;
            let w = strict_winner(&scored, generator == LeastObject, 0.0)?;
            Ok(Answer::Label(w.to_string()))
        }
        LeftMostObject | RightMostObject | TopMostObject | BottomMostObject => {
            let Probe::Labels { labels } = probe else { return expect_probe(None) };
            let horizontal = matches!(generator, LeftMostObject | RightMostObject);
            let smaller = matches!(generator, LeftMostObject | TopMostObject);
            let mut scored = Vec::new();
            for l in labels {
                let mut best: Option<f64> = None;
                for o in g.objects.iter().filter(|o| &o.label == l) {
                    let c = if horizontal {
                        (o.bbox.x_min + o.bbox.x_max) / 2.0
                    } else {
                        (o.bbox.y_min + o.bbox.y_max) / 2.0
                    };
                    best = Some(match best {
                        None => c,
                        Some(b) if smaller => b.min(c),
                        Some(b) => b.max(c),
                    });
                }
                scored.push((l.as_str(), best.ok_or_else(|| format!("{l} is absent"))?));
            }
            let extent = if horizontal { g.image.width } else { g.image.height };
            let w = strict_winner(&scored, smaller, ctx.params.position_margin * f64::from(extent))?;
            Ok(Answer::Label(w.to_string()))
        }
        ExistsAttribute => {
            let Probe::AttributedLabel { attribute, label } = probe else { return expect_probe(None) };
            Ok(Answer::Count(count_where(g, |o| {
                &o.label == label && o.attributes.contains(attribute)
            })))
        }
        AttributeBBox | TypedAttributeBBox => {
            let Probe::Region { label, region, attr_type } = probe else { return expect_probe(None) };
            let o = object_in_region(g, region)?;
            ensure(&o.label == label, || format!("region holds {}, not {label}", o.label))?;
            let values = match (generator, attr_type) {
                (AttributeBBox, None) => sorted_unique(o.attributes.iter().cloned()),
                (TypedAttributeBBox, Some(t)) => typed_values(taxonomy()?, o, *t),
                _ => return expect_probe(None),
            };
            ensure(!values.is_empty(), || "no attribute to report".into())?;
            Ok(Answer::Attributes(values))
        }
        ExistsRelation => {
            let Probe::LabelPair { subject, object } = probe else { return expect_probe(None) };
            let hits: Vec<_> = g
                .relations
                .iter()
                .filter(|e| {
                    label_of(g, &e.subject) == Some(subject.as_str())
                        && label_of(g, &e.object) == Some(object.as_str())
                })
                .collect();
            ensure(hits.len() == 1, || format!("{} edges join {subject} to {object}", hits.len()))?;
            Ok(Answer::Predicates(hits[0].predicates.clone()))
        }
        RelationBBox => {
            let Probe::RegionPair { subject, object } = probe else { return expect_probe(None) };
            let (s, o) = (object_in_region(g, subject)?, object_in_region(g, object)?);
            let preds = edge_predicates(g, s, o);
            ensure(!preds.is_empty(), || "regions are not related".into())?;
            Ok(Answer::Predicates(preds.into_iter().cloned().collect()))
        }
        HeadRelation => {
            let Probe::HeadRelation { candidates, predicate, anchor } = probe else {
                return expect_probe(None);
            };
            let fits: Vec<&String> = candidates
                .iter()
                .filter(|c| {
                    g.relations.iter().any(|e| {
                        label_of(g, &e.subject) == Some(c.as_str())
                            && label_of(g, &e.object) == Some(anchor.as_str())
                            && e.predicates.contains(predicate)
                    })
                })
                .collect();
            ensure(fits.len() == 1, || format!("{} candidates fit", fits.len()))?;
            Ok(Answer::Label(fits[0].clone()))
        }
        SameObjectSeg | DiffObjectSeg => {
            let Probe::PointChoice { anchor: Some(anchor), points } = probe else {
                return expect_probe(None);
            };
            let a = covering(g, *anchor);
            ensure(!a.is_empty(), || "anchor lies on no object".into())?;
            let fits: Vec<NormPoint> = points
                .iter()
                .copied()
                .filter(|p| {
                    let c = covering(g, *p);
                    let shares = !c.is_disjoint(&a);
                    if generator == SameObjectSeg {
                        shares
                    } else {
                        !shares && !c.is_empty()
                    }
                })
                .collect();
            ensure(fits.len() == 1, || format!("{} points fit", fits.len()))?;
            Ok(Answer::Point(fits[0]))
        }
        CloserPoint | FartherPoint => {
            let Probe::PointChoice { anchor: None, points } = probe else { return expect_probe(None) };
            let r = g.raster().ok_or_else(|| "no depth raster".to_string())?;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for v in r.values() {
                lo = lo.min(f64::from(*v));
                hi = hi.max(f64::from(*v));
            }
            let names: Vec<String> = points.iter().map(ToString::to_string).collect();
            let scored: Vec<(&str, f64)> = points
                .iter()
                .zip(&names)
                .map(|(p, n)| {
                    let (x, y) = p.to_pixel(g.image.width, g.image.height);
                    (n.as_str(), f64::from(r.get(x, y)))
                })
                .collect();
            let w = strict_winner(&scored, generator == CloserPoint, ctx.params.depth_margin * (hi - lo))?;
            let i = names.iter().position(|n| n == w).expect("winner is a candidate");
            Ok(Answer::Point(points[i]))
        }
        CloserObject | FartherObject | CloserToAnchorObject | FartherToAnchorObject => {
            let (anchor, candidates) = match probe {
                Probe::Labels { labels } if matches!(generator, CloserObject | FartherObject) => (None, labels),
                Probe::AnchoredLabels { anchor, candidates }
                    if matches!(generator, CloserToAnchorObject | FartherToAnchorObject) =>
                {
                    (Some(anchor), candidates)
                }
                _ => return expect_probe(None),
            };
            let known: Vec<f64> = g.objects.iter().filter_map(|o| scan_depth(g, o)).collect();
            let range = known.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - known.iter().copied().fold(f64::INFINITY, f64::min);
            let depth_of = |label: &str| -> Check<f64> {
                let hits: Vec<&ObjectNode> = g.objects.iter().filter(|o| o.label == label).collect();
                ensure(hits.len() == 1, || format!("{label} is not a single object"))?;
                scan_depth(g, hits[0]).ok_or_else(|| format!("{label} has no depth"))
            };
            let base = anchor.map(|a| depth_of(a)).transpose()?;
            let mut scored = Vec::new();
            for c in candidates {
                let d = depth_of(c)?;
                scored.push((c.as_str(), base.map_or(d, |b| (d - b).abs())));
            }
            let closer = matches!(generator, CloserObject | CloserToAnchorObject);
            let w = strict_winner(&scored, closer, ctx.params.depth_margin * range)?;
            Ok(Answer::Label(w.to_string()))
        }
        SceneGraphObjectQA => {
            let Probe::Referring { expr, attr_type: None } = probe else { return expect_probe(None) };
            Ok(Answer::Label(unique_referent(g, expr)?.label.clone()))
        }
        SceneGraphAttributeQA => {
            let Probe::Referring { expr, attr_type: Some(t) } = probe else { return expect_probe(None) };
            let o = unique_referent(g, expr)?;
            let values = typed_values(taxonomy()?, o, *t);
            ensure(!values.is_empty(), || "referent has no attribute of that type".into())?;
            Ok(Answer::Attributes(values))
        }
        SceneGraphRelationQA => {
            let Probe::ReferringPair { from, to } = probe else { return expect_probe(None) };
            let (s, o) = (unique_referent(g, from)?, unique_referent(g, to)?);
            let preds = edge_predicates(g, s, o);
            ensure(!preds.is_empty(), || "referents are not related".into())?;
            Ok(Answer::Predicates(preds.into_iter().cloned().collect()))
        }
        _ => Err(format!("{generator} is not a single-image generator")),
    }
}

fn per_image_values(graphs: &[&SceneGraph], value: impl Fn(&SceneGraph) -> Vec<String>) -> Vec<(usize, Vec<String>)> {
    graphs
        .iter()
        .enumerate()
        .map(|(i, g)| (i, value(g)))
        .filter(|(_, v)| !v.is_empty())
        .collect()
}

fn first_seen(items: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in items {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

fn multi(generator: Generator, graphs: &[&SceneGraph], probe: &Probe) -> Check<Answer> {
    use Generator::*;
    let lone = |flags: Vec<bool>, target: bool| -> Check<Answer> {
        let hits: Vec<usize> = flags
            .iter()
            .enumerate()
            .filter(|(_, f)| **f == target)
            .map(|(i, _)| i)
            .collect();
        ensure(hits.len() == 1, || format!("{} images qualify", hits.len()))?;
        Ok(Answer::Image(hits[0]))
    };
    match generator {
        HasObjectMulti | HasNotObjectMulti => {
            let Probe::Label { label } = probe else { return expect_probe(None) };
            let flags = graphs.iter().map(|g| count_where(g, |o| &o.label == label) > 0).collect();
            lone(flags, generator == HasObjectMulti)
        }
        HasAttributedObjectMulti | HasNotAttributedObjectMulti => {
            let Probe::AttributedLabel { attribute, label } = probe else { return expect_probe(None) };
            let flags = graphs
                .iter()
                .map(|g| count_where(g, |o| &o.label == label && o.attributes.contains(attribute)) > 0)
                .collect();
            lone(flags, generator == HasAttributedObjectMulti)
        }
        HasRelationMulti | HasNotRelationMulti => {
            let Probe::Triple { subject, predicate, object } = probe else { return expect_probe(None) };
            let flags = graphs
                .iter()
                .map(|g| {
                    g.objects.iter().filter(|s| &s.label == subject).any(|s| {
                        g.objects
                            .iter()
                            .filter(|o| &o.label == object)
                            .any(|o| edge_predicates(g, s, o).contains(&predicate))
                    })
                })
                .collect();
            lone(flags, generator == HasRelationMulti)
        }
        HasMostObjectMulti | HasLeastObjectMulti => {
            let Probe::Label { label } = probe else { return expect_probe(None) };
            let counts: Vec<u64> = graphs.iter().map(|g| count_where(g, |o| &o.label == label)).collect();
            let best = if generator == HasMostObjectMulti {
                counts.iter().max()
            } else {
                counts.iter().min()
            }
            .copied()
            .unwrap_or(0);
            ensure(generator == HasLeastObjectMulti || best > 0, || "label absent everywhere".into())?;
            lone(counts.iter().map(|&c| c == best).collect(), true)
        }
        CommonObjectMulti => {
            let Probe::Whole = probe else { return expect_probe(None) };
            let mut sets = graphs
                .iter()
                .map(|g| g.objects.iter().map(|o| o.label.clone()).collect::<BTreeSet<_>>());
            let first = sets.next().unwrap_or_default();
            let common: Vec<String> = sets
                .fold(first, |acc, s| &acc & &s)
                .into_iter()
                .collect();
            ensure(!common.is_empty(), || "no shared label".into())?;
            Ok(Answer::Labels(common))
        }
        CommonAttributeMulti => {
            let Probe::Label { label } = probe else { return expect_probe(None) };
            let mut shared: Option<BTreeSet<String>> = None;
            for g in graphs {
                let here: BTreeSet<String> = g
                    .objects
                    .iter()
                    .filter(|o| &o.label == label)
                    .flat_map(|o| o.attributes.iter().cloned())
                    .collect();
                ensure(g.objects.iter().any(|o| &o.label == label), || format!("{label} missing from an image"))?;
                shared = Some(match shared {
                    None => here,
                    Some(s) => &s & &here,
                });
            }
            let shared: Vec<String> = shared.unwrap_or_default().into_iter().collect();
            ensure(!shared.is_empty(), || "no shared attribute".into())?;
            Ok(Answer::Attributes(shared))
        }
        CompareRelationMulti | CompareAttributeMulti => {
            let (subject, object, entries) = match (generator, probe) {
                (CompareRelationMulti, Probe::LabelPair { subject, object }) => {
                    let entries = per_image_values(graphs, |g| {
                        first_seen(g.relations.iter().flat_map(|e| {
                            let hit = label_of(g, &e.subject) == Some(subject.as_str())
                                && label_of(g, &e.object) == Some(object.as_str());
                            if hit { e.predicates.clone() } else { Vec::new() }
                        }))
                    });
                    (subject, Some(object.clone()), entries)
                }
                (CompareAttributeMulti, Probe::Label { label }) => {
                    let entries = per_image_values(graphs, |g| {
                        first_seen(
                            g.objects
                                .iter()
                                .filter(|o| &o.label == label)
                                .flat_map(|o| o.attributes.iter().cloned()),
                        )
                    });
                    (label, None, entries)
                }
                _ => return expect_probe(None),
            };
            let distinct: BTreeSet<BTreeSet<&String>> = entries.iter().map(|(_, v)| v.iter().collect()).collect();
            ensure(entries.len() >= 2 && distinct.len() >= 2, || "values do not differ".into())?;
            Ok(Answer::Comparison(Comparison {
                subject: subject.clone(),
                object,
                entries,
            }))
        }
        CountObjectMulti => {
            let Probe::Label { label } = probe else { return expect_probe(None) };
            let total: u64 = graphs.iter().map(|g| count_where(g, |o| &o.label == label)).sum();
            ensure(total > 0, || "label absent everywhere".into())?;
            Ok(Answer::Count(total))
        }
        CountAttributeObjectMulti => {
            let Probe::AttributedLabel { attribute, label } = probe else { return expect_probe(None) };
            let total: u64 = graphs
                .iter()
                .map(|g| count_where(g, |o| &o.label == label && o.attributes.contains(attribute)))
                .sum();
            ensure(total > 0, || "pair absent everywhere".into())?;
            Ok(Answer::Count(total))
        }
        _ => Err(format!("{generator} is not a multi-image generator")),
    }
}

/// Recomputes the answer a draft's probe implies.
pub fn expected_answer(draft: &Draft, graphs: &[&SceneGraph], ctx: &GenContext) -> Result<Answer, Mismatch> {
    let generator = draft.generator;
    let result = match generator.family() {
        Family::Selection(_) | Family::Comparison(_) | Family::Aggregation(_) => multi(generator, graphs, &draft.probe),
        _ => match graphs {
            [g] => single(generator, ctx, g, &draft.probe),
            _ => Err(format!("expected one graph, got {}", graphs.len())),
        },
    };
    result.map_err(|reason| Mismatch::Invalid { generator, reason })
}

/// Checks a draft against an independent recomputation.
pub fn verify(draft: &Draft, graphs: &[&SceneGraph], ctx: &GenContext) -> Result<(), Mismatch> {
    let expected = expected_answer(draft, graphs, ctx)?;
    let e = render_answer(&expected, AnswerStyle::Digits);
    let f = render_answer(&draft.answer, AnswerStyle::Digits);
    if e == f && expected.type_name() == draft.answer.type_name() {
        Ok(())
    } else {
        Err(Mismatch::Answer {
            generator: draft.generator,
            expected: e,
            found: f,
        })
    }
}

/// Label counts per image, for summation checks in tests.
pub fn label_totals(graphs: &[&SceneGraph]) -> BTreeMap<String, u64> {
    let mut m = BTreeMap::new();
    for g in graphs {
        for o in &g.objects {
            *m.entry(o.label.clone()).or_insert(0) += 1;
        }
    }
    m
}
