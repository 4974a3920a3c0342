use rand::Rng;

use super::draft;
use crate::graph::{object_depth, SceneGraph};
use crate::qgen::util::{label_counts, sample};
use crate::qgen::{Answer, GenContext, GenOutcome, Generator, Probe, SkipReason};
use crate::render::NormPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthKind {
    CloserPoint,
    FartherPoint,
    CloserObject,
    FartherObject,
    CloserToAnchorObject,
    FartherToAnchorObject,
}

impl DepthKind {
    pub fn generator(self) -> Generator {
        match self {
            DepthKind::CloserPoint => Generator::CloserPoint,
            DepthKind::FartherPoint => Generator::FartherPoint,
            DepthKind::CloserObject => Generator::CloserObject,
            DepthKind::FartherObject => Generator::FartherObject,
            DepthKind::CloserToAnchorObject => Generator::CloserToAnchorObject,
            DepthKind::FartherToAnchorObject => Generator::FartherToAnchorObject,
        }
    }

    pub fn closer(self) -> bool {
        matches!(
            self,
            DepthKind::CloserPoint | DepthKind::CloserObject | DepthKind::CloserToAnchorObject
        )
    }
}

fn random_point<R: Rng + ?Sized>(rng: &mut R) -> NormPoint {
    NormPoint {
        x: rng.random_range(0..=100),
        y: rng.random_range(0..=100),
    }
}

/// Depth comparisons between points, objects, or objects relative to an
/// anchor. Each question is drawn once; if the depth gap does not clear the
/// margin the outcome is a tie skip.
pub fn gen_depth<R: Rng + ?Sized>(
    ctx: &GenContext,
    graph: &SceneGraph,
    kind: DepthKind,
    rng: &mut R,
) -> GenOutcome {
    let margin = ctx.params.depth_margin;
    match kind {
        DepthKind::CloserPoint | DepthKind::FartherPoint => {
            let Some(raster) = graph.raster() else {
                return GenOutcome::Skip(SkipReason::MissingDepth);
            };
            let (w, h) = (graph.image.width, graph.image.height);
            let p1 = random_point(rng);
            let mut p2 = random_point(rng);
            for _ in 0..ctx.params.retries {
                if p2 != p1 {
                    break;
                }
                p2 = random_point(rng);
            }
            if p1 == p2 {
                return GenOutcome::Skip(SkipReason::NoEligibleObjects);
            }
            let depth_at = |p: NormPoint| {
                let (x, y) = p.to_pixel(w, h);
                f64::from(raster.get(x, y))
            };
            let (d1, d2) = (depth_at(p1), depth_at(p2));
            if (d1 - d2).abs() <= margin * raster.range() {
                return GenOutcome::Skip(SkipReason::AmbiguousTie);
            }
            let first_wins = (d1 < d2) == kind.closer();
            let (answer, other) = if first_wins { (p1, p2) } else { (p2, p1) };
            draft(
                kind.generator(),
                Probe::PointChoice {
                    anchor: None,
                    points: [p1, p2],
                },
                Answer::Point(answer),
                vec![Answer::Point(other)],
            )
        }
        _ => {
            let depths: Vec<Option<f64>> = graph
                .objects
                .iter()
                .map(|o| object_depth(graph, &o.id).ok())
                .collect();
            let known: Vec<f64> = depths.iter().flatten().copied().collect();
            if known.is_empty() {
                return GenOutcome::Skip(SkipReason::MissingDepth);
            }
            let range = known.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - known.iter().copied().fold(f64::INFINITY, f64::min);
            let counts = label_counts(graph);
            let eligible: Vec<usize> = (0..graph.objects.len())
                .filter(|&i| depths[i].is_some() && counts[graph.objects[i].label.as_str()] == 1)
                .collect();
            let anchored = matches!(
                kind,
                DepthKind::CloserToAnchorObject | DepthKind::FartherToAnchorObject
            );
            let need = if anchored { 3 } else { 2 };
            if eligible.len() < need {
                return GenOutcome::Skip(SkipReason::NoEligibleObjects);
            }
            let chosen = sample(&eligible, need, rng);
            let depth = |i: usize| depths[i].expect("eligible objects have depth");
            let label = |i: usize| graph.objects[i].label.clone();
            let (anchor, a, b) = if anchored {
                (Some(chosen[0]), chosen[1], chosen[2])
            } else {
                (None, chosen[0], chosen[1])
            };
            // score: distance from camera, or from the anchor's depth
            let score = |i: usize| match anchor {
                Some(k) => (depth(i) - depth(k)).abs(),
                None => depth(i),
            };
            let (sa, sb) = (score(a), score(b));
            if (sa - sb).abs() <= margin * range {
                return GenOutcome::Skip(SkipReason::AmbiguousTie);
            }
            let a_wins = (sa < sb) == kind.closer();
            let (answer, other) = if a_wins { (a, b) } else { (b, a) };
            let candidates = vec![label(a), label(b)];
            let probe = match anchor {
                Some(k) => Probe::AnchoredLabels {
                    anchor: label(k),
                    candidates,
                },
                None => Probe::Labels { labels: candidates },
            };
            let mut hints = vec![Answer::Label(label(other))];
            if let Some(k) = anchor {
                hints.push(Answer::Label(label(k)));
            }
            draft(kind.generator(), probe, Answer::Label(label(answer)), hints)
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::{BBox, DepthRaster, ImageMeta, ObjectNode};
    use crate::seed::rng;

    #[test]
    fn closer_point_is_smaller_depth() {
        // left half depth 1.0, right half 9.0
        let raster = DepthRaster::from_fn(100, 100, |x, _| if x < 50 { 1.0 } else { 9.0 });
        let g = SceneGraph::new(ImageMeta::new("img", 100, 100)).with_raster(Arc::new(raster));
        let mut emitted = 0;
        for s in 0..60 {
            if let GenOutcome::Qa(d) = gen_depth(&GenContext::default(), &g, DepthKind::CloserPoint, &mut rng(s)) {
                let Answer::Point(p) = d.answer else { panic!() };
                assert!(p.to_pixel(100, 100).0 < 50);
                emitted += 1;
            }
        }
        assert!(emitted > 10);
    }

    #[test]
    fn man_is_farther_than_wheel() {
        let g = SceneGraph::new(ImageMeta::new("img", 100, 100))
            .with_object(ObjectNode::new("w", "wheel", BBox::new(0.0, 0.0, 10.0, 10.0)).with_depth(2.0))
            .with_object(ObjectNode::new("m", "man", BBox::new(20.0, 0.0, 30.0, 10.0)).with_depth(8.0));
        let d = gen_depth(&GenContext::default(), &g, DepthKind::FartherObject, &mut rng(0));
        assert_eq!(d.qa().unwrap().answer, Answer::Label("man".into()));
        let d = gen_depth(&GenContext::default(), &g, DepthKind::CloserObject, &mut rng(0));
        assert_eq!(d.qa().unwrap().answer, Answer::Label("wheel".into()));
    }

    #[test]
    fn no_depth_anywhere() {
        let g = SceneGraph::new(ImageMeta::new("img", 100, 100))
            .with_object(ObjectNode::new("w", "wheel", BBox::new(0.0, 0.0, 10.0, 10.0)));
        for k in [DepthKind::CloserPoint, DepthKind::FartherObject, DepthKind::CloserToAnchorObject] {
            assert_eq!(
                gen_depth(&GenContext::default(), &g, k, &mut rng(0)),
                GenOutcome::Skip(SkipReason::MissingDepth)
            );
        }
    }
}
