use rand::seq::SliceRandom;
use rand::Rng;

use super::draft;
use crate::graph::{SceneGraph, SegMask};
use crate::qgen::util::sample;
use crate::qgen::{Answer, GenContext, GenOutcome, Generator, Probe, SkipReason};
use crate::render::NormPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegKind {
    SameObjectSeg,
    DiffObjectSeg,
}

/// Objects whose mask contains the pixel a rendered point refers to.
fn covering(graph: &SceneGraph, p: NormPoint) -> Vec<usize> {
    let (x, y) = p.to_pixel(graph.image.width, graph.image.height);
    graph
        .objects
        .iter()
        .enumerate()
        .filter(|(_, o)| o.mask.as_ref().is_some_and(|m| m.contains_pixel(x, y)))
        .map(|(i, _)| i)
        .collect()
}

/// A rendered point whose pixel lies inside `mask`.
fn point_in<R: Rng + ?Sized>(graph: &SceneGraph, mask: &SegMask, rng: &mut R) -> Option<NormPoint> {
    let (w, h) = (graph.image.width, graph.image.height);
    for _ in 0..8 {
        let (px, py) = mask.nth_pixel(rng.random_range(0..mask.area()))?;
        let p = NormPoint::from_pixel(f64::from(px), f64::from(py), w, h);
        let (sx, sy) = p.to_pixel(w, h);
        if mask.contains_pixel(sx, sy) {
            return Some(p);
        }
    }
    None
}

/// Point-membership questions: which of two probes shares an object with an
/// anchor point (or lies in a different object).
pub fn gen_segmentation<R: Rng + ?Sized>(
    ctx: &GenContext,
    graph: &SceneGraph,
    kind: SegKind,
    rng: &mut R,
) -> GenOutcome {
    if graph.objects.len() < 2 {
        return GenOutcome::Skip(SkipReason::NoEligibleObjects);
    }
    let masked: Vec<usize> = graph
        .objects
        .iter()
        .enumerate()
        .filter(|(_, o)| o.mask.as_ref().is_some_and(|m| m.area() > 0))
        .map(|(i, _)| i)
        .collect();
    if masked.len() < 2 {
        return GenOutcome::Skip(SkipReason::MissingMask);
    }
    let mask = |i: usize| graph.objects[i].mask.as_ref().expect("masked object");
    for _ in 0..ctx.params.retries {
        let pair = sample(&masked, 2, rng);
        let (a, b) = (pair[0], pair[1]);
        let (Some(anchor), Some(same), Some(diff)) = (
            point_in(graph, mask(a), rng),
            point_in(graph, mask(a), rng),
            point_in(graph, mask(b), rng),
        ) else {
            continue;
        };
        if anchor == same || anchor == diff || same == diff {
            continue;
        }
        let anchor_objs = covering(graph, anchor);
        let shares = |p: NormPoint| covering(graph, p).iter().any(|i| anchor_objs.contains(i));
        if !shares(same) || shares(diff) || covering(graph, diff).is_empty() {
            continue;
        }
        let mut points = [same, diff];
        points.shuffle(rng);
        let (answer, other) = match kind {
            SegKind::SameObjectSeg => (same, diff),
            SegKind::DiffObjectSeg => (diff, same),
        };
        let mut hints = vec![Answer::Point(other)];
        // extra wrong options: points that fail the asked relation
        for _ in 0..8 {
            if hints.len() >= 3 {
                break;
            }
            let source = match kind {
                SegKind::SameObjectSeg => mask(*masked.iter().filter(|&&i| i != a).nth(rng.random_range(0..masked.len() - 1)).expect("two masked")),
                SegKind::DiffObjectSeg => mask(a),
            };
            if let Some(p) = point_in(graph, source, rng) {
                let wrong = match kind {
                    SegKind::SameObjectSeg => !shares(p),
                    SegKind::DiffObjectSeg => shares(p),
                };
                if wrong && p != anchor && p != answer && !hints.contains(&Answer::Point(p)) {
                    hints.push(Answer::Point(p));
                }
            }
        }
        let generator = match kind {
            SegKind::SameObjectSeg => Generator::SameObjectSeg,
            SegKind::DiffObjectSeg => Generator::DiffObjectSeg,
        };
        return draft(
            generator,
            Probe::PointChoice {
                anchor: Some(anchor),
                points,
            },
            Answer::Point(answer),
            hints,
        );
    }
    GenOutcome::Skip(SkipReason::NoEligibleObjects)
}
