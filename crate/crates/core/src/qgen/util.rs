use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::Rng;

use crate::graph::{ObjectNode, SceneGraph};
use crate::render::NormBox;

pub(crate) fn label_counts(graph: &SceneGraph) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for o in &graph.objects {
        *m.entry(o.label.as_str()).or_insert(0) += 1;
    }
    m
}

pub(crate) fn pick<'a, T, R: Rng + ?Sized>(items: &'a [T], rng: &mut R) -> Option<&'a T> {
    if items.is_empty() {
        None
    } else {
        Some(&items[rng.random_range(0..items.len())])
    }
}

/// `n` distinct elements in random order.
pub(crate) fn sample<T: Clone, R: Rng + ?Sized>(items: &[T], n: usize, rng: &mut R) -> Vec<T> {
    let n = n.min(items.len());
    index::sample(rng, items.len(), n)
        .into_iter()
        .map(|i| items[i].clone())
        .collect()
}

pub(crate) fn norm_box(graph: &SceneGraph, o: &ObjectNode) -> NormBox {
    NormBox::from_bbox(&o.bbox, graph.image.width, graph.image.height)
}

/// Objects whose rendered box is shared with no other object.
pub(crate) fn unique_box_objects(graph: &SceneGraph) -> Vec<usize> {
    let mut counts: BTreeMap<NormBox, usize> = BTreeMap::new();
    for o in &graph.objects {
        *counts.entry(norm_box(graph, o)).or_insert(0) += 1;
    }
    graph
        .objects
        .iter()
        .enumerate()
        .filter(|(_, o)| counts[&norm_box(graph, o)] == 1)
        .map(|(i, _)| i)
        .collect()
}

pub(crate) fn sorted_set<'a>(it: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    it.into_iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_string)
        .collect()
}
