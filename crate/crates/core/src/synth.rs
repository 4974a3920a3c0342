//! Seeded synthetic scene graphs for fixtures, fuzzing and load tests.
//!
//! Labels come from a small slice of the label pool so that repeats,
//! shared objects across images and ties all occur naturally.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{BBox, DepthRaster, ImageMeta, ObjectNode, RelationEdge, SceneGraph, SegMask};
use crate::lexicon::{AttrType, Pools, Taxonomy};
use crate::seed::{derive_seed, rng};

/// How depth is attached to synthetic graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthMode {
    None,
    /// A depth value stored on each object; no raster.
    Stored,
    /// A dense raster with objects painted back to front.
    Raster,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub width: (u32, u32),
    pub height: (u32, u32),
    pub objects: (usize, usize),
    /// Number of pool labels in play.
    pub vocabulary: usize,
    pub max_attributes: usize,
    /// Expected relation edges per object.
    pub relation_density: f64,
    pub mask_probability: f64,
    pub depth: DepthMode,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            width: (512, 1024),
            height: (512, 768),
            objects: (6, 14),
            vocabulary: 24,
            max_attributes: 3,
            relation_density: 1.0,
            mask_probability: 1.0,
            depth: DepthMode::Stored,
        }
    }
}

impl SynthParams {
    /// Small images with dense rasters, for oracle fuzzing.
    pub fn fuzz() -> Self {
        SynthParams {
            width: (40, 96),
            height: (40, 96),
            objects: (1, 9),
            vocabulary: 8,
            max_attributes: 3,
            relation_density: 1.2,
            mask_probability: 0.85,
            depth: DepthMode::Raster,
        }
    }
}

fn range<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (u32, u32)) -> u32 {
    rng.random_range(lo..=hi.max(lo))
}

fn ellipse(width: u32, height: u32, b: &BBox) -> SegMask {
    let (cx, cy) = b.center();
    let (rx, ry) = ((b.x_max - b.x_min) / 2.0, (b.y_max - b.y_min) / 2.0);
    SegMask::from_columns(width, height, |x| {
        let dx = (f64::from(x) + 0.5 - cx) / rx;
        if dx.abs() >= 1.0 {
            return None;
        }
        let half = ry * (1.0 - dx * dx).sqrt();
        let y0 = (cy - half - 0.5).ceil().max(b.y_min);
        let y1 = (cy + half - 0.5).floor() + 1.0;
        (y1 > y0).then(|| (y0 as u32, y1.min(b.y_max) as u32))
    })
}

fn attributes<R: Rng + ?Sized>(tax: &Taxonomy, max: usize, rng: &mut R) -> Vec<String> {
    let n = rng.random_range(0..=max);
    let mut out: Vec<String> = Vec::new();
    for _ in 0..n {
        let ty = *AttrType::ALL.choose(rng).expect("five types");
        if let Some(w) = tax.words(ty).choose(rng) {
            if !out.contains(w) {
                out.push(w.clone());
            }
        }
    }
    out
}

fn paint_raster(width: u32, height: u32, objects: &[(ObjectNode, f64)]) -> DepthRaster {
    // background recedes toward the top of the frame
    let mut values: Vec<f32> = (0..height)
        .flat_map(|y| {
            let d = 30.0 - 20.0 * f64::from(y) / f64::from(height.max(1));
            std::iter::repeat_n(d as f32, width as usize)
        })
        .collect();
    let mut order: Vec<&(ObjectNode, f64)> = objects.iter().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (o, d) in order {
        let mut put = |x: u32, y: u32| values[(y * width + x) as usize] = *d as f32;
        match &o.mask {
            Some(m) => m.pixels().for_each(|(x, y)| put(x, y)),
            None => {
                for y in o.bbox.y_min as u32..(o.bbox.y_max as u32).min(height) {
                    for x in o.bbox.x_min as u32..(o.bbox.x_max as u32).min(width) {
                        put(x, y);
                    }
                }
            }
        }
    }
    DepthRaster::new(width, height, values).expect("buffer matches dimensions")
}

/// One synthetic graph.
pub fn synth_graph<R: Rng + ?Sized>(id: &str, p: &SynthParams, tax: &Taxonomy, pools: &Pools, rng: &mut R) -> SceneGraph {
    let (w, h) = (range(rng, p.width), range(rng, p.height));
    let vocab = &pools.labels[..p.vocabulary.clamp(1, pools.labels.len())];
    let predicates = &pools.predicates[..pools.predicates.len().min(16)];
    let n = rng.random_range(p.objects.0..=p.objects.1.max(p.objects.0));
    let mut placed: Vec<(ObjectNode, f64)> = Vec::with_capacity(n);
    for i in 0..n {
        let bw = rng.random_range((w / 12).max(2)..=(w / 2).max(3));
        let bh = rng.random_range((h / 12).max(2)..=(h / 2).max(3));
        let x0 = rng.random_range(0..=w - bw);
        let y0 = rng.random_range(0..=h - bh);
        let bbox = BBox::new(f64::from(x0), f64::from(y0), f64::from(x0 + bw), f64::from(y0 + bh));
        let label = vocab.choose(rng).expect("vocabulary is non-empty");
        let mut node = ObjectNode::new(format!("{id}-o{i}"), label.clone(), bbox).with_attributes(attributes(tax, p.max_attributes, rng));
        if rng.random_bool(p.mask_probability.clamp(0.0, 1.0)) {
            node = node.with_mask(ellipse(w, h, &bbox));
        }
        let depth = f64::from(rng.random_range(100..=2000u32)) / 100.0;
        placed.push((node, depth));
    }
    let raster = match p.depth {
        DepthMode::Raster => Some(Arc::new(paint_raster(w, h, &placed))),
        _ => None,
    };
    let mut g = SceneGraph::new(ImageMeta::new(id, w, h));
    for (node, d) in placed {
        g.objects.push(match p.depth {
            DepthMode::Stored => node.with_depth(d),
            _ => node,
        });
    }
    if let Some(r) = raster {
        g.set_raster(Some(r));
    }
    if n >= 2 {
        let edges = (p.relation_density * n as f64).round() as usize;
        for _ in 0..edges {
            let a = rng.random_range(0..n);
            let b = (a + rng.random_range(1..n)) % n;
            let mut preds = vec![predicates.choose(rng).expect("predicates").clone()];
            if rng.random_bool(0.15) {
                preds.push(predicates.choose(rng).expect("predicates").clone());
            }
            preds.dedup();
            let (s, o) = (g.objects[a].id.clone(), g.objects[b].id.clone());
            g.push_relation(RelationEdge::new(s, o, preds));
        }
    }
    g
}

/// `n` graphs with ids `{prefix}000000`, ... Each graph depends only on
/// `(seed, index)`.
pub fn synth_corpus(n: usize, seed: u64, prefix: &str, p: &SynthParams) -> Vec<SceneGraph> {
    let tax = Taxonomy::builtin();
    let pools = Pools::builtin();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng(derive_seed(&[&seed.to_le_bytes(), &(i as u64).to_le_bytes()]));
            synth_graph(&format!("{prefix}{i:06}"), p, &tax, &pools, &mut r)
        })
        .collect()
}
