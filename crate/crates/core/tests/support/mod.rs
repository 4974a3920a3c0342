//! Hand-built fixture graphs shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use sgqa::graph::{BBox, DepthRaster, ImageMeta, ObjectNode, RelationEdge, SceneGraph, SegMask};
use sgqa::qgen::{Draft, GenContext, Generator};
use sgqa::seed::rng;

struct Obj {
    id: &'static str,
    label: &'static str,
    bbox: [u32; 4],
    attrs: &'static [&'static str],
    depth: f64,
}

fn build(id: &str, width: u32, height: u32, objs: &[Obj], edges: &[(&str, &str, &str)]) -> SceneGraph {
    let mut g = SceneGraph::new(ImageMeta::new(id, width, height));
    for o in objs {
        let [x0, y0, x1, y1] = o.bbox;
        let bbox = BBox::new(x0.into(), y0.into(), x1.into(), y1.into());
        g = g.with_object(
            ObjectNode::new(o.id, o.label, bbox)
                .with_attributes(o.attrs.iter().copied())
                .with_mask(SegMask::rectangle(width, height, x0, y0, x1, y1))
                .with_depth(o.depth),
        );
    }
    for (s, p, o) in edges {
        g = g.with_relation(RelationEdge::new(*s, *o, [*p]));
    }
    // background recedes upward; nearer objects are painted last
    let mut order: Vec<&Obj> = objs.iter().collect();
    order.sort_by(|a, b| b.depth.total_cmp(&a.depth));
    let raster = DepthRaster::from_fn(width, height, |x, y| {
        let mut d = 30.0 - 20.0 * y as f32 / height as f32;
        for o in &order {
            let [x0, y0, x1, y1] = o.bbox;
            if (x0..x1).contains(&x) && (y0..y1).contains(&y) {
                d = o.depth as f32;
            }
        }
        d
    });
    g.with_raster(Arc::new(raster))
}

/// A table with three cups and two plates under a lamp, with a chair.
pub fn kitchen() -> SceneGraph {
    build(
        "kitchen",
        640,
        480,
        &[
            Obj { id: "c1", label: "cup", bbox: [40, 330, 90, 390], attrs: &["white", "round"], depth: 2.0 },
            Obj { id: "c2", label: "cup", bbox: [300, 250, 340, 300], attrs: &["red"], depth: 5.0 },
            Obj { id: "c3", label: "cup", bbox: [560, 300, 610, 360], attrs: &["blue", "ceramic"], depth: 3.0 },
            Obj { id: "p1", label: "plate", bbox: [180, 400, 280, 450], attrs: &["white"], depth: 1.5 },
            Obj { id: "p2", label: "plate", bbox: [400, 380, 500, 430], attrs: &["green"], depth: 1.8 },
            Obj { id: "t", label: "table", bbox: [10, 200, 630, 475], attrs: &["wooden", "brown"], depth: 4.0 },
            Obj { id: "l", label: "lamp", bbox: [280, 10, 360, 120], attrs: &["black", "tall"], depth: 9.0 },
            Obj { id: "ch", label: "chair", bbox: [520, 120, 620, 260], attrs: &["wooden"], depth: 7.0 },
        ],
        &[
            ("c1", "on", "t"),
            ("c2", "on", "t"),
            ("c3", "on", "t"),
            ("p1", "on", "t"),
            ("p2", "on", "t"),
            ("l", "above", "t"),
            ("c2", "next to", "p2"),
            ("ch", "next to", "t"),
        ],
    )
}

/// Two cars and a row of trees; a person holds a cup on a plate and a dog waits.
pub fn street() -> SceneGraph {
    build(
        "street",
        800,
        600,
        &[
            Obj { id: "tr1", label: "tree", bbox: [20, 40, 180, 360], attrs: &["green", "tall"], depth: 15.0 },
            Obj { id: "tr2", label: "tree", bbox: [300, 30, 420, 300], attrs: &["green"], depth: 18.0 },
            Obj { id: "tr3", label: "tree", bbox: [620, 50, 780, 340], attrs: &["green", "leafy"], depth: 16.0 },
            Obj { id: "car1", label: "car", bbox: [60, 380, 330, 520], attrs: &["red", "parked"], depth: 6.0 },
            Obj { id: "car2", label: "car", bbox: [480, 360, 760, 500], attrs: &["blue"], depth: 8.0 },
            Obj { id: "pe1", label: "person", bbox: [380, 300, 450, 580], attrs: &["standing"], depth: 3.0 },
            Obj { id: "cup", label: "cup", bbox: [440, 400, 470, 440], attrs: &["white"], depth: 2.5 },
            Obj { id: "pl", label: "plate", bbox: [430, 440, 480, 455], attrs: &["white"], depth: 2.4 },
            Obj { id: "dog", label: "dog", bbox: [200, 500, 300, 590], attrs: &["brown", "small"], depth: 4.5 },
        ],
        &[
            ("pe1", "holding", "cup"),
            ("cup", "on", "pl"),
            ("dog", "near", "pe1"),
            ("pe1", "next to", "car1"),
            ("car2", "behind", "pe1"),
            ("tr2", "behind", "car1"),
        ],
    )
}

/// A small canonical corpus: the two scenes above.
pub fn fixture() -> Vec<SceneGraph> {
    vec![kitchen(), street()]
}

/// Runs `g` with seeds `0..tries` over `graphs` and returns the first
/// emitted draft together with its seed.
pub fn first_draft(g: Generator, ctx: &GenContext, graphs: &[&SceneGraph], tries: u64) -> Option<(u64, Draft)> {
    (0..tries).find_map(|s| {
        let out = g.run(ctx, graphs, &mut rng(s)).expect("arity is right");
        out.qa().cloned().map(|d| (s, d))
    })
}

/// Writes a Visual Genome style release of `n` synthetic images into `dir`
/// and returns the source graphs in image-id order. Image `i` gets VG id
/// `i + 1` and its objects ids `(i + 1) * 100 + j`. Labels and attributes
/// carry the casing, spacing and spelling noise the parser normalizes.
pub fn write_vg_excerpt(dir: &std::path::Path, n: usize, seed: u64) -> Vec<SceneGraph> {
    use serde_json::{json, Value};
    use sgqa::synth::{synth_corpus, SynthParams};

    let graphs = synth_corpus(n, seed, "vg", &SynthParams::default());
    let noisy = |s: &str, k: usize| match k % 5 {
        0 => s.to_uppercase(),
        1 => format!(" {s} "),
        2 => s.replace("gray", "grey"),
        _ => s.to_string(),
    };
    let (mut images, mut objects, mut attributes, mut relationships) = (vec![], vec![], vec![], vec![]);
    for (i, g) in graphs.iter().enumerate() {
        let image_id = i as u64 + 1;
        let oid = |j: usize| image_id * 100 + j as u64;
        let index = |id: &str| g.object_index(id).expect("edge endpoints exist");
        images.push(json!({"image_id": image_id, "width": g.image.width, "height": g.image.height}));
        let objs: Vec<Value> = g
            .objects
            .iter()
            .enumerate()
            .map(|(j, o)| {
                let b = &o.bbox;
                json!({"object_id": oid(j), "x": b.x_min, "y": b.y_min, "w": b.x_max - b.x_min,
                       "h": b.y_max - b.y_min, "names": [noisy(&o.label, j)]})
            })
            .collect();
        objects.push(json!({"image_id": image_id, "objects": objs}));
        let attrs: Vec<Value> = g
            .objects
            .iter()
            .enumerate()
            .map(|(j, o)| {
                let a: Vec<String> = o.attributes.iter().enumerate().map(|(k, a)| noisy(a, j + k)).collect();
                json!({"object_id": oid(j), "attributes": a})
            })
            .collect();
        attributes.push(json!({"image_id": image_id, "attributes": attrs}));
        let rels: Vec<Value> = g
            .relations
            .iter()
            .flat_map(|e| e.predicates.iter().map(move |p| (e, p)))
            .enumerate()
            .map(|(k, (e, p))| {
                json!({"relationship_id": k, "predicate": noisy(p, k),
                       "subject": {"object_id": oid(index(&e.subject))},
                       "object": {"object_id": oid(index(&e.object))}})
            })
            .collect();
        relationships.push(json!({"image_id": image_id, "relationships": rels}));
    }
    for (name, v) in [
        ("image_data.json", images),
        ("objects.json", objects),
        ("attributes.json", attributes),
        ("relationships.json", relationships),
    ] {
        std::fs::write(dir.join(name), serde_json::to_string(&v).unwrap()).unwrap();
    }
    graphs
}

/// Adds the masks and per-object depths of the VG source graphs to the
/// parsed graphs, the way the annotation pipeline augments a manual graph.
pub fn augment_vg(parsed: &[SceneGraph], sources: &[SceneGraph]) -> Vec<SceneGraph> {
    use std::collections::BTreeMap;

    parsed
        .iter()
        .map(|g| {
            let i: usize = g.image.id.parse::<usize>().expect("numeric VG id") - 1;
            let src = &sources[i];
            let vg_index = |o: &ObjectNode| o.id.parse::<usize>().expect("numeric VG object id") % 100;
            let masks: BTreeMap<String, SegMask> = g
                .objects
                .iter()
                .filter_map(|o| Some((o.id.clone(), src.objects[vg_index(o)].mask.clone()?)))
                .collect();
            let mut out = sgqa::ingest::attach_augmentations(g, None, masks).expect("dimensions agree");
            for o in &mut out.objects {
                o.depth = src.objects[vg_index(o)].depth;
            }
            out
        })
        .collect()
}
