//! Client side of the annotation backend protocol.
//!
//! A backend answers one JSON request per stage. Requests and responses are
//! single JSON objects; over a subprocess pipe each is one line.
//!
//! ```text
//! request  {"id": 7, "stage": "attributes", "image_ref": "img1.jpg",
//!           "crop": [10.0, 20.0, 110.0, 70.0],
//!           "params": {"label": "cup", "prompt": "<image> cup"}}
//! response {"id": 7, "stage": "attributes", "payload": {"attributes": ["red"]}}
//! ```
//!
//! | stage        | params                                     | payload                                         |
//! |--------------|--------------------------------------------|-------------------------------------------------|
//! | `detect`     | `{}`                                       | `{"objects": [{"bbox": [x0,y0,x1,y1], "label"}]}` |
//! | `segment`    | `{"bboxes": [[x0,y0,x1,y1], ...], "width", "height"}` | `{"masks": [rle or polygon or null, ...]}` |
//! | `attributes` | `{"label", "prompt"}` with `crop`          | `{"attributes": [..]}`                          |
//! | `relation`   | `{"subject", "object", "bbox_a", "bbox_b", "mask_a", "mask_b"}` | `{"relation": "free text"}` |
//! | `depth`      | `{"width", "height"}`                      | `{"width", "height", "values": [..], "convention"}` |
//!
//! Depth `convention` is `"inverse"` (larger is closer) or
//! `"farther_is_larger"`. Masks use the canonical graph encodings.

mod backend;
mod ground;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::graph::{
    validate_graph, BBox, DepthRaster, ImageMeta, MaskEncoding, ObjectNode, RelationEdge,
    SceneGraph, SegMask, Severity,
};
use crate::ingest::{FilterParams, SkipRecord};
use crate::lexicon::normalize_text;

pub use backend::{parse_backend, Backend, BackendError, MockBackend, MockScript, SubprocessBackend};
pub use ground::{ground_relation, GroundError, RelationLibrary, Scorer, TokenF1};

/// Name recorded on graphs whose depth was converted from inverse depth.
pub const INVERSE_DEPTH_CONVERSION: &str = "max_normalized_inversion";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Detect,
    Segment,
    Attributes,
    Relation,
    Depth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    #[serde(default)]
    pub id: u64,
    pub stage: Stage,
    pub image_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<[f64; 4]>,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    #[serde(default)]
    pub id: u64,
    pub stage: Stage,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: [f64; 4],
    pub label: String,
}

#[derive(Debug, Deserialize)]
struct DetectPayload {
    objects: Vec<Detection>,
}

#[derive(Debug, Deserialize)]
struct SegmentPayload {
    masks: Vec<Option<MaskEncoding>>,
}

#[derive(Debug, Deserialize)]
struct AttributesPayload {
    attributes: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RelationPayload {
    relation: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthConvention {
    Inverse,
    FartherIsLarger,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DepthPayload {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f32>,
    pub convention: DepthConvention,
}

/// An image to annotate. Dimensions come from the image list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInput {
    pub id: String,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uri: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotateConfig {
    /// Pairs are sent to the relation stage when their box centres are
    /// within `gate` image diagonals or their boxes overlap. Use
    /// `f64::INFINITY` to query every ordered pair.
    pub gate: f64,
    pub filter: FilterParams,
}

impl Default for AnnotateConfig {
    fn default() -> Self {
        AnnotateConfig {
            gate: 0.75,
            filter: FilterParams::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AnnotateError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{image}: assembled graph fails validation: {message}")]
    Invalid { image: String, message: String },
}

fn call<T: for<'de> Deserialize<'de>>(backend: &mut dyn Backend, req: Request) -> Result<T, BackendError> {
    let stage = req.stage;
    let resp = backend.call(&req)?;
    if resp.stage != stage {
        return Err(BackendError::Malformed {
            stage,
            detail: format!("response for stage {:?}", resp.stage),
        });
    }
    serde_json::from_value(resp.payload).map_err(|e| BackendError::Malformed {
        stage,
        detail: e.to_string(),
    })
}

fn degrade<T>(image: &str, stage: Stage, r: Result<T, BackendError>) -> Option<T> {
    r.map_err(|e| log::warn!("{image}: {stage:?} stage failed, continuing without it: {e}"))
        .ok()
}

fn pair_gated(a: &BBox, b: &BBox, gate: f64, diagonal: f64) -> bool {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    a.intersects(b) || (ax - bx).hypot(ay - by) <= gate * diagonal
}

/// Inverse depth to canonical depth: `1 - v / max(v)`.
pub fn invert_depth(values: &[f32]) -> Vec<f32> {
    let max = values.iter().copied().fold(0.0f32, f32::max);
    if max <= 0.0 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| 1.0 - v / max).collect()
}

/// Runs the five stages on one image. Only a failed detection aborts;
/// other stage failures leave the corresponding fields empty.
pub fn annotate_image(
    img: &ImageInput,
    backend: &mut dyn Backend,
    library: &RelationLibrary,
    scorer: &dyn Scorer,
    cfg: &AnnotateConfig,
) -> Result<SceneGraph, AnnotateError> {
    let (w, h) = (img.width, img.height);
    let image_ref = img.uri.clone().unwrap_or_else(|| img.id.clone());
    let req = |stage: Stage, crop: Option<[f64; 4]>, params: Value| Request {
        id: 0,
        stage,
        image_ref: image_ref.clone(),
        crop,
        params,
    };
    let mut meta = ImageMeta::new(img.id.clone(), w, h);
    meta.source_uri = img.uri.clone();
    let mut g = SceneGraph::new(meta);

    let detected: DetectPayload = call(backend, req(Stage::Detect, None, json!({})))?;
    for d in detected.objects {
        let [x0, y0, x1, y1] = d.bbox;
        let (fw, fh) = (f64::from(w), f64::from(h));
        let b = BBox::new(x0.clamp(0.0, fw), y0.clamp(0.0, fh), x1.clamp(0.0, fw), y1.clamp(0.0, fh));
        let label = normalize_text(&d.label);
        if b.x_max > b.x_min && b.y_max > b.y_min && !label.is_empty() {
            let id = format!("o{}", g.objects.len());
            g.objects.push(ObjectNode::new(id, label, b));
        }
    }
    if g.objects.is_empty() {
        return Ok(g);
    }

    let boxes: Vec<[f64; 4]> = g.objects.iter().map(|o| o.bbox.as_array()).collect();
    let seg: Option<SegmentPayload> = degrade(&img.id, Stage::Segment, call(backend, req(Stage::Segment, None, json!({ "bboxes": boxes, "width": w, "height": h }))));
    if let Some(seg) = seg {
        for (o, enc) in g.objects.iter_mut().zip(seg.masks) {
            if let Some(enc) = enc {
                o.mask = Some(SegMask::new(enc, w, h));
            }
        }
    }
    // drop masks the validator would reject, one object at a time
    for i in 0..g.objects.len() {
        if g.objects[i].mask.is_none() {
            continue;
        }
        let id = g.objects[i].id.clone();
        let bad = validate_graph(&g)
            .iter()
            .any(|v| v.severity == Severity::Error && v.object_id == id);
        if bad {
            log::warn!("{}: dropping invalid mask of {id}", img.id);
            g.objects[i].mask = None;
        }
    }

    for o in g.objects.iter_mut() {
        let params = json!({ "label": o.label, "prompt": format!("<image> {}", o.label) });
        let got: Option<AttributesPayload> =
            degrade(&img.id, Stage::Attributes, call(backend, req(Stage::Attributes, Some(o.bbox.as_array()), params)));
        let mut attrs: Vec<String> = Vec::new();
        for a in got.map(|p| p.attributes).unwrap_or_default() {
            let a = normalize_text(&a);
            if !a.is_empty() && !attrs.contains(&a) {
                attrs.push(a);
            }
        }
        o.attributes = attrs;
    }

    let diagonal = g.image.diagonal();
    let n = g.objects.len();
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (&g.objects[i], &g.objects[j]);
            if i == j || !pair_gated(&a.bbox, &b.bbox, cfg.gate, diagonal) {
                continue;
            }
            let params = json!({
                "subject": a.id, "object": b.id,
                "bbox_a": a.bbox.as_array(), "bbox_b": b.bbox.as_array(),
                "mask_a": a.mask.as_ref().map(SegMask::encoding),
                "mask_b": b.mask.as_ref().map(SegMask::encoding),
            });
            let got: Option<RelationPayload> =
                degrade(&img.id, Stage::Relation, call(backend, req(Stage::Relation, None, params)));
            let Some(raw) = got.map(|p| p.relation) else { continue };
            if normalize_text(&raw).is_empty() {
                continue;
            }
            match ground_relation(&raw, library, scorer) {
                Ok(p) => {
                    let edge = RelationEdge::new(a.id.clone(), b.id.clone(), [p]);
                    g.push_relation(edge);
                }
                Err(e) => log::warn!("{}: relation not grounded: {e}", img.id),
            }
        }
    }

    let depth: Option<DepthPayload> = degrade(&img.id, Stage::Depth, call(backend, req(Stage::Depth, None, json!({ "width": w, "height": h }))));
    if let Some(d) = depth {
        let values = match d.convention {
            DepthConvention::Inverse => {
                g.depth_conversion = Some(INVERSE_DEPTH_CONVERSION.to_string());
                invert_depth(&d.values)
            }
            DepthConvention::FartherIsLarger => d.values,
        };
        match DepthRaster::new(d.width, d.height, values) {
            Ok(r) if (r.width(), r.height()) == (w, h) => g.set_raster(Some(Arc::new(r))),
            Ok(r) => log::warn!("{}: depth raster is {}x{}, image is {w}x{h}", img.id, r.width(), r.height()),
            Err(e) => log::warn!("{}: unusable depth raster: {e}", img.id),
        }
        if g.raster().is_none() {
            g.depth_conversion = None;
        }
    }

    let errors: Vec<String> = validate_graph(&g)
        .into_iter()
        .filter(|v| v.severity == Severity::Error)
        .map(|v| v.message)
        .collect();
    if !errors.is_empty() {
        return Err(AnnotateError::Invalid {
            image: img.id.clone(),
            message: errors.join("; "),
        });
    }
    Ok(g)
}

/// Annotates a list of images, applying the resolution filter before and
/// the object-count filter after annotation. Per-image failures become skip
/// records. Output is sorted by image id.
pub fn run_batch(
    images: &[ImageInput],
    backend: &mut dyn Backend,
    library: &RelationLibrary,
    scorer: &dyn Scorer,
    cfg: &AnnotateConfig,
) -> (Vec<SceneGraph>, Vec<SkipRecord>) {
    let mut graphs = Vec::new();
    let mut skips = Vec::new();
    let mut sorted: Vec<&ImageInput> = images.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let f = &cfg.filter;
    for img in sorted {
        let skip = |reason: String| SkipRecord {
            image_id: img.id.clone(),
            object_id: None,
            reason,
        };
        if img.width < f.min_width || img.height < f.min_height {
            skips.push(skip(format!("resolution {}x{} below {}x{}", img.width, img.height, f.min_width, f.min_height)));
            continue;
        }
        match annotate_image(img, backend, library, scorer, cfg) {
            Ok(g) if g.objects.len() > f.min_objects => graphs.push(g),
            Ok(g) => skips.push(skip(format!("{} objects, need more than {}", g.objects.len(), f.min_objects))),
            Err(e) => skips.push(skip(e.to_string())),
        }
    }
    (graphs, skips)
}

/// Reads an image list: JSONL of `{"id", "width", "height", "uri"?}`.
pub fn read_image_list(text: &str) -> Result<Vec<ImageInput>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Per-stage call counts, for checking a run against the expected sequence.
pub fn stage_counts(calls: &[(String, Stage)]) -> BTreeMap<Stage, usize> {
    let mut m = BTreeMap::new();
    for (_, s) in calls {
        *m.entry(*s).or_default() += 1;
    }
    m
}
