//! The augmented scene graph: objects with boxes, attributes, masks and depth,
//! plus directed relation edges between them.

mod depth;
mod io;
mod mask;
mod validate;

use std::sync::{Arc, OnceLock};

pub use depth::{median, object_depth, DepthError, DepthRaster};
pub use io::{
    parse_graph, read_corpus, read_corpus_str, to_canonical_line, write_corpus, write_corpus_with_rasters,
    GraphIoError,
    DEPTH_CONVENTION,
};
pub use mask::{nearest_pixel, point_in_mask, MaskEncoding, MaskError, SegMask};
pub use validate::{validate_graph, Severity, Violation};

#[derive(Debug, Clone, PartialEq)]
pub struct ImageMeta {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub source_uri: Option<String>,
}

impl ImageMeta {
    pub fn new(id: impl Into<String>, width: u32, height: u32) -> Self {
        ImageMeta {
            id: id.into(),
            width,
            height,
            source_uri: None,
        }
    }

    pub fn diagonal(&self) -> f64 {
        f64::from(self.width).hypot(f64::from(self.height))
    }
}

/// Corner-form box in pixel coordinates, origin at the top-left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub const fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        bbox_center(self)
    }

    pub fn dilate(&self, by: f64) -> BBox {
        BBox::new(
            self.x_min - by,
            self.y_min - by,
            self.x_max + by,
            self.y_max + by,
        )
    }

    pub fn contains_box(&self, other: &BBox) -> bool {
        other.x_min >= self.x_min
            && other.y_min >= self.y_min
            && other.x_max <= self.x_max
            && other.y_max <= self.y_max
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.x_min < other.x_max
            && other.x_min < self.x_max
            && self.y_min < other.y_max
            && other.y_min < self.y_max
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

pub fn bbox_center(bbox: &BBox) -> (f64, f64) {
    (
        (bbox.x_min + bbox.x_max) / 2.0,
        (bbox.y_min + bbox.y_max) / 2.0,
    )
}

/// Write-once depth cache. Never participates in equality.
#[derive(Debug, Clone, Default)]
pub(crate) struct DepthCache(pub(crate) OnceLock<f64>);

impl PartialEq for DepthCache {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectNode {
    pub id: String,
    pub label: String,
    pub bbox: BBox,
    pub attributes: Vec<String>,
    pub mask: Option<SegMask>,
    /// Canonical depth: larger is farther from the camera.
    pub depth: Option<f64>,
    pub(crate) depth_cache: DepthCache,
}

impl ObjectNode {
    pub fn new(id: impl Into<String>, label: impl Into<String>, bbox: BBox) -> Self {
        ObjectNode {
            id: id.into(),
            label: label.into(),
            bbox,
            attributes: Vec::new(),
            mask: None,
            depth: None,
            depth_cache: DepthCache::default(),
        }
    }

    pub fn with_attributes<S: Into<String>>(mut self, attrs: impl IntoIterator<Item = S>) -> Self {
        self.attributes = attrs.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_mask(mut self, mask: SegMask) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn with_depth(mut self, depth: f64) -> Self {
        self.depth = Some(depth);
        self
    }

    pub fn has_attribute(&self, attr: &str) -> bool {
        self.attributes.iter().any(|a| a == attr)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationEdge {
    pub subject: String,
    pub object: String,
    pub predicates: Vec<String>,
}

impl RelationEdge {
    pub fn new<S: Into<String>>(
        subject: impl Into<String>,
        object: impl Into<String>,
        predicates: impl IntoIterator<Item = S>,
    ) -> Self {
        RelationEdge {
            subject: subject.into(),
            object: object.into(),
            predicates: predicates.into_iter().map(Into::into).collect(),
        }
    }
}

/// An augmented scene graph. Immutable once handed to generators; the only
/// interior mutability is the write-once per-object depth cache.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    pub image: ImageMeta,
    pub objects: Vec<ObjectNode>,
    pub relations: Vec<RelationEdge>,
    pub dense_depth_ref: Option<String>,
    /// Name of the conversion applied to backend depth, when one was applied.
    pub depth_conversion: Option<String>,
    raster: Option<Arc<DepthRaster>>,
}

impl SceneGraph {
    pub fn new(image: ImageMeta) -> Self {
        SceneGraph {
            image,
            objects: Vec::new(),
            relations: Vec::new(),
            dense_depth_ref: None,
            depth_conversion: None,
            raster: None,
        }
    }

    pub fn with_object(mut self, object: ObjectNode) -> Self {
        self.objects.push(object);
        self
    }

    /// Adds an edge, merging predicates into an existing edge for the same
    /// ordered pair.
    pub fn with_relation(mut self, edge: RelationEdge) -> Self {
        self.push_relation(edge);
        self
    }

    pub fn push_relation(&mut self, edge: RelationEdge) {
        if let Some(existing) = self
            .relations
            .iter_mut()
            .find(|e| e.subject == edge.subject && e.object == edge.object)
        {
            for p in edge.predicates {
                if !existing.predicates.contains(&p) {
                    existing.predicates.push(p);
                }
            }
        } else {
            let mut edge = edge;
            let mut seen = Vec::with_capacity(edge.predicates.len());
            edge.predicates.retain(|p| {
                if seen.contains(p) {
                    false
                } else {
                    seen.push(p.clone());
                    true
                }
            });
            self.relations.push(edge);
        }
    }

    pub fn with_raster(mut self, raster: Arc<DepthRaster>) -> Self {
        self.raster = Some(raster);
        self
    }

    pub fn set_raster(&mut self, raster: Option<Arc<DepthRaster>>) {
        self.raster = raster;
    }

    pub fn raster(&self) -> Option<&DepthRaster> {
        self.raster.as_deref()
    }

    pub fn raster_arc(&self) -> Option<&Arc<DepthRaster>> {
        self.raster.as_ref()
    }

    pub fn object(&self, id: &str) -> Option<&ObjectNode> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn edge(&self, subject: &str, object: &str) -> Option<&RelationEdge> {
        self.relations
            .iter()
            .find(|e| e.subject == subject && e.object == object)
    }
}
