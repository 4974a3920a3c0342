use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::SceneGraph;

/// Fraction of the image diagonal a mask may spill outside its object's box.
pub const MASK_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// One broken invariant. `object_id` is empty for image-level findings and is
/// the subject id for relation findings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub severity: Severity,
    pub object_id: String,
    pub field: String,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.severity, self.path, self.message)
    }
}

struct Report(Vec<Violation>);

impl Report {
    fn push(&mut self, object_id: &str, field: &str, path: String, message: String) {
        self.0.push(Violation {
            severity: Severity::Error,
            object_id: object_id.to_string(),
            field: field.to_string(),
            path,
            message,
        });
    }
}

fn is_normalized(s: &str) -> bool {
    !s.is_empty() && s == s.to_lowercase() && s.trim() == s
}

/// Checks every structural invariant of an augmented scene graph. An empty
/// result means the graph is well-formed. Findings are sorted by
/// `(object_id, field, path)`.
pub fn validate_graph(graph: &SceneGraph) -> Vec<Violation> {
    let mut r = Report(Vec::new());
    let img = &graph.image;
    let (w, h) = (f64::from(img.width), f64::from(img.height));

    if img.id.is_empty() {
        r.push("", "image", "image.id".into(), "empty image id".into());
    }
    if img.width < 1 || img.height < 1 {
        r.push(
            "",
            "image",
            "image".into(),
            format!("non-positive size {}x{}", img.width, img.height),
        );
    }
    if let Some(raster) = graph.raster() {
        if raster.width() != img.width || raster.height() != img.height {
            r.push(
                "",
                "image",
                "dense_depth".into(),
                format!(
                    "raster {}x{} does not match image {}x{}",
                    raster.width(),
                    raster.height(),
                    img.width,
                    img.height
                ),
            );
        }
    }

    let mut ids: HashMap<&str, usize> = HashMap::new();
    for (i, o) in graph.objects.iter().enumerate() {
        let path = format!("objects[{i}]");
        if let Some(prev) = ids.insert(o.id.as_str(), i) {
            r.push(&o.id, "id", format!("{path}.id"), format!("duplicate of objects[{prev}]"));
        }
        if o.id.is_empty() {
            r.push(&o.id, "id", format!("{path}.id"), "empty object id".into());
        }
        if !is_normalized(&o.label) {
            r.push(&o.id, "label", format!("{path}.label"), format!("label {:?} is empty or not lowercase", o.label));
        }
        let b = &o.bbox;
        let finite = b.as_array().iter().all(|v| v.is_finite());
        if !finite
            || b.x_min < 0.0
            || b.y_min < 0.0
            || b.x_min >= b.x_max
            || b.y_min >= b.y_max
            || b.x_max > w
            || b.y_max > h
        {
            r.push(
                &o.id,
                "bbox",
                format!("{path}.bbox"),
                format!("bbox {:?} outside {}x{} or degenerate", b.as_array(), img.width, img.height),
            );
        }
        let mut seen = HashSet::new();
        for (k, a) in o.attributes.iter().enumerate() {
            if !is_normalized(a) {
                r.push(&o.id, "attributes", format!("{path}.attributes[{k}]"), format!("attribute {a:?} is empty or not lowercase"));
            }
            if !seen.insert(a) {
                r.push(&o.id, "attributes", format!("{path}.attributes[{k}]"), format!("duplicate attribute {a:?}"));
            }
        }
        if let Some(d) = o.depth {
            if !d.is_finite() {
                r.push(&o.id, "depth", format!("{path}.depth"), "depth is not finite".into());
            }
        }
        if let Some(mask) = &o.mask {
            match mask.error() {
                Some(e) => r.push(&o.id, "mask", format!("{path}.mask"), e.to_string()),
                None if mask.area() == 0 => {
                    r.push(&o.id, "mask", format!("{path}.mask"), "empty mask".into())
                }
                None => {
                    let slack = MASK_SLACK * img.diagonal();
                    if let Some(mb) = mask.bounds() {
                        if finite && !b.dilate(slack).contains_box(&mb) {
                            r.push(
                                &o.id,
                                "mask",
                                format!("{path}.mask"),
                                format!("mask bounds {:?} exceed bbox by more than {slack:.2}px", mb.as_array()),
                            );
                        }
                    }
                }
            }
        }
    }

    let mut pairs = HashSet::new();
    for (i, e) in graph.relations.iter().enumerate() {
        let path = format!("relations[{i}]");
        for (end, id) in [("subject", &e.subject), ("object", &e.object)] {
            if !ids.contains_key(id.as_str()) {
                r.push(&e.subject, "relations", format!("{path}.{end}"), format!("unknown object {id:?}"));
            }
        }
        if e.subject == e.object {
            r.push(&e.subject, "relations", path.clone(), "self loop".into());
        }
        if e.predicates.is_empty() {
            r.push(&e.subject, "relations", format!("{path}.predicates"), "no predicates".into());
        }
        let mut seen = HashSet::new();
        for (k, p) in e.predicates.iter().enumerate() {
            if !is_normalized(p) {
                r.push(&e.subject, "relations", format!("{path}.predicates[{k}]"), format!("predicate {p:?} is empty or not lowercase"));
            }
            if !seen.insert(p) {
                r.push(&e.subject, "relations", format!("{path}.predicates[{k}]"), format!("duplicate predicate {p:?}"));
            }
        }
        if !pairs.insert((&e.subject, &e.object)) {
            r.push(&e.subject, "relations", path, format!("second edge {} -> {}", e.subject, e.object));
        }
    }

    let mut out = r.0;
    out.sort_by(|a, b| {
        (&a.object_id, &a.field, &a.path).cmp(&(&b.object_id, &b.field, &b.path))
    });
    out
}
