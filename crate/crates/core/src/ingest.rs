//! Loading external scene-graph sources into canonical graphs.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::graph::{BBox, DepthRaster, ImageMeta, ObjectNode, RelationEdge, SceneGraph, SegMask};
use crate::lexicon::Normalization;
use crate::seed::sha256_hex;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{file}: malformed JSON at byte {offset}: {message}")]
    Parse {
        file: PathBuf,
        offset: usize,
        message: String,
    },
    #[error("{file}: missing or mistyped field {field}")]
    Schema { file: PathBuf, field: String },
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
}

/// Why an image or object was left out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<String>,
    pub reason: String,
}

/// The four files of a Visual Genome release.
#[derive(Debug, Clone)]
pub struct VgFiles {
    pub objects: PathBuf,
    pub attributes: PathBuf,
    pub relationships: PathBuf,
    pub image_data: PathBuf,
}

impl VgFiles {
    /// The standard file names inside one directory.
    pub fn in_dir(dir: &Path) -> Self {
        VgFiles {
            objects: dir.join("objects.json"),
            attributes: dir.join("attributes.json"),
            relationships: dir.join("relationships.json"),
            image_data: dir.join("image_data.json"),
        }
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let before: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    before + column.saturating_sub(1)
}

fn read_json(path: &Path) -> Result<Value, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::Io(path.to_path_buf(), e))?;
    serde_json::from_str(&text).map_err(|e| IngestError::Parse {
        file: path.to_path_buf(),
        offset: byte_offset(&text, e.line(), e.column()),
        message: e.to_string(),
    })
}

struct Doc<'a> {
    file: &'a Path,
}

impl Doc<'_> {
    fn missing(&self, field: String) -> IngestError {
        IngestError::Schema {
            file: self.file.to_path_buf(),
            field,
        }
    }

    fn array<'v>(&self, v: &'v Value, path: &str) -> Result<&'v Vec<Value>, IngestError> {
        v.as_array().ok_or_else(|| self.missing(path.to_string()))
    }

    fn get<'v>(&self, v: &'v Value, key: &str, path: &str) -> Result<&'v Value, IngestError> {
        v.get(key).ok_or_else(|| self.missing(format!("{path}.{key}")))
    }

    /// An id that may be written as a number or a string.
    fn id(&self, v: &Value, keys: &[&str], path: &str) -> Result<String, IngestError> {
        for k in keys {
            match v.get(*k) {
                Some(Value::Number(n)) => return Ok(n.to_string()),
                Some(Value::String(s)) => return Ok(s.clone()),
                _ => {}
            }
        }
        Err(self.missing(format!("{path}.{}", keys[0])))
    }

    fn num(&self, v: &Value, key: &str, path: &str) -> Result<f64, IngestError> {
        self.get(v, key, path)?
            .as_f64()
            .ok_or_else(|| self.missing(format!("{path}.{key}")))
    }

    fn strings(&self, v: &Value, key: &str, path: &str) -> Result<Vec<String>, IngestError> {
        match v.get(key) {
            None | Some(Value::Null) => Ok(Vec::new()),
            Some(Value::Array(a)) => a
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    s.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| self.missing(format!("{path}.{key}[{i}]")))
                })
                .collect(),
            Some(_) => Err(self.missing(format!("{path}.{key}"))),
        }
    }
}

struct RawObject {
    id: String,
    name: String,
    xywh: [f64; 4],
}

/// Per-image entries of a VG file, keyed by image id.
fn per_image<'v>(doc: &Doc, root: &'v Value, list_key: &str) -> Result<BTreeMap<String, &'v Vec<Value>>, IngestError> {
    let mut out = BTreeMap::new();
    for (i, entry) in doc.array(root, "$")?.iter().enumerate() {
        let path = format!("[{i}]");
        let id = doc.id(entry, &["image_id", "id"], &path)?;
        let list = doc.array(doc.get(entry, list_key, &path)?, &format!("{path}.{list_key}"))?;
        out.insert(id, list);
    }
    Ok(out)
}

fn object_name(doc: &Doc, o: &Value, path: &str) -> Result<String, IngestError> {
    let names = doc.strings(o, "names", path)?;
    if let Some(n) = names.into_iter().next() {
        return Ok(n);
    }
    o.get("name")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| doc.missing(format!("{path}.names")))
}

/// Parses a Visual Genome release into canonical graphs sorted by image id.
/// Labels, attributes and predicates pass through `norm`. Objects whose box
/// is empty after clipping to the image, and edges touching them, are
/// dropped and recorded in the returned skip log.
pub fn parse_visual_genome(
    files: &VgFiles,
    norm: &Normalization,
) -> Result<(Vec<SceneGraph>, Vec<SkipRecord>), IngestError> {
    let meta_doc = Doc { file: &files.image_data };
    let meta_root = read_json(&files.image_data)?;
    let mut metas: HashMap<String, ImageMeta> = HashMap::new();
    for (i, m) in meta_doc.array(&meta_root, "$")?.iter().enumerate() {
        let path = format!("[{i}]");
        let id = meta_doc.id(m, &["image_id", "id"], &path)?;
        let width = meta_doc.num(m, "width", &path)? as u32;
        let height = meta_doc.num(m, "height", &path)? as u32;
        let mut meta = ImageMeta::new(id.clone(), width, height);
        meta.source_uri = m.get("url").and_then(Value::as_str).map(str::to_string);
        metas.insert(id, meta);
    }

    let obj_doc = Doc { file: &files.objects };
    let obj_root = read_json(&files.objects)?;
    let objects = per_image(&obj_doc, &obj_root, "objects")?;

    let attr_doc = Doc { file: &files.attributes };
    let attr_root = read_json(&files.attributes)?;
    let attributes = per_image(&attr_doc, &attr_root, "attributes")?;

    let rel_doc = Doc { file: &files.relationships };
    let rel_root = read_json(&files.relationships)?;
    let relationships = per_image(&rel_doc, &rel_root, "relationships")?;

    let mut graphs = Vec::new();
    let mut skips = Vec::new();
    for (image_id, objs) in &objects {
        let Some(meta) = metas.get(image_id) else {
            skips.push(SkipRecord {
                image_id: image_id.clone(),
                object_id: None,
                reason: "no image metadata".into(),
            });
            continue;
        };
        let (w, h) = (f64::from(meta.width), f64::from(meta.height));
        let mut raw = Vec::new();
        for (j, o) in objs.iter().enumerate() {
            let path = format!("[{image_id}].objects[{j}]");
            raw.push(RawObject {
                id: obj_doc.id(o, &["object_id", "id"], &path)?,
                name: object_name(&obj_doc, o, &path)?,
                xywh: [
                    obj_doc.num(o, "x", &path)?,
                    obj_doc.num(o, "y", &path)?,
                    obj_doc.num(o, "w", &path)?,
                    obj_doc.num(o, "h", &path)?,
                ],
            });
        }
        let mut attrs_of: HashMap<String, Vec<String>> = HashMap::new();
        if let Some(list) = attributes.get(image_id) {
            for (j, a) in list.iter().enumerate() {
                let path = format!("[{image_id}].attributes[{j}]");
                let id = attr_doc.id(a, &["object_id", "id"], &path)?;
                attrs_of.entry(id).or_default().extend(attr_doc.strings(a, "attributes", &path)?);
            }
        }

        let mut graph = SceneGraph::new(meta.clone());
        for r in raw {
            let skip = |reason: &str| SkipRecord {
                image_id: image_id.clone(),
                object_id: Some(r.id.clone()),
                reason: reason.to_string(),
            };
            if graph.object(&r.id).is_some() {
                skips.push(skip("duplicate object id"));
                continue;
            }
            let [x, y, bw, bh] = r.xywh;
            let b = BBox::new(x.clamp(0.0, w), y.clamp(0.0, h), (x + bw).clamp(0.0, w), (y + bh).clamp(0.0, h));
            if !(b.x_max > b.x_min && b.y_max > b.y_min) {
                skips.push(skip("zero-area box"));
                continue;
            }
            let label = norm.apply(&r.name);
            if label.is_empty() {
                skips.push(skip("empty label"));
                continue;
            }
            let mut attrs: Vec<String> = Vec::new();
            for a in attrs_of.get(&r.id).into_iter().flatten() {
                let a = norm.apply(a);
                if !a.is_empty() && !attrs.contains(&a) {
                    attrs.push(a);
                }
            }
            graph.objects.push(ObjectNode::new(r.id, label, b).with_attributes(attrs));
        }

        if let Some(list) = relationships.get(image_id) {
            for (j, r) in list.iter().enumerate() {
                let path = format!("[{image_id}].relationships[{j}]");
                let subject = rel_doc.id(rel_doc.get(r, "subject", &path)?, &["object_id", "id"], &format!("{path}.subject"))?;
                let object = rel_doc.id(rel_doc.get(r, "object", &path)?, &["object_id", "id"], &format!("{path}.object"))?;
                let predicate = norm.apply(
                    rel_doc
                        .get(r, "predicate", &path)?
                        .as_str()
                        .ok_or_else(|| rel_doc.missing(format!("{path}.predicate")))?,
                );
                let reason = if graph.object(&subject).is_none() || graph.object(&object).is_none() {
                    Some("relation endpoint dropped or unknown")
                } else if subject == object {
                    Some("self relation")
                } else if predicate.is_empty() {
                    Some("empty predicate")
                } else {
                    None
                };
                match reason {
                    Some(reason) => skips.push(SkipRecord {
                        image_id: image_id.clone(),
                        object_id: Some(subject),
                        reason: reason.to_string(),
                    }),
                    None => graph.push_relation(RelationEdge::new(subject, object, [predicate])),
                }
            }
        }
        graphs.push(graph);
    }
    graphs.sort_by(|a, b| a.image.id.cmp(&b.image.id));
    Ok((graphs, skips))
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AugmentError {
    #[error("{what} is {found:?}, image is {expected:?}")]
    DimensionMismatch {
        what: String,
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("mask for unknown object {0:?}")]
    UnknownObjectId(String),
}

/// Attaches a depth raster and per-object masks. Fields not touched by the
/// augmentation are carried over unchanged.
pub fn attach_augmentations(
    graph: &SceneGraph,
    raster: Option<Arc<DepthRaster>>,
    masks: BTreeMap<String, SegMask>,
) -> Result<SceneGraph, AugmentError> {
    let dims = (graph.image.width, graph.image.height);
    let mut out = graph.clone();
    if let Some(r) = raster {
        if (r.width(), r.height()) != dims {
            return Err(AugmentError::DimensionMismatch {
                what: "depth raster".into(),
                expected: dims,
                found: (r.width(), r.height()),
            });
        }
        out.set_raster(Some(r));
    }
    for (id, mask) in masks {
        if let Some(found) = mask.dims().filter(|d| *d != dims) {
            return Err(AugmentError::DimensionMismatch {
                what: format!("mask of {id}"),
                expected: dims,
                found,
            });
        }
        let i = out.object_index(&id).ok_or_else(|| AugmentError::UnknownObjectId(id.clone()))?;
        let node = &out.objects[i];
        out.objects[i] = ObjectNode::new(node.id.clone(), node.label.clone(), node.bbox)
            .with_attributes(node.attributes.clone())
            .with_mask(mask);
        if let Some(d) = graph.objects[i].depth {
            out.objects[i].depth = Some(d);
        }
    }
    Ok(out)
}

/// Corpus admission thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterParams {
    pub min_width: u32,
    pub min_height: u32,
    /// Graphs need strictly more objects than this.
    pub min_objects: usize,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            min_width: 512,
            min_height: 512,
            min_objects: 5,
        }
    }
}

/// Keeps graphs that are large enough and have more than `min_objects`
/// objects.
pub fn filter_corpus(
    graphs: impl IntoIterator<Item = SceneGraph>,
    p: FilterParams,
) -> (Vec<SceneGraph>, Vec<SkipRecord>) {
    let mut kept = Vec::new();
    let mut skips = Vec::new();
    for g in graphs {
        let reason = if g.image.width < p.min_width || g.image.height < p.min_height {
            Some(format!(
                "resolution {}x{} below {}x{}",
                g.image.width, g.image.height, p.min_width, p.min_height
            ))
        } else if g.objects.len() <= p.min_objects {
            Some(format!("{} objects, need more than {}", g.objects.len(), p.min_objects))
        } else {
            None
        };
        match reason {
            Some(reason) => skips.push(SkipRecord {
                image_id: g.image.id.clone(),
                object_id: None,
                reason,
            }),
            None => kept.push(g),
        }
    }
    (kept, skips)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    VisualGenome,
    Pipeline,
    Canonical,
}

/// Description of a written corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub corpus_id: String,
    pub graph_count: usize,
    pub source: CorpusSource,
    /// SHA-256 of the JSONL file bytes.
    pub checksum: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterParams>,
    #[serde(default)]
    pub skipped: usize,
}

impl CorpusManifest {
    /// Describes the file at `path` by hashing and counting its lines.
    pub fn for_file(path: &Path, source: CorpusSource) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        let graph_count = bytes
            .split(|b| *b == b'\n')
            .filter(|l| l.iter().any(|c| !c.is_ascii_whitespace()))
            .count();
        let checksum = sha256_hex(&bytes);
        Ok(CorpusManifest {
            corpus_id: checksum[..12].to_string(),
            graph_count,
            source,
            checksum,
            filter: None,
            skipped: 0,
        })
    }

    /// Whether the file still matches this manifest.
    pub fn matches(&self, path: &Path) -> std::io::Result<bool> {
        let now = Self::for_file(path, self.source)?;
        Ok(now.checksum == self.checksum && now.graph_count == self.graph_count)
    }
}
