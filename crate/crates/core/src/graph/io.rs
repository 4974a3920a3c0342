//! Canonical JSONL graph format: one graph per line.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{BBox, DepthCache, DepthRaster, ImageMeta, MaskEncoding, ObjectNode, RelationEdge, SceneGraph, SegMask};

pub const DEPTH_CONVENTION: &str = "farther_is_larger";

#[derive(Debug, thiserror::Error)]
pub enum GraphIoError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: unsupported depth_convention {found:?}")]
    DepthConvention { line: usize, found: String },
    #[error("line {line}: depth raster {path}: {source}")]
    Raster {
        line: usize,
        path: String,
        #[source]
        source: super::DepthError,
    },
    #[error("writing depth raster {path}: {source}")]
    RasterWrite {
        path: String,
        #[source]
        source: super::DepthError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct ImageRecord {
    id: String,
    width: u32,
    height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_uri: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ObjectRecord {
    id: String,
    label: String,
    bbox: [f64; 4],
    #[serde(default)]
    attributes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask: Option<MaskEncoding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    depth: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct RelationRecord {
    subject: String,
    object: String,
    predicates: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    image: ImageRecord,
    objects: Vec<ObjectRecord>,
    relations: Vec<RelationRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dense_depth_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    depth_conversion: Option<String>,
    depth_convention: String,
}

/// Serializes one graph to its canonical single-line JSON form (no newline).
pub fn to_canonical_line(graph: &SceneGraph) -> String {
    let record = GraphRecord {
        image: ImageRecord {
            id: graph.image.id.clone(),
            width: graph.image.width,
            height: graph.image.height,
            source_uri: graph.image.source_uri.clone(),
        },
        objects: graph
            .objects
            .iter()
            .map(|o| ObjectRecord {
                id: o.id.clone(),
                label: o.label.clone(),
                bbox: o.bbox.as_array(),
                attributes: o.attributes.clone(),
                mask: o.mask.as_ref().map(|m| m.encoding().clone()),
                depth: o.depth,
            })
            .collect(),
        relations: graph
            .relations
            .iter()
            .map(|r| RelationRecord {
                subject: r.subject.clone(),
                object: r.object.clone(),
                predicates: r.predicates.clone(),
            })
            .collect(),
        dense_depth_ref: graph.dense_depth_ref.clone(),
        depth_conversion: graph.depth_conversion.clone(),
        depth_convention: DEPTH_CONVENTION.to_string(),
    };
    serde_json::to_string(&record).expect("graph records always serialize")
}

/// Parses a single canonical line. Edges are kept exactly as written so that
/// validation can flag duplicates.
pub fn parse_graph(line: &str) -> Result<SceneGraph, GraphIoError> {
    parse_numbered(line, 1)
}

fn parse_numbered(line: &str, line_no: usize) -> Result<SceneGraph, GraphIoError> {
    let record: GraphRecord =
        serde_json::from_str(line).map_err(|source| GraphIoError::Json { line: line_no, source })?;
    if record.depth_convention != DEPTH_CONVENTION {
        return Err(GraphIoError::DepthConvention {
            line: line_no,
            found: record.depth_convention,
        });
    }
    let image = ImageMeta {
        id: record.image.id,
        width: record.image.width,
        height: record.image.height,
        source_uri: record.image.source_uri,
    };
    let (w, h) = (image.width, image.height);
    let mut graph = SceneGraph::new(image);
    graph.dense_depth_ref = record.dense_depth_ref;
    graph.depth_conversion = record.depth_conversion;
    graph.objects = record
        .objects
        .into_iter()
        .map(|o| {
            let [x0, y0, x1, y1] = o.bbox;
            ObjectNode {
                id: o.id,
                label: o.label,
                bbox: BBox::new(x0, y0, x1, y1),
                attributes: o.attributes,
                mask: o.mask.map(|m| SegMask::new(m, w, h)),
                depth: o.depth,
                depth_cache: DepthCache::default(),
            }
        })
        .collect();
    graph.relations = record
        .relations
        .into_iter()
        .map(|r| RelationEdge {
            subject: r.subject,
            object: r.object,
            predicates: r.predicates,
        })
        .collect();
    Ok(graph)
}

/// Parses a whole JSONL document. Blank lines are ignored.
pub fn read_corpus_str(text: &str) -> Result<Vec<SceneGraph>, GraphIoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_numbered(l, i + 1))
        .collect()
}

/// Reads a corpus file. When `load_rasters` is set, every `dense_depth_ref`
/// is resolved relative to the corpus file's directory and loaded.
pub fn read_corpus(path: &Path, load_rasters: bool) -> Result<Vec<SceneGraph>, GraphIoError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut graph = parse_numbered(&line, i + 1)?;
        if load_rasters {
            if let Some(rel) = &graph.dense_depth_ref {
                let raster = DepthRaster::load(&base.join(rel)).map_err(|source| GraphIoError::Raster {
                    line: i + 1,
                    path: rel.clone(),
                    source,
                })?;
                graph.set_raster(Some(Arc::new(raster)));
            }
        }
        out.push(graph);
    }
    Ok(out)
}

pub fn write_corpus<'a>(
    path: &Path,
    graphs: impl IntoIterator<Item = &'a SceneGraph>,
) -> Result<(), GraphIoError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for g in graphs {
        w.write_all(to_canonical_line(g).as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes graphs as canonical JSONL. Rasters go to `<stem>_depth/<id>.f32`
/// beside the output and are referenced relative to it.
pub fn write_corpus_with_rasters(path: &Path, graphs: &mut [SceneGraph]) -> Result<(), GraphIoError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("graphs");
    let sub = format!("{stem}_depth");
    for g in graphs.iter_mut() {
        let Some(r) = g.raster_arc().cloned() else { continue };
        std::fs::create_dir_all(dir.join(&sub))?;
        let rel = format!("{sub}/{}.f32", sanitize(&g.image.id));
        r.save_raw_f32(&dir.join(&rel)).map_err(|source| GraphIoError::RasterWrite {
            path: rel.clone(),
            source,
        })?;
        g.dense_depth_ref = Some(rel);
    }
    write_corpus(path, graphs.iter())
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
