use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use super::{ObjectNode, SceneGraph};

#[derive(Debug, thiserror::Error)]
pub enum DepthError {
    #[error("object {0} not found")]
    UnknownObject(String),
    #[error("object {0} has no cached depth and the graph has no depth raster")]
    MissingDepth(String),
    #[error("object {0} covers no raster pixels")]
    EmptyRegion(String),
    #[error("raster io: {0}")]
    Io(#[from] std::io::Error),
    #[error("raster decode: {0}")]
    Decode(String),
}

/// Dense per-pixel depth, row-major, canonical convention (larger = farther).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthRaster {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl DepthRaster {
    pub fn new(width: u32, height: u32, values: Vec<f32>) -> Result<Self, DepthError> {
        if values.len() != width as usize * height as usize {
            return Err(DepthError::Decode(format!(
                "{} values for a {width}x{height} raster",
                values.len()
            )));
        }
        Ok(DepthRaster {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: u32, height: u32, value: f32) -> Self {
        DepthRaster {
            width,
            height,
            values: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f32) -> Self {
        let mut values = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        DepthRaster {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    /// `max - min` over all finite samples.
    pub fn range(&self) -> f64 {
        let (lo, hi) = self
            .values
            .iter()
            .filter(|v| v.is_finite())
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if lo > hi {
            0.0
        } else {
            f64::from(hi) - f64::from(lo)
        }
    }

    /// Loads a raster from disk. `.png` files are read as 16-bit (or 8-bit)
    /// single-channel images with the raw sample value as depth; anything else
    /// is read as little-endian `f32` with a `<path>.dims` sidecar holding
    /// `"<width> <height>"`.
    pub fn load(path: &Path) -> Result<Self, DepthError> {
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png {
            Self::load_png(path)
        } else {
            Self::load_raw_f32(path)
        }
    }

    pub fn load_png(path: &Path) -> Result<Self, DepthError> {
        let decoder = png::Decoder::new(BufReader::new(File::open(path)?));
        let mut reader = decoder
            .read_info()
            .map_err(|e| DepthError::Decode(e.to_string()))?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| DepthError::Decode("png too large".into()))?;
        let mut buf = vec![0; size];
        let info = reader
            .next_frame(&mut buf)
            .map_err(|e| DepthError::Decode(e.to_string()))?;
        if info.color_type != png::ColorType::Grayscale {
            return Err(DepthError::Decode(format!(
                "expected single-channel png, got {:?}",
                info.color_type
            )));
        }
        let data = &buf[..info.buffer_size()];
        let values = match info.bit_depth {
            png::BitDepth::Sixteen => data
                .chunks_exact(2)
                .map(|c| f32::from(u16::from_be_bytes([c[0], c[1]])))
                .collect(),
            png::BitDepth::Eight => data.iter().map(|&b| f32::from(b)).collect(),
            other => return Err(DepthError::Decode(format!("unsupported bit depth {other:?}"))),
        };
        DepthRaster::new(info.width, info.height, values)
    }

    pub fn load_raw_f32(path: &Path) -> Result<Self, DepthError> {
        let dims_path = sidecar_path(path);
        let dims = std::fs::read_to_string(&dims_path)?;
        let mut parts = dims.split_whitespace().map(str::parse::<u32>);
        let (Some(Ok(width)), Some(Ok(height))) = (parts.next(), parts.next()) else {
            return Err(DepthError::Decode(format!(
                "malformed dims file {}",
                dims_path.display()
            )));
        };
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() % 4 != 0 {
            return Err(DepthError::Decode("raw raster length not a multiple of 4".into()));
        }
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        DepthRaster::new(width, height, values)
    }

    /// Writes the raw little-endian `f32` form plus its `.dims` sidecar.
    pub fn save_raw_f32(&self, path: &Path) -> Result<(), DepthError> {
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(path, bytes)?;
        std::fs::write(sidecar_path(path), format!("{} {}\n", self.width, self.height))?;
        Ok(())
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".dims");
    s.into()
}

/// Median of a sample; the mean of the two middle values for even counts.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

fn region_samples(object: &ObjectNode, raster: &DepthRaster) -> Vec<f64> {
    if let Some(mask) = object.mask.as_ref().filter(|m| m.is_decoded()) {
        return mask
            .pixels()
            .filter(|&(x, y)| x < raster.width() && y < raster.height())
            .map(|(x, y)| f64::from(raster.get(x, y)))
            .collect();
    }
    let b = &object.bbox;
    let x0 = b.x_min.floor().max(0.0) as u32;
    let y0 = b.y_min.floor().max(0.0) as u32;
    let x1 = (b.x_max.ceil().max(0.0) as u32).min(raster.width());
    let y1 = (b.y_max.ceil().max(0.0) as u32).min(raster.height());
    let mut out = Vec::new();
    for y in y0..y1 {
        for x in x0..x1 {
            out.push(f64::from(raster.get(x, y)));
        }
    }
    out
}

/// Depth of one object: the stored value when present, otherwise the median
/// of raster samples over its mask (its box when no mask). Computed values are
/// cached on the node so repeated calls return identical bits.
pub fn object_depth(graph: &SceneGraph, object_id: &str) -> Result<f64, DepthError> {
    let object = graph
        .object(object_id)
        .ok_or_else(|| DepthError::UnknownObject(object_id.to_string()))?;
    if let Some(d) = object.depth {
        return Ok(d);
    }
    if let Some(&d) = object.depth_cache.0.get() {
        return Ok(d);
    }
    let raster = graph
        .raster()
        .ok_or_else(|| DepthError::MissingDepth(object_id.to_string()))?;
    let mut samples = region_samples(object, raster);
    let value = median(&mut samples).ok_or_else(|| DepthError::EmptyRegion(object_id.to_string()))?;
    Ok(*object.depth_cache.0.get_or_init(|| value))
}
