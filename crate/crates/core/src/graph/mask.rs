//! Segmentation masks.
//!
//! Masks are stored either as a run-length encoding over the image grid or as
//! a polygon. Run-length counts follow the COCO convention: column-major
//! (pixel index `x * height + y`), alternating background/foreground runs
//! starting with background. Polygons are rasterized at pixel centers with the
//! even-odd rule. Every mask is decoded once into foreground runs so that
//! membership, area, and sampling queries are cheap.

use serde::{Deserialize, Serialize};

use super::BBox;

/// The stored form of a mask, kept verbatim for lossless serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaskEncoding {
    Rle { counts: Vec<u64>, size: [u32; 2] },
    Polygon(Vec<[f64; 2]>),
}

/// Why a mask could not be decoded.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MaskError {
    #[error("rle counts sum to {sum}, expected {expected}")]
    CountMismatch { sum: u64, expected: u64 },
    #[error("rle size {h}x{w} does not match image {image_h}x{image_w}")]
    SizeMismatch { h: u32, w: u32, image_h: u32, image_w: u32 },
    #[error("polygon needs at least 3 vertices, got {0}")]
    DegeneratePolygon(usize),
    #[error("polygon vertex is not finite")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
struct Decoded {
    width: u32,
    height: u32,
    /// Foreground runs `[start, end)` in column-major pixel index space.
    runs: Vec<(u64, u64)>,
    /// Number of foreground pixels preceding each run.
    before: Vec<u64>,
    area: u64,
}

/// A decoded segmentation mask bound to an image grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SegMask {
    encoding: MaskEncoding,
    decoded: Result<Decoded, MaskError>,
}

impl SegMask {
    /// Decodes `encoding` against an image of `width` x `height`. Decoding
    /// failures are kept inside the mask and surface through [`SegMask::error`]
    /// so that graph validation can report them.
    pub fn new(encoding: MaskEncoding, width: u32, height: u32) -> Self {
        let decoded = match &encoding {
            MaskEncoding::Rle { counts, size } => decode_rle(counts, *size, width, height),
            MaskEncoding::Polygon(points) => decode_polygon(points, width, height),
        };
        SegMask { encoding, decoded }
    }

    /// Builds a mask from column-major foreground runs.
    pub fn from_runs(runs: &[(u64, u64)], width: u32, height: u32) -> Self {
        let total = u64::from(width) * u64::from(height);
        let mut counts = Vec::new();
        let mut cursor = 0;
        for &(start, end) in runs {
            counts.push(start - cursor);
            counts.push(end - start);
            cursor = end;
        }
        counts.push(total - cursor);
        SegMask::new(
            MaskEncoding::Rle {
                counts,
                size: [height, width],
            },
            width,
            height,
        )
    }

    /// Builds a mask from a predicate evaluated on every pixel.
    pub fn from_fn(width: u32, height: u32, mut inside: impl FnMut(u32, u32) -> bool) -> Self {
        let mut runs: Vec<(u64, u64)> = Vec::new();
        for x in 0..width {
            for y in 0..height {
                if inside(x, y) {
                    let idx = u64::from(x) * u64::from(height) + u64::from(y);
                    match runs.last_mut() {
                        Some(last) if last.1 == idx => last.1 += 1,
                        _ => runs.push((idx, idx + 1)),
                    }
                }
            }
        }
        SegMask::from_runs(&runs, width, height)
    }

    /// Builds a mask with at most one vertical span `y0..y1` per column.
    pub fn from_columns(width: u32, height: u32, mut span: impl FnMut(u32) -> Option<(u32, u32)>) -> Self {
        let h = u64::from(height);
        let mut runs: Vec<(u64, u64)> = Vec::new();
        for x in 0..width {
            let Some((y0, y1)) = span(x) else { continue };
            let (y0, y1) = (y0.min(height), y1.min(height));
            if y0 >= y1 {
                continue;
            }
            let (start, end) = (u64::from(x) * h + u64::from(y0), u64::from(x) * h + u64::from(y1));
            match runs.last_mut() {
                Some(last) if last.1 == start => last.1 = end,
                _ => runs.push((start, end)),
            }
        }
        SegMask::from_runs(&runs, width, height)
    }

    /// Axis-aligned rectangle covering pixels `x0..x1` x `y0..y1`.
    pub fn rectangle(width: u32, height: u32, x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        SegMask::from_columns(width, height, |x| (x >= x0 && x < x1).then_some((y0, y1)))
    }

    pub fn encoding(&self) -> &MaskEncoding {
        &self.encoding
    }

    pub fn error(&self) -> Option<&MaskError> {
        self.decoded.as_ref().err()
    }

    pub fn is_decoded(&self) -> bool {
        self.decoded.is_ok()
    }

    /// Foreground pixel count; zero for undecodable masks.
    pub fn area(&self) -> u64 {
        self.decoded.as_ref().map_or(0, |d| d.area)
    }

    /// Grid dimensions the mask decodes to, as `(width, height)`.
    pub fn dims(&self) -> Option<(u32, u32)> {
        self.decoded.as_ref().ok().map(|d| (d.width, d.height))
    }

    /// Exact lookup of an integer pixel.
    pub fn contains_pixel(&self, x: u32, y: u32) -> bool {
        let Ok(d) = &self.decoded else { return false };
        if x >= d.width || y >= d.height {
            return false;
        }
        let idx = u64::from(x) * u64::from(d.height) + u64::from(y);
        let pos = d.runs.partition_point(|&(start, _)| start <= idx);
        pos > 0 && idx < d.runs[pos - 1].1
    }

    /// The `k`-th foreground pixel in column-major order.
    pub fn nth_pixel(&self, k: u64) -> Option<(u32, u32)> {
        let d = self.decoded.as_ref().ok()?;
        if k >= d.area {
            return None;
        }
        let run = d.before.partition_point(|&b| b <= k) - 1;
        let idx = d.runs[run].0 + (k - d.before[run]);
        let h = u64::from(d.height);
        Some(((idx / h) as u32, (idx % h) as u32))
    }

    /// Iterates foreground pixels as `(x, y)`.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let (runs, h) = match &self.decoded {
            Ok(d) => (d.runs.as_slice(), u64::from(d.height)),
            Err(_) => (&[][..], 1),
        };
        runs.iter()
            .flat_map(|&(s, e)| s..e)
            .map(move |idx| ((idx / h) as u32, (idx % h) as u32))
    }

    /// Tight pixel bounding box of the foreground, in the same corner form as
    /// object boxes (exclusive max).
    pub fn bounds(&self) -> Option<BBox> {
        let d = self.decoded.as_ref().ok()?;
        if d.runs.is_empty() {
            return None;
        }
        let h = u64::from(d.height);
        let (mut x0, mut y0, mut x1, mut y1) = (u64::MAX, u64::MAX, 0, 0);
        for &(s, e) in &d.runs {
            let (cs, ce) = (s / h, (e - 1) / h);
            x0 = x0.min(cs);
            x1 = x1.max(ce);
            if cs == ce {
                y0 = y0.min(s % h);
                y1 = y1.max((e - 1) % h);
            } else {
                y0 = 0;
                y1 = h - 1;
            }
        }
        Some(BBox::new(
            x0 as f64,
            y0 as f64,
            (x1 + 1) as f64,
            (y1 + 1) as f64,
        ))
    }
}

fn finish(width: u32, height: u32, runs: Vec<(u64, u64)>) -> Decoded {
    let mut before = Vec::with_capacity(runs.len());
    let mut area = 0;
    for &(s, e) in &runs {
        before.push(area);
        area += e - s;
    }
    Decoded {
        width,
        height,
        runs,
        before,
        area,
    }
}

fn decode_rle(counts: &[u64], size: [u32; 2], width: u32, height: u32) -> Result<Decoded, MaskError> {
    let [h, w] = size;
    if h != height || w != width {
        return Err(MaskError::SizeMismatch {
            h,
            w,
            image_h: height,
            image_w: width,
        });
    }
    let expected = u64::from(w) * u64::from(h);
    let sum: u64 = counts.iter().sum();
    if sum != expected {
        return Err(MaskError::CountMismatch { sum, expected });
    }
    let mut runs = Vec::new();
    let mut cursor = 0u64;
    for (i, &c) in counts.iter().enumerate() {
        if i % 2 == 1 && c > 0 {
            match runs.last_mut() {
                Some((_, end)) if *end == cursor => *end += c,
                _ => runs.push((cursor, cursor + c)),
            }
        }
        cursor += c;
    }
    Ok(finish(width, height, runs))
}

fn decode_polygon(points: &[[f64; 2]], width: u32, height: u32) -> Result<Decoded, MaskError> {
    if points.len() < 3 {
        return Err(MaskError::DegeneratePolygon(points.len()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(MaskError::NonFinite);
    }
    let mask = SegMask::from_fn(width, height, |x, y| {
        point_in_polygon(points, f64::from(x) + 0.5, f64::from(y) + 0.5)
    });
    mask.decoded
}

fn point_in_polygon(points: &[[f64; 2]], px: f64, py: f64) -> bool {
    let mut inside = false;
    let mut j = points.len() - 1;
    for i in 0..points.len() {
        let [xi, yi] = points[i];
        let [xj, yj] = points[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Rounds a pixel-space coordinate to the nearest pixel index on an axis of
/// length `extent`.
pub fn nearest_pixel(v: f64, extent: u32) -> u32 {
    let r = v.round();
    if r <= 0.0 {
        0
    } else {
        (r as u32).min(extent.saturating_sub(1))
    }
}

/// Membership of a real-valued pixel-space point, rounded to the nearest pixel.
pub fn point_in_mask(mask: &SegMask, point: (f64, f64)) -> bool {
    let Some((w, h)) = mask.dims() else { return false };
    mask.contains_pixel(nearest_pixel(point.0, w), nearest_pixel(point.1, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rle_roundtrip_through_runs() {
        // 3x2 image (w=3, h=2): column-major indices 0..6
        let m = SegMask::new(
            MaskEncoding::Rle {
                counts: vec![1, 2, 2, 1],
                size: [2, 3],
            },
            3,
            2,
        );
        assert_eq!(m.area(), 3);
        // idx 1 -> (0,1), idx 2 -> (1,0), idx 5 -> (2,1)
        assert!(m.contains_pixel(0, 1));
        assert!(m.contains_pixel(1, 0));
        assert!(!m.contains_pixel(1, 1));
        assert!(m.contains_pixel(2, 1));
        let px: Vec<_> = m.pixels().collect();
        assert_eq!(px, vec![(0, 1), (1, 0), (2, 1)]);
        assert_eq!(m.nth_pixel(2), Some((2, 1)));
        assert_eq!(m.nth_pixel(3), None);
    }

    #[test]
    fn bad_counts_are_reported() {
        let m = SegMask::new(
            MaskEncoding::Rle {
                counts: vec![1, 2],
                size: [2, 3],
            },
            3,
            2,
        );
        assert_eq!(m.error(), Some(&MaskError::CountMismatch { sum: 3, expected: 6 }));
        assert_eq!(m.area(), 0);
    }

    #[test]
    fn polygon_square() {
        let m = SegMask::new(
            MaskEncoding::Polygon(vec![[2.0, 2.0], [6.0, 2.0], [6.0, 5.0], [2.0, 5.0]]),
            10,
            10,
        );
        assert_eq!(m.area(), 12);
        assert_eq!(m.bounds(), Some(BBox::new(2.0, 2.0, 6.0, 5.0)));
    }

    #[test]
    fn bounds_across_columns() {
        let m = SegMask::rectangle(8, 8, 1, 3, 4, 5);
        assert_eq!(m.bounds(), Some(BBox::new(1.0, 3.0, 4.0, 5.0)));
        let tall = SegMask::from_runs(&[(6, 10)], 4, 8);
        assert_eq!(tall.bounds(), Some(BBox::new(0.0, 0.0, 2.0, 8.0)));
    }

    #[test]
    fn full_mask_contains_every_point() {
        let m = SegMask::rectangle(7, 5, 0, 0, 7, 5);
        for x in 0..7 {
            for y in 0..5 {
                assert!(point_in_mask(&m, (f64::from(x) + 0.3, f64::from(y) - 0.2)));
            }
        }
        assert!(point_in_mask(&m, (100.0, 100.0)));
    }
}
