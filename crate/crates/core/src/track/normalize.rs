use super::{Chunk, TrackError};
use crate::codec::PixelBox;

/// `[x, y, t, p]` in normalized chunk coordinates.
pub type Point4 = [f64; 4];

/// A chunk expressed in box-relative, window-relative coordinates:
/// `x, y` in `[-1, 1]`, `t` in `[0, 1]`, `p` in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NormalizedPointSet {
    points: Vec<Point4>,
}

impl NormalizedPointSet {
    pub fn new(points: Vec<Point4>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[Point4] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point4> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Whether every coordinate lies in its documented range.
    pub fn in_range(&self) -> bool {
        self.points.iter().all(|&[x, y, t, p]| {
            (-1.0..=1.0).contains(&x)
                && (-1.0..=1.0).contains(&y)
                && (0.0..=1.0).contains(&t)
                && (p == 1.0 || p == -1.0)
        })
    }
}

impl From<Vec<Point4>> for NormalizedPointSet {
    fn from(points: Vec<Point4>) -> Self {
        Self::new(points)
    }
}

fn half_extents(b: &PixelBox) -> (f64, f64) {
    (f64::from(b.width()) / 2.0, f64::from(b.height()) / 2.0)
}

/// Maps each event of the chunk into the chunk's own box and time window.
pub fn normalize_chunk(chunk: &Chunk) -> Result<NormalizedPointSet, TrackError> {
    if chunk.events.is_empty() {
        return Err(TrackError::EmptyChunk);
    }
    let (cx, cy) = chunk.bbox.center();
    let (hw, hh) = half_extents(&chunk.bbox);
    let dt = chunk.delta_us as f64;
    let points = chunk
        .events
        .iter()
        .map(|e| {
            [
                (f64::from(e.x) - cx) / hw,
                (f64::from(e.y) - cy) / hh,
                (e.t - chunk.t0) as f64 / dt,
                e.p.sign(),
            ]
        })
        .collect();
    Ok(NormalizedPointSet { points })
}

/// Inverse of [`normalize_chunk`] for one point: returns raw `(x, y, t)`.
pub fn denormalize_point(p: &Point4, bbox: &PixelBox, t0: u64, delta_us: u64) -> (f64, f64, f64) {
    let (cx, cy) = bbox.center();
    let (hw, hh) = half_extents(bbox);
    (
        p[0] * hw + cx,
        p[1] * hh + cy,
        p[2] * delta_us as f64 + t0 as f64,
    )
}
