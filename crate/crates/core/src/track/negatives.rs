use rand::Rng;

use super::{Chunk, TrackError};
use crate::codec::{AnnotationSet, BoxRecord, ClassLabel, EventStream, PixelBox, FRAME_US};
use crate::rng::rng_from_seed;

pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;
const FALLBACK_EXTENT: (u16, u16) = (16, 96);

/// Whether a patch `bbox x [t0, t1)` overlaps an annotated `box x frame`.
pub fn patch_intersects(bbox: &PixelBox, t0: u64, t1: u64, rec: &BoxRecord) -> bool {
    t0 < rec.t_end_us && rec.t_start_us < t1 && bbox.intersects(&rec.pixel_box())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NegativeConfig {
    pub count: usize,
    pub seed: u64,
    pub max_attempts: usize,
}

impl NegativeConfig {
    pub fn new(count: usize, seed: u64) -> Self {
        Self {
            count,
            seed,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

/// A background patch spanning `frames` consecutive frame-aligned windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NegativePatch {
    pub bbox: PixelBox,
    pub first_frame: u64,
    pub frames: u64,
}

impl NegativePatch {
    pub fn t0(&self) -> u64 {
        self.first_frame * FRAME_US
    }

    pub fn t1(&self) -> u64 {
        (self.first_frame + self.frames) * FRAME_US
    }
}

/// Rejection sampler for spatio-temporal patches that avoid every annotation.
///
/// Patch extents are drawn from the annotated boxes (width and height taken
/// from the same box) so background patches are not separable by size alone;
/// with no annotations both extents are uniform in 16..=96 px. Accepted
/// patches become obstacles for later draws.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    width: u16,
    height: u16,
    frame_slots: u64,
    obstacles: Vec<(PixelBox, u64, u64)>,
    extents: Vec<(u16, u16)>,
    max_attempts: usize,
}

impl NegativeSampler {
    pub fn new(
        width: u16,
        height: u16,
        duration_us: u64,
        ann: &AnnotationSet,
        max_attempts: usize,
    ) -> Result<Self, TrackError> {
        let frame_slots = duration_us / FRAME_US;
        if frame_slots == 0 {
            return Err(TrackError::StreamTooShort { duration_us });
        }
        let obstacles = ann
            .records()
            .map(|r| (r.pixel_box(), r.t_start_us, r.t_end_us))
            .collect();
        let extents = ann
            .records()
            .filter(|r| r.class_label != ClassLabel::Background)
            .map(|r| (r.x_max - r.x_min, r.y_max - r.y_min))
            .collect();
        Ok(Self {
            width,
            height,
            frame_slots,
            obstacles,
            extents,
            max_attempts,
        })
    }

    pub fn add_obstacle(&mut self, bbox: PixelBox, t0: u64, t1: u64) {
        self.obstacles.push((bbox, t0, t1));
    }

    fn draw_extent(&self, rng: &mut impl Rng) -> (u16, u16) {
        let (w, h) = if self.extents.is_empty() {
            (
                rng.gen_range(FALLBACK_EXTENT.0..=FALLBACK_EXTENT.1),
                rng.gen_range(FALLBACK_EXTENT.0..=FALLBACK_EXTENT.1),
            )
        } else {
            self.extents[rng.gen_range(0..self.extents.len())]
        };
        (
            w.clamp(1, self.width.saturating_sub(1).max(1)),
            h.clamp(1, self.height.saturating_sub(1).max(1)),
        )
    }

    fn is_free(&self, bbox: &PixelBox, t0: u64, t1: u64) -> bool {
        self.obstacles
            .iter()
            .all(|(b, s, e)| !(t0 < *e && *s < t1 && bbox.intersects(b)))
    }

    /// Draws one free patch and records it as an obstacle.
    pub fn sample_patch(&mut self, frames: u64, rng: &mut impl Rng) -> Result<NegativePatch, TrackError> {
        let frames = frames.max(1);
        if frames > self.frame_slots || self.width < 2 || self.height < 2 {
            return Err(TrackError::ExhaustedRetries { attempts: 0 });
        }
        for _ in 0..self.max_attempts {
            let (w, h) = self.draw_extent(rng);
            let x_min = rng.gen_range(0..self.width - w);
            let y_min = rng.gen_range(0..self.height - h);
            let first_frame = rng.gen_range(0..=self.frame_slots - frames);
            let patch = NegativePatch {
                bbox: PixelBox {
                    x_min,
                    y_min,
                    x_max: x_min + w,
                    y_max: y_min + h,
                },
                first_frame,
                frames,
            };
            if self.is_free(&patch.bbox, patch.t0(), patch.t1()) {
                self.add_obstacle(patch.bbox, patch.t0(), patch.t1());
                return Ok(patch);
            }
        }
        Err(TrackError::ExhaustedRetries {
            attempts: self.max_attempts,
        })
    }
}

/// Draws `config.count` single-frame background chunks that intersect no
/// annotated box. Patch `i` gets track id `u64::MAX - i`. Chunks may hold few
/// or no events; callers apply their own event floor.
pub fn sample_negatives(
    stream: &EventStream,
    ann: &AnnotationSet,
    config: &NegativeConfig,
) -> Result<Vec<Chunk>, TrackError> {
    let mut sampler = NegativeSampler::new(
        stream.width(),
        stream.height(),
        stream.end_time(),
        ann,
        config.max_attempts,
    )?;
    let mut rng = rng_from_seed(config.seed);
    (0..config.count)
        .map(|i| {
            let patch = sampler.sample_patch(1, &mut rng)?;
            let events = stream
                .window(patch.t0(), patch.t1())
                .iter()
                .filter(|e| patch.bbox.contains(e.x, e.y))
                .copied()
                .collect();
            Ok(Chunk {
                track_id: u64::MAX - i as u64,
                class_label: ClassLabel::Background,
                t0: patch.t0(),
                delta_us: FRAME_US,
                bbox: patch.bbox,
                events,
            })
        })
        .collect()
}
