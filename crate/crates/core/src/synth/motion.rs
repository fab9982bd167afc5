//! Per-class motion and emission models.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::SynthConfig;
use crate::codec::{BoxRecord, ClassLabel, Event, PixelBox, Polarity, FRAME_US};
use crate::rng::{derive_seed, rng_from_seed};

/// One generated track in arena-local coordinates, starting at frame 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTrack {
    pub class_label: ClassLabel,
    /// Object size parameter in pixels.
    pub extent: f64,
    pub frames: u64,
    /// Time-ordered object events (no ambient noise).
    pub events: Vec<Event>,
    /// One box per frame, `frame_index` counting from 0, `track_id` 0.
    pub boxes: Vec<BoxRecord>,
}

impl GeneratedTrack {
    pub fn duration_us(&self) -> u64 {
        self.frames * FRAME_US
    }

    /// Moves the track by `(dx, dy)` pixels and `first_frame` frames.
    pub fn placed(&self, track_id: u64, dx: u16, dy: u16, first_frame: u64) -> (Vec<Event>, Vec<BoxRecord>) {
        let dt = first_frame * FRAME_US;
        let events = self
            .events
            .iter()
            .map(|e| Event::new(e.t + dt, e.x + dx, e.y + dy, e.p))
            .collect();
        let boxes = self
            .boxes
            .iter()
            .map(|b| BoxRecord {
                track_id,
                frame_index: b.frame_index + first_frame,
                t_start_us: b.t_start_us + dt,
                t_end_us: b.t_end_us + dt,
                x_min: b.x_min + dx,
                y_min: b.y_min + dy,
                x_max: b.x_max + dx,
                y_max: b.y_max + dy,
                ..*b
            })
            .collect();
        (events, boxes)
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] >= r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..r[1])
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn polarity(rng: &mut ChaCha8Rng) -> Polarity {
    if rng.gen_bool(0.5) {
        Polarity::Positive
    } else {
        Polarity::Negative
    }
}

/// Whole frames of a log-uniform duration.
pub fn sample_frames(config: &SynthConfig, rng: &mut ChaCha8Rng) -> u64 {
    let [lo, hi] = config.duration_us.map(|d| d as f64);
    let d = if lo >= hi { lo } else { rng.gen_range(lo.ln()..hi.ln()).exp() };
    ((d as u64) / FRAME_US).max(crate::track::MIN_TRACK_FRAMES as u64)
}

/// Arrival times of an inhomogeneous Poisson process on `[0, end_us)` with
/// rate `rate(t_s)` bounded by `peak`, by thinning.
fn arrivals(rng: &mut ChaCha8Rng, end_us: u64, peak: f64, rate: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = Vec::new();
    if peak <= 0.0 {
        return out;
    }
    let end = end_us as f64 * 1e-6;
    let mut t = 0.0;
    loop {
        let u: f64 = rng.gen();
        t += -(1.0 - u).ln() / peak;
        if t >= end {
            return out;
        }
        if rng.gen::<f64>() * peak < rate(t) {
            out.push(t);
        }
    }
}

/// A path sampled every millisecond; position at any time by interpolation.
struct Path {
    points: Vec<(f64, f64)>,
}

impl Path {
    const STEP_S: f64 = 1e-3;

    fn at(&self, t: f64) -> (f64, f64) {
        let f = (t / Self::STEP_S).max(0.0);
        let i = (f as usize).min(self.points.len() - 1);
        let j = (i + 1).min(self.points.len() - 1);
        let a = f - i as f64;
        let (p, q) = (self.points[i], self.points[j]);
        (p.0 + a * (q.0 - p.0), p.1 + a * (q.1 - p.1))
    }

    fn steps(duration_s: f64) -> usize {
        (duration_s / Self::STEP_S).ceil() as usize + 2
    }
}

struct Arena {
    w: f64,
    h: f64,
}

impl Arena {
    /// Reflects `v` into `[lo, hi]`.
    fn reflect(v: f64, lo: f64, hi: f64) -> (f64, bool) {
        if v < lo {
            ((2.0 * lo - v).min(hi), true)
        } else if v > hi {
            ((2.0 * hi - v).max(lo), true)
        } else {
            (v, false)
        }
    }
}

/// Correlated random walk: constant speed, heading diffusing with `churn`.
fn brownian_path(rng: &mut ChaCha8Rng, arena: &Arena, margin: f64, duration_s: f64, speed: f64, churn: f64) -> Path {
    let mut x = rng.gen_range(margin..arena.w - margin);
    let mut y = rng.gen_range(margin..arena.h - margin);
    let mut heading: f64 = rng.gen_range(0.0..2.0 * PI);
    let sd = churn * Path::STEP_S.sqrt();
    let mut points = Vec::with_capacity(Path::steps(duration_s));
    for _ in 0..Path::steps(duration_s) {
        points.push((x, y));
        heading += sd * gauss(rng);
        let (nx, hit_x) = Arena::reflect(x + speed * Path::STEP_S * heading.cos(), margin, arena.w - margin);
        let (ny, hit_y) = Arena::reflect(y + speed * Path::STEP_S * heading.sin(), margin, arena.h - margin);
        if hit_x {
            heading = PI - heading;
        }
        if hit_y {
            heading = -heading;
        }
        x = nx;
        y = ny;
    }
    Path { points }
}

/// Quasi-linear glide with a gentle sideways bow.
fn glide_path(rng: &mut ChaCha8Rng, arena: &Arena, margin: f64, duration_s: f64, speed: f64) -> Path {
    let heading: f64 = rng.gen_range(0.0..2.0 * PI);
    let (span_x, span_y) = (arena.w - 2.0 * margin, arena.h - 2.0 * margin);
    // slow down so the whole glide stays in the arena
    let mut dx = speed * duration_s * heading.cos();
    let mut dy = speed * duration_s * heading.sin();
    let shrink = (0.8 * span_x / dx.abs().max(1e-9)).min(0.8 * span_y / dy.abs().max(1e-9)).min(1.0);
    dx *= shrink;
    dy *= shrink;
    let x0 = margin + rng.gen_range(0.0..=(span_x - dx.abs())) + (-dx).max(0.0);
    let y0 = margin + rng.gen_range(0.0..=(span_y - dy.abs())) + (-dy).max(0.0);
    let bow = rng.gen_range(-0.1..0.1) * (dx * dx + dy * dy).sqrt();
    let (nx, ny) = (-heading.sin(), heading.cos());
    let n = Path::steps(duration_s);
    let points = (0..n)
        .map(|i| {
            let s = (i as f64 * Path::STEP_S / duration_s).min(1.0);
            let off = bow * (PI * s).sin();
            let x = (x0 + s * dx + off * nx).clamp(margin, arena.w - margin);
            let y = (y0 + s * dy + off * ny).clamp(margin, arena.h - margin);
            (x, y)
        })
        .collect();
    Path { points }
}

/// Slow bounded drift plus a small hover wobble.
fn hover_path(rng: &mut ChaCha8Rng, arena: &Arena, margin: f64, duration_s: f64, drift: f64) -> Path {
    let mut x = rng.gen_range(margin..arena.w - margin);
    let mut y = rng.gen_range(margin..arena.h - margin);
    let (mut vx, mut vy) = (0.0, 0.0);
    let wobble_hz = rng.gen_range(0.5..2.0);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let n = Path::steps(duration_s);
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * Path::STEP_S;
        let w = (2.0 * PI * wobble_hz * t + phase).sin();
        points.push(((x + w).clamp(margin, arena.w - margin), (y + 0.5 * w).clamp(margin, arena.h - margin)));
        vx += drift * 0.5 * Path::STEP_S.sqrt() * gauss(rng);
        vy += drift * 0.5 * Path::STEP_S.sqrt() * gauss(rng);
        let v = (vx * vx + vy * vy).sqrt();
        if v > drift {
            vx *= drift / v;
            vy *= drift / v;
        }
        x = Arena::reflect(x + vx * Path::STEP_S, margin, arena.w - margin).0;
        y = Arena::reflect(y + vy * Path::STEP_S, margin, arena.h - margin).0;
    }
    Path { points }
}

/// Event template before rasterization: time in seconds and position.
struct RawEvent {
    t: f64,
    x: f64,
    y: f64,
    p: Polarity,
}

fn gen_insect(config: &SynthConfig, rng: &mut ChaCha8Rng, arena: &Arena, frames: u64) -> (f64, Vec<RawEvent>) {
    let p = &config.insect;
    let e = uniform(rng, p.extent_px);
    let f = uniform(rng, p.wingbeat_hz);
    let speed = uniform(rng, p.speed_px_s);
    let duration_s = (frames * FRAME_US) as f64 * 1e-6;
    let path = brownian_path(rng, arena, e + 2.0, duration_s, speed, p.heading_churn);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let base = p.rate_per_px * e;
    let times = arrivals(rng, frames * FRAME_US, 1.9 * base, |t| base * (1.0 + 0.9 * (2.0 * PI * f * t + phase).sin()));
    let events = times
        .into_iter()
        .map(|t| {
            let (cx, cy) = path.at(t);
            let (dx, dy) = if rng.gen_bool(0.4) {
                (e / 6.0 * gauss(rng), e / 6.0 * gauss(rng))
            } else {
                // wings sweep around the body axis at the wingbeat
                let sweep = 0.9 * (2.0 * PI * f * t + phase).sin();
                let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let r = rng.gen_range(0.2..1.0) * e / 2.0;
                (side * r * sweep.cos() + 0.3 * gauss(rng), -r * sweep.sin() + 0.3 * gauss(rng))
            };
            RawEvent {
                t,
                x: cx + dx,
                y: cy + dy,
                p: polarity(rng),
            }
        })
        .collect();
    (e, events)
}

fn gen_bird(config: &SynthConfig, rng: &mut ChaCha8Rng, arena: &Arena, frames: u64) -> (f64, Vec<RawEvent>) {
    let p = &config.bird;
    let e = uniform(rng, p.extent_px);
    let f = uniform(rng, p.flap_hz);
    let speed = uniform(rng, p.speed_px_s);
    let duration_s = (frames * FRAME_US) as f64 * 1e-6;
    let path = glide_path(rng, arena, e + 2.0, duration_s, speed);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let base = p.rate_per_px * e;
    let flap = move |t: f64| (2.0 * PI * f * t + phase).sin();
    let times = arrivals(rng, frames * FRAME_US, base, |t| base * (0.6 + 0.4 * flap(t).abs()));
    let events = times
        .into_iter()
        .map(|t| {
            let (cx, cy) = path.at(t);
            let (dx, dy) = if rng.gen_bool(0.4) {
                // elongated body
                (e / 5.0 * gauss(rng), e / 12.0 * gauss(rng))
            } else {
                let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let r = rng.gen_range(0.1..1.0) * e / 2.0;
                (side * r + 0.5 * gauss(rng), -0.6 * r * flap(t) + 0.5 * gauss(rng))
            };
            RawEvent {
                t,
                x: cx + dx,
                y: cy + dy,
                p: polarity(rng),
            }
        })
        .collect();
    (e, events)
}

fn gen_drone(config: &SynthConfig, rng: &mut ChaCha8Rng, arena: &Arena, frames: u64) -> (f64, Vec<RawEvent>) {
    let p = &config.drone;
    let e = uniform(rng, p.extent_px);
    let f = uniform(rng, p.propeller_hz);
    let duration_s = (frames * FRAME_US) as f64 * 1e-6;
    let path = hover_path(rng, arena, e + 2.0, duration_s, p.drift_px_s);
    let base = p.rate_per_px * e;
    let hub = 0.35 * e;
    let blade = 0.15 * e;
    let phases: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..2.0 * PI));
    let times = arrivals(rng, frames * FRAME_US, base, |_| base);
    let events = times
        .into_iter()
        .map(|t| {
            let (cx, cy) = path.at(t);
            let (dx, dy) = if rng.gen_bool(0.15) {
                (e / 8.0 * gauss(rng), e / 10.0 * gauss(rng))
            } else {
                // two-blade propeller at one of four corners
                let k = rng.gen_range(0..4usize);
                let (sx, sy) = [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)][k];
                let angle = 2.0 * PI * f * t + phases[k] + if rng.gen_bool(0.5) { PI } else { 0.0 };
                let r = rng.gen_range(0.3..1.0) * blade;
                (
                    sx * hub + r * angle.cos() + 0.4 * gauss(rng),
                    sy * 0.8 * hub + r * angle.sin() + 0.4 * gauss(rng),
                )
            };
            RawEvent {
                t,
                x: cx + dx,
                y: cy + dy,
                p: polarity(rng),
            }
        })
        .collect();
    (e, events)
}

/// Uniform flicker inside `bbox` over `frames` frames, no coherent motion.
pub fn background_events(config: &SynthConfig, bbox: &PixelBox, frames: u64, seed: u64) -> Vec<Event> {
    let mut rng = rng_from_seed(derive_seed(seed, 0x4247, 0));
    let rate = uniform(&mut rng, config.background.rate_ev_s);
    let mut events: Vec<Event> = arrivals(&mut rng, frames * FRAME_US, rate, |_| rate)
        .into_iter()
        .map(|t| {
            Event::new(
                ((t * 1e6) as u64).min(frames * FRAME_US - 1),
                rng.gen_range(bbox.x_min..=bbox.x_max),
                rng.gen_range(bbox.y_min..=bbox.y_max),
                polarity(&mut rng),
            )
        })
        .collect();
    events.sort_by_key(|e| (e.t, e.x, e.y, e.p.to_byte()));
    events
}

fn frame_boxes(class_label: ClassLabel, events: &[Event], frames: u64, arena: (u16, u16)) -> Vec<BoxRecord> {
    let mut bounds: Vec<Option<PixelBox>> = vec![None; frames as usize];
    for e in events {
        let k = (e.t / FRAME_US) as usize;
        let b = bounds[k].get_or_insert(PixelBox {
            x_min: e.x,
            y_min: e.y,
            x_max: e.x,
            y_max: e.y,
        });
        b.x_min = b.x_min.min(e.x);
        b.y_min = b.y_min.min(e.y);
        b.x_max = b.x_max.max(e.x);
        b.y_max = b.y_max.max(e.y);
    }
    // frames without events borrow a neighbor's box
    let first = bounds.iter().flatten().next().copied().unwrap_or(PixelBox {
        x_min: arena.0 / 2,
        y_min: arena.1 / 2,
        x_max: arena.0 / 2,
        y_max: arena.1 / 2,
    });
    let mut last = first;
    bounds
        .into_iter()
        .enumerate()
        .map(|(k, b)| {
            let mut b = b.unwrap_or(last);
            last = b;
            if b.x_min == b.x_max {
                if b.x_max + 1 < arena.0 { b.x_max += 1 } else { b.x_min -= 1 }
            }
            if b.y_min == b.y_max {
                if b.y_max + 1 < arena.1 { b.y_max += 1 } else { b.y_min -= 1 }
            }
            let k = k as u64;
            BoxRecord {
                track_id: 0,
                class_label,
                frame_index: k,
                t_start_us: k * FRAME_US,
                t_end_us: (k + 1) * FRAME_US,
                x_min: b.x_min,
                y_min: b.y_min,
                x_max: b.x_max,
                y_max: b.y_max,
            }
        })
        .collect()
}

/// Generates one track of `class_label` inside an arena of `config.arena`.
///
/// Objects emit along body, wing and propeller loci with jittered
/// timestamps; each frame's box is the tight bound of that frame's events.
/// Background tracks are static flicker patches. Same seed, same output.
pub fn gen_track(class_label: ClassLabel, config: &SynthConfig, seed: u64) -> GeneratedTrack {
    let mut rng = rng_from_seed(seed);
    let frames = sample_frames(config, &mut rng);
    let (aw, ah) = (config.arena[0], config.arena[1]);
    let arena = Arena {
        w: f64::from(aw),
        h: f64::from(ah),
    };
    if class_label == ClassLabel::Background {
        let [lo, hi] = config.background.extent_px;
        let w = rng.gen_range(lo..=hi);
        let h = rng.gen_range(lo..=hi);
        let x_min = rng.gen_range(0..aw - w);
        let y_min = rng.gen_range(0..ah - h);
        let bbox = PixelBox {
            x_min,
            y_min,
            x_max: x_min + w,
            y_max: y_min + h,
        };
        let events = background_events(config, &bbox, frames, seed);
        let boxes = (0..frames)
            .map(|k| BoxRecord {
                track_id: 0,
                class_label,
                frame_index: k,
                t_start_us: k * FRAME_US,
                t_end_us: (k + 1) * FRAME_US,
                x_min: bbox.x_min,
                y_min: bbox.y_min,
                x_max: bbox.x_max,
                y_max: bbox.y_max,
            })
            .collect();
        return GeneratedTrack {
            class_label,
            extent: f64::from(w.max(h)),
            frames,
            events,
            boxes,
        };
    }

    let (extent, raw) = match class_label {
        ClassLabel::Insect => gen_insect(config, &mut rng, &arena, frames),
        ClassLabel::Bird => gen_bird(config, &mut rng, &arena, frames),
        ClassLabel::Drone => gen_drone(config, &mut rng, &arena, frames),
        ClassLabel::Background => unreachable!(),
    };
    let end = frames * FRAME_US;
    let jitter = Normal::new(0.0, config.timestamp_jitter_us).expect("validated jitter");
    let mut events: Vec<Event> = raw
        .into_iter()
        .map(|r| {
            let t = (r.t * 1e6 + jitter.sample(&mut rng)).round().clamp(0.0, (end - 1) as f64) as u64;
            let x = r.x.round().clamp(0.0, f64::from(aw - 1)) as u16;
            let y = r.y.round().clamp(0.0, f64::from(ah - 1)) as u16;
            Event::new(t, x, y, r.p)
        })
        .collect();
    events.sort_by_key(|e| (e.t, e.x, e.y, e.p.to_byte()));
    let boxes = frame_boxes(class_label, &events, frames, (aw, ah));
    GeneratedTrack {
        class_label,
        extent,
        frames,
        events,
        boxes,
    }
}

/// Uniform sensor noise over `[0, duration_us)`.
pub fn ambient_noise(width: u16, height: u16, duration_us: u64, rate: f64, seed: u64) -> Vec<Event> {
    let mut rng = rng_from_seed(seed);
    let mean = rate * f64::from(width) * f64::from(height) * duration_us as f64 * 1e-6;
    if mean <= 0.0 || duration_us == 0 {
        return Vec::new();
    }
    let count = rand_distr::Poisson::new(mean).expect("positive mean").sample(&mut rng) as usize;
    (0..count)
        .map(|_| {
            Event::new(
                rng.gen_range(0..duration_us),
                rng.gen_range(0..width),
                rng.gen_range(0..height),
                polarity(&mut rng),
            )
        })
        .collect()
}
