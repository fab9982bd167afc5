use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::motion::{ambient_noise, background_events, gen_track, sample_frames, GeneratedTrack};
use super::{SynthConfig, SynthError};
use crate::codec::{encode_events, write_annotations, AnnotationSet, BoxRecord, ClassLabel, EventStream, PixelBox, FRAME_US};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::track::{NegativeSampler, DEFAULT_MAX_ATTEMPTS};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SPLITS: [&str; 3] = ["train", "val", "test"];

/// One recording (scene) of the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordingEntry {
    pub name: String,
    pub evf: String,
    pub annotations: String,
    pub frames: u64,
    pub noise_seed: u64,
}

/// Where a track lives and how to regenerate it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackEntry {
    pub track_id: u64,
    pub class: ClassLabel,
    pub seed: u64,
    pub split: String,
    pub recording: String,
    pub first_frame: u64,
    pub frames: u64,
    /// Arena offset of an object track.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[u16; 2]>,
    /// Sensor box of a background patch.
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub patch: Option<PixelBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub config: SynthConfig,
    pub recordings: Vec<RecordingEntry>,
    pub tracks: Vec<TrackEntry>,
}

impl Manifest {
    pub fn split_of(&self) -> BTreeMap<u64, &str> {
        self.tracks.iter().map(|t| (t.track_id, t.split.as_str())).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest always serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let m: Manifest = serde_json::from_str(text).map_err(|e| SynthError::Manifest(e.to_string()))?;
        if m.config.hash() != m.config_hash {
            return Err(SynthError::Manifest("config_hash does not match the embedded config".into()));
        }
        Ok(m)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_json(&text)?)
    }
}

/// A generated recording held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub name: String,
    pub stream: EventStream,
    pub annotations: AnnotationSet,
}

/// Stratified split: per class, a seeded shuffle cut at the configured fractions.
fn assign_splits(config: &SynthConfig, class: ClassLabel, n: usize) -> Vec<&'static str> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(derive_seed(config.seed, 0x5350, class.index() as u64)));
    let n_train = (config.split[0] * n as f64).round() as usize;
    let n_val = ((config.split[1] * n as f64).round() as usize).min(n - n_train.min(n));
    let mut out = vec![SPLITS[2]; n];
    for (rank, &i) in order.iter().enumerate() {
        if rank < n_train {
            out[i] = SPLITS[0];
        } else if rank < n_train + n_val {
            out[i] = SPLITS[1];
        }
    }
    out
}

fn track_seed(config: &SynthConfig, class: ClassLabel, i: usize) -> u64 {
    derive_seed(config.seed, 1 + class.index() as u64, i as u64)
}

/// Lays out every track of the dataset without rendering any events.
///
/// Object tracks fill the arenas of consecutive scenes in a seeded order;
/// background patches are then placed by the negative sampler so they avoid
/// every object box of their scene.
pub fn plan_dataset(config: &SynthConfig) -> Result<Manifest, SynthError> {
    config.validate()?;
    let n = config.tracks_per_class;
    let (cols, rows) = config.arena_grid();
    let per_scene = (cols * rows) as usize;

    let mut tracks = Vec::with_capacity(4 * n);
    for class in ClassLabel::ALL {
        let splits = assign_splits(config, class, n);
        for (i, split) in splits.into_iter().enumerate() {
            tracks.push(TrackEntry {
                track_id: (class.index() * n + i + 1) as u64,
                class,
                seed: track_seed(config, class, i),
                split: split.to_string(),
                recording: String::new(),
                first_frame: 0,
                frames: 0,
                origin: None,
                patch: None,
            });
        }
    }

    let mut objects: Vec<usize> = (0..tracks.len())
        .filter(|&i| tracks[i].class != ClassLabel::Background)
        .collect();
    objects.shuffle(&mut rng_from_seed(derive_seed(config.seed, 0x4f52, 0)));
    let background: Vec<usize> = (0..tracks.len())
        .filter(|&i| tracks[i].class == ClassLabel::Background)
        .collect();
    let scenes = objects.len().div_ceil(per_scene).max(background.len().div_ceil(per_scene)).max(1);
    let scene_name = |s: usize| format!("scene_{s:03}");

    let mut place_rng = rng_from_seed(derive_seed(config.seed, 0x504c, 0));
    let mut generated: Vec<Option<GeneratedTrack>> = vec![None; tracks.len()];
    for (k, &i) in objects.iter().enumerate() {
        let slot = (k % per_scene) as u16;
        let t = &mut tracks[i];
        let g = gen_track(t.class, config, t.seed);
        t.recording = scene_name(k / per_scene);
        t.first_frame = place_rng.gen_range(0..=config.max_start_frame);
        t.frames = g.frames;
        t.origin = Some([(slot % cols) * config.arena[0], (slot / cols) * config.arena[1]]);
        generated[i] = Some(g);
    }
    for (k, &i) in background.iter().enumerate() {
        let t = &mut tracks[i];
        t.recording = scene_name(k % scenes);
        t.frames = sample_frames(config, &mut rng_from_seed(t.seed));
    }

    let mut recordings = Vec::with_capacity(scenes);
    for s in 0..scenes {
        let name = scene_name(s);
        let members: Vec<usize> = (0..tracks.len()).filter(|&i| tracks[i].recording == name).collect();
        let mut records: Vec<BoxRecord> = Vec::new();
        let mut frames = 0;
        for &i in &members {
            let t = &tracks[i];
            frames = frames.max(t.first_frame + t.frames);
            if let (Some(g), Some([dx, dy])) = (&generated[i], t.origin) {
                records.extend(g.placed(t.track_id, dx, dy, t.first_frame).1);
            }
        }
        frames += 1;
        let objects_ann = AnnotationSet::from_records(records).map_err(|e| SynthError::Layout(e.to_string()))?;
        let mut sampler = NegativeSampler::new(
            config.width,
            config.height,
            frames * FRAME_US,
            &objects_ann,
            DEFAULT_MAX_ATTEMPTS,
        )
        .map_err(|e| SynthError::Layout(e.to_string()))?;
        let mut rng = rng_from_seed(derive_seed(config.seed, 0x4e45, s as u64));
        let patches: Vec<usize> = members.iter().copied().filter(|&i| tracks[i].class == ClassLabel::Background).collect();
        for i in patches {
            let patch = sampler
                .sample_patch(tracks[i].frames, &mut rng)
                .map_err(|e| SynthError::Layout(format!("{name}: {e}")))?;
            tracks[i].first_frame = patch.first_frame;
            tracks[i].patch = Some(patch.bbox);
        }
        recordings.push(RecordingEntry {
            evf: format!("{name}.evf"),
            annotations: format!("{name}.jsonl"),
            name,
            frames,
            noise_seed: derive_seed(config.seed, 0x4e4f, s as u64),
        });
    }

    Ok(Manifest {
        config_hash: config.hash(),
        config: config.clone(),
        recordings,
        tracks,
    })
}

/// Renders one recording from its manifest entries alone.
pub fn render_recording(manifest: &Manifest, name: &str) -> Result<Recording, SynthError> {
    let config = &manifest.config;
    let rec = manifest
        .recordings
        .iter()
        .find(|r| r.name == name)
        .ok_or_else(|| SynthError::Manifest(format!("no recording named {name}")))?;
    let duration = rec.frames * FRAME_US;
    let mut events = ambient_noise(config.width, config.height, duration, config.noise_rate, rec.noise_seed);
    let mut records = Vec::new();
    for t in manifest.tracks.iter().filter(|t| t.recording == name) {
        if t.first_frame + t.frames > rec.frames {
            return Err(SynthError::Manifest(format!("track {} outlasts {name}", t.track_id)));
        }
        match (t.origin, t.patch) {
            (Some([dx, dy]), None) => {
                let g = gen_track(t.class, config, t.seed);
                if g.frames != t.frames {
                    return Err(SynthError::Manifest(format!("track {} has {} frames, manifest says {}", t.track_id, g.frames, t.frames)));
                }
                if u32::from(dx) + u32::from(config.arena[0]) > u32::from(config.width)
                    || u32::from(dy) + u32::from(config.arena[1]) > u32::from(config.height)
                {
                    return Err(SynthError::Manifest(format!("track {} placed off the sensor", t.track_id)));
                }
                let (ev, boxes) = g.placed(t.track_id, dx, dy, t.first_frame);
                events.extend(ev);
                records.extend(boxes);
            }
            (None, Some(bbox)) => {
                if !bbox.fits(config.width, config.height) || bbox.x_min >= bbox.x_max || bbox.y_min >= bbox.y_max {
                    return Err(SynthError::Manifest(format!("track {} has an invalid patch", t.track_id)));
                }
                let dt = t.first_frame * FRAME_US;
                events.extend(background_events(config, &bbox, t.frames, t.seed).into_iter().map(|mut e| {
                    e.t += dt;
                    e
                }));
                records.extend((0..t.frames).map(|k| {
                    let f = t.first_frame + k;
                    BoxRecord {
                        track_id: t.track_id,
                        class_label: t.class,
                        frame_index: f,
                        t_start_us: f * FRAME_US,
                        t_end_us: (f + 1) * FRAME_US,
                        x_min: bbox.x_min,
                        y_min: bbox.y_min,
                        x_max: bbox.x_max,
                        y_max: bbox.y_max,
                    }
                }));
            }
            _ => {
                return Err(SynthError::Manifest(format!(
                    "track {} needs exactly one of origin and box",
                    t.track_id
                )))
            }
        }
    }
    events.sort_by_key(|e| (e.t, e.x, e.y, e.p.to_byte()));
    let stream = EventStream::new(config.width, config.height, events).map_err(|e| SynthError::Layout(e.to_string()))?;
    let annotations = AnnotationSet::from_records(records).map_err(|e| SynthError::Layout(e.to_string()))?;
    Ok(Recording {
        name: name.to_string(),
        stream,
        annotations,
    })
}

/// Plans and renders the whole dataset in memory.
pub fn gen_dataset(config: &SynthConfig) -> Result<(Manifest, Vec<Recording>), SynthError> {
    let manifest = plan_dataset(config)?;
    let recordings = render_all(&manifest)?;
    Ok((manifest, recordings))
}

fn render_all(manifest: &Manifest) -> Result<Vec<Recording>, SynthError> {
    manifest
        .recordings
        .par_iter()
        .map(|r| render_recording(manifest, &r.name))
        .collect()
}

fn write_recordings(manifest: &Manifest, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for entry in &manifest.recordings {
        let rec = render_recording(manifest, &entry.name)?;
        let evf = dir.join(&entry.evf);
        std::fs::write(&evf, encode_events(&rec.stream)).map_err(|e| Error::io(&evf, e))?;
        let ann = dir.join(&entry.annotations);
        std::fs::write(&ann, write_annotations(&rec.annotations)).map_err(|e| Error::io(&ann, e))?;
    }
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest.to_json()).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Generates the dataset into `dir`: one EVF1 and one annotation file per
/// recording, plus `manifest.json`.
pub fn write_dataset(config: &SynthConfig, dir: impl AsRef<Path>) -> Result<Manifest> {
    let manifest = plan_dataset(config)?;
    write_recordings(&manifest, dir.as_ref())?;
    Ok(manifest)
}

/// Rewrites every file listed in `manifest` from its seeds.
pub fn regenerate(manifest: &Manifest, dir: impl AsRef<Path>) -> Result<()> {
    if manifest.config.hash() != manifest.config_hash {
        return Err(SynthError::Manifest("config_hash does not match the embedded config".into()).into());
    }
    write_recordings(manifest, dir.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::assemble_tracks;
    use std::collections::HashSet;

    fn small() -> SynthConfig {
        SynthConfig {
            tracks_per_class: 10,
            duration_us: [99_000, 400_000],
            ..SynthConfig::default()
        }
    }

    #[test]
    fn manifest_lists_every_track_once() {
        let m = plan_dataset(&small()).unwrap();
        assert_eq!(m.tracks.len(), 40);
        let ids: HashSet<u64> = m.tracks.iter().map(|t| t.track_id).collect();
        assert_eq!(ids.len(), 40);
        for class in ClassLabel::ALL {
            let split_counts: Vec<usize> = SPLITS
                .iter()
                .map(|s| m.tracks.iter().filter(|t| t.class == class && t.split == *s).count())
                .collect();
            assert_eq!(split_counts, vec![7, 2, 1]);
        }
    }

    #[test]
    fn recordings_assemble_without_rejections() {
        let (m, recs) = gen_dataset(&small()).unwrap();
        assert_eq!(recs.len(), m.recordings.len());
        let mut seen = 0;
        for r in &recs {
            let a = assemble_tracks(&r.stream, &r.annotations).unwrap();
            assert!(a.rejected.is_empty());
            seen += a.tracks.len();
            for t in &a.tracks {
                for e in &t.events {
                    assert!(t.box_at(e.t).unwrap().pixel_box().contains(e.x, e.y));
                }
            }
        }
        assert_eq!(seen, 40);
    }

    #[test]
    fn background_patches_avoid_objects() {
        let (_, recs) = gen_dataset(&small()).unwrap();
        for r in &recs {
            let bg: Vec<&BoxRecord> = r.annotations.records().filter(|b| b.class_label == ClassLabel::Background).collect();
            for b in &bg {
                for o in r.annotations.records().filter(|o| o.track_id != b.track_id) {
                    let overlap = b.t_start_us < o.t_end_us && o.t_start_us < b.t_end_us && b.pixel_box().intersects(&o.pixel_box());
                    assert!(!overlap, "{} meets {}", b.track_id, o.track_id);
                }
            }
        }
    }

    #[test]
    fn manifest_json_round_trips() {
        let m = plan_dataset(&small()).unwrap();
        assert_eq!(Manifest::from_json(&m.to_json()).unwrap(), m);
        let mut bad = m.clone();
        bad.config.seed += 1;
        assert!(Manifest::from_json(&bad.to_json()).is_err());
    }
}
