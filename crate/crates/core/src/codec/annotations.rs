use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Duration of one annotation frame in microseconds.
pub const FRAME_US: u64 = 33_000;

/// Object classes. The discriminant is the class index used by the models,
/// confusion matrices and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Background = 0,
    Bird = 1,
    Insect = 2,
    Drone = 3,
}

impl ClassLabel {
    pub const COUNT: usize = 4;
    pub const ALL: [ClassLabel; 4] = [
        ClassLabel::Background,
        ClassLabel::Bird,
        ClassLabel::Insect,
        ClassLabel::Drone,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Background => "background",
            ClassLabel::Bird => "bird",
            ClassLabel::Insect => "insect",
            ClassLabel::Drone => "drone",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelBox {
    pub x_min: u16,
    pub y_min: u16,
    pub x_max: u16,
    pub y_max: u16,
}

impl PixelBox {
    pub fn contains(&self, x: u16, y: u16) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn intersects(&self, other: &PixelBox) -> bool {
        self.x_min <= other.x_max
            && other.x_min <= self.x_max
            && self.y_min <= other.y_max
            && other.y_min <= self.y_max
    }

    pub fn width(&self) -> u16 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> u16 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (f64::from(self.x_min) + f64::from(self.x_max)) / 2.0,
            (f64::from(self.y_min) + f64::from(self.y_max)) / 2.0,
        )
    }

    pub fn fits(&self, width: u16, height: u16) -> bool {
        self.x_max < width && self.y_max < height
    }
}

/// One 33 ms bounding-box annotation of one object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRecord {
    pub track_id: u64,
    #[serde(rename = "class")]
    pub class_label: ClassLabel,
    pub frame_index: u64,
    pub t_start_us: u64,
    pub t_end_us: u64,
    pub x_min: u16,
    pub y_min: u16,
    pub x_max: u16,
    pub y_max: u16,
}

impl BoxRecord {
    pub fn pixel_box(&self) -> PixelBox {
        PixelBox {
            x_min: self.x_min,
            y_min: self.y_min,
            x_max: self.x_max,
            y_max: self.y_max,
        }
    }

    pub fn covers_time(&self, t: u64) -> bool {
        t >= self.t_start_us && t < self.t_end_us
    }

    fn check(&self) -> Result<(), String> {
        if self.t_end_us.checked_sub(self.t_start_us) != Some(FRAME_US) {
            return Err(format!(
                "frame window [{}, {}) is not {FRAME_US} us long",
                self.t_start_us, self.t_end_us
            ));
        }
        if self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(format!(
                "degenerate box x {}..{} y {}..{}",
                self.x_min, self.x_max, self.y_min, self.y_max
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnnotationError {
    #[error("line {line}: {message}")]
    SchemaError { line: usize, message: String },
    #[error("track {track_id}: {message}")]
    InconsistentTrack { track_id: u64, message: String },
}

/// All boxes of one track identity, ordered by frame index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedTrack {
    pub track_id: u64,
    pub class_label: ClassLabel,
    pub boxes: Vec<BoxRecord>,
}

/// Box records grouped by track identity.
///
/// Every track has a single class and consecutive frame indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationSet {
    tracks: BTreeMap<u64, AnnotatedTrack>,
}

impl AnnotationSet {
    /// Groups records by `track_id`; input order is irrelevant.
    pub fn from_records(
        records: impl IntoIterator<Item = BoxRecord>,
    ) -> Result<Self, AnnotationError> {
        let mut grouped: BTreeMap<u64, Vec<BoxRecord>> = BTreeMap::new();
        for r in records {
            grouped.entry(r.track_id).or_default().push(r);
        }
        let mut tracks = BTreeMap::new();
        for (track_id, mut boxes) in grouped {
            let class_label = boxes[0].class_label;
            if let Some(other) = boxes.iter().find(|b| b.class_label != class_label) {
                return Err(AnnotationError::InconsistentTrack {
                    track_id,
                    message: format!("mixed labels {class_label} and {}", other.class_label),
                });
            }
            boxes.sort_by_key(|b| b.frame_index);
            for pair in boxes.windows(2) {
                if pair[1].frame_index != pair[0].frame_index + 1 {
                    return Err(AnnotationError::InconsistentTrack {
                        track_id,
                        message: format!(
                            "frame {} followed by frame {}",
                            pair[0].frame_index, pair[1].frame_index
                        ),
                    });
                }
                if pair[1].t_start_us < pair[0].t_end_us {
                    return Err(AnnotationError::InconsistentTrack {
                        track_id,
                        message: format!("frame {} overlaps its predecessor", pair[1].frame_index),
                    });
                }
            }
            tracks.insert(
                track_id,
                AnnotatedTrack {
                    track_id,
                    class_label,
                    boxes,
                },
            );
        }
        Ok(Self { tracks })
    }

    pub fn tracks(&self) -> impl Iterator<Item = &AnnotatedTrack> {
        self.tracks.values()
    }

    pub fn track(&self, track_id: u64) -> Option<&AnnotatedTrack> {
        self.tracks.get(&track_id)
    }

    pub fn records(&self) -> impl Iterator<Item = &BoxRecord> {
        self.tracks.values().flat_map(|t| t.boxes.iter())
    }

    pub fn track_count(&self) -> usize {
        self.tracks.len()
    }

    pub fn record_count(&self) -> usize {
        self.tracks.values().map(|t| t.boxes.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }
}

/// Parses JSON-lines annotations. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn read_annotations(text: &str) -> Result<AnnotationSet, AnnotationError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: BoxRecord =
            serde_json::from_str(line).map_err(|e| AnnotationError::SchemaError {
                line: i + 1,
                message: e.to_string(),
            })?;
        rec.check()
            .map_err(|message| AnnotationError::SchemaError {
                line: i + 1,
                message,
            })?;
        records.push(rec);
    }
    AnnotationSet::from_records(records)
}

/// Canonical JSON-lines form: tracks by id, boxes by frame, fixed key order.
pub fn write_annotations(set: &AnnotationSet) -> String {
    let mut out = String::new();
    for rec in set.records() {
        out.push_str(&serde_json::to_string(rec).expect("box records always serialize"));
        out.push('\n');
    }
    out
}
