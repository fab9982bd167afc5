use super::TrackError;
use crate::codec::{AnnotationSet, BoxRecord, ClassLabel, Event, EventStream};

/// Tracks shorter than this many annotation frames (99 ms) are not valid.
pub const MIN_TRACK_FRAMES: usize = 3;

/// An annotated object together with the events its boxes enclose.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Track {
    pub track_id: u64,
    pub class_label: ClassLabel,
    pub boxes: Vec<BoxRecord>,
    /// Per-box crops, in time order.
    pub events: Vec<Event>,
}

impl Track {
    pub fn frame_count(&self) -> usize {
        self.boxes.len()
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    /// The box whose frame window contains `t`.
    pub fn box_at(&self, t: u64) -> Option<&BoxRecord> {
        let i = self.boxes.partition_point(|b| b.t_end_us <= t);
        self.boxes.get(i).filter(|b| b.covers_time(t))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub track_id: u64,
    pub class_label: ClassLabel,
    pub frame_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assembly {
    pub tracks: Vec<Track>,
    /// Tracks dropped for having fewer than [`MIN_TRACK_FRAMES`] frames.
    pub rejected: Vec<Rejection>,
}

/// Crops each annotated track out of the stream, box by box.
pub fn assemble_tracks(stream: &EventStream, ann: &AnnotationSet) -> Result<Assembly, TrackError> {
    let mut out = Assembly::default();
    for at in ann.tracks() {
        for b in &at.boxes {
            if !b.pixel_box().fits(stream.width(), stream.height()) {
                return Err(TrackError::GeometryMismatch {
                    track_id: at.track_id,
                    frame_index: b.frame_index,
                    width: stream.width(),
                    height: stream.height(),
                });
            }
        }
        if at.boxes.len() < MIN_TRACK_FRAMES {
            out.rejected.push(Rejection {
                track_id: at.track_id,
                class_label: at.class_label,
                frame_count: at.boxes.len(),
            });
            continue;
        }
        let events = at
            .boxes
            .iter()
            .flat_map(|b| {
                let pb = b.pixel_box();
                stream
                    .window(b.t_start_us, b.t_end_us)
                    .iter()
                    .filter(move |e| pb.contains(e.x, e.y))
                    .copied()
            })
            .collect();
        out.tracks.push(Track {
            track_id: at.track_id,
            class_label: at.class_label,
            boxes: at.boxes.clone(),
            events,
        });
    }
    Ok(out)
}
