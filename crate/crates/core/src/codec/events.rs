use serde::{Deserialize, Serialize};

/// Sensor width of the reference camera, in pixels.
pub const DEFAULT_WIDTH: u16 = 1280;
/// Sensor height of the reference camera, in pixels.
pub const DEFAULT_HEIGHT: u16 = 720;

pub const EVF1_MAGIC: &[u8; 4] = b"EVF1";
pub const EVF1_HEADER_LEN: usize = 16;
pub const EVF1_RECORD_LEN: usize = 13;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("bad magic {found:?}, expected \"EVF1\"")]
    BadMagic { found: Vec<u8> },
    #[error("truncated input: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("{extra} trailing bytes after the last declared record")]
    TrailingBytes { extra: u64 },
    #[error("event {index} at ({x}, {y}) lies outside the {width}x{height} sensor")]
    OutOfBounds {
        index: usize,
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },
    #[error("event {index} has timestamp {t} earlier than its predecessor {previous}")]
    Unordered { index: usize, t: u64, previous: u64 },
    #[error("event {index} has polarity byte {value}, expected 0 or 1")]
    BadPolarity { index: usize, value: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    pub fn to_byte(self) -> u8 {
        match self {
            Polarity::Negative => 0,
            Polarity::Positive => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Polarity::Negative),
            1 => Some(Polarity::Positive),
            _ => None,
        }
    }

    /// `-1.0` for negative events, `+1.0` for positive ones.
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Negative => -1.0,
            Polarity::Positive => 1.0,
        }
    }
}

/// One asynchronous brightness change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    /// Microseconds since stream start.
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub p: Polarity,
}

impl Event {
    pub fn new(t: u64, x: u16, y: u16, p: Polarity) -> Self {
        Self { t, x, y, p }
    }
}

/// A time-ordered sequence of events from a sensor of known geometry.
///
/// Construction validates that every event lies on the sensor and that
/// timestamps never decrease; equal timestamps keep their given order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    width: u16,
    height: u16,
    events: Vec<Event>,
}

impl EventStream {
    pub fn new(width: u16, height: u16, events: Vec<Event>) -> Result<Self, CodecError> {
        let mut previous = 0u64;
        for (index, e) in events.iter().enumerate() {
            if e.x >= width || e.y >= height {
                return Err(CodecError::OutOfBounds {
                    index,
                    x: e.x,
                    y: e.y,
                    width,
                    height,
                });
            }
            if e.t < previous {
                return Err(CodecError::Unordered {
                    index,
                    t: e.t,
                    previous,
                });
            }
            previous = e.t;
        }
        Ok(Self {
            width,
            height,
            events,
        })
    }

    pub fn empty(width: u16, height: u16) -> Self {
        Self {
            width,
            height,
            events: Vec::new(),
        }
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events with `t0 <= t < t1`, found by binary search.
    pub fn window(&self, t0: u64, t1: u64) -> &[Event] {
        if t1 <= t0 {
            return &[];
        }
        let lo = self.events.partition_point(|e| e.t < t0);
        let hi = self.events.partition_point(|e| e.t < t1);
        &self.events[lo..hi]
    }

    /// One past the last timestamp, or 0 for an empty stream.
    pub fn end_time(&self) -> u64 {
        self.events.last().map_or(0, |e| e.t + 1)
    }
}

/// Serializes a stream to the EVF1 layout:
///
/// ```text
/// "EVF1" | width u16 | height u16 | count u64 | count x { t u64, x u16, y u16, p u8 }
/// ```
///
/// All integers are little-endian.
pub fn encode_events(stream: &EventStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(EVF1_HEADER_LEN + stream.len() * EVF1_RECORD_LEN);
    out.extend_from_slice(EVF1_MAGIC);
    out.extend_from_slice(&stream.width.to_le_bytes());
    out.extend_from_slice(&stream.height.to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for e in &stream.events {
        out.extend_from_slice(&e.t.to_le_bytes());
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(e.p.to_byte());
    }
    out
}

fn u16_at(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    let mut buf = [0u8; 8];
    buf.copy_from_slice(&bytes[at..at + 8]);
    u64::from_le_bytes(buf)
}

/// Parses an EVF1 byte sequence, rejecting anything malformed.
pub fn decode_events(bytes: &[u8]) -> Result<EventStream, CodecError> {
    if bytes.len() < 4 || &bytes[..4] != EVF1_MAGIC {
        return Err(CodecError::BadMagic {
            found: bytes[..bytes.len().min(4)].to_vec(),
        });
    }
    if bytes.len() < EVF1_HEADER_LEN {
        return Err(CodecError::Truncated {
            expected: EVF1_HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let width = u16_at(bytes, 4);
    let height = u16_at(bytes, 6);
    let count = u64_at(bytes, 8);
    let actual = bytes.len() as u64;
    let expected = count
        .checked_mul(EVF1_RECORD_LEN as u64)
        .and_then(|n| n.checked_add(EVF1_HEADER_LEN as u64));
    match expected {
        Some(expected) if expected == actual => {}
        Some(expected) if expected < actual => {
            return Err(CodecError::TrailingBytes {
                extra: actual - expected,
            })
        }
        _ => {
            return Err(CodecError::Truncated {
                expected: expected.unwrap_or(u64::MAX),
                actual,
            })
        }
    }

    let mut events = Vec::with_capacity(count as usize);
    for (index, rec) in bytes[EVF1_HEADER_LEN..]
        .chunks_exact(EVF1_RECORD_LEN)
        .enumerate()
    {
        let p = Polarity::from_byte(rec[12]).ok_or(CodecError::BadPolarity {
            index,
            value: rec[12],
        })?;
        events.push(Event {
            t: u64_at(rec, 0),
            x: u16_at(rec, 8),
            y: u16_at(rec, 10),
            p,
        });
    }
    EventStream::new(width, height, events)
}
