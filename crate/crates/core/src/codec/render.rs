use super::EventStream;

/// Per-pixel event counts over a time window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccumulationFrame {
    width: usize,
    height: usize,
    counts: Vec<u32>,
}

impl AccumulationFrame {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Count at row `y`, column `x`.
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.counts[y * self.width + x]
    }

    /// Row-major counts.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// Binary PGM (P5). Counts are written unscaled; maxval is the largest
    /// count (at least 1), with two-byte big-endian samples above 255 and
    /// counts above 65535 saturated.
    pub fn to_pgm(&self) -> Vec<u8> {
        let max = self.counts.iter().copied().max().unwrap_or(0).clamp(1, 65_535);
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, max).into_bytes();
        if max < 256 {
            out.extend(self.counts.iter().map(|&c| c as u8));
        } else {
            for &c in &self.counts {
                out.extend_from_slice(&(c.min(65_535) as u16).to_be_bytes());
            }
        }
        out
    }
}

/// Accumulates the events with `t0 <= t < t1` into a `height x width` grid.
/// An empty or inverted window yields an all-zero grid.
pub fn render_frame(stream: &EventStream, t0: u64, t1: u64) -> AccumulationFrame {
    let width = usize::from(stream.width());
    let height = usize::from(stream.height());
    let mut counts = vec![0u32; width * height];
    for e in stream.window(t0, t1) {
        counts[usize::from(e.y) * width + usize::from(e.x)] += 1;
    }
    AccumulationFrame {
        width,
        height,
        counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{Event, Polarity};

    #[test]
    fn empty_window_renders_zeros() {
        let s = EventStream::new(8, 8, vec![Event::new(100, 1, 1, Polarity::Positive)]).unwrap();
        let f = render_frame(&s, 0, 100);
        assert!(f.counts().iter().all(|&c| c == 0));
        assert_eq!(f.width(), 8);
        assert_eq!(f.height(), 8);
    }

    #[test]
    fn single_event_lands_at_row_y_col_x() {
        let s = EventStream::new(10, 10, vec![Event::new(0, 5, 7, Polarity::Negative)]).unwrap();
        let f = render_frame(&s, 0, 1);
        assert_eq!(f.get(5, 7), 1);
        assert_eq!(f.total(), 1);
    }

    #[test]
    fn pgm_header_and_payload() {
        let s = EventStream::new(
            3,
            2,
            vec![
                Event::new(0, 2, 1, Polarity::Positive),
                Event::new(1, 2, 1, Polarity::Positive),
            ],
        )
        .unwrap();
        let pgm = render_frame(&s, 0, 10).to_pgm();
        let header = b"P5\n3 2\n2\n";
        assert_eq!(&pgm[..header.len()], header);
        assert_eq!(&pgm[header.len()..], &[0, 0, 0, 0, 0, 2]);
    }

    #[test]
    fn wide_counts_use_two_byte_samples() {
        let events = (0..300).map(|t| Event::new(t, 0, 0, Polarity::Positive)).collect();
        let s = EventStream::new(2, 1, events).unwrap();
        let pgm = render_frame(&s, 0, 1000).to_pgm();
        let header = b"P5\n2 1\n300\n";
        assert_eq!(&pgm[..header.len()], header);
        assert_eq!(&pgm[header.len()..], &[1, 44, 0, 0]);
    }
}
