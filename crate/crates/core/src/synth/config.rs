use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SynthError;
use crate::codec::{DEFAULT_HEIGHT, DEFAULT_WIDTH, FRAME_US};
use crate::track::MIN_TRACK_FRAMES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InsectParams {
    /// Body plus wing span in pixels.
    pub extent_px: [f64; 2],
    pub wingbeat_hz: [f64; 2],
    pub speed_px_s: [f64; 2],
    /// Standard deviation of the heading random walk, rad per sqrt(s).
    pub heading_churn: f64,
    /// Mean event rate per pixel of extent, events/s.
    pub rate_per_px: f64,
}

impl Default for InsectParams {
    fn default() -> Self {
        Self {
            extent_px: [3.0, 10.0],
            wingbeat_hz: [100.0, 400.0],
            speed_px_s: [40.0, 150.0],
            heading_churn: 6.0,
            rate_per_px: 1500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BirdParams {
    pub extent_px: [f64; 2],
    pub flap_hz: [f64; 2],
    pub speed_px_s: [f64; 2],
    /// Peak event rate per pixel of extent, events/s.
    pub rate_per_px: f64,
}

impl Default for BirdParams {
    fn default() -> Self {
        Self {
            extent_px: [10.0, 60.0],
            flap_hz: [2.0, 10.0],
            speed_px_s: [20.0, 120.0],
            rate_per_px: 200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DroneParams {
    pub extent_px: [f64; 2],
    pub propeller_hz: [f64; 2],
    /// Upper bound of the hover drift speed.
    pub drift_px_s: f64,
    /// Mean event rate per pixel of extent, events/s.
    pub rate_per_px: f64,
}

impl Default for DroneParams {
    fn default() -> Self {
        Self {
            extent_px: [20.0, 80.0],
            propeller_hz: [60.0, 120.0],
            drift_px_s: 15.0,
            rate_per_px: 700.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundParams {
    /// Event rate of a clutter patch, events/s.
    pub rate_ev_s: [f64; 2],
    /// Side range of a standalone patch; placed patches reuse object extents.
    pub extent_px: [u16; 2],
}

impl Default for BackgroundParams {
    fn default() -> Self {
        Self {
            rate_ev_s: [3000.0, 15000.0],
            extent_px: [16, 96],
        }
    }
}

/// Everything the synthetic dataset depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub width: u16,
    pub height: u16,
    pub tracks_per_class: usize,
    /// Track duration range in microseconds, sampled log-uniformly.
    pub duration_us: [u64; 2],
    /// Ambient noise over the whole sensor, events per pixel per second.
    pub noise_rate: f64,
    /// Objects of one scene each fly inside their own arena of this size.
    pub arena: [u16; 2],
    /// Tracks start at a random frame in `0..=max_start_frame`.
    pub max_start_frame: u64,
    pub timestamp_jitter_us: f64,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    pub insect: InsectParams,
    pub bird: BirdParams,
    pub drone: DroneParams,
    pub background: BackgroundParams,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            tracks_per_class: 100,
            duration_us: [MIN_TRACK_FRAMES as u64 * FRAME_US, 2_000_000],
            noise_rate: 0.1,
            arena: [320, 240],
            max_start_frame: 3,
            timestamp_jitter_us: 50.0,
            split: [0.70, 0.15, 0.15],
            insect: InsectParams::default(),
            bird: BirdParams::default(),
            drone: DroneParams::default(),
            background: BackgroundParams::default(),
        }
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<(), SynthError> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] > 0.0 && r[0] <= r[1]) {
        return Err(SynthError::InvalidConfig(format!("{name} must satisfy 0 < min <= max, got {r:?}")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        let min_us = MIN_TRACK_FRAMES as u64 * FRAME_US;
        if self.duration_us[0] < min_us || self.duration_us[0] > self.duration_us[1] {
            return bad(format!(
                "duration_us must satisfy {min_us} <= min <= max, got {:?}",
                self.duration_us
            ));
        }
        if self.arena[0] == 0 || self.arena[1] == 0 || self.arena[0] > self.width || self.arena[1] > self.height {
            return bad(format!("arena {:?} must fit the {}x{} sensor", self.arena, self.width, self.height));
        }
        if !(self.noise_rate.is_finite() && self.noise_rate >= 0.0) {
            return bad(format!("noise_rate must be non-negative, got {}", self.noise_rate));
        }
        if !(self.timestamp_jitter_us.is_finite() && self.timestamp_jitter_us >= 0.0) {
            return bad("timestamp_jitter_us must be non-negative".into());
        }
        let total: f64 = self.split.iter().sum();
        if self.split.iter().any(|&f| !(0.0..=1.0).contains(&f)) || (total - 1.0).abs() > 1e-9 {
            return bad(format!("split fractions must lie in [0, 1] and sum to 1, got {:?}", self.split));
        }
        check_range("insect.extent_px", self.insect.extent_px)?;
        check_range("insect.wingbeat_hz", self.insect.wingbeat_hz)?;
        check_range("insect.speed_px_s", self.insect.speed_px_s)?;
        check_range("bird.extent_px", self.bird.extent_px)?;
        check_range("bird.flap_hz", self.bird.flap_hz)?;
        check_range("bird.speed_px_s", self.bird.speed_px_s)?;
        check_range("drone.extent_px", self.drone.extent_px)?;
        check_range("drone.propeller_hz", self.drone.propeller_hz)?;
        check_range("background.rate_ev_s", self.background.rate_ev_s)?;
        for (name, rate) in [
            ("insect.rate_per_px", self.insect.rate_per_px),
            ("bird.rate_per_px", self.bird.rate_per_px),
            ("drone.rate_per_px", self.drone.rate_per_px),
        ] {
            if !(rate.is_finite() && rate > 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.insect.heading_churn >= 0.0 && self.drone.drift_px_s >= 0.0) {
            return bad("heading_churn and drift_px_s must be non-negative".into());
        }
        let largest = self.insect.extent_px[1].max(self.bird.extent_px[1]).max(self.drone.extent_px[1]);
        if 2.0 * largest + 4.0 > f64::from(self.arena[0].min(self.arena[1])) {
            return bad(format!("arena {:?} is too small for objects of {largest} px", self.arena));
        }
        let [lo, hi] = self.background.extent_px;
        if lo < 1 || lo > hi || hi >= self.arena[0].min(self.arena[1]) {
            return bad(format!("background.extent_px {:?} must fit the arena", self.background.extent_px));
        }
        Ok(())
    }

    /// Arenas per scene, laid out row-major.
    pub fn arena_grid(&self) -> (u16, u16) {
        (self.width / self.arena[0], self.height / self.arena[1])
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config always serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
