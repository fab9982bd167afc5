//! Reducing a chunk's point set to exactly `N` points.
//!
//! Three strategies are available: uniform random subsets, the most recent
//! `N` events, and greedy farthest-point sampling over `(x, y, lambda * t)`.
//! Sets smaller than `N` are padded by cycling through the time-sorted points,
//! which leaves any max-pooled feature unchanged.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, rng_from_seed};
use crate::track::{NormalizedPointSet, Point4};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SamplingError {
    #[error("cannot sample from an empty point set")]
    EmptyInput,
    #[error("target size must be at least 1")]
    ZeroTarget,
    #[error("unknown sampling strategy {0:?} (expected random, recent or fps)")]
    UnknownStrategy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    MostRecent,
    Fps,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Random, Strategy::MostRecent, Strategy::Fps];

    /// The name used on the command line.
    pub fn flag(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::MostRecent => "recent",
            Strategy::Fps => "fps",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.flag())
    }
}

impl FromStr for Strategy {
    type Err = SamplingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Strategy::Random),
            "recent" | "most_recent" | "most-recent" => Ok(Strategy::MostRecent),
            "fps" => Ok(Strategy::Fps),
            other => Err(SamplingError::UnknownStrategy(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub strategy: Strategy,
    pub target_n: usize,
    pub seed: u64,
    /// Weight of the time axis in the FPS metric.
    #[serde(default = "default_time_weight")]
    pub time_weight: f64,
}

fn default_time_weight() -> f64 {
    1.0
}

impl SamplingSpec {
    pub fn new(strategy: Strategy, target_n: usize, seed: u64) -> Self {
        Self {
            strategy,
            target_n,
            seed,
            time_weight: 1.0,
        }
    }

    /// Samples `points` with a seed derived from this spec's seed and `salt`
    /// (typically a chunk id), so every chunk gets its own reproducible draw.
    pub fn apply(&self, points: &NormalizedPointSet, salt: u64) -> Result<NormalizedPointSet, SamplingError> {
        if self.target_n == 0 {
            return Err(SamplingError::ZeroTarget);
        }
        let seed = derive_seed(self.seed, 0x5a4d, salt);
        match self.strategy {
            Strategy::Random => sample_random(points, self.target_n, seed),
            Strategy::MostRecent => sample_most_recent(points, self.target_n),
            Strategy::Fps => sample_fps_weighted(points, self.target_n, seed, self.time_weight),
        }
    }
}

fn check(points: &NormalizedPointSet, n: usize) -> Result<(), SamplingError> {
    if points.is_empty() {
        return Err(SamplingError::EmptyInput);
    }
    if n == 0 {
        return Err(SamplingError::ZeroTarget);
    }
    Ok(())
}

fn gather(points: &[Point4], idx: &[usize]) -> NormalizedPointSet {
    idx.iter().map(|&i| points[i]).collect::<Vec<_>>().into()
}

/// Indices sorted by `(t, original index)`.
fn time_order(points: &[Point4]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| points[a][2].total_cmp(&points[b][2]).then(a.cmp(&b)));
    idx
}

/// Cycles through the time-sorted points until there are `n` of them.
pub fn pad_to_n(points: &NormalizedPointSet, n: usize) -> Result<NormalizedPointSet, SamplingError> {
    check(points, n)?;
    let order = time_order(points.points());
    let idx: Vec<usize> = order.iter().copied().cycle().take(n).collect();
    Ok(gather(points.points(), &idx))
}

/// Uniform subset without replacement, in original order.
pub fn sample_random(points: &NormalizedPointSet, n: usize, seed: u64) -> Result<NormalizedPointSet, SamplingError> {
    check(points, n)?;
    if points.len() < n {
        return pad_to_n(points, n);
    }
    let mut rng = rng_from_seed(seed);
    let mut idx = rand::seq::index::sample(&mut rng, points.len(), n).into_vec();
    idx.sort_unstable();
    Ok(gather(points.points(), &idx))
}

/// The `n` latest points; ties in `t` favor the later index.
pub fn sample_most_recent(points: &NormalizedPointSet, n: usize) -> Result<NormalizedPointSet, SamplingError> {
    check(points, n)?;
    if points.len() < n {
        return pad_to_n(points, n);
    }
    let order = time_order(points.points());
    Ok(gather(points.points(), &order[order.len() - n..]))
}

fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Greedy farthest-point selection over 3-D coordinates.
///
/// Starts at `start`, then repeatedly takes the point whose distance to the
/// selected set is largest (lowest index on ties). Returns indices in
/// selection order; `n` is clamped to the number of points.
pub fn farthest_point_indices(coords: &[[f64; 3]], n: usize, start: usize) -> Vec<usize> {
    let n = n.min(coords.len());
    if n == 0 {
        return Vec::new();
    }
    let mut selected = Vec::with_capacity(n);
    let mut min_d = vec![f64::INFINITY; coords.len()];
    let mut current = start;
    loop {
        selected.push(current);
        // selected points are never candidates again
        min_d[current] = f64::NEG_INFINITY;
        if selected.len() == n {
            break;
        }
        let c = coords[current];
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, (p, d)) in coords.iter().zip(min_d.iter_mut()).enumerate() {
            let nd = sq_dist(p, &c);
            if nd < *d {
                *d = nd;
            }
            if *d > best_d {
                best_d = *d;
                best = i;
            }
        }
        current = best;
    }
    selected
}

/// `(x, y, time_weight * t)` for each point.
pub fn fps_coords(points: &[Point4], time_weight: f64) -> Vec<[f64; 3]> {
    points.iter().map(|p| [p[0], p[1], time_weight * p[2]]).collect()
}

/// Indices chosen by farthest-point sampling with a seeded uniform start,
/// in selection order.
pub fn select_fps(points: &NormalizedPointSet, n: usize, seed: u64, time_weight: f64) -> Result<Vec<usize>, SamplingError> {
    check(points, n)?;
    let start = rng_from_seed(seed).gen_range(0..points.len());
    Ok(farthest_point_indices(&fps_coords(points.points(), time_weight), n, start))
}

/// Farthest-point sampling with `lambda = 1`; output keeps original order.
pub fn sample_fps(points: &NormalizedPointSet, n: usize, seed: u64) -> Result<NormalizedPointSet, SamplingError> {
    sample_fps_weighted(points, n, seed, 1.0)
}

pub fn sample_fps_weighted(
    points: &NormalizedPointSet,
    n: usize,
    seed: u64,
    time_weight: f64,
) -> Result<NormalizedPointSet, SamplingError> {
    check(points, n)?;
    if points.len() < n {
        return pad_to_n(points, n);
    }
    let mut idx = select_fps(points, n, seed, time_weight)?;
    idx.sort_unstable();
    Ok(gather(points.points(), &idx))
}
