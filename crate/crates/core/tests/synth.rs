use std::collections::BTreeMap;

use evclass::codec::ClassLabel;
use evclass::rng::derive_seed;
use evclass::synth::{gen_track, plan_dataset, regenerate, write_dataset, Manifest, SynthConfig};
use evclass::track::assemble_tracks;

fn rate_per_extent(class: ClassLabel, config: &SynthConfig, n: u64) -> f64 {
    let mut total = 0.0;
    for i in 0..n {
        let t = gen_track(class, config, derive_seed(9, class.index() as u64, i));
        total += t.events.len() as f64 / (t.duration_us() as f64 * 1e-6) / t.extent;
    }
    total / n as f64
}

#[test]
fn drones_fire_three_times_faster_than_birds() {
    let config = SynthConfig::default();
    let drone = rate_per_extent(ClassLabel::Drone, &config, 100);
    let bird = rate_per_extent(ClassLabel::Bird, &config, 100);
    assert!(drone >= 3.0 * bird, "drone {drone:.0} vs bird {bird:.0} ev/s/px");
}

/// Frequency of the largest periodogram bin (DC excluded) of a count series.
fn dominant_hz(counts: &[f64], bin_s: f64) -> f64 {
    let n = counts.len();
    let mean = counts.iter().sum::<f64>() / n as f64;
    let mut best = (0.0, 0usize);
    for k in 1..n / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, c) in counts.iter().enumerate() {
            let a = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
            re += (c - mean) * a.cos();
            im += (c - mean) * a.sin();
        }
        let power = re * re + im * im;
        if power > best.0 {
            best = (power, k);
        }
    }
    best.1 as f64 / (n as f64 * bin_s)
}

#[test]
fn insect_event_counts_oscillate_at_wingbeat_rates() {
    let config = SynthConfig {
        duration_us: [200_000, 400_000],
        ..SynthConfig::default()
    };
    for i in 0..20 {
        let t = gen_track(ClassLabel::Insect, &config, derive_seed(4, 0, i));
        let bin = 200u64;
        let bins = (t.duration_us() / bin) as usize;
        let mut counts = vec![0.0; bins];
        for e in &t.events {
            if let Some(c) = counts.get_mut((e.t / bin) as usize) {
                *c += 1.0;
            }
        }
        let hz = dominant_hz(&counts, bin as f64 * 1e-6);
        assert!((100.0..=400.0).contains(&hz), "track {i}: {hz:.1} Hz");
    }
}

#[test]
fn generated_tracks_keep_events_inside_boxes() {
    let config = SynthConfig::default();
    for class in ClassLabel::ALL.into_iter().skip(1) {
        for i in 0..10 {
            let t = gen_track(class, &config, i);
            assert!(t.boxes.len() >= 3);
            for e in &t.events {
                let b = &t.boxes[(e.t / 33_000) as usize];
                assert!(b.pixel_box().contains(e.x, e.y));
            }
        }
    }
}

fn small() -> SynthConfig {
    SynthConfig {
        tracks_per_class: 10,
        duration_us: [99_000, 300_000],
        ..SynthConfig::default()
    }
}

#[test]
fn manifest_lists_every_track_in_one_split() {
    let manifest = plan_dataset(&small()).unwrap();
    assert_eq!(manifest.tracks.len(), 40);
    let mut seen: BTreeMap<u64, &str> = BTreeMap::new();
    for t in &manifest.tracks {
        assert!(seen.insert(t.track_id, &t.split).is_none(), "track {} listed twice", t.track_id);
    }
    for class in ClassLabel::ALL {
        assert_eq!(manifest.tracks.iter().filter(|t| t.class == class).count(), 10);
    }
}

#[test]
fn regeneration_is_byte_identical_and_valid() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&small(), a.path()).unwrap();
    let reread = Manifest::read(a.path().join("manifest.json")).unwrap();
    assert_eq!(reread, manifest);
    regenerate(&reread, b.path()).unwrap();
    for rec in &manifest.recordings {
        for file in [&rec.evf, &rec.annotations] {
            let x = std::fs::read(a.path().join(file)).unwrap();
            let y = std::fs::read(b.path().join(file)).unwrap();
            assert!(x == y, "{file} differs");
        }
        let stream = evclass::codec::decode_events(&std::fs::read(a.path().join(&rec.evf)).unwrap()).unwrap();
        let ann = evclass::codec::read_annotations(&std::fs::read_to_string(a.path().join(&rec.annotations)).unwrap()).unwrap();
        assert!(assemble_tracks(&stream, &ann).unwrap().rejected.is_empty());
    }
}
