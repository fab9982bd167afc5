mod common;

use evclass::model::{EncoderConfig, PointClassifier};
use evclass::rng::rng_from_seed;
use evclass::sampling::{pad_to_n, sample_fps, sample_most_recent, sample_random, select_fps, SamplingSpec, Strategy};
use evclass::track::NormalizedPointSet;
use rand::Rng;

#[test]
fn fps_matches_brute_force_oracle() {
    for seed in 0..200u64 {
        let mut rng = rng_from_seed(seed);
        let n = rng.gen_range(1..=64);
        let m = rng.gen_range(1..=n);
        let pts = common::random_points(&mut rng, n);
        let got = select_fps(&pts, m, seed, 1.0).unwrap();
        assert_eq!(got, common::fps_oracle(pts.points(), m, seed), "seed {seed}");
    }
}

#[test]
fn fps_with_duplicates_matches_oracle() {
    for seed in 0..50u64 {
        let mut rng = rng_from_seed(seed);
        let base = common::random_points(&mut rng, 6);
        let pts: NormalizedPointSet = base.points().iter().cycle().take(20).copied().collect::<Vec<_>>().into();
        assert_eq!(select_fps(&pts, 12, seed, 1.0).unwrap(), common::fps_oracle(pts.points(), 12, seed));
    }
}

#[test]
fn fps_picks_extremes_of_a_line() {
    let pts: NormalizedPointSet = vec![[-1.0, 0.0, 0.5, 1.0], [0.0, 0.0, 0.5, 1.0], [1.0, 0.0, 0.5, 1.0]].into();
    let seed = (0..).find(|&s| select_fps(&pts, 1, s, 1.0).unwrap()[0] == 0).unwrap();
    let got = sample_fps(&pts, 2, seed).unwrap();
    assert_eq!(got.points(), &[[-1.0, 0.0, 0.5, 1.0], [1.0, 0.0, 0.5, 1.0]]);
}

#[test]
fn most_recent_is_the_time_sorted_suffix() {
    for seed in 0..1000u64 {
        let mut rng = rng_from_seed(seed);
        let n = rng.gen_range(1..80);
        let k = rng.gen_range(1..=n);
        // coarse times force ties
        let pts: NormalizedPointSet = common::random_points(&mut rng, n)
            .points()
            .iter()
            .map(|p| [p[0], p[1], (p[2] * 8.0).floor() / 8.0, p[3]])
            .collect::<Vec<_>>()
            .into();
        let got = sample_most_recent(&pts, k).unwrap();
        let mut expected = common::most_recent_oracle(pts.points(), k);
        let mut got_sorted = got.points().to_vec();
        let key = |p: &[f64; 4]| p.map(f64::to_bits);
        expected.sort_by_key(key);
        got_sorted.sort_by_key(key);
        assert_eq!(got_sorted, expected, "seed {seed}");
    }
}

#[test]
fn random_inclusion_is_uniform() {
    let pts: NormalizedPointSet = (0..10).map(|i| [0.0, 0.0, i as f64 / 10.0, 1.0]).collect::<Vec<_>>().into();
    let mut hits = [0u32; 10];
    for trial in 0..10_000u64 {
        for p in sample_random(&pts, 5, trial).unwrap().points() {
            hits[(p[2] * 10.0).round() as usize] += 1;
        }
    }
    for h in hits {
        let f = f64::from(h) / 10_000.0;
        assert!((f - 0.5).abs() <= 0.02, "{f}");
    }
}

#[test]
fn padding_is_cyclic_and_neutral_under_max_pooling() {
    let pts: NormalizedPointSet = vec![[0.1, 0.0, 0.3, 1.0], [0.2, 0.0, 0.1, 1.0], [0.3, 0.0, 0.2, -1.0]].into();
    let padded = pad_to_n(&pts, 7).unwrap();
    let ts: Vec<f64> = padded.points().iter().map(|p| p[2]).collect();
    assert_eq!(ts, vec![0.1, 0.2, 0.3, 0.1, 0.2, 0.3, 0.1]);

    let model = PointClassifier::new(EncoderConfig::flat()).unwrap();
    let params = model.init_params(4);
    for seed in 0..20 {
        let mut rng = rng_from_seed(seed);
        let n = rng.gen_range(1..50);
        let small = common::random_points(&mut rng, n);
        let padded = pad_to_n(&small, 1024).unwrap();
        assert_eq!(model.encode(&params, &padded, 0).unwrap(), model.encode(&params, &small, 0).unwrap());
    }
}

#[test]
fn every_strategy_returns_exactly_n_points() {
    let mut rng = rng_from_seed(1);
    let pts = common::random_points(&mut rng, 300);
    for strategy in Strategy::ALL {
        for n in [1, 64, 300, 512] {
            let spec = SamplingSpec::new(strategy, n, 9);
            let a = spec.apply(&pts, 3).unwrap();
            assert_eq!(a.len(), n);
            assert_eq!(a, spec.apply(&pts, 3).unwrap());
            assert!(a.points().iter().all(|p| pts.points().contains(p)));
        }
    }
}
