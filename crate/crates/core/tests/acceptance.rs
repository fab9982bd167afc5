//! Acceptance gates. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any gate fails. `ACCEPTANCE_ONLY=2,7` runs a subset.

mod common;

use std::collections::BTreeSet;
use std::panic::catch_unwind;
use std::path::Path;
use std::time::{Duration, Instant};

use evclass::codec::{decode_events, encode_events, AnnotationSet, BoxRecord, ClassLabel, EVF1_HEADER_LEN};
use evclass::harness::{
    evaluate, predict_split, prepare_examples, slice_manifest, train, Checkpoint, ChunkDataset, EvalReport,
    Protocol, SliceConfig, TrainConfig,
};
use evclass::model::{EncoderConfig, PointClassifier, Variant};
use evclass::rng::rng_from_seed;
use evclass::sampling::{pad_to_n, sample_most_recent, sample_random, select_fps, SamplingSpec, Strategy};
use evclass::synth::{gen_dataset, write_dataset, SynthConfig};
use evclass::track::{assemble_tracks, chunk_track, sample_negatives, ChunkSpec, NegativeConfig, NormalizedPointSet};
use rand::seq::SliceRandom;
use rand::Rng;

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn main() {
    let only: Option<BTreeSet<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [Criterion; 9] = [
        (1, "codec round-trip and fuzzing", codec),
        (2, "FPS oracle equivalence", fps_oracle),
        (3, "sampling contracts", sampling_contracts),
        (4, "gradient correctness", gradients),
        (5, "permutation invariance", permutation),
        (6, "chunker validity rules", chunker),
        (7, "end-to-end synthetic gate", end_to_end),
        (8, "comparative findings (reported)", comparison),
        (9, "determinism", determinism),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let o = catch_unwind(run).unwrap_or_else(|_| outcome(false, "panicked"));
        failed += usize::from(!o.pass);
        println!(
            "criterion {id} {name}: {} ({}; {:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn codec() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(0xc0dec);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let s = common::random_stream(&mut rng, 100_000);
        if decode_events(&encode_events(&s)).as_ref() != Ok(&s) {
            mismatches += 1;
        }
    }
    let valid = encode_events(&common::random_stream(&mut rng, 40));
    let (mut panics, mut errors, mut bad_ok) = (0, 0, 0);
    for i in 0..100_000u32 {
        let bytes: Vec<u8> = match i % 3 {
            0 => (0..rng.gen_range(0..200)).map(|_| rng.gen()).collect(),
            1 => {
                let mut b = valid.clone();
                for _ in 0..rng.gen_range(1..6) {
                    let k = rng.gen_range(0..b.len());
                    b[k] = rng.gen();
                }
                b.truncate(rng.gen_range(0..=b.len()));
                b
            }
            _ => {
                let mut b = valid[..EVF1_HEADER_LEN].to_vec();
                b[8..16].copy_from_slice(&rng.gen_range(0..u64::MAX).to_le_bytes());
                b.extend((0..rng.gen_range(0..100)).map(|_| rng.gen::<u8>()));
                b
            }
        };
        match catch_unwind(|| decode_events(&bytes)) {
            Err(_) => panics += 1,
            Ok(Err(_)) => errors += 1,
            Ok(Ok(s)) => bad_ok += usize::from(encode_events(&s) != bytes),
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && panics == 0 && bad_ok == 0 && elapsed < Duration::from_secs(60),
        format!("1000 streams, {mismatches} mismatches; 100000 fuzz inputs, {errors} typed errors, {panics} panics; {:.1}s < 60s", elapsed.as_secs_f64()),
    )
}

fn fps_oracle() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    for seed in 0..200u64 {
        let mut rng = rng_from_seed(seed);
        let n = rng.gen_range(1..=64);
        let m = rng.gen_range(1..=n);
        let pts = common::random_points(&mut rng, n);
        if select_fps(&pts, m, seed, 1.0).ok() != Some(common::fps_oracle(pts.points(), m, seed)) {
            failures.push(seed);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && elapsed < Duration::from_secs(10),
        format!("seeds 0..200, failing seeds {failures:?}; {:.2}s < 10s", elapsed.as_secs_f64()),
    )
}

fn sampling_contracts() -> Outcome {
    let mut recent_failures = 0;
    for seed in 0..1000u64 {
        let mut rng = rng_from_seed(seed);
        let n = rng.gen_range(1..80);
        let k = rng.gen_range(1..=n);
        let pts: NormalizedPointSet = common::random_points(&mut rng, n)
            .points()
            .iter()
            .map(|p| [p[0], p[1], (p[2] * 8.0).floor() / 8.0, p[3]])
            .collect::<Vec<_>>()
            .into();
        let key = |p: &[f64; 4]| p.map(f64::to_bits);
        let mut got = sample_most_recent(&pts, k).unwrap().points().to_vec();
        let mut want = common::most_recent_oracle(pts.points(), k);
        got.sort_by_key(key);
        want.sort_by_key(key);
        recent_failures += usize::from(got != want);
    }

    let pts: NormalizedPointSet = (0..10).map(|i| [0.0, 0.0, i as f64 / 10.0, 1.0]).collect::<Vec<_>>().into();
    let mut hits = [0u32; 10];
    for trial in 0..10_000u64 {
        for p in sample_random(&pts, 5, trial).unwrap().points() {
            hits[(p[2] * 10.0).round() as usize] += 1;
        }
    }
    let worst = hits.iter().map(|&h| (f64::from(h) / 10_000.0 - 0.5).abs()).fold(0.0, f64::max);

    let model = PointClassifier::new(EncoderConfig::flat()).unwrap();
    let params = model.init_params(4);
    let mut pad_failures = 0;
    for seed in 0..100 {
        let mut rng = rng_from_seed(seed);
        let n = rng.gen_range(1..200);
        let small = common::random_points(&mut rng, n);
        let padded = pad_to_n(&small, 1024).unwrap();
        pad_failures += usize::from(model.encode(&params, &padded, 0).unwrap() != model.encode(&params, &small, 0).unwrap());
    }
    outcome(
        recent_failures == 0 && worst <= 0.02 && pad_failures == 0,
        format!(
            "most-recent {recent_failures}/1000 mismatches; random inclusion max |f - 0.5| = {worst:.4} <= 0.02; padding changed {pad_failures}/100 pooled features"
        ),
    )
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut worst_op = ("", 0.0f64);
    for seed in 0..10 {
        for (op, err) in common::op_gradchecks(seed) {
            if err.is_nan() || err > worst_op.1 {
                worst_op = (op, err);
            }
        }
    }
    let worst_model = (0..3).map(|s| common::model_gradcheck(s, 16, 24)).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    outcome(
        worst_op.1 <= 1e-6 && worst_model <= 1e-4 && elapsed < Duration::from_secs(60),
        format!(
            "worst op {} {:.1e} <= 1e-6; flat model N=16 {:.1e} <= 1e-4; {:.1}s < 60s",
            worst_op.0,
            worst_op.1,
            worst_model,
            elapsed.as_secs_f64()
        ),
    )
}

fn permutation() -> Outcome {
    let model = PointClassifier::new(EncoderConfig::flat()).unwrap();
    let weights = model.init_params(11).cast::<f64>();
    let mut rng = rng_from_seed(5);
    let pts = common::random_points(&mut rng, 1024);
    let reference = model.logits(&weights, &pts, 0).unwrap();
    let mut differing = 0;
    for _ in 0..100 {
        let mut shuffled = pts.points().to_vec();
        shuffled.shuffle(&mut rng);
        differing += usize::from(model.logits(&weights, &shuffled.into(), 0).unwrap() != reference);
    }
    outcome(differing == 0, format!("{differing}/100 permutations changed the logits"))
}

fn chunker() -> Outcome {
    // two-frame track next to a three-frame one
    let rec = |id: u64, f: u64| BoxRecord {
        track_id: id,
        class_label: ClassLabel::Bird,
        frame_index: f,
        t_start_us: f * 33_000,
        t_end_us: (f + 1) * 33_000,
        x_min: 0,
        y_min: 0,
        x_max: 10,
        y_max: 10,
    };
    let ann = AnnotationSet::from_records([rec(1, 0), rec(1, 1), rec(2, 0), rec(2, 1), rec(2, 2)]).unwrap();
    let a = assemble_tracks(&evclass::EventStream::empty(32, 32), &ann).unwrap();
    let short_rejected = a.tracks.len() == 1 && a.rejected.len() == 1 && a.rejected[0].track_id == 1;

    let config = SynthConfig {
        tracks_per_class: 40,
        duration_us: [99_000, 500_000],
        ..SynthConfig::default()
    };
    let (_, recordings) = gen_dataset(&config).unwrap();
    let (mut lost, mut tracks, mut overlaps) = (0usize, 0usize, 0usize);
    for (k, r) in recordings.iter().enumerate() {
        for track in assemble_tracks(&r.stream, &r.annotations).unwrap().tracks {
            let chunks = chunk_track(&track, &ChunkSpec { delta_us: 33_000, min_events: 0 }).unwrap();
            let kept: usize = chunks.chunks.iter().map(|c| c.events.len()).sum();
            lost += track.event_count() - kept;
            tracks += 1;
        }
        for ch in sample_negatives(&r.stream, &r.annotations, &NegativeConfig::new(50, k as u64)).unwrap() {
            overlaps += r
                .annotations
                .records()
                .filter(|b| evclass::track::patch_intersects(&ch.bbox, ch.t0, ch.t1(), b))
                .count();
        }
    }
    outcome(
        short_rejected && lost == 0 && overlaps == 0 && recordings.len() >= 10,
        format!(
            "2-frame track rejected: {short_rejected}; {lost} events lost over {tracks} tracks; {overlaps} overlaps among {} negatives on {} scenes",
            50 * recordings.len(),
            recordings.len()
        ),
    )
}

struct Run {
    checkpoint: Checkpoint,
    chunk: EvalReport,
    track: EvalReport,
    train_time: Duration,
}

/// Slices a synthetic dataset directory and trains and evaluates on it.
fn train_and_eval(chunks_dir: &Path, config: &TrainConfig) -> Run {
    let data = ChunkDataset::load(chunks_dir).unwrap();
    let train_set = prepare_examples(&data.split("train"), &config.sampling).unwrap();
    let val_set = prepare_examples(&data.split("val"), &config.sampling).unwrap();
    let start = Instant::now();
    let outcome = train(&train_set, &val_set, config).unwrap();
    let train_time = start.elapsed();
    let path = chunks_dir.join("model.ckpt");
    outcome.best.save(&path).unwrap();
    let checkpoint = Checkpoint::load(&path).unwrap();
    let preds = predict_split(&checkpoint, &data, "test").unwrap();
    let dropped = data.dropped_in("test");
    Run {
        chunk: evaluate(&preds, Protocol::Chunk, dropped).unwrap(),
        track: evaluate(&preds, Protocol::Track, dropped).unwrap(),
        checkpoint,
        train_time,
    }
}

fn synth_and_slice(config: &SynthConfig, dir: &Path) -> std::path::PathBuf {
    let ds = dir.join("dataset");
    let out = dir.join("chunks");
    write_dataset(config, &ds).unwrap();
    slice_manifest(&ds, &out, &SliceConfig::default()).unwrap();
    out
}

fn end_to_end() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let dir = tempfile::tempdir().unwrap();
        let start = Instant::now();
        let chunks = synth_and_slice(&SynthConfig::default(), dir.path());
        let config = TrainConfig {
            epochs: 16,
            ..TrainConfig::default()
        };
        let run = train_and_eval(&chunks, &config);
        let total = start.elapsed();
        let (c, t) = (run.chunk.chunk_accuracy, run.track.track_accuracy);
        outcome(
            c >= 0.85 && t >= 0.95 && t >= c && run.train_time <= Duration::from_secs(600),
            format!(
                "chunk accuracy {c:.4} >= 0.85; track accuracy {t:.4} >= 0.95 and >= chunk; {} test chunks, {} tracks; 1 thread, training {:.0}s <= 600s (pipeline {:.0}s)",
                run.chunk.chunks,
                run.track.tracks,
                run.train_time.as_secs_f64(),
                total.as_secs_f64()
            ),
        )
    })
}

fn comparison() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let synth = SynthConfig {
        tracks_per_class: 30,
        duration_us: [99_000, 600_000],
        ..SynthConfig::default()
    };
    let chunks = synth_and_slice(&synth, dir.path());
    let sizes = [512, 1024, 2048];
    let mut table = String::from("\n    encoder       sampling      N=512    N=1024   N=2048\n");
    let mut acc = [[[0.0; 3]; 3]; 2];
    for (e, variant) in [Variant::Flat, Variant::Hierarchical].into_iter().enumerate() {
        for (s, strategy) in Strategy::ALL.into_iter().enumerate() {
            table += &format!("    {:<13} {:<12}", format!("{variant:?}").to_lowercase(), strategy.flag());
            for (k, &n) in sizes.iter().enumerate() {
                let config = TrainConfig {
                    sampling: SamplingSpec::new(strategy, n, 0),
                    epochs: 4,
                    ..TrainConfig::with_variant(variant)
                };
                acc[e][s][k] = train_and_eval(&chunks, &config).chunk.chunk_accuracy;
                table += &format!("  {:>7.2}", 100.0 * acc[e][s][k]);
            }
            table.push('\n');
        }
    }
    let mut hier_wins = 0;
    let mut flat_monotone = 0;
    for (flat, hier) in acc[0].iter().zip(&acc[1]) {
        hier_wins += hier.iter().zip(flat).filter(|(h, f)| h >= f).count();
        flat_monotone += usize::from(flat[0] <= flat[1] && flat[1] <= flat[2]);
    }
    outcome(
        true,
        format!(
            "hierarchical >= flat in {hier_wins}/9 cells; flat non-decreasing in N for {flat_monotone}/3 strategies; test chunk accuracy (%):{table}"
        ),
    )
}

fn determinism() -> Outcome {
    let synth = SynthConfig {
        tracks_per_class: 8,
        duration_us: [99_000, 300_000],
        seed: 7,
        ..SynthConfig::default()
    };
    let config = TrainConfig {
        sampling: SamplingSpec::new(Strategy::Random, 256, 5),
        epochs: 2,
        batch_size: 16,
        seed: 3,
        ..TrainConfig::default()
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let dir = tempfile::tempdir().unwrap();
            let chunks = synth_and_slice(&synth, dir.path());
            let r = train_and_eval(&chunks, &config);
            let ckpt = std::fs::read(chunks.join("model.ckpt")).unwrap();
            let reports = serde_json::to_string(&(&r.chunk, &r.track)).unwrap();
            (ckpt, reports, r.checkpoint)
        })
    };
    let (a_ckpt, a_rep, a) = run(1);
    let (b_ckpt, b_rep, _) = run(3);
    let same = a_ckpt == b_ckpt && a_rep == b_rep;
    outcome(
        same,
        format!(
            "two synth-slice-train-eval runs (1 and 3 threads): checkpoints {} bytes identical: {}; reports identical: {}; best epoch {}",
            a_ckpt.len(),
            a_ckpt == b_ckpt,
            a_rep == b_rep,
            a.header.epoch
        ),
    )
}
