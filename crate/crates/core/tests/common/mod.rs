//! Shared fixtures and oracles for the integration tests.
#![allow(dead_code)]

use evclass::codec::{Event, EventStream, Polarity};
use evclass::nn::{Graph, Tensor, Var};
use evclass::rng::rng_from_seed;
use evclass::track::{NormalizedPointSet, Point4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_stream(rng: &mut ChaCha8Rng, max_events: usize) -> EventStream {
    let width = rng.gen_range(1..=1280u16);
    let height = rng.gen_range(1..=720u16);
    let n = rng.gen_range(0..=max_events);
    let mut t = 0u64;
    let events = (0..n)
        .map(|_| {
            // bursts of equal timestamps are common in real streams
            if rng.gen_bool(0.7) {
                t += rng.gen_range(0..50);
            }
            let p = if rng.gen_bool(0.5) { Polarity::Positive } else { Polarity::Negative };
            Event::new(t, rng.gen_range(0..width), rng.gen_range(0..height), p)
        })
        .collect();
    EventStream::new(width, height, events).expect("generated stream is valid")
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize) -> NormalizedPointSet {
    (0..n)
        .map(|_| {
            [
                rng.gen_range(-1.0..=1.0),
                rng.gen_range(-1.0..=1.0),
                rng.gen_range(0.0..=1.0),
                if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
            ]
        })
        .collect::<Vec<Point4>>()
        .into()
}

/// Squared distance over `(x, y, t)`, computed like the library does.
fn sq(a: &Point4, b: &Point4) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Brute-force greedy farthest-point selection: every step recomputes each
/// candidate's distance to the whole selected set. O(n * m^2).
pub fn fps_oracle(points: &[Point4], m: usize, seed: u64) -> Vec<usize> {
    let start = rng_from_seed(seed).gen_range(0..points.len());
    let mut selected = vec![start];
    while selected.len() < m.min(points.len()) {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..points.len() {
            if selected.contains(&i) {
                continue;
            }
            let d = selected.iter().map(|&j| sq(&points[i], &points[j])).fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        selected.push(best.expect("a candidate remains").0);
    }
    selected
}

/// Most-recent oracle: sort by `(t, index)`, keep the last `n`, restore order.
pub fn most_recent_oracle(points: &[Point4], n: usize) -> Vec<Point4> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| points[a][2].partial_cmp(&points[b][2]).unwrap().then(a.cmp(&b)));
    idx[idx.len() - n..].iter().map(|&i| points[i]).collect()
}

/// Central finite-difference check of `loss = sum(r * out)` with respect to
/// every input. Returns the largest norm-wise relative error
/// `|g - g_fd| / |g_fd|` over the inputs.
pub fn gradcheck(inputs: &[Tensor<f64>], seed: u64, build: impl Fn(&mut Graph<f64>, &[Var]) -> Var) -> f64 {
    const EPS: f64 = 1e-5;
    let mut g = Graph::<f64>::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = build(&mut g, &vars);
    let mut rng = rng_from_seed(seed);
    let r: Vec<f64> = (0..g.value(out).len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    g.backward_with(out, r.clone()).expect("backward runs");
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| g.grad(v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.len()]))
        .collect();

    let loss = |ins: &[Tensor<f64>]| {
        let mut g = Graph::<f64>::new();
        let vars: Vec<Var> = ins.iter().map(|t| g.param(t.clone())).collect();
        let out = build(&mut g, &vars);
        g.value(out).data().iter().zip(&r).map(|(a, b)| a * b).sum::<f64>()
    };
    let mut worst: f64 = 0.0;
    for (k, t) in inputs.iter().enumerate() {
        let numeric: Vec<f64> = (0..t.len())
            .map(|i| {
                let mut ins = inputs.to_vec();
                ins[k].data_mut()[i] = t.data()[i] + EPS;
                let up = loss(&ins);
                ins[k].data_mut()[i] = t.data()[i] - EPS;
                let down = loss(&ins);
                (up - down) / (2.0 * EPS)
            })
            .collect();
        worst = worst.max(rel_error(&analytic[k], &numeric));
    }
    worst
}

/// `|a - b| / max(|b|, tiny)` in the Euclidean norm.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if norm < 1e-12 {
        diff
    } else {
        diff / norm
    }
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("sized")
}

/// Finite-difference checks of every differentiable graph operation on
/// randomized shapes. Returns `(op, relative error)` pairs.
pub fn op_gradchecks(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = rng_from_seed(seed);
    let b = rng.gen_range(2..6);
    let din = rng.gen_range(2..7);
    let dout = rng.gen_range(2..7);
    let x = random_tensor(&mut rng, vec![b, din]);
    let w = random_tensor(&mut rng, vec![din, dout]);
    let bias = random_tensor(&mut rng, vec![dout]);
    let y = random_tensor(&mut rng, vec![b, dout]);
    let logits = random_tensor(&mut rng, vec![b, 4]);
    let labels: Vec<usize> = (0..b).map(|_| rng.gen_range(0..4)).collect();
    let class_w: Vec<f64> = (0..4).map(|_| rng.gen_range(0.2..2.0)).collect();
    let groups = random_tensor(&mut rng, vec![3 * 4, din]);
    let idx: Vec<usize> = (0..7).map(|_| rng.gen_range(0..b)).collect();

    let mut out = vec![
        ("linear", gradcheck(&[x.clone(), w.clone(), bias.clone()], seed, |g, v| g.linear(v[0], v[1], v[2]).unwrap())),
        ("relu", gradcheck(std::slice::from_ref(&x), seed, |g, v| g.relu(v[0]))),
        ("max_pool_rows", gradcheck(std::slice::from_ref(&x), seed, |g, v| g.max_pool_rows(v[0]).unwrap().0)),
        ("group_max_pool", gradcheck(&[groups], seed, |g, v| g.group_max_pool(v[0], 4).unwrap())),
        ("gather_rows", gradcheck(std::slice::from_ref(&x), seed, |g, v| g.gather_rows(v[0], &idx).unwrap())),
        ("concat_cols", gradcheck(&[x.clone(), y.clone()], seed, |g, v| g.concat_cols(v[0], v[1]).unwrap())),
        ("stack_rows", gradcheck(&[bias.clone(), bias.clone()], seed, |g, v| g.stack_rows(v).unwrap())),
        ("softmax_rows", gradcheck(std::slice::from_ref(&logits), seed, |g, v| g.softmax_rows(v[0]).unwrap())),
        ("cross_entropy", gradcheck(std::slice::from_ref(&logits), seed, |g, v| g.cross_entropy(v[0], &labels, None).unwrap())),
        (
            "cross_entropy_weighted",
            gradcheck(&[logits], seed, |g, v| g.cross_entropy(v[0], &labels, Some(&class_w)).unwrap()),
        ),
    ];
    // a small chain exercising accumulation through shared inputs
    out.push((
        "mlp_chain",
        gradcheck(&[x, w, bias], seed, |g, v| {
            let h = g.linear(v[0], v[1], v[2]).unwrap();
            let h = g.relu(h);
            let c = g.concat_cols(h, v[0]).unwrap();
            g.max_pool_rows(c).unwrap().0
        }),
    ));
    out
}

/// Finite-difference check of the full flat model's loss on `n` random
/// points, over a seeded subset of coordinates of every parameter tensor.
pub fn model_gradcheck(seed: u64, n: usize, per_tensor: usize) -> f64 {
    use evclass::model::{EncoderConfig, PointClassifier};
    const EPS: f64 = 1e-5;
    let mut rng = rng_from_seed(seed);
    let model = PointClassifier::new(EncoderConfig::flat()).unwrap();
    let params = model.init_params(seed);
    let weights = params.cast::<f64>();
    let points = random_points(&mut rng, n);
    let label = rng.gen_range(0..4);
    let eg = model.example_grad(&weights, &points, label, 1.0, 0).unwrap();
    let loss = |ws: &[Tensor<f64>]| model.example_grad(ws, &points, label, 1.0, 0).unwrap().loss;
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for (k, t) in weights.iter().enumerate() {
        for _ in 0..per_tensor.min(t.len()) {
            let i = rng.gen_range(0..t.len());
            let mut ws = weights.clone();
            ws[k].data_mut()[i] = t.data()[i] + EPS;
            let up = loss(&ws);
            ws[k].data_mut()[i] = t.data()[i] - EPS;
            let down = loss(&ws);
            analytic.push(eg.grads[k][i]);
            numeric.push((up - down) / (2.0 * EPS));
        }
    }
    rel_error(&analytic, &numeric)
}
