use std::collections::HashSet;

use rand::Rng;

use super::grouping::{ball_query, canonical_order};
use super::{EncoderConfig, ModelError, Variant, COORD_DIM, POINT_DIM};
use crate::nn::{Graph, ModelParams, Real, Tensor, Var};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sampling::farthest_point_indices;
use crate::track::{NormalizedPointSet, Point4};

/// Gradient and outputs of one labeled example.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleGrad {
    pub loss: f64,
    pub logits: Vec<f64>,
    /// One gradient per parameter entry, in entry order.
    pub grads: Vec<Vec<f64>>,
}

/// An encoder plus head described by an [`EncoderConfig`].
///
/// Parameters are laid out encoder first, then head, each layer contributing
/// a `weight [d_in, d_out]` and a `bias [d_out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointClassifier {
    config: EncoderConfig,
}

/// Walks parameter handles in creation order.
struct Layers<'a> {
    vars: &'a [Var],
    next: usize,
}

impl Layers<'_> {
    fn take(&mut self) -> (Var, Var) {
        let w = self.vars[self.next];
        let b = self.vars[self.next + 1];
        self.next += 2;
        (w, b)
    }
}

fn mlp<T: Real>(g: &mut Graph<T>, layers: &mut Layers<'_>, mut x: Var, depth: usize) -> Result<Var, ModelError> {
    for _ in 0..depth {
        let (w, b) = layers.take();
        x = g.linear(x, w, b)?;
        x = g.relu(x);
    }
    Ok(x)
}

fn to_tensor<T: Real>(rows: usize, cols: usize, data: impl IntoIterator<Item = f64>) -> Tensor<T> {
    Tensor::new(vec![rows, cols], data.into_iter().map(T::of).collect()).expect("sized by caller")
}

/// Exact duplicate points, keeping first occurrences in order. Duplicates
/// cannot change a max pool, and neither can dropping them.
fn distinct_points(points: &[Point4]) -> Vec<Point4> {
    let mut seen = HashSet::with_capacity(points.len());
    points
        .iter()
        .filter(|p| seen.insert(p.map(f64::to_bits)))
        .copied()
        .collect()
}

impl PointClassifier {
    pub fn new(config: EncoderConfig) -> Result<Self, ModelError> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    /// Fresh He-uniform weights and zero biases.
    pub fn init_params(&self, seed: u64) -> ModelParams {
        let c = &self.config;
        ModelParams::with_rng(seed, |p, rng| {
            let mut width = match c.variant {
                Variant::Flat => {
                    let mut d = POINT_DIM;
                    for (i, &w) in c.flat_widths.iter().enumerate() {
                        p.push_linear(&format!("flat.mlp{i}"), d, w, rng);
                        d = w;
                    }
                    d
                }
                Variant::Hierarchical => {
                    let mut feat = POINT_DIM;
                    for (l, level) in c.levels.iter().enumerate() {
                        let mut d = feat + COORD_DIM;
                        for (i, &w) in level.widths.iter().enumerate() {
                            p.push_linear(&format!("sa{l}.mlp{i}"), d, w, rng);
                            d = w;
                        }
                        feat = d;
                    }
                    feat
                }
            };
            for (i, &w) in c.head_widths.iter().enumerate() {
                p.push_linear(&format!("head.fc{i}"), width, w, rng);
                width = w;
            }
            p.push_linear("head.out", width, c.classes, rng);
        })
    }

    /// Checks that `params` has exactly the layout this config creates.
    pub fn check_params(&self, params: &ModelParams) -> Result<(), ModelError> {
        let expected = self.init_params(0);
        if !expected.same_layout(params) {
            return Err(ModelError::ParamMismatch(format!(
                "expected {} tensors ({} values), found {} ({} values)",
                expected.len(),
                expected.value_count(),
                params.len(),
                params.value_count()
            )));
        }
        Ok(())
    }

    fn encoder_layer_count(&self) -> usize {
        match self.config.variant {
            Variant::Flat => self.config.flat_widths.len(),
            Variant::Hierarchical => self.config.levels.iter().map(|l| l.widths.len()).sum(),
        }
    }

    fn encode_flat_graph<T: Real>(
        &self,
        g: &mut Graph<T>,
        layers: &mut Layers<'_>,
        points: &[Point4],
    ) -> Result<Var, ModelError> {
        let distinct = distinct_points(points);
        let x = g.input(to_tensor(distinct.len(), POINT_DIM, distinct.iter().flatten().copied()));
        let h = mlp(g, layers, x, self.config.flat_widths.len())?;
        Ok(g.max_pool_rows(h)?.0)
    }

    fn encode_hierarchical_graph<T: Real>(
        &self,
        g: &mut Graph<T>,
        layers: &mut Layers<'_>,
        points: &[Point4],
        seed: u64,
    ) -> Result<Var, ModelError> {
        let order = canonical_order(points);
        let sorted: Vec<Point4> = order.iter().map(|&i| points[i]).collect();
        let mut coords: Vec<[f64; 3]> = sorted.iter().map(|p| [p[0], p[1], p[2]]).collect();
        let mut feat = g.input(to_tensor(sorted.len(), POINT_DIM, sorted.iter().flatten().copied()));

        for (l, level) in self.config.levels.iter().enumerate() {
            let n = coords.len();
            let m = level.centroids.min(n);
            let start = rng_from_seed(derive_seed(seed, 0x5341, l as u64)).gen_range(0..n);
            let centers = farthest_point_indices(&coords, m, start);
            let members = ball_query(&coords, &centers, level.radius, level.group_size);

            let grouped = g.gather_rows(feat, &members)?;
            let rel = members.iter().enumerate().flat_map(|(k, &j)| {
                let c = coords[centers[k / level.group_size]];
                let p = coords[j];
                [p[0] - c[0], p[1] - c[1], p[2] - c[2]]
            });
            let rel = g.input(to_tensor(members.len(), COORD_DIM, rel.collect::<Vec<_>>()));
            let x = g.concat_cols(grouped, rel)?;
            let h = mlp(g, layers, x, level.widths.len())?;
            feat = g.group_max_pool(h, level.group_size)?;
            coords = centers.iter().map(|&c| coords[c]).collect();
        }
        Ok(g.max_pool_rows(feat)?.0)
    }

    fn head_graph<T: Real>(&self, g: &mut Graph<T>, layers: &mut Layers<'_>, features: &[Var]) -> Result<Var, ModelError> {
        let x = g.stack_rows(features)?;
        let h = mlp(g, layers, x, self.config.head_widths.len())?;
        let (w, b) = layers.take();
        Ok(g.linear(h, w, b)?)
    }

    /// Records encoder and head on `g`, returning `(feature [D], logits [1, C])`.
    /// `vars` are the parameter handles in entry order.
    pub fn forward<T: Real>(
        &self,
        g: &mut Graph<T>,
        vars: &[Var],
        points: &[Point4],
        seed: u64,
    ) -> Result<(Var, Var), ModelError> {
        let min = self.config.min_points();
        if points.len() < min {
            return Err(ModelError::TooFewPoints { min, got: points.len() });
        }
        let mut layers = Layers { vars, next: 0 };
        let feature = match self.config.variant {
            Variant::Flat => self.encode_flat_graph(g, &mut layers, points)?,
            Variant::Hierarchical => self.encode_hierarchical_graph(g, &mut layers, points, seed)?,
        };
        let logits = self.head_graph(g, &mut layers, &[feature])?;
        Ok((feature, logits))
    }

    fn register<T: Real>(g: &mut Graph<T>, weights: &[Tensor<T>], trainable: bool) -> Vec<Var> {
        weights
            .iter()
            .map(|w| if trainable { g.param(w.clone()) } else { g.input(w.clone()) })
            .collect()
    }

    /// Logits of one point set (inference only).
    pub fn logits<T: Real>(&self, weights: &[Tensor<T>], points: &NormalizedPointSet, seed: u64) -> Result<Vec<f64>, ModelError> {
        let mut g = Graph::new();
        let vars = Self::register(&mut g, weights, false);
        let (_, logits) = self.forward(&mut g, &vars, points.points(), seed)?;
        Ok(g.value(logits).data().iter().map(|v| v.as_f64()).collect())
    }

    /// Cross-entropy of one example scaled by `scale`, with its gradient.
    pub fn example_grad<T: Real>(
        &self,
        weights: &[Tensor<T>],
        points: &NormalizedPointSet,
        label: usize,
        scale: f64,
        seed: u64,
    ) -> Result<ExampleGrad, ModelError> {
        let mut g = Graph::new();
        let vars = Self::register(&mut g, weights, true);
        let (_, logits) = self.forward(&mut g, &vars, points.points(), seed)?;
        let loss = g.cross_entropy(logits, &[label], None)?;
        g.backward(loss, T::of(scale))?;
        let grads = vars
            .iter()
            .zip(weights)
            .map(|(&v, w)| match g.grad(v) {
                Some(d) => d.iter().map(|x| x.as_f64()).collect(),
                None => vec![0.0; w.len()],
            })
            .collect();
        Ok(ExampleGrad {
            loss: g.value(loss).data()[0].as_f64() * scale,
            logits: g.value(logits).data().iter().map(|v| v.as_f64()).collect(),
            grads,
        })
    }

    /// Global feature of the encoder alone, in `f64`.
    pub fn encode(&self, params: &ModelParams, points: &NormalizedPointSet, seed: u64) -> Result<Tensor<f64>, ModelError> {
        self.check_params(params)?;
        let weights = params.cast::<f64>();
        let mut g = Graph::new();
        let vars = Self::register(&mut g, &weights, false);
        let min = self.config.min_points();
        if points.len() < min {
            return Err(ModelError::TooFewPoints { min, got: points.len() });
        }
        let mut layers = Layers { vars: &vars, next: 0 };
        let f = match self.config.variant {
            Variant::Flat => self.encode_flat_graph(&mut g, &mut layers, points.points())?,
            Variant::Hierarchical => self.encode_hierarchical_graph(&mut g, &mut layers, points.points(), seed)?,
        };
        Ok(g.value(f).clone())
    }

    /// Head logits for a precomputed global feature.
    pub fn classify(&self, params: &ModelParams, feature: &Tensor<f64>) -> Result<Vec<f64>, ModelError> {
        self.check_params(params)?;
        let dim = self.config.feature_dim();
        if feature.len() != dim {
            return Err(crate::nn::NnError::ShapeMismatch {
                op: "classify",
                expected: format!("[{dim}]"),
                got: feature.shape().to_vec(),
            }
            .into());
        }
        let weights = params.cast::<f64>();
        let mut g = Graph::new();
        let vars = Self::register(&mut g, &weights, false);
        let mut layers = Layers {
            vars: &vars,
            next: 2 * self.encoder_layer_count(),
        };
        let f = g.input(feature.clone());
        let logits = self.head_graph(&mut g, &mut layers, &[f])?;
        Ok(g.value(logits).data().to_vec())
    }
}

/// Flat encoder feature (shared per-point MLP, then max pool over points).
pub fn encode_flat(points: &NormalizedPointSet, params: &ModelParams, config: &EncoderConfig) -> Result<Tensor<f64>, ModelError> {
    let mut c = config.clone();
    c.variant = Variant::Flat;
    PointClassifier::new(c)?.encode(params, points, 0)
}

/// Hierarchical encoder feature; `seed` picks the FPS start points.
pub fn encode_hierarchical(
    points: &NormalizedPointSet,
    params: &ModelParams,
    config: &EncoderConfig,
    seed: u64,
) -> Result<Tensor<f64>, ModelError> {
    let mut c = config.clone();
    c.variant = Variant::Hierarchical;
    PointClassifier::new(c)?.encode(params, points, seed)
}

/// Logits of the head for a global feature.
pub fn classify(feature: &Tensor<f64>, params: &ModelParams, config: &EncoderConfig) -> Result<Vec<f64>, ModelError> {
    PointClassifier::new(config.clone())?.classify(params, feature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Graph;
    use rand::seq::SliceRandom;

    fn random_points(n: usize, seed: u64) -> NormalizedPointSet {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| {
                [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.0..1.0),
                    if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                ]
            })
            .collect::<Vec<_>>()
            .into()
    }

    fn small_flat() -> PointClassifier {
        PointClassifier::new(EncoderConfig {
            flat_widths: vec![8, 16],
            head_widths: vec![8, 4],
            ..EncoderConfig::flat()
        })
        .unwrap()
    }

    #[test]
    fn parameter_layout() {
        let m = PointClassifier::new(EncoderConfig::flat()).unwrap();
        let p = m.init_params(1);
        let names: Vec<_> = p.entries().iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names[0], "flat.mlp0.weight");
        assert_eq!(p.get("flat.mlp0.weight").unwrap().shape(), &[4, 64]);
        assert_eq!(p.get("head.fc0.weight").unwrap().shape(), &[256, 128]);
        assert_eq!(p.get("head.out.weight").unwrap().shape(), &[32, 4]);
        let h = PointClassifier::new(EncoderConfig::hierarchical()).unwrap().init_params(1);
        assert_eq!(h.get("sa0.mlp0.weight").unwrap().shape(), &[7, 64]);
        assert_eq!(h.get("sa1.mlp0.weight").unwrap().shape(), &[131, 128]);
        assert!(m.check_params(&h).is_err());
    }

    #[test]
    fn flat_output_ignores_permutation_and_duplicates() {
        let m = small_flat();
        let p = m.init_params(5);
        let pts = random_points(40, 2);
        let base = m.encode(&p, &pts, 0).unwrap();
        let mut rng = rng_from_seed(9);
        let mut shuffled = pts.points().to_vec();
        shuffled.shuffle(&mut rng);
        assert_eq!(m.encode(&p, &shuffled.clone().into(), 0).unwrap(), base);
        shuffled.extend_from_slice(&pts.points()[3..9]);
        assert_eq!(m.encode(&p, &shuffled.into(), 0).unwrap(), base);
    }

    #[test]
    fn single_point_feature_is_the_point_mlp() {
        let m = small_flat();
        let p = m.init_params(5);
        let pt = [0.25, -0.5, 0.75, 1.0];
        let feature = m.encode(&p, &vec![pt].into(), 0).unwrap();
        // MLP by hand
        let mut x = pt.to_vec();
        for l in 0..2 {
            let w = p.get(&format!("flat.mlp{l}.weight")).unwrap();
            let b = p.get(&format!("flat.mlp{l}.bias")).unwrap();
            let dout = w.shape()[1];
            x = (0..dout)
                .map(|j| {
                    let s: f64 = b.data()[j] + (0..x.len()).map(|k| x[k] * w.data()[k * dout + j]).sum::<f64>();
                    s.max(0.0)
                })
                .collect();
        }
        for (a, b) in feature.data().iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let m = small_flat();
        let mut p = m.init_params(5);
        for e in p.entries_mut() {
            e.value.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let logits = m.logits(&p.cast::<f64>(), &random_points(10, 1), 0).unwrap();
        assert_eq!(logits, vec![0.0; 4]);
        let eg = m.example_grad(&p.cast::<f64>(), &random_points(10, 1), 2, 1.0, 0).unwrap();
        assert!((eg.loss - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn classify_matches_full_forward() {
        let m = small_flat();
        let p = m.init_params(3);
        let pts = random_points(20, 4);
        let f = m.encode(&p, &pts, 0).unwrap();
        let a = m.classify(&p, &f).unwrap();
        let b = m.logits(&p.cast::<f64>(), &pts, 0).unwrap();
        assert_eq!(a, b);
        assert!(m.classify(&p, &Tensor::vector(vec![0.0; 3])).is_err());
    }

    #[test]
    fn hierarchical_isolated_centroid_stays_finite() {
        let cfg = EncoderConfig {
            levels: vec![
                super::super::SaLevel { centroids: 2, radius: 0.01, group_size: 4, widths: vec![8] },
                super::super::SaLevel { centroids: 1, radius: 0.01, group_size: 2, widths: vec![8] },
            ],
            head_widths: vec![4],
            ..EncoderConfig::hierarchical()
        };
        let m = PointClassifier::new(cfg).unwrap();
        let p = m.init_params(0);
        let pts: NormalizedPointSet = vec![[-1.0, -1.0, 0.0, 1.0], [1.0, 1.0, 1.0, -1.0]].into();
        let f = m.encode(&p, &pts, 3).unwrap();
        assert!(f.all_finite());
        assert!(matches!(
            m.encode(&p, &vec![[0.0; 4]].into(), 0),
            Err(ModelError::TooFewPoints { min: 2, got: 1 })
        ));
    }

    #[test]
    fn hierarchical_is_permutation_invariant() {
        let m = PointClassifier::new(EncoderConfig::hierarchical()).unwrap();
        let p = m.init_params(2);
        let pts = random_points(300, 8);
        let base = m.encode(&p, &pts, 17).unwrap();
        let mut shuffled = pts.points().to_vec();
        shuffled.shuffle(&mut rng_from_seed(1));
        assert_eq!(m.encode(&p, &shuffled.into(), 17).unwrap(), base);
    }

    #[test]
    fn training_graph_gradient_matches_example_grad() {
        let m = small_flat();
        let p = m.init_params(5);
        let w = p.cast::<f64>();
        let pts = random_points(12, 3);
        let eg = m.example_grad(&w, &pts, 1, 0.5, 0).unwrap();
        let mut g = Graph::<f64>::new();
        let vars: Vec<Var> = w.iter().map(|t| g.param(t.clone())).collect();
        let (_, logits) = m.forward(&mut g, &vars, pts.points(), 0).unwrap();
        let loss = g.cross_entropy(logits, &[1], None).unwrap();
        g.backward(loss, 0.5).unwrap();
        assert_eq!(g.grad(vars[0]).unwrap(), eg.grads[0].as_slice());
    }
}
