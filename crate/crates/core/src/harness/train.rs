use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::info;

use super::data::Example;
use super::eval::{evaluate, predict_examples, Protocol, CLASSES};
use super::{Checkpoint, HarnessError, Precision, TrainConfig};
use crate::error::Result;
use crate::model::{ExampleGrad, PointClassifier};
use crate::nn::{ModelParams, Real, Tensor};
use crate::rng::{derive_seed, rng_from_seed};

const INIT_STREAM: u64 = 0x494e;
const SHUFFLE_STREAM: u64 = 0x5348;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Weights of the epoch with the best validation chunk accuracy.
    pub best: Checkpoint,
    pub history: Vec<EpochLog>,
}

/// Class weights `n / (C * n_c)`; classes absent from training keep weight 1.
pub fn class_weights(labels: impl IntoIterator<Item = usize>) -> [f64; CLASSES] {
    let mut counts = [0usize; CLASSES];
    let mut n = 0usize;
    for l in labels {
        counts[l] += 1;
        n += 1;
    }
    std::array::from_fn(|c| match counts[c] {
        0 => 1.0,
        k => n as f64 / (CLASSES as f64 * k as f64),
    })
}

fn batch_grads<T: Real>(
    model: &PointClassifier,
    weights: &[Tensor<T>],
    batch: &[&Example],
    weights_by_class: &[f64; CLASSES],
) -> Result<Vec<ExampleGrad>> {
    let scale = 1.0 / batch.len() as f64;
    batch
        .par_iter()
        .map(|ex| Ok(model.example_grad(weights, &ex.points, ex.label, weights_by_class[ex.label] * scale, ex.chunk_id)?))
        .collect()
}

/// Trains a chunk classifier. Every epoch visits the training examples in a
/// seeded permutation; per-example gradients are computed in parallel and
/// summed in batch order, so results do not depend on the thread count.
pub fn train(train_set: &[Example], val_set: &[Example], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(HarnessError::Manifest("training split is empty".into()).into());
    }
    let model = PointClassifier::new(config.encoder.clone())?;
    let mut params = model.init_params(derive_seed(config.seed, INIT_STREAM, 0));
    let adam = config.adam();
    let class_w = if config.class_weighting {
        class_weights(train_set.iter().map(|e| e.label))
    } else {
        [1.0; CLASSES]
    };

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<Checkpoint> = None;
    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng_from_seed(derive_seed(config.seed, SHUFFLE_STREAM, epoch as u64)));
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for idx in order.chunks(config.batch_size) {
            let batch: Vec<&Example> = idx.iter().map(|&i| &train_set[i]).collect();
            let grads = match config.precision {
                Precision::F32 => batch_grads(&model, &params.cast::<f32>(), &batch, &class_w)?,
                Precision::F64 => batch_grads(&model, &params.cast::<f64>(), &batch, &class_w)?,
            };
            let mut total: Vec<Vec<f64>> = params.entries().iter().map(|e| vec![0.0; e.value.len()]).collect();
            let mut batch_loss = 0.0;
            for (g, ex) in grads.iter().zip(&batch) {
                batch_loss += g.loss;
                correct += (super::eval::argmax(&g.logits) == ex.label) as usize;
                for (acc, part) in total.iter_mut().zip(&g.grads) {
                    for (a, &p) in acc.iter_mut().zip(part) {
                        *a += p;
                    }
                }
            }
            if !batch_loss.is_finite() || total.iter().flatten().any(|g| !g.is_finite()) {
                return Err(HarnessError::DivergedLoss {
                    epoch,
                    step: params.step,
                    detail: format!("batch loss {batch_loss}, lr {}", config.lr),
                }
                .into());
            }
            loss_sum += batch_loss * batch.len() as f64;
            params.set_grads(total)?;
            adam.step(&mut params)?;
            if !params.all_finite() {
                return Err(HarnessError::DivergedLoss {
                    epoch,
                    step: params.step,
                    detail: "non-finite weights after update".into(),
                }
                .into());
            }
        }
        params.clear_grads();
        let train_accuracy = correct as f64 / train_set.len() as f64;
        let val_accuracy = if val_set.is_empty() {
            train_accuracy
        } else {
            let preds = predict_examples(&model, &params, val_set, config.precision)?;
            evaluate(&preds, Protocol::Chunk, 0)?.chunk_accuracy
        };
        let log = EpochLog {
            epoch,
            mean_loss: loss_sum / train_set.len() as f64,
            train_accuracy,
            val_accuracy,
        };
        info!(
            epoch,
            loss = log.mean_loss,
            train_acc = log.train_accuracy,
            val_acc = log.val_accuracy,
            "epoch done"
        );
        history.push(log);
        if best.as_ref().is_none_or(|b| val_accuracy > b.header.val_accuracy) {
            best = Some(Checkpoint::new(config, params.clone(), epoch, val_accuracy));
        }
    }
    Ok(TrainOutcome {
        best: best.expect("at least one epoch"),
        history,
    })
}

/// Plain training steps on a fixed batch list, without validation; returns
/// the final parameters. Used for overfitting checks.
pub fn fit_steps(examples: &[Example], config: &TrainConfig, steps: usize) -> Result<ModelParams> {
    let model = PointClassifier::new(config.encoder.clone())?;
    let mut params = model.init_params(derive_seed(config.seed, INIT_STREAM, 0));
    let adam = config.adam();
    let class_w = [1.0; CLASSES];
    let all: Vec<&Example> = examples.iter().collect();
    for _ in 0..steps {
        for batch in all.chunks(config.batch_size) {
            let grads = batch_grads(&model, &params.cast::<f64>(), batch, &class_w)?;
            let mut total: Vec<Vec<f64>> = params.entries().iter().map(|e| vec![0.0; e.value.len()]).collect();
            for g in &grads {
                for (acc, part) in total.iter_mut().zip(&g.grads) {
                    acc.iter_mut().zip(part).for_each(|(a, &p)| *a += p);
                }
            }
            params.set_grads(total)?;
            adam.step(&mut params)?;
        }
    }
    params.clear_grads();
    Ok(params)
}
