use super::mlp::{backward, forward_batch, init_params, ProbeParams};
use super::optim::{optimizer_step, OptimizerState};
use super::{ProbeConfig, ProbeError, Result};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Features (one row per example) with their class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(ProbeError::DimensionMismatch {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        Ok(Dataset { features, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(ProbeError::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        let features =
            Array2::from_shape_vec((rows.len(), dim), rows.concat()).expect("checked shape");
        Dataset::new(features, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitData {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// 1-based epoch of the kept checkpoint.
    pub best_epoch: usize,
    pub best_dev_accuracy: f64,
    pub test_accuracy: f64,
    /// Mean training loss of each epoch.
    pub loss_curve: Vec<f64>,
    pub dev_curve: Vec<f64>,
    pub seed: u64,
}

/// Class predictions; ties go to the lowest class index.
pub fn predict(params: &ProbeParams, features: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    let (_, logits) = forward_batch(params, features)?;
    Ok(logits
        .outer_iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect())
}

/// Fraction of correctly classified examples.
pub fn evaluate(
    params: &ProbeParams,
    features: ArrayView2<'_, f64>,
    labels: &[usize],
) -> Result<f64> {
    if labels.is_empty() {
        return Err(ProbeError::EmptySet);
    }
    if features.nrows() != labels.len() {
        return Err(ProbeError::DimensionMismatch {
            expected: features.nrows(),
            found: labels.len(),
        });
    }
    let predictions = predict(params, features)?;
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

struct Standardizer {
    mean: Array1<f64>,
    scale: Array1<f64>,
}

impl Standardizer {
    fn fit(x: &Array2<f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).expect("non-empty train set");
        let std = x.std_axis(Axis(0), 0.0);
        let scale = std.mapv(|s| if s > 1e-12 { 1.0 / s } else { 1.0 });
        Standardizer { mean, scale }
    }

    fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        (x - &self.mean) * &self.scale
    }

    /// Rewrites the first layer so the probe consumes raw features:
    /// `W1·((x - mean) * scale) + b1 = (W1 * scale)·x + (b1 - (W1 * scale)·mean)`.
    fn fold_into(&self, params: &mut ProbeParams) {
        params.w1 *= &self.scale;
        params.b1 -= &params.w1.dot(&self.mean);
    }
}

/// Trains a probe with mini-batches, keeping the checkpoint with the best dev
/// accuracy and stopping after `patience` epochs without improvement.
pub fn train(data: &SplitData, config: &ProbeConfig) -> Result<(ProbeParams, TrainReport)> {
    config.validate()?;
    for set in [&data.train, &data.dev, &data.test] {
        if set.is_empty() {
            return Err(ProbeError::EmptySet);
        }
        if set.dim() != config.input_dim {
            return Err(ProbeError::DimensionMismatch {
                expected: config.input_dim,
                found: set.dim(),
            });
        }
        if let Some(&label) = set.labels.iter().find(|&&l| l >= config.class_count) {
            return Err(ProbeError::LabelOutOfRange {
                label,
                classes: config.class_count,
            });
        }
    }

    let standardizer = config
        .standardize
        .then(|| Standardizer::fit(&data.train.features));
    let prepare = |x: &Array2<f64>| match &standardizer {
        Some(s) => s.apply(x),
        None => x.clone(),
    };
    let train_x = prepare(&data.train.features);
    let dev_x = prepare(&data.dev.features);
    let test_x = prepare(&data.test.features);

    let mut params = init_params(config);
    let mut optimizer = OptimizerState::new(config.optimizer, &params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut best = params.clone();
    let mut best_dev = -1.0;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut loss_curve = Vec::new();
    let mut dev_curve = Vec::new();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let x = train_x.select(Axis(0), chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| data.train.labels[i]).collect();
            let (batch_loss, grads) = backward(&params, x.view(), &y)?;
            if !batch_loss.is_finite() {
                return Err(ProbeError::NonFiniteLoss {
                    epoch,
                    batch: b + 1,
                });
            }
            epoch_loss += batch_loss * chunk.len() as f64;
            optimizer_step(&mut params, &grads, &mut optimizer, config.learning_rate);
        }
        loss_curve.push(epoch_loss / data.train.len() as f64);

        let dev = evaluate(&params, dev_x.view(), &data.dev.labels)?;
        dev_curve.push(dev);
        if dev > best_dev {
            best_dev = dev;
            best_epoch = epoch;
            best = params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }

    let test_accuracy = evaluate(&best, test_x.view(), &data.test.labels)?;
    if let Some(s) = &standardizer {
        s.fold_into(&mut best);
    }
    let report = TrainReport {
        epochs_run: loss_curve.len(),
        best_epoch,
        best_dev_accuracy: best_dev,
        test_accuracy,
        loss_curve,
        dev_curve,
        seed: config.seed,
    };
    Ok((best, report))
}
