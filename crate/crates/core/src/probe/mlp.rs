use super::{ProbeConfig, ProbeError, Result};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    /// `hidden_dim x input_dim`
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `class_count x hidden_dim`
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Gradients with the same shapes as [`ProbeParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl ProbeParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize, class_count: usize) -> Self {
        ProbeParams {
            w1: Array2::zeros((hidden_dim, input_dim)),
            b1: Array1::zeros(hidden_dim),
            w2: Array2::zeros((class_count, hidden_dim)),
            b2: Array1::zeros(class_count),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn class_count(&self) -> usize {
        self.w2.nrows()
    }

    pub fn len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All parameters in `w1, b1, w2, b2` order, row-major.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.w1
            .iter()
            .chain(self.b1.iter())
            .chain(self.w2.iter())
            .chain(self.b2.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    pub fn gradients_zeros(&self) -> Gradients {
        Gradients {
            w1: Array2::zeros(self.w1.raw_dim()),
            b1: Array1::zeros(self.b1.raw_dim()),
            w2: Array2::zeros(self.w2.raw_dim()),
            b2: Array1::zeros(self.b2.raw_dim()),
        }
    }
}

impl Gradients {
    /// Same order as [`ProbeParams::iter`].
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.w1
            .iter()
            .chain(self.b1.iter())
            .chain(self.w2.iter())
            .chain(self.b2.iter())
    }
}

/// Glorot-uniform weights, zero biases; deterministic in `config.seed`.
pub fn init_params(config: &ProbeConfig) -> ProbeParams {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut glorot = |rows: usize, cols: usize| {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..limit))
    };
    let w1 = glorot(config.hidden_dim, config.input_dim);
    let w2 = glorot(config.class_count, config.hidden_dim);
    ProbeParams {
        w1,
        b1: Array1::zeros(config.hidden_dim),
        w2,
        b2: Array1::zeros(config.class_count),
    }
}

/// Logits of a single input vector.
pub fn forward(params: &ProbeParams, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != params.input_dim() {
        return Err(ProbeError::DimensionMismatch {
            expected: params.input_dim(),
            found: x.len(),
        });
    }
    let x = ArrayView2::from_shape((1, x.len()), x).expect("contiguous row");
    let (_, logits) = forward_batch(params, x)?;
    Ok(logits.row(0).to_vec())
}

/// Hidden pre-activations and logits of a `batch x input_dim` matrix.
pub fn forward_batch(
    params: &ProbeParams,
    x: ArrayView2<'_, f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if x.ncols() != params.input_dim() {
        return Err(ProbeError::DimensionMismatch {
            expected: params.input_dim(),
            found: x.ncols(),
        });
    }
    let pre = x.dot(&params.w1.t()) + &params.b1;
    let hidden = pre.mapv(relu);
    let logits = hidden.dot(&params.w2.t()) + &params.b2;
    Ok((pre, logits))
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Softmax cross-entropy of one example, via log-sum-exp.
pub fn loss(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(ProbeError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    Ok(cross_entropy(logits, label))
}

fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum();
    let l = max + sum.ln() - logits[label];
    // Clamp tiny negative rounding residue; NaN passes through.
    if l < 0.0 {
        0.0
    } else {
        l
    }
}

/// Mean cross-entropy of a batch and its exact gradient with respect to every
/// parameter.
pub fn backward(
    params: &ProbeParams,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
) -> Result<(f64, Gradients)> {
    let batch = x.nrows();
    if batch == 0 {
        return Err(ProbeError::EmptyBatch);
    }
    if labels.len() != batch {
        return Err(ProbeError::DimensionMismatch {
            expected: batch,
            found: labels.len(),
        });
    }
    let classes = params.class_count();
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(ProbeError::LabelOutOfRange { label, classes });
    }

    let (pre, logits) = forward_batch(params, x)?;
    let hidden = pre.mapv(relu);
    let scale = 1.0 / batch as f64;

    let mut total = 0.0;
    let mut d_logits = Array2::<f64>::zeros((batch, classes));
    for (i, (row, &label)) in logits.outer_iter().zip(labels).enumerate() {
        let row = row.to_vec();
        total += cross_entropy(&row, label);
        let p = softmax(&row);
        let mut d = d_logits.row_mut(i);
        for (k, pk) in p.into_iter().enumerate() {
            d[k] = (pk - if k == label { 1.0 } else { 0.0 }) * scale;
        }
    }

    let w2 = d_logits.t().dot(&hidden);
    let b2 = d_logits.sum_axis(Axis(0));
    let mut d_pre = d_logits.dot(&params.w2);
    d_pre.zip_mut_with(&pre, |d, &z| {
        if z <= 0.0 {
            *d = 0.0;
        }
    });
    let w1 = d_pre.t().dot(&x);
    let b1 = d_pre.sum_axis(Axis(0));

    Ok((total * scale, Gradients { w1, b1, w2, b2 }))
}
