//! Independent reference computations for the probe, written with plain loops
//! so they share no code with the library's ndarray implementation.

#![allow(dead_code)]

use discprobe::probe::{backward, init_params, Dataset, ProbeConfig, ProbeParams, SplitData};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const FD_STEP: f64 = 1e-4;
pub const GRAD_REL_TOL: f64 = 1e-4;
/// Kink margin: draws with a hidden pre-activation closer than this to zero
/// are resampled, since the finite difference would straddle the ReLU kink.
pub const KINK_MARGIN: f64 = 1e-3;
/// Denominator floor for the relative error of near-zero gradients.
pub const REL_FLOOR: f64 = 1e-8;

pub fn naive_pre(p: &ProbeParams, x: &[f64]) -> Vec<f64> {
    (0..p.w1.nrows())
        .map(|h| {
            let mut z = p.b1[h];
            for (j, xj) in x.iter().enumerate() {
                z += p.w1[[h, j]] * xj;
            }
            z
        })
        .collect()
}

pub fn naive_logits(p: &ProbeParams, x: &[f64]) -> Vec<f64> {
    let hidden: Vec<f64> = naive_pre(p, x).into_iter().map(|z| z.max(0.0)).collect();
    (0..p.w2.nrows())
        .map(|k| {
            let mut z = p.b2[k];
            for (h, a) in hidden.iter().enumerate() {
                z += p.w2[[k, h]] * a;
            }
            z
        })
        .collect()
}

pub fn naive_cross_entropy(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::MIN, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    lse - logits[label]
}

pub fn naive_mean_loss(p: &ProbeParams, xs: &[Vec<f64>], labels: &[usize]) -> f64 {
    xs.iter()
        .zip(labels)
        .map(|(x, &y)| naive_cross_entropy(&naive_logits(p, x), y))
        .sum::<f64>()
        / xs.len() as f64
}

pub struct GradDraw {
    pub params: ProbeParams,
    pub xs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub resamples: usize,
}

/// A random probe shape, initialization and batch with every hidden
/// pre-activation at least [`KINK_MARGIN`] away from zero.
pub fn grad_draw(seed: u64) -> GradDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = rng.random_range(2..9);
    let hidden = rng.random_range(2..9);
    let classes = rng.random_range(2..8);
    let batch = rng.random_range(1..6);
    let mut resamples = 0;
    loop {
        let mut cfg = ProbeConfig::new(input, classes);
        cfg.hidden_dim = hidden;
        cfg.seed = rng.random();
        let mut params = init_params(&cfg);
        for b in params.b1.iter_mut().chain(params.b2.iter_mut()) {
            *b = rng.sample::<f64, _>(StandardNormal) * 0.1;
        }
        let xs: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..input).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..classes)).collect();
        let near_kink = xs
            .iter()
            .any(|x| naive_pre(&params, x).iter().any(|z| z.abs() < KINK_MARGIN));
        if !near_kink {
            return GradDraw {
                params,
                xs,
                labels,
                resamples,
            };
        }
        resamples += 1;
    }
}

fn rows(xs: &[Vec<f64>]) -> Array2<f64> {
    Array2::from_shape_vec((xs.len(), xs[0].len()), xs.concat()).unwrap()
}

/// Largest relative error between the library's analytic gradient and central
/// differences of the naive loss, over every parameter.
pub fn max_gradient_error(draw: &GradDraw) -> f64 {
    let x = rows(&draw.xs);
    let (loss, grads) = backward(&draw.params, x.view(), &draw.labels).unwrap();
    assert!((loss - naive_mean_loss(&draw.params, &draw.xs, &draw.labels)).abs() < 1e-12);
    let analytic: Vec<f64> = grads.iter().copied().collect();
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        let mut plus = draw.params.clone();
        *plus.iter_mut().nth(i).unwrap() += FD_STEP;
        let mut minus = draw.params.clone();
        *minus.iter_mut().nth(i).unwrap() -= FD_STEP;
        let numeric = (naive_mean_loss(&plus, &draw.xs, &draw.labels)
            - naive_mean_loss(&minus, &draw.xs, &draw.labels))
            / (2.0 * FD_STEP);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        worst = worst.max(rel);
    }
    worst
}

/// Gaussian blobs around random, well separated class centres.
pub fn blobs(classes: usize, dim: usize, per_class: [usize; 3], seed: u64) -> SplitData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            (0..dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0)
                .collect()
        })
        .collect();
    let mut make = |n: usize| {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (c, centre) in centres.iter().enumerate() {
            for _ in 0..n {
                xs.push(
                    centre
                        .iter()
                        .map(|m| m + rng.sample::<f64, _>(StandardNormal) * 0.3)
                        .collect::<Vec<_>>(),
                );
                ys.push(c);
            }
        }
        Dataset::from_rows(&xs, ys).unwrap()
    };
    SplitData {
        train: make(per_class[0]),
        dev: make(per_class[1]),
        test: make(per_class[2]),
    }
}

/// The same data with training and dev labels permuted.
pub fn shuffle_labels(mut data: SplitData, seed: u64) -> SplitData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    data.train.labels.shuffle(&mut rng);
    data.dev.labels.shuffle(&mut rng);
    data
}
