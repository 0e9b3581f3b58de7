use super::{Gradients, ProbeParams};
use serde::{Deserialize, Serialize};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

/// First and second moment estimates of Adam, flat over all parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update over `(param, gradient)` pairs.
    pub fn update<'a>(
        &mut self,
        pairs: impl Iterator<Item = (&'a mut f64, f64)>,
        learning_rate: f64,
    ) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for ((p, g), (m, v)) in pairs.zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OptimizerState {
    Adam(AdamState),
    Sgd { step: u64 },
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, params: &ProbeParams) -> Self {
        match kind {
            OptimizerKind::Adam => OptimizerState::Adam(AdamState::new(params.len())),
            OptimizerKind::Sgd => OptimizerState::Sgd { step: 0 },
        }
    }

    pub fn step_count(&self) -> u64 {
        match self {
            OptimizerState::Adam(s) => s.step_count(),
            OptimizerState::Sgd { step } => *step,
        }
    }
}

pub fn optimizer_step(
    params: &mut ProbeParams,
    grads: &Gradients,
    state: &mut OptimizerState,
    learning_rate: f64,
) {
    let pairs = params.iter_mut().zip(grads.iter().copied());
    match state {
        OptimizerState::Adam(adam) => adam.update(pairs, learning_rate),
        OptimizerState::Sgd { step } => {
            *step += 1;
            for (p, g) in pairs {
                *p -= learning_rate * g;
            }
        }
    }
}
