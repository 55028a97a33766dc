use serde::{Deserialize, Serialize};

use super::{Gradients, ModelError, Network};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Schedule {
    #[default]
    Constant,
    /// `η_t = η / (1 + decay · t)`; satisfies Σ η_t = ∞ and Σ η_t² < ∞.
    InverseTime { decay: f64 },
}

/// Plain SGD state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    learning_rate: f64,
    schedule: Schedule,
    steps: u64,
}

impl OptimizerState {
    pub fn new(learning_rate: f64, schedule: Schedule) -> Result<Self, ModelError> {
        if !(learning_rate > 0.0) || !learning_rate.is_finite() {
            return Err(ModelError::InvalidLearningRate(learning_rate));
        }
        if let Schedule::InverseTime { decay } = schedule {
            if !(decay >= 0.0) || !decay.is_finite() {
                return Err(ModelError::InvalidLearningRate(decay));
            }
        }
        Ok(Self {
            learning_rate,
            schedule,
            steps: 0,
        })
    }

    pub fn constant(learning_rate: f64) -> Result<Self, ModelError> {
        Self::new(learning_rate, Schedule::Constant)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Learning rate of the next step.
    pub fn current_rate(&self) -> f64 {
        match self.schedule {
            Schedule::Constant => self.learning_rate,
            Schedule::InverseTime { decay } => self.learning_rate / (1.0 + decay * self.steps as f64),
        }
    }
}

/// `θ ← θ − η_t · grad`. A non-finite gradient or updated parameter is an
/// error and leaves `net` untouched.
pub fn sgd_step(net: &mut Network, grads: &Gradients, opt: &mut OptimizerState) -> Result<(), ModelError> {
    if grads.layers.len() != net.layers().len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} gradient entries for {} layers",
            grads.layers.len(),
            net.layers().len()
        )));
    }
    for (i, (g, l)) in grads.layers.iter().zip(net.layers()).enumerate() {
        if g.weights.shape() != l.weights().shape() || g.bias.len() != l.bias().len() {
            return Err(ModelError::ShapeMismatch(format!(
                "gradient for layer {i} does not match its parameters"
            )));
        }
    }
    if !grads.is_finite() {
        return Err(ModelError::NonFinite("gradient".into()));
    }
    let eta = opt.current_rate();
    let overflows = grads.layers.iter().zip(net.layers()).any(|(g, l)| {
        let w = l.weights().as_slice().iter().zip(g.weights.as_slice());
        let b = l.bias().iter().zip(&g.bias);
        w.chain(b).any(|(p, d)| !(p - eta * d).is_finite())
    });
    if overflows {
        return Err(ModelError::NonFinite("parameter after update".into()));
    }
    for (g, layer) in grads.layers.iter().zip(net.layers_mut()) {
        let (w, b) = layer.params_mut();
        for (p, d) in w.as_mut_slice().iter_mut().zip(g.weights.as_slice()) {
            *p -= eta * d;
        }
        for (p, d) in b.iter_mut().zip(&g.bias) {
            *p -= eta * d;
        }
    }
    opt.steps += 1;
    Ok(())
}
