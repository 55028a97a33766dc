use serde::{Deserialize, Serialize};

use super::{AttackKind, AttackReport};
use crate::data::Dataset;
use crate::models::{backward, cross_entropy_soft, forward, sgd_step, Activation, Network, OptimizerState};
use crate::numerics::{argmax, softmax_in_place, Matrix, RngStream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletionConfig {
    /// Auxiliary labels the attacker holds per class.
    #[serde(default = "default_aux")]
    pub aux_per_class: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_epochs")]
    pub epochs: u32,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
}

fn default_aux() -> usize {
    10
}
fn default_hidden() -> usize {
    32
}
fn default_epochs() -> u32 {
    50
}
fn default_batch() -> usize {
    16
}
fn default_lr() -> f64 {
    0.05
}

impl Default for CompletionConfig {
    fn default() -> Self {
        Self {
            aux_per_class: default_aux(),
            hidden: default_hidden(),
            epochs: default_epochs(),
            batch_size: default_batch(),
            learning_rate: default_lr(),
        }
    }
}

/// Draws up to `per_class` sample indices of every class for the attacker's
/// labeled set; returns `(auxiliary, remaining)`, both in ascending order.
pub fn pick_auxiliary(data: &Dataset, per_class: usize, rng: &mut RngStream) -> Result<(Vec<usize>, Vec<usize>)> {
    if per_class == 0 {
        return Err(Error::InvalidArgument("auxiliary set needs at least one label per class".into()));
    }
    let mut aux = Vec::new();
    for class in 0..data.classes() {
        let mut members: Vec<usize> = (0..data.len()).filter(|&i| data.labels()[i] == class).collect();
        if members.is_empty() {
            return Err(Error::InvalidArgument(format!("class {class} has no samples to label")));
        }
        rng.shuffle(&mut members);
        aux.extend_from_slice(&members[..per_class.min(members.len())]);
    }
    aux.sort_unstable();
    let mut taken = vec![false; data.len()];
    aux.iter().for_each(|&i| taken[i] = true);
    let rest = (0..data.len()).filter(|&i| !taken[i]).collect();
    Ok((aux, rest))
}

/// Appends a fresh head `[cut → hidden (relu) → k]` to a copy of the host's
/// bottom model, fine-tunes every layer on `aux` with cross-entropy, and
/// labels `unlabeled`. Sample ids are row indices of `unlabeled`; binary
/// scores are the class-1 probability.
pub fn model_completion_attack(
    bottom: &Network,
    aux: &Dataset,
    unlabeled: &Dataset,
    cfg: &CompletionConfig,
    rng: &mut RngStream,
) -> Result<AttackReport> {
    for (name, ds) in [("auxiliary", aux), ("unlabeled", unlabeled)] {
        if ds.feature_width() != bottom.input_width() {
            return Err(Error::InvalidArgument(format!(
                "{name} data has {} features, the bottom model takes {}",
                ds.feature_width(),
                bottom.input_width()
            )));
        }
    }
    if let Some(missing) = aux.class_counts().iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!("auxiliary set has no sample of class {missing}")));
    }
    if cfg.batch_size == 0 || cfg.hidden == 0 {
        return Err(Error::InvalidArgument("completion batch size and width must be positive".into()));
    }
    let k = aux.classes();
    let head = Network::mlp(
        &[bottom.output_width(), cfg.hidden, k],
        Activation::SoftmaxAtLoss,
        &mut rng.child("head"),
    )?;
    let mut net = bottom.stacked(&head)?;
    let mut opt = OptimizerState::constant(cfg.learning_rate)?;
    let mut targets = Matrix::zeros(aux.len(), k);
    aux.labels().iter().enumerate().for_each(|(i, &y)| targets.set(i, y, 1.0));

    for epoch in 0..cfg.epochs {
        let order = rng.child_indexed("order", u64::from(epoch)).permutation(aux.len());
        for ids in order.chunks(cfg.batch_size) {
            let trace = forward(&net, &aux.features().select_rows(ids))?;
            let (_, dlogits) = cross_entropy_soft(trace.output(), &targets.select_rows(ids))?;
            let (grads, _) = backward(&net, &trace, &dlogits)?;
            sgd_step(&mut net, &grads, &mut opt)?;
        }
    }

    let mut probs = net.predict(unlabeled.features())?;
    let mut scores = Vec::with_capacity(unlabeled.len());
    let mut predicted = Vec::with_capacity(unlabeled.len());
    for r in 0..probs.rows() {
        let p = probs.row_mut(r);
        softmax_in_place(p);
        predicted.push(argmax(p));
        scores.push(if k == 2 { p[1] } else { p[argmax(p)] });
    }
    Ok(AttackReport {
        attack: AttackKind::ModelCompletion,
        sample_ids: (0..unlabeled.len() as u64).collect(),
        scores,
        predicted: Some(predicted),
        window: None,
    })
}
