use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::timing::timed;
use super::{CutLayerMessage, EpochWindow, GradientMessage, GradientTap, TimingReport};
use crate::data::Dataset;
use crate::metrics::roc_auc;
use crate::models::{
    backward, cross_entropy_soft, cross_entropy_unnormalized, forward, sgd_step, Architecture, ModelError,
    Network, OptimizerState, Schedule, Trace,
};
use crate::numerics::{argmax, softmax_in_place, Matrix, RngStream};
use crate::secdt::{
    build_mapping_pools, maximum_mapping, noised_targets, normalize_gradients, transform_labels,
    weighted_mapping, DefenseConfig, MappingPools, NoiseResample, NormStandard,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: u32,
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default)]
    pub schedule: Schedule,
    pub seed: u64,
    #[serde(default)]
    pub defense: Option<DefenseConfig>,
    /// Epochs the host's tap records; [`EpochWindow::NONE`] disables it.
    #[serde(default = "default_window")]
    pub tap_window: EpochWindow,
}

fn default_learning_rate() -> f64 {
    0.1
}

fn default_window() -> EpochWindow {
    EpochWindow::ALL
}

impl TrainConfig {
    pub fn new(epochs: u32, batch_size: usize, seed: u64) -> Self {
        Self {
            epochs,
            batch_size,
            learning_rate: default_learning_rate(),
            schedule: Schedule::Constant,
            seed,
            defense: None,
            tap_window: EpochWindow::ALL,
        }
    }

    pub fn with_defense(mut self, defense: DefenseConfig) -> Self {
        self.defense = Some(defense);
        self
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        OptimizerState::new(self.learning_rate, self.schedule)?;
        if let Some(d) = &self.defense {
            d.validate(classes)?;
        }
        Ok(())
    }

    /// Output width the guest's top model needs.
    pub fn label_width(&self, classes: usize) -> usize {
        self.defense.as_ref().map_or(classes, |d| d.dimension)
    }
}

/// Host bottom model `E` and guest top model `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitModel {
    pub bottom: Network,
    pub top: Network,
}

impl SplitModel {
    /// Fresh networks; `E` and `C` draw from the `bottom` and `top` children
    /// of `seed`.
    pub fn init(arch: &Architecture, input_width: usize, output_width: usize, seed: u64) -> Result<Self> {
        let rng = RngStream::new(seed);
        Ok(Self {
            bottom: arch.bottom(input_width, &mut rng.child("bottom"))?,
            top: arch.top(output_width, &mut rng.child("top"))?,
        })
    }

    pub fn cut_width(&self) -> usize {
        self.bottom.output_width()
    }

    /// Softmax of the top model's logits, one row per sample.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let z = self.bottom.predict(x)?;
        let mut p = self.top.predict(&z)?;
        for r in 0..p.rows() {
            softmax_in_place(p.row_mut(r));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SplitModel,
    pub tap: GradientTap,
    /// Sample-weighted mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub timing: TimingReport,
    /// Present when the run was defended.
    pub pools: Option<MappingPools>,
}

struct Host {
    bottom: Network,
    opt: OptimizerState,
}

impl Host {
    fn forward(&self, epoch: u32, batch_id: u32, ids: &[usize], x: &Matrix) -> Result<(Trace, CutLayerMessage)> {
        let trace = forward(&self.bottom, x)?;
        if !trace.output().is_finite() {
            return Err(Error::TrainingAborted {
                epoch,
                batch: batch_id,
                reason: "host embeddings are not finite".into(),
            });
        }
        let msg = CutLayerMessage {
            epoch,
            batch_id,
            sample_ids: ids.iter().map(|&i| i as u64).collect(),
            embeddings: trace.output().clone(),
        };
        Ok((trace, msg))
    }

    fn apply(&mut self, trace: &Trace, reply: &GradientMessage) -> std::result::Result<(), ModelError> {
        let (grads, _) = backward(&self.bottom, trace, &reply.gradients)?;
        sgd_step(&mut self.bottom, &grads, &mut self.opt)
    }
}

struct Guest {
    top: Network,
    opt: OptimizerState,
    codes: Vec<usize>,
    targets: Matrix,
    defense: Option<DefenseConfig>,
    pools: Option<MappingPools>,
}

impl Guest {
    fn new(top: Network, data: &Dataset, cfg: &TrainConfig, rng: &RngStream, timing: &mut TimingReport) -> Result<Self> {
        let (codes, targets, pools) = match &cfg.defense {
            Some(d) => {
                let (pools, targets) = timed(&mut timing.dim_transform, || -> Result<_> {
                    let mut pools = build_mapping_pools(data.classes(), d.dimension, &mut rng.child("pools"))?;
                    let targets = transform_labels(data.labels(), &mut pools, &mut rng.child("codes"))?;
                    Ok((pools, targets))
                })?;
                let codes = pools.per_sample_codes().expect("assigned above").to_vec();
                (codes, targets, Some(pools))
            }
            None => {
                let mut t = Matrix::zeros(data.len(), data.classes());
                data.labels().iter().enumerate().for_each(|(i, &y)| t.set(i, y, 1.0));
                (data.labels().to_vec(), t, None)
            }
        };
        if top.output_width() != targets.cols() {
            return Err(Error::Protocol(format!(
                "guest model outputs {} values but labels are {}-dimensional",
                top.output_width(),
                targets.cols()
            )));
        }
        Ok(Self {
            top,
            opt: OptimizerState::new(cfg.learning_rate, cfg.schedule)?,
            codes,
            targets,
            defense: cfg.defense.clone(),
            pools,
        })
    }

    fn begin_epoch(&mut self, epoch: u32, rng: &RngStream, timing: &mut TimingReport) {
        let Some(d) = &self.defense else { return };
        let fresh = match d.noise_resample {
            NoiseResample::PerEpoch => true,
            NoiseResample::Once => epoch == 0,
        };
        if d.noise_level > 0.0 && fresh {
            let stream = if d.noise_resample == NoiseResample::Once { 0 } else { u64::from(epoch) };
            let width = self.targets.cols();
            self.targets = timed(&mut timing.noise_rand, || {
                noised_targets(
                    &self.codes,
                    width,
                    d.noise_level,
                    d.renormalize,
                    &mut rng.child_indexed("noise", stream),
                )
            });
        }
    }

    fn respond(
        &mut self,
        request: &CutLayerMessage,
        ids: &[usize],
        timing: &mut TimingReport,
    ) -> Result<(f64, GradientMessage)> {
        let abort = |reason: String| Error::TrainingAborted {
            epoch: request.epoch,
            batch: request.batch_id,
            reason,
        };
        if request.embeddings.cols() != self.top.input_width() {
            return Err(Error::Protocol(format!(
                "embeddings are {} wide but the guest model expects {}",
                request.embeddings.cols(),
                self.top.input_width()
            )));
        }
        let targets = self.targets.select_rows(ids);
        let trace = forward(&self.top, &request.embeddings)?;
        let unnormalized = self.defense.as_ref().is_some_and(|d| !d.renormalize);
        let (loss, dlogits) = if unnormalized {
            cross_entropy_unnormalized(trace.output(), &targets)?
        } else {
            cross_entropy_soft(trace.output(), &targets)?
        };
        if !loss.is_finite() {
            return Err(abort(format!("loss is {loss}")));
        }
        let (grads, mut cut_grad) = backward(&self.top, &trace, &dlogits)?;
        sgd_step(&mut self.top, &grads, &mut self.opt).map_err(|e| abort(e.to_string()))?;
        if let Some(d) = self.defense.as_ref().filter(|d| d.norm_standard != NormStandard::Off) {
            cut_grad = timed(&mut timing.grad_norm, || normalize_gradients(&cut_grad, d.norm_standard));
        }
        let reply = GradientMessage {
            epoch: request.epoch,
            batch_id: request.batch_id,
            sample_ids: request.sample_ids.clone(),
            gradients: cut_grad,
        };
        Ok((loss, reply))
    }
}

/// Trains `bottom` (host) and `top` (guest) over `data`.
///
/// Each epoch visits the samples in an order drawn from the `batches` child
/// of the seed. For every batch the host sends its embeddings, the guest
/// answers with the cut-layer gradient, and both update with SGD. With a
/// defense configured the guest trains on pooled codes with label noise and
/// normalizes the gradients it sends. The tap logs both messages of every
/// exchange inside `cfg.tap_window`.
pub fn run_training(bottom: Network, top: Network, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let start = Instant::now();
    cfg.validate(data.classes())?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if bottom.input_width() != data.feature_width() {
        return Err(Error::InvalidArgument(format!(
            "bottom model takes {} features, data has {}",
            bottom.input_width(),
            data.feature_width()
        )));
    }
    if bottom.output_width() != top.input_width() {
        return Err(Error::Protocol(format!(
            "host cut width {} does not match guest input width {}",
            bottom.output_width(),
            top.input_width()
        )));
    }
    let rng = RngStream::new(cfg.seed);
    let mut timing = TimingReport::default();
    let mut guest = Guest::new(top, data, cfg, &rng, &mut timing)?;
    let mut host = Host {
        bottom,
        opt: OptimizerState::new(cfg.learning_rate, cfg.schedule)?,
    };
    let mut tap = GradientTap::new(cfg.tap_window);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs as usize);

    for epoch in 0..cfg.epochs {
        guest.begin_epoch(epoch, &rng, &mut timing);
        let order = rng.child_indexed("batches", u64::from(epoch)).permutation(data.len());
        let mut total = 0.0;
        for (b, ids) in order.chunks(cfg.batch_size).enumerate() {
            let batch_id = b as u32;
            let x = data.features().select_rows(ids);
            let (trace, request) = host.forward(epoch, batch_id, ids, &x)?;
            tap.record_embedding(&request);
            let (loss, reply) = guest.respond(&request, ids, &mut timing)?;
            if !reply.answers(&request) {
                return Err(Error::Protocol(format!("reply does not answer epoch {epoch} batch {b}")));
            }
            tap.record_gradient(&reply);
            host.apply(&trace, &reply).map_err(|e| Error::TrainingAborted {
                epoch,
                batch: batch_id,
                reason: e.to_string(),
            })?;
            total += loss * ids.len() as f64;
        }
        let mean = total / data.len() as f64;
        log::debug!("epoch {epoch}: loss {mean:.6}");
        epoch_losses.push(mean);
    }

    timing.total = start.elapsed().as_secs_f64();
    timing.default_train = (timing.total - timing.defense_overhead()).max(0.0);
    Ok(TrainOutcome {
        model: SplitModel {
            bottom: host.bottom,
            top: guest.top,
        },
        tap,
        epoch_losses,
        timing,
        pools: guest.pools,
    })
}

/// Initializes a split model for `data` (seed-derived, output width per the
/// defense) and trains it.
pub fn fit(arch: &Architecture, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate(data.classes())?;
    let model = SplitModel::init(arch, data.feature_width(), cfg.label_width(data.classes()), cfg.seed)?;
    run_training(model.bottom, model.top, data, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub accuracy: f64,
    /// ROC-AUC of the class-1 score; binary tasks with both classes present.
    pub auc: Option<f64>,
    /// Accuracy had the pools been decoded with the maximum mapping.
    pub max_mapping_accuracy: Option<f64>,
}

impl UtilityReport {
    /// AUC for binary tasks, accuracy otherwise.
    pub fn headline(&self) -> f64 {
        self.auc.unwrap_or(self.accuracy)
    }
}

/// Test utility. With `pools`, the `K`-wide predictions are decoded with the
/// weighted mapping and the binary score is the mass of class 1's pool.
pub fn evaluate(model: &SplitModel, data: &Dataset, pools: Option<&MappingPools>) -> Result<UtilityReport> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("evaluation set is empty".into()));
    }
    let probs = model.predict_proba(data.features())?;
    let expected = pools.map_or(data.classes(), MappingPools::dimension);
    if probs.cols() != expected {
        return Err(Error::InvalidArgument(format!(
            "model outputs {} values, expected {expected}",
            probs.cols()
        )));
    }
    let mut predicted = Vec::with_capacity(data.len());
    let mut max_predicted = Vec::new();
    let mut scores = Vec::with_capacity(data.len());
    for p in probs.row_iter() {
        match pools {
            Some(pools) => {
                predicted.push(weighted_mapping(p, pools));
                max_predicted.push(maximum_mapping(p, pools));
                if data.classes() == 2 {
                    scores.push(pools.pool_scores(p)[1]);
                }
            }
            None => {
                predicted.push(argmax(p));
                if data.classes() == 2 {
                    scores.push(p[1]);
                }
            }
        }
    }
    let fraction = |pred: &[usize]| {
        pred.iter().zip(data.labels()).filter(|(a, b)| a == b).count() as f64 / data.len() as f64
    };
    let auc = if data.classes() == 2 && data.class_counts().iter().all(|&c| c > 0) {
        let positives: Vec<bool> = data.labels().iter().map(|&y| y == 1).collect();
        Some(roc_auc(&scores, &positives)?)
    } else {
        None
    };
    Ok(UtilityReport {
        accuracy: fraction(&predicted),
        auc,
        max_mapping_accuracy: pools.map(|_| fraction(&max_predicted)),
    })
}
