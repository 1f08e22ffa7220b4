use serde::{Deserialize, Serialize};

use crate::animator::mesh::TemplateMesh;
use crate::animator::model::{composite_loss, Animator, LossBreakdown, LossWeights};
use crate::animator::synth::AnimatorSample;
use crate::diarization::ConditioningSequence;
use crate::error::{Error, Result};
use crate::numeric::{AdamW, AdamWConfig, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnimatorTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Samples per optimizer step.
    pub accum_steps: usize,
    pub loss_weights: LossWeights,
}

impl Default for AnimatorTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            epochs: 1,
            accum_steps: 1,
            loss_weights: LossWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: u64,
    pub sample: String,
    pub loss: LossBreakdown,
}

/// Loss for one sample with its state broadcast over time; gradients accumulate.
pub fn sample_loss_and_grad(
    model: &mut Animator,
    sample: &AnimatorSample,
    template: &TemplateMesh,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    let t_len = sample.audio.rows();
    let cond = ConditioningSequence::constant(&model.table, &model.store, sample.state, model.config.fps, t_len);
    let pass = model.forward_train(&sample.audio, cond, template)?;
    let loss = composite_loss(
        &pass.pred,
        &sample.truth,
        &pass.lip_features,
        &sample.text_features,
        &pass.log_probs,
        &sample.chars,
        weights,
    )?;
    if !loss.breakdown.total.is_finite() {
        return Err(Error::NonFiniteLoss(format!("sample `{}`", sample.id)));
    }
    model.backward_train(&sample.audio, &pass, &loss);
    Ok(loss.breakdown)
}

/// Adam with batch size 1 and gradient accumulation over `accum_steps`
/// samples. Sample order is reshuffled each epoch from `seed`.
pub fn train_animator(
    model: &mut Animator,
    samples: &[AnimatorSample],
    template: &TemplateMesh,
    config: &AnimatorTrainConfig,
    seed: u64,
) -> Result<Vec<StepRecord>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("animator training set is empty".into()));
    }
    if config.accum_steps == 0 {
        return Err(Error::Config("accum_steps must be positive".into()));
    }
    model.check_template(template)?;
    let mut opt = AdamW::new(AdamWConfig::adam(config.learning_rate), &model.store)?;
    let mut rng = RngStream::new(seed);
    let mut history = Vec::new();
    model.store.zero_grads();
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        rng.shuffle(&mut order);
        let mut pending = 0;
        for &i in &order {
            let s = &samples[i];
            let loss = sample_loss_and_grad(model, s, template, &config.loss_weights)?;
            history.push(StepRecord { epoch, step: opt.step, sample: s.id.clone(), loss });
            pending += 1;
            if pending == config.accum_steps {
                model.store.scale_grads(1.0 / pending as f64);
                opt.step(&mut model.store)?;
                pending = 0;
            }
        }
        if pending > 0 {
            model.store.scale_grads(1.0 / pending as f64);
            opt.step(&mut model.store)?;
        }
    }
    Ok(history)
}
