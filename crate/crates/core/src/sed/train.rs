use serde::{Deserialize, Serialize};

use crate::corpus::{compute_class_weights, ClassWeights, EmotionClass, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::numeric::{AdamW, AdamWConfig, PlateauConfig, PlateauScheduler, RngStream, Tensor};
use crate::sed::head::SedHead;
use crate::sed::loss::weighted_frame_ce;

/// One training utterance: `T×D` features and `T` frame labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub features: Tensor,
    pub labels: Vec<EmotionClass>,
}

impl Utterance {
    /// Majority frame label, ties to the lowest id.
    pub fn class(&self) -> EmotionClass {
        let mut counts = [0usize; NUM_CLASSES];
        for l in &self.labels {
            counts[l.id()] += 1;
        }
        let top = counts.iter().max().copied().unwrap_or(0);
        EmotionClass::ALL.into_iter().find(|c| counts[c.id()] == top).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SedTrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub physical_batch: usize,
    pub accum_steps: usize,
    pub plateau: PlateauConfig,
    pub max_epochs: usize,
}

impl Default for SedTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            weight_decay: 1e-4,
            physical_batch: 4,
            accum_steps: 8,
            plateau: PlateauConfig::default(),
            max_epochs: 50,
        }
    }
}

impl SedTrainConfig {
    pub fn effective_batch(&self) -> usize {
        self.physical_batch * self.accum_steps
    }

    fn validate(&self) -> Result<()> {
        if self.physical_batch == 0 || self.accum_steps == 0 {
            return Err(Error::Config("physical_batch and accum_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub learning_rate: f64,
    pub optimizer_steps: u64,
}

/// Class weights from the utterance counts of a training set.
pub fn class_weights_from_set(set: &[Utterance]) -> Result<ClassWeights> {
    let mut counts = [0u64; NUM_CLASSES];
    for u in set {
        counts[u.class().id()] += 1;
    }
    compute_class_weights(&counts)
}

/// Frame-weighted mean loss and frame accuracy in eval mode.
pub fn evaluate_set(head: &SedHead, set: &[Utterance], weights: &ClassWeights) -> Result<(f64, f64)> {
    let mut rng = RngStream::new(0);
    let (mut loss, mut hits, mut frames) = (0.0, 0usize, 0usize);
    for u in set {
        let (z, _) = head.forward(&u.features, false, &mut rng)?;
        let (l, _) = weighted_frame_ce(&z, &u.labels, weights)?;
        loss += l * u.labels.len() as f64;
        hits += count_hits(&z, &u.labels);
        frames += u.labels.len();
    }
    if frames == 0 {
        return Err(Error::EmptyInput("evaluation set has no frames".into()));
    }
    Ok((loss / frames as f64, hits as f64 / frames as f64))
}

fn count_hits(z: &Tensor, labels: &[EmotionClass]) -> usize {
    z.row_iter()
        .zip(labels)
        .filter(|(row, l)| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best == l.id()
        })
        .count()
}

fn check_set(head: &SedHead, set: &[Utterance], what: &str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptyInput(format!("{what} set is empty")));
    }
    for u in set {
        if u.features.shape().len() != 2 || u.features.cols() != head.config.input_dim {
            return Err(Error::dim(format!(
                "utterance `{}` has features {:?}, head expects width {}",
                u.id,
                u.features.shape(),
                head.config.input_dim
            )));
        }
        if u.labels.len() != u.features.rows() || u.labels.is_empty() {
            return Err(Error::dim(format!(
                "utterance `{}` has {} labels for {} frames",
                u.id,
                u.labels.len(),
                u.features.rows()
            )));
        }
    }
    Ok(())
}

/// Resumable training state. Everything needed to continue bit-exactly.
#[derive(Debug, Clone)]
pub struct SedTrainer {
    pub config: SedTrainConfig,
    pub head: SedHead,
    pub weights: ClassWeights,
    pub optimizer: AdamW,
    pub scheduler: PlateauScheduler,
    pub rng: RngStream,
    pub epoch: usize,
    pub history: Vec<EpochStats>,
}

impl SedTrainer {
    pub fn new(head: SedHead, config: SedTrainConfig, weights: ClassWeights, seed: u64) -> Result<Self> {
        config.validate()?;
        let optimizer = AdamW::new(
            AdamWConfig {
                learning_rate: config.learning_rate,
                weight_decay: config.weight_decay,
                ..AdamWConfig::default()
            },
            &head.store,
        )?;
        Ok(Self {
            config,
            head,
            weights,
            optimizer,
            scheduler: PlateauScheduler::new(config.plateau)?,
            rng: RngStream::new(seed),
            epoch: 0,
            history: Vec::new(),
        })
    }

    pub fn finished(&self) -> bool {
        self.epoch >= self.config.max_epochs
    }

    pub fn run_epoch(&mut self, train: &[Utterance], val: &[Utterance]) -> Result<EpochStats> {
        check_set(&self.head, train, "training")?;
        check_set(&self.head, val, "validation")?;
        let mut order: Vec<usize> = (0..train.len()).collect();
        self.rng.shuffle(&mut order);

        let (mut loss_sum, mut hits, mut frames) = (0.0, 0usize, 0usize);
        let mut pending = 0usize;
        for (b, chunk) in order.chunks(self.config.physical_batch).enumerate() {
            let parts: Vec<&Tensor> = chunk.iter().map(|&i| &train[i].features).collect();
            let x = Tensor::concat_rows(&parts)?;
            let labels: Vec<EmotionClass> = chunk.iter().flat_map(|&i| train[i].labels.iter().copied()).collect();
            let (z, cache) = self.head.forward(&x, true, &mut self.rng)?;
            let (loss, dz) = weighted_frame_ce(&z, &labels, &self.weights)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss(format!("epoch {}, batch {b}", self.epoch + 1)));
            }
            self.head.backward(&x, &cache, &dz);
            loss_sum += loss * labels.len() as f64;
            hits += count_hits(&z, &labels);
            frames += labels.len();
            pending += 1;
            if pending == self.config.accum_steps {
                self.apply_update(pending)?;
                pending = 0;
            }
        }
        if pending > 0 {
            self.apply_update(pending)?;
        }

        let (val_loss, val_accuracy) = evaluate_set(&self.head, val, &self.weights)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss(format!("epoch {}, validation", self.epoch + 1)));
        }
        self.scheduler.observe(val_loss, &mut self.optimizer)?;
        self.epoch += 1;
        let stats = EpochStats {
            epoch: self.epoch,
            train_loss: loss_sum / frames as f64,
            train_accuracy: hits as f64 / frames as f64,
            val_loss,
            val_accuracy,
            learning_rate: self.optimizer.learning_rate(),
            optimizer_steps: self.optimizer.step,
        };
        self.history.push(stats);
        Ok(stats)
    }

    /// Averages the accumulated micro-batch gradients and steps the optimizer.
    fn apply_update(&mut self, micro_batches: usize) -> Result<()> {
        self.head.store.scale_grads(1.0 / micro_batches as f64);
        self.optimizer.step(&mut self.head.store)
    }

    pub fn run(&mut self, train: &[Utterance], val: &[Utterance]) -> Result<()> {
        while !self.finished() {
            self.run_epoch(train, val)?;
        }
        Ok(())
    }
}

/// Trains `head` with class weights drawn from `train` only.
pub fn train_sed(
    train: &[Utterance],
    val: &[Utterance],
    head: SedHead,
    config: SedTrainConfig,
    seed: u64,
) -> Result<(SedHead, Vec<EpochStats>)> {
    check_set(&head, train, "training")?;
    check_set(&head, val, "validation")?;
    let weights = class_weights_from_set(train)?;
    let mut trainer = SedTrainer::new(head, config, weights, seed)?;
    trainer.run(train, val)?;
    Ok((trainer.head, trainer.history))
}
