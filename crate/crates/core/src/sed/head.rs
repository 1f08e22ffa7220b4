use serde::{Deserialize, Serialize};

use crate::corpus::{EmotionClass, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::numeric::{
    dropout, dropout_backward, relu, relu_backward, softmax_rows, Linear, ParamStore, RngStream, Tensor,
};

/// Frame-level encoder outputs for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub frame_period: f64,
    pub frames: Tensor,
}

impl FeatureSequence {
    pub fn new(frame_period: f64, frames: Tensor) -> Result<Self> {
        if !(frame_period > 0.0 && frame_period.is_finite()) {
            return Err(Error::Input(format!("frame period must be positive, got {frame_period}")));
        }
        if frames.shape().len() != 2 || frames.rows() == 0 {
            return Err(Error::EmptyInput("feature sequence needs at least one frame of a T×D matrix".into()));
        }
        if !frames.is_finite() {
            return Err(Error::NonFinite("feature sequence".into()));
        }
        Ok(Self { frame_period, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.frame_period
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSequence {
    pub frame_period: f64,
    pub probs: Tensor,
}

impl PosteriorSequence {
    pub fn new(frame_period: f64, probs: Tensor) -> Result<Self> {
        if probs.shape().len() != 2 || probs.cols() != NUM_CLASSES {
            return Err(Error::dim(format!("posteriors must be T×{NUM_CLASSES}, got {:?}", probs.shape())));
        }
        for (t, row) in probs.row_iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Input(format!("posterior row {t} is not a distribution (sum {s})")));
            }
        }
        Ok(Self { frame_period, probs })
    }

    pub fn len(&self) -> usize {
        self.probs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.rows() == 0
    }

    /// Per-frame argmax; ties go to the lowest class id.
    pub fn argmax(&self) -> Vec<EmotionClass> {
        self.probs
            .row_iter()
            .map(|row| {
                let mut best = 0;
                for (i, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = i;
                    }
                }
                EmotionClass::from_id(best).expect("row width is NUM_CLASSES")
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SedHeadConfig {
    pub input_dim: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub dropout: f64,
}

impl Default for SedHeadConfig {
    fn default() -> Self {
        Self {
            input_dim: 768,
            hidden1: 512,
            hidden2: 128,
            dropout: 0.3,
        }
    }
}

/// Three-layer MLP from encoder features to seven emotion logits.
#[derive(Debug, Clone, PartialEq)]
pub struct SedHead {
    pub config: SedHeadConfig,
    pub store: ParamStore,
    pub l1: Linear,
    pub l2: Linear,
    pub l3: Linear,
}

#[derive(Debug, Clone)]
pub struct HeadCache {
    a1: Tensor,
    m1: Option<Tensor>,
    d1: Tensor,
    a2: Tensor,
    m2: Option<Tensor>,
    d2: Tensor,
}

impl SedHead {
    pub fn new(config: SedHeadConfig, rng: &mut RngStream) -> Result<Self> {
        Self::build(config, |store, name, i, o| Linear::new(store, name, i, o, true, rng))
    }

    /// Every weight and bias zero; every posterior is uniform.
    pub fn zeroed(config: SedHeadConfig) -> Result<Self> {
        Self::build(config, Linear::zeroed)
    }

    fn build(
        config: SedHeadConfig,
        mut make: impl FnMut(&mut ParamStore, &str, usize, usize) -> Linear,
    ) -> Result<Self> {
        if config.input_dim == 0 || config.hidden1 == 0 || config.hidden2 == 0 {
            return Err(Error::Config("head dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&config.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", config.dropout)));
        }
        let mut store = ParamStore::new();
        let l1 = make(&mut store, "sed.fc1", config.input_dim, config.hidden1);
        let l2 = make(&mut store, "sed.fc2", config.hidden1, config.hidden2);
        let l3 = make(&mut store, "sed.fc3", config.hidden2, NUM_CLASSES);
        Ok(Self { config, store, l1, l2, l3 })
    }

    /// Logits `T×7`. With `train == false` dropout is off and `rng` is untouched.
    pub fn forward(&self, x: &Tensor, train: bool, rng: &mut RngStream) -> Result<(Tensor, HeadCache)> {
        if x.shape().len() != 2 || x.cols() != self.config.input_dim {
            return Err(Error::dim(format!(
                "head expects T×{} features, got {:?}",
                self.config.input_dim,
                x.shape()
            )));
        }
        let p = self.config.dropout;
        let a1 = self.l1.forward(&self.store, x)?;
        let (d1, m1) = dropout(&relu(&a1), p, train, rng)?;
        let a2 = self.l2.forward(&self.store, &d1)?;
        let (d2, m2) = dropout(&relu(&a2), p, train, rng)?;
        let z = self.l3.forward(&self.store, &d2)?;
        Ok((z, HeadCache { a1, m1, d1, a2, m2, d2 }))
    }

    /// Accumulates parameter gradients for upstream `dlogits`.
    pub fn backward(&mut self, x: &Tensor, cache: &HeadCache, dlogits: &Tensor) {
        let dd2 = self.l3.backward(&mut self.store, &cache.d2, dlogits);
        let da2 = relu_backward(&cache.a2, &dropout_backward(cache.m2.as_ref(), &dd2));
        let dd1 = self.l2.backward(&mut self.store, &cache.d1, &da2);
        let da1 = relu_backward(&cache.a1, &dropout_backward(cache.m1.as_ref(), &dd1));
        self.l1.backward(&mut self.store, x, &da1);
    }
}

pub fn head_forward(
    features: &FeatureSequence,
    head: &SedHead,
    train: bool,
    rng: &mut RngStream,
) -> Result<(Tensor, PosteriorSequence)> {
    let (z, _) = head.forward(&features.frames, train, rng)?;
    let p = softmax_rows(&z);
    Ok((z, PosteriorSequence { frame_period: features.frame_period, probs: p }))
}

/// Eval-mode posteriors at the classifier frame rate.
pub fn predict(head: &SedHead, features: &FeatureSequence) -> Result<PosteriorSequence> {
    let mut rng = RngStream::new(0);
    head_forward(features, head, false, &mut rng).map(|(_, p)| p)
}
