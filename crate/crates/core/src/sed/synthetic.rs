use crate::corpus::{EmotionClass, NUM_CLASSES};
use crate::numeric::{RngStream, Tensor};
use crate::sed::train::Utterance;

/// Linearly separable toy features: one Gaussian cluster per class.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSetConfig {
    pub dim: usize,
    pub utterances: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    /// Standard deviation of cluster centers; noise is unit variance.
    pub separation: f64,
}

impl Default for SyntheticSetConfig {
    fn default() -> Self {
        Self {
            dim: 16,
            utterances: 140,
            min_frames: 20,
            max_frames: 60,
            separation: 2.0,
        }
    }
}

pub fn cluster_centers(dim: usize, separation: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = RngStream::new(seed).fork(0xC1);
    (0..NUM_CLASSES)
        .map(|_| (0..dim).map(|_| separation * rng.normal()).collect())
        .collect()
}

/// Utterances cycle through the classes so every class is present.
/// `centers_seed` fixes the clusters; `seed` draws the samples.
pub fn synthetic_set(config: SyntheticSetConfig, centers_seed: u64, seed: u64) -> Vec<Utterance> {
    let centers = cluster_centers(config.dim, config.separation, centers_seed);
    let mut rng = RngStream::new(seed);
    let span = config.max_frames.saturating_sub(config.min_frames) + 1;
    (0..config.utterances)
        .map(|u| {
            let class = EmotionClass::ALL[u % NUM_CLASSES];
            let t = config.min_frames.max(1) + rng.below(span);
            let mut data = Vec::with_capacity(t * config.dim);
            for _ in 0..t {
                for &m in &centers[class.id()] {
                    data.push(m + rng.normal());
                }
            }
            Utterance {
                id: format!("syn{u:05}"),
                features: Tensor::matrix(t, config.dim, data).expect("finite by construction"),
                labels: vec![class; t],
            }
        })
        .collect()
}
