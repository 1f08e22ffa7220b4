use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::taxonomy::{EmotionClass, NUM_CLASSES};
use crate::error::{Error, Result};

/// Per-class counts indexed by [`EmotionClass::id`].
pub type ClassCounts = [u64; NUM_CLASSES];

/// Inverse-frequency weights, normalized so that they sum to the class count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights([f64; NUM_CLASSES]);

impl ClassWeights {
    pub fn uniform() -> Self {
        Self([1.0; NUM_CLASSES])
    }

    pub fn from_array(w: [f64; NUM_CLASSES]) -> Result<Self> {
        if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Input("class weights must be positive and finite".into()));
        }
        Ok(Self(w))
    }

    pub fn get(&self, class: EmotionClass) -> f64 {
        self.0[class.id()]
    }

    pub fn as_array(&self) -> &[f64; NUM_CLASSES] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl Serialize for ClassWeights {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<&str, f64> = EmotionClass::ALL
            .iter()
            .map(|c| (c.name(), self.0[c.id()]))
            .collect();
        map.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ClassWeights {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<EmotionClass, f64>::deserialize(d)?;
        let mut w = [0.0; NUM_CLASSES];
        for c in EmotionClass::ALL {
            w[c.id()] = *map
                .get(&c)
                .ok_or_else(|| serde::de::Error::custom(format!("missing weight for {c}")))?;
        }
        ClassWeights::from_array(w).map_err(serde::de::Error::custom)
    }
}

/// `raw_c = N_total / (K·N_c)`, then rescaled by `K / Σ raw` so the weights sum to `K`.
pub fn compute_class_weights(counts: &ClassCounts) -> Result<ClassWeights> {
    if let Some(c) = EmotionClass::ALL.iter().find(|c| counts[c.id()] == 0) {
        return Err(Error::DegenerateClass(c.name().to_string()));
    }
    let mut w = [0.0; NUM_CLASSES];
    w.copy_from_slice(&inverse_frequency_weights(counts));
    Ok(ClassWeights(w))
}

/// Normalized inverse-frequency weights for any number of classes `K = counts.len()`.
///
/// All counts must be positive.
pub fn inverse_frequency_weights(counts: &[u64]) -> Vec<f64> {
    let k = counts.len() as f64;
    let total: f64 = counts.iter().map(|&n| n as f64).sum();
    let raw: Vec<f64> = counts.iter().map(|&n| total / (k * n as f64)).collect();
    let raw_sum: f64 = raw.iter().sum();
    raw.iter().map(|r| r * k / raw_sum).collect()
}

pub fn count_classes<'a>(labels: impl IntoIterator<Item = &'a EmotionClass>) -> ClassCounts {
    let mut counts = [0u64; NUM_CLASSES];
    for c in labels {
        counts[c.id()] += 1;
    }
    counts
}
