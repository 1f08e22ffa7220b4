use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::frames::frame_count;
use crate::corpus::manifest::LabeledRecord;
use crate::corpus::taxonomy::{EmotionClass, NUM_CLASSES};
use crate::corpus::weights::compute_class_weights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub utterances: u64,
    pub utterance_pct: f64,
    pub frames: u64,
    pub frame_pct: f64,
    pub weight: f64,
}

/// Per-class distribution report. Weights are derived from utterance counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_utterances: u64,
    pub total_frames: u64,
    /// False when some class is absent; every weight is then reported as 0.
    pub weights_defined: bool,
    pub classes: BTreeMap<EmotionClass, ClassStats>,
}

impl CorpusStats {
    pub fn class(&self, c: EmotionClass) -> &ClassStats {
        &self.classes[&c]
    }
}

fn pct(part: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * part as f64 / total as f64
    }
}

pub fn corpus_stats(records: &[LabeledRecord]) -> CorpusStats {
    let mut utts = [0u64; NUM_CLASSES];
    let mut frames = [0u64; NUM_CLASSES];
    for r in records {
        utts[r.emotion.id()] += 1;
        frames[r.emotion.id()] += frame_count(r.record.duration) as u64;
    }
    stats_from_counts(&utts, &frames)
}

pub fn stats_from_counts(utts: &[u64; NUM_CLASSES], frames: &[u64; NUM_CLASSES]) -> CorpusStats {
    let total_utterances: u64 = utts.iter().sum();
    let total_frames: u64 = frames.iter().sum();
    let weights = compute_class_weights(utts).ok();
    let classes = EmotionClass::ALL
        .into_iter()
        .map(|c| {
            let i = c.id();
            let s = ClassStats {
                utterances: utts[i],
                utterance_pct: pct(utts[i], total_utterances),
                frames: frames[i],
                frame_pct: pct(frames[i], total_frames),
                weight: weights.map_or(0.0, |w| w.get(c)),
            };
            (c, s)
        })
        .collect();
    CorpusStats {
        total_utterances,
        total_frames,
        weights_defined: weights.is_some(),
        classes,
    }
}
