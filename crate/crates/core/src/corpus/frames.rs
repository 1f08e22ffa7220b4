use serde::{Deserialize, Serialize};

use crate::corpus::manifest::{LabeledRecord, UtteranceRecord};
use crate::corpus::taxonomy::EmotionClass;
use crate::error::{Error, Result};

/// Classifier frame period: 20 ms.
pub const FRAME_PERIOD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLabelSequence {
    pub frame_period: f64,
    pub labels: Vec<EmotionClass>,
}

impl FrameLabelSequence {
    pub fn new(labels: Vec<EmotionClass>) -> Self {
        Self {
            frame_period: FRAME_PERIOD,
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn ids(&self) -> Vec<usize> {
        self.labels.iter().map(|c| c.id()).collect()
    }
}

/// `⌊duration / 0.02⌋`.
///
/// A 1e-9 nudge absorbs binary representation error, so that e.g. 0.06 s
/// yields 3 frames rather than 2.
pub fn frame_count(duration: f64) -> usize {
    if !(duration > 0.0) {
        return 0;
    }
    (duration / FRAME_PERIOD + 1e-9).floor() as usize
}

pub fn propagate_frames(record: &UtteranceRecord, emotion: EmotionClass) -> Result<FrameLabelSequence> {
    let n = frame_count(record.duration);
    if n == 0 {
        return Err(Error::EmptyUtterance {
            id: record.id.clone(),
            duration: record.duration,
        });
    }
    Ok(FrameLabelSequence::new(vec![emotion; n]))
}

pub fn propagate_labeled(rec: &LabeledRecord) -> Result<FrameLabelSequence> {
    propagate_frames(&rec.record, rec.emotion)
}
