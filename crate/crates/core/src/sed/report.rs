use serde::{Deserialize, Serialize};

use crate::corpus::EmotionClass;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub class: String,
    pub support: u64,
    pub predicted: u64,
    /// `None` when the class is neither present nor predicted.
    pub precision: Option<f64>,
    /// `None` when the class is absent from the truth.
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    /// `counts[true][pred]`.
    pub counts: Vec<Vec<u64>>,
    /// Row-normalized percentages; rows of absent classes are `None`.
    pub row_percent: Vec<Option<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub frames: u64,
    pub accuracy: f64,
    pub per_class: Vec<ClassScores>,
    pub weighted: WeightedScores,
    pub confusion: ConfusionMatrix,
}

fn class_name(id: usize, k: usize) -> String {
    match EmotionClass::from_id(id) {
        Some(c) if k == crate::corpus::NUM_CLASSES => c.name().to_string(),
        _ => id.to_string(),
    }
}

pub fn confusion_counts(pred: &[usize], truth: &[usize], k: usize) -> Result<Vec<Vec<u64>>> {
    if pred.len() != truth.len() {
        return Err(Error::dim(format!("{} predictions for {} truth labels", pred.len(), truth.len())));
    }
    let mut m = vec![vec![0u64; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(Error::Input(format!("class id {} out of range 0..{k}", p.max(t))));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

/// Per-class precision/recall/F1, support-weighted aggregate and confusion matrix.
///
/// A class with support but no predictions gets precision 0. Classes absent
/// from the truth have undefined recall and F1 and carry zero weight.
pub fn classification_report(pred: &[usize], truth: &[usize], num_classes: usize) -> Result<ClassificationReport> {
    let m = confusion_counts(pred, truth, num_classes)?;
    let n = truth.len() as u64;
    let mut per_class = Vec::with_capacity(num_classes);
    let mut weighted = WeightedScores { precision: 0.0, recall: 0.0, f1: 0.0 };
    let mut correct = 0u64;
    for c in 0..num_classes {
        let tp = m[c][c];
        correct += tp;
        let support: u64 = m[c].iter().sum();
        let predicted: u64 = m.iter().map(|row| row[c]).sum();
        let precision = if predicted > 0 {
            Some(tp as f64 / predicted as f64)
        } else if support > 0 {
            Some(0.0)
        } else {
            None
        };
        let recall = (support > 0).then(|| tp as f64 / support as f64);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        if let (Some(p), Some(r), Some(f)) = (precision, recall, f1) {
            let w = support as f64 / n as f64;
            weighted.precision += w * p;
            weighted.recall += w * r;
            weighted.f1 += w * f;
        }
        per_class.push(ClassScores {
            class: class_name(c, num_classes),
            support,
            predicted,
            precision,
            recall,
            f1,
        });
    }
    let row_percent = m
        .iter()
        .map(|row| {
            let s: u64 = row.iter().sum();
            (s > 0).then(|| row.iter().map(|&v| 100.0 * v as f64 / s as f64).collect())
        })
        .collect();
    Ok(ClassificationReport {
        frames: n,
        accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        per_class,
        weighted,
        confusion: ConfusionMatrix {
            labels: (0..num_classes).map(|c| class_name(c, num_classes)).collect(),
            counts: m,
            row_percent,
        },
    })
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// Support-weighted F1 over classes `0..k`; out-of-range ids count as misses.
pub fn weighted_f1(pred: &[usize], truth: &[usize], k: usize) -> f64 {
    let mut tp = vec![0u64; k];
    let mut support = vec![0u64; k];
    let mut predicted = vec![0u64; k];
    for (&p, &t) in pred.iter().zip(truth) {
        if t < k {
            support[t] += 1;
        }
        if p < k {
            predicted[p] += 1;
        }
        if p == t && t < k {
            tp[t] += 1;
        }
    }
    let n = truth.len() as f64;
    (0..k)
        .filter(|&c| support[c] > 0)
        .map(|c| {
            let r = tp[c] as f64 / support[c] as f64;
            let p = if predicted[c] > 0 { tp[c] as f64 / predicted[c] as f64 } else { 0.0 };
            let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            support[c] as f64 / n * f
        })
        .sum()
}
