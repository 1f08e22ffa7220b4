use crate::corpus::{EmotionClass, NUM_CLASSES};
use crate::error::{Error, Result};

/// Upper bound on voting passes; convergence is typically reached in a handful.
const MAX_PASSES: usize = 10_000;

/// One centered majority-vote pass; edge windows are truncated.
///
/// Ties go to the label just emitted for the previous frame, then to the
/// frame's own input label, then to the lowest class id.
pub fn majority_pass(labels: &[EmotionClass], window: usize) -> Result<Vec<EmotionClass>> {
    check_window(window)?;
    let h = window / 2;
    let n = labels.len();
    let mut counts = [0usize; NUM_CLASSES];
    let mut out: Vec<EmotionClass> = Vec::with_capacity(n);
    for i in 0..n {
        counts.fill(0);
        for l in &labels[i.saturating_sub(h)..(i + h + 1).min(n)] {
            counts[l.id()] += 1;
        }
        let top = *counts.iter().max().unwrap();
        let tied = |c: EmotionClass| counts[c.id()] == top;
        let pick = match out.last() {
            Some(&prev) if tied(prev) => prev,
            _ if tied(labels[i]) => labels[i],
            _ => EmotionClass::ALL.into_iter().find(|&c| tied(c)).unwrap(),
        };
        out.push(pick);
    }
    Ok(out)
}

/// Majority-vote smoothing iterated to a fixed point, so that smoothing is idempotent.
pub fn smooth_predictions(labels: &[EmotionClass], window: usize) -> Result<Vec<EmotionClass>> {
    check_window(window)?;
    let mut cur = labels.to_vec();
    for _ in 0..MAX_PASSES {
        let next = majority_pass(&cur, window)?;
        if next == cur {
            break;
        }
        cur = next;
    }
    Ok(cur)
}

fn check_window(window: usize) -> Result<()> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::Parameter(format!("smoothing window must be odd and ≥ 1, got {window}")));
    }
    Ok(())
}
