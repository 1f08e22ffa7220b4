use crate::corpus::{ClassWeights, EmotionClass, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, Tensor};

/// `−(1/F) Σ_f w_{c_f} log softmax(z_f)[c_f]` and its gradient with respect to `z`.
pub fn weighted_frame_ce(
    logits: &Tensor,
    labels: &[EmotionClass],
    weights: &ClassWeights,
) -> Result<(f64, Tensor)> {
    if logits.shape().len() != 2 || logits.cols() != NUM_CLASSES {
        return Err(Error::dim(format!("logits must be T×{NUM_CLASSES}, got {:?}", logits.shape())));
    }
    let f = logits.rows();
    if labels.len() != f {
        return Err(Error::dim(format!("{} labels for {f} frames", labels.len())));
    }
    if f == 0 {
        return Err(Error::EmptyInput("cross-entropy over zero frames".into()));
    }
    let inv_f = 1.0 / f as f64;
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(&[f, NUM_CLASSES]);
    for (t, &c) in labels.iter().enumerate() {
        let z = logits.row(t);
        let lse = log_sum_exp(z);
        let w = weights.get(c);
        loss -= w * (z[c.id()] - lse);
        let g = grad.row_mut(t);
        for k in 0..NUM_CLASSES {
            g[k] = w * inv_f * (z[k] - lse).exp();
        }
        g[c.id()] -= w * inv_f;
    }
    Ok((loss * inv_f, grad))
}
