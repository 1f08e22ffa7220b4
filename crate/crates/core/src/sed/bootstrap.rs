use crate::error::{Error, Result};
use crate::numeric::RngStream;

/// Percentile bootstrap interval of `score_fn(pred, truth)` over frame resamples.
///
/// Quantiles use linear interpolation between order statistics.
pub fn bootstrap_ci<F>(
    score_fn: F,
    pred: &[usize],
    truth: &[usize],
    n: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64)>
where
    F: Fn(&[usize], &[usize]) -> f64,
{
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 resamples, got {n}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Parameter(format!("confidence level {level} outside (0, 1)")));
    }
    if pred.len() != truth.len() {
        return Err(Error::dim(format!("{} predictions for {} truth labels", pred.len(), truth.len())));
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput("bootstrap over zero frames".into()));
    }
    let len = truth.len();
    let mut rng = RngStream::new(seed);
    let mut ps = vec![0usize; len];
    let mut ts = vec![0usize; len];
    let mut scores = Vec::with_capacity(n);
    for _ in 0..n {
        for (p, t) in ps.iter_mut().zip(ts.iter_mut()) {
            let i = rng.below(len);
            *p = pred[i];
            *t = truth[i];
        }
        scores.push(score_fn(&ps, &ts));
    }
    scores.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile(&scores, alpha), quantile(&scores, 1.0 - alpha)))
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}
