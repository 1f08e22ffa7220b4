use crate::error::{Error, Result};
use crate::numeric::Tensor;

pub const BLANK: usize = 0;

/// Non-empty target label ids, none of them blank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharSequence(Vec<usize>);

impl CharSequence {
    pub fn new(ids: Vec<usize>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::Input("character target is empty".into()));
        }
        if ids.contains(&BLANK) {
            return Err(Error::Input("character target contains the blank id".into()));
        }
        Ok(Self(ids))
    }

    /// `a..z` → 1..26, space → 27. Other characters are rejected.
    pub fn from_text(text: &str) -> Result<Self> {
        let ids = text
            .chars()
            .map(|ch| match ch.to_ascii_lowercase() {
                c @ 'a'..='z' => Ok(c as usize - 'a' as usize + 1),
                ' ' => Ok(27),
                other => Err(Error::Input(format!("character `{other}` outside the vocabulary"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(ids)
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Minimum frames any alignment needs: one per label plus a blank between repeats.
    pub fn min_frames(&self) -> usize {
        self.0.len() + self.0.windows(2).filter(|w| w[0] == w[1]).count()
    }
}

fn lse(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `−log p(target | x)` from per-frame log-probabilities, and its gradient
/// with respect to those log-probabilities.
pub fn ctc_loss(log_probs: &Tensor, target: &CharSequence) -> Result<(f64, Tensor)> {
    if log_probs.shape().len() != 2 {
        return Err(Error::dim("CTC expects a T×V matrix"));
    }
    let (t_len, v) = (log_probs.rows(), log_probs.cols());
    if let Some(&bad) = target.ids().iter().find(|&&i| i >= v) {
        return Err(Error::Input(format!("target id {bad} outside a {v}-symbol output")));
    }
    let required = target.min_frames();
    if t_len < required {
        return Err(Error::InfeasibleAlignment { frames: t_len, required });
    }
    let mut ext = vec![BLANK; 2 * target.len() + 1];
    for (i, &c) in target.ids().iter().enumerate() {
        ext[2 * i + 1] = c;
    }
    let s_len = ext.len();
    let skip = |s: usize| s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2];
    let lp = |t: usize, s: usize| log_probs.row(t)[ext[s]];
    let ninf = f64::NEG_INFINITY;

    let mut alpha = vec![ninf; t_len * s_len];
    alpha[0] = lp(0, 0);
    alpha[1] = lp(0, 1);
    for t in 1..t_len {
        for s in 0..s_len {
            let prev = &alpha[(t - 1) * s_len..t * s_len];
            let mut a = prev[s];
            if s >= 1 {
                a = lse(a, prev[s - 1]);
            }
            if skip(s) {
                a = lse(a, prev[s - 2]);
            }
            alpha[t * s_len + s] = if a == ninf { ninf } else { a + lp(t, s) };
        }
    }
    let last = (t_len - 1) * s_len;
    let log_p = lse(alpha[last + s_len - 1], alpha[last + s_len - 2]);
    if !log_p.is_finite() {
        return Err(Error::NonFinite("CTC target probability".into()));
    }

    let mut beta = vec![ninf; t_len * s_len];
    beta[last + s_len - 1] = lp(t_len - 1, s_len - 1);
    beta[last + s_len - 2] = lp(t_len - 1, s_len - 2);
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let next = &beta[(t + 1) * s_len..(t + 2) * s_len];
            let mut b = next[s];
            if s + 1 < s_len {
                b = lse(b, next[s + 1]);
            }
            if s + 2 < s_len && skip(s + 2) {
                b = lse(b, next[s + 2]);
            }
            beta[t * s_len + s] = if b == ninf { ninf } else { b + lp(t, s) };
        }
    }

    let mut grad = Tensor::zeros(&[t_len, v]);
    for t in 0..t_len {
        let mut occ = vec![ninf; v];
        for s in 0..s_len {
            let (a, b) = (alpha[t * s_len + s], beta[t * s_len + s]);
            if a > ninf && b > ninf {
                occ[ext[s]] = lse(occ[ext[s]], a + b - lp(t, s));
            }
        }
        for (g, o) in grad.row_mut(t).iter_mut().zip(occ) {
            if o > ninf {
                *g = -(o - log_p).exp();
            }
        }
    }
    Ok((-log_p, grad))
}
