//! Dense layers and elementwise activations with hand-written backward passes.
//!
//! Every forward function here is paired with a backward that takes the
//! upstream gradient and returns the gradient with respect to the input,
//! accumulating parameter gradients into the [`ParamStore`] as a side effect.

use crate::error::{Error, Result};
use crate::numeric::params::{Init, ParamId, ParamStore};
use crate::numeric::rng::RngStream;
use crate::numeric::tensor::Tensor;

/// Affine map `y[t] = W x[t] + b` applied row-wise, with `W: out×in`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    /// Fan-in uniform weights, zero bias.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        rng: &mut RngStream,
    ) -> Self {
        Self::with_init(store, name, in_dim, out_dim, bias, Init::FanIn(in_dim), rng)
    }

    pub fn zeroed(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize) -> Self {
        let mut rng = RngStream::new(0);
        Self::with_init(store, name, in_dim, out_dim, true, Init::Zeros, &mut rng)
    }

    pub fn with_init(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        init: Init,
        rng: &mut RngStream,
    ) -> Self {
        let weight = store.add_init(format!("{name}.weight"), &[out_dim, in_dim], init, rng);
        let bias = bias.then(|| store.add_init(format!("{name}.bias"), &[out_dim], Init::Zeros, rng));
        Self {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        linear(x, store.value(self.weight), self.bias.map(|b| store.value(b)))
    }

    /// Accumulates `dW`, `db` and returns `dx`.
    pub fn backward(&self, store: &mut ParamStore, x: &Tensor, dout: &Tensor) -> Tensor {
        let (din, dout_dim) = (self.in_dim, self.out_dim);
        let rows = x.rows();
        let dx = {
            let w = store.value(self.weight).data();
            let mut dx = vec![0.0; rows * din];
            for t in 0..rows {
                let g = dout.row(t);
                let dxr = &mut dx[t * din..(t + 1) * din];
                for (o, &go) in g.iter().enumerate() {
                    if go == 0.0 {
                        continue;
                    }
                    let wr = &w[o * din..(o + 1) * din];
                    for (d, &wv) in dxr.iter_mut().zip(wr) {
                        *d += go * wv;
                    }
                }
            }
            dx
        };
        {
            let gw = store.grad_mut(self.weight).data_mut();
            for t in 0..rows {
                let g = dout.row(t);
                let xr = x.row(t);
                for o in 0..dout_dim {
                    let go = g[o];
                    if go == 0.0 {
                        continue;
                    }
                    let gr = &mut gw[o * din..(o + 1) * din];
                    for (a, &xv) in gr.iter_mut().zip(xr) {
                        *a += go * xv;
                    }
                }
            }
        }
        if let Some(b) = self.bias {
            let gb = store.grad_mut(b).data_mut();
            for t in 0..rows {
                for (a, &g) in gb.iter_mut().zip(dout.row(t)) {
                    *a += g;
                }
            }
        }
        Tensor::from_parts(vec![rows, din], dx)
    }
}

/// `out[t] = W·x[t] + b` for `x: T×Din`, `W: Dout×Din`, `b: Dout`.
pub fn linear(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    if w.shape().len() != 2 {
        return Err(Error::dim("weight must be a matrix"));
    }
    let (dout, din) = (w.shape()[0], w.shape()[1]);
    if x.cols() != din {
        return Err(Error::dim(format!(
            "linear expects input width {din}, got {}",
            x.cols()
        )));
    }
    if let Some(b) = b {
        if b.len() != dout {
            return Err(Error::dim(format!(
                "bias length {} does not match output width {dout}",
                b.len()
            )));
        }
    }
    let rows = x.rows();
    let wd = w.data();
    let mut out = vec![0.0; rows * dout];
    for t in 0..rows {
        let xr = x.row(t);
        let orow = &mut out[t * dout..(t + 1) * dout];
        for (o, slot) in orow.iter_mut().enumerate() {
            let wr = &wd[o * din..(o + 1) * din];
            let mut acc = b.map_or(0.0, |b| b.data()[o]);
            for (a, c) in wr.iter().zip(xr) {
                acc += a * c;
            }
            *slot = acc;
        }
    }
    Ok(Tensor::from_parts(vec![rows, dout], out))
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Gradient of ReLU given its input; the kink at zero passes no gradient.
pub fn relu_backward(x: &Tensor, dout: &Tensor) -> Tensor {
    let data = x
        .data()
        .iter()
        .zip(dout.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_parts(x.shape().to_vec(), data)
}

pub fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

/// Gradient of the logistic function given its output `y`.
pub fn sigmoid_backward(y: &Tensor, dout: &Tensor) -> Tensor {
    let data = y
        .data()
        .iter()
        .zip(dout.data())
        .map(|(&s, &g)| g * s * (1.0 - s))
        .collect();
    Tensor::from_parts(y.shape().to_vec(), data)
}

fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        z += *v;
    }
    for v in row.iter_mut() {
        *v /= z;
    }
}

pub fn softmax_slice(row: &[f64]) -> Vec<f64> {
    let mut out = row.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_rows(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    let c = out.cols();
    if c > 0 {
        out.data_mut().chunks_mut(c).for_each(softmax_in_place);
    }
    out
}

/// Backward of row softmax given its output `y`.
pub fn softmax_rows_backward(y: &Tensor, dout: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros_like(y);
    for t in 0..y.rows() {
        let (yr, gr) = (y.row(t), dout.row(t));
        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
        for ((d, &yv), &g) in dx.row_mut(t).iter_mut().zip(yr).zip(gr) {
            *d = yv * (g - dot);
        }
    }
    dx
}

pub fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn log_softmax_rows(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for t in 0..out.rows() {
        let row = out.row_mut(t);
        let lse = log_sum_exp(row);
        row.iter_mut().for_each(|v| *v -= lse);
    }
    out
}

/// Backward of row log-softmax given its output `y` (log-probabilities).
pub fn log_softmax_rows_backward(y: &Tensor, dout: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros_like(y);
    for t in 0..y.rows() {
        let (yr, gr) = (y.row(t), dout.row(t));
        let gsum: f64 = gr.iter().sum();
        for ((d, &lp), &g) in dx.row_mut(t).iter_mut().zip(yr).zip(gr) {
            *d = g - lp.exp() * gsum;
        }
    }
    dx
}

/// Per-row normalization with learned gain and bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
    pub dim: usize,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    normalized: Tensor,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub const EPS: f64 = 1e-5;

    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        let gain = store.add(format!("{name}.gain"), Tensor::full(&[dim], 1.0));
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[dim]));
        Self {
            gain,
            bias,
            dim,
            eps: Self::EPS,
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<(Tensor, LayerNormCache)> {
        layer_norm(x, store.value(self.gain), store.value(self.bias), self.eps)
    }

    pub fn backward(
        &self,
        store: &mut ParamStore,
        cache: &LayerNormCache,
        dout: &Tensor,
    ) -> Tensor {
        let n = self.dim;
        let rows = dout.rows();
        let gain = store.value(self.gain).data().to_vec();
        {
            let gg = store.grad_mut(self.gain).data_mut();
            for t in 0..rows {
                for ((a, &g), &xh) in gg.iter_mut().zip(dout.row(t)).zip(cache.normalized.row(t)) {
                    *a += g * xh;
                }
            }
        }
        {
            let gb = store.grad_mut(self.bias).data_mut();
            for t in 0..rows {
                for (a, &g) in gb.iter_mut().zip(dout.row(t)) {
                    *a += g;
                }
            }
        }
        let mut dx = Tensor::zeros(&[rows, n]);
        for t in 0..rows {
            let xh = cache.normalized.row(t);
            let dxh: Vec<f64> = dout.row(t).iter().zip(&gain).map(|(g, w)| g * w).collect();
            let mean_dxh = dxh.iter().sum::<f64>() / n as f64;
            let mean_dxh_xh = dxh.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / n as f64;
            let inv = cache.inv_std[t];
            for (i, d) in dx.row_mut(t).iter_mut().enumerate() {
                *d = inv * (dxh[i] - mean_dxh - xh[i] * mean_dxh_xh);
            }
        }
        dx
    }
}

pub fn layer_norm(
    x: &Tensor,
    gain: &Tensor,
    bias: &Tensor,
    eps: f64,
) -> Result<(Tensor, LayerNormCache)> {
    let n = x.cols();
    if n < 2 {
        return Err(Error::Parameter(format!(
            "layer norm needs rows of length >= 2, got {n}"
        )));
    }
    if gain.len() != n || bias.len() != n {
        return Err(Error::dim(format!(
            "layer norm of width {n} with gain {} / bias {}",
            gain.len(),
            bias.len()
        )));
    }
    let rows = x.rows();
    let mut normalized = Tensor::zeros(&[rows, n]);
    let mut out = Tensor::zeros(&[rows, n]);
    let mut inv_std = Vec::with_capacity(rows);
    for t in 0..rows {
        let xr = x.row(t);
        let mean = xr.iter().sum::<f64>() / n as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let inv = 1.0 / (var + eps).sqrt();
        inv_std.push(inv);
        for (&v, h) in xr.iter().zip(normalized.row_mut(t)) {
            *h = (v - mean) * inv;
        }
        let orow = out.row_mut(t);
        for (i, &h) in normalized.row(t).iter().enumerate() {
            orow[i] = h * gain.data()[i] + bias.data()[i];
        }
    }
    Ok((out, LayerNormCache { normalized, inv_std }))
}

/// Inverted dropout. In eval mode (or with `p == 0`) returns the input and no mask.
pub fn dropout(
    x: &Tensor,
    p: f64,
    train: bool,
    rng: &mut RngStream,
) -> Result<(Tensor, Option<Tensor>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Parameter(format!("dropout rate {p} outside [0, 1)")));
    }
    if !train || p == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = 1.0 / (1.0 - p);
    let mask_data: Vec<f64> = (0..x.len())
        .map(|_| if rng.next_f64() < p { 0.0 } else { keep })
        .collect();
    let mask = Tensor::from_parts(x.shape().to_vec(), mask_data);
    let out = Tensor::from_parts(
        x.shape().to_vec(),
        x.data().iter().zip(mask.data()).map(|(a, m)| a * m).collect(),
    );
    Ok((out, Some(mask)))
}

pub fn dropout_backward(mask: Option<&Tensor>, dout: &Tensor) -> Tensor {
    match mask {
        None => dout.clone(),
        Some(m) => Tensor::from_parts(
            dout.shape().to_vec(),
            dout.data().iter().zip(m.data()).map(|(g, k)| g * k).collect(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_constant_linear() {
        let x = Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap();
        let eye = Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let y = linear(&x, &eye, Some(&Tensor::zeros(&[2]))).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0]);

        let w = Tensor::zeros(&[1, 2]);
        let b = Tensor::new(vec![1], vec![3.0]).unwrap();
        let y = linear(&x, &w, Some(&b)).unwrap();
        assert_eq!(y.data(), &[3.0]);
    }

    #[test]
    fn linear_rejects_bad_inner_dim() {
        let x = Tensor::zeros(&[2, 3]);
        let w = Tensor::zeros(&[4, 2]);
        assert!(matches!(linear(&x, &w, None), Err(Error::Dimension(_))));
    }

    #[test]
    fn uniform_logits_give_uniform_softmax() {
        let y = softmax_rows(&Tensor::zeros(&[1, 7]));
        for &v in y.data() {
            assert!((v - 1.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let x = Tensor::matrix(1, 3, vec![1e300, 0.0, -1e300]).unwrap();
        let y = softmax_rows(&x);
        assert_eq!(y.data(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn dropout_eval_is_identity_and_rate_checked() {
        let x = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut rng = RngStream::new(1);
        let (y, mask) = dropout(&x, 0.3, false, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(mask.is_none());
        assert!(matches!(dropout(&x, 1.0, true, &mut rng), Err(Error::Parameter(_))));
    }

    #[test]
    fn dropout_train_rate_and_rescale() {
        let x = Tensor::full(&[100, 100], 1.0);
        let mut rng = RngStream::new(9);
        let (y, _) = dropout(&x, 0.3, true, &mut rng).unwrap();
        let zeros = y.data().iter().filter(|&&v| v == 0.0).count() as f64 / 1e4;
        assert!((zeros - 0.3).abs() < 0.02, "dropped fraction {zeros}");
        let keep = 1.0 / 0.7;
        assert!(y.data().iter().all(|&v| v == 0.0 || (v - keep).abs() < 1e-15));
    }

    #[test]
    fn layer_norm_needs_two_columns() {
        let x = Tensor::zeros(&[3, 1]);
        let g = Tensor::full(&[1], 1.0);
        let b = Tensor::zeros(&[1]);
        assert!(layer_norm(&x, &g, &b, 1e-5).is_err());
    }
}
