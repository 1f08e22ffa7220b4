//! Pre-norm causal transformer block.
//!
//! `x1 = x + Wo·MHA(LN1(x))`, `out = x1 + W2·relu(W1·LN2(x1))`. Row `t` of the
//! attention only ever reads rows `0..=t`, so earlier outputs are bit-identical
//! under perturbation of later inputs.

use crate::error::{Error, Result};
use crate::numeric::layers::{relu, relu_backward, LayerNorm, LayerNormCache, Linear};
use crate::numeric::params::ParamStore;
use crate::numeric::rng::RngStream;
use crate::numeric::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionLayer {
    pub dim: usize,
    pub heads: usize,
    pub ln1: LayerNorm,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub ln2: LayerNorm,
    pub ff_in: Linear,
    pub ff_out: Linear,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    ln1: LayerNormCache,
    normed1: Tensor,
    q: Tensor,
    k: Tensor,
    v: Tensor,
    /// Per head, row-major `T×T` causal weights (upper triangle is zero).
    weights: Vec<Tensor>,
    context: Tensor,
    ln2: LayerNormCache,
    normed2: Tensor,
    ff_pre: Tensor,
    ff_act: Tensor,
}

impl AttentionCache {
    pub fn weights(&self, head: usize) -> &Tensor {
        &self.weights[head]
    }
}

impl AttentionLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        heads: usize,
        ff_dim: usize,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if heads == 0 || dim % heads != 0 {
            return Err(Error::Config(format!(
                "attention width {dim} is not divisible by {heads} heads"
            )));
        }
        Ok(Self {
            dim,
            heads,
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), dim),
            query: Linear::new(store, &format!("{name}.query"), dim, dim, true, rng),
            key: Linear::new(store, &format!("{name}.key"), dim, dim, true, rng),
            value: Linear::new(store, &format!("{name}.value"), dim, dim, true, rng),
            output: Linear::new(store, &format!("{name}.output"), dim, dim, true, rng),
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), dim),
            ff_in: Linear::new(store, &format!("{name}.ff_in"), dim, ff_dim, true, rng),
            ff_out: Linear::new(store, &format!("{name}.ff_out"), ff_dim, dim, true, rng),
        })
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<(Tensor, AttentionCache)> {
        let t_len = x.rows();
        if t_len == 0 {
            return Err(Error::EmptyInput("attention over zero frames".into()));
        }
        if x.cols() != self.dim {
            return Err(Error::dim(format!(
                "attention expects width {}, got {}",
                self.dim,
                x.cols()
            )));
        }
        let (normed1, ln1) = self.ln1.forward(store, x)?;
        let q = self.query.forward(store, &normed1)?;
        let k = self.key.forward(store, &normed1)?;
        let v = self.value.forward(store, &normed1)?;

        let dh = self.dim / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut context = Tensor::zeros(&[t_len, self.dim]);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let cols = h * dh..(h + 1) * dh;
            let mut w = Tensor::zeros(&[t_len, t_len]);
            for i in 0..t_len {
                let qi = &q.row(i)[cols.clone()];
                let scores: Vec<f64> = (0..=i)
                    .map(|j| dot(qi, &k.row(j)[cols.clone()]) * scale)
                    .collect();
                let probs = crate::numeric::layers::softmax_slice(&scores);
                let wrow = w.row_mut(i);
                wrow[..=i].copy_from_slice(&probs);
                let crow = &mut context.row_mut(i)[cols.clone()];
                for (j, &a) in probs.iter().enumerate() {
                    for (c, &vv) in crow.iter_mut().zip(&v.row(j)[cols.clone()]) {
                        *c += a * vv;
                    }
                }
            }
            weights.push(w);
        }
        let attn_out = self.output.forward(store, &context)?;
        let x1 = x.add(&attn_out);

        let (normed2, ln2) = self.ln2.forward(store, &x1)?;
        let ff_pre = self.ff_in.forward(store, &normed2)?;
        let ff_act = relu(&ff_pre);
        let ff_out = self.ff_out.forward(store, &ff_act)?;
        let out = x1.add(&ff_out);

        Ok((
            out,
            AttentionCache {
                ln1,
                normed1,
                q,
                k,
                v,
                weights,
                context,
                ln2,
                normed2,
                ff_pre,
                ff_act,
            },
        ))
    }

    pub fn backward(
        &self,
        store: &mut ParamStore,
        cache: &AttentionCache,
        dout: &Tensor,
    ) -> Tensor {
        let t_len = dout.rows();
        // Feed-forward branch.
        let d_ff_act = self.ff_out.backward(store, &cache.ff_act, dout);
        let d_ff_pre = relu_backward(&cache.ff_pre, &d_ff_act);
        let d_normed2 = self.ff_in.backward(store, &cache.normed2, &d_ff_pre);
        let mut dx1 = self.ln2.backward(store, &cache.ln2, &d_normed2);
        dx1.add_assign(dout);

        // Attention branch.
        let d_context = self.output.backward(store, &cache.context, &dx1);
        let dh = self.dim / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut dq = Tensor::zeros(&[t_len, self.dim]);
        let mut dk = Tensor::zeros(&[t_len, self.dim]);
        let mut dv = Tensor::zeros(&[t_len, self.dim]);
        for h in 0..self.heads {
            let cols = h * dh..(h + 1) * dh;
            let w = &cache.weights[h];
            for i in 0..t_len {
                let dci = &d_context.row(i)[cols.clone()];
                let wi = &w.row(i)[..=i];
                let da: Vec<f64> = (0..=i)
                    .map(|j| dot(dci, &cache.v.row(j)[cols.clone()]))
                    .collect();
                let mix: f64 = wi.iter().zip(&da).map(|(a, b)| a * b).sum();
                for j in 0..=i {
                    let a = wi[j];
                    for (d, &g) in dv.row_mut(j)[cols.clone()].iter_mut().zip(dci) {
                        *d += a * g;
                    }
                    let ds = a * (da[j] - mix) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    for (d, &kv) in dq.row_mut(i)[cols.clone()]
                        .iter_mut()
                        .zip(&cache.k.row(j)[cols.clone()])
                    {
                        *d += ds * kv;
                    }
                    for (d, &qv) in dk.row_mut(j)[cols.clone()]
                        .iter_mut()
                        .zip(&cache.q.row(i)[cols.clone()])
                    {
                        *d += ds * qv;
                    }
                }
            }
        }
        let mut d_normed1 = self.query.backward(store, &cache.normed1, &dq);
        d_normed1.add_assign(&self.key.backward(store, &cache.normed1, &dk));
        d_normed1.add_assign(&self.value.backward(store, &cache.normed1, &dv));
        let mut dx = self.ln1.backward(store, &cache.ln1, &d_normed1);
        dx.add_assign(&dx1);
        dx
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(store: &mut ParamStore, dim: usize, heads: usize) -> AttentionLayer {
        let mut rng = RngStream::new(3);
        AttentionLayer::new(store, "attn", dim, heads, 2 * dim, &mut rng).unwrap()
    }

    #[test]
    fn single_frame_attends_to_itself() {
        let mut store = ParamStore::new();
        let attn = layer(&mut store, 8, 2);
        let x = Tensor::matrix(1, 8, (0..8).map(|v| v as f64 * 0.1).collect()).unwrap();
        let (_, cache) = attn.forward(&store, &x).unwrap();
        for h in 0..2 {
            assert_eq!(cache.weights(h).data(), &[1.0]);
        }
    }

    #[test]
    fn zero_params_reduce_to_residual() {
        let mut store = ParamStore::new();
        let attn = layer(&mut store, 8, 2);
        store.iter_mut().for_each(|p| p.value.fill(0.0));
        let mut rng = RngStream::new(11);
        let x = Tensor::matrix(5, 8, (0..40).map(|_| rng.normal()).collect()).unwrap();
        let (y, _) = attn.forward(&store, &x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn empty_and_indivisible_inputs_error() {
        let mut store = ParamStore::new();
        let attn = layer(&mut store, 8, 2);
        assert!(matches!(
            attn.forward(&store, &Tensor::zeros(&[0, 8])),
            Err(Error::EmptyInput(_))
        ));
        let mut rng = RngStream::new(0);
        assert!(AttentionLayer::new(&mut store, "bad", 6, 4, 8, &mut rng).is_err());
    }

    #[test]
    fn weights_are_causal_rows_summing_to_one() {
        let mut store = ParamStore::new();
        let attn = layer(&mut store, 8, 2);
        let mut rng = RngStream::new(5);
        let x = Tensor::matrix(6, 8, (0..48).map(|_| rng.normal()).collect()).unwrap();
        let (_, cache) = attn.forward(&store, &x).unwrap();
        let w = cache.weights(1);
        for i in 0..6 {
            let row = w.row(i);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row[i + 1..].iter().all(|&v| v == 0.0));
        }
    }
}
