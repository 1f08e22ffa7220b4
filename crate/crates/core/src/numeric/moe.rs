//! Two-expert mixture with a per-frame softmax router.
//!
//! Top-2 routing over two experts keeps both, so the gates are the full
//! router softmax and every frame blends both expert outputs.

use crate::error::{Error, Result};
use crate::numeric::layers::{softmax_rows, softmax_rows_backward, Linear};
use crate::numeric::params::ParamStore;
use crate::numeric::rng::RngStream;
use crate::numeric::scan::{ScanBlock, ScanBlockCache};
use crate::numeric::tensor::Tensor;

pub const NUM_EXPERTS: usize = 2;
pub const TOP_K: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct MoeLayer {
    pub dim: usize,
    pub router: Linear,
    pub experts: Vec<ScanBlock>,
}

#[derive(Debug, Clone)]
pub struct MoeCache {
    gates: Tensor,
    expert_out: Vec<Tensor>,
    expert_cache: Vec<ScanBlockCache>,
}

impl MoeCache {
    /// Router probabilities, `T×2`.
    pub fn gates(&self) -> &Tensor {
        &self.gates
    }
}

impl MoeLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        num_experts: usize,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if num_experts != NUM_EXPERTS {
            return Err(Error::Config(format!(
                "mixture layer needs exactly {NUM_EXPERTS} experts, got {num_experts}"
            )));
        }
        let router = Linear::new(store, &format!("{name}.router"), dim, num_experts, true, rng);
        let experts = (0..num_experts)
            .map(|e| ScanBlock::new(store, &format!("{name}.expert{e}"), dim, rng))
            .collect();
        Ok(Self {
            dim,
            router,
            experts,
        })
    }

    pub fn forward(&self, store: &ParamStore, u: &Tensor) -> Result<(Tensor, MoeCache)> {
        if self.experts.len() != NUM_EXPERTS {
            return Err(Error::Config(format!(
                "mixture layer has {} experts",
                self.experts.len()
            )));
        }
        let gates = softmax_rows(&self.router.forward(store, u)?);
        let mut expert_out = Vec::with_capacity(NUM_EXPERTS);
        let mut expert_cache = Vec::with_capacity(NUM_EXPERTS);
        for expert in &self.experts {
            let (o, c) = expert.forward(store, u)?;
            expert_out.push(o);
            expert_cache.push(c);
        }
        let mut out = Tensor::zeros(&[u.rows(), self.dim]);
        for t in 0..u.rows() {
            let g = gates.row(t).to_vec();
            let orow = out.row_mut(t);
            for (e, eo) in expert_out.iter().enumerate() {
                for (o, &v) in orow.iter_mut().zip(eo.row(t)) {
                    *o += g[e] * v;
                }
            }
        }
        Ok((
            out,
            MoeCache {
                gates,
                expert_out,
                expert_cache,
            },
        ))
    }

    pub fn backward(
        &self,
        store: &mut ParamStore,
        u: &Tensor,
        cache: &MoeCache,
        dout: &Tensor,
    ) -> Tensor {
        let t_len = u.rows();
        let mut dgates = Tensor::zeros(&[t_len, NUM_EXPERTS]);
        for t in 0..t_len {
            for e in 0..NUM_EXPERTS {
                dgates.row_mut(t)[e] = dout
                    .row(t)
                    .iter()
                    .zip(cache.expert_out[e].row(t))
                    .map(|(a, b)| a * b)
                    .sum();
            }
        }
        let dlogits = softmax_rows_backward(&cache.gates, &dgates);
        let mut du = self.router.backward(store, u, &dlogits);
        for (e, expert) in self.experts.iter().enumerate() {
            let mut dexp = dout.clone();
            for t in 0..t_len {
                let g = cache.gates.row(t)[e];
                dexp.row_mut(t).iter_mut().for_each(|v| *v *= g);
            }
            du.add_assign(&expert.backward(store, u, &cache.expert_cache[e], &dexp));
        }
        du
    }
}
