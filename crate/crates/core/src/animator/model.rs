use serde::{Deserialize, Serialize};

use crate::animator::ctc::{ctc_loss, CharSequence};
use crate::animator::mesh::{TemplateMesh, VertexSequence};
use crate::diarization::{ConditioningSequence, EmotionIntensityTable};
use crate::error::{Error, Result};
use crate::numeric::moe::NUM_EXPERTS;
use crate::numeric::layers::LayerNormCache;
use crate::numeric::{
    log_softmax_rows, log_softmax_rows_backward, AttentionCache, AttentionLayer, Init, LayerNorm, Linear,
    MoeCache, MoeLayer, ParamStore, ResamplePlan, RngStream, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnimatorConfig {
    pub audio_dim: usize,
    pub dim: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub lip_dim: usize,
    pub lip_heads: usize,
    /// Characters excluding blank; the CTC head emits `vocab + 1` symbols.
    pub vocab: usize,
    pub fps: f64,
    pub audio_fps: f64,
    pub text_fps: f64,
}

impl Default for AnimatorConfig {
    fn default() -> Self {
        Self {
            audio_dim: 32,
            dim: 16,
            heads: 2,
            ff_dim: 32,
            lip_dim: 8,
            lip_heads: 2,
            vocab: 27,
            fps: 30.0,
            audio_fps: 50.0,
            text_fps: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub vertex: f64,
    pub velocity: f64,
    pub lip: f64,
    pub ctc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            vertex: 1000.0,
            velocity: 1000.0,
            lip: 0.001,
            ctc: 0.0001,
        }
    }
}

/// Unweighted terms plus the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub vertex: f64,
    pub velocity: f64,
    pub lip: f64,
    pub ctc: f64,
    pub total: f64,
}

pub struct CompositeLoss {
    pub breakdown: LossBreakdown,
    pub d_pred: Tensor,
    pub d_lip: Tensor,
    pub d_log_probs: Tensor,
}

fn mse(a: &Tensor, b: &Tensor, what: &str) -> Result<(f64, Tensor)> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!("{what}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    let n = a.len().max(1) as f64;
    let diff = a.sub(b);
    let loss = diff.data().iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, diff.scale(2.0 / n)))
}

/// Frame-difference velocity MSE over `T×C` matrices. Zero when `T < 2`.
fn velocity_mse(pred: &Tensor, truth: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != truth.shape() {
        return Err(Error::dim(format!("velocity: {:?} vs {:?}", pred.shape(), truth.shape())));
    }
    let (t_len, c) = (pred.rows(), pred.cols());
    let mut grad = Tensor::zeros(pred.shape());
    if t_len < 2 {
        return Ok((0.0, grad));
    }
    let n = ((t_len - 1) * c) as f64;
    let mut loss = 0.0;
    for t in 0..t_len - 1 {
        for k in 0..c {
            let r = (pred.row(t + 1)[k] - pred.row(t)[k]) - (truth.row(t + 1)[k] - truth.row(t)[k]);
            loss += r * r;
            let g = 2.0 * r / n;
            grad.row_mut(t + 1)[k] += g;
            grad.row_mut(t)[k] -= g;
        }
    }
    Ok((loss / n, grad))
}

/// `λ1·MSE(V̂, V) + λ2·MSE(ΔV̂, ΔV) + λ3·MSE(lip, text) + λ4·CTC`.
///
/// Vertex sequences are `T×3N`; gradients are returned per input.
pub fn composite_loss(
    pred: &Tensor,
    truth: &Tensor,
    lip_features: &Tensor,
    text_features: &Tensor,
    ctc_log_probs: &Tensor,
    ctc_target: &CharSequence,
    weights: &LossWeights,
) -> Result<CompositeLoss> {
    let w = weights;
    if [w.vertex, w.velocity, w.lip, w.ctc].iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Parameter("loss weights must be non-negative".into()));
    }
    let (vertex, dv) = mse(pred, truth, "vertex term")?;
    let (velocity, dvel) = velocity_mse(pred, truth)?;
    let (lip, dl) = mse(lip_features, text_features, "lip term")?;
    let (ctc, dc) = ctc_loss(ctc_log_probs, ctc_target)?;
    let total = w.vertex * vertex + w.velocity * velocity + w.lip * lip + w.ctc * ctc;
    let mut d_pred = dv.scale(w.vertex);
    d_pred.add_assign(&dvel.scale(w.velocity));
    Ok(CompositeLoss {
        breakdown: LossBreakdown { vertex, velocity, lip, ctc, total },
        d_pred,
        d_lip: dl.scale(w.lip),
        d_log_probs: dc.scale(w.ctc),
    })
}

/// Emotion-conditioned audio-to-mesh model over a fixed topology.
#[derive(Debug, Clone, PartialEq)]
pub struct Animator {
    pub config: AnimatorConfig,
    pub store: ParamStore,
    pub vertices: usize,
    pub lip_indices: Vec<usize>,
    pub proj: Linear,
    pub table: EmotionIntensityTable,
    pub ln_moe1: LayerNorm,
    pub moe1: MoeLayer,
    pub attn: AttentionLayer,
    pub ln_moe2: LayerNorm,
    pub moe2: MoeLayer,
    pub ln_out: LayerNorm,
    pub decoder: Linear,
    pub lip_proj: Linear,
    pub lip_attn: AttentionLayer,
    pub ctc_head: Linear,
}

#[derive(Debug, Clone)]
pub struct BackboneCache {
    ln1: LayerNormCache,
    n1: Tensor,
    moe1: MoeCache,
    attn: AttentionCache,
    ln2: LayerNormCache,
    n2: Tensor,
    moe2: MoeCache,
    ln_out: LayerNormCache,
}

#[derive(Debug, Clone)]
pub struct LipCache {
    disp: Tensor,
    attn: AttentionCache,
    plan: ResamplePlan,
}

/// Everything a training step needs to run the backward pass.
pub struct ForwardPass {
    pub conditioning: ConditioningSequence,
    pub hidden: Tensor,
    pub pred: Tensor,
    pub lip_features: Tensor,
    pub log_probs: Tensor,
    backbone: BackboneCache,
    lip: LipCache,
}

impl Animator {
    pub fn new(config: AnimatorConfig, template: &TemplateMesh, rng: &mut RngStream) -> Result<Self> {
        Self::with_topology(config, template.vertex_count(), template.lip_indices.clone(), rng)
    }

    /// As [`Animator::new`] from the vertex count and lip index set alone.
    pub fn with_topology(config: AnimatorConfig, vertices: usize, lip_indices: Vec<usize>, rng: &mut RngStream) -> Result<Self> {
        let c = config;
        if vertices == 0 || lip_indices.is_empty() || lip_indices.iter().any(|&i| i >= vertices) {
            return Err(Error::Topology(format!("lip indices must be a non-empty subset of 0..{vertices}")));
        }
        if c.dim < 2 || c.lip_dim < 2 || c.audio_dim == 0 {
            return Err(Error::Config("animator widths must be at least 2".into()));
        }
        if !(c.fps > 0.0 && c.audio_fps > 0.0 && c.text_fps > 0.0) {
            return Err(Error::Config("frame rates must be positive".into()));
        }
        let mut store = ParamStore::new();
        let s = &mut store;
        let n = vertices;
        let lips = lip_indices.len();
        let proj = Linear::new(s, "anim.proj", c.audio_dim, c.dim, false, rng);
        let table = EmotionIntensityTable::new(s, "anim.cond", c.dim, rng);
        let ln_moe1 = LayerNorm::new(s, "anim.moe1_ln", c.dim);
        let moe1 = MoeLayer::new(s, "anim.moe1", c.dim, NUM_EXPERTS, rng)?;
        let attn = AttentionLayer::new(s, "anim.attn", c.dim, c.heads, c.ff_dim, rng)?;
        let ln_moe2 = LayerNorm::new(s, "anim.moe2_ln", c.dim);
        let moe2 = MoeLayer::new(s, "anim.moe2", c.dim, NUM_EXPERTS, rng)?;
        let ln_out = LayerNorm::new(s, "anim.out_ln", c.dim);
        let decoder = Linear::with_init(s, "anim.decoder", c.dim, 3 * n, true, Init::Zeros, rng);
        let lip_proj = Linear::new(s, "anim.lip_proj", 3 * lips, c.lip_dim, true, rng);
        let lip_attn = AttentionLayer::new(s, "anim.lip_attn", c.lip_dim, c.lip_heads, 2 * c.lip_dim, rng)?;
        let ctc_head = Linear::new(s, "anim.ctc", c.lip_dim, c.vocab + 1, true, rng);
        Ok(Self {
            config,
            store,
            vertices: n,
            lip_indices,
            proj,
            table,
            ln_moe1,
            moe1,
            attn,
            ln_moe2,
            moe2,
            ln_out,
            decoder,
            lip_proj,
            lip_attn,
            ctc_head,
        })
    }

    pub fn check_template(&self, template: &TemplateMesh) -> Result<()> {
        if template.vertex_count() != self.vertices || template.lip_indices != self.lip_indices {
            return Err(Error::Topology(format!(
                "model built for {} vertices / {} lip vertices, template has {} / {}",
                self.vertices,
                self.lip_indices.len(),
                template.vertex_count(),
                template.lip_indices.len()
            )));
        }
        Ok(())
    }

    /// `H_cond = W_proj·H_audio + C`, frame by frame.
    pub fn condition_features(&self, audio: &Tensor, cond: &Tensor) -> Result<Tensor> {
        if audio.rows() != cond.rows() {
            return Err(Error::Alignment {
                what: "audio frames vs conditioning frames".into(),
                left: audio.rows() as f64,
                right: cond.rows() as f64,
            });
        }
        if cond.cols() != self.config.dim {
            return Err(Error::dim(format!("conditioning width {} != model width {}", cond.cols(), self.config.dim)));
        }
        Ok(self.proj.forward(&self.store, audio)?.add(cond))
    }

    pub fn backbone_forward(&self, h0: &Tensor) -> Result<(Tensor, BackboneCache)> {
        if h0.rows() == 0 {
            return Err(Error::EmptyInput("backbone over zero frames".into()));
        }
        let s = &self.store;
        let (n1, ln1) = self.ln_moe1.forward(s, h0)?;
        let (m1, moe1) = self.moe1.forward(s, &n1)?;
        let h1 = h0.add(&m1);
        let (h2, attn) = self.attn.forward(s, &h1)?;
        let (n2, ln2) = self.ln_moe2.forward(s, &h2)?;
        let (m2, moe2) = self.moe2.forward(s, &n2)?;
        let h3 = h2.add(&m2);
        let (out, ln_out) = self.ln_out.forward(s, &h3)?;
        Ok((out, BackboneCache { ln1, n1, moe1, attn, ln2, n2, moe2, ln_out }))
    }

    pub fn backbone_backward(&mut self, cache: &BackboneCache, dout: &Tensor) -> Tensor {
        let s = &mut self.store;
        let dh3 = self.ln_out.backward(s, &cache.ln_out, dout);
        let dn2 = self.moe2.backward(s, &cache.n2, &cache.moe2, &dh3);
        let mut dh2 = self.ln_moe2.backward(s, &cache.ln2, &dn2);
        dh2.add_assign(&dh3);
        let dh1 = self.attn.backward(s, &cache.attn, &dh2);
        let dn1 = self.moe1.backward(s, &cache.n1, &cache.moe1, &dh1);
        let mut dh0 = self.ln_moe1.backward(s, &cache.ln1, &dn1);
        dh0.add_assign(&dh1);
        dh0
    }

    /// `V_t = V_0 + decoder(hidden_t)` as a `T×3N` matrix.
    pub fn decode(&self, hidden: &Tensor, template: &TemplateMesh) -> Result<Tensor> {
        if template.vertex_count() != self.vertices {
            return Err(Error::Topology(format!(
                "decoder emits {} vertices, template has {}",
                self.vertices,
                template.vertex_count()
            )));
        }
        let mut v = self.decoder.forward(&self.store, hidden)?;
        let base = template.flat();
        for t in 0..v.rows() {
            for (o, b) in v.row_mut(t).iter_mut().zip(base) {
                *o = b + *o;
            }
        }
        Ok(v)
    }

    /// Lip displacements → projection → attention → resampled to the text rate.
    pub fn lip_forward(&self, vertices: &Tensor, template: &TemplateMesh) -> Result<(Tensor, LipCache)> {
        let t_len = vertices.rows();
        if vertices.cols() != 3 * self.vertices {
            return Err(Error::Topology(format!("expected rows of width {}, got {}", 3 * self.vertices, vertices.cols())));
        }
        let base = template.flat();
        let l = self.lip_indices.len();
        let mut disp = Tensor::zeros(&[t_len, 3 * l]);
        for t in 0..t_len {
            let src = vertices.row(t);
            let dst = disp.row_mut(t);
            for (j, &n) in self.lip_indices.iter().enumerate() {
                for k in 0..3 {
                    dst[3 * j + k] = src[3 * n + k] - base[3 * n + k];
                }
            }
        }
        let projected = self.lip_proj.forward(&self.store, &disp)?;
        let (attended, attn) = self.lip_attn.forward(&self.store, &projected)?;
        let plan = ResamplePlan::new(t_len, self.config.fps, self.config.text_fps)?;
        let out = plan.apply(&attended)?;
        Ok((out, LipCache { disp, attn, plan }))
    }

    /// Returns the gradient with respect to the `T×3N` input vertices.
    pub fn lip_backward(&mut self, cache: &LipCache, dout: &Tensor) -> Tensor {
        let s = &mut self.store;
        let d_att = cache.plan.backward(dout);
        let d_proj = self.lip_attn.backward(s, &cache.attn, &d_att);
        let d_disp = self.lip_proj.backward(s, &cache.disp, &d_proj);
        let mut dv = Tensor::zeros(&[d_disp.rows(), 3 * self.vertices]);
        for t in 0..d_disp.rows() {
            let src = d_disp.row(t);
            let dst = dv.row_mut(t);
            for (j, &n) in self.lip_indices.iter().enumerate() {
                for k in 0..3 {
                    dst[3 * n + k] += src[3 * j + k];
                }
            }
        }
        dv
    }

    pub fn ctc_log_probs(&self, lip_features: &Tensor) -> Result<Tensor> {
        Ok(log_softmax_rows(&self.ctc_head.forward(&self.store, lip_features)?))
    }

    /// Inference from 30 fps audio features and a conditioning matrix.
    pub fn animate_conditioned(&self, audio: &Tensor, cond: &Tensor, template: &TemplateMesh) -> Result<VertexSequence> {
        self.check_template(template)?;
        let h0 = self.condition_features(audio, cond)?;
        let (hidden, _) = self.backbone_forward(&h0)?;
        VertexSequence::from_flat(self.config.fps, self.decode(&hidden, template)?)
    }

    /// Full training forward pass from 30 fps audio features.
    pub fn forward_train(
        &self,
        audio: &Tensor,
        conditioning: ConditioningSequence,
        template: &TemplateMesh,
    ) -> Result<ForwardPass> {
        let h0 = self.condition_features(audio, &conditioning.vectors)?;
        let (hidden, backbone) = self.backbone_forward(&h0)?;
        let pred = self.decode(&hidden, template)?;
        let (lip_features, lip) = self.lip_forward(&pred, template)?;
        let log_probs = self.ctc_log_probs(&lip_features)?;
        Ok(ForwardPass { conditioning, hidden, pred, lip_features, log_probs, backbone, lip })
    }

    /// Backpropagates a composite loss through a forward pass, accumulating
    /// gradients for every parameter.
    pub fn backward_train(&mut self, audio: &Tensor, pass: &ForwardPass, loss: &CompositeLoss) {
        let dz = log_softmax_rows_backward(&pass.log_probs, &loss.d_log_probs);
        let mut d_lip = self.ctc_head.backward(&mut self.store, &pass.lip_features, &dz);
        d_lip.add_assign(&loss.d_lip);
        let mut d_pred = self.lip_backward(&pass.lip, &d_lip);
        d_pred.add_assign(&loss.d_pred);
        let d_hidden = self.decoder.backward(&mut self.store, &pass.hidden, &d_pred);
        let dh0 = self.backbone_backward(&pass.backbone, &d_hidden);
        self.proj.backward(&mut self.store, audio, &dh0);
        pass.conditioning.backward(&self.table, &mut self.store, &dh0);
    }
}
