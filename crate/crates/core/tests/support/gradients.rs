//! Finite-difference checks. Each returns the worst relative error found.

use sedtalker_core::corpus::{ClassWeights, EmotionClass};
use sedtalker_core::numeric::{
    dropout, dropout_backward, finite_diff_check, log_softmax_rows, log_softmax_rows_backward, selective_scan_backward,
    selective_scan_with_state, softmax_rows, softmax_rows_backward, AttentionLayer, GradCheckConfig, LayerNorm, Linear,
    MoeLayer, ParamStore, ResamplePlan, RngStream, ScanBlock, Tensor,
};
use sedtalker_core::sed::{weighted_frame_ce, SedHead, SedHeadConfig};

use super::{rand_tensor, random_matrix};

/// `Σ r ⊙ y`, whose gradient w.r.t. `y` is `r`.
fn probe(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn check(store: &mut ParamStore, f: impl FnMut(&mut ParamStore) -> sedtalker_core::Result<f64>) -> f64 {
    let report = finite_diff_check(store, f, GradCheckConfig { coords_per_param: 24, ..Default::default() }).unwrap();
    report.max_rel_err
}

pub fn linear() -> f64 {
    let mut rng = RngStream::new(1);
    let mut store = ParamStore::new();
    let layer = Linear::new(&mut store, "lin", 3, 4, true, &mut rng);
    store.value_mut(layer.bias.unwrap()).data_mut().iter_mut().for_each(|b| *b = 0.3);
    let x = store.add("x", rand_tensor(&mut rng, &[5, 3]));
    let r = rand_tensor(&mut rng, &[5, 4]);
    check(&mut store, |s| {
        let xv = s.value(x).clone();
        let y = layer.forward(s, &xv)?;
        let dx = layer.backward(s, &xv, &r);
        s.grad_mut(x).add_assign(&dx);
        Ok(probe(&y, &r))
    })
}

/// The layer with random gain and bias, and its input id.
pub fn layer_norm_fixture() -> (ParamStore, LayerNorm, sedtalker_core::numeric::ParamId, Tensor) {
    let mut rng = RngStream::new(2);
    let mut store = ParamStore::new();
    let ln = LayerNorm::new(&mut store, "ln", 5);
    for id in [ln.gain, ln.bias] {
        let v = rand_tensor(&mut rng, &[5]);
        *store.value_mut(id) = v;
    }
    let x = store.add("x", rand_tensor(&mut rng, &[3, 5]));
    let r = rand_tensor(&mut rng, &[3, 5]);
    (store, ln, x, r)
}

pub fn layer_norm() -> f64 {
    let (mut store, ln, x, r) = layer_norm_fixture();
    check(&mut store, |s| {
        let xv = s.value(x).clone();
        let (y, cache) = ln.forward(s, &xv)?;
        let dx = ln.backward(s, &cache, &r);
        s.grad_mut(x).add_assign(&dx);
        Ok(probe(&y, &r))
    })
}

pub fn softmax() -> f64 {
    let mut rng = RngStream::new(3);
    let mut store = ParamStore::new();
    let x = store.add("x", rand_tensor(&mut rng, &[4, 7]));
    let r = rand_tensor(&mut rng, &[4, 7]);
    check(&mut store, |s| {
        let y = softmax_rows(s.value(x));
        let dx = softmax_rows_backward(&y, &r);
        s.grad_mut(x).add_assign(&dx);
        Ok(probe(&y, &r))
    })
}

pub fn log_softmax() -> f64 {
    let mut rng = RngStream::new(3);
    let mut store = ParamStore::new();
    let x = store.add("x", rand_tensor(&mut rng, &[4, 7]));
    let r = rand_tensor(&mut rng, &[4, 7]);
    check(&mut store, |s| {
        let y = log_softmax_rows(s.value(x));
        let dx = log_softmax_rows_backward(&y, &r);
        s.grad_mut(x).add_assign(&dx);
        Ok(probe(&y, &r))
    })
}

pub fn dropout_frozen_mask() -> f64 {
    let mut rng = RngStream::new(4);
    let mut store = ParamStore::new();
    let x = store.add("x", rand_tensor(&mut rng, &[6, 5]));
    let r = rand_tensor(&mut rng, &[6, 5]);
    check(&mut store, |s| {
        // Re-seeding inside the closure freezes the mask across evaluations.
        let mut mask_rng = RngStream::new(99);
        let (y, mask) = dropout(s.value(x), 0.3, true, &mut mask_rng)?;
        let dx = dropout_backward(mask.as_ref(), &r);
        s.grad_mut(x).add_assign(&dx);
        Ok(probe(&y, &r))
    })
}

pub fn attention() -> f64 {
    let mut rng = RngStream::new(5);
    let mut store = ParamStore::new();
    let attn = AttentionLayer::new(&mut store, "attn", 8, 2, 16, &mut rng).unwrap();
    // Non-trivial biases and norm parameters so every path carries gradient.
    let ids: Vec<_> = store.iter().map(|p| p.name.clone()).collect();
    for name in ids {
        if name.ends_with(".bias") || name.ends_with(".gain") {
            let id = store.find(&name).unwrap();
            let shape = store.value(id).shape().to_vec();
            let base = if name.ends_with(".gain") { 1.0 } else { 0.0 };
            let v = rand_tensor(&mut rng, &shape).map(|z| base + 0.2 * z);
            *store.value_mut(id) = v;
        }
    }
    let x = store.add("x", rand_tensor(&mut rng, &[4, 8]));
    let r = rand_tensor(&mut rng, &[4, 8]);
    check(&mut store, |s| {
        let xv = s.value(x).clone();
        let (y, cache) = attn.forward(s, &xv)?;
        let dx = attn.backward(s, &cache, &r);
        s.grad_mut(x).add_assign(&dx);
        Ok(probe(&y, &r))
    })
}

pub fn scan_block() -> f64 {
    let mut rng = RngStream::new(6);
    let mut store = ParamStore::new();
    let block = ScanBlock::new(&mut store, "scan", 5, &mut rng);
    let x = store.add("x", rand_tensor(&mut rng, &[7, 5]));
    let r = rand_tensor(&mut rng, &[7, 5]);
    check(&mut store, |s| {
        let xv = s.value(x).clone();
        let (y, cache) = block.forward(s, &xv)?;
        let dx = block.backward(s, &xv, &cache, &r);
        s.grad_mut(x).add_assign(&dx);
        Ok(probe(&y, &r))
    })
}

pub fn raw_selective_scan() -> f64 {
    let mut rng = RngStream::new(7);
    let mut store = ParamStore::new();
    let x = store.add("x", rand_tensor(&mut rng, &[9, 3]));
    let a = store.add("decay", rand_tensor(&mut rng, &[9, 3]).map(|v| 1.0 / (1.0 + (-v).exp())));
    let b = store.add("gate_in", rand_tensor(&mut rng, &[9, 3]));
    let c = store.add("gate_out", rand_tensor(&mut rng, &[9, 3]));
    let r = rand_tensor(&mut rng, &[9, 3]);
    check(&mut store, |s| {
        let (xv, av, bv, cv) = (s.value(x).clone(), s.value(a).clone(), s.value(b).clone(), s.value(c).clone());
        let (y, h) = selective_scan_with_state(&xv, &av, &bv, &cv)?;
        let g = selective_scan_backward(&xv, &av, &bv, &cv, &h, &r);
        s.grad_mut(x).add_assign(&g.x);
        s.grad_mut(a).add_assign(&g.decay);
        s.grad_mut(b).add_assign(&g.gate_in);
        s.grad_mut(c).add_assign(&g.gate_out);
        Ok(probe(&y, &r))
    })
}

pub fn moe() -> f64 {
    let mut rng = RngStream::new(8);
    let mut store = ParamStore::new();
    let moe = MoeLayer::new(&mut store, "moe", 6, 2, &mut rng).unwrap();
    let rb = moe.router.bias.unwrap();
    *store.value_mut(rb) = rand_tensor(&mut rng, &[2]);
    let x = store.add("x", rand_tensor(&mut rng, &[4, 6]));
    let r = rand_tensor(&mut rng, &[4, 6]);
    check(&mut store, |s| {
        let xv = s.value(x).clone();
        let (y, cache) = moe.forward(s, &xv)?;
        let dx = moe.backward(s, &xv, &cache, &r);
        s.grad_mut(x).add_assign(&dx);
        Ok(probe(&y, &r))
    })
}

pub fn resample() -> f64 {
    let mut rng = RngStream::new(9);
    let mut store = ParamStore::new();
    let plan = ResamplePlan::new(12, 30.0, 50.0).unwrap();
    let x = store.add("x", rand_tensor(&mut rng, &[12, 3]));
    let r = rand_tensor(&mut rng, &[plan.frames_out(), 3]);
    check(&mut store, |s| {
        let y = plan.apply(s.value(x))?;
        let dx = plan.backward(&r);
        s.grad_mut(x).add_assign(&dx);
        Ok(probe(&y, &r))
    })
}

/// Every layer of the numeric core, by name.
pub fn all_layers() -> Vec<(&'static str, f64)> {
    vec![
        ("linear", linear()),
        ("layer_norm", layer_norm()),
        ("softmax", softmax()),
        ("log_softmax", log_softmax()),
        ("dropout", dropout_frozen_mask()),
        ("attention", attention()),
        ("scan_block", scan_block()),
        ("selective_scan", raw_selective_scan()),
        ("moe", moe()),
        ("resample", resample()),
    ]
}

/// Classifier head plus weighted cross-entropy, dropout off.
pub fn sed_head_and_loss() -> f64 {
    let mut rng = RngStream::new(11);
    let mut head = SedHead::new(SedHeadConfig { dropout: 0.0, ..Default::default() }, &mut rng).unwrap();
    let x = random_matrix(3, 768, 1.0, &mut rng);
    let labels = [EmotionClass::Fear, EmotionClass::Happy, EmotionClass::Upset];
    let weights = ClassWeights::from_array([0.3, 0.5, 2.1, 0.8, 1.0, 1.2, 1.1]).unwrap();
    let mut store = std::mem::take(&mut head.store);
    let report = finite_diff_check(
        &mut store,
        |s| {
            std::mem::swap(&mut head.store, s);
            let mut r = RngStream::new(0);
            let (z, cache) = head.forward(&x, false, &mut r)?;
            let (loss, dz) = weighted_frame_ce(&z, &labels, &weights)?;
            head.backward(&x, &cache, &dz);
            std::mem::swap(&mut head.store, s);
            Ok(loss)
        },
        GradCheckConfig { coords_per_param: 24, ..Default::default() },
    )
    .unwrap();
    report.max_rel_err
}
