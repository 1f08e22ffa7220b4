//! Diagonal gated linear recurrence and the expert block built on it.
//!
//! `h_t = decay_t ⊙ h_{t-1} + gate_in_t ⊙ x_t`, `h_{-1} = 0`, `y_t = gate_out_t ⊙ h_t`.
//! One pass forward and one reverse pass backward; both linear in `T`.

use crate::error::{Error, Result};
use crate::numeric::layers::{sigmoid, sigmoid_backward, Linear};
use crate::numeric::params::ParamStore;
use crate::numeric::rng::RngStream;
use crate::numeric::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct ScanGrads {
    pub x: Tensor,
    pub decay: Tensor,
    pub gate_in: Tensor,
    pub gate_out: Tensor,
}

fn check_same_shape(parts: [&Tensor; 4]) -> Result<()> {
    let shape = parts[0].shape();
    if shape.len() != 2 {
        return Err(Error::dim("selective scan expects T×D inputs"));
    }
    for p in &parts[1..] {
        if p.shape() != shape {
            return Err(Error::dim(format!(
                "selective scan inputs disagree: {:?} vs {:?}",
                shape,
                p.shape()
            )));
        }
    }
    Ok(())
}

/// Runs the recurrence, returning the outputs and the hidden states (needed for backward).
pub fn selective_scan_with_state(
    x: &Tensor,
    decay: &Tensor,
    gate_in: &Tensor,
    gate_out: &Tensor,
) -> Result<(Tensor, Tensor)> {
    check_same_shape([x, decay, gate_in, gate_out])?;
    let (t_len, d) = (x.rows(), x.cols());
    let mut hidden = Tensor::zeros(&[t_len, d]);
    let mut y = Tensor::zeros(&[t_len, d]);
    let mut h = vec![0.0; d];
    for t in 0..t_len {
        let (xr, ar, br, cr) = (x.row(t), decay.row(t), gate_in.row(t), gate_out.row(t));
        let yr = y.row_mut(t);
        for c in 0..d {
            h[c] = ar[c] * h[c] + br[c] * xr[c];
            yr[c] = cr[c] * h[c];
        }
        hidden.row_mut(t).copy_from_slice(&h);
    }
    Ok((y, hidden))
}

pub fn selective_scan(
    x: &Tensor,
    decay: &Tensor,
    gate_in: &Tensor,
    gate_out: &Tensor,
) -> Result<Tensor> {
    selective_scan_with_state(x, decay, gate_in, gate_out).map(|(y, _)| y)
}

pub fn selective_scan_backward(
    x: &Tensor,
    decay: &Tensor,
    gate_in: &Tensor,
    gate_out: &Tensor,
    hidden: &Tensor,
    dy: &Tensor,
) -> ScanGrads {
    let (t_len, d) = (x.rows(), x.cols());
    let mut gx = Tensor::zeros(&[t_len, d]);
    let mut ga = Tensor::zeros(&[t_len, d]);
    let mut gb = Tensor::zeros(&[t_len, d]);
    let mut gc = Tensor::zeros(&[t_len, d]);
    // Gradient flowing into h_t from h_{t+1}.
    let mut carry = vec![0.0; d];
    for t in (0..t_len).rev() {
        let dyr = dy.row(t);
        let hr = hidden.row(t);
        let cr = gate_out.row(t);
        for c in 0..d {
            gc.row_mut(t)[c] = dyr[c] * hr[c];
            let dh = dyr[c] * cr[c] + carry[c];
            let h_prev = if t > 0 { hidden.row(t - 1)[c] } else { 0.0 };
            ga.row_mut(t)[c] = dh * h_prev;
            gb.row_mut(t)[c] = dh * x.row(t)[c];
            gx.row_mut(t)[c] = dh * gate_in.row(t)[c];
            carry[c] = dh * decay.row(t)[c];
        }
    }
    ScanGrads {
        x: gx,
        decay: ga,
        gate_in: gb,
        gate_out: gc,
    }
}

/// Expert sub-block: input-dependent decay and gates feeding one selective scan.
///
/// `u → (x = Wx u, a = σ(Wa u), b = σ(Wb u), c = σ(Wc u)) → scan → Wo y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanBlock {
    pub dim: usize,
    pub input: Linear,
    pub decay: Linear,
    pub gate_in: Linear,
    pub gate_out: Linear,
    pub output: Linear,
}

#[derive(Debug, Clone)]
pub struct ScanBlockCache {
    x: Tensor,
    a: Tensor,
    b: Tensor,
    c: Tensor,
    hidden: Tensor,
    y: Tensor,
}

impl ScanBlock {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, rng: &mut RngStream) -> Self {
        Self {
            dim,
            input: Linear::new(store, &format!("{name}.input"), dim, dim, true, rng),
            decay: Linear::new(store, &format!("{name}.decay"), dim, dim, true, rng),
            gate_in: Linear::new(store, &format!("{name}.gate_in"), dim, dim, true, rng),
            gate_out: Linear::new(store, &format!("{name}.gate_out"), dim, dim, true, rng),
            output: Linear::new(store, &format!("{name}.output"), dim, dim, true, rng),
        }
    }

    pub fn forward(&self, store: &ParamStore, u: &Tensor) -> Result<(Tensor, ScanBlockCache)> {
        let x = self.input.forward(store, u)?;
        let a = sigmoid(&self.decay.forward(store, u)?);
        let b = sigmoid(&self.gate_in.forward(store, u)?);
        let c = sigmoid(&self.gate_out.forward(store, u)?);
        let (y, hidden) = selective_scan_with_state(&x, &a, &b, &c)?;
        let out = self.output.forward(store, &y)?;
        Ok((
            out,
            ScanBlockCache {
                x,
                a,
                b,
                c,
                hidden,
                y,
            },
        ))
    }

    pub fn backward(
        &self,
        store: &mut ParamStore,
        u: &Tensor,
        cache: &ScanBlockCache,
        dout: &Tensor,
    ) -> Tensor {
        let dy = self.output.backward(store, &cache.y, dout);
        let g = selective_scan_backward(&cache.x, &cache.a, &cache.b, &cache.c, &cache.hidden, &dy);
        let mut du = self.input.backward(store, u, &g.x);
        du.add_assign(&self.decay.backward(store, u, &sigmoid_backward(&cache.a, &g.decay)));
        du.add_assign(&self.gate_in.backward(store, u, &sigmoid_backward(&cache.b, &g.gate_in)));
        du.add_assign(&self.gate_out.backward(store, u, &sigmoid_backward(&cache.c, &g.gate_out)));
        du
    }
}
