use crate::error::{Error, Result};
use crate::numeric::tensor::Tensor;

/// Precomputed linear-interpolation weights from one frame rate to another.
///
/// Output frame `k` samples time `k / rate_out`, i.e. fractional input index
/// `k · rate_in / rate_out`, clamped to the last input frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ResamplePlan {
    pub frames_in: usize,
    taps: Vec<(usize, usize, f64)>,
}

impl ResamplePlan {
    pub fn new(frames_in: usize, rate_in: f64, rate_out: f64) -> Result<Self> {
        if frames_in < 2 {
            return Err(Error::Input(format!(
                "resampling needs at least 2 frames, got {frames_in}"
            )));
        }
        if !(rate_in > 0.0 && rate_out > 0.0) || !rate_in.is_finite() || !rate_out.is_finite() {
            return Err(Error::Parameter(format!(
                "frame rates must be positive, got {rate_in} -> {rate_out}"
            )));
        }
        let frames_out = output_len(frames_in, rate_in, rate_out);
        let last = frames_in - 1;
        let taps = (0..frames_out)
            .map(|k| {
                let pos = (k as f64 * rate_in / rate_out).min(last as f64);
                let lo = (pos.floor() as usize).min(last);
                let hi = (lo + 1).min(last);
                (lo, hi, pos - lo as f64)
            })
            .collect();
        Ok(Self { frames_in, taps })
    }

    pub fn frames_out(&self) -> usize {
        self.taps.len()
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        if x.rows() != self.frames_in {
            return Err(Error::dim(format!(
                "resample plan built for {} frames, got {}",
                self.frames_in,
                x.rows()
            )));
        }
        let d = x.cols();
        let mut out = Tensor::zeros(&[self.taps.len(), d]);
        for (k, &(lo, hi, w)) in self.taps.iter().enumerate() {
            let (a, b) = (x.row(lo), x.row(hi));
            for (o, (&va, &vb)) in out.row_mut(k).iter_mut().zip(a.iter().zip(b)) {
                *o = if w == 0.0 { va } else { (1.0 - w) * va + w * vb };
            }
        }
        Ok(out)
    }

    /// Adjoint of [`apply`](Self::apply).
    pub fn backward(&self, dout: &Tensor) -> Tensor {
        let d = dout.cols();
        let mut dx = Tensor::zeros(&[self.frames_in, d]);
        for (k, &(lo, hi, w)) in self.taps.iter().enumerate() {
            let g = dout.row(k).to_vec();
            for (dv, &gv) in dx.row_mut(lo).iter_mut().zip(&g) {
                *dv += (1.0 - w) * gv;
            }
            if w != 0.0 {
                for (dv, &gv) in dx.row_mut(hi).iter_mut().zip(&g) {
                    *dv += w * gv;
                }
            }
        }
        dx
    }
}

/// `round(frames_in · rate_out / rate_in)`.
pub fn output_len(frames_in: usize, rate_in: f64, rate_out: f64) -> usize {
    (frames_in as f64 * rate_out / rate_in).round() as usize
}

pub fn linear_resample(x: &Tensor, rate_in: f64, rate_out: f64) -> Result<Tensor> {
    ResamplePlan::new(x.rows(), rate_in, rate_out)?.apply(x)
}
