use crate::corpus::{EmotionClass, NUM_CLASSES};
use crate::diarization::timeline::EmotionTimeline;
use crate::error::{Error, Result};
use crate::numeric::{Init, ParamId, ParamStore, RngStream, Tensor};

/// An `(emotion, intensity level)` pair.
pub type EmotionState = (EmotionClass, u8);

/// Learned emotion embeddings plus an intensity direction:
/// `e(c, ℓ) = Emb[c] + W_i · i(ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmotionIntensityTable {
    pub embedding: ParamId,
    pub intensity_proj: ParamId,
    pub dim: usize,
}

impl EmotionIntensityTable {
    /// 6 emotions × 3 levels, plus neutral.
    pub const NUM_STATES: usize = 19;

    pub fn new(store: &mut ParamStore, name: &str, dim: usize, rng: &mut RngStream) -> Self {
        let embedding = store.add_init(format!("{name}.embedding"), &[NUM_CLASSES, dim], Init::Uniform(1.0), rng);
        let intensity_proj = store.add_init(format!("{name}.intensity"), &[dim], Init::Uniform(1.0), rng);
        Self { embedding, intensity_proj, dim }
    }

    /// Levels 1, 2, 3 map to 1/3, 2/3, 1; neutral carries no intensity.
    pub fn intensity_value(state: EmotionState) -> f64 {
        match state {
            (EmotionClass::Neutral, _) => 0.0,
            (_, level) => f64::from(level) / 3.0,
        }
    }

    /// Every distinct conditioning state.
    pub fn states() -> Vec<EmotionState> {
        let mut out = Vec::with_capacity(Self::NUM_STATES);
        for c in EmotionClass::ALL {
            if c == EmotionClass::Neutral {
                out.push((c, 1));
            } else {
                out.extend((1..=3).map(|l| (c, l)));
            }
        }
        out
    }

    pub fn state_vector(&self, store: &ParamStore, state: EmotionState) -> Vec<f64> {
        let row = store.value(self.embedding).row(state.0.id());
        let w = store.value(self.intensity_proj).data();
        let i = Self::intensity_value(state);
        row.iter().zip(w).map(|(e, w)| e + w * i).collect()
    }

    /// Accumulates `dvec` into the table parameters for `state` scaled by `k`.
    fn accumulate(&self, store: &mut ParamStore, state: EmotionState, k: f64, dvec: &[f64]) {
        let i = Self::intensity_value(state);
        let g = store.grad_mut(self.embedding).row_mut(state.0.id());
        for (a, d) in g.iter_mut().zip(dvec) {
            *a += k * d;
        }
        if i != 0.0 {
            let g = store.grad_mut(self.intensity_proj).data_mut();
            for (a, d) in g.iter_mut().zip(dvec) {
                *a += k * i * d;
            }
        }
    }
}

/// `c_t = (1 − α) e(from) + α e(to)`. Pure frames have `from == to`, `α = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMix {
    pub from: EmotionState,
    pub to: EmotionState,
    pub alpha: f64,
}

impl FrameMix {
    fn pure(state: EmotionState) -> Self {
        Self { from: state, to: state, alpha: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningSequence {
    pub fps: f64,
    pub vectors: Tensor,
    pub mix: Vec<FrameMix>,
}

impl ConditioningSequence {
    pub fn len(&self) -> usize {
        self.mix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mix.is_empty()
    }

    /// A constant single-state sequence of `frames` frames.
    pub fn constant(table: &EmotionIntensityTable, store: &ParamStore, state: EmotionState, fps: f64, frames: usize) -> Self {
        let mix = vec![FrameMix::pure(state); frames];
        let vectors = mix_vectors(table, store, &mix);
        Self { fps, vectors, mix }
    }

    /// Routes `dC` (`T×d`) back into the table parameters.
    pub fn backward(&self, table: &EmotionIntensityTable, store: &mut ParamStore, dc: &Tensor) {
        for (t, m) in self.mix.iter().enumerate() {
            let g = dc.row(t);
            if m.alpha != 1.0 {
                table.accumulate(store, m.from, 1.0 - m.alpha, g);
            }
            if m.alpha != 0.0 {
                table.accumulate(store, m.to, m.alpha, g);
            }
        }
    }
}

/// `⌈duration · fps⌉`, with float slack so exact multiples are not rounded up.
pub fn conditioning_frames(duration: f64, fps: f64) -> usize {
    (duration * fps - 1e-9).ceil().max(0.0) as usize
}

pub fn build_conditioning(
    timeline: &EmotionTimeline,
    table: &EmotionIntensityTable,
    store: &ParamStore,
    fps: f64,
    transition_frames: usize,
) -> Result<ConditioningSequence> {
    let frames = conditioning_frames(timeline.duration, fps);
    build_conditioning_frames(timeline, table, store, fps, transition_frames, frames)
}

/// As [`build_conditioning`], with the frame count fixed by the caller.
///
/// Frame `t` belongs to the segment containing `t / fps`. Each state change
/// gets a window of up to `transition_frames` frames centered on the first
/// frame of the new segment, over which α rises linearly from 0 to 1. The
/// half-width shrinks so that no window reaches past the middle of either
/// adjoining segment; a half-width of 0 is a hard switch.
pub fn build_conditioning_frames(
    timeline: &EmotionTimeline,
    table: &EmotionIntensityTable,
    store: &ParamStore,
    fps: f64,
    transition_frames: usize,
    frames: usize,
) -> Result<ConditioningSequence> {
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(Error::Parameter(format!("fps must be positive, got {fps}")));
    }
    if transition_frames % 2 == 0 {
        return Err(Error::Parameter(format!("transition window {transition_frames} must be odd")));
    }
    timeline.validate_smoothed()?;
    if frames > 0 && timeline.segments.is_empty() {
        return Err(Error::EmptyTimeline(timeline.duration));
    }

    // First frame of each segment; segments that own no frame drop out.
    let mut runs: Vec<(usize, usize, EmotionState)> = Vec::new();
    for (i, s) in timeline.segments.iter().enumerate() {
        let begin = if i == 0 { 0 } else { ((s.start * fps - 1e-9).ceil().max(0.0) as usize).min(frames) };
        if let Some(last) = runs.last_mut() {
            last.1 = begin.max(last.0);
        }
        runs.push((begin, frames, s.state()));
    }
    runs.retain(|r| r.1 > r.0);

    let mut mix: Vec<FrameMix> = Vec::with_capacity(frames);
    for &(b, e, state) in &runs {
        mix.extend(std::iter::repeat(FrameMix::pure(state)).take(e - b));
    }
    let max_half = (transition_frames - 1) / 2;
    for w in runs.windows(2) {
        let (prev, cur) = (w[0], w[1]);
        if prev.2 == cur.2 {
            continue;
        }
        let half = max_half.min((prev.1 - prev.0 - 1) / 2).min((cur.1 - cur.0 - 1) / 2);
        let b = cur.0;
        for k in 0..=2 * half {
            let alpha = if half == 0 { 1.0 } else { k as f64 / (2 * half) as f64 };
            mix[b - half + k] = FrameMix { from: prev.2, to: cur.2, alpha };
        }
    }
    let vectors = mix_vectors(table, store, &mix);
    Ok(ConditioningSequence { fps, vectors, mix })
}

fn mix_vectors(table: &EmotionIntensityTable, store: &ParamStore, mix: &[FrameMix]) -> Tensor {
    let d = table.dim;
    let mut data = Vec::with_capacity(mix.len() * d);
    for m in mix {
        if m.alpha == 1.0 {
            data.extend(table.state_vector(store, m.to));
        } else if m.alpha == 0.0 {
            data.extend(table.state_vector(store, m.from));
        } else {
            let a = table.state_vector(store, m.from);
            let b = table.state_vector(store, m.to);
            data.extend(a.iter().zip(&b).map(|(x, y)| (1.0 - m.alpha) * x + m.alpha * y));
        }
    }
    Tensor::matrix(mix.len(), d, data).expect("table values are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diarization::timeline::EmotionSegment;

    fn timeline(bounds: &[(f64, f64, EmotionClass, u8)], duration: f64) -> EmotionTimeline {
        EmotionTimeline {
            duration,
            segments: bounds
                .iter()
                .map(|&(start, end, emotion, intensity)| EmotionSegment { start, end, emotion, intensity, mean_posterior: 0.9 })
                .collect(),
        }
    }

    fn setup() -> (ParamStore, EmotionIntensityTable) {
        let mut store = ParamStore::new();
        let table = EmotionIntensityTable::new(&mut store, "cond", 4, &mut RngStream::new(1));
        (store, table)
    }

    #[test]
    fn nineteen_states_are_distinct() {
        let (store, table) = setup();
        let states = EmotionIntensityTable::states();
        assert_eq!(states.len(), EmotionIntensityTable::NUM_STATES);
        let vecs: Vec<_> = states.iter().map(|&s| table.state_vector(&store, s)).collect();
        for i in 0..vecs.len() {
            for j in 0..i {
                assert_ne!(vecs[i], vecs[j]);
            }
        }
    }

    #[test]
    fn single_segment_is_constant() {
        let (store, table) = setup();
        let t = timeline(&[(0.0, 1.0, EmotionClass::Happy, 2)], 1.0);
        let c = build_conditioning(&t, &table, &store, 30.0, 9).unwrap();
        assert_eq!(c.len(), 30);
        let e = table.state_vector(&store, (EmotionClass::Happy, 2));
        for r in c.vectors.row_iter() {
            assert_eq!(r, &e[..]);
        }
    }

    #[test]
    fn window_center_is_midpoint_and_ends_are_pure() {
        let (store, table) = setup();
        let t = timeline(&[(0.0, 1.0, EmotionClass::Angry, 3), (1.0, 2.0, EmotionClass::Sad, 1)], 2.0);
        let c = build_conditioning(&t, &table, &store, 30.0, 9).unwrap();
        let a = table.state_vector(&store, (EmotionClass::Angry, 3));
        let b = table.state_vector(&store, (EmotionClass::Sad, 1));
        assert_eq!(c.mix[30].alpha, 0.5);
        for k in 0..4 {
            assert!((c.vectors.row(30)[k] - 0.5 * (a[k] + b[k])).abs() < 1e-15);
        }
        assert_eq!(c.mix[26].alpha, 0.0);
        assert_eq!(c.vectors.row(26), &a[..]);
        assert_eq!(c.mix[34].alpha, 1.0);
        assert_eq!(c.vectors.row(34), &b[..]);
        assert_eq!(c.vectors.row(25), &a[..]);
    }

    #[test]
    fn unit_window_is_hard_switch() {
        let (store, table) = setup();
        let t = timeline(&[(0.0, 1.0, EmotionClass::Angry, 3), (1.0, 2.0, EmotionClass::Sad, 1)], 2.0);
        let c = build_conditioning(&t, &table, &store, 30.0, 1).unwrap();
        assert_eq!(c.vectors.row(29), &table.state_vector(&store, (EmotionClass::Angry, 3))[..]);
        assert_eq!(c.vectors.row(30), &table.state_vector(&store, (EmotionClass::Sad, 1))[..]);
    }

    #[test]
    fn short_segments_clamp_windows() {
        let (store, table) = setup();
        let t = timeline(
            &[(0.0, 1.0, EmotionClass::Angry, 3), (1.0, 1.1, EmotionClass::Sad, 1), (1.1, 2.0, EmotionClass::Fear, 2)],
            2.0,
        );
        let c = build_conditioning(&t, &table, &store, 30.0, 9).unwrap();
        // The middle segment owns frames 30..33, so both windows have half-width 1.
        let alphas: Vec<f64> = c.mix[28..35].iter().map(|m| m.alpha).collect();
        assert_eq!(alphas, vec![1.0, 0.0, 0.5, 1.0, 0.0, 0.5, 1.0]);
    }
}
