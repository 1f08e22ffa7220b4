use crate::animator::ctc::CharSequence;
use crate::animator::mesh::TemplateMesh;
use crate::corpus::EmotionClass;
use crate::diarization::{EmotionIntensityTable, EmotionState};
use crate::numeric::{linear_resample, RngStream, Tensor};

/// One training example at the animation frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AnimatorSample {
    pub id: String,
    /// `T×D_audio` at 30 fps.
    pub audio: Tensor,
    pub state: EmotionState,
    /// `T×3N`.
    pub truth: Tensor,
    /// `T50×d_lip` at 50 fps.
    pub text_features: Tensor,
    pub chars: CharSequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub template: TemplateMesh,
    pub samples: Vec<AnimatorSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub samples: usize,
    pub frames: usize,
    pub vertices: usize,
    pub audio_dim: usize,
    pub lip_dim: usize,
    pub lip_count: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            samples: 8,
            frames: 30,
            vertices: 50,
            audio_dim: 32,
            lip_dim: 8,
            lip_count: 10,
        }
    }
}

/// Motion amplitude for a state. Grows with the intensity level.
pub fn state_amplitude(state: EmotionState) -> f64 {
    let base = 0.6 + 0.12 * state.0.id() as f64;
    match state.0 {
        EmotionClass::Neutral => 0.4,
        _ => base * (1.0 + f64::from(state.1)) / 4.0,
    }
}

/// Oscillation rate multiplier for a state's feature tracks.
pub fn state_frequency(state: EmotionState) -> f64 {
    1.0 + 0.15 * state.0.id() as f64 + 0.1 * f64::from(state.1)
}

/// Deformed unit sphere, y up. The upper face is the highest third of the
/// vertices; the lips are the `lip_count` remaining vertices nearest the
/// lower front.
pub fn synth_template(vertices: usize, lip_count: usize, seed: u64) -> TemplateMesh {
    let mut rng = RngStream::new(seed).fork(0x7E);
    let n = vertices.max(2);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut pos = Vec::with_capacity(3 * n);
    for i in 0..n {
        let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - y * y).sqrt();
        let phi = golden * i as f64;
        let (x, z) = (r * phi.cos(), r * phi.sin());
        let bump = 1.0 + 0.12 * (3.0 * phi).cos() * r + 0.05 * rng.uniform(-1.0, 1.0);
        pos.extend([x * bump * 0.8, y * bump, z * bump * 0.9]);
    }
    let positions = Tensor::matrix(n, 3, pos).expect("finite");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| positions.row(b)[1].total_cmp(&positions.row(a)[1]).then(a.cmp(&b)));
    let upper_len = n.div_ceil(3).min(n - 1);
    let mut upper: Vec<usize> = order[..upper_len].to_vec();
    upper.sort_unstable();
    let mouth = [0.0, -0.55, 0.8];
    let mut rest: Vec<usize> = order[upper_len..].to_vec();
    let dist = |i: usize| -> f64 {
        let p = positions.row(i);
        (0..3).map(|k| (p[k] - mouth[k]).powi(2)).sum()
    };
    rest.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
    let mut lips: Vec<usize> = rest[..lip_count.clamp(1, rest.len())].to_vec();
    lips.sort_unstable();
    TemplateMesh::new(positions, lips, upper).expect("disjoint by construction")
}

/// Deterministic toy corpus: vertex motion is a state-scaled linear function
/// of the audio feature tracks, and text features are a fixed projection of
/// the lip motion at 50 fps.
pub fn synth_dataset(seed: u64, config: SynthConfig) -> SynthDataset {
    let c = config;
    let template = synth_template(c.vertices, c.lip_count, seed);
    let n = template.vertex_count();
    let mut rng = RngStream::new(seed);
    let basis_scale = 0.05 / (c.audio_dim as f64).sqrt();
    let basis: Vec<f64> = (0..c.audio_dim * 3 * n).map(|_| basis_scale * rng.normal()).collect();
    let lips = template.lip_indices.clone();
    let text_proj: Vec<f64> = (0..3 * lips.len() * c.lip_dim)
        .map(|_| 10.0 * rng.normal() / (3.0 * lips.len() as f64).sqrt())
        .collect();
    let states = EmotionIntensityTable::states();
    let frames = c.frames.max(2);

    let samples = (0..c.samples)
        .map(|i| {
            let state = states[rng.below(states.len())];
            let amp = state_amplitude(state);
            let freq = state_frequency(state);
            let rates: Vec<f64> = (0..c.audio_dim).map(|_| rng.uniform(0.5, 3.0) * freq).collect();
            let phases: Vec<f64> = (0..c.audio_dim).map(|_| rng.uniform(0.0, std::f64::consts::TAU)).collect();
            let mut audio = Tensor::zeros(&[frames, c.audio_dim]);
            for t in 0..frames {
                let time = t as f64 / 30.0;
                for (j, a) in audio.row_mut(t).iter_mut().enumerate() {
                    *a = (std::f64::consts::TAU * rates[j] * time + phases[j]).sin();
                }
            }
            let mut truth = Tensor::zeros(&[frames, 3 * n]);
            for t in 0..frames {
                let a = audio.row(t).to_vec();
                let row = truth.row_mut(t);
                row.copy_from_slice(template.flat());
                for (j, &aj) in a.iter().enumerate() {
                    let b = &basis[j * 3 * n..(j + 1) * 3 * n];
                    for (r, bv) in row.iter_mut().zip(b) {
                        *r += amp * aj * bv;
                    }
                }
                for &l in &lips {
                    row[3 * l + 1] -= amp * 0.05 * (a[0] + 1.0);
                }
            }
            let mut lip_motion = Tensor::zeros(&[frames, c.lip_dim]);
            for t in 0..frames {
                let row = truth.row(t);
                let out = lip_motion.row_mut(t);
                for (j, &l) in lips.iter().enumerate() {
                    for k in 0..3 {
                        let d = row[3 * l + k] - template.flat()[3 * l + k];
                        let p = &text_proj[(3 * j + k) * c.lip_dim..(3 * j + k + 1) * c.lip_dim];
                        for (o, pv) in out.iter_mut().zip(p) {
                            *o += d * pv;
                        }
                    }
                }
            }
            let text_features = linear_resample(&lip_motion, 30.0, 50.0).expect("at least two frames");
            let word_len = 1 + rng.below(4);
            let chars = CharSequence::new((0..word_len).map(|_| 1 + rng.below(26)).collect()).expect("non-blank");
            AnimatorSample { id: format!("synth{i:04}"), audio, state, truth, text_features, chars }
        })
        .collect();
    SynthDataset { template, samples }
}
